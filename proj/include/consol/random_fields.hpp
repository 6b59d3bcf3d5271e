#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "consol/consolidation.hpp"
#include "consol/rng.hpp"

namespace consol {

/// Squared-exponential Gaussian random field over normalized depth.
struct GrfSpec {
  double mean = 15e3;          ///< Pa
  double variance = 1e9;       ///< Pa^2 (1000 kPa^2)
  double length_scale = 0.5;   ///< normalized depth
  double jitter = 10.0;        ///< Pa^2 added to the diagonal (1e-8 * variance)

  void validate() const;

  /// Default field with the jitter set to 1e-8 * variance.
  static GrfSpec with_variance(double variance, double length_scale, double mean = 15e3);
};

using Range = std::pair<double, double>;

struct SamplingRanges {
  Range u0_uniform_range{10e3, 20e3};  ///< Pa
  Range mean_range{10e3, 20e3};        ///< Pa
  Range cv_range{0.3, 1.0};            ///< m^2/year

  void validate() const;
};

enum class ProfileKind { Uniform, Grf };

std::string to_string(ProfileKind k);

/// C[i][j] = variance * exp(-|zi - zj|^2 / l^2) + jitter * [i == j].
Eigen::MatrixXd covariance_matrix(const std::vector<double>& depths, const GrfSpec& spec);

/// Lower Cholesky factor of the covariance. On failure the jitter is multiplied
/// by 10 up to three times before NumericalError is thrown.
Eigen::MatrixXd grf_factor(const std::vector<double>& depths, const GrfSpec& spec,
                           double* jitter_used = nullptr);

/// mean + L xi with xi drawn from `rng`.
std::vector<double> sample_grf(const std::vector<double>& depths, const GrfSpec& spec, Rng& rng);
std::vector<double> sample_grf(const std::vector<double>& depths, const GrfSpec& spec,
                               std::uint64_t seed);

/// Draws one case from a single stream in the order: cv, then the constant
/// value (uniform) or the field mean (grf), then the field.
ConsolidationCase sample_case(const SamplingRanges& ranges, ProfileKind kind, const GrfSpec& grf,
                              std::size_t m, std::uint64_t seed);

}  // namespace consol
