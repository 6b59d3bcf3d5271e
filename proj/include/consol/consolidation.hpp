#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "consol/tridiagonal.hpp"

namespace consol {

/// One consolidation problem: coefficient, drainage length and the initial
/// excess pore pressure sampled at normalized sensor depths.
struct ConsolidationCase {
  double cv = 0.5;      ///< m^2/year
  double h_dr = 1.0;    ///< m
  std::vector<double> u0;             ///< Pa, one value per sensor
  std::vector<double> sensor_depths;  ///< normalized, 0 .. 1

  /// Throws DomainError when an invariant is broken.
  void validate() const;

  /// Constant initial pressure `u0_pa` at `m` equally spaced sensors.
  static ConsolidationCase uniform(double cv, double u0_pa, std::size_t m = 100, double h_dr = 1.0);

  /// Largest |u0| over the sensors.
  double max_abs_u0() const;
};

/// m equally spaced depths from 0 to 1 inclusive.
std::vector<double> equally_spaced_depths(std::size_t m);

/// Excess pressure on a depth x time grid.
struct SolutionField {
  std::vector<double> depths;    ///< normalized depth, Nz
  std::vector<double> times;     ///< years, Nt
  std::vector<double> tv_times;  ///< dimensionless, Nt
  Eigen::MatrixXd values;        ///< Pa, Nz x Nt

  /// Free-form label of the path that produced the field, e.g. "bdf2/adaptive".
  std::string method;
  /// How values at requested times were obtained from the step sequence.
  std::string dense_output;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  std::size_t nz() const noexcept { return depths.size(); }
  std::size_t nt() const noexcept { return times.size(); }

  /// True when every entry is finite.
  bool all_finite() const;
};

/// Dimensionless time factor cv * t / h_dr^2.
double time_factor(double cv, double t, double h_dr = 1.0);

/// Physical time (years) corresponding to a time factor.
double physical_time(double cv, double tv, double h_dr = 1.0);

inline constexpr double kSeriesTol = 1e-12;
inline constexpr std::size_t kSeriesMaxTerms = 10000;

/// Series solution for a uniform initial pressure under single drainage.
///
/// Terms are summed until the envelope 2|u0|/M exp(-M^2 tv) of the next term
/// drops below tol * |u0|. At tv == 0 the series limit (0 at z == 0, u0
/// elsewhere) is returned directly. Throws NumericalError if max_terms is hit.
double analytical_solution(double z, double tv, double u0_const, double tol = kSeriesTol,
                           std::size_t max_terms = kSeriesMaxTerms);

/// Average degree of consolidation U(tv) = 1 - sum 2/M^2 exp(-M^2 tv).
double average_degree_of_consolidation(double tv, double tol = kSeriesTol,
                                       std::size_t max_terms = kSeriesMaxTerms);

/// Analytical field for a uniform case on the given normalized depths and physical times.
SolutionField analytical_field(const ConsolidationCase& c, const std::vector<double>& depths,
                               const std::vector<double>& times);

/// Semi-discrete operator over the nz-1 unknown nodes (top Dirichlet node removed,
/// bottom row closed with the ghost node u[nz] = u[nz-1]), scaled by cv / dz^2.
Tridiagonal build_system_matrix(std::size_t nz, double dz, double cv);

}  // namespace consol
