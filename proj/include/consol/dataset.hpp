#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "consol/binary_io.hpp"
#include "consol/consolidation.hpp"
#include "consol/integrators.hpp"
#include "consol/random_fields.hpp"

namespace consol {

struct OperatorDataset;

/// Per-component mean / standard deviation used to standardize network inputs and targets.
struct StandardizationStats {
  std::vector<double> branch_mean, branch_std;  ///< one per sensor
  double cv_mean = 0.0, cv_std = 1.0;
  std::array<double, 2> coord_mean{0.0, 0.0};  ///< (z, t)
  std::array<double, 2> coord_std{1.0, 1.0};
  double target_mean = 0.0, target_std = 1.0;

  /// Throws DomainError if any std is not strictly positive.
  void validate() const;

  /// Population statistics of a dataset's own entries.
  static StandardizationStats from_dataset(const OperatorDataset& ds);

  double standardize_target(double pa) const { return (pa - target_mean) / target_std; }
  double destandardize_target(double s) const { return s * target_std + target_mean; }
  double standardize_cv(double cv) const { return (cv - cv_mean) / cv_std; }
  double standardize_z(double z) const { return (z - coord_mean[0]) / coord_std[0]; }
  double standardize_t(double t) const { return (t - coord_mean[1]) / coord_std[1]; }
  double standardize_branch(std::size_t sensor, double pa) const {
    return (pa - branch_mean[sensor]) / branch_std[sensor];
  }
};

nlohmann::json to_json(const StandardizationStats& s);
StandardizationStats stats_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IntegratorConfig& c);
IntegratorConfig integrator_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SamplingRanges& r);
SamplingRanges ranges_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GrfSpec& g);
GrfSpec grf_from_json(const nlohmann::json& j);

/// N input functions, each with P evaluation points and targets.
struct OperatorDataset {
  std::size_t n = 0, m = 0, p = 0;
  std::vector<double> branch_inputs;  ///< n x m, Pa
  std::vector<double> cv_values;      ///< n, m^2/year
  std::vector<double> eval_points;    ///< n x p x 2, (z normalized, t years)
  std::vector<double> targets;        ///< n x p, Pa
  std::optional<StandardizationStats> stats;
  nlohmann::json meta = nlohmann::json::object();

  double z(std::size_t i, std::size_t j) const { return eval_points[(i * p + j) * 2]; }
  double t(std::size_t i, std::size_t j) const { return eval_points[(i * p + j) * 2 + 1]; }
  double target(std::size_t i, std::size_t j) const { return targets[i * p + j]; }
  std::span<const double> branch(std::size_t i) const {
    return std::span(branch_inputs).subspan(i * m, m);
  }

  /// The consolidation case behind input function i (h_dr taken from meta, default 1).
  ConsolidationCase case_at(std::size_t i) const;

  /// Shape consistency, finiteness and the (z, tv) domain bounds.
  void validate() const;
};

struct GenerationConfig {
  std::size_t n = 1, m = 100, p = 100;
  std::size_t nz = 100;
  double tv_max = 2.0;
  double h_dr = 1.0;
  SamplingRanges ranges;
  GrfSpec grf;
  double mix = 0.5;  ///< fraction of GRF profiles
  IntegratorConfig solver;
  std::uint64_t seed = 0;
  bool training = false;  ///< compute standardization stats from this set

  void validate() const;
};

/// Profile kind of case i under a configuration (deterministic per seed).
ProfileKind case_kind(const GenerationConfig& cfg, std::size_t i);

/// The i-th case of the stream described by cfg.
ConsolidationCase generate_case(const GenerationConfig& cfg, std::size_t i);

/// Solves a case once and reads the field at arbitrary (z, t) points.
/// Times are integrated to exactly; depth is linearly interpolated on the nz grid.
std::vector<double> solve_targets(const ConsolidationCase& c, std::span<const double> points_zt,
                                  std::size_t nz, const IntegratorConfig& cfg);

OperatorDataset generate_dataset(const GenerationConfig& cfg);

/// Standardized copy of a dataset laid out for training.
struct StandardizedData {
  std::size_t n = 0, m = 0, p = 0;
  std::vector<double> branch;   ///< n x m
  std::vector<double> cv;       ///< n
  std::vector<double> points;   ///< n x p x 2
  std::vector<double> targets;  ///< n x p
};

StandardizedData standardize(const OperatorDataset& ds, const StandardizationStats& stats);

/// Exact inverse of standardize (up to rounding); keeps the source meta.
OperatorDataset destandardize(const StandardizedData& sd, const StandardizationStats& stats);

inline constexpr const char* kDatasetMagic = "CONSOL-OPERATOR-DATASET";
inline constexpr int kDatasetSchemaVersion = 1;

void save_dataset(const OperatorDataset& ds, const std::filesystem::path& dir,
                  DType dtype = DType::F64LE);
OperatorDataset load_dataset(const std::filesystem::path& dir);

}  // namespace consol
