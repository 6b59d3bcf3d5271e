#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "consol/consolidation.hpp"
#include "consol/dataset.hpp"
#include "consol/deeponet.hpp"
#include "consol/integrators.hpp"

namespace consol {

/// Evaluation grid: nz depths on [0, 1] and nt time factors on [0, tv_max].
struct GridSpec {
  std::size_t nz = 100;
  std::size_t nt = 100;
  double tv_max = 2.0;

  void validate() const;
  std::size_t points() const noexcept { return nz * nt; }
  /// Parses "NZxNT", e.g. "100x100".
  static GridSpec parse(const std::string& text);
};

/// Produces a pressure field (Pa, depths x times) for a case.
using FieldPredictor = std::function<Eigen::MatrixXd(const ConsolidationCase&, std::span<const double> depths,
                                                     std::span<const double> times)>;

template <typename T>
FieldPredictor make_predictor(const DeepOnet<T>& model) {
  return [&model](const ConsolidationCase& c, std::span<const double> z, std::span<const double> t) {
    return predict_field(model, c, z, t);
  };
}

/// Reference solver wrapped as a predictor (nz taken from the depth count).
FieldPredictor solver_predictor(const IntegratorConfig& cfg);

/// A saved model of either precision, loaded behind a predictor.
struct LoadedModel {
  ModelSpec spec;
  nlohmann::json manifest;
  std::optional<TrainingProvenance> provenance;
  std::shared_ptr<const void> holder;
  FieldPredictor predict;
  /// Standardized MSE over a dataset's stored (case, point) triples.
  std::function<double(const OperatorDataset&)> point_mse;
};

LoadedModel load_any_model(const std::filesystem::path& dir);

struct CaseRecord {
  std::size_t index = 0;
  double cv = 0.0;
  double mse_std = 0.0;   ///< standardized target units
  double mse_pa2 = 0.0;   ///< Pa^2
  double max_abs_err_pa = 0.0;
};

struct CaseFields {
  std::vector<double> depths, times, tv_times;
  Eigen::MatrixXd predicted, reference;
};

/// Compares a predictor against a reference BDF solve on the grid.
/// `target_std` converts Pa^2 into standardized units.
CaseRecord evaluate_on_grid(const FieldPredictor& model, const ConsolidationCase& c, const GridSpec& grid,
                            const IntegratorConfig& reference, double target_std, CaseFields* fields = nullptr);

struct EvalReport {
  std::vector<CaseRecord> cases;
  double mean_mse_pa2 = 0.0, std_mse_pa2 = 0.0;
  double mean_mse_std = 0.0, std_mse_std = 0.0;
  double max_abs_err_pa = 0.0;
  std::size_t worst = 0;  ///< position in `cases` with the largest MSE
  std::optional<CaseFields> worst_fields;
  nlohmann::json config = nlohmann::json::object();
};

/// Mean and population standard deviation plus the worst case of a record set.
EvalReport summarize(std::vector<CaseRecord> records);

/// Evaluates every case (in parallel when more than one core is available).
EvalReport aggregate(const FieldPredictor& model, const std::vector<ConsolidationCase>& cases, const GridSpec& grid,
                     const IntegratorConfig& reference, double target_std, bool keep_worst_fields = true);

/// Fresh test cases drawn like a generated dataset.
std::vector<ConsolidationCase> fresh_cases(GenerationConfig cfg);

std::vector<ConsolidationCase> cases_from_dataset(const OperatorDataset& ds);

struct SweepRow {
  double value = 0.0;
  bool in_distribution = true;
  std::size_t cases = 0;
  double mean_mse_pa2 = 0.0, std_mse_pa2 = 0.0;
  double mean_mse_std = 0.0;
};

struct SweepTable {
  std::string parameter;
  std::vector<SweepRow> rows;
};

/// Base generation settings for sweeps: the model's training distribution when known.
GenerationConfig sweep_base(const std::optional<TrainingProvenance>& provenance, std::size_t m_sensors);

/// Per-cv MSE. The in-distribution flag comes from `provenance` (the model's training range).
SweepTable sweep_cv(const FieldPredictor& model, const std::optional<TrainingProvenance>& provenance,
                    std::size_t m_sensors, std::span<const double> cv_values, std::size_t cases_per,
                    const GridSpec& grid, double target_std, std::uint64_t seed);

/// Per-correlation-length MSE over GRF-only test cases.
SweepTable sweep_length_scale(const FieldPredictor& model, const std::optional<TrainingProvenance>& provenance,
                              std::size_t m_sensors, std::span<const double> lengths, std::size_t cases_per,
                              const GridSpec& grid, double target_std, std::uint64_t seed);

struct TimingRecord {
  std::string method;
  std::vector<double> seconds;
  double mean = 0.0, std = 0.0;
};

struct BenchTarget {
  std::string label;
  FieldPredictor run;
};

/// Serial wall-clock timing of each target on the same cases (n >= 30), after `warmup` untimed runs.
std::vector<TimingRecord> benchmark(const std::vector<BenchTarget>& targets, const std::vector<ConsolidationCase>& cases,
                                    const GridSpec& grid, std::size_t warmup = 3);

nlohmann::json to_json(const GridSpec& g);
nlohmann::json to_json(const EvalReport& r, bool include_worst_fields = true);
nlohmann::json to_json(const SweepTable& t);
nlohmann::json to_json(const std::vector<TimingRecord>& records);

std::string eval_csv(const EvalReport& r);
std::string sweep_csv(const SweepTable& t);
std::string timing_csv(const std::vector<TimingRecord>& records);

/// Writes `report` as JSON and the table next to it with a .csv extension.
void write_report(const std::filesystem::path& json_path, const nlohmann::json& report, const std::string& csv);

}  // namespace consol
