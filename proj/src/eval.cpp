#include "consol/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "consol/binary_io.hpp"
#include "consol/errors.hpp"
#include "consol/rng.hpp"

namespace consol {

using nlohmann::json;

namespace {

constexpr std::uint64_t kSweepStream = 20;

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v, double mean) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

void GridSpec::validate() const {
  if (nz < 3 || nt < 1) throw DomainError("grid: need at least 3 depths and 1 time");
  if (!(tv_max > 0.0) || !std::isfinite(tv_max)) throw DomainError("grid: tv_max must be positive");
}

GridSpec GridSpec::parse(const std::string& text) {
  const auto x = text.find_first_of("xX");
  GridSpec g;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    g.nz = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    const std::string rest = text.substr(x + 1);
    g.nt = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw DomainError("grid must look like NZxNT, got '" + text + "'");
  }
  g.validate();
  return g;
}

FieldPredictor solver_predictor(const IntegratorConfig& cfg) {
  return [cfg](const ConsolidationCase& c, std::span<const double> depths, std::span<const double> times) {
    return solve(c, depths.size(), times, cfg).values;
  };
}

LoadedModel load_any_model(const std::filesystem::path& dir) {
  LoadedModel out;
  out.manifest = read_model_manifest(dir);
  const DType dtype = parse_dtype(out.manifest.value("dtype", std::string("f32le")));
  if (dtype == DType::F32LE) {
    auto model = std::make_shared<const DeepOnet<float>>(load_model<float>(dir));
    out.spec = model->spec();
    out.provenance = model->state().provenance;
    out.predict = make_predictor(*model);
    out.point_mse = [m = model.get()](const OperatorDataset& ds) { return dataset_loss(*m, standardize(ds, m->spec().stats)); };
    out.holder = model;
  } else {
    auto model = std::make_shared<const DeepOnet<double>>(load_model<double>(dir));
    out.spec = model->spec();
    out.provenance = model->state().provenance;
    out.predict = make_predictor(*model);
    out.point_mse = [m = model.get()](const OperatorDataset& ds) { return dataset_loss(*m, standardize(ds, m->spec().stats)); };
    out.holder = model;
  }
  return out;
}

CaseRecord evaluate_on_grid(const FieldPredictor& model, const ConsolidationCase& c, const GridSpec& grid,
                            const IntegratorConfig& reference, double target_std, CaseFields* fields) {
  grid.validate();
  if (!(target_std > 0.0)) throw DomainError("evaluate: target std must be positive");
  const std::vector<double> times = uniform_tv_times(c, grid.nt, grid.tv_max);
  const SolutionField ref = bdf_solve(c, grid.nz, times, reference);
  const Eigen::MatrixXd pred = model(c, ref.depths, ref.times);
  if (pred.rows() != ref.values.rows() || pred.cols() != ref.values.cols()) {
    throw DomainError("evaluate: predictor returned a field of the wrong shape");
  }
  const Eigen::MatrixXd err = pred - ref.values;
  if (!err.allFinite()) throw NumericalError("evaluate: non-finite prediction");
  CaseRecord r;
  r.cv = c.cv;
  r.mse_pa2 = err.squaredNorm() / static_cast<double>(err.size());
  r.mse_std = r.mse_pa2 / (target_std * target_std);
  r.max_abs_err_pa = err.cwiseAbs().maxCoeff();
  if (fields) {
    fields->depths = ref.depths;
    fields->times = ref.times;
    fields->tv_times = ref.tv_times;
    fields->predicted = pred;
    fields->reference = ref.values;
  }
  return r;
}

EvalReport summarize(std::vector<CaseRecord> records) {
  if (records.empty()) throw DomainError("aggregate: empty case set");
  EvalReport rep;
  std::vector<double> pa, st;
  for (const auto& r : records) {
    pa.push_back(r.mse_pa2);
    st.push_back(r.mse_std);
    rep.max_abs_err_pa = std::max(rep.max_abs_err_pa, r.max_abs_err_pa);
  }
  rep.mean_mse_pa2 = mean_of(pa);
  rep.std_mse_pa2 = pop_std(pa, rep.mean_mse_pa2);
  rep.mean_mse_std = mean_of(st);
  rep.std_mse_std = pop_std(st, rep.mean_mse_std);
  rep.worst = static_cast<std::size_t>(std::max_element(pa.begin(), pa.end()) - pa.begin());
  rep.cases = std::move(records);
  return rep;
}

EvalReport aggregate(const FieldPredictor& model, const std::vector<ConsolidationCase>& cases, const GridSpec& grid,
                     const IntegratorConfig& reference, double target_std, bool keep_worst_fields) {
  if (cases.empty()) throw DomainError("aggregate: empty case set");
  std::vector<CaseRecord> records(cases.size());
  std::vector<std::exception_ptr> errors(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      try {
        records[i] = evaluate_on_grid(model, cases[i], grid, reference, target_std);
        records[i].index = i;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, cases.size());
  std::vector<std::jthread> pool;
  for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  pool.clear();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  EvalReport rep = summarize(std::move(records));
  if (keep_worst_fields) {
    CaseFields f;
    evaluate_on_grid(model, cases[rep.worst], grid, reference, target_std, &f);
    rep.worst_fields = std::move(f);
  }
  rep.config = {{"grid", to_json(grid)}, {"reference", to_json(reference)}, {"target_std", target_std},
                {"cases", cases.size()}};
  return rep;
}

std::vector<ConsolidationCase> fresh_cases(GenerationConfig cfg) {
  cfg.validate();
  std::vector<ConsolidationCase> out;
  out.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) out.push_back(generate_case(cfg, i));
  return out;
}

std::vector<ConsolidationCase> cases_from_dataset(const OperatorDataset& ds) {
  std::vector<ConsolidationCase> out;
  out.reserve(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) out.push_back(ds.case_at(i));
  return out;
}

GenerationConfig sweep_base(const std::optional<TrainingProvenance>& provenance, std::size_t m_sensors) {
  GenerationConfig cfg;
  cfg.m = m_sensors;
  cfg.p = 1;
  if (provenance) {
    cfg.ranges = provenance->ranges;
    cfg.grf = provenance->grf;
    cfg.mix = provenance->mix;
    cfg.tv_max = provenance->tv_max;
    cfg.h_dr = provenance->h_dr;
    cfg.nz = provenance->nz;
    cfg.solver = provenance->solver;
  }
  return cfg;
}

namespace {

SweepRow sweep_row(const FieldPredictor& model, const GenerationConfig& cfg, const GridSpec& grid, double target_std) {
  SweepRow row;
  row.cases = cfg.n;
  if (cfg.n == 0) return row;
  const EvalReport rep = aggregate(model, fresh_cases(cfg), grid, cfg.solver, target_std, false);
  row.mean_mse_pa2 = rep.mean_mse_pa2;
  row.std_mse_pa2 = rep.std_mse_pa2;
  row.mean_mse_std = rep.mean_mse_std;
  return row;
}

}  // namespace

SweepTable sweep_cv(const FieldPredictor& model, const std::optional<TrainingProvenance>& provenance,
                    std::size_t m_sensors, std::span<const double> cv_values, std::size_t cases_per,
                    const GridSpec& grid, double target_std, std::uint64_t seed) {
  SweepTable table{"cv", {}};
  const GenerationConfig base = sweep_base(provenance, m_sensors);
  for (double cv : cv_values) {
    if (!(cv > 0.0)) throw DomainError("sweep: cv values must be positive");
    GenerationConfig cfg = base;
    cfg.n = cases_per;
    cfg.ranges.cv_range = {cv, cv};
    // Same seed on every row: rows differ only in cv.
    cfg.seed = derive_seed(seed, kSweepStream, 0);
    SweepRow row = sweep_row(model, cfg, grid, target_std);
    row.value = cv;
    row.in_distribution = cv >= base.ranges.cv_range.first && cv <= base.ranges.cv_range.second;
    table.rows.push_back(row);
  }
  return table;
}

SweepTable sweep_length_scale(const FieldPredictor& model, const std::optional<TrainingProvenance>& provenance,
                              std::size_t m_sensors, std::span<const double> lengths, std::size_t cases_per,
                              const GridSpec& grid, double target_std, std::uint64_t seed) {
  SweepTable table{"length-scale", {}};
  const GenerationConfig base = sweep_base(provenance, m_sensors);
  for (double l : lengths) {
    GenerationConfig cfg = base;
    cfg.n = cases_per;
    cfg.mix = 1.0;
    cfg.grf.length_scale = l;
    cfg.seed = derive_seed(seed, kSweepStream, 1);
    SweepRow row = sweep_row(model, cfg, grid, target_std);
    row.value = l;
    row.in_distribution = std::abs(l - base.grf.length_scale) <= 1e-12;
    table.rows.push_back(row);
  }
  return table;
}

std::vector<TimingRecord> benchmark(const std::vector<BenchTarget>& targets, const std::vector<ConsolidationCase>& cases,
                                    const GridSpec& grid, std::size_t warmup) {
  if (cases.size() < 30) throw DomainError("bench: need at least 30 cases, got " + std::to_string(cases.size()));
  grid.validate();
  const std::vector<double> depths = equally_spaced_depths(grid.nz);
  std::vector<std::vector<double>> times;
  for (const auto& c : cases) times.push_back(uniform_tv_times(c, grid.nt, grid.tv_max));

  std::vector<TimingRecord> out;
  volatile double sink = 0.0;
  for (const auto& target : targets) {
    for (std::size_t w = 0; w < std::min(warmup, cases.size()); ++w) sink = sink + target.run(cases[w], depths, times[w])(0, 0);
    TimingRecord rec;
    rec.method = target.label;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const Eigen::MatrixXd field = target.run(cases[i], depths, times[i]);
      const auto t1 = std::chrono::steady_clock::now();
      sink = sink + field(0, 0);
      rec.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    rec.mean = mean_of(rec.seconds);
    rec.std = pop_std(rec.seconds, rec.mean);
    out.push_back(std::move(rec));
  }
  return out;
}

json to_json(const GridSpec& g) { return json{{"nz", g.nz}, {"nt", g.nt}, {"tv_max", g.tv_max}}; }

json to_json(const EvalReport& r, bool include_worst_fields) {
  json cases = json::array();
  for (const auto& c : r.cases) {
    cases.push_back({{"index", c.index},
                     {"cv", c.cv},
                     {"mse_std", c.mse_std},
                     {"mse_pa2", c.mse_pa2},
                     {"max_abs_err_pa", c.max_abs_err_pa}});
  }
  json j{{"cases", cases},
         {"mean_mse_pa2", r.mean_mse_pa2},
         {"std_mse_pa2", r.std_mse_pa2},
         {"mean_mse_std", r.mean_mse_std},
         {"std_mse_std", r.std_mse_std},
         {"max_abs_err_pa", r.max_abs_err_pa},
         {"config", r.config}};
  if (!r.cases.empty()) {
    json worst{{"position", r.worst}, {"index", r.cases[r.worst].index}, {"mse_pa2", r.cases[r.worst].mse_pa2}};
    if (include_worst_fields && r.worst_fields) {
      worst["depths"] = r.worst_fields->depths;
      worst["times"] = r.worst_fields->times;
      worst["tv"] = r.worst_fields->tv_times;
      worst["predicted_pa"] = matrix_rows(r.worst_fields->predicted);
      worst["reference_pa"] = matrix_rows(r.worst_fields->reference);
    }
    j["worst"] = worst;
  }
  return j;
}

json to_json(const SweepTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"value", r.value},
                    {"in_distribution", r.in_distribution},
                    {"cases", r.cases},
                    {"mean_mse_pa2", r.mean_mse_pa2},
                    {"std_mse_pa2", r.std_mse_pa2},
                    {"mean_mse_std", r.mean_mse_std}});
  }
  return json{{"parameter", t.parameter}, {"rows", rows}};
}

json to_json(const std::vector<TimingRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) {
    arr.push_back({{"method", r.method}, {"n", r.seconds.size()}, {"mean_s", r.mean}, {"std_s", r.std},
                   {"seconds", r.seconds}});
  }
  return json{{"timings", arr}};
}

std::string eval_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "index,cv,mse_std,mse_pa2,max_abs_err_pa\n";
  for (const auto& c : r.cases) {
    os << c.index << ',' << c.cv << ',' << c.mse_std << ',' << c.mse_pa2 << ',' << c.max_abs_err_pa << '\n';
  }
  return os.str();
}

std::string sweep_csv(const SweepTable& t) {
  std::ostringstream os;
  os.precision(17);
  os << t.parameter << ",in_distribution,cases,mean_mse_pa2,std_mse_pa2,mean_mse_std\n";
  for (const auto& r : t.rows) {
    os << r.value << ',' << (r.in_distribution ? 1 : 0) << ',' << r.cases << ',' << r.mean_mse_pa2 << ','
       << r.std_mse_pa2 << ',' << r.mean_mse_std << '\n';
  }
  return os.str();
}

std::string timing_csv(const std::vector<TimingRecord>& records) {
  std::ostringstream os;
  os.precision(17);
  os << "method,n,mean_s,std_s\n";
  for (const auto& r : records) os << r.method << ',' << r.seconds.size() << ',' << r.mean << ',' << r.std << '\n';
  return os.str();
}

void write_report(const std::filesystem::path& json_path, const json& report, const std::string& csv) {
  if (json_path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(json_path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + json_path.parent_path().string() + ": " + ec.message());
  }
  write_text(json_path, report.dump(2) + "\n");
  std::filesystem::path csv_path = json_path;
  csv_path.replace_extension(".csv");
  write_text(csv_path, csv);
}

}  // namespace consol
