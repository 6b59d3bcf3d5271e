// consol: dataset generation, training, evaluation, benchmarking and sweeps
// for the 1-D consolidation operator surrogates.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "consol/binary_io.hpp"
#include "consol/consolidation.hpp"
#include "consol/dataset.hpp"
#include "consol/deeponet.hpp"
#include "consol/errors.hpp"
#include "consol/eval.hpp"
#include "consol/integrators.hpp"
#include "consol/random_fields.hpp"

namespace {

using namespace consol;
using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

Range parse_range(const std::string& text, const char* what) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    std::size_t a = 0, b = 0;
    const double lo = std::stod(text.substr(0, colon), &a);
    const std::string rest = text.substr(colon + 1);
    const double hi = std::stod(rest, &b);
    if (a != colon || b != rest.size()) throw std::invalid_argument(text);
    if (hi < lo) throw DomainError(std::string(what) + ": range upper bound below lower bound");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw DomainError(std::string(what) + " must look like LO:HI, got '" + text + "'");
  }
}

std::vector<std::string> split(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct SolverOpts {
  std::string method = "bdf";
  double rtol = 1e-6;
  double atol = 1e-9;

  void add(CLI::App* app) {
    app->add_option("--method", method, "Integrator: bdf, bdf1, bdf2, rk45, rk4")->capture_default_str();
    app->add_option("--rtol", rtol, "Relative tolerance")->capture_default_str();
    app->add_option("--atol", atol, "Absolute tolerance (Pa)")->capture_default_str();
  }
  IntegratorConfig config() const {
    IntegratorConfig c;
    c.method = parse_method(method);
    c.rtol = rtol;
    c.atol = atol;
    c.validate();
    return c;
  }
};

// gen-data ------------------------------------------------------------------

struct GenOpts {
  std::size_t n = 1000, m = 100, p = 100, nz = 100;
  double mix = 0.5, tv_max = 2.0;
  std::string cv_range = "0.3:1.0", u0_range = "10e3:20e3", mean_range = "10e3:20e3";
  double grf_sigma2 = 1e9, grf_length = 0.5, grf_jitter = 10.0;
  bool training = false;
  std::string dtype = "f64le";
  std::string out;
  std::uint64_t seed = 0;
  SolverOpts solver;
};

int run_gen(const GenOpts& o) {
  GenerationConfig cfg;
  cfg.n = o.n;
  cfg.m = o.m;
  cfg.p = o.p;
  cfg.nz = o.nz;
  cfg.tv_max = o.tv_max;
  cfg.mix = o.mix;
  cfg.ranges.cv_range = parse_range(o.cv_range, "--cv-range");
  cfg.ranges.u0_uniform_range = parse_range(o.u0_range, "--u0-range");
  cfg.ranges.mean_range = parse_range(o.mean_range, "--mean-range");
  cfg.grf.variance = o.grf_sigma2;
  cfg.grf.length_scale = o.grf_length;
  cfg.grf.jitter = o.grf_jitter;
  cfg.solver = o.solver.config();
  cfg.seed = o.seed;
  cfg.training = o.training;
  const DType dtype = parse_dtype(o.dtype);
  const OperatorDataset ds = generate_dataset(cfg);
  save_dataset(ds, o.out, dtype);
  std::cout << "wrote " << ds.n << " cases x " << ds.p << " points to " << o.out
            << (ds.stats ? " (with standardization stats)" : "") << "\n";
  return 0;
}

// train ---------------------------------------------------------------------

struct TrainOpts {
  int model = 3;
  std::string data, val, out;
  std::size_t epochs = 600, batch = 4096, q = 50, hidden = 6, width = 30, ffe_m = 50, patience = 0;
  double lr = 1e-3, lr_final = 0.0, ffe_sigma = 1.0;
  std::string precision = "f32";
  std::uint64_t seed = 0;
  bool quiet = false;
};

template <typename T>
void train_and_save(const ModelSpec& spec, const OperatorDataset& tr, const OperatorDataset& va, TrainConfig cfg,
                    const std::string& out) {
  const DeepOnet<T> model = train<T>(spec, tr, va, cfg);
  save_model(model, out);
  const auto& last = model.state().history.back();
  std::cout << "trained " << to_string(spec.variant) << " (" << spec.param_count() << " parameters) for "
            << last.epoch << " epochs: train " << last.train_loss << ", val " << last.val_loss << " -> " << out
            << "\n";
}

int run_train(const TrainOpts& o) {
  const OperatorDataset tr = load_dataset(o.data);
  const OperatorDataset va = load_dataset(o.val.empty() ? o.data : o.val);
  if (!tr.stats) throw DomainError("--data must be generated with --training (it carries no standardization stats)");
  const ModelSpec spec = ModelSpec::make(variant_from_int(o.model), tr.m, o.q, o.hidden, o.width,
                                         FourierSpec{o.ffe_m, o.ffe_sigma});
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.adam.lr = o.lr;
  cfg.lr_final = o.lr_final;
  cfg.seed = o.seed;
  cfg.early_stopping_patience = o.patience;
  if (!o.quiet) {
    cfg.on_epoch = [](const EpochRecord& r) {
      std::printf("epoch %5zu  train %.6e  val %.6e\n", r.epoch, r.train_loss, r.val_loss);
      std::fflush(stdout);
    };
  }
  if (o.precision == "f32") {
    train_and_save<float>(spec, tr, va, cfg, o.out);
  } else if (o.precision == "f64") {
    train_and_save<double>(spec, tr, va, cfg, o.out);
  } else {
    throw DomainError("--precision must be f32 or f64");
  }
  return 0;
}

// eval ----------------------------------------------------------------------

struct EvalOpts {
  std::string model, cases, grid = "100x100", report;
  std::size_t n_fresh = 0;
  std::uint64_t seed = 0;
};

int run_eval(const EvalOpts& o) {
  const LoadedModel lm = load_any_model(o.model);
  const GridSpec grid = GridSpec::parse(o.grid);
  std::vector<ConsolidationCase> cases;
  std::optional<double> point_mse;
  if (!o.cases.empty()) {
    const OperatorDataset ds = load_dataset(o.cases);
    point_mse = lm.point_mse(ds);
    cases = cases_from_dataset(ds);
  } else if (o.n_fresh > 0) {
    GenerationConfig cfg = sweep_base(lm.provenance, lm.spec.m_sensors);
    cfg.n = o.n_fresh;
    cfg.seed = o.seed;
    cases = fresh_cases(cfg);
  } else {
    throw DomainError("eval needs --cases DIR or --n-fresh K");
  }
  const IntegratorConfig ref = sweep_base(lm.provenance, lm.spec.m_sensors).solver;
  EvalReport rep = aggregate(lm.predict, cases, grid, ref, lm.spec.stats.target_std);
  rep.config["model"] = o.model;
  rep.config["variant"] = to_string(lm.spec.variant);
  rep.config["seed"] = o.seed;
  std::printf("%s: %zu cases, MSE %.6g +- %.6g Pa^2 (standardized %.6g), worst case %zu\n",
              to_string(lm.spec.variant).c_str(), rep.cases.size(), rep.mean_mse_pa2, rep.std_mse_pa2,
              rep.mean_mse_std, rep.cases[rep.worst].index);
  nlohmann::json out = to_json(rep);
  if (point_mse) {
    const double s = lm.spec.stats.target_std;
    std::printf("%s: stored points MSE %.6g Pa^2 (standardized %.6g)\n", to_string(lm.spec.variant).c_str(),
                *point_mse * s * s, *point_mse);
    out["point_mse_std"] = *point_mse;
    out["point_mse_pa2"] = *point_mse * s * s;
  }
  if (!o.report.empty()) write_report(o.report, out, eval_csv(rep));
  return 0;
}

// bench ---------------------------------------------------------------------

struct BenchOpts {
  std::string models, solvers = "bdf,rk45", grid = "100x100", report;
  std::size_t cases = 500;
  std::uint64_t seed = 0;
  SolverOpts solver;
};

int run_bench(const BenchOpts& o) {
  const GridSpec grid = GridSpec::parse(o.grid);
  std::vector<LoadedModel> models;
  for (const auto& dir : split(o.models)) models.push_back(load_any_model(dir));
  const std::optional<TrainingProvenance> prov = models.empty() ? std::nullopt : models.front().provenance;
  GenerationConfig cfg = sweep_base(prov, models.empty() ? 100 : models.front().spec.m_sensors);
  cfg.n = o.cases;
  cfg.seed = o.seed;
  const auto cases = fresh_cases(cfg);

  std::vector<BenchTarget> targets;
  const auto dirs = split(o.models);
  for (std::size_t i = 0; i < models.size(); ++i) {
    targets.push_back({"model:" + to_string(models[i].spec.variant) + ":" + dirs[i], models[i].predict});
  }
  for (const auto& name : split(o.solvers)) {
    IntegratorConfig sc = prov ? prov->solver : o.solver.config();
    sc.method = parse_method(name);
    targets.push_back({to_string(sc.method), solver_predictor(sc)});
  }
  const auto records = benchmark(targets, cases, grid);
  for (const auto& r : records) std::printf("%-48s mean %.6f s  std %.6f s  (n=%zu)\n", r.method.c_str(), r.mean, r.std, r.seconds.size());
  if (!o.report.empty()) {
    json j = to_json(records);
    j["grid"] = to_json(grid);
    j["seed"] = o.seed;
    write_report(o.report, j, timing_csv(records));
  }
  return 0;
}

// sweep ---------------------------------------------------------------------

struct SweepOpts {
  std::string model, param, range, values, grid = "100x100", report;
  std::size_t steps = 15, cases_per = 10;
  std::uint64_t seed = 0;
};

int run_sweep(const SweepOpts& o) {
  const LoadedModel lm = load_any_model(o.model);
  const GridSpec grid = GridSpec::parse(o.grid);
  std::vector<double> values;
  if (!o.values.empty()) {
    for (const auto& v : split(o.values)) {
      try {
        values.push_back(std::stod(v));
      } catch (const std::logic_error&) {
        throw DomainError("--values entry '" + v + "' is not a number");
      }
    }
  } else if (!o.range.empty()) {
    const Range r = parse_range(o.range, "--range");
    for (std::size_t k = 0; k < o.steps; ++k) {
      values.push_back(o.steps == 1 ? r.first : r.first + (r.second - r.first) * static_cast<double>(k) / static_cast<double>(o.steps - 1));
    }
  }
  SweepTable table;
  if (o.param == "cv") {
    table = sweep_cv(lm.predict, lm.provenance, lm.spec.m_sensors, values, o.cases_per, grid,
                     lm.spec.stats.target_std, o.seed);
  } else if (o.param == "length-scale") {
    table = sweep_length_scale(lm.predict, lm.provenance, lm.spec.m_sensors, values, o.cases_per, grid,
                               lm.spec.stats.target_std, o.seed);
  } else {
    throw DomainError("--param must be cv or length-scale");
  }
  for (const auto& r : table.rows) {
    std::printf("%s=%-8.4g %-4s MSE %.6g +- %.6g Pa^2\n", table.parameter.c_str(), r.value,
                r.in_distribution ? "in" : "OOD", r.mean_mse_pa2, r.std_mse_pa2);
  }
  if (!o.report.empty()) {
    json j = to_json(table);
    j["model"] = o.model;
    j["seed"] = o.seed;
    j["grid"] = to_json(grid);
    write_report(o.report, j, sweep_csv(table));
  }
  return 0;
}

// solve ---------------------------------------------------------------------

struct SolveOpts {
  double cv = 0.5, h_dr = 1.0;
  std::string profile = "uniform:15e3", method = "bdf", grid = "100x100", out;
  std::size_t m = 100;
  double grf_sigma2 = 1e9, grf_length = 0.5, grf_mean = 15e3;
  double rtol = 1e-6, atol = 1e-9;
  std::uint64_t seed = 0;
};

int run_solve(const SolveOpts& o) {
  const GridSpec grid = GridSpec::parse(o.grid);
  ConsolidationCase c;
  bool uniform = false;
  if (o.profile.rfind("uniform:", 0) == 0) {
    double u0 = 0.0;
    try {
      u0 = std::stod(o.profile.substr(8));
    } catch (const std::logic_error&) {
      throw DomainError("--profile uniform:<Pa> needs a number");
    }
    c = ConsolidationCase::uniform(o.cv, u0, o.m, o.h_dr);
    uniform = true;
  } else if (o.profile == "grf") {
    GrfSpec g = GrfSpec::with_variance(o.grf_sigma2, o.grf_length, o.grf_mean);
    c.cv = o.cv;
    c.h_dr = o.h_dr;
    c.sensor_depths = equally_spaced_depths(o.m);
    c.u0 = sample_grf(c.sensor_depths, g, o.seed);
  } else {
    throw DomainError("--profile must be uniform:<Pa> or grf");
  }
  c.validate();
  const std::vector<double> times = uniform_tv_times(c, grid.nt, grid.tv_max);
  SolutionField field;
  if (o.method == "analytic") {
    if (!uniform) throw DomainError("--method analytic needs a uniform profile");
    field = analytical_field(c, equally_spaced_depths(grid.nz), times);
  } else {
    IntegratorConfig cfg;
    cfg.method = parse_method(o.method);
    cfg.rtol = o.rtol;
    cfg.atol = o.atol;
    cfg.validate();
    field = solve(c, grid.nz, times, cfg);
  }
  std::ostringstream os;
  os.precision(17);
  os << "z,t,tv,u_pa\n";
  for (std::size_t i = 0; i < field.nz(); ++i) {
    for (std::size_t j = 0; j < field.nt(); ++j) {
      os << field.depths[i] << ',' << field.times[j] << ',' << field.tv_times[j] << ','
         << field.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << '\n';
    }
  }
  if (o.out.empty() || o.out == "-") {
    std::cout << os.str();
  } else {
    write_text(o.out, os.str());
    std::cerr << "wrote " << field.nz() * field.nt() << " rows (" << field.method << ") to " << o.out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consolidation operator surrogates: data, training, evaluation"};
  app.set_config("--config", "", "TOML/INI file with option values; sections name subcommands");
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen-data", "Generate an operator dataset");
  g->add_option("--n", gen.n, "Number of input functions")->capture_default_str();
  g->add_option("--m", gen.m, "Sensors per input function")->capture_default_str();
  g->add_option("--p", gen.p, "Evaluation points per function")->capture_default_str();
  g->add_option("--nz", gen.nz, "Solver grid nodes")->capture_default_str();
  g->add_option("--tv-max", gen.tv_max, "Largest time factor")->capture_default_str();
  g->add_option("--mix", gen.mix, "Fraction of GRF profiles")->capture_default_str();
  g->add_option("--cv-range", gen.cv_range, "cv range LO:HI (m^2/yr)")->capture_default_str();
  g->add_option("--u0-range", gen.u0_range, "Uniform u0 range LO:HI (Pa)")->capture_default_str();
  g->add_option("--mean-range", gen.mean_range, "GRF mean range LO:HI (Pa)")->capture_default_str();
  g->add_option("--grf-sigma2", gen.grf_sigma2, "GRF variance (Pa^2)")->capture_default_str();
  g->add_option("--grf-length", gen.grf_length, "GRF correlation length")->capture_default_str();
  g->add_option("--grf-jitter", gen.grf_jitter, "Diagonal jitter (Pa^2)")->capture_default_str();
  g->add_flag("--training", gen.training, "Store standardization stats computed from this set");
  g->add_option("--dtype", gen.dtype, "f64le or f32le")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  gen.solver.add(g);

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Train a DeepONet variant");
  t->add_option("--model", tr.model, "Variant 1-4")->capture_default_str();
  t->add_option("--data", tr.data, "Training dataset")->required();
  t->add_option("--val", tr.val, "Validation dataset (defaults to --data)");
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str();
  t->add_option("--lr-final", tr.lr_final, "Learning rate at the last epoch, geometric decay (0 keeps it constant)")->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--q", tr.q, "Latent width")->capture_default_str();
  t->add_option("--hidden", tr.hidden, "Hidden layers per net")->capture_default_str();
  t->add_option("--width", tr.width, "Hidden width")->capture_default_str();
  t->add_option("--ffe-m", tr.ffe_m, "Fourier frequencies (variant 4)")->capture_default_str();
  t->add_option("--ffe-sigma", tr.ffe_sigma, "Fourier frequency scale (variant 4)")->capture_default_str();
  t->add_option("--patience", tr.patience, "Early stopping patience, 0 = off")->capture_default_str();
  t->add_option("--precision", tr.precision, "f32 or f64")->capture_default_str();
  t->add_option("--out", tr.out, "Model directory")->required();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_flag("--quiet", tr.quiet, "No per-epoch output");

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Grid evaluation against the reference solver");
  e->add_option("--model", ev.model)->required();
  auto* cases_opt = e->add_option("--cases", ev.cases, "Dataset whose input functions are evaluated");
  e->add_option("--n-fresh", ev.n_fresh, "Draw K fresh cases from the training distribution")->excludes(cases_opt);
  e->add_option("--grid", ev.grid)->capture_default_str();
  e->add_option("--report", ev.report, "JSON report path (a CSV is written alongside)");
  e->add_option("--seed", ev.seed)->capture_default_str();

  BenchOpts be;
  auto* b = app.add_subcommand("bench", "Wall-clock comparison of models and solvers");
  b->add_option("--models", be.models, "Comma-separated model directories");
  b->add_option("--solvers", be.solvers)->capture_default_str();
  b->add_option("--cases", be.cases)->capture_default_str();
  b->add_option("--grid", be.grid)->capture_default_str();
  b->add_option("--report", be.report);
  b->add_option("--seed", be.seed)->capture_default_str();
  b->add_option("--rtol", be.solver.rtol, "Solver rtol when no model provenance is available")->capture_default_str();
  b->add_option("--atol", be.solver.atol, "Solver atol when no model provenance is available")->capture_default_str();

  SweepOpts sw;
  auto* s = app.add_subcommand("sweep", "Out-of-distribution sweeps");
  s->add_option("--model", sw.model)->required();
  s->add_option("--param", sw.param, "cv or length-scale")->required();
  auto* range_opt = s->add_option("--range", sw.range, "LO:HI");
  s->add_option("--steps", sw.steps)->capture_default_str();
  s->add_option("--values", sw.values, "Comma-separated values")->excludes(range_opt);
  s->add_option("--cases-per", sw.cases_per)->capture_default_str();
  s->add_option("--grid", sw.grid)->capture_default_str();
  s->add_option("--report", sw.report);
  s->add_option("--seed", sw.seed)->capture_default_str();

  SolveOpts so;
  auto* v = app.add_subcommand("solve", "Solve one case and write the field as CSV");
  v->add_option("--cv", so.cv)->capture_default_str();
  v->add_option("--h-dr", so.h_dr)->capture_default_str();
  v->add_option("--profile", so.profile, "uniform:<Pa> or grf")->capture_default_str();
  v->add_option("--method", so.method, "bdf, bdf1, rk45, rk4 or analytic")->capture_default_str();
  v->add_option("--grid", so.grid)->capture_default_str();
  v->add_option("--m", so.m, "Sensors")->capture_default_str();
  v->add_option("--grf-sigma2", so.grf_sigma2)->capture_default_str();
  v->add_option("--grf-length", so.grf_length)->capture_default_str();
  v->add_option("--grf-mean", so.grf_mean)->capture_default_str();
  v->add_option("--rtol", so.rtol)->capture_default_str();
  v->add_option("--atol", so.atol)->capture_default_str();
  v->add_option("--out", so.out, "CSV path, '-' for stdout");
  v->add_option("--seed", so.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitValidation;
  }

  try {
    if (*g) return run_gen(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*b) return run_bench(be);
    if (*s) return run_sweep(sw);
    if (*v) return run_solve(so);
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const DomainError& err) {
    std::cerr << "invalid input: " << err.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
