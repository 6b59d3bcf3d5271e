// Acceptance suite: one PASS/FAIL line per criterion.
//
//   consol_acceptance                 all criteria
//   consol_acceptance --criterion 4   a single criterion
//
// Exit status is 0 when every selected criterion passes, 1 otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "consol/consolidation.hpp"
#include "consol/dataset.hpp"
#include "consol/deeponet.hpp"
#include "consol/eval.hpp"
#include "consol/integrators.hpp"
#include "consol/random_fields.hpp"
#include "consol/rng.hpp"

using namespace consol;
namespace fs = std::filesystem;

namespace {

// Pinned thresholds.
constexpr double kC1UniformPa = 15e3;
constexpr double kC1ErrorFraction = 0.01;
constexpr double kC1Seconds = 5.0;
constexpr std::size_t kC2Cases = 10;
constexpr double kC2Seconds = 60.0;
constexpr double kC3Eps = 1e-5;
constexpr double kC3MaxRel = 1e-6;
constexpr std::size_t kC4Train = 2000, kC4Val = 200, kC4Test = 500;
constexpr std::size_t kC4TrainP = 50, kC4TestP = 100;
constexpr std::size_t kC4Epochs = 200;
constexpr std::size_t kC4Batch = 512;
constexpr double kC4M3Ratio = 0.5;
constexpr double kC4M4Slack = 1.05;
constexpr double kC4CpuSeconds = 7200.0;
constexpr std::size_t kC5Cases = 100;
constexpr double kC5Speedup = 5.0;
constexpr std::size_t kC6Cases = 10;
constexpr double kC6LongRatio = 1.5;
constexpr double kC7Seconds = 600.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

bool report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  return pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

GenerationConfig desk_generation(std::size_t n, std::size_t p, std::uint64_t seed, bool training) {
  GenerationConfig g;
  g.n = n;
  g.p = p;
  g.seed = seed;
  g.training = training;
  return g;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
  return v;
}

// 1: bdf_solve against the series solution for uniform loading.
bool criterion1() {
  const auto t0 = Clock::now();
  const IntegratorConfig cfg;
  double worst = 0.0;
  for (double cv : {0.3, 0.5, 1.0}) {
    const ConsolidationCase c = ConsolidationCase::uniform(cv, kC1UniformPa);
    std::vector<double> times;
    for (double tv : linspace(0.01, 2.0, 100)) times.push_back(physical_time(cv, tv, c.h_dr));
    const SolutionField f = bdf_solve(c, 100, times, cfg);
    for (Eigen::Index j = 0; j < f.values.cols(); ++j) {
      for (Eigen::Index i = 0; i < f.values.rows(); ++i) {
        const double exact = analytical_solution(f.depths[i], f.tv_times[j], kC1UniformPa);
        worst = std::max(worst, std::abs(f.values(i, j) - exact));
      }
    }
  }
  const double secs = seconds_since(t0);
  const double limit = kC1ErrorFraction * kC1UniformPa;
  return report(1, worst <= limit && secs < kC1Seconds,
                fmt("max |bdf - series| %.2f Pa (limit %.0f), %.2f s (limit %.0f)", worst, limit, secs, kC1Seconds));
}

// 2: rk45 and bdf agree pointwise on GRF cases.
bool criterion2() {
  const auto t0 = Clock::now();
  IntegratorConfig bdf;
  IntegratorConfig rk = bdf;
  rk.method = Method::RK45;
  GenerationConfig g = desk_generation(kC2Cases, 1, 2002, false);
  g.mix = 1.0;
  double worst_ratio = 0.0, worst_diff = 0.0;
  for (const auto& c : fresh_cases(g)) {
    const auto times = uniform_tv_times(c, 100);
    const SolutionField a = bdf_solve(c, 100, times, bdf);
    const SolutionField b = rk45_solve(c, 100, times, rk);
    const double diff = (a.values - b.values).cwiseAbs().maxCoeff();
    const double band = std::max(10.0 * bdf.rtol * c.max_abs_u0(), 10.0 * bdf.atol);
    worst_ratio = std::max(worst_ratio, diff / band);
    worst_diff = std::max(worst_diff, diff);
  }
  const double secs = seconds_since(t0);
  return report(2, worst_ratio <= 1.0 && secs < kC2Seconds,
                fmt("%zu GRF cases, max |rk45 - bdf| %.4f Pa, worst diff/band %.3f, %.1f s (limit %.0f)", kC2Cases,
                    worst_diff, worst_ratio, secs, kC2Seconds));
}

// 3: full-parameter gradients against central differences.
bool criterion3() {
  bool pass = true;
  std::string detail;
  const std::size_t m = 8;
  Rng rng(3003);
  StandardizedData d;
  d.n = 5;
  d.m = m;
  d.p = 1;
  for (std::size_t k = 0; k < d.n * m; ++k) d.branch.push_back(rng.normal());
  for (std::size_t k = 0; k < d.n; ++k) d.cv.push_back(rng.normal());
  for (std::size_t k = 0; k < d.n * 2; ++k) d.points.push_back(rng.normal());
  for (std::size_t k = 0; k < d.n; ++k) d.targets.push_back(rng.normal());
  std::vector<std::size_t> idx(d.n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  for (int v = 1; v <= 4; ++v) {
    const ModelSpec spec = ModelSpec::make(variant_from_int(v), m, 10, 3, 10);
    DeepOnet<double> model(spec, 300 + v);
    const auto batch = gather_batch<double>(spec, d, idx);
    std::vector<double> grads(model.params().size());
    Workspace<double> ws;
    loss_and_gradient<double>(model, batch, d.targets, grads, ws);
    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t k = 0; k < grads.size(); ++k) {
      const double saved = model.params()[k];
      model.params()[k] = saved + kC3Eps;
      const double lp = operator_loss<double>(model, batch, d.targets);
      model.params()[k] = saved - kC3Eps;
      const double lm = operator_loss<double>(model, batch, d.targets);
      model.params()[k] = saved;
      const double fd = (lp - lm) / (2.0 * kC3Eps);
      diff2 += (fd - grads[k]) * (fd - grads[k]);
      ref2 += fd * fd;
    }
    const double rel = std::sqrt(diff2 / ref2);
    pass = pass && rel < kC3MaxRel;
    detail += fmt("M%d %.2e (%zu params)  ", v, rel, grads.size());
  }
  return report(3, pass, "relative gradient error " + detail + fmt("(limit %.0e)", kC3MaxRel));
}

DeepOnet<float> train_desk(int v, const OperatorDataset& tr, const OperatorDataset& va, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = kC4Epochs;
  cfg.batch_size = kC4Batch;
  cfg.seed = seed;
  return train<float>(ModelSpec::make(variant_from_int(v), tr.m), tr, va, cfg);
}

double point_mse_pa2(const DeepOnet<float>& model, const OperatorDataset& test) {
  const double s = model.spec().stats.target_std;
  return dataset_loss(model, standardize(test, model.spec().stats)) * s * s;
}

// 4: architecture ordering on a held-out test set.
bool criterion4() {
  const double cpu0 = cpu_seconds();
  const OperatorDataset tr = generate_dataset(desk_generation(kC4Train, kC4TrainP, 4001, true));
  const OperatorDataset va = generate_dataset(desk_generation(kC4Val, kC4TrainP, 4002, false));
  const OperatorDataset te = generate_dataset(desk_generation(kC4Test, kC4TestP, 4003, false));
  double med[5] = {0, 0, 0, 0, 0};
  for (int v = 1; v <= 4; ++v) {
    std::vector<double> mses;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const DeepOnet<float> model = train_desk(v, tr, va, seed);
      mses.push_back(point_mse_pa2(model, te));
      std::printf("  M%d seed %llu: test MSE %.1f Pa^2\n", v, static_cast<unsigned long long>(seed), mses.back());
      std::fflush(stdout);
    }
    med[v] = median(mses);
  }
  const double cpu = cpu_seconds() - cpu0;
  const bool m3 = med[3] <= kC4M3Ratio * med[1] && med[3] <= kC4M3Ratio * med[2];
  const bool m4 = med[4] <= kC4M4Slack * med[3];
  return report(4, m3 && m4 && cpu <= kC4CpuSeconds,
                fmt("median test MSE M1 %.0f, M2 %.0f, M3 %.0f, M4 %.0f Pa^2; M3/M1 %.3f, M3/M2 %.3f (limit %.2f); "
                    "M4/M3 %.3f (limit %.2f); %.0f s CPU (limit %.0f)",
                    med[1], med[2], med[3], med[4], med[3] / med[1], med[3] / med[2], kC4M3Ratio, med[4] / med[3],
                    kC4M4Slack, cpu, kC4CpuSeconds));
}

// 5: speed ordering on full 100x100 fields.
bool criterion5() {
  const OperatorDataset tr = generate_dataset(desk_generation(100, 50, 5001, true));
  std::vector<DeepOnet<float>> models;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 512;
  for (int v = 1; v <= 4; ++v) models.push_back(train<float>(ModelSpec::make(variant_from_int(v), tr.m), tr, tr, cfg));

  IntegratorConfig bdf;
  IntegratorConfig rk = bdf;
  rk.method = Method::RK45;
  std::vector<BenchTarget> targets{{"bdf", solver_predictor(bdf)}, {"rk45", solver_predictor(rk)}};
  for (const auto& m : models) targets.push_back({to_string(m.spec().variant), make_predictor(m)});
  const auto timing = benchmark(targets, fresh_cases(desk_generation(kC5Cases, 1, 5002, false)), GridSpec{});

  const double t_bdf = timing[0].mean, t_rk = timing[1].mean;
  bool pass = t_rk > t_bdf;
  std::string detail = fmt("%zu cases: bdf %.4f s, rk45 %.4f s", kC5Cases, t_bdf, t_rk);
  for (std::size_t k = 2; k < timing.size(); ++k) {
    const double speedup = t_rk / timing[k].mean;
    pass = pass && speedup >= kC5Speedup;
    detail += fmt(", M%zu %.5f s (%.1fx)", k - 1, timing[k].mean, speedup);
  }
  return report(5, pass, detail + fmt(" (speedup limit %.0fx)", kC5Speedup));
}

// 6: out-of-distribution degradation of the desk-scale Fourier model.
bool criterion6() {
  const OperatorDataset tr = generate_dataset(desk_generation(kC4Train, kC4TrainP, 4001, true));
  const OperatorDataset va = generate_dataset(desk_generation(kC4Val, kC4TrainP, 4002, false));
  const DeepOnet<float> model = train_desk(4, tr, va, 1);
  const FieldPredictor p = make_predictor(model);
  const auto& prov = model.state().provenance;
  const double s = model.spec().stats.target_std;
  const GridSpec grid;

  const std::vector<double> cvs{0.4, 0.6, 0.8, 1.0, 1.4};
  const SweepTable cv = sweep_cv(p, prov, model.spec().m_sensors, cvs, kC6Cases, grid, s, 6001);
  double in_range = 0.0;
  std::size_t rows = 0;
  for (const auto& r : cv.rows) {
    if (r.in_distribution) {
      in_range += r.mean_mse_pa2;
      ++rows;
    }
  }
  in_range /= static_cast<double>(rows);
  const double ood = cv.rows.back().mean_mse_pa2;

  const std::vector<double> ls{0.2, 0.5, 0.8};
  const SweepTable l = sweep_length_scale(p, prov, model.spec().m_sensors, ls, kC6Cases, grid, s, 6002);
  const double l2 = l.rows[0].mean_mse_pa2, l5 = l.rows[1].mean_mse_pa2, l8 = l.rows[2].mean_mse_pa2;

  const bool pass = !cv.rows.back().in_distribution && ood > in_range && l2 > l5 && l8 <= kC6LongRatio * l5;
  return report(6, pass,
                fmt("cv=1.4 %.0f vs in-range %.0f Pa^2; l=0.2 %.0f, l=0.5 %.0f, l=0.8 %.0f Pa^2 "
                    "(l=0.8/l=0.5 %.3f, limit %.1f)",
                    ood, in_range, l2, l5, l8, l8 / l5, kC6LongRatio));
}

// 7: invariant suites.
bool criterion7(const fs::path& work) {
  const auto t0 = Clock::now();
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* name) {
    if (!ok) failed.push_back(name);
  };

  GenerationConfig g = desk_generation(6, 20, 7001, true);
  g.mix = 1.0;
  const auto cases = fresh_cases(g);
  bool dissipative = true, bounded = true;
  for (const auto& c : cases) {
    for (Method method : {Method::BDF2, Method::RK45}) {
      IntegratorConfig cfg;
      cfg.method = method;
      double last = INFINITY;
      const auto observer = [&](double, std::span<const double> u) {
        double l2 = 0.0;
        for (double x : u) l2 += x * x;
        l2 = std::sqrt(l2);
        if (l2 > last * (1.0 + 1e-12)) dissipative = false;
        last = l2;
      };
      const SolutionField f = solve(c, 100, uniform_tv_times(c, 50), cfg, observer);
      const double u0 = *std::max_element(c.u0.begin(), c.u0.end());
      const double lo = std::min(0.0, *std::min_element(c.u0.begin(), c.u0.end()));
      const double slack = 10.0 * cfg.rtol * c.max_abs_u0();
      if (f.values.maxCoeff() > u0 + slack || f.values.minCoeff() < lo - slack) bounded = false;
    }
  }
  check(dissipative, "dissipativity");
  check(bounded, "maximum principle");

  Rng rng(7002);
  const auto fe = FourierEmbedding<double>::make(50, 3, 1.0, rng);
  double pairing = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::vector<double> v{rng.normal(), rng.normal(), rng.normal()};
    const auto e = fourier_embed<double>(fe, v);
    for (std::size_t i = 0; i < 50; ++i) pairing = std::max(pairing, std::abs(e[i] * e[i] + e[i + 50] * e[i + 50] - 1.0));
  }
  check(pairing <= 1e-12, "fourier pairing");

  const OperatorDataset ds = generate_dataset(g);
  const OperatorDataset back = destandardize(standardize(ds, *ds.stats), *ds.stats);
  double inv = 0.0;
  for (std::size_t k = 0; k < ds.targets.size(); ++k) {
    inv = std::max(inv, std::abs(back.targets[k] - ds.targets[k]) / std::max(std::abs(ds.targets[k]), 1.0));
  }
  for (std::size_t k = 0; k < ds.branch_inputs.size(); ++k) {
    inv = std::max(inv, std::abs(back.branch_inputs[k] - ds.branch_inputs[k]) / std::abs(ds.branch_inputs[k]));
  }
  check(inv <= 1e-12, "standardize inversion");

  // Independent single-point re-solve with the explicit integrator.
  IntegratorConfig rk;
  rk.method = Method::RK45;
  bool resolve = true;
  for (std::size_t i = 0; i < ds.n; ++i) {
    const ConsolidationCase c = ds.case_at(i);
    const double band = 2.0 * std::max(10.0 * rk.rtol * c.max_abs_u0(), 10.0 * rk.atol);
    for (std::size_t j = 0; j < ds.p; j += 5) {
      const std::vector<double> t{ds.t(i, j)};
      const SolutionField f = rk45_solve(c, 100, t, rk);
      const double x = ds.z(i, j) * 99.0;
      const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(x), 98);
      const double w = x - static_cast<double>(lo);
      const double u = (1.0 - w) * f.values(lo, 0) + w * f.values(lo + 1, 0);
      if (std::abs(u - ds.target(i, j)) > band) resolve = false;
    }
  }
  check(resolve, "re-solve spot checks");

  const fs::path ddir = work / "dataset";
  save_dataset(ds, ddir);
  const OperatorDataset loaded = load_dataset(ddir);
  check(loaded.targets == ds.targets && loaded.branch_inputs == ds.branch_inputs &&
            loaded.eval_points == ds.eval_points && loaded.cv_values == ds.cv_values &&
            loaded.stats->target_std == ds.stats->target_std,
        "dataset round trip");

  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 64;
  const DeepOnet<float> model = train<float>(ModelSpec::make(Variant::M4_TRUNK_CV_FOURIER, ds.m), ds, ds, cfg);
  const fs::path mdir = work / "model";
  save_model(model, mdir);
  const DeepOnet<float> reread = load_model<float>(mdir);
  const auto z = equally_spaced_depths(20);
  const std::vector<double> t{0.0, 0.3, 1.0};
  check(reread.state().b_matrix == model.state().b_matrix &&
            predict_field(model, cases[0], z, t) == predict_field(reread, cases[0], z, t),
        "model round trip");

  std::error_code ec;
  fs::remove_all(work, ec);
  const double secs = seconds_since(t0);
  check(secs < kC7Seconds, "runtime");
  std::string detail = fmt("dissipativity, maximum principle, fourier pairing (%.1e), standardize inversion (%.1e), "
                           "re-solve, file round trips; %.1f s (limit %.0f)",
                           pairing, inv, secs, kC7Seconds);
  for (const auto& f : failed) detail += " failed:" + f;
  return report(7, failed.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  std::string work = (fs::temp_directory_path() / "consol_acceptance").string();
  app.add_option("--criterion", only, "Run a single criterion (1-7)")->check(CLI::Range(1, 7));
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<bool()>> criteria{
      criterion1, criterion2, criterion3, criterion4, criterion5, criterion6,
      [&] { return criterion7(fs::path(work) / "c7"); }};
  bool all = true;
  try {
    for (int k = 1; k <= 7; ++k) {
      if (only == 0 || only == k) all = criteria[k - 1]() && all;
    }
  } catch (const std::exception& e) {
    std::printf("error: %s\n", e.what());
    return 1;
  }
  return all ? 0 : 1;
}
