#include "consol/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "consol/errors.hpp"
#include "consol/rng.hpp"

namespace consol {

using nlohmann::json;

namespace {

// Stream identifiers for derive_seed.
constexpr std::uint64_t kCaseStream = 1;
constexpr std::uint64_t kKindStream = 2;
constexpr std::uint64_t kPointStream = 3;

void population_stats(std::span<const double> v, std::size_t stride, std::size_t offset, double& mean,
                      double& sd) {
  const std::size_t count = v.size() / stride;
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) acc += v[i * stride + offset];
  mean = acc / static_cast<double>(count);
  double sq = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = v[i * stride + offset] - mean;
    sq += d * d;
  }
  sd = std::sqrt(sq / static_cast<double>(count));
}

}  // namespace

void StandardizationStats::validate() const {
  auto positive = [](double s) { return s > 0.0 && std::isfinite(s); };
  if (branch_mean.size() != branch_std.size()) throw DomainError("stats: branch mean/std lengths differ");
  for (std::size_t i = 0; i < branch_std.size(); ++i) {
    if (!positive(branch_std[i])) {
      throw DomainError("stats: zero standard deviation for sensor " + std::to_string(i) +
                        " (degenerate dataset)");
    }
  }
  if (!positive(cv_std)) throw DomainError("stats: zero cv standard deviation (degenerate dataset)");
  if (!positive(coord_std[0]) || !positive(coord_std[1])) {
    throw DomainError("stats: zero coordinate standard deviation (degenerate dataset)");
  }
  if (!positive(target_std)) throw DomainError("stats: zero target standard deviation (degenerate dataset)");
}

StandardizationStats StandardizationStats::from_dataset(const OperatorDataset& ds) {
  if (ds.n == 0 || ds.p == 0) throw DomainError("stats: empty dataset");
  StandardizationStats s;
  s.branch_mean.resize(ds.m);
  s.branch_std.resize(ds.m);
  for (std::size_t k = 0; k < ds.m; ++k) population_stats(ds.branch_inputs, ds.m, k, s.branch_mean[k], s.branch_std[k]);
  population_stats(ds.cv_values, 1, 0, s.cv_mean, s.cv_std);
  population_stats(ds.eval_points, 2, 0, s.coord_mean[0], s.coord_std[0]);
  population_stats(ds.eval_points, 2, 1, s.coord_mean[1], s.coord_std[1]);
  population_stats(ds.targets, 1, 0, s.target_mean, s.target_std);
  s.validate();
  return s;
}

json to_json(const StandardizationStats& s) {
  return json{{"branch_mean", s.branch_mean}, {"branch_std", s.branch_std},
              {"cv_mean", s.cv_mean},         {"cv_std", s.cv_std},
              {"coord_mean", s.coord_mean},   {"coord_std", s.coord_std},
              {"target_mean", s.target_mean}, {"target_std", s.target_std}};
}

StandardizationStats stats_from_json(const json& j) {
  StandardizationStats s;
  try {
    s.branch_mean = j.at("branch_mean").get<std::vector<double>>();
    s.branch_std = j.at("branch_std").get<std::vector<double>>();
    s.cv_mean = j.at("cv_mean").get<double>();
    s.cv_std = j.at("cv_std").get<double>();
    s.coord_mean = j.at("coord_mean").get<std::array<double, 2>>();
    s.coord_std = j.at("coord_std").get<std::array<double, 2>>();
    s.target_mean = j.at("target_mean").get<double>();
    s.target_std = j.at("target_std").get<double>();
  } catch (const json::exception& e) {
    throw FormatError("stats", e.what());
  }
  return s;
}

json to_json(const IntegratorConfig& c) {
  return json{{"method", to_string(c.method)}, {"rtol", c.rtol},       {"atol", c.atol},
              {"dt_init", c.dt_init},          {"dt_min", c.dt_min},   {"dt_max", c.dt_max},
              {"max_steps", c.max_steps}};
}

IntegratorConfig integrator_from_json(const json& j) {
  IntegratorConfig c;
  try {
    c.method = parse_method(j.at("method").get<std::string>());
    c.rtol = j.at("rtol").get<double>();
    c.atol = j.at("atol").get<double>();
    c.dt_init = j.at("dt_init").get<double>();
    c.dt_min = j.at("dt_min").get<double>();
    c.dt_max = j.at("dt_max").get<double>();
    c.max_steps = j.at("max_steps").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError("solver", e.what());
  }
  return c;
}

json to_json(const SamplingRanges& r) {
  return json{{"u0_uniform_range", {r.u0_uniform_range.first, r.u0_uniform_range.second}},
              {"mean_range", {r.mean_range.first, r.mean_range.second}},
              {"cv_range", {r.cv_range.first, r.cv_range.second}}};
}

SamplingRanges ranges_from_json(const json& j) {
  SamplingRanges r;
  try {
    auto pair = [&](const char* key) {
      const auto v = j.at(key).get<std::array<double, 2>>();
      return Range{v[0], v[1]};
    };
    r.u0_uniform_range = pair("u0_uniform_range");
    r.mean_range = pair("mean_range");
    r.cv_range = pair("cv_range");
  } catch (const json::exception& e) {
    throw FormatError("ranges", e.what());
  }
  return r;
}

json to_json(const GrfSpec& g) {
  return json{{"mean", g.mean}, {"variance", g.variance}, {"length_scale", g.length_scale}, {"jitter", g.jitter}};
}

GrfSpec grf_from_json(const json& j) {
  GrfSpec g;
  try {
    g.mean = j.at("mean").get<double>();
    g.variance = j.at("variance").get<double>();
    g.length_scale = j.at("length_scale").get<double>();
    g.jitter = j.at("jitter").get<double>();
  } catch (const json::exception& e) {
    throw FormatError("grf", e.what());
  }
  return g;
}

ConsolidationCase OperatorDataset::case_at(std::size_t i) const {
  if (i >= n) throw DomainError("dataset: case index out of range");
  ConsolidationCase c;
  c.cv = cv_values[i];
  c.h_dr = meta.value("h_dr", 1.0);
  c.sensor_depths = equally_spaced_depths(m);
  const auto b = branch(i);
  c.u0.assign(b.begin(), b.end());
  return c;
}

void OperatorDataset::validate() const {
  if (branch_inputs.size() != n * m || cv_values.size() != n || eval_points.size() != n * p * 2 ||
      targets.size() != n * p) {
    throw DomainError("dataset: array shapes do not match (n, m, p)");
  }
  const double tv_max = meta.value("tv_max", 2.0);
  const double h_dr = meta.value("h_dr", 1.0);
  for (double v : targets) {
    if (!std::isfinite(v)) throw DomainError("dataset: non-finite target");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double zz = z(i, j);
      const double tv = cv_values[i] * t(i, j) / (h_dr * h_dr);
      if (!(zz >= 0.0 && zz <= 1.0)) throw DomainError("dataset: evaluation depth outside [0, 1]");
      if (!(tv >= 0.0 && tv <= tv_max * (1.0 + 1e-12))) {
        throw DomainError("dataset: evaluation time factor outside [0, tv_max]");
      }
    }
  }
  if (stats) stats->validate();
}

void GenerationConfig::validate() const {
  if (n < 1 || m < 2 || p < 1) throw DomainError("generate: need n >= 1, m >= 2, p >= 1");
  if (nz < 3) throw DomainError("generate: nz must be at least 3");
  if (!(mix >= 0.0 && mix <= 1.0)) throw DomainError("generate: mix must lie in [0, 1]");
  if (!(tv_max > 0.0)) throw DomainError("generate: tv_max must be positive");
  ranges.validate();
  grf.validate();
  solver.validate();
}

ProfileKind case_kind(const GenerationConfig& cfg, std::size_t i) {
  if (cfg.mix >= 1.0) return ProfileKind::Grf;
  if (cfg.mix <= 0.0) return ProfileKind::Uniform;
  Rng rng(derive_seed(cfg.seed, kKindStream, i));
  return rng.uniform01() < cfg.mix ? ProfileKind::Grf : ProfileKind::Uniform;
}

ConsolidationCase generate_case(const GenerationConfig& cfg, std::size_t i) {
  ConsolidationCase c =
      sample_case(cfg.ranges, case_kind(cfg, i), cfg.grf, cfg.m, derive_seed(cfg.seed, kCaseStream, i));
  c.h_dr = cfg.h_dr;
  return c;
}

std::vector<double> solve_targets(const ConsolidationCase& c, std::span<const double> points_zt,
                                  std::size_t nz, const IntegratorConfig& cfg) {
  if (points_zt.size() % 2 != 0) throw DomainError("solve_targets: points must be (z, t) pairs");
  const std::size_t count = points_zt.size() / 2;
  std::vector<double> times;
  times.reserve(count);
  for (std::size_t j = 0; j < count; ++j) times.push_back(points_zt[2 * j + 1]);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  const SolutionField f = solve(c, nz, times, cfg);
  const double dz = 1.0 / static_cast<double>(nz - 1);
  std::vector<double> out(count);
  for (std::size_t j = 0; j < count; ++j) {
    const double z = points_zt[2 * j];
    const double t = points_zt[2 * j + 1];
    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("solve_targets: z outside [0, 1]");
    const auto col = static_cast<Eigen::Index>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
    const double pos = z / dz;
    const auto lo = static_cast<Eigen::Index>(std::min<double>(std::floor(pos), static_cast<double>(nz - 2)));
    const double w = pos - static_cast<double>(lo);
    out[j] = (1.0 - w) * f.values(lo, col) + w * f.values(lo + 1, col);
  }
  return out;
}

OperatorDataset generate_dataset(const GenerationConfig& cfg) {
  cfg.validate();
  OperatorDataset ds;
  ds.n = cfg.n;
  ds.m = cfg.m;
  ds.p = cfg.p;
  ds.branch_inputs.resize(cfg.n * cfg.m);
  ds.cv_values.resize(cfg.n);
  ds.eval_points.resize(cfg.n * cfg.p * 2);
  ds.targets.resize(cfg.n * cfg.p);
  std::string kinds(cfg.n, 'U');

  for (std::size_t i = 0; i < cfg.n; ++i) {
    const ConsolidationCase c = generate_case(cfg, i);
    if (case_kind(cfg, i) == ProfileKind::Grf) kinds[i] = 'G';
    std::copy(c.u0.begin(), c.u0.end(), ds.branch_inputs.begin() + static_cast<std::ptrdiff_t>(i * cfg.m));
    ds.cv_values[i] = c.cv;

    Rng rng(derive_seed(cfg.seed, kPointStream, i));
    std::span<double> pts = std::span(ds.eval_points).subspan(i * cfg.p * 2, cfg.p * 2);
    for (std::size_t j = 0; j < cfg.p; ++j) {
      pts[2 * j] = rng.uniform01();
      pts[2 * j + 1] = physical_time(c.cv, rng.uniform(0.0, cfg.tv_max), c.h_dr);
    }
    try {
      const auto values = solve_targets(c, pts, cfg.nz, cfg.solver);
      std::copy(values.begin(), values.end(), ds.targets.begin() + static_cast<std::ptrdiff_t>(i * cfg.p));
    } catch (const NumericalError& e) {
      throw NumericalError("generate: case " + std::to_string(i) + " (case seed " +
                           std::to_string(derive_seed(cfg.seed, kCaseStream, i)) + ") failed: " + e.what());
    }
  }

  ds.meta = json{{"generator", std::string(Rng::kName)},
                 {"seed", cfg.seed},
                 {"seed_derivation", "splitmix64(seed, stream, index); streams case=1 kind=2 points=3"},
                 {"draw_order", "cv, then u0 constant or grf mean, then field"},
                 {"solver", to_json(cfg.solver)},
                 {"nz", cfg.nz},
                 {"tv_max", cfg.tv_max},
                 {"h_dr", cfg.h_dr},
                 {"ranges", to_json(cfg.ranges)},
                 {"grf", to_json(cfg.grf)},
                 {"mix", cfg.mix},
                 {"training", cfg.training},
                 {"point_sampling", "z ~ U[0,1), tv ~ U[0,tv_max), t = tv h^2 / cv"},
                 {"target_interpolation", "exact output times, linear in depth"},
                 {"profile_kinds", kinds}};
  if (cfg.training) ds.stats = StandardizationStats::from_dataset(ds);
  ds.validate();
  return ds;
}

StandardizedData standardize(const OperatorDataset& ds, const StandardizationStats& stats) {
  stats.validate();
  if (stats.branch_mean.size() != ds.m) throw DomainError("standardize: stats sensor count differs from dataset");
  StandardizedData sd;
  sd.n = ds.n;
  sd.m = ds.m;
  sd.p = ds.p;
  sd.branch.resize(ds.branch_inputs.size());
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t k = 0; k < ds.m; ++k) {
      sd.branch[i * ds.m + k] = stats.standardize_branch(k, ds.branch_inputs[i * ds.m + k]);
    }
  }
  sd.cv.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) sd.cv[i] = stats.standardize_cv(ds.cv_values[i]);
  sd.points.resize(ds.eval_points.size());
  for (std::size_t q = 0; q < ds.n * ds.p; ++q) {
    sd.points[2 * q] = stats.standardize_z(ds.eval_points[2 * q]);
    sd.points[2 * q + 1] = stats.standardize_t(ds.eval_points[2 * q + 1]);
  }
  sd.targets.resize(ds.targets.size());
  for (std::size_t q = 0; q < ds.targets.size(); ++q) sd.targets[q] = stats.standardize_target(ds.targets[q]);
  return sd;
}

OperatorDataset destandardize(const StandardizedData& sd, const StandardizationStats& stats) {
  stats.validate();
  OperatorDataset ds;
  ds.n = sd.n;
  ds.m = sd.m;
  ds.p = sd.p;
  ds.branch_inputs.resize(sd.branch.size());
  for (std::size_t i = 0; i < sd.n; ++i) {
    for (std::size_t k = 0; k < sd.m; ++k) {
      ds.branch_inputs[i * sd.m + k] = sd.branch[i * sd.m + k] * stats.branch_std[k] + stats.branch_mean[k];
    }
  }
  ds.cv_values.resize(sd.n);
  for (std::size_t i = 0; i < sd.n; ++i) ds.cv_values[i] = sd.cv[i] * stats.cv_std + stats.cv_mean;
  ds.eval_points.resize(sd.points.size());
  for (std::size_t q = 0; q < sd.n * sd.p; ++q) {
    ds.eval_points[2 * q] = sd.points[2 * q] * stats.coord_std[0] + stats.coord_mean[0];
    ds.eval_points[2 * q + 1] = sd.points[2 * q + 1] * stats.coord_std[1] + stats.coord_mean[1];
  }
  ds.targets.resize(sd.targets.size());
  for (std::size_t q = 0; q < sd.targets.size(); ++q) ds.targets[q] = stats.destandardize_target(sd.targets[q]);
  return ds;
}

namespace {

struct FileEntry {
  const char* name;
  const std::vector<double>* data;
  std::size_t count;
};

}  // namespace

void save_dataset(const OperatorDataset& ds, const std::filesystem::path& dir, DType dtype) {
  ds.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const FileEntry files[] = {{"branch_inputs.bin", &ds.branch_inputs, ds.n * ds.m},
                             {"cv.bin", &ds.cv_values, ds.n},
                             {"eval_points.bin", &ds.eval_points, ds.n * ds.p * 2},
                             {"targets.bin", &ds.targets, ds.n * ds.p}};
  json manifest;
  manifest["magic"] = kDatasetMagic;
  manifest["schema_version"] = kDatasetSchemaVersion;
  manifest["counts"] = {{"n", ds.n}, {"m", ds.m}, {"p", ds.p}};
  manifest["dtype"] = to_string(dtype);
  manifest["meta"] = ds.meta;
  manifest["stats"] = ds.stats ? to_json(*ds.stats) : json(nullptr);
  json entries = json::object();
  for (const auto& f : files) {
    const auto bytes = encode_array(*f.data, dtype);
    write_file(dir / f.name, bytes);
    entries[f.name] = {{"count", f.count}, {"bytes", bytes.size()}, {"crc32c", crc32c(bytes)}};
  }
  manifest["files"] = entries;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

OperatorDataset load_dataset(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError("manifest.json", e.what());
  }
  if (!manifest.contains("magic") || manifest["magic"] != kDatasetMagic) {
    throw FormatError("magic", "not an operator dataset manifest");
  }
  if (!manifest.contains("schema_version") || manifest["schema_version"] != kDatasetSchemaVersion) {
    throw FormatError("schema_version", "unsupported dataset schema version " +
                                            (manifest.contains("schema_version") ? manifest["schema_version"].dump() : std::string("(missing)")));
  }
  OperatorDataset ds;
  DType dtype;
  try {
    ds.n = manifest.at("counts").at("n").get<std::size_t>();
    ds.m = manifest.at("counts").at("m").get<std::size_t>();
    ds.p = manifest.at("counts").at("p").get<std::size_t>();
    dtype = parse_dtype(manifest.at("dtype").get<std::string>());
    ds.meta = manifest.at("meta");
  } catch (const json::exception& e) {
    throw FormatError("counts", e.what());
  }
  if (!manifest.contains("files") || !manifest["files"].is_object()) throw FormatError("files", "missing");
  auto load = [&](const char* name, std::size_t expected_count) {
    if (!manifest["files"].contains(name)) throw FormatError(name, "missing from manifest");
    const json& entry = manifest["files"][name];
    if (!entry.contains("count") || !entry.contains("bytes") || !entry.contains("crc32c")) {
      throw FormatError(name, "manifest entry needs count, bytes and crc32c");
    }
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (count != expected_count) {
      throw FormatError(name, "manifest count " + std::to_string(count) + " does not match counts (expected " +
                                  std::to_string(expected_count) + ")");
    }
    const auto bytes = read_file(dir / name);
    if (bytes.size() != entry.at("bytes").get<std::size_t>()) {
      throw FormatError(name, "truncated or oversized payload: " + std::to_string(bytes.size()) +
                                  " bytes on disk, manifest declares " + entry.at("bytes").dump());
    }
    if (crc32c(bytes) != entry.at("crc32c").get<std::uint32_t>()) throw FormatError(name, "checksum mismatch");
    return decode_array(bytes, dtype, count, name);
  };
  ds.branch_inputs = load("branch_inputs.bin", ds.n * ds.m);
  ds.cv_values = load("cv.bin", ds.n);
  ds.eval_points = load("eval_points.bin", ds.n * ds.p * 2);
  ds.targets = load("targets.bin", ds.n * ds.p);
  if (!manifest["stats"].is_null()) ds.stats = stats_from_json(manifest["stats"]);
  ds.validate();
  return ds;
}

}  // namespace consol
