#include "consol/deeponet.hpp"

#include <algorithm>
#include <cmath>

#include "consol/errors.hpp"

namespace consol {

using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::M1_BRANCH_CONCAT: return "M1_BRANCH_CONCAT";
    case Variant::M2_AUX_BRANCH_MERGE: return "M2_AUX_BRANCH_MERGE";
    case Variant::M3_TRUNK_CV: return "M3_TRUNK_CV";
    case Variant::M4_TRUNK_CV_FOURIER: return "M4_TRUNK_CV_FOURIER";
  }
  return "unknown";
}

Variant variant_from_int(int v) {
  if (v < 1 || v > 4) throw DomainError("model variant must be 1, 2, 3 or 4");
  return static_cast<Variant>(v);
}

ModelSpec ModelSpec::make(Variant v, std::size_t m_sensors, std::size_t q, std::size_t hidden_layers,
                          std::size_t width, FourierSpec fourier, std::size_t merge_hidden, Activation act) {
  ModelSpec s;
  s.variant = v;
  s.m_sensors = m_sensors;
  s.q = q;
  switch (v) {
    case Variant::M1_BRANCH_CONCAT:
      s.branch = MlpSpec::make(m_sensors + 1, hidden_layers, width, q, act);
      s.trunk = MlpSpec::make(2, hidden_layers, width, q, act);
      break;
    case Variant::M2_AUX_BRANCH_MERGE:
      s.branch = MlpSpec::make(m_sensors, hidden_layers, width, q, act);
      s.aux = MlpSpec::make(1, hidden_layers, width, q, act);
      s.merge = MlpSpec::make(2 * q, merge_hidden, width, q, act);
      s.trunk = MlpSpec::make(2, hidden_layers, width, q, act);
      break;
    case Variant::M3_TRUNK_CV:
      s.branch = MlpSpec::make(m_sensors, hidden_layers, width, q, act);
      s.trunk = MlpSpec::make(3, hidden_layers, width, q, act);
      break;
    case Variant::M4_TRUNK_CV_FOURIER:
      s.branch = MlpSpec::make(m_sensors, hidden_layers, width, q, act);
      s.trunk = MlpSpec::make(2 * fourier.m_freq, hidden_layers, width, q, act);
      s.fourier = fourier;
      break;
  }
  s.stats.branch_mean.assign(m_sensors, 0.0);
  s.stats.branch_std.assign(m_sensors, 1.0);
  s.validate();
  return s;
}

std::size_t ModelSpec::trunk_coords() const {
  return (variant == Variant::M3_TRUNK_CV || variant == Variant::M4_TRUNK_CV_FOURIER) ? 3 : 2;
}

void ModelSpec::validate() const {
  branch.validate();
  trunk.validate();
  if (q == 0 || m_sensors < 2) throw DomainError("model: need q >= 1 and m_sensors >= 2");
  if (branch.output_width() != q || trunk.output_width() != q) {
    throw DomainError("model: branch and trunk outputs must both have width q");
  }
  const bool m2 = variant == Variant::M2_AUX_BRANCH_MERGE;
  const bool m4 = variant == Variant::M4_TRUNK_CV_FOURIER;
  const std::size_t expected_branch = variant == Variant::M1_BRANCH_CONCAT ? m_sensors + 1 : m_sensors;
  if (branch.input_width() != expected_branch) {
    throw DomainError("model: branch input width " + std::to_string(branch.input_width()) + ", expected " +
                      std::to_string(expected_branch));
  }
  if (m2) {
    aux.validate();
    merge.validate();
    if (aux.input_width() != 1 || merge.input_width() != branch.output_width() + aux.output_width() ||
        merge.output_width() != q) {
      throw DomainError("model: inconsistent auxiliary/merge widths");
    }
  } else if (!aux.widths.empty() || !merge.widths.empty()) {
    throw DomainError("model: auxiliary and merge nets are only used by variant 2");
  }
  if (m4 != fourier.has_value()) throw DomainError("model: Fourier features are used by variant 4 only");
  const std::size_t expected_trunk = m4 ? 2 * fourier->m_freq : trunk_coords();
  if (trunk.input_width() != expected_trunk) {
    throw DomainError("model: trunk input width " + std::to_string(trunk.input_width()) + ", expected " +
                      std::to_string(expected_trunk));
  }
  if (stats.branch_mean.size() != m_sensors) throw DomainError("model: stats sensor count differs from m_sensors");
}

std::size_t ModelSpec::param_count() const {
  std::size_t n = branch.param_count() + trunk.param_count();
  if (variant == Variant::M2_AUX_BRANCH_MERGE) n += aux.param_count() + merge.param_count();
  return n;
}

json to_json(const MlpSpec& s) { return json{{"widths", s.widths}, {"activation", to_string(s.activation)}}; }

MlpSpec mlp_spec_from_json(const json& j) {
  MlpSpec s;
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  return s;
}

json to_json(const ModelSpec& s) {
  json j{{"variant", static_cast<int>(s.variant)},
         {"variant_name", to_string(s.variant)},
         {"m_sensors", s.m_sensors},
         {"q", s.q},
         {"branch", to_json(s.branch)},
         {"trunk", to_json(s.trunk)},
         {"stats", to_json(s.stats)}};
  if (s.variant == Variant::M2_AUX_BRANCH_MERGE) {
    j["aux"] = to_json(s.aux);
    j["merge"] = to_json(s.merge);
  }
  if (s.fourier) j["fourier"] = {{"m_freq", s.fourier->m_freq}, {"sigma", s.fourier->sigma}};
  return j;
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec s;
  try {
    s.variant = variant_from_int(j.at("variant").get<int>());
    s.m_sensors = j.at("m_sensors").get<std::size_t>();
    s.q = j.at("q").get<std::size_t>();
    s.branch = mlp_spec_from_json(j.at("branch"));
    s.trunk = mlp_spec_from_json(j.at("trunk"));
    if (j.contains("aux")) s.aux = mlp_spec_from_json(j.at("aux"));
    if (j.contains("merge")) s.merge = mlp_spec_from_json(j.at("merge"));
    if (j.contains("fourier")) {
      s.fourier = FourierSpec{j["fourier"].at("m_freq").get<std::size_t>(), j["fourier"].at("sigma").get<double>()};
    }
    s.stats = stats_from_json(j.at("stats"));
  } catch (const json::exception& e) {
    throw FormatError("spec", e.what());
  }
  s.validate();
  return s;
}

json to_json(const TrainingProvenance& p) {
  return json{{"ranges", to_json(p.ranges)}, {"grf", to_json(p.grf)}, {"mix", p.mix},       {"tv_max", p.tv_max},
              {"h_dr", p.h_dr},             {"nz", p.nz},            {"solver", to_json(p.solver)}};
}

TrainingProvenance provenance_from_json(const json& j) {
  TrainingProvenance p;
  try {
    p.ranges = ranges_from_json(j.at("ranges"));
    p.grf = grf_from_json(j.at("grf"));
    p.mix = j.at("mix").get<double>();
    p.tv_max = j.at("tv_max").get<double>();
    p.h_dr = j.at("h_dr").get<double>();
    p.nz = j.at("nz").get<std::size_t>();
    p.solver = integrator_from_json(j.at("solver"));
  } catch (const json::exception& e) {
    throw FormatError("provenance", e.what());
  }
  return p;
}

template <typename T>
void DeepOnet<T>::layout() {
  spec_.validate();
  branch_off_ = 0;
  trunk_off_ = spec_.branch.param_count();
  aux_off_ = trunk_off_ + spec_.trunk.param_count();
  merge_off_ = aux_off_ + (spec_.variant == Variant::M2_AUX_BRANCH_MERGE ? spec_.aux.param_count() : 0);
}

template <typename T>
DeepOnet<T>::DeepOnet(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  layout();
  state_.seed = seed;
  state_.params.resize(spec_.param_count());
  Rng rng(seed);
  std::span<T> all(state_.params);
  init_mlp_into<T>(spec_.branch, rng, all.subspan(branch_off_, spec_.branch.param_count()));
  init_mlp_into<T>(spec_.trunk, rng, all.subspan(trunk_off_, spec_.trunk.param_count()));
  if (spec_.variant == Variant::M2_AUX_BRANCH_MERGE) {
    init_mlp_into<T>(spec_.aux, rng, all.subspan(aux_off_, spec_.aux.param_count()));
    init_mlp_into<T>(spec_.merge, rng, all.subspan(merge_off_, spec_.merge.param_count()));
  }
  if (spec_.fourier) {
    embedding_ = FourierEmbedding<T>::make(spec_.fourier->m_freq, 3, spec_.fourier->sigma, rng);
    state_.b_matrix = embedding_->b;
  }
}

template <typename T>
DeepOnet<T>::DeepOnet(ModelSpec spec, ModelState<T> state) : spec_(std::move(spec)), state_(std::move(state)) {
  layout();
  if (state_.params.size() != spec_.param_count()) {
    throw DomainError("model: parameter count " + std::to_string(state_.params.size()) + " does not match spec (" +
                      std::to_string(spec_.param_count()) + ")");
  }
  if (spec_.fourier) {
    if (static_cast<std::size_t>(state_.b_matrix.rows()) != spec_.fourier->m_freq || state_.b_matrix.cols() != 3) {
      throw DomainError("model: Fourier matrix shape does not match spec");
    }
    embedding_ = FourierEmbedding<T>{state_.b_matrix, spec_.fourier->sigma};
  }
}

template <typename T>
std::span<const T> DeepOnet<T>::branch_params() const {
  return std::span<const T>(state_.params).subspan(branch_off_, spec_.branch.param_count());
}
template <typename T>
std::span<const T> DeepOnet<T>::trunk_params() const {
  return std::span<const T>(state_.params).subspan(trunk_off_, spec_.trunk.param_count());
}
template <typename T>
std::span<const T> DeepOnet<T>::aux_params() const {
  if (spec_.variant != Variant::M2_AUX_BRANCH_MERGE) return {};
  return std::span<const T>(state_.params).subspan(aux_off_, spec_.aux.param_count());
}
template <typename T>
std::span<const T> DeepOnet<T>::merge_params() const {
  if (spec_.variant != Variant::M2_AUX_BRANCH_MERGE) return {};
  return std::span<const T>(state_.params).subspan(merge_off_, spec_.merge.param_count());
}

template <typename T>
const Matrix<T>& DeepOnet<T>::branch_latent(const Matrix<T>& branch_in, const Matrix<T>& aux_in,
                                            Workspace<T>& ws) const {
  const Matrix<T>& main = mlp_forward<T>(spec_.branch, branch_params(), branch_in, ws.branch);
  if (spec_.variant != Variant::M2_AUX_BRANCH_MERGE) return main;
  if (aux_in.cols() != branch_in.cols()) throw DomainError("model: auxiliary batch size differs from branch batch");
  const Matrix<T>& side = mlp_forward<T>(spec_.aux, aux_params(), aux_in, ws.aux);
  ws.concat.resize(main.rows() + side.rows(), main.cols());
  ws.concat.topRows(main.rows()) = main;
  ws.concat.bottomRows(side.rows()) = side;
  return mlp_forward<T>(spec_.merge, merge_params(), ws.concat, ws.merge);
}

template <typename T>
const Matrix<T>& DeepOnet<T>::trunk_latent(const Matrix<T>& trunk_in, Workspace<T>& ws) const {
  if (static_cast<std::size_t>(trunk_in.rows()) != spec_.trunk_coords()) {
    throw DomainError("model: trunk coordinates have width " + std::to_string(trunk_in.rows()) + ", expected " +
                      std::to_string(spec_.trunk_coords()));
  }
  if (embedding_) {
    ws.trunk_features = embedding_->embed(trunk_in);
    return mlp_forward<T>(spec_.trunk, trunk_params(), ws.trunk_features, ws.trunk);
  }
  return mlp_forward<T>(spec_.trunk, trunk_params(), trunk_in, ws.trunk);
}

template <typename T>
const Vector<T>& DeepOnet<T>::forward(const InputBatch<T>& batch, Workspace<T>& ws) const {
  if (batch.branch.cols() != batch.trunk.cols()) throw DomainError("model: branch and trunk batch sizes differ");
  const Matrix<T>& b = branch_latent(batch.branch, batch.aux, ws);
  const Matrix<T>& t = trunk_latent(batch.trunk, ws);
  ws.predictions = (b.array() * t.array()).colwise().sum().transpose();
  return ws.predictions;
}

template <typename T>
void DeepOnet<T>::backward(const Vector<T>& dpred, Workspace<T>& ws, std::span<T> grads) const {
  if (grads.size() != state_.params.size()) throw DomainError("model: gradient buffer has the wrong size");
  const Matrix<T>& t = ws.trunk.activations.back();
  const Matrix<T>& b = spec_.variant == Variant::M2_AUX_BRANCH_MERGE ? ws.merge.activations.back()
                                                                       : ws.branch.activations.back();
  if (dpred.size() != t.cols()) throw DomainError("model: prediction gradient size differs from cached batch");
  const Matrix<T> d_b = (t.array().rowwise() * dpred.transpose().array()).matrix();
  const Matrix<T> d_t = (b.array().rowwise() * dpred.transpose().array()).matrix();

  mlp_backward<T>(spec_.trunk, trunk_params(), ws.trunk, d_t, grads.subspan(trunk_off_, spec_.trunk.param_count()));
  if (spec_.variant == Variant::M2_AUX_BRANCH_MERGE) {
    const Matrix<T> d_cat =
        mlp_backward<T>(spec_.merge, merge_params(), ws.merge, d_b, grads.subspan(merge_off_, spec_.merge.param_count()));
    const auto q_main = static_cast<Eigen::Index>(spec_.branch.output_width());
    mlp_backward<T>(spec_.branch, branch_params(), ws.branch, d_cat.topRows(q_main),
                    grads.subspan(branch_off_, spec_.branch.param_count()));
    mlp_backward<T>(spec_.aux, aux_params(), ws.aux, d_cat.bottomRows(d_cat.rows() - q_main),
                    grads.subspan(aux_off_, spec_.aux.param_count()));
  } else {
    mlp_backward<T>(spec_.branch, branch_params(), ws.branch, d_b, grads.subspan(branch_off_, spec_.branch.param_count()));
  }
}

template <typename T>
AssembledInput<T> assemble_inputs(const DeepOnet<T>& model, std::span<const double> branch_std, double cv_std,
                                  double z_std, double t_std) {
  const ModelSpec& spec = model.spec();
  if (branch_std.size() != spec.m_sensors) {
    throw DomainError("assemble_inputs: branch vector has " + std::to_string(branch_std.size()) +
                      " sensors, model expects " + std::to_string(spec.m_sensors));
  }
  AssembledInput<T> in;
  for (double v : branch_std) in.branch.push_back(static_cast<T>(v));
  std::vector<T> coords{static_cast<T>(z_std), static_cast<T>(t_std)};
  switch (spec.variant) {
    case Variant::M1_BRANCH_CONCAT: in.branch.push_back(static_cast<T>(cv_std)); break;
    case Variant::M2_AUX_BRANCH_MERGE: in.aux.push_back(static_cast<T>(cv_std)); break;
    case Variant::M3_TRUNK_CV:
    case Variant::M4_TRUNK_CV_FOURIER: coords.push_back(static_cast<T>(cv_std)); break;
  }
  in.trunk = model.embedding() ? fourier_embed<T>(*model.embedding(), coords) : coords;
  return in;
}

template <typename T>
T dot_decoder(std::span<const T> b, std::span<const T> t) {
  if (b.size() != t.size()) throw DomainError("dot_decoder: latent widths differ");
  T acc = 0;
  for (std::size_t k = 0; k < b.size(); ++k) acc += b[k] * t[k];
  return acc;
}

template <typename T>
T predict(const DeepOnet<T>& model, const AssembledInput<T>& in) {
  const ModelSpec& spec = model.spec();
  if (in.branch.size() != spec.branch.input_width() || in.trunk.size() != spec.trunk.input_width()) {
    throw DomainError("predict: assembled input widths do not match the model");
  }
  Workspace<T> ws;
  auto column = [](const std::vector<T>& v) {
    return Matrix<T>(Eigen::Map<const Matrix<T>>(v.data(), static_cast<Eigen::Index>(v.size()), 1));
  };
  const Matrix<T> b = model.branch_latent(column(in.branch), in.aux.empty() ? Matrix<T>() : column(in.aux), ws);
  const Matrix<T>& t = mlp_forward<T>(spec.trunk, model.trunk_params(), column(in.trunk), ws.trunk);
  return dot_decoder<T>(std::span<const T>(b.data(), static_cast<std::size_t>(b.size())),
                        std::span<const T>(t.data(), static_cast<std::size_t>(t.size())));
}

template <typename T>
InputBatch<T> gather_batch(const ModelSpec& spec, const StandardizedData& data, std::span<const std::size_t> triples) {
  if (data.m != spec.m_sensors) throw DomainError("gather_batch: dataset sensor count differs from model");
  const auto cols = static_cast<Eigen::Index>(triples.size());
  const auto m = static_cast<Eigen::Index>(data.m);
  InputBatch<T> b;
  const bool cv_in_branch = spec.variant == Variant::M1_BRANCH_CONCAT;
  const bool cv_in_aux = spec.variant == Variant::M2_AUX_BRANCH_MERGE;
  const bool cv_in_trunk = spec.trunk_coords() == 3;
  b.branch.resize(cv_in_branch ? m + 1 : m, cols);
  if (cv_in_aux) b.aux.resize(1, cols);
  b.trunk.resize(static_cast<Eigen::Index>(spec.trunk_coords()), cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const std::size_t q = triples[static_cast<std::size_t>(c)];
    if (q >= data.n * data.p) throw DomainError("gather_batch: triple index out of range");
    const std::size_t i = q / data.p;
    const double* src = data.branch.data() + i * data.m;
    for (Eigen::Index k = 0; k < m; ++k) b.branch(k, c) = static_cast<T>(src[k]);
    const T cv = static_cast<T>(data.cv[i]);
    if (cv_in_branch) b.branch(m, c) = cv;
    if (cv_in_aux) b.aux(0, c) = cv;
    b.trunk(0, c) = static_cast<T>(data.points[2 * q]);
    b.trunk(1, c) = static_cast<T>(data.points[2 * q + 1]);
    if (cv_in_trunk) b.trunk(2, c) = cv;
  }
  return b;
}

template <typename T>
double operator_loss(const DeepOnet<T>& model, const InputBatch<T>& batch, std::span<const T> targets) {
  if (targets.empty()) throw DomainError("operator_loss: empty batch");
  if (static_cast<Eigen::Index>(targets.size()) != batch.trunk.cols()) {
    throw DomainError("operator_loss: target count differs from batch size");
  }
  Workspace<T> ws;
  const Vector<T>& pred = model.forward(batch, ws);
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double r = static_cast<double>(pred(static_cast<Eigen::Index>(i))) - static_cast<double>(targets[i]);
    acc += r * r;
  }
  return acc / static_cast<double>(targets.size());
}

template <typename T>
double loss_and_gradient(const DeepOnet<T>& model, const InputBatch<T>& batch, std::span<const T> targets,
                         std::span<T> grads, Workspace<T>& ws) {
  if (targets.empty()) throw DomainError("operator_loss: empty batch");
  const Vector<T>& pred = model.forward(batch, ws);
  if (static_cast<Eigen::Index>(targets.size()) != pred.size()) {
    throw DomainError("operator_loss: target count differs from batch size");
  }
  const Eigen::Map<const Vector<T>> y(targets.data(), static_cast<Eigen::Index>(targets.size()));
  const Vector<T> resid = pred - y;
  const T scale = T(2) / static_cast<T>(targets.size());
  std::fill(grads.begin(), grads.end(), T(0));
  model.backward(resid * scale, ws, grads);
  return resid.template cast<double>().squaredNorm() / static_cast<double>(targets.size());
}

namespace {

template <typename T>
struct FieldScratch {
  Matrix<T> coords, features, latent;
  Matrix<T> sin_z, cos_z, sin_t, cos_t;
  std::vector<Matrix<T>> hidden;
  Vector<T> pred;
};

}  // namespace

template <typename T>
Eigen::MatrixXd predict_field(const DeepOnet<T>& model, const ConsolidationCase& c, std::span<const double> depths,
                              std::span<const double> times) {
  const ModelSpec& spec = model.spec();
  const StandardizationStats& st = spec.stats;
  if (c.u0.size() != spec.m_sensors) throw DomainError("predict_field: case sensor count differs from model");
  const double cv_s = st.standardize_cv(c.cv);

  Matrix<T> branch_in(static_cast<Eigen::Index>(spec.branch.input_width()), 1);
  for (std::size_t k = 0; k < spec.m_sensors; ++k) {
    branch_in(static_cast<Eigen::Index>(k), 0) = static_cast<T>(st.standardize_branch(k, c.u0[k]));
  }
  Matrix<T> aux_in;
  if (spec.variant == Variant::M1_BRANCH_CONCAT) branch_in(static_cast<Eigen::Index>(spec.m_sensors), 0) = static_cast<T>(cv_s);
  if (spec.variant == Variant::M2_AUX_BRANCH_MERGE) aux_in = Matrix<T>::Constant(1, 1, static_cast<T>(cv_s));

  Workspace<T> ws;
  FieldScratch<T> fs;
  const Matrix<T>& b = model.branch_latent(branch_in, aux_in, ws);
  const Vector<T> coeff = b.col(0);

  const auto nz = static_cast<Eigen::Index>(depths.size());
  const auto nt = static_cast<Eigen::Index>(times.size());
  const Eigen::Index total = nz * nt;
  const auto k = static_cast<Eigen::Index>(spec.trunk_coords());
  std::vector<T> z_s(depths.size()), t_s(times.size());
  for (std::size_t i = 0; i < depths.size(); ++i) z_s[i] = static_cast<T>(st.standardize_z(depths[i]));
  for (std::size_t j = 0; j < times.size(); ++j) t_s[j] = static_cast<T>(st.standardize_t(times[j]));

  // The phase 2 pi B (z, t, cv) splits into a depth part and a time part on a tensor grid.
  const FourierEmbedding<T>* embedding = model.embedding();
  if (embedding) {
    const Matrix<T> two_pi_b = T(2 * std::numbers::pi) * embedding->b;
    Matrix<T> phase_z = Eigen::Map<const Vector<T>>(z_s.data(), nz) * two_pi_b.col(0).transpose();
    Matrix<T> phase_t = Eigen::Map<const Vector<T>>(t_s.data(), nt) * two_pi_b.col(1).transpose();
    phase_t.rowwise() += static_cast<T>(cv_s) * two_pi_b.col(2).transpose();
    fs.sin_z = phase_z.array().sin();
    fs.cos_z = phase_z.array().cos();
    fs.sin_t = phase_t.array().sin();
    fs.cos_t = phase_t.array().cos();
  }

  // Chunks small enough that every layer of a chunk stays in cache.
  constexpr Eigen::Index kChunk = 256;
  Eigen::MatrixXd out(nz, nt);
  for (Eigen::Index start = 0; start < total; start += kChunk) {
    const Eigen::Index n = std::min(kChunk, total - start);
    fs.coords.resize(n, k);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index col = start + r;
      fs.coords(r, 0) = z_s[static_cast<std::size_t>(col % nz)];
      fs.coords(r, 1) = t_s[static_cast<std::size_t>(col / nz)];
      if (k == 3) fs.coords(r, 2) = static_cast<T>(cv_s);
    }
    const Matrix<T>* trunk_in = &fs.coords;
    if (embedding) {
      // sin(a + b) and cos(a + b) from the per-depth and per-time factors, one run of depths per time.
      const Eigen::Index mf = embedding->b.rows();
      fs.features.resize(n, 2 * mf);
      for (Eigen::Index r = 0; r < n;) {
        const Eigen::Index i0 = (start + r) % nz, j = (start + r) / nz;
        const Eigen::Index len = std::min(n - r, nz - i0);
        for (Eigen::Index f = 0; f < mf; ++f) {
          const auto sz = fs.sin_z.col(f).segment(i0, len).array();
          const auto cz = fs.cos_z.col(f).segment(i0, len).array();
          const T st_jf = fs.sin_t(j, f), ct_jf = fs.cos_t(j, f);
          fs.features.col(f).segment(r, len) = sz * ct_jf + cz * st_jf;
          fs.features.col(mf + f).segment(r, len) = cz * ct_jf - sz * st_jf;
        }
        r += len;
      }
      trunk_in = &fs.features;
    }
    mlp_forward_rows<T>(spec.trunk, model.trunk_params(), *trunk_in, fs.latent, fs.hidden);
    fs.pred.noalias() = fs.latent * coeff;
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index col = start + r;
      out(col % nz, col / nz) = st.destandardize_target(static_cast<double>(fs.pred(r)));
    }
  }
  return out;
}

#define CONSOL_INSTANTIATE_DEEPONET(T)                                                                           \
  template class DeepOnet<T>;                                                                                    \
  template AssembledInput<T> assemble_inputs<T>(const DeepOnet<T>&, std::span<const double>, double, double, double); \
  template T dot_decoder<T>(std::span<const T>, std::span<const T>);                                             \
  template T predict<T>(const DeepOnet<T>&, const AssembledInput<T>&);                                           \
  template InputBatch<T> gather_batch<T>(const ModelSpec&, const StandardizedData&, std::span<const std::size_t>); \
  template double operator_loss<T>(const DeepOnet<T>&, const InputBatch<T>&, std::span<const T>);                \
  template double loss_and_gradient<T>(const DeepOnet<T>&, const InputBatch<T>&, std::span<const T>, std::span<T>, \
                                       Workspace<T>&);                                                           \
  template Eigen::MatrixXd predict_field<T>(const DeepOnet<T>&, const ConsolidationCase&, std::span<const double>, \
                                            std::span<const double>);

CONSOL_INSTANTIATE_DEEPONET(float)
CONSOL_INSTANTIATE_DEEPONET(double)

}  // namespace consol
