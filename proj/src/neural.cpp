#include "consol/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "consol/errors.hpp"

namespace consol {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw DomainError("unknown activation '" + s + "'");
}

MlpSpec MlpSpec::make(std::size_t in, std::size_t hidden_layers, std::size_t width, std::size_t out,
                      Activation act) {
  MlpSpec s;
  s.widths.push_back(in);
  for (std::size_t i = 0; i < hidden_layers; ++i) s.widths.push_back(width);
  s.widths.push_back(out);
  s.activation = act;
  s.validate();
  return s;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw DomainError("mlp: need at least an input and an output width");
  for (std::size_t w : widths) {
    if (w == 0) throw DomainError("mlp: widths must be positive");
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l + 1] * (widths[l] + 1);
  return n;
}

std::size_t MlpSpec::weight_offset(std::size_t layer) const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer; ++l) n += widths[l + 1] * (widths[l] + 1);
  return n;
}

std::size_t MlpSpec::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + widths[layer + 1] * widths[layer];
}

template <typename T>
Eigen::Map<Matrix<T>> MlpParams<T>::weight(std::size_t layer) {
  return {values.data() + spec.weight_offset(layer), static_cast<Eigen::Index>(spec.widths[layer + 1]),
          static_cast<Eigen::Index>(spec.widths[layer])};
}

template <typename T>
Eigen::Map<Vector<T>> MlpParams<T>::bias(std::size_t layer) {
  return {values.data() + spec.bias_offset(layer), static_cast<Eigen::Index>(spec.widths[layer + 1])};
}

template <typename T>
void init_mlp_into(const MlpSpec& spec, Rng& rng, std::span<T> out) {
  spec.validate();
  if (out.size() != spec.param_count()) throw DomainError("init_mlp: parameter block has the wrong size");
  std::size_t pos = 0;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t fan_in = spec.widths[l], fan_out = spec.widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t k = 0; k < fan_in * fan_out; ++k) out[pos++] = static_cast<T>(rng.uniform(-limit, limit));
    for (std::size_t k = 0; k < fan_out; ++k) out[pos++] = T(0);
  }
}

template <typename T>
MlpParams<T> init_mlp(const MlpSpec& spec, std::uint64_t seed) {
  MlpParams<T> p;
  p.spec = spec;
  p.values.resize(spec.param_count());
  p.grads.assign(spec.param_count(), T(0));
  Rng rng(seed);
  init_mlp_into<T>(spec, rng, p.values);
  return p;
}

namespace {

template <typename T>
Eigen::Map<const Matrix<T>> weight_view(const MlpSpec& spec, std::span<const T> params, std::size_t l) {
  return {params.data() + spec.weight_offset(l), static_cast<Eigen::Index>(spec.widths[l + 1]),
          static_cast<Eigen::Index>(spec.widths[l])};
}

template <typename T>
Eigen::Map<const Vector<T>> bias_view(const MlpSpec& spec, std::span<const T> params, std::size_t l) {
  return {params.data() + spec.bias_offset(l), static_cast<Eigen::Index>(spec.widths[l + 1])};
}

}  // namespace

template <typename T>
const Matrix<T>& mlp_forward(const MlpSpec& spec, std::span<const T> params, const Matrix<T>& x,
                             MlpCache<T>& cache) {
  if (params.size() != spec.param_count()) throw DomainError("mlp_forward: parameter block has the wrong size");
  if (static_cast<std::size_t>(x.rows()) != spec.input_width()) {
    throw DomainError("mlp_forward: input width " + std::to_string(x.rows()) + " does not match spec width " +
                      std::to_string(spec.input_width()));
  }
  const std::size_t layers = spec.layers();
  cache.activations.resize(layers + 1);
  cache.activations[0] = x;
  cache.params = params.data();
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix<T>& a = cache.activations[l + 1];
    a.noalias() = weight_view(spec, params, l) * cache.activations[l];
    a.colwise() += bias_view(spec, params, l);
    if (l + 1 < layers) {
      if (spec.activation == Activation::Tanh) {
        a = a.array().tanh();
      } else {
        a = a.array().max(T(0));
      }
    }
  }
  return cache.activations.back();
}

template <typename T>
void mlp_forward_rows(const MlpSpec& spec, std::span<const T> params, const Matrix<T>& x, Matrix<T>& out,
                      std::vector<Matrix<T>>& hidden) {
  if (params.size() != spec.param_count()) throw DomainError("mlp_forward_rows: parameter block has the wrong size");
  if (static_cast<std::size_t>(x.cols()) != spec.input_width()) {
    throw DomainError("mlp_forward_rows: input width " + std::to_string(x.cols()) + " does not match spec width " +
                      std::to_string(spec.input_width()));
  }
  const std::size_t layers = spec.layers();
  hidden.resize(layers - 1);
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix<T>& in = l == 0 ? x : hidden[l - 1];
    Matrix<T>& a = l + 1 == layers ? out : hidden[l];
    a.noalias() = in * weight_view(spec, params, l).transpose();
    a.rowwise() += bias_view(spec, params, l).transpose();
    if (l + 1 < layers) {
      if (spec.activation == Activation::Tanh) {
        a = a.array().tanh();
      } else {
        a = a.array().max(T(0));
      }
    }
  }
}

template <typename T>
Matrix<T> mlp_backward(const MlpSpec& spec, std::span<const T> params, const MlpCache<T>& cache,
                       const Matrix<T>& dy, std::span<T> grads) {
  const std::size_t layers = spec.layers();
  if (cache.activations.size() != layers + 1 || cache.params != params.data()) {
    throw DomainError("mlp_backward: cache does not belong to these parameters (run mlp_forward first)");
  }
  if (grads.size() != spec.param_count()) throw DomainError("mlp_backward: gradient block has the wrong size");
  if (static_cast<std::size_t>(dy.rows()) != spec.output_width() || dy.cols() != cache.activations.back().cols()) {
    throw DomainError("mlp_backward: output gradient shape does not match the cached batch");
  }
  Matrix<T> delta = dy;
  Matrix<T> upstream;
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix<T>& a_prev = cache.activations[l];
    Eigen::Map<Matrix<T>> gw(grads.data() + spec.weight_offset(l), static_cast<Eigen::Index>(spec.widths[l + 1]),
                             static_cast<Eigen::Index>(spec.widths[l]));
    Eigen::Map<Vector<T>> gb(grads.data() + spec.bias_offset(l), static_cast<Eigen::Index>(spec.widths[l + 1]));
    gw.noalias() += delta * a_prev.transpose();
    gb.noalias() += delta.rowwise().sum();
    upstream.noalias() = weight_view(spec, params, l).transpose() * delta;
    if (l == 0) break;
    if (spec.activation == Activation::Tanh) {
      delta = upstream.array() * (T(1) - a_prev.array().square());
    } else {
      delta = upstream.array() * (a_prev.array() > T(0)).template cast<T>();
    }
  }
  return upstream;
}

template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, AdamState<T>& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DomainError("adam_update: inconsistent buffer sizes");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta2, t)));
  const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const T m_hat = state.m[i] * c1;
    const T v_hat = state.v[i] * c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template <typename T>
FourierEmbedding<T> FourierEmbedding<T>::make(std::size_t m_freq, std::size_t k, double sigma, Rng& rng) {
  if (m_freq == 0 || k == 0) throw DomainError("fourier: m_freq and k must be positive");
  if (!(sigma >= 0.0)) throw DomainError("fourier: sigma must be non-negative");
  FourierEmbedding e;
  e.sigma = sigma;
  e.b.resize(static_cast<Eigen::Index>(m_freq), static_cast<Eigen::Index>(k));
  // Row-major draw order so the frequency rows do not depend on the storage order.
  for (Eigen::Index i = 0; i < e.b.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.b.cols(); ++j) e.b(i, j) = static_cast<T>(sigma * rng.normal());
  }
  return e;
}

template <typename T>
Matrix<T> FourierEmbedding<T>::embed(const Matrix<T>& v) const {
  if (v.rows() != b.cols()) throw DomainError("fourier_embed: input width does not match B");
  const Matrix<T> phase = (T(2 * std::numbers::pi) * b) * v;
  Matrix<T> out(2 * b.rows(), v.cols());
  out.topRows(b.rows()) = phase.array().sin();
  out.bottomRows(b.rows()) = phase.array().cos();
  return out;
}

template <typename T>
void FourierEmbedding<T>::embed_rows(const Matrix<T>& v, Matrix<T>& out) const {
  if (v.cols() != b.cols()) throw DomainError("fourier_embed: input width does not match B");
  out.resize(v.rows(), 2 * b.rows());
  out.leftCols(b.rows()).noalias() = v * (T(2 * std::numbers::pi) * b).transpose();
  out.rightCols(b.rows()) = out.leftCols(b.rows()).array().cos();
  out.leftCols(b.rows()) = out.leftCols(b.rows()).array().sin();
}

template <typename T>
std::vector<T> fourier_embed(const FourierEmbedding<T>& e, std::span<const T> v) {
  if (v.size() != e.input_width()) throw DomainError("fourier_embed: input width does not match B");
  Matrix<T> col(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) col(static_cast<Eigen::Index>(i), 0) = v[i];
  const Matrix<T> out = e.embed(col);
  return {out.data(), out.data() + out.size()};
}

#define CONSOL_INSTANTIATE_NEURAL(T)                                                                          \
  template struct MlpParams<T>;                                                                               \
  template void init_mlp_into<T>(const MlpSpec&, Rng&, std::span<T>);                                         \
  template MlpParams<T> init_mlp<T>(const MlpSpec&, std::uint64_t);                                           \
  template const Matrix<T>& mlp_forward<T>(const MlpSpec&, std::span<const T>, const Matrix<T>&, MlpCache<T>&); \
  template void mlp_forward_rows<T>(const MlpSpec&, std::span<const T>, const Matrix<T>&, Matrix<T>&,            \
                                    std::vector<Matrix<T>>&);                                                     \
  template Matrix<T> mlp_backward<T>(const MlpSpec&, std::span<const T>, const MlpCache<T>&, const Matrix<T>&, \
                                     std::span<T>);                                                           \
  template void adam_update<T>(std::span<T>, std::span<const T>, AdamState<T>&, const AdamConfig&);           \
  template struct FourierEmbedding<T>;                                                                        \
  template std::vector<T> fourier_embed<T>(const FourierEmbedding<T>&, std::span<const T>);

CONSOL_INSTANTIATE_NEURAL(float)
CONSOL_INSTANTIATE_NEURAL(double)

}  // namespace consol
