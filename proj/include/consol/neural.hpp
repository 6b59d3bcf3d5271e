#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "consol/rng.hpp"

namespace consol {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Activation { Tanh, Relu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

/// Widths from input to output; the activation is applied after every layer but the last.
struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::Tanh;

  /// in -> `hidden_layers` x `width` -> out.
  static MlpSpec make(std::size_t in, std::size_t hidden_layers, std::size_t width, std::size_t out,
                      Activation act = Activation::Tanh);

  void validate() const;
  std::size_t layers() const noexcept { return widths.size() - 1; }
  std::size_t input_width() const noexcept { return widths.front(); }
  std::size_t output_width() const noexcept { return widths.back(); }
  std::size_t param_count() const;

  /// Flat layout: for each layer, W (out x in, column-major) followed by b (out).
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  bool operator==(const MlpSpec&) const = default;
};

/// Standalone parameter block with a gradient buffer of identical shape.
template <typename T>
struct MlpParams {
  MlpSpec spec;
  std::vector<T> values;
  std::vector<T> grads;

  Eigen::Map<Matrix<T>> weight(std::size_t layer);
  Eigen::Map<Vector<T>> bias(std::size_t layer);
  void zero_grad() { std::fill(grads.begin(), grads.end(), T(0)); }
};

/// Post-activation values of every layer (index 0 is the input) from the last forward pass.
template <typename T>
struct MlpCache {
  std::vector<Matrix<T>> activations;
  const T* params = nullptr;
};

/// Glorot-uniform weights and zero biases written into `out`.
template <typename T>
void init_mlp_into(const MlpSpec& spec, Rng& rng, std::span<T> out);

template <typename T>
MlpParams<T> init_mlp(const MlpSpec& spec, std::uint64_t seed);

/// Forward pass on a batch stored column-wise (features x batch).
template <typename T>
const Matrix<T>& mlp_forward(const MlpSpec& spec, std::span<const T> params, const Matrix<T>& x,
                             MlpCache<T>& cache);

/// Reverse pass for the batch held in `cache`. Parameter gradients are added to
/// `grads`; the gradient with respect to the input batch is returned.
template <typename T>
Matrix<T> mlp_backward(const MlpSpec& spec, std::span<const T> params, const MlpCache<T>& cache,
                       const Matrix<T>& dy, std::span<T> grads);

/// Inference-only forward pass with one sample per row (batch x in -> batch x out).
/// `hidden` holds the intermediate layers between calls.
template <typename T>
void mlp_forward_rows(const MlpSpec& spec, std::span<const T> params, const Matrix<T>& x, Matrix<T>& out,
                      std::vector<Matrix<T>>& hidden);

template <typename T>
const Matrix<T>& mlp_forward(const MlpParams<T>& p, const Matrix<T>& x, MlpCache<T>& cache) {
  return mlp_forward<T>(p.spec, p.values, x, cache);
}

template <typename T>
Matrix<T> mlp_backward(MlpParams<T>& p, const MlpCache<T>& cache, const Matrix<T>& dy) {
  return mlp_backward<T>(p.spec, p.values, cache, dy, p.grads);
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> m, v;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, T(0)), v(n, T(0)) {}
};

/// One bias-corrected Adam step over a flat parameter vector.
template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, AdamState<T>& state, const AdamConfig& cfg);

/// Random Fourier features [sin(2 pi B v); cos(2 pi B v)] with a frozen B ~ N(0, sigma^2).
template <typename T>
struct FourierEmbedding {
  Matrix<T> b;  ///< m_freq x k
  double sigma = 1.0;

  static FourierEmbedding make(std::size_t m_freq, std::size_t k, double sigma, Rng& rng);

  std::size_t m_freq() const noexcept { return static_cast<std::size_t>(b.rows()); }
  std::size_t input_width() const noexcept { return static_cast<std::size_t>(b.cols()); }
  std::size_t output_width() const noexcept { return 2 * m_freq(); }

  /// Column-wise embedding of a k x batch matrix into 2 m_freq x batch.
  Matrix<T> embed(const Matrix<T>& v) const;
  /// Row-wise embedding of a batch x k matrix into batch x 2 m_freq.
  void embed_rows(const Matrix<T>& v, Matrix<T>& out) const;
};

template <typename T>
std::vector<T> fourier_embed(const FourierEmbedding<T>& e, std::span<const T> v);

}  // namespace consol
