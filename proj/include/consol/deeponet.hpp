#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "consol/consolidation.hpp"
#include "consol/dataset.hpp"
#include "consol/neural.hpp"

namespace consol {

/// The four branch/trunk arrangements.
enum class Variant {
  M1_BRANCH_CONCAT = 1,     ///< branch sees [u0; cv], trunk sees (z, t)
  M2_AUX_BRANCH_MERGE = 2,  ///< u0 and cv in separate branches joined by a merge net
  M3_TRUNK_CV = 3,          ///< branch sees u0, trunk sees (z, t, cv)
  M4_TRUNK_CV_FOURIER = 4,  ///< as M3 with Fourier features in front of the trunk
};

std::string to_string(Variant v);
Variant variant_from_int(int v);

struct FourierSpec {
  std::size_t m_freq = 50;
  double sigma = 1.0;
};

/// Architecture of one model. Standardization statistics travel with the spec
/// so a saved model can be queried in physical units.
struct ModelSpec {
  Variant variant = Variant::M3_TRUNK_CV;
  std::size_t m_sensors = 100;
  std::size_t q = 50;
  MlpSpec branch, trunk;
  MlpSpec aux, merge;  ///< M2 only (empty widths otherwise)
  std::optional<FourierSpec> fourier;  ///< M4 only
  StandardizationStats stats;

  /// Every net gets `hidden_layers` x `width` hidden units; the M2 merge net has
  /// `merge_hidden` hidden layers of the same width.
  static ModelSpec make(Variant v, std::size_t m_sensors, std::size_t q = 50, std::size_t hidden_layers = 6,
                        std::size_t width = 30, FourierSpec fourier = {}, std::size_t merge_hidden = 2,
                        Activation act = Activation::Tanh);

  void validate() const;

  /// Number of raw trunk coordinates: 2 for (z, t), 3 for (z, t, cv).
  std::size_t trunk_coords() const;
  std::size_t branch_input_width() const { return branch.input_width(); }
  std::size_t trunk_input_width() const { return trunk.input_width(); }
  std::size_t param_count() const;
};

nlohmann::json to_json(const MlpSpec& s);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& s);
ModelSpec model_spec_from_json(const nlohmann::json& j);

struct EpochRecord {
  std::size_t epoch = 0;  ///< 0 holds the losses of the initial parameters
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// Distribution the model was trained on; used to flag out-of-distribution queries.
struct TrainingProvenance {
  SamplingRanges ranges;
  GrfSpec grf;
  double mix = 0.5;
  double tv_max = 2.0;
  double h_dr = 1.0;
  std::size_t nz = 100;
  IntegratorConfig solver;
};

nlohmann::json to_json(const TrainingProvenance& p);
TrainingProvenance provenance_from_json(const nlohmann::json& j);

template <typename T>
struct ModelState {
  std::vector<T> params;  ///< branch | trunk | aux | merge, each in MlpSpec flat layout
  Matrix<T> b_matrix;     ///< frozen Fourier frequencies (empty unless M4)
  std::vector<EpochRecord> history;
  std::uint64_t seed = 0;
  nlohmann::json train_config = nlohmann::json::object();
  std::optional<TrainingProvenance> provenance;
};

/// Inputs for a batch, one column per triple. For M4 `trunk` holds raw
/// (z, t, cv) coordinates; the embedding is applied inside the model.
template <typename T>
struct InputBatch {
  Matrix<T> branch;
  Matrix<T> aux;  ///< M2 only: 1 x batch standardized cv
  Matrix<T> trunk;
};

/// Per-call scratch space for forward/backward; one per thread.
template <typename T>
struct Workspace {
  MlpCache<T> branch, trunk, aux, merge;
  Matrix<T> trunk_features;  ///< M4: embedded trunk coordinates
  Matrix<T> concat;          ///< M2: [main latent; aux latent]
  Vector<T> predictions;
};

template <typename T>
class DeepOnet {
 public:
  /// Fresh Glorot initialization (and B draw for M4) from one seed.
  DeepOnet(ModelSpec spec, std::uint64_t seed);
  /// Restores a saved model.
  DeepOnet(ModelSpec spec, ModelState<T> state);

  const ModelSpec& spec() const noexcept { return spec_; }
  const ModelState<T>& state() const noexcept { return state_; }
  ModelState<T>& state() noexcept { return state_; }

  std::span<T> params() noexcept { return state_.params; }
  std::span<const T> params() const noexcept { return state_.params; }
  const FourierEmbedding<T>* embedding() const noexcept { return embedding_ ? &*embedding_ : nullptr; }

  std::span<const T> branch_params() const;
  std::span<const T> trunk_params() const;
  std::span<const T> aux_params() const;
  std::span<const T> merge_params() const;

  /// Branch pathway output (q x batch).
  const Matrix<T>& branch_latent(const Matrix<T>& branch_in, const Matrix<T>& aux_in, Workspace<T>& ws) const;
  /// Trunk pathway output (q x batch); applies the Fourier embedding for M4.
  const Matrix<T>& trunk_latent(const Matrix<T>& trunk_in, Workspace<T>& ws) const;

  /// Column-wise dot product of the two latents.
  const Vector<T>& forward(const InputBatch<T>& batch, Workspace<T>& ws) const;

  /// Adds d(loss)/d(params) to `grads` given d(loss)/d(prediction) for the batch in `ws`.
  void backward(const Vector<T>& dpred, Workspace<T>& ws, std::span<T> grads) const;

 private:
  void layout();

  ModelSpec spec_;
  ModelState<T> state_;
  std::optional<FourierEmbedding<T>> embedding_;
  std::size_t branch_off_ = 0, trunk_off_ = 0, aux_off_ = 0, merge_off_ = 0;
};

/// Single-example network inputs.
template <typename T>
struct AssembledInput {
  std::vector<T> branch;
  std::vector<T> aux;
  std::vector<T> trunk;  ///< after the Fourier embedding for M4
};

/// Places the standardized branch vector, cv and (z, t) where the variant expects them.
template <typename T>
AssembledInput<T> assemble_inputs(const DeepOnet<T>& model, std::span<const double> branch_std, double cv_std,
                                  double z_std, double t_std);

/// sum_k b_k t_k.
template <typename T>
T dot_decoder(std::span<const T> b, std::span<const T> t);

/// Prediction (standardized target units) for one assembled example.
template <typename T>
T predict(const DeepOnet<T>& model, const AssembledInput<T>& in);

/// Gathers flattened triples (index i * p + j) of a standardized dataset into a batch.
template <typename T>
InputBatch<T> gather_batch(const ModelSpec& spec, const StandardizedData& data, std::span<const std::size_t> triples);

/// Mean squared error over the batch, in standardized units.
template <typename T>
double operator_loss(const DeepOnet<T>& model, const InputBatch<T>& batch, std::span<const T> targets);

/// Loss and its parameter gradient (grads are overwritten).
template <typename T>
double loss_and_gradient(const DeepOnet<T>& model, const InputBatch<T>& batch, std::span<const T> targets,
                         std::span<T> grads, Workspace<T>& ws);

/// Pressure field (Pa, depths x times) predicted for a case on a tensor grid.
template <typename T>
Eigen::MatrixXd predict_field(const DeepOnet<T>& model, const ConsolidationCase& c, std::span<const double> depths,
                              std::span<const double> times);

struct TrainConfig {
  std::size_t epochs = 600;
  std::size_t batch_size = 4096;
  AdamConfig adam;
  /// Learning rate reached at the last epoch by geometric decay from adam.lr (constant when 0).
  double lr_final = 0.0;
  std::uint64_t seed = 0;
  /// Stop when the validation loss has not improved for this many epochs (off when 0).
  std::size_t early_stopping_patience = 0;
  std::function<void(const EpochRecord&)> on_epoch;
};

nlohmann::json to_json(const TrainConfig& c);

/// Trains a fresh model. The training set must carry standardization stats;
/// both sets are standardized with them.
template <typename T>
DeepOnet<T> train(ModelSpec spec, const OperatorDataset& train_set, const OperatorDataset& val_set,
                  const TrainConfig& cfg);

/// Full-pass loss over every triple of a standardized set.
template <typename T>
double dataset_loss(const DeepOnet<T>& model, const StandardizedData& data, std::size_t chunk = 8192);

inline constexpr const char* kModelMagic = "CONSOL-DEEPONET-MODEL";
inline constexpr int kModelSchemaVersion = 1;

template <typename T>
void save_model(const DeepOnet<T>& model, const std::filesystem::path& dir);

template <typename T>
DeepOnet<T> load_model(const std::filesystem::path& dir);

/// Reads only the manifest (spec, provenance, history) of a saved model.
nlohmann::json read_model_manifest(const std::filesystem::path& dir);

}  // namespace consol
