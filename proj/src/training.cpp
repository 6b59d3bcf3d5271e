#include <algorithm>
#include <cmath>
#include <numeric>

#include "consol/deeponet.hpp"
#include "consol/errors.hpp"

namespace consol {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 10;
constexpr std::uint64_t kShuffleStream = 11;

std::optional<TrainingProvenance> provenance_from_meta(const json& meta) {
  if (!meta.is_object() || !meta.contains("ranges") || !meta.contains("grf")) return std::nullopt;
  try {
    json j{{"ranges", meta.at("ranges")}, {"grf", meta.at("grf")},   {"mix", meta.value("mix", 0.5)},
           {"tv_max", meta.value("tv_max", 2.0)}, {"h_dr", meta.value("h_dr", 1.0)},
           {"nz", meta.value("nz", std::size_t{100})}, {"solver", meta.at("solver")}};
    return provenance_from_json(j);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.adam.lr},
              {"lr_final", c.lr_final > 0.0 ? c.lr_final : c.adam.lr},
              {"beta1", c.adam.beta1},
              {"beta2", c.adam.beta2},
              {"eps", c.adam.eps},
              {"seed", c.seed},
              {"early_stopping_patience", c.early_stopping_patience},
              {"shuffle", "flattened (case, point) triples, Fisher-Yates per epoch"}};
}

template <typename T>
double dataset_loss(const DeepOnet<T>& model, const StandardizedData& data, std::size_t chunk) {
  const std::size_t total = data.n * data.p;
  if (total == 0) throw DomainError("dataset_loss: empty dataset");
  chunk = std::max<std::size_t>(chunk, 1);
  std::vector<std::size_t> idx;
  std::vector<T> targets;
  Workspace<T> ws;
  double acc = 0.0;
  for (std::size_t start = 0; start < total; start += chunk) {
    const std::size_t count = std::min(chunk, total - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    const InputBatch<T> batch = gather_batch<T>(model.spec(), data, idx);
    const Vector<T>& pred = model.forward(batch, ws);
    for (std::size_t k = 0; k < count; ++k) {
      const double r = static_cast<double>(pred(static_cast<Eigen::Index>(k))) - data.targets[start + k];
      acc += r * r;
    }
  }
  return acc / static_cast<double>(total);
}

template <typename T>
DeepOnet<T> train(ModelSpec spec, const OperatorDataset& train_set, const OperatorDataset& val_set,
                  const TrainConfig& cfg) {
  if (!train_set.stats) throw DomainError("train: training set carries no standardization stats");
  if (cfg.batch_size == 0) throw DomainError("train: batch_size must be positive");
  if (!(cfg.adam.lr > 0.0)) throw DomainError("train: learning rate must be positive");
  if (!(cfg.lr_final >= 0.0)) throw DomainError("train: final learning rate must be non-negative");
  if (train_set.m != spec.m_sensors || val_set.m != spec.m_sensors) {
    throw DomainError("train: dataset sensor count differs from model");
  }
  spec.stats = *train_set.stats;
  const StandardizedData tr = standardize(train_set, spec.stats);
  const StandardizedData va = standardize(val_set, spec.stats);

  DeepOnet<T> model(spec, derive_seed(cfg.seed, kInitStream, 0));
  model.state().train_config = to_json(cfg);
  model.state().provenance = provenance_from_meta(train_set.meta);

  auto record = [&](const EpochRecord& r) {
    model.state().history.push_back(r);
    if (cfg.on_epoch) cfg.on_epoch(r);
  };
  record({0, dataset_loss(model, tr), dataset_loss(model, va)});

  const std::size_t total = tr.n * tr.p;
  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<T> grads(model.params().size());
  std::vector<T> targets;
  AdamState<T> adam(grads.size());
  Workspace<T> ws;

  double best = model.state().history.front().val_loss;
  std::size_t since_best = 0;
  AdamConfig opt = cfg.adam;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.lr_final > 0.0 && cfg.epochs > 1) {
      const double frac = static_cast<double>(epoch - 1) / static_cast<double>(cfg.epochs - 1);
      opt.lr = cfg.adam.lr * std::pow(cfg.lr_final / cfg.adam.lr, frac);
    }
    Rng shuffle(derive_seed(cfg.seed, kShuffleStream, epoch));
    for (std::size_t i = total; i > 1; --i) std::swap(perm[i - 1], perm[shuffle.below(i)]);

    double sum = 0.0;
    for (std::size_t start = 0; start < total; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, total - start);
      const std::span<const std::size_t> idx(perm.data() + start, count);
      const InputBatch<T> batch = gather_batch<T>(model.spec(), tr, idx);
      targets.resize(count);
      for (std::size_t k = 0; k < count; ++k) targets[k] = static_cast<T>(tr.targets[idx[k]]);
      const double loss = loss_and_gradient<T>(model, batch, targets, grads, ws);
      if (!std::isfinite(loss)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      adam_update<T>(model.params(), grads, adam, opt);
      sum += loss * static_cast<double>(count);
    }
    const double val = dataset_loss(model, va);
    if (!std::isfinite(val)) throw NumericalError("train: non-finite validation loss at epoch " + std::to_string(epoch));
    record({epoch, sum / static_cast<double>(total), val});

    if (val < best) {
      best = val;
      since_best = 0;
    } else if (cfg.early_stopping_patience > 0 && ++since_best >= cfg.early_stopping_patience) {
      break;
    }
  }
  return model;
}

template double dataset_loss<float>(const DeepOnet<float>&, const StandardizedData&, std::size_t);
template double dataset_loss<double>(const DeepOnet<double>&, const StandardizedData&, std::size_t);
template DeepOnet<float> train<float>(ModelSpec, const OperatorDataset&, const OperatorDataset&, const TrainConfig&);
template DeepOnet<double> train<double>(ModelSpec, const OperatorDataset&, const OperatorDataset&, const TrainConfig&);

}  // namespace consol
