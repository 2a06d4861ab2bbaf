#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aerogh/vision/dataset.hpp"
#include "aerogh/vision/network.hpp"

namespace aerogh::vision {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  /// Epochs at the start during which only the head is updated.
  int freeze_backbone_epochs = 0;
};

inline void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (c.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate))
    throw ValidationError("learning_rate must be finite and >= 0");
  if (c.momentum < 0.0 || c.momentum >= 1.0) throw ValidationError("momentum must be in [0, 1)");
  if (c.freeze_backbone_epochs < 0) throw ValidationError("freeze_backbone_epochs must be >= 0");
}

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, int batch, double grad_norm)
      : std::runtime_error(message(epoch, batch, grad_norm)), epoch(epoch), batch(batch),
        grad_norm(grad_norm) {}
  int epoch, batch;
  double grad_norm;

 private:
  static std::string message(int e, int b, double g) {
    std::ostringstream ss;
    ss << "non-finite loss at epoch " << e << ", batch " << b << " (gradient norm " << g << ")";
    return ss.str();
  }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  bool backbone_frozen = false;
};

struct TrainResult {
  std::vector<double> train_curve;
  std::vector<double> val_curve;
  std::vector<double> loss_curve;
};

template <typename Scalar>
double accuracy(ConvNet<Scalar>& model, const std::vector<LabeledImage>& images) {
  if (images.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& im : images) hit += model.predict(im).label == im.label;
  return static_cast<double>(hit) / static_cast<double>(images.size());
}

/// Minibatch SGD with momentum on mean softmax cross-entropy.
///
/// The training set is reshuffled every epoch from a stream seeded by
/// cfg.seed, so identical inputs give bit-identical weights and curves. The
/// training accuracy of an epoch is measured on each batch before its update.
template <typename Scalar>
TrainResult train(ConvNet<Scalar>& model, const DatasetSplit& data, const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch = {}) {
  validate(cfg);
  if (data.train.empty()) throw ValidationError("training split is empty");

  const std::size_t n_params = model.parameter_count();
  const std::size_t backbone = model.backbone_size();
  std::vector<Scalar> grad(n_params), velocity(n_params, Scalar(0));
  const auto lr = static_cast<Scalar>(cfg.learning_rate);
  const auto mu = static_cast<Scalar>(cfg.momentum);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<LabeledImage> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool frozen = epoch < cfg.freeze_backbone_epochs;
    model.frozen_backbone = frozen;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(data.train[order[k]]);
      const auto stats = model.loss_and_gradient(batch, grad, frozen);
      if (!std::isfinite(stats.loss)) {
        double norm = 0.0;
        for (Scalar g : grad) norm += static_cast<double>(g) * static_cast<double>(g);
        throw TrainingDiverged(epoch, batch_no, std::sqrt(norm));
      }
      loss_sum += stats.loss * static_cast<double>(batch.size());
      correct += stats.correct;
      auto w = model.parameters();
      for (std::size_t i = frozen ? backbone : 0; i < n_params; ++i) {
        velocity[i] = mu * velocity[i] - lr * grad[i];
        w[i] += velocity[i];
      }
      ++batch_no;
    }
    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_sum / static_cast<double>(order.size());
    es.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    es.val_accuracy = accuracy(model, data.val);
    es.backbone_frozen = frozen;
    result.train_curve.push_back(es.train_accuracy);
    result.val_curve.push_back(es.val_accuracy);
    result.loss_curve.push_back(es.train_loss);
    if (on_epoch) on_epoch(es);
  }
  model.frozen_backbone = cfg.freeze_backbone_epochs >= cfg.epochs;
  return result;
}

}  // namespace aerogh::vision
