#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace aerogh::vision {

/// Anything exposing a flat double parameter vector, a scalar loss over a
/// batch and its analytic gradient.
template <typename M, typename B>
concept DifferentiableModel = requires(M& m, B batch, std::span<double> g) {
  { m.parameters() } -> std::convertible_to<std::span<double>>;
  { m.loss(batch) } -> std::convertible_to<double>;
  { m.loss_and_gradient(batch, g) } -> std::convertible_to<double>;
};

struct GradCheckOptions {
  std::size_t samples = 200;
  double epsilon = 1e-4;
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +/- epsilon evaluations left the piecewise-linear
  /// region of the base point; replaced by further samples.
  std::size_t kinks_skipped = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// |a - n| / max(|a| + |n|, 1e-7); the floor keeps vanishing gradients from
/// turning rounding noise into large ratios.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-7);
}

/// Compares the analytic gradient with central differences on a seeded
/// sample of parameters (all of them if there are fewer than `samples`).
/// Models exposing parameter_blocks() (offset, size pairs covering the
/// vector) are sampled evenly per block.
/// Models exposing activation_signature() get kink detection: a coordinate
/// whose perturbed evaluations change the activation pattern is skipped and
/// the next one in the seeded order is used instead. Parameters are restored
/// afterwards.
template <typename M, typename B>
  requires DifferentiableModel<M, B>
GradCheckResult gradient_check(M& model, B batch, GradCheckOptions opt = {}) {
  constexpr bool has_signature = requires(const M& m) {
    { m.activation_signature() } -> std::convertible_to<std::uint64_t>;
  };
  auto params = std::span<double>(model.parameters());
  std::vector<double> analytic(params.size());
  model.loss_and_gradient(batch, std::span<double>(analytic));
  std::uint64_t base = 0;
  if constexpr (has_signature) {
    model.loss(batch);
    base = model.activation_signature();
  }

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order;
  if constexpr (requires(const M& m) { m.parameter_blocks(); }) {
    // round-robin over blocks so small layers are not drowned out
    std::vector<std::vector<std::size_t>> blocks;
    for (auto [offset, size] : model.parameter_blocks()) {
      auto& b = blocks.emplace_back(size);
      std::iota(b.begin(), b.end(), static_cast<std::size_t>(offset));
      std::shuffle(b.begin(), b.end(), rng);
    }
    for (std::size_t k = 0; order.size() < params.size(); ++k)
      for (const auto& b : blocks)
        if (k < b.size()) order.push_back(b[k]);
  } else {
    order.resize(params.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
  }

  GradCheckResult res;
  for (std::size_t i : order) {
    if (res.checked == opt.samples) break;
    const double saved = params[i];
    params[i] = saved + opt.epsilon;
    const double up = model.loss(batch);
    bool kink = false;
    if constexpr (has_signature) kink = model.activation_signature() != base;
    params[i] = saved - opt.epsilon;
    const double down = model.loss(batch);
    if constexpr (has_signature) kink = kink || model.activation_signature() != base;
    params[i] = saved;
    if (kink) {
      res.kinks_skipped += 1;
      continue;
    }
    const double numeric = (up - down) / (2.0 * opt.epsilon);
    const double err = relative_error(analytic[i], numeric);
    if (err > res.max_relative_error || res.checked == 0) {
      res.max_relative_error = err;
      res.worst_index = i;
      res.worst_analytic = analytic[i];
      res.worst_numeric = numeric;
    }
    res.checked += 1;
  }
  return res;
}

}  // namespace aerogh::vision
