#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "aerogh/vision/image.hpp"

namespace aerogh::vision {

struct SplitRatios {
  double train = 0.75;
  double val = 0.15;
  double test = 0.10;
};

struct DatasetSplit {
  std::vector<LabeledImage> train, val, test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

inline constexpr std::size_t kMinImagesPerClass = 10;

namespace detail {

/// Integer partition sizes per class: every cell within one of count * ratio,
/// row sums equal the class counts and column sums equal the rounded global
/// partition sizes.
inline std::vector<std::array<std::size_t, 3>> allocate(const std::array<std::size_t, 3>& counts,
                                                        const std::array<double, 3>& ratios) {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  std::array<std::size_t, 3> totals{};
  totals[0] = static_cast<std::size_t>(std::llround(ratios[0] * n));
  totals[1] = static_cast<std::size_t>(std::llround(ratios[1] * n));
  totals[1] = std::min(totals[1], n - totals[0]);
  totals[2] = n - totals[0] - totals[1];

  std::vector<std::array<std::size_t, 3>> cells(counts.size());
  std::vector<std::array<double, 3>> frac(counts.size());
  std::vector<std::size_t> row_left(counts.size());
  std::array<std::size_t, 3> col_left = totals;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    std::size_t used = 0;
    for (int p = 0; p < 3; ++p) {
      const double ideal = ratios[p] * static_cast<double>(counts[c]);
      cells[c][p] = static_cast<std::size_t>(std::floor(ideal));
      frac[c][p] = ideal - std::floor(ideal);
      used += cells[c][p];
      col_left[p] -= std::min(col_left[p], cells[c][p]);
    }
    row_left[c] = counts[c] - used;
  }
  // Hand out the remaining units partition by partition. Rows whose leftover
  // could not otherwise be absorbed by the later partitions go first.
  for (int p = 0; p < 3; ++p) {
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (row_left[c] > 0) order.push_back(c);
    const auto later = static_cast<std::size_t>(2 - p);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const bool fa = row_left[a] > later, fb = row_left[b] > later;
      if (fa != fb) return fa;
      return frac[a][p] > frac[b][p];
    });
    for (std::size_t c : order) {
      if (col_left[p] == 0) break;
      cells[c][p] += 1;
      row_left[c] -= 1;
      col_left[p] -= 1;
    }
  }
  // keeps every image assigned should the greedy pass leave a remainder
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (int p = 0; p < 3 && row_left[c] > 0; ++p)
      while (row_left[c] > 0 && col_left[p] > 0) {
        cells[c][p] += 1;
        row_left[c] -= 1;
        col_left[p] -= 1;
      }
  return cells;
}

}  // namespace detail

/// Stratified shuffle split. Each class is shuffled with the seeded stream and
/// cut into train/val/test so per-class shares stay within one image of the
/// ratios while the partition totals match the global ratios.
inline DatasetSplit split(const std::vector<LabeledImage>& images, SplitRatios ratios,
                          std::uint64_t seed) {
  const auto counts = class_counts(images);
  for (LeafClass c : kAllClasses)
    if (counts[static_cast<int>(c)] < kMinImagesPerClass)
      throw ValidationError("class '" + std::string(sim::to_string(c)) + "' has " +
                            std::to_string(counts[static_cast<int>(c)]) + " images, need at least " +
                            std::to_string(kMinImagesPerClass));
  const double sum = ratios.train + ratios.val + ratios.test;
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 || std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("split ratios must be non-negative and sum to 1");

  const auto cells = detail::allocate(counts, {ratios.train, ratios.val, ratios.test});
  DatasetSplit out;
  out.seed = seed;
  out.ratios = ratios;
  std::mt19937_64 rng(seed);
  for (LeafClass c : kAllClasses) {
    std::vector<const LabeledImage*> members;
    for (const auto& im : images)
      if (im.label == c) members.push_back(&im);
    std::shuffle(members.begin(), members.end(), rng);
    const auto& cell = cells[static_cast<int>(c)];
    std::size_t i = 0;
    for (std::size_t k = 0; k < cell[0]; ++k) out.train.push_back(*members[i++]);
    for (std::size_t k = 0; k < cell[1]; ++k) out.val.push_back(*members[i++]);
    for (std::size_t k = 0; k < cell[2]; ++k) out.test.push_back(*members[i++]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// augmentation

struct AugmentParams {
  double angle_deg = 0.0;
  double zoom = 1.0;
  bool hflip = false;
  bool vflip = false;
};

inline LabeledImage flip_horizontal(const LabeledImage& in) {
  LabeledImage out = in;
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = in.at(in.width - 1 - x, y, c);
  return out;
}

inline LabeledImage flip_vertical(const LabeledImage& in) {
  LabeledImage out = in;
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = in.at(x, in.height - 1 - y, c);
  return out;
}

/// Rotation and zoom about the image centre with bilinear sampling and
/// edge replication, followed by the requested flips.
inline LabeledImage affine_warp(const LabeledImage& in, const AugmentParams& p) {
  LabeledImage out = in;
  const double cx = (in.width - 1) / 2.0, cy = (in.height - 1) / 2.0;
  const double th = p.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  auto px = [&](int x, int y, int ch) {
    x = std::clamp(x, 0, in.width - 1);
    y = std::clamp(y, 0, in.height - 1);
    return static_cast<double>(in.at(x, y, ch));
  };
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      // inverse map: output pixel -> source location
      const double dx = (x - cx) / p.zoom, dy = (y - cy) / p.zoom;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1 - fx) * (1 - fy) * px(x0, y0, ch) + fx * (1 - fy) * px(x0 + 1, y0, ch) +
                         (1 - fx) * fy * px(x0, y0 + 1, ch) + fx * fy * px(x0 + 1, y0 + 1, ch);
        out.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  if (p.hflip) out = flip_horizontal(out);
  if (p.vflip) out = flip_vertical(out);
  return out;
}

struct AugmentRanges {
  double max_angle_deg = 30.0;
  double min_zoom = 0.8;
  double max_zoom = 1.2;
};

/// Grows `images` to exactly `target_count`: originals first, then synthetic
/// variants of seeded-chosen parents. Synthetic ids are "<parent>#aug<k>".
inline std::vector<LabeledImage> augment(const std::vector<LabeledImage>& images,
                                         std::size_t target_count, std::uint64_t seed,
                                         AugmentRanges ranges = {}) {
  if (images.empty()) throw ValidationError("augment needs at least one input image");
  if (target_count < images.size())
    throw ValidationError("augment target_count is below the input count");
  std::vector<LabeledImage> out = images;
  out.reserve(target_count);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
  std::uniform_real_distribution<double> angle(-ranges.max_angle_deg, ranges.max_angle_deg);
  std::uniform_real_distribution<double> zoom(ranges.min_zoom, ranges.max_zoom);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t k = 0; out.size() < target_count; ++k) {
    const auto& parent = images[pick(rng)];
    AugmentParams p;
    p.angle_deg = angle(rng);
    p.zoom = zoom(rng);
    p.hflip = coin(rng);
    p.vflip = coin(rng);
    LabeledImage im = affine_warp(parent, p);
    im.source_id = parent.source_id + "#aug" + std::to_string(k);
    out.push_back(std::move(im));
  }
  return out;
}

/// Per-class resampling: every class is grown by augmentation to the size of
/// the largest one. Originals keep their order; each class draws its own
/// seeded stream.
inline std::vector<LabeledImage> balance_classes(const std::vector<LabeledImage>& images, std::uint64_t seed) {
  const auto counts = class_counts(images);
  const std::size_t target = *std::max_element(counts.begin(), counts.end());
  std::vector<LabeledImage> out = images;
  for (LeafClass c : kAllClasses) {
    const auto n = counts[static_cast<int>(c)];
    if (n == 0 || n == target) continue;
    std::vector<LabeledImage> members;
    for (const auto& im : images)
      if (im.label == c) members.push_back(im);
    auto grown = augment(members, target, seed + static_cast<std::uint64_t>(c));
    out.insert(out.end(), std::make_move_iterator(grown.begin() + static_cast<std::ptrdiff_t>(n)),
               std::make_move_iterator(grown.end()));
  }
  return out;
}

/// Source id of the original an augmented image was derived from.
inline std::string parent_id(const std::string& source_id) {
  const auto pos = source_id.find("#aug");
  return pos == std::string::npos ? source_id : source_id.substr(0, pos);
}

}  // namespace aerogh::vision
