#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "aerogh/vision/image.hpp"

namespace aerogh::vision {

namespace detail {

struct Rgbf {
  double r, g, b;
};

inline Rgbf mix(Rgbf a, Rgbf b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

/// Egg-shaped leaf in its own frame: u along the midrib, v across.
/// Returns the normalised radius (<= 1 inside the blade).
struct LeafShape {
  double cx, cy, half_length, half_width, angle;

  double radius(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (c * dx + s * dy) / half_length;
    const double v = (-s * dx + c * dy) / half_width;
    // narrows toward the tip (u -> 1)
    const double taper = 1.0 - 0.35 * std::clamp(u, -1.0, 1.0);
    return std::sqrt(u * u + (v / taper) * (v / taper));
  }

  double midrib_distance(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    return std::abs(-std::sin(angle) * dx + std::cos(angle) * dy);
  }
};

}  // namespace detail

struct Pustule {
  double x, y, r;
};

/// Procedural leaf image for one class. Same (class, seed, size) gives the
/// same pixels.
///
/// healthy: green blade on a neutral background.
/// drought: blade shifted toward yellow-brown, browning further toward the edge.
/// rust:    green blade carrying 5-15 separated orange pustules of radius 2-4 px.
inline LabeledImage generate_synthetic_leaf(LeafClass cls, std::uint64_t seed, int size = 64) {
  using detail::Rgbf;
  std::mt19937_64 rng(mix_seed(seed, std::string(sim::to_string(cls))));
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double scale = size / 64.0;
  const double grey = uni(170, 215);
  // a faint tint only: green must dominate red over the whole healthy image
  const Rgbf background{grey + uni(-4, 4), grey + uni(-4, 4), grey + uni(-4, 4)};
  detail::LeafShape leaf{size / 2.0 + uni(-4, 4) * scale, size / 2.0 + uni(-4, 4) * scale,
                         uni(20, 26) * scale, uni(12, 16) * scale, uni(0, std::numbers::pi)};
  const Rgbf green{uni(30, 75), uni(115, 165), uni(30, 65)};
  const Rgbf yellow_brown{uni(170, 200), uni(135, 160), uni(45, 70)};
  const Rgbf dry_edge{uni(120, 150), uni(80, 100), uni(35, 50)};
  const double drought_shift = uni(0.45, 0.75);
  const Rgbf orange{uni(215, 240), uni(105, 135), uni(15, 40)};

  std::vector<Pustule> pustules;
  if (cls == LeafClass::rust) {
    const int want = std::uniform_int_distribution<int>(5, 15)(rng);
    const double unit = std::max(scale, 0.5);
    for (int attempt = 0; attempt < 8000 && static_cast<int>(pustules.size()) < want; ++attempt) {
      // crowded leaves fall back to the smallest pustules
      const double r_max = attempt < 2000 ? 4.0 : 2.0;
      Pustule p{uni(0, size), uni(0, size), uni(2.0, std::max(2.0, r_max)) * unit};
      if (leaf.radius(p.x, p.y) > 0.85) continue;
      bool clear = std::all_of(pustules.begin(), pustules.end(), [&](const Pustule& q) {
        return std::hypot(p.x - q.x, p.y - q.y) > p.r + q.r + 2.0;
      });
      if (clear) pustules.push_back(p);
    }
  }

  LabeledImage im(size, size, cls, std::string(sim::to_string(cls)) + "-" + std::to_string(seed));
  std::normal_distribution<double> grain(0.0, 4.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double rad = leaf.radius(px, py);
      Rgbf c = background;
      if (rad <= 1.0) {
        c = green;
        if (leaf.midrib_distance(px, py) < 0.8 * scale) c = detail::mix(c, Rgbf{200, 220, 150}, 0.35);
        if (cls == LeafClass::drought) {
          c = detail::mix(c, yellow_brown, drought_shift);
          if (rad > 0.55) c = detail::mix(c, dry_edge, std::min(1.0, (rad - 0.55) / 0.45));
        }
        for (const auto& p : pustules)
          if (std::hypot(px - p.x, py - p.y) <= p.r) c = orange;
      }
      im.at(x, y, 0) = detail::to_byte(c.r + grain(rng));
      im.at(x, y, 1) = detail::to_byte(c.g + grain(rng));
      im.at(x, y, 2) = detail::to_byte(c.b + grain(rng));
    }
  }
  return im;
}

/// `per_class` images of every class; seeds derive from `seed`.
inline std::vector<LabeledImage> synthesize_dataset(int per_class, std::uint64_t seed, int size = 64) {
  std::vector<LabeledImage> out;
  out.reserve(static_cast<std::size_t>(3 * per_class));
  for (LeafClass c : kAllClasses)
    for (int i = 0; i < per_class; ++i)
      out.push_back(generate_synthetic_leaf(c, mix_seed(seed + static_cast<std::uint64_t>(i)), size));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].source_id = std::string(sim::to_string(out[i].label)) + "-" + std::to_string(i);
  return out;
}

}  // namespace aerogh::vision
