#pragma once

#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aerogh/telemetry/frame.hpp"
#include "aerogh/vision/network.hpp"

namespace aerogh::vision {

struct PlantImage {
  int plant = 0;
  LabeledImage image;
};

struct DiseaseFinding {
  int plant = 0;
  LeafClass label = LeafClass::healthy;
  double probability = 0.0;
  bool alert = false;
};

struct ReporterConfig {
  double alert_threshold = 0.8;
  /// Frames that could not be published are appended here as wire records.
  std::optional<std::filesystem::path> fallback_log;
};

/// "rust:0.9500"
inline std::string disease_value(LeafClass label, double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, ":%.4f", p);
  return std::string(sim::to_string(label)) + buf;
}

/// Turns per-plant predictions into gh/plant<k>/disease frames and disease
/// alerts. Publishing goes through a caller-supplied function that throws when
/// telemetry is unavailable; such frames are kept for retry() and written to
/// the fallback log.
class DiseaseReporter {
 public:
  using Publish = std::function<void(const telemetry::TelemetryFrame&)>;
  using RaiseAlert = std::function<void(const DiseaseFinding&)>;

  DiseaseReporter(ReporterConfig cfg, Publish publish, RaiseAlert raise)
      : cfg_(std::move(cfg)), publish_(std::move(publish)), raise_(std::move(raise)) {
    if (!(cfg_.alert_threshold >= 0.0 && cfg_.alert_threshold <= 1.0))
      throw ValidationError("alert_threshold must be in [0, 1]");
  }

  /// Reports already-made predictions; used directly by tests and by the
  /// model-driven overload below.
  std::vector<DiseaseFinding> report(const std::vector<std::pair<int, Prediction>>& predictions, SimTime t,
                                     const std::string& wall) {
    retry();
    std::vector<DiseaseFinding> out;
    for (const auto& [plant, pr] : predictions) {
      DiseaseFinding f{plant, pr.label, pr.probabilities[static_cast<int>(pr.label)], false};
      f.alert = f.label != LeafClass::healthy && f.probability >= cfg_.alert_threshold;
      send({"gh/plant" + std::to_string(plant) + "/disease", t, wall, disease_value(f.label, f.probability), ""});
      if (f.alert && raise_) raise_(f);
      out.push_back(f);
    }
    return out;
  }

  template <typename Scalar>
  std::vector<DiseaseFinding> classify_and_publish(ConvNet<Scalar>& model, const std::vector<PlantImage>& session,
                                                   SimTime t, const std::string& wall) {
    std::vector<std::pair<int, Prediction>> preds;
    preds.reserve(session.size());
    for (const auto& pi : session) preds.emplace_back(pi.plant, model.predict(pi.image));
    return report(preds, t, wall);
  }

  /// Re-sends queued frames in order, stopping at the first failure.
  /// Returns the number delivered.
  std::size_t retry() {
    std::size_t sent = 0;
    while (!pending_.empty()) {
      try {
        publish_(pending_.front());
      } catch (const std::exception&) {
        break;
      }
      pending_.pop_front();
      ++sent;
    }
    return sent;
  }

  std::size_t pending() const { return pending_.size(); }

 private:
  void send(telemetry::TelemetryFrame f) {
    if (pending_.empty()) {
      try {
        publish_(f);
        return;
      } catch (const std::exception&) {
      }
    }
    if (cfg_.fallback_log) {
      std::ofstream out(*cfg_.fallback_log, std::ios::app);
      out << telemetry::to_record(f).dump() << '\n';
    }
    pending_.push_back(std::move(f));
  }

  ReporterConfig cfg_;
  Publish publish_;
  RaiseAlert raise_;
  std::deque<telemetry::TelemetryFrame> pending_;
};

}  // namespace aerogh::vision
