#pragma once

#include <array>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aerogh/vision/network.hpp"

namespace aerogh::vision {

using Confusion = std::array<std::array<std::size_t, kNumLeafClasses>, kNumLeafClasses>;

/// confusion[true][predicted]. A class absent from the test set has recall 0.
struct EvalReport {
  Confusion confusion{};
  std::array<double, kNumLeafClasses> per_class_recall{};
  double total_accuracy = 0.0;
  std::vector<double> train_curve;
  std::vector<double> val_curve;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : confusion)
      for (auto v : row) n += v;
    return n;
  }
  std::size_t row_sum(int c) const {
    std::size_t n = 0;
    for (auto v : confusion[c]) n += v;
    return n;
  }

  static EvalReport from_confusion(const Confusion& m) {
    EvalReport r;
    r.confusion = m;
    std::size_t trace = 0;
    for (int c = 0; c < kNumLeafClasses; ++c) {
      trace += m[c][c];
      const auto row = r.row_sum(c);
      r.per_class_recall[c] = row ? static_cast<double>(m[c][c]) / static_cast<double>(row) : 0.0;
    }
    const auto n = r.total();
    r.total_accuracy = n ? static_cast<double>(trace) / static_cast<double>(n) : 0.0;
    return r;
  }
};

template <typename Scalar>
EvalReport evaluate(ConvNet<Scalar>& model, const std::vector<LabeledImage>& test) {
  if (test.empty()) throw ValidationError("test set is empty");
  Confusion m{};
  for (const auto& im : test)
    m[static_cast<int>(im.label)][static_cast<int>(model.predict(im).label)] += 1;
  return EvalReport::from_confusion(m);
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["classes"] = {"healthy", "drought", "rust"};
  j["confusion"] = r.confusion;
  nlohmann::ordered_json recall;
  for (LeafClass c : {LeafClass::healthy, LeafClass::drought, LeafClass::rust})
    recall[std::string(sim::to_string(c))] = r.per_class_recall[static_cast<int>(c)];
  j["per_class_recall"] = recall;
  j["total_accuracy"] = r.total_accuracy;
  j["n"] = r.total();
  j["train_curve"] = r.train_curve;
  j["val_curve"] = r.val_curve;
  return j;
}

/// Confusion counts with per-class recall and the overall accuracy.
inline std::string render_table(const EvalReport& r) {
  static constexpr const char* names[] = {"healthy", "drought", "rust"};
  std::ostringstream ss;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-10s %8s %8s %8s %8s\n", "true\\pred", names[0], names[1], names[2],
                "recall");
  ss << buf;
  for (int c = 0; c < kNumLeafClasses; ++c) {
    std::snprintf(buf, sizeof buf, "%-10s %8zu %8zu %8zu %7.2f%%\n", names[c], r.confusion[c][0],
                  r.confusion[c][1], r.confusion[c][2], 100.0 * r.per_class_recall[c]);
    ss << buf;
  }
  std::snprintf(buf, sizeof buf, "total accuracy %.2f%% (%zu images)\n", 100.0 * r.total_accuracy, r.total());
  ss << buf;
  return ss.str();
}

}  // namespace aerogh::vision
