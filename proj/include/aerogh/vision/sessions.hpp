#pragma once

#include <vector>

#include "aerogh/common.hpp"

namespace aerogh::vision {

struct CapturePlan {
  std::vector<int> session_days;
  int images_per_session = 0;
  long total_images = 0;
};

/// Imaging sessions on start, start + interval, ... up to and including end,
/// photographing every surviving plant once per session.
inline CapturePlan plan_capture_sessions(int start_day, int end_day, int interval_days, int n_plants) {
  if (start_day > end_day) throw ValidationError("start_day must not be after end_day");
  if (interval_days < 1) throw ValidationError("interval_days must be >= 1");
  if (n_plants < 0) throw ValidationError("n_plants must be >= 0");
  CapturePlan plan;
  for (int d = start_day; d <= end_day; d += interval_days) plan.session_days.push_back(d);
  plan.images_per_session = n_plants;
  plan.total_images = static_cast<long>(plan.session_days.size()) * n_plants;
  return plan;
}

}  // namespace aerogh::vision
