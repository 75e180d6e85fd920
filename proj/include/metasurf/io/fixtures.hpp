#pragma once

// Bundled synthetic tables for offline qualitative checks.

#include <string>
#include <vector>

#include "metasurf/core.hpp"

namespace metasurf::io {

/// 25 studies on a high/unclear/low risk-of-bias scale: 3 precise near-zero
/// low-risk studies, 13 unclear and 9 high-risk studies drifting towards
/// negative (treatment-favoring) effects with wider standard errors.
inline StudyTable rob_fixture() {
  struct Row {
    double effect, se;
    const char* level;
  };
  static const Row rows[] = {
      {0.012, 0.030, "low"},      {-0.010, 0.024, "low"},     {0.004, 0.036, "low"},
      {-0.005, 0.06, "unclear"},  {-0.330, 0.09, "unclear"},  {0.170, 0.08, "unclear"},
      {-0.180, 0.07, "unclear"},  {-0.505, 0.11, "unclear"},  {0.070, 0.05, "unclear"},
      {-0.255, 0.10, "unclear"},  {-0.080, 0.06, "unclear"},  {0.245, 0.12, "unclear"},
      {-0.405, 0.08, "unclear"},  {-0.030, 0.07, "unclear"},  {-0.230, 0.09, "unclear"},
      {0.095, 0.10, "unclear"},   {-0.230, 0.12, "high"},     {-0.530, 0.15, "high"},
      {0.070, 0.10, "high"},      {-0.390, 0.18, "high"},     {0.370, 0.14, "high"},
      {-0.770, 0.20, "high"},     {-0.090, 0.11, "high"},     {-0.310, 0.16, "high"},
      {0.110, 0.13, "high"},
  };
  const auto scale = make_scale(OrdinalScale::risk_of_bias());
  std::vector<Study> studies;
  int i = 0;
  for (const auto& r : rows) {
    char id[16];
    std::snprintf(id, sizeof id, "study%02d", ++i);
    studies.push_back(Study{id, r.effect, r.se, DesignQuality::ordinal(scale, r.level), {}});
  }
  return validate_table(std::move(studies));
}

}  // namespace metasurf::io
