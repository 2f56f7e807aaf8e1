#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace backlab {

// One row per finished epoch. ca/asr are NaN when the corresponding eval hook
// was not supplied. seconds and steps are cumulative.
struct EpochRow {
  int epoch = 0;
  double loss = 0.0;
  double ca = std::numeric_limits<double>::quiet_NaN();
  double asr = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  int64_t steps = 0;
};

struct TrainLog {
  std::vector<EpochRow> rows;
  double max_lr_seen = 0.0;

  int epochs() const { return static_cast<int>(rows.size()); }
  double total_seconds() const { return rows.empty() ? 0.0 : rows.back().seconds; }
  int64_t total_steps() const { return rows.empty() ? 0 : rows.back().steps; }
};

}  // namespace backlab
