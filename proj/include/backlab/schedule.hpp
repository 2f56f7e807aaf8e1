#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "backlab/errors.hpp"

namespace backlab {

// Either a constant learning rate or the two-phase cyclic schedule: symmetric
// triangles from lr_base up to a phase peak and back, where phase 1 peaks at
// lr_max1 for phase1_epochs and phase 2 peaks at the much smaller lr_max2.
struct ScheduleSpec {
  enum class Kind { constant, superft };
  Kind kind = Kind::constant;

  double lr = 0.01;  // constant only

  double lr_base = 3e-4;
  double lr_max1 = 0.1;
  double lr_max2 = 0.001;
  int cycle_len_steps = 500;
  int phase1_epochs = 10;

  static ScheduleSpec constant_lr(double value) {
    ScheduleSpec s;
    s.kind = Kind::constant;
    s.lr = value;
    return s;
  }
  static ScheduleSpec superft(double base = 3e-4, double max1 = 0.1, double max2 = 0.001,
                              int cycle_len = 500, int phase1 = 10) {
    ScheduleSpec s;
    s.kind = Kind::superft;
    s.lr_base = base;
    s.lr_max1 = max1;
    s.lr_max2 = max2;
    s.cycle_len_steps = cycle_len;
    s.phase1_epochs = phase1;
    return s;
  }
};

inline void validate_schedule(const ScheduleSpec& s) {
  if (s.kind == ScheduleSpec::Kind::constant) {
    require(s.lr > 0.0, ErrKind::config, "constant learning rate must be positive");
    return;
  }
  require(s.lr_base > 0.0, ErrKind::config, "lr_base must be positive");
  require(s.lr_max1 > s.lr_max2, ErrKind::config, "lr_max1 must exceed lr_max2");
  require(s.lr_max2 > s.lr_base, ErrKind::config, "lr_max2 must exceed lr_base");
  require(s.cycle_len_steps >= 2, ErrKind::config, "cycle length must be at least 2 steps");
  require(s.phase1_epochs >= 1, ErrKind::config, "phase 1 must last at least one epoch");
}

// Learning rate at a global step. The cycle position is computed within the
// current phase (the cycle restarts when phase 2 begins), and the triangle is
// evaluated as an endpoint-exact interpolation so cycle starts return exactly
// lr_base and even-cycle midpoints exactly the phase peak.
inline double lr_at(const ScheduleSpec& s, int64_t global_step, int64_t steps_per_epoch) {
  require(global_step >= 0, ErrKind::config, "negative step");
  require(steps_per_epoch >= 1, ErrKind::config, "steps_per_epoch must be >= 1");
  if (s.kind == ScheduleSpec::Kind::constant) return s.lr;

  const int64_t phase1_steps = static_cast<int64_t>(s.phase1_epochs) * steps_per_epoch;
  double peak;
  int64_t pos_in_phase;
  if (global_step < phase1_steps) {
    peak = s.lr_max1;
    pos_in_phase = global_step;
  } else {
    peak = s.lr_max2;
    pos_in_phase = global_step - phase1_steps;
  }
  const int64_t pos = pos_in_phase % s.cycle_len_steps;
  const double half = s.cycle_len_steps / 2.0;
  const double t = pos <= half ? pos / half : (s.cycle_len_steps - pos) / half;
  return s.lr_base * (1.0 - t) + peak * t;
}

inline std::vector<std::pair<int64_t, double>> schedule_trace(const ScheduleSpec& s,
                                                              int64_t total_steps,
                                                              int64_t steps_per_epoch) {
  std::vector<std::pair<int64_t, double>> out;
  out.reserve(static_cast<size_t>(total_steps));
  for (int64_t step = 0; step < total_steps; ++step) {
    out.emplace_back(step, lr_at(s, step, steps_per_epoch));
  }
  return out;
}

}  // namespace backlab
