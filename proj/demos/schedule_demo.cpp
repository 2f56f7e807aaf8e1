// Prints the two-phase cyclic fine-tuning schedule as text and writes an SVG
// of the full trace: triangular cycles that peak high during the forgetting
// phase, then low during the stabilization phase.

#include <cstdio>
#include <string>

#include "backlab/csv.hpp"
#include "backlab/schedule.hpp"
#include "backlab/svg.hpp"

int main() {
  using namespace backlab;

  const ScheduleSpec s = ScheduleSpec::superft(3e-4, 0.1, 1e-3, 24, 4);
  const int64_t steps_per_epoch = 24;
  const int epochs = 6;

  std::printf("cyclic schedule: base=%g max1=%g max2=%g cycle=%lld steps, phase 1 = %d epochs\n",
              s.lr_base, s.lr_max1, s.lr_max2, static_cast<long long>(s.cycle_len_steps),
              s.phase1_epochs);
  std::printf("%-6s %-6s %s\n", "epoch", "step", "lr");
  for (int e = 0; e < epochs; ++e) {
    for (int64_t k = 0; k < steps_per_epoch; k += 6) {
      const int64_t step = e * steps_per_epoch + k;
      std::printf("%-6d %-6lld %.6f\n", e, static_cast<long long>(step),
                  lr_at(s, step, steps_per_epoch));
    }
  }

  PlotSeries trace;
  trace.label = "learning rate";
  for (const auto& [step, lr] : schedule_trace(s, steps_per_epoch * epochs, steps_per_epoch)) {
    trace.points.push_back({static_cast<double>(step), lr});
  }
  PlotOptions opt;
  opt.title = "two-phase cyclic fine-tuning schedule";
  opt.x_label = "step";
  opt.y_label = "learning rate";
  const std::string path = "schedule_demo.svg";
  write_text_file(path, svg_line_plot({trace}, opt));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}
