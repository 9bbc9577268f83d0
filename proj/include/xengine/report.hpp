// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xengine/model.hpp"
#include "xengine/problem.hpp"

namespace xengine {

struct FigureSpec {
  int cell_px = 16;
  std::string compute_color = "#000000";    // on-diagonal computes
  std::string recompute_color = "#d62728";  // recomputations (t > i)
  std::string save_color = "#000000";       // S-grid cells
  std::string budget_color = "#888888";     // dashed budget lines
  std::string x_label = "operator i";
  std::string y_label = "timestep t";
};

// One timestep series: (timestep, occupied bytes).
using MemorySeries = std::vector<std::pair<int, std::int64_t>>;

// Renders the assignment's compute and save matrices as one T-by-T grid per
// (device, matrix) pair, all R grids first, then all S grids. Filled cells
// mark variables at 1; R cells below the diagonal use the recompute color.
// Output is byte-identical for identical inputs.
std::string render_schedule_svg(const Assignment& a, const Problem& p,
                                const FigureSpec& spec = {});

// Renders one polyline per labeled series plus dashed horizontal budget
// lines, axes in timesteps by MiB. Raises EmptySeries when no series or an
// empty series is given.
std::string render_memory_svg(const std::vector<std::pair<std::string, MemorySeries>>& traces,
                              const std::vector<std::pair<std::string, std::int64_t>>& budgets,
                              const FigureSpec& spec = {});

struct ImprovementRow {
  std::string label;
  double cpu_ms = 0;
  double gpu_ms = 0;
  double combined_ms = 0;
};

enum class TableFormat { Text, Csv };

// The percentage cell: 100*(combined - min(cpu, gpu))/min(cpu, gpu), rounded
// half away from zero to one decimal, rendered "(-5.8)" / "(+3.2)"; values
// rounding to zero render "(-0)". Raises NonPositiveTime on any time <= 0.
std::string format_improvement(double cpu_ms, double gpu_ms, double combined_ms);

// Aligned text (or CSV) table with one row per entry: label, the three times,
// and the improvement percentage.
std::string improvement_table(const std::vector<ImprovementRow>& rows,
                              TableFormat format = TableFormat::Text);

}  // namespace xengine
