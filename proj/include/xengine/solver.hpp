// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xengine/model.hpp"

namespace xengine {

enum class SolveStatus { Optimal, Infeasible, LimitReached };

const char* status_name(SolveStatus s);

struct SearchLimits {
  std::optional<std::int64_t> node_limit;     // transitions examined
  std::optional<std::int64_t> time_limit_ms;  // wall clock
};

struct Solution {
  SolveStatus status = SolveStatus::Optimal;
  std::string backend;        // "exact" | "oracle" | "external"
  double objective_ms = 0.0;  // NaN when no complete solution was found
  Assignment assignment;
  std::int64_t nodes_explored = 0;
};

// Diagonal-R schedule for a fixed device placement: operator i runs on
// devices[i] at timestep i and its tensor stays saved on that device for
// every later timestep. Budgets are not consulted.
Assignment save_all_assignment(const Problem& p, const std::vector<int>& devices);

// Scores every one of the D^T fixed placements on the save-all schedule and
// returns the best (ties: lexicographically smallest device vector). This is
// the optimum over the no-recompute family, hence an upper bound on the true
// optimum; budgets are deliberately ignored, so the returned assignment may
// overrun tight budgets even though its objective is a valid bound.
Solution assignment_oracle(const Problem& p);

// Memoized depth-first search over (timestep, per-device saved set) states:
// per timestep it places the new operator on one device, optionally
// recomputes earlier operators that feed a computation of this timestep, and
// carries forward any saved subset with a future consumer, pruning on the
// per-device memory trajectory and a compute-cost lower bound. Proves
// optimality or infeasibility when it runs to completion. Empty budgets
// means "use the problem's device budgets".
Solution solve_exact(const Problem& p, const ModelOptions& opts = {},
                     std::vector<std::int64_t> budgets = {}, const SearchLimits& limits = {});

// Writes the model as MPS under scratch_dir, runs command_template with
// {mps} and {sol} substituted, parses and validates the solution file, and
// recomputes the objective (cross-checked against any reported value).
Solution solve_external(const Problem& p, const ModelOptions& opts,
                        std::vector<std::int64_t> budgets, const std::string& command_template,
                        const std::string& scratch_dir);

}  // namespace xengine
