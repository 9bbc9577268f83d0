// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xengine/model.hpp"
#include "xengine/problem.hpp"

namespace xengine {

// The executable reading of an assignment: computes, lazy copies placed
// immediately before the compute they feed, frees immediately after their
// consumer, and synthesized end-of-timestep drops for tensors not retained
// into the next timestep.
enum class ActionKind { Compute, Copy, Free, Drop };

struct Action {
  ActionKind kind = ActionKind::Compute;
  int timestep = 0;
  int slot = 0;     // within-timestep ordinal, strictly increasing
  int device = -1;  // Compute/Free/Drop; unused for Copy
  int op = -1;      // Compute/Drop; unused otherwise
  int src = -1;     // Copy/Free: edge endpoints (src == dst for a self edge)
  int dst = -1;
  int from = -1;  // Copy only: source device
  int to = -1;    // Copy only: destination device
  bool operator==(const Action&) const = default;
};

struct Schedule {
  Problem problem;
  std::vector<Action> actions;
};

enum class ViolationKind {
  ComputeWithoutInputs,
  CopyFromNonResident,
  BudgetExceeded,
  FreeNonResident,
  UncomputedOperator,
};

const char* violation_name(ViolationKind k);

struct Violation {
  ViolationKind kind = ViolationKind::ComputeWithoutInputs;
  int device = -1;
  int timestep = -1;
  int slot = -1;
  std::int64_t bytes = 0;  // BudgetExceeded: occupied bytes at the check
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

struct MemorySample {
  int timestep = 0;
  int slot = 0;  // operator slot v, one sample per (t, v)
  std::int64_t bytes = 0;
  bool operator==(const MemorySample&) const = default;
};

struct Trace {
  double total_action_ms = 0.0;  // sum of executed compute + copy costs
  double eq1_objective_ms = 0.0;
  std::vector<std::vector<MemorySample>> per_device_memory;  // [device] -> T*T samples
  std::vector<std::int64_t> peaks;                           // per-device max bytes
};

// Turns a model-feasible assignment into the action list. Per timestep the
// operator slots run in increasing index; for each computing device the
// needed copies precede the compute (source: lowest device holding the
// tensor) and the fired frees follow it. Raises IllegalAssignment when a
// dependency is resident nowhere, or when the chosen copy source was already
// freed earlier in the same timestep (possible under the default free hazard
// only).
Schedule decode(const Assignment& a, const Problem& p);

// Simulates residency and memory through the action list and reports every
// operational violation; an empty report means the schedule is legal. Empty
// budgets use the problem's own.
ValidationReport validate(const Schedule& s, const Problem& p,
                          const std::vector<std::int64_t>& budgets = {});

// Executes a legal schedule, accumulating action costs and the per-slot
// memory series (one sample per operator slot, following the same recurrence
// the model's U variables satisfy). eq1_objective_ms is evaluated from the
// assignment when one is given, else from availability reconstructed out of
// the actions. Raises IllegalSchedule when validate() reports violations.
Trace replay(const Schedule& s, const Problem& p, const ModelOptions& opts = {},
             const std::optional<Assignment>& a = std::nullopt);

// One value per timestep: the maximum occupied bytes over that timestep's
// slots on the given device.
std::vector<std::pair<int, std::int64_t>> memory_timeline(const Trace& tr, int device);

// Sum of the per-device timelines, one value per timestep.
std::vector<std::pair<int, std::int64_t>> combined_memory_timeline(const Trace& tr);

// Cost of one action in milliseconds: compute cost, copy cost, or zero for
// Free/Drop.
double action_cost(const Problem& p, const Action& act);

// Line-oriented text form, one action per line:
//   t=<t> slot=<s> COMPUTE d=<id> op=<name>
//   t=<t> slot=<s> COPY edge=<u>-><v> from=<id> to=<id>
//   t=<t> slot=<s> FREE d=<id> edge=<u>-><v>
//   t=<t> slot=<s> DROP d=<id> op=<name>
// Operator names containing "->" are not representable.
std::string format_schedule(const Schedule& s);

// Inverse of format_schedule against the given problem. Raises
// MalformedDocument on unparsable lines or unknown operators/edges and
// UnknownDevice on unknown device ids.
Schedule parse_schedule(const std::string& text, const Problem& p);

// CSV export of the memory series: header `device,timestep,slot,bytes`, one
// row per sample, devices in index order.
std::string trace_csv(const Trace& tr, const Problem& p);

}  // namespace xengine
