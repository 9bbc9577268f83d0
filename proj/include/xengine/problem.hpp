// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xengine/errors.hpp"

namespace xengine {

// Cost sentinel for devices that cannot run an operator. Kept finite so the
// LP data stays well conditioned while still dominating every real schedule.
inline constexpr double kProhibitiveMs = 1.0e9;

struct DeviceSpec {
  std::string id;
  std::int64_t budget_bytes = 0;            // schedulable memory
  std::optional<std::int64_t> ram_bytes;    // physical size, informational
};

struct OperatorNode {
  std::string name;
  std::int64_t output_bytes = 0;
  std::vector<double> costs_ms;             // indexed by device
  std::optional<int> pinned_device;         // graph inputs live here
};

// Directed tensor edge src -> dst, src < dst. override_copy_ms, when set for
// an ordered device pair, replaces the link-model transfer estimate.
struct TensorEdge {
  int src = 0;
  int dst = 0;
  std::map<std::pair<int, int>, double> override_copy_ms;
};

struct LinkSpec {
  int from = -1;                            // -1 acts as wildcard
  int to = -1;
  double latency_ms = 0.0;
  double bytes_per_ms = 0.0;
};

struct CopyLinkModel {
  std::vector<LinkSpec> links;
};

struct Problem {
  std::string name;
  std::vector<DeviceSpec> devices;
  std::vector<OperatorNode> operators;
  std::vector<TensorEdge> edges;
  CopyLinkModel copy_model;

  int device_count() const { return static_cast<int>(devices.size()); }
  int op_count() const { return static_cast<int>(operators.size()); }
  int find_device(const std::string& id) const;  // -1 when unknown
};

struct LayerSpec {
  std::string name;
  std::int64_t output_bytes = 0;
  std::vector<double> costs_ms;             // forward, indexed by device
  std::int64_t backward_output_bytes = 0;
  std::vector<double> backward_costs_ms;    // indexed by device
};

// Parses a problem document (operators/edges schema) or a training-layer
// document (input/layers schema); dispatches on the "layers" key.
Problem load_problem(const std::string& json_text);
Problem load_problem_file(const std::string& path);

// Builds the 2L+1 operator training graph: index 0 the pinned input, 1..L the
// forward chain, L+1..2L the backward chain in reverse layer order. Backward
// of layer k consumes the upstream gradient and layer k-1's forward output
// (the input for k = 1). Emits L forward edges, then per backward op the
// gradient edge followed by the forward-tensor edge.
Problem make_training_graph(const std::string& name, std::vector<DeviceSpec> devices,
                            CopyLinkModel copy_model, const std::vector<LayerSpec>& layers,
                            std::int64_t input_bytes, int input_home);

// Bytes needed to hold every operator output at once: sum of output_bytes.
std::int64_t save_all_budget(const Problem& p);

// floor(full * pct / 100); pct in (0, 100].
std::int64_t budget_percent(std::int64_t full, double pct);

// Transfer time for edge e's tensor moved from device d to device d_to.
// 0 when d == d_to; the edge override wins; otherwise the link model gives
// latency_ms + output_bytes / bytes_per_ms.
double copy_cost(const Problem& p, const TensorEdge& e, int d, int d_to);

// Copy of p with per-device budgets replaced (used by sweeps).
Problem with_budgets(const Problem& p, const std::vector<std::int64_t>& budgets);

// Structural check shared by the loaders and the generated-graph builder.
void validate_problem(const Problem& p);

}  // namespace xengine
