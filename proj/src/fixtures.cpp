// SPDX-License-Identifier: Apache-2.0
#include "xengine/fixtures.hpp"

namespace xengine {

namespace {
constexpr std::int64_t kMiB = 1024 * 1024;
}

Problem make_chain3() {
  Problem p;
  p.name = "chain3";
  p.devices.push_back({"cpu", 12 * kMiB, {}});
  p.operators.push_back({"op0", 4 * kMiB, {2.0}, {}});
  p.operators.push_back({"op1", 4 * kMiB, {3.0}, {}});
  p.operators.push_back({"op2", 4 * kMiB, {4.0}, {}});
  p.edges.push_back({0, 1, {}});
  p.edges.push_back({1, 2, {}});
  validate_problem(p);
  return p;
}

Problem make_fig2() {
  std::vector<DeviceSpec> devices = {{"cpu", 64 * kMiB, {}}, {"gpu", 64 * kMiB, {}}};
  std::vector<LayerSpec> layers = {
      {"A", 8 * kMiB, {2.0, 3.0}, 4 * kMiB, {2.0, 3.0}},
      {"B", 8 * kMiB, {6.0, 1.0}, 8 * kMiB, {6.0, 1.0}},
      {"C", 8 * kMiB, {6.0, 1.0}, 8 * kMiB, {6.0, 1.0}},
  };
  Problem p = make_training_graph("fig2", devices, {}, layers, 4 * kMiB, 0);
  for (auto& e : p.edges) e.override_copy_ms = {{{0, 1}, 1.0}, {{1, 0}, 1.0}};
  validate_problem(p);
  return p;
}

Problem make_chain_lowmem() {
  Problem p;
  p.name = "chain-lowmem";
  const std::int64_t mib[] = {2, 2, 4, 4, 4, 4, 4, 4, 2, 4};  // sums to 34
  const double ms[] = {1.0, 2.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 2.0, 1.0};
  std::int64_t total = 0;
  for (std::int64_t m : mib) total += m * kMiB;
  p.devices.push_back({"cpu", total, {}});
  for (int i = 0; i < 10; ++i)
    p.operators.push_back({"op" + std::to_string(i), mib[i] * kMiB, {ms[i]}, {}});
  for (int i = 0; i + 1 < 10; ++i) p.edges.push_back({i, i + 1, {}});
  p.edges.push_back({1, 8, {}});
  validate_problem(p);
  return p;
}

EnergyModel make_fig2_energy() {
  EnergyModel e;
  e.alpha = 0.0;
  e.q_joules = {std::vector<double>(7, 1.0), std::vector<double>(7, 1.0)};
  e.q_joules[1][2] = 10.0;  // operator B on the gpu
  e.device_limit[1] = 5.0;
  return e;
}

}  // namespace xengine
