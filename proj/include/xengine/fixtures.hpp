// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "xengine/model.hpp"
#include "xengine/problem.hpp"

namespace xengine {

// Canonical fixtures shipped with the repository. The JSON documents under
// fixtures/ describe the same problems; tests cross-check the two paths.

// Single-device three-operator chain: costs 2/3/4 ms, tensors 4 MiB each,
// budget 12 MiB (exactly save-all).
Problem make_chain3();

// Two-device three-layer training graph (7 operators, 9 edges): the input is
// pinned to the cpu via a prohibitive gpu cost, every edge copies for 1.0 ms
// in both directions, budgets 64 MiB per device.
Problem make_fig2();

// Single-device ten-operator chain with one skip connection (1 -> 8), sized
// so shrinking budgets force recomputation before infeasibility.
Problem make_chain_lowmem();

// Energy table for make_fig2(): uniform 1 J per evaluation except operator B
// at 10 J on the gpu; alpha 0. Pairing it with a gpu device limit below 10 J
// forces B onto the cpu without touching the time objective.
EnergyModel make_fig2_energy();

}  // namespace xengine
