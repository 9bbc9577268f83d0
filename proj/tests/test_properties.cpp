// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "xengine/model.hpp"
#include "xengine/mps_io.hpp"
#include "xengine/schedule.hpp"
#include "xengine/solver.hpp"

using namespace xengine;

namespace {
constexpr std::int64_t kMiB = 1024 * 1024;

// Random two-device DAG: a connected chain plus extra forward edges, dyadic
// costs (multiples of 0.25 ms) so objective comparisons are exact, copies
// cheaper than any compute, and save-all budgets so every instance is
// feasible.
Problem random_problem(unsigned seed) {
  std::mt19937 rng(seed);
  auto pick = [&](int lo, int hi) { return lo + int(rng() % unsigned(hi - lo + 1)); };

  Problem p;
  p.name = "rand" + std::to_string(seed);
  const int T = pick(3, 6);
  for (int i = 0; i < T; ++i) {
    OperatorNode op;
    op.name = "op" + std::to_string(i);
    op.output_bytes = std::int64_t(pick(1, 4)) * kMiB;
    op.costs_ms = {0.25 * pick(1, 8), 0.25 * pick(1, 8)};
    p.operators.push_back(op);
    if (i > 0) p.edges.push_back({i - 1, i, {}});
  }
  for (int v = 2; v < T; ++v)
    for (int u = 0; u + 1 < v; ++u)
      if (pick(0, 9) < 3) p.edges.push_back({u, v, {}});
  // Keep edges in a stable (src, dst) order after the inserts above.
  std::sort(p.edges.begin(), p.edges.end(), [](const TensorEdge& a, const TensorEdge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });

  p.copy_model.links.push_back({-1, -1, 0.125, double(std::int64_t(1) << 30)});
  std::int64_t full = save_all_budget(p);
  p.devices = {{"d0", full, {}}, {"d1", full, {}}};
  return p;
}

Problem with_duplicate_device(const Problem& p) {
  Problem q = p;
  q.devices.push_back({"d2", p.devices[1].budget_bytes, p.devices[1].ram_bytes});
  for (OperatorNode& op : q.operators) op.costs_ms.push_back(op.costs_ms[1]);
  return q;
}
}  // namespace

TEST_CASE("randomized solver properties hold on twenty seeds") {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    Problem p = random_problem(seed);
    MilpModel m = build_model(p);

    Solution exact = solve_exact(p);
    REQUIRE(exact.status == SolveStatus::Optimal);

    // Feasibility: every linear row, bound, and fixed variable.
    CHECK(check_assignment(m, exact.assignment, 1e-6).empty());

    // Oracle dominance: restricted placements can never beat the full search.
    Solution oracle = assignment_oracle(p);
    REQUIRE(oracle.status == SolveStatus::Optimal);
    CHECK(exact.objective_ms <= oracle.objective_ms + 1e-9);

    // A cloned device can only help.
    Solution wider = solve_exact(with_duplicate_device(p));
    REQUIRE(wider.status == SolveStatus::Optimal);
    CHECK(wider.objective_ms <= exact.objective_ms + 1e-9);

    // Determinism: a rerun reproduces the assignment exactly.
    Solution again = solve_exact(p);
    CHECK(again.objective_ms == exact.objective_ms);
    CHECK(again.assignment.values == exact.assignment.values);

    // The decoded schedule replays to the same objective within budgets.
    Schedule s = decode(exact.assignment, p);
    REQUIRE(validate(s, p).ok());
    Trace tr = replay(s, p, {}, exact.assignment);
    CHECK(std::abs(tr.eq1_objective_ms - exact.objective_ms) <= 1e-9);
    for (int d = 0; d < p.device_count(); ++d)
      CHECK(tr.peaks[size_t(d)] <= p.devices[size_t(d)].budget_bytes);

    // Replayed per-slot memory equals the model's U column.
    for (int d = 0; d < p.device_count(); ++d)
      for (const MemorySample& sample : tr.per_device_memory[size_t(d)]) {
        double u = exact.assignment.at(var_u(d, sample.timestep, sample.slot));
        CHECK(std::abs(double(sample.bytes) - u) <= 1e-6);
      }

    // The linearized copy cost equals the direct quadratic form.
    double w_linear = 0.0, w_quad = 0.0;
    for (const QuadTerm& q : m.quad) {
      const TensorEdge& edge = p.edges[size_t(q.e)];
      w_linear += q.w * exact.assignment.at(var_p(q.t, q.e, q.d_src, q.d_cmp));
      w_quad += q.w * exact.assignment.at(var_r(q.d_cmp, q.t, edge.dst)) *
                exact.assignment.at(var_z(q.d_src, q.t, edge.src));
    }
    CHECK(std::abs(w_linear - w_quad) <= 1e-9);

    // Strict freeing decodes without copy-source hazards.
    ModelOptions strict;
    strict.strict_free = true;
    Solution careful = solve_exact(p, strict);
    REQUIRE(careful.status == SolveStatus::Optimal);
    Schedule ss = decode(careful.assignment, p);
    CHECK(validate(ss, p).ok());
    CHECK(exact.objective_ms <= careful.objective_ms + 1e-9);  // strict only removes options
  }
}

TEST_CASE("random instances round trip through the MPS writer") {
  for (unsigned seed : {3u, 7u, 11u}) {
    CAPTURE(seed);
    Problem p = random_problem(seed);
    MilpModel m = build_model(p);
    std::string a = write_mps(m);
    std::string b = write_mps(build_model(p));
    CHECK(a == b);
  }
}
