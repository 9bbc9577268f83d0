// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xengine/problem.hpp"

namespace xengine {

// Variable families of the scheduling program. Index meaning per family:
//   R, S, Z, U : (device, timestep, operator)
//   F          : (device, timestep, free-edge ordinal)   [edges then self-edges]
//   P          : (timestep, edge ordinal, source device, computing device)
enum class VarFamily : std::uint8_t { R, S, Z, F, U, P };

struct VarRef {
  VarFamily family = VarFamily::R;
  std::int16_t a = 0, b = 0, c = 0, d = 0;
  auto operator<=>(const VarRef&) const = default;
};

inline VarRef var_r(int d, int t, int i) { return {VarFamily::R, (std::int16_t)d, (std::int16_t)t, (std::int16_t)i, 0}; }
inline VarRef var_s(int d, int t, int i) { return {VarFamily::S, (std::int16_t)d, (std::int16_t)t, (std::int16_t)i, 0}; }
inline VarRef var_z(int d, int t, int i) { return {VarFamily::Z, (std::int16_t)d, (std::int16_t)t, (std::int16_t)i, 0}; }
inline VarRef var_u(int d, int t, int i) { return {VarFamily::U, (std::int16_t)d, (std::int16_t)t, (std::int16_t)i, 0}; }
inline VarRef var_f(int d, int t, int eo) { return {VarFamily::F, (std::int16_t)d, (std::int16_t)t, (std::int16_t)eo, 0}; }
inline VarRef var_p(int t, int eo, int d_src, int d_cmp) { return {VarFamily::P, (std::int16_t)t, (std::int16_t)eo, (std::int16_t)d_src, (std::int16_t)d_cmp}; }

enum class Relation { LE, GE, EQ };

enum class ConstraintTag {
  EQ7, EQ8, EQ9, EQ10, EQ11, EQ12, EQ13, EQ14, EQ16_LO, EQ16_HI,
  Z_LINK, P_LINK, ENERGY_DEV, ENERGY_TOTAL,
};

const char* tag_name(ConstraintTag t);

struct LinearConstraint {
  ConstraintTag tag;
  int ordinal = 0;  // per-tag counter, part of the MPS row name
  std::vector<std::pair<VarRef, double>> terms;
  Relation rel = Relation::LE;
  double rhs = 0.0;
};

struct EnergyModel {
  double alpha = 0.0;
  std::vector<std::vector<double>> q_joules;  // [device][operator]
  std::map<int, double> device_limit;         // per-evaluation cap, by device
  std::optional<double> total_limit;          // per-timestep cap across devices
  double board_joules = 0.0;                  // constant draw counted by total_limit
};

struct ModelOptions {
  bool strict_free = false;        // hazard counts later consumers on all devices
  bool quadratic_objective = false;  // serialize copy costs as QUADOBJ, drop P
  std::optional<EnergyModel> energy;
};

// One R*Z copy-cost product of the quadratic objective (what P linearizes).
struct QuadTerm {
  int t = 0, e = 0, d_src = 0, d_cmp = 0;
  double w = 0.0;
};

struct Assignment {
  std::map<VarRef, double> values;
  std::optional<double> objective_reported;

  double at(VarRef v) const {
    auto it = values.find(v);
    return it == values.end() ? 0.0 : it->second;
  }
  void set(VarRef v, double x) { values[v] = x; }
};

struct MilpModel {
  Problem problem;
  ModelOptions options;
  int D = 0, T = 0, E = 0;
  int f_edges = 0;  // E real edges then T self-edges

  std::map<VarRef, double> objective;      // linear part
  std::vector<QuadTerm> quad;              // copy-cost products (always recorded)
  std::vector<LinearConstraint> constraints;
  std::vector<VarRef> fixed_zero;          // Eq. 7 / Eq. 10 upper triangles
  std::vector<std::int64_t> budgets;       // U upper bounds, bytes, per device

  int edge_ordinal(int u, int v) const;    // real edge; -1 when absent
  int self_ordinal(int v) const { return E + v; }
  // Free-edge ordinal -> (source op u, consumer op v); self-edges give u == v.
  std::pair<int, int> f_edge(int eo) const;
  bool in_space(const VarRef& v) const;
  bool is_binary(VarFamily f) const {
    return f == VarFamily::R || f == VarFamily::S || f == VarFamily::Z || f == VarFamily::F;
  }
};

// Builds the full program: Eq. 5 Z-linkage, Eqs. 7-14 scheduling and memory
// rows, Eq. 16 freeing hazards, the P linearization of the copy objective,
// and the energy extension when opts.energy is set.
MilpModel build_model(const Problem& p, const ModelOptions& opts = {});

// Appends energy terms and caps (objective alpha * q, per-evaluation device
// caps, per-timestep board cap) to a copy of m.
MilpModel add_energy_extension(const MilpModel& m, const EnergyModel& e);

// Reads the optional "energy" object of a problem document: alpha, q_joules
// keyed by device id (one entry per operator), device_limit, total_limit,
// board_joules. Returns nothing when the document has no such section.
std::optional<EnergyModel> parse_energy(const std::string& document_text, const Problem& p);

// Evaluates the original quadratic objective (compute costs + copy products
// on R*Z, + alpha-weighted energy when configured) directly from a.
double objective_value(const Assignment& a, const Problem& p, const ModelOptions& opts = {});

// Residuals of every row / bound / fixed variable, scaled-tolerance checked.
// Empty result means feasible.
std::vector<std::string> check_assignment(const MilpModel& m, const Assignment& a,
                                          double tol = 1e-6);

// Dense (device, timestep, operator) bit cube used by the search and tests.
struct BitCube {
  int D = 0, T = 0;
  std::vector<std::uint8_t> bits;

  BitCube() = default;
  BitCube(int d, int t) : D(d), T(t), bits(static_cast<size_t>(d) * t * t, 0) {}
  std::uint8_t& at(int d, int t, int i) {
    return bits[(static_cast<size_t>(d) * T + t) * T + i];
  }
  std::uint8_t at(int d, int t, int i) const {
    return bits[(static_cast<size_t>(d) * T + t) * T + i];
  }
};

// Completes (R, S) into a full assignment: Z = max(R, S), F pinned by the
// Eq. 16 hazard (free exactly when no hazard remains), U by the Eq. 13/14
// recurrence, P = R*Z. Performs no budget checking.
Assignment complete_assignment(const Problem& p, const ModelOptions& opts, const BitCube& R,
                               const BitCube& S);

}  // namespace xengine
