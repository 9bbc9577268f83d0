// SPDX-License-Identifier: Apache-2.0
#include "xengine/model.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace xengine {

const char* tag_name(ConstraintTag t) {
  switch (t) {
    case ConstraintTag::EQ7: return "EQ7";
    case ConstraintTag::EQ8: return "EQ8";
    case ConstraintTag::EQ9: return "EQ9";
    case ConstraintTag::EQ10: return "EQ10";
    case ConstraintTag::EQ11: return "EQ11";
    case ConstraintTag::EQ12: return "EQ12";
    case ConstraintTag::EQ13: return "EQ13";
    case ConstraintTag::EQ14: return "EQ14";
    case ConstraintTag::EQ16_LO: return "EQ16_LO";
    case ConstraintTag::EQ16_HI: return "EQ16_HI";
    case ConstraintTag::Z_LINK: return "Z_LINK";
    case ConstraintTag::P_LINK: return "P_LINK";
    case ConstraintTag::ENERGY_DEV: return "ENERGY_DEV";
    case ConstraintTag::ENERGY_TOTAL: return "ENERGY_TOTAL";
  }
  return "ROW";
}

int MilpModel::edge_ordinal(int u, int v) const {
  for (int e = 0; e < E; ++e)
    if (problem.edges[static_cast<size_t>(e)].src == u &&
        problem.edges[static_cast<size_t>(e)].dst == v)
      return e;
  return -1;
}

std::pair<int, int> MilpModel::f_edge(int eo) const {
  if (eo < E) {
    const auto& e = problem.edges[static_cast<size_t>(eo)];
    return {e.src, e.dst};
  }
  return {eo - E, eo - E};
}

bool MilpModel::in_space(const VarRef& v) const {
  auto in = [](int x, int n) { return x >= 0 && x < n; };
  switch (v.family) {
    case VarFamily::R:
    case VarFamily::S:
    case VarFamily::Z:
    case VarFamily::U:
      return in(v.a, D) && in(v.b, T) && in(v.c, T) && v.d == 0;
    case VarFamily::F:
      return in(v.a, D) && in(v.b, T) && in(v.c, f_edges) && v.d == 0;
    case VarFamily::P:
      return in(v.a, T) && in(v.b, E) && in(v.c, D) && in(v.d, D) && v.c != v.d;
  }
  return false;
}

namespace {

// Consumers of u strictly after slot v this timestep; the C term of Eq. 16.
std::vector<int> later_consumers(const Problem& p, int u, int v) {
  std::vector<int> out;
  for (const auto& e : p.edges)
    if (e.src == u && e.dst > v) out.push_back(e.dst);
  return out;
}

void add_row(MilpModel& m, ConstraintTag tag, std::vector<std::pair<VarRef, double>> terms,
             Relation rel, double rhs, std::map<ConstraintTag, int>& ordinals) {
  LinearConstraint c;
  c.tag = tag;
  c.ordinal = ordinals[tag]++;
  c.terms = std::move(terms);
  c.rel = rel;
  c.rhs = rhs;
  m.constraints.push_back(std::move(c));
}

}  // namespace

MilpModel build_model(const Problem& p, const ModelOptions& opts) {
  validate_problem(p);
  MilpModel m;
  m.problem = p;
  m.options = opts;
  m.options.energy.reset();  // applied at the end so the base rows stay stable
  m.D = p.device_count();
  m.T = p.op_count();
  m.E = static_cast<int>(p.edges.size());
  m.f_edges = m.E + m.T;
  for (const auto& d : p.devices) m.budgets.push_back(d.budget_bytes);

  const int D = m.D, T = m.T, E = m.E;
  auto mass = [&](int i) { return static_cast<double>(p.operators[static_cast<size_t>(i)].output_bytes); };

  std::vector<std::vector<int>> parents(static_cast<size_t>(T));
  for (const auto& e : p.edges) parents[static_cast<size_t>(e.dst)].push_back(e.src);

  // Objective: compute costs on R, copy costs on the P linearization. The
  // quadratic products are recorded alongside for QUADOBJ serialization and
  // consistency checks. Zero coefficients are omitted.
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < T; ++i) {
        double c = p.operators[static_cast<size_t>(i)].costs_ms[static_cast<size_t>(d)];
        if (c != 0.0) m.objective[var_r(d, t, i)] = c;
      }
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < E; ++e) {
      const auto& edge = p.edges[static_cast<size_t>(e)];
      for (int ds = 0; ds < D; ++ds)
        for (int dc = 0; dc < D; ++dc) {
          if (ds == dc) continue;
          double w = copy_cost(p, edge, ds, dc);
          if (w == 0.0) continue;
          m.objective[var_p(t, e, ds, dc)] = w;
          m.quad.push_back({t, e, ds, dc, w});
        }
    }

  // Eq. 7 / Eq. 10 upper triangles as fixed-to-zero variables.
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int i = t + 1; i < T; ++i) m.fixed_zero.push_back(var_r(d, t, i));
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int i = t; i < T; ++i) m.fixed_zero.push_back(var_s(d, t, i));

  std::map<ConstraintTag, int> ord;

  // Eqs. 8 + 9: the diagonal evaluation lands on exactly one device per
  // timestep, and all T evaluations happen.
  for (int t = 0; t < T; ++t) {
    std::vector<std::pair<VarRef, double>> lo, hi;
    for (int d = 0; d < D; ++d) {
      lo.push_back({var_r(d, t, t), 1.0});
      hi.push_back({var_r(d, t, t), 1.0});
    }
    add_row(m, ConstraintTag::EQ8, std::move(lo), Relation::GE, 1.0, ord);
    add_row(m, ConstraintTag::EQ8, std::move(hi), Relation::LE, 1.0, ord);
  }
  {
    std::vector<std::pair<VarRef, double>> terms;
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d) terms.push_back({var_r(d, t, t), 1.0});
    add_row(m, ConstraintTag::EQ9, std::move(terms), Relation::EQ, static_cast<double>(T), ord);
  }

  // Eq. 11: saving persists only on the device that held or computed it.
  for (int d = 0; d < D; ++d)
    for (int t = 0; t + 1 < T; ++t)
      for (int i = 0; i < T; ++i)
        add_row(m, ConstraintTag::EQ11,
                {{var_s(d, t + 1, i), 1.0}, {var_s(d, t, i), -1.0}, {var_r(d, t, i), -1.0}},
                Relation::LE, 0.0, ord);

  // Eq. 12: computing v needs each parent held or computed somewhere.
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int e = 0; e < E; ++e) {
        const auto& edge = p.edges[static_cast<size_t>(e)];
        std::vector<std::pair<VarRef, double>> terms{{var_r(d, t, edge.dst), 1.0}};
        for (int ds = 0; ds < D; ++ds) {
          terms.push_back({var_r(ds, t, edge.src), -1.0});
          terms.push_back({var_s(ds, t, edge.src), -1.0});
        }
        add_row(m, ConstraintTag::EQ12, std::move(terms), Relation::LE, 0.0, ord);
      }

  // Eq. 13: per-device memory at slot 0 = saved tensors + slot-0 output.
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t) {
      std::vector<std::pair<VarRef, double>> terms{{var_u(d, t, 0), 1.0}};
      for (int i = 0; i < T; ++i) terms.push_back({var_s(d, t, i), -mass(i)});
      terms.push_back({var_r(d, t, 0), -mass(0)});
      add_row(m, ConstraintTag::EQ13, std::move(terms), Relation::EQ, 0.0, ord);
    }

  // Eq. 14: slot recurrence; freeing releases the source tensor's bytes.
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int v = 0; v + 1 < T; ++v) {
        std::vector<std::pair<VarRef, double>> terms{{var_u(d, t, v + 1), 1.0},
                                                     {var_u(d, t, v), -1.0}};
        for (int u : parents[static_cast<size_t>(v)])
          terms.push_back({var_f(d, t, m.edge_ordinal(u, v)), mass(u)});
        terms.push_back({var_f(d, t, m.self_ordinal(v)), mass(v)});
        terms.push_back({var_r(d, t, v + 1), -mass(v + 1)});
        add_row(m, ConstraintTag::EQ14, std::move(terms), Relation::EQ, 0.0, ord);
      }

  // Eq. 16: F pinned by the hazard count H = (1 - R_v) + (1 - Z_u) + S' + C.
  // (1 - F) <= H forces a free when nothing blocks it; H <= h_max (1 - F)
  // forbids freeing past any hazard.
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int eo = 0; eo < m.f_edges; ++eo) {
        auto [u, v] = m.f_edge(eo);
        auto later = later_consumers(p, u, v);
        const double h_max = 2.0 + static_cast<double>(later.size()) *
                                       (opts.strict_free ? static_cast<double>(D) : 1.0);
        std::vector<std::pair<VarRef, double>> h;  // H - 2, variable part
        h.push_back({var_r(d, t, v), -1.0});
        h.push_back({var_z(d, t, u), -1.0});
        if (t + 1 < T) h.push_back({var_s(d, t + 1, u), 1.0});
        for (int w : later) {
          if (opts.strict_free) {
            for (int dd = 0; dd < D; ++dd) h.push_back({var_r(dd, t, w), 1.0});
          } else {
            h.push_back({var_r(d, t, w), 1.0});
          }
        }
        auto lo = h;
        lo.push_back({var_f(d, t, eo), 1.0});
        add_row(m, ConstraintTag::EQ16_LO, std::move(lo), Relation::GE, -1.0, ord);
        auto hi = h;
        hi.push_back({var_f(d, t, eo), h_max});
        add_row(m, ConstraintTag::EQ16_HI, std::move(hi), Relation::LE, h_max - 2.0, ord);
      }

  // Eq. 5: availability is computed-or-saved.
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < T; ++i) {
        add_row(m, ConstraintTag::Z_LINK,
                {{var_z(d, t, i), 1.0}, {var_r(d, t, i), -1.0}, {var_s(d, t, i), -1.0}},
                Relation::LE, 0.0, ord);
        add_row(m, ConstraintTag::Z_LINK, {{var_z(d, t, i), 1.0}, {var_r(d, t, i), -1.0}},
                Relation::GE, 0.0, ord);
        add_row(m, ConstraintTag::Z_LINK, {{var_z(d, t, i), 1.0}, {var_s(d, t, i), -1.0}},
                Relation::GE, 0.0, ord);
      }

  // P >= R + Z - 1; the lower side suffices under non-negative weights.
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < E; ++e) {
      const auto& edge = p.edges[static_cast<size_t>(e)];
      for (int ds = 0; ds < D; ++ds)
        for (int dc = 0; dc < D; ++dc) {
          if (ds == dc) continue;
          add_row(m, ConstraintTag::P_LINK,
                  {{var_p(t, e, ds, dc), 1.0},
                   {var_r(dc, t, edge.dst), -1.0},
                   {var_z(ds, t, edge.src), -1.0}},
                  Relation::GE, -1.0, ord);
        }
    }

  if (opts.energy) return add_energy_extension(m, *opts.energy);
  return m;
}

MilpModel add_energy_extension(const MilpModel& base, const EnergyModel& e) {
  const int D = base.D, T = base.T;
  if (static_cast<int>(e.q_joules.size()) != D)
    raise(Errc::IncompleteEnergyTable, "q_joules needs one row per device");
  for (const auto& row : e.q_joules)
    if (static_cast<int>(row.size()) != T)
      raise(Errc::IncompleteEnergyTable, "q_joules row needs one entry per operator");
  for (const auto& [d, lim] : e.device_limit) {
    if (d < 0 || d >= D) raise(Errc::DimensionMismatch, "device_limit index");
    if (lim < 0.0) raise(Errc::NegativeCost, "device_limit");
  }

  MilpModel m = base;
  m.options.energy = e;

  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < T; ++i) {
        double add = e.alpha * e.q_joules[static_cast<size_t>(d)][static_cast<size_t>(i)];
        if (add == 0.0) continue;
        auto ref = var_r(d, t, i);
        double next = m.objective.count(ref) ? m.objective[ref] + add : add;
        if (next == 0.0)
          m.objective.erase(ref);
        else
          m.objective[ref] = next;
      }

  std::map<ConstraintTag, int> ord;
  for (const auto& c : m.constraints) {
    auto it = ord.find(c.tag);
    if (it == ord.end() || it->second <= c.ordinal) ord[c.tag] = c.ordinal + 1;
  }

  for (const auto& [d, lim] : e.device_limit)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < T; ++i) {
        double q = e.q_joules[static_cast<size_t>(d)][static_cast<size_t>(i)];
        add_row(m, ConstraintTag::ENERGY_DEV, {{var_r(d, t, i), q}}, Relation::LE, lim, ord);
      }

  if (e.total_limit) {
    for (int t = 0; t < T; ++t) {
      std::vector<std::pair<VarRef, double>> terms;
      for (int d = 0; d < D; ++d)
        for (int i = 0; i < T; ++i) {
          double q = e.q_joules[static_cast<size_t>(d)][static_cast<size_t>(i)];
          if (q != 0.0) terms.push_back({var_r(d, t, i), q});
        }
      add_row(m, ConstraintTag::ENERGY_TOTAL, std::move(terms), Relation::LE,
              *e.total_limit - e.board_joules, ord);
    }
  }
  return m;
}

std::optional<EnergyModel> parse_energy(const std::string& document_text, const Problem& p) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document_text);
  } catch (const nlohmann::json::exception& ex) {
    raise(Errc::MalformedDocument, ex.what());
  }
  if (!j.contains("energy")) return std::nullopt;
  const auto& e = j["energy"];
  if (!e.is_object()) raise(Errc::MalformedDocument, "energy must be an object");

  EnergyModel em;
  em.alpha = e.value("alpha", 0.0);
  if (!(em.alpha >= 0.0)) raise(Errc::NegativeCost, "alpha");
  em.board_joules = e.value("board_joules", 0.0);
  if (!(em.board_joules >= 0.0)) raise(Errc::NegativeCost, "board_joules");
  if (e.contains("total_limit")) {
    em.total_limit = e["total_limit"].get<double>();
    if (!(*em.total_limit >= 0.0)) raise(Errc::NegativeCost, "total_limit");
  }

  if (!e.contains("q_joules") || !e["q_joules"].is_object())
    raise(Errc::IncompleteEnergyTable, "q_joules missing");
  const auto& q = e["q_joules"];
  for (auto it = q.begin(); it != q.end(); ++it)
    if (p.find_device(it.key()) < 0) raise(Errc::UnknownDevice, it.key());
  em.q_joules.resize(p.devices.size());
  for (const auto& dev : p.devices) {
    if (!q.contains(dev.id))
      raise(Errc::IncompleteEnergyTable, "q_joules missing device " + dev.id);
    const auto& row = q[dev.id];
    if (!row.is_array() || row.size() != p.operators.size())
      raise(Errc::IncompleteEnergyTable, "q_joules row for " + dev.id);
    int d = p.find_device(dev.id);
    for (const auto& v : row) {
      double x = v.get<double>();
      if (!(x >= 0.0)) raise(Errc::NegativeCost, "q_joules");
      em.q_joules[static_cast<size_t>(d)].push_back(x);
    }
  }

  if (e.contains("device_limit")) {
    const auto& dl = e["device_limit"];
    if (!dl.is_object()) raise(Errc::MalformedDocument, "device_limit must be an object");
    for (auto it = dl.begin(); it != dl.end(); ++it) {
      int d = p.find_device(it.key());
      if (d < 0) raise(Errc::UnknownDevice, it.key());
      double lim = it.value().get<double>();
      if (!(lim >= 0.0)) raise(Errc::NegativeCost, "device_limit");
      em.device_limit[d] = lim;
    }
  }
  return em;
}

double objective_value(const Assignment& a, const Problem& p, const ModelOptions& opts) {
  const int D = p.device_count(), T = p.op_count();
  const int E = static_cast<int>(p.edges.size());
  for (const auto& [ref, _] : a.values) {
    bool ok = false;
    auto in = [](int x, int n) { return x >= 0 && x < n; };
    switch (ref.family) {
      case VarFamily::R:
      case VarFamily::S:
      case VarFamily::Z:
      case VarFamily::U:
        ok = in(ref.a, D) && in(ref.b, T) && in(ref.c, T);
        break;
      case VarFamily::F:
        ok = in(ref.a, D) && in(ref.b, T) && in(ref.c, E + T);
        break;
      case VarFamily::P:
        ok = in(ref.a, T) && in(ref.b, E) && in(ref.c, D) && in(ref.d, D);
        break;
    }
    if (!ok) raise(Errc::DimensionMismatch, "assignment variable outside the problem's index space");
  }

  double total = 0.0;
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < T; ++i) {
        double r = a.at(var_r(d, t, i));
        if (r != 0.0) total += p.operators[static_cast<size_t>(i)].costs_ms[static_cast<size_t>(d)] * r;
      }
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < E; ++e) {
      const auto& edge = p.edges[static_cast<size_t>(e)];
      for (int dc = 0; dc < D; ++dc) {
        double r = a.at(var_r(dc, t, edge.dst));
        if (r == 0.0) continue;
        for (int ds = 0; ds < D; ++ds) {
          if (ds == dc) continue;
          double z = a.at(var_z(ds, t, edge.src));
          if (z != 0.0) total += copy_cost(p, edge, ds, dc) * r * z;
        }
      }
    }
  if (opts.energy) {
    const auto& en = *opts.energy;
    if (static_cast<int>(en.q_joules.size()) != D)
      raise(Errc::IncompleteEnergyTable, "q_joules needs one row per device");
    for (int d = 0; d < D; ++d) {
      if (static_cast<int>(en.q_joules[static_cast<size_t>(d)].size()) != T)
        raise(Errc::IncompleteEnergyTable, "q_joules row needs one entry per operator");
      for (int t = 0; t < T; ++t)
        for (int i = 0; i < T; ++i) {
          double r = a.at(var_r(d, t, i));
          if (r != 0.0)
            total += en.alpha * en.q_joules[static_cast<size_t>(d)][static_cast<size_t>(i)] * r;
        }
    }
  }
  return total;
}

std::vector<std::string> check_assignment(const MilpModel& m, const Assignment& a, double tol) {
  std::vector<std::string> out;
  for (const auto& [ref, val] : a.values) {
    if (!m.in_space(ref)) {
      out.push_back("variable outside model space");
      continue;
    }
    if (m.is_binary(ref.family)) {
      if (std::abs(val) > tol && std::abs(val - 1.0) > tol)
        out.push_back("binary variable not 0/1");
    }
    if (ref.family == VarFamily::U) {
      double b = static_cast<double>(m.budgets[static_cast<size_t>(ref.a)]);
      if (val < -tol * std::max(1.0, b) || val > b * (1.0 + tol) + tol)
        out.push_back("U out of budget bounds");
    }
    if (ref.family == VarFamily::P && (val < -tol || val > 1.0 + tol))
      out.push_back("P out of [0,1]");
  }
  for (const auto& ref : m.fixed_zero)
    if (std::abs(a.at(ref)) > tol) out.push_back("fixed-to-zero variable is nonzero");
  for (const auto& c : m.constraints) {
    double lhs = 0.0, scale = std::max(1.0, std::abs(c.rhs));
    for (const auto& [ref, coef] : c.terms) {
      double term = coef * a.at(ref);
      lhs += term;
      scale = std::max(scale, std::abs(term));
    }
    double viol = 0.0;
    switch (c.rel) {
      case Relation::LE: viol = lhs - c.rhs; break;
      case Relation::GE: viol = c.rhs - lhs; break;
      case Relation::EQ: viol = std::abs(lhs - c.rhs); break;
    }
    if (viol > tol * scale)
      out.push_back(std::string(tag_name(c.tag)) + "_" + std::to_string(c.ordinal) +
                    " violated by " + std::to_string(viol));
  }
  return out;
}

Assignment complete_assignment(const Problem& p, const ModelOptions& opts, const BitCube& R,
                               const BitCube& S) {
  const int D = p.device_count(), T = p.op_count();
  const int E = static_cast<int>(p.edges.size());
  if (R.D != D || R.T != T || S.D != D || S.T != T)
    raise(Errc::DimensionMismatch, "bit cube shape");

  std::vector<std::vector<int>> parents(static_cast<size_t>(T));
  for (const auto& e : p.edges) parents[static_cast<size_t>(e.dst)].push_back(e.src);
  auto mass = [&](int i) { return static_cast<double>(p.operators[static_cast<size_t>(i)].output_bytes); };
  auto edge_index = [&](int u, int v) {
    for (int e = 0; e < E; ++e)
      if (p.edges[static_cast<size_t>(e)].src == u && p.edges[static_cast<size_t>(e)].dst == v)
        return e;
    return -1;
  };

  Assignment a;
  auto z_at = [&](int d, int t, int i) { return std::max(R.at(d, t, i), S.at(d, t, i)); };

  // F = 1 exactly when every hazard term vanishes.
  auto f_at = [&](int d, int t, int u, int v) -> int {
    if (!R.at(d, t, v) || !z_at(d, t, u)) return 0;
    if (t + 1 < T && S.at(d, t + 1, u)) return 0;
    for (const auto& e : p.edges) {
      if (e.src != u || e.dst <= v) continue;
      if (opts.strict_free) {
        for (int dd = 0; dd < D; ++dd)
          if (R.at(dd, t, e.dst)) return 0;
      } else if (R.at(d, t, e.dst)) {
        return 0;
      }
    }
    return 1;
  };

  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < T; ++i) {
        a.set(var_r(d, t, i), R.at(d, t, i));
        a.set(var_s(d, t, i), S.at(d, t, i));
        a.set(var_z(d, t, i), z_at(d, t, i));
      }
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t) {
      for (int e = 0; e < E; ++e)
        a.set(var_f(d, t, e),
              f_at(d, t, p.edges[static_cast<size_t>(e)].src, p.edges[static_cast<size_t>(e)].dst));
      for (int v = 0; v < T; ++v) a.set(var_f(d, t, E + v), f_at(d, t, v, v));
    }
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t) {
      double u0 = 0.0;
      for (int i = 0; i < T; ++i)
        if (S.at(d, t, i)) u0 += mass(i);
      if (R.at(d, t, 0)) u0 += mass(0);
      a.set(var_u(d, t, 0), u0);
      double cur = u0;
      for (int v = 0; v + 1 < T; ++v) {
        double freed = 0.0;
        for (int u : parents[static_cast<size_t>(v)])
          if (a.at(var_f(d, t, edge_index(u, v)))) freed += mass(u);
        if (a.at(var_f(d, t, E + v))) freed += mass(v);
        cur = cur - freed + (R.at(d, t, v + 1) ? mass(v + 1) : 0.0);
        a.set(var_u(d, t, v + 1), cur);
      }
    }
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < E; ++e) {
      const auto& edge = p.edges[static_cast<size_t>(e)];
      for (int ds = 0; ds < D; ++ds)
        for (int dc = 0; dc < D; ++dc) {
          if (ds == dc) continue;
          a.set(var_p(t, e, ds, dc),
                R.at(dc, t, edge.dst) && z_at(ds, t, edge.src) ? 1.0 : 0.0);
        }
    }
  return a;
}

}  // namespace xengine
