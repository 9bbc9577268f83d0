// SPDX-License-Identifier: Apache-2.0
#include "xengine/solver.hpp"

#include <sys/wait.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "xengine/mps_io.hpp"

namespace xengine {

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::LimitReached: return "limit";
  }
  return "unknown";
}

Assignment save_all_assignment(const Problem& p, const std::vector<int>& devices) {
  const int D = p.device_count(), T = p.op_count();
  if (static_cast<int>(devices.size()) != T)
    raise(Errc::DimensionMismatch, "one device per operator required");
  for (int d : devices)
    if (d < 0 || d >= D) raise(Errc::DimensionMismatch, "device index out of range");
  BitCube R(D, T), S(D, T);
  for (int i = 0; i < T; ++i) {
    R.at(devices[static_cast<size_t>(i)], i, i) = 1;
    for (int t = i + 1; t < T; ++t) S.at(devices[static_cast<size_t>(i)], t, i) = 1;
  }
  return complete_assignment(p, {}, R, S);
}

Solution assignment_oracle(const Problem& p) {
  validate_problem(p);
  const int D = p.device_count(), T = p.op_count();
  double combos = 1.0;
  for (int i = 0; i < T; ++i) combos *= D;
  if (combos > 4.0e6) raise(Errc::TooLarge, "placement family too large to enumerate");

  std::vector<int> dev(static_cast<size_t>(T), 0), best_dev;
  double best = std::numeric_limits<double>::infinity();
  std::int64_t n = 0;
  for (;;) {
    ++n;
    Assignment a = save_all_assignment(p, dev);
    double obj = objective_value(a, p, {});
    if (obj < best) {
      best = obj;
      best_dev = dev;
    }
    int k = T - 1;
    while (k >= 0 && dev[static_cast<size_t>(k)] == D - 1) dev[static_cast<size_t>(k--)] = 0;
    if (k < 0) break;
    ++dev[static_cast<size_t>(k)];
  }
  Solution s;
  s.status = SolveStatus::Optimal;
  s.backend = "oracle";
  s.objective_ms = best;
  s.assignment = save_all_assignment(p, best_dev);
  s.assignment.objective_reported = best;
  s.nodes_explored = n;
  return s;
}

namespace {

struct Tail {
  double cost = std::numeric_limits<double>::infinity();
  std::int64_t sum_r = 0;
  std::int64_t sum_s = 0;
  std::string bits;  // per timestep: R row then next-entry S row, device-major
  bool feasible() const { return std::isfinite(cost); }
};

bool tail_less(const Tail& a, const Tail& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  if (a.sum_r != b.sum_r) return a.sum_r < b.sum_r;
  if (a.sum_s != b.sum_s) return a.sum_s < b.sum_s;
  return a.bits < b.bits;
}

// Candidate whose cost can reach at best cost_lb with at least r_lb computes
// can never displace best under the (cost, sum_r, ...) order.
bool beaten(double cost_lb, std::int64_t r_lb, const Tail& best) {
  if (cost_lb > best.cost) return true;
  return cost_lb == best.cost && r_lb > best.sum_r;
}

struct Search {
  const Problem& p;
  ModelOptions opts;
  int D, T;
  std::vector<std::int64_t> mass, bud;
  std::vector<std::vector<double>> c;  // effective per-compute cost (incl. alpha*q)
  std::vector<std::vector<double>> qj;
  bool has_energy = false;
  std::vector<double> devcap;  // per-evaluation joule cap, +inf when absent
  double total_cap = std::numeric_limits<double>::infinity();  // per-timestep, minus board
  std::vector<std::uint64_t> pmask;                            // parents of each op, as op bits
  std::vector<std::uint64_t> consmask;                         // consumers of each op
  std::vector<std::vector<std::pair<int, int>>> pedges;        // (parent, edge ordinal) per op
  std::vector<std::vector<int>> cons;                          // consumers per op, ascending
  std::vector<int> maxreach;  // highest op index reachable downstream, -1 if none
  std::vector<std::vector<std::vector<double>>> w;  // [edge][src dev][cmp dev]
  std::vector<double> lb;                           // lb[t] = cheapest completion of ops t..T-1

  std::int64_t node_limit = -1;
  bool has_deadline = false;
  std::chrono::steady_clock::time_point deadline;
  std::int64_t nodes = 0;
  bool aborted = false;

  std::map<std::pair<int, std::uint64_t>, Tail> memo;

  struct Frame {
    int t = 0;
    std::vector<std::uint64_t> entry, comp, exitv;
    std::uint64_t entry_any = 0, comp_any = 0;
    double cost = 0, q = 0;
    std::int64_t r = 0;
    Tail best;
    std::vector<std::pair<int, int>> cands;  // exit-save candidates (d, i)
    double step_cost = 0;                    // cost + copy charges, set at leaf
  };

  explicit Search(const Problem& prob, const ModelOptions& o) : p(prob), opts(o) {
    D = p.device_count();
    T = p.op_count();
    for (const auto& op : p.operators) mass.push_back(op.output_bytes);
    for (const auto& dv : p.devices) bud.push_back(dv.budget_bytes);

    has_energy = opts.energy.has_value();
    devcap.assign(static_cast<size_t>(D), std::numeric_limits<double>::infinity());
    if (has_energy) {
      const auto& e = *opts.energy;
      if (!(e.alpha >= 0.0)) raise(Errc::NegativeCost, "alpha");
      if (static_cast<int>(e.q_joules.size()) != D)
        raise(Errc::IncompleteEnergyTable, "q_joules needs one row per device");
      for (const auto& row : e.q_joules)
        if (static_cast<int>(row.size()) != T)
          raise(Errc::IncompleteEnergyTable, "q_joules row needs one entry per operator");
      qj = e.q_joules;
      for (const auto& [d, lim] : e.device_limit) {
        if (d < 0 || d >= D) raise(Errc::DimensionMismatch, "device_limit index");
        devcap[static_cast<size_t>(d)] = lim;
      }
      if (e.total_limit) total_cap = *e.total_limit - e.board_joules;
    }
    c.assign(static_cast<size_t>(D), std::vector<double>(static_cast<size_t>(T), 0));
    for (int d = 0; d < D; ++d)
      for (int i = 0; i < T; ++i) {
        double v = p.operators[static_cast<size_t>(i)].costs_ms[static_cast<size_t>(d)];
        if (has_energy) v += opts.energy->alpha * qj[static_cast<size_t>(d)][static_cast<size_t>(i)];
        c[static_cast<size_t>(d)][static_cast<size_t>(i)] = v;
      }

    pmask.assign(static_cast<size_t>(T), 0);
    consmask.assign(static_cast<size_t>(T), 0);
    pedges.resize(static_cast<size_t>(T));
    cons.resize(static_cast<size_t>(T));
    for (int e = 0; e < static_cast<int>(p.edges.size()); ++e) {
      const auto& ed = p.edges[static_cast<size_t>(e)];
      pmask[static_cast<size_t>(ed.dst)] |= 1ull << ed.src;
      consmask[static_cast<size_t>(ed.src)] |= 1ull << ed.dst;
      pedges[static_cast<size_t>(ed.dst)].push_back({ed.src, e});
      cons[static_cast<size_t>(ed.src)].push_back(ed.dst);
    }
    maxreach.assign(static_cast<size_t>(T), -1);
    for (int v = T - 1; v >= 0; --v)
      for (int x : cons[static_cast<size_t>(v)])
        maxreach[static_cast<size_t>(v)] =
            std::max({maxreach[static_cast<size_t>(v)], x, maxreach[static_cast<size_t>(x)]});

    w.assign(p.edges.size(), std::vector<std::vector<double>>(
                                 static_cast<size_t>(D), std::vector<double>(static_cast<size_t>(D), 0)));
    for (size_t e = 0; e < p.edges.size(); ++e)
      for (int ds = 0; ds < D; ++ds)
        for (int dc = 0; dc < D; ++dc)
          if (ds != dc) w[e][static_cast<size_t>(ds)][static_cast<size_t>(dc)] =
              copy_cost(p, p.edges[e], ds, dc);

    lb.assign(static_cast<size_t>(T) + 1, 0);
    for (int t = T - 1; t >= 0; --t) {
      double m = std::numeric_limits<double>::infinity();
      for (int d = 0; d < D; ++d)
        if (qj.empty() || qj[static_cast<size_t>(d)][static_cast<size_t>(t)] <=
                              devcap[static_cast<size_t>(d)])
          m = std::min(m, c[static_cast<size_t>(d)][static_cast<size_t>(t)]);
      lb[static_cast<size_t>(t)] = lb[static_cast<size_t>(t) + 1] + m;
    }
  }

  bool over_limits() {
    ++nodes;
    if (node_limit >= 0 && nodes > node_limit) return true;
    if (has_deadline && (nodes & 255) == 0 && std::chrono::steady_clock::now() > deadline)
      return true;
    return false;
  }

  bool cap_ok(int d, int i) const {
    return qj.empty() ||
           qj[static_cast<size_t>(d)][static_cast<size_t>(i)] <= devcap[static_cast<size_t>(d)];
  }

  // Does some consumer of src later than slot v run this timestep (and so
  // block the free)? Default counts the computing device only.
  bool later_consumer(const Frame& f, int d, int src, int v) const {
    for (int x : cons[static_cast<size_t>(src)]) {
      if (x <= v) continue;
      if (opts.strict_free ? (f.comp_any >> x) & 1 : (f.comp[static_cast<size_t>(d)] >> x) & 1)
        return true;
    }
    return false;
  }

  bool mem_ok(const Frame& f, int d) const {
    const std::uint64_t en = f.entry[static_cast<size_t>(d)];
    const std::uint64_t cm = f.comp[static_cast<size_t>(d)];
    const std::uint64_t ex = f.exitv[static_cast<size_t>(d)];
    std::int64_t u = 0;
    for (int i = 0; i < T; ++i)
      if ((en >> i) & 1) u += mass[static_cast<size_t>(i)];
    if ((cm >> 0) & 1) u += mass[0];
    if (u > bud[static_cast<size_t>(d)]) return false;
    for (int v = 0; v + 1 < T; ++v) {
      if ((cm >> v) & 1) {
        for (const auto& [src, e] : pedges[static_cast<size_t>(v)]) {
          (void)e;
          bool z = ((en >> src) & 1) || ((cm >> src) & 1);
          if (z && !((ex >> src) & 1) && !later_consumer(f, d, src, v))
            u -= mass[static_cast<size_t>(src)];
        }
        if (!((ex >> v) & 1) && !later_consumer(f, d, v, v)) u -= mass[static_cast<size_t>(v)];
      }
      if ((cm >> (v + 1)) & 1) u += mass[static_cast<size_t>(v) + 1];
      if (u > bud[static_cast<size_t>(d)]) return false;
    }
    return true;
  }

  std::string step_bits(const Frame& f) const {
    std::string s(static_cast<size_t>(2 * D * T), '0');
    for (int d = 0; d < D; ++d)
      for (int i = 0; i < T; ++i) {
        if ((f.comp[static_cast<size_t>(d)] >> i) & 1) s[static_cast<size_t>(d * T + i)] = '1';
        if ((f.exitv[static_cast<size_t>(d)] >> i) & 1)
          s[static_cast<size_t>(D * T + d * T + i)] = '1';
      }
    return s;
  }

  void finish(Frame& f) {
    if (over_limits()) {
      aborted = true;
      return;
    }
    if (beaten(f.step_cost + lb[static_cast<size_t>(f.t) + 1], f.r + (T - 1 - f.t), f.best))
      return;
    for (int d = 0; d < D; ++d)
      if (!mem_ok(f, d)) return;
    std::uint64_t nmask = 0;
    for (int d = 0; d < D; ++d) nmask |= f.exitv[static_cast<size_t>(d)] << (d * T);
    Tail child = solve(f.t + 1, nmask);
    if (!child.feasible()) return;
    Tail cand;
    cand.cost = f.step_cost + child.cost;
    cand.sum_r = f.r + child.sum_r;
    cand.sum_s = std::popcount(nmask) + child.sum_s;
    cand.bits = step_bits(f) + child.bits;
    if (tail_less(cand, f.best)) f.best = cand;
  }

  void exits(Frame& f, size_t k) {
    if (aborted) return;
    if (k == f.cands.size()) {
      finish(f);
      return;
    }
    auto [d, i] = f.cands[k];
    f.exitv[static_cast<size_t>(d)] |= 1ull << i;
    exits(f, k + 1);
    f.exitv[static_cast<size_t>(d)] &= ~(1ull << i);
    if (aborted) return;
    exits(f, k + 1);
  }

  void leaf(Frame& f) {
    std::uint64_t avail = f.entry_any | f.comp_any;
    for (int o = 0; o < T; ++o)
      if (((f.comp_any >> o) & 1) && (pmask[static_cast<size_t>(o)] & ~avail)) return;
    if (has_energy && f.q > total_cap) return;

    double wsum = 0;
    for (int o = 0; o < T; ++o) {
      if (!((f.comp_any >> o) & 1)) continue;
      for (int dc = 0; dc < D; ++dc) {
        if (!((f.comp[static_cast<size_t>(dc)] >> o) & 1)) continue;
        for (const auto& [src, e] : pedges[static_cast<size_t>(o)])
          for (int ds = 0; ds < D; ++ds) {
            if (ds == dc) continue;
            if (((f.entry[static_cast<size_t>(ds)] | f.comp[static_cast<size_t>(ds)]) >> src) & 1)
              wsum += w[static_cast<size_t>(e)][static_cast<size_t>(ds)][static_cast<size_t>(dc)];
          }
      }
    }
    f.step_cost = f.cost + wsum;
    if (beaten(f.step_cost + lb[static_cast<size_t>(f.t) + 1], f.r + (T - 1 - f.t), f.best))
      return;

    f.cands.clear();
    if (f.t + 1 < T)
      for (int d = 0; d < D; ++d)
        for (int i = 0; i <= f.t; ++i) {
          bool resident = ((f.entry[static_cast<size_t>(d)] | f.comp[static_cast<size_t>(d)]) >> i) & 1;
          if (resident && maxreach[static_cast<size_t>(i)] > f.t) f.cands.push_back({d, i});
        }
    exits(f, 0);
  }

  void cells(Frame& f, int v) {
    if (aborted) return;
    if (v < 0) {
      leaf(f);
      return;
    }
    if (v == f.t) {  // the new operator: exactly one device
      for (int d = 0; d < D; ++d) {
        if (!cap_ok(d, v)) continue;
        double add = c[static_cast<size_t>(d)][static_cast<size_t>(v)];
        if (beaten(f.cost + add + lb[static_cast<size_t>(f.t) + 1], f.r + 1 + (T - 1 - f.t),
                   f.best))
          continue;
        f.comp[static_cast<size_t>(d)] |= 1ull << v;
        f.comp_any |= 1ull << v;
        f.cost += add;
        f.r += 1;
        if (has_energy) f.q += qj[static_cast<size_t>(d)][static_cast<size_t>(v)];
        cells(f, v - 1);
        f.comp[static_cast<size_t>(d)] &= ~(1ull << v);
        f.comp_any &= ~(1ull << v);
        f.cost -= add;
        f.r -= 1;
        if (has_energy) f.q -= qj[static_cast<size_t>(d)][static_cast<size_t>(v)];
        if (aborted) return;
      }
      return;
    }

    cells(f, v - 1);  // not recomputed
    if (aborted) return;
    if (!(consmask[static_cast<size_t>(v)] & f.comp_any)) return;  // nothing here consumes v

    for (unsigned sigma = 1; sigma < (1u << D); ++sigma) {
      bool ok = true;
      double add = 0;
      double qadd = 0;
      for (int d = 0; d < D; ++d)
        if ((sigma >> d) & 1) {
          if (!cap_ok(d, v)) {
            ok = false;
            break;
          }
          add += c[static_cast<size_t>(d)][static_cast<size_t>(v)];
          if (has_energy) qadd += qj[static_cast<size_t>(d)][static_cast<size_t>(v)];
        }
      if (!ok) continue;
      int nbits = std::popcount(sigma);
      if (beaten(f.cost + add + lb[static_cast<size_t>(f.t) + 1], f.r + nbits + (T - 1 - f.t),
                 f.best))
        continue;
      for (int d = 0; d < D; ++d)
        if ((sigma >> d) & 1) f.comp[static_cast<size_t>(d)] |= 1ull << v;
      f.comp_any |= 1ull << v;
      f.cost += add;
      f.q += qadd;
      f.r += nbits;
      cells(f, v - 1);
      for (int d = 0; d < D; ++d)
        if ((sigma >> d) & 1) f.comp[static_cast<size_t>(d)] &= ~(1ull << v);
      f.comp_any &= ~(1ull << v);
      f.cost -= add;
      f.q -= qadd;
      f.r -= nbits;
      if (aborted) return;
    }
  }

  Tail solve(int t, std::uint64_t mask) {
    if (t == T) {
      Tail z;
      z.cost = 0;
      return z;
    }
    auto key = std::make_pair(t, mask);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;

    Frame f;
    f.t = t;
    f.entry.assign(static_cast<size_t>(D), 0);
    f.comp.assign(static_cast<size_t>(D), 0);
    f.exitv.assign(static_cast<size_t>(D), 0);
    for (int d = 0; d < D; ++d) {
      f.entry[static_cast<size_t>(d)] = (mask >> (d * T)) & ((T == 64) ? ~0ull : ((1ull << T) - 1));
      f.entry_any |= f.entry[static_cast<size_t>(d)];
    }
    cells(f, t);
    if (!aborted) memo[key] = f.best;
    return f.best;
  }
};

void fill_solution(Solution& out, const Tail& tail, const Problem& p, const ModelOptions& opts) {
  const int D = p.device_count(), T = p.op_count();
  BitCube R(D, T), S(D, T);
  for (int t = 0; t < T; ++t) {
    size_t base = static_cast<size_t>(t) * 2 * D * T;
    for (int d = 0; d < D; ++d)
      for (int i = 0; i < T; ++i) {
        if (tail.bits[base + static_cast<size_t>(d * T + i)] == '1') R.at(d, t, i) = 1;
        if (t + 1 < T && tail.bits[base + static_cast<size_t>(D * T + d * T + i)] == '1')
          S.at(d, t + 1, i) = 1;
      }
  }
  out.assignment = complete_assignment(p, opts, R, S);
  double obj = objective_value(out.assignment, p, opts);
  if (std::abs(obj - tail.cost) > 1e-9 * std::max(1.0, std::abs(obj)))
    raise(Errc::ObjectiveMismatch,
          "search cost " + format_number(tail.cost) + " vs objective " + format_number(obj));
  out.objective_ms = tail.cost;
  out.assignment.objective_reported = tail.cost;
}

}  // namespace

Solution solve_exact(const Problem& p, const ModelOptions& opts, std::vector<std::int64_t> budgets,
                     const SearchLimits& limits) {
  Problem peff = budgets.empty() ? p : with_budgets(p, budgets);
  validate_problem(peff);
  const int D = peff.device_count(), T = peff.op_count();
  if (D * T > 64) raise(Errc::TooLarge, "state space exceeds 64 residency bits");

  Solution out;
  out.backend = "exact";
  out.objective_ms = std::numeric_limits<double>::quiet_NaN();

  std::int64_t maxbud = 0;
  for (const auto& d : peff.devices) maxbud = std::max(maxbud, d.budget_bytes);
  for (const auto& op : peff.operators)
    if (op.output_bytes > maxbud) {
      out.status = SolveStatus::Infeasible;
      return out;
    }

  Search s(peff, opts);
  if (limits.node_limit) s.node_limit = *limits.node_limit;
  if (limits.time_limit_ms) {
    s.has_deadline = true;
    s.deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(*limits.time_limit_ms);
  }
  Tail root = s.solve(0, 0);
  out.nodes_explored = s.nodes;
  if (s.aborted) {
    out.status = SolveStatus::LimitReached;
    if (root.feasible()) fill_solution(out, root, peff, opts);
    return out;
  }
  if (!root.feasible()) {
    out.status = SolveStatus::Infeasible;
    return out;
  }
  out.status = SolveStatus::Optimal;
  fill_solution(out, root, peff, opts);
  return out;
}

namespace {

std::string substitute_all(std::string s, const std::string& key, const std::string& value) {
  for (size_t pos = 0; (pos = s.find(key, pos)) != std::string::npos; pos += value.size())
    s.replace(pos, key.size(), value);
  return s;
}

}  // namespace

Solution solve_external(const Problem& p, const ModelOptions& opts, std::vector<std::int64_t> budgets,
                        const std::string& command_template, const std::string& scratch_dir) {
  if (command_template.empty())
    raise(Errc::ExternalSolverUnavailable, "no solver command configured");
  if (command_template.find("{mps}") == std::string::npos ||
      command_template.find("{sol}") == std::string::npos)
    raise(Errc::ExternalSolverUnavailable, "command template must contain {mps} and {sol}");
  if (scratch_dir.empty()) raise(Errc::IoError, "scratch directory required");

  Problem peff = budgets.empty() ? p : with_budgets(p, budgets);
  MilpModel m = build_model(peff, opts);
  const std::string mps_path = scratch_dir + "/model.mps";
  const std::string sol_path = scratch_dir + "/model.sol";
  {
    std::ofstream os(mps_path, std::ios::binary);
    if (!os) raise(Errc::IoError, "cannot write " + mps_path);
    os << write_mps(m);
  }
  std::remove(sol_path.c_str());

  std::string cmd = substitute_all(command_template, "{mps}", mps_path);
  cmd = substitute_all(cmd, "{sol}", sol_path);
  int rc = std::system(cmd.c_str());
  if (rc == -1) raise(Errc::ExternalSolverUnavailable, "failed to launch: " + cmd);
  int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  if (code == 126 || code == 127)
    raise(Errc::ExternalSolverUnavailable, "command not runnable (exit " + std::to_string(code) +
                                               "): " + cmd);
  if (code != 0) raise(Errc::SolverFailed, "solver exit " + std::to_string(code));

  std::ifstream in(sol_path, std::ios::binary);
  if (!in) raise(Errc::SolverFailed, "solver exited 0 but wrote no solution file");
  std::stringstream buf;
  buf << in.rdbuf();

  Solution out;
  out.backend = "external";
  try {
    out.assignment = parse_solution(buf.str(), m);
  } catch (const Error& e) {
    if (e.code() == Errc::InfeasibleMarker) {
      out.status = SolveStatus::Infeasible;
      out.objective_ms = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    throw;
  }
  auto violations = check_assignment(m, out.assignment);
  if (!violations.empty())
    raise(Errc::IllegalAssignment,
          "solver solution violates " + std::to_string(violations.size()) +
              " constraint(s), first: " + violations.front());
  double obj = objective_value(out.assignment, peff, opts);
  if (out.assignment.objective_reported &&
      std::abs(*out.assignment.objective_reported - obj) > 1e-6 * std::max(1.0, std::abs(obj)))
    raise(Errc::ObjectiveMismatch, "reported " + format_number(*out.assignment.objective_reported) +
                                       " vs recomputed " + format_number(obj));
  out.status = SolveStatus::Optimal;
  out.objective_ms = obj;
  return out;
}

}  // namespace xengine
