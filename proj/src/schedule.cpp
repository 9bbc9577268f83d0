// SPDX-License-Identifier: Apache-2.0
#include "xengine/schedule.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "xengine/mps_io.hpp"

namespace xengine {

const char* violation_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::ComputeWithoutInputs: return "ComputeWithoutInputs";
    case ViolationKind::CopyFromNonResident: return "CopyFromNonResident";
    case ViolationKind::BudgetExceeded: return "BudgetExceeded";
    case ViolationKind::FreeNonResident: return "FreeNonResident";
    case ViolationKind::UncomputedOperator: return "UncomputedOperator";
  }
  return "unknown";
}

namespace {

bool bit(const Assignment& a, const VarRef& v) { return a.at(v) > 0.5; }

// Parent edges of each operator in edge-declaration order, as (src, edge
// ordinal) pairs.
std::vector<std::vector<std::pair<int, int>>> parent_edges(const Problem& p) {
  std::vector<std::vector<std::pair<int, int>>> out(p.operators.size());
  for (int e = 0; e < static_cast<int>(p.edges.size()); ++e)
    out[static_cast<size_t>(p.edges[static_cast<size_t>(e)].dst)].push_back(
        {p.edges[static_cast<size_t>(e)].src, e});
  return out;
}

}  // namespace

Schedule decode(const Assignment& a, const Problem& p) {
  validate_problem(p);
  const int D = p.device_count(), T = p.op_count();
  const int E = static_cast<int>(p.edges.size());
  auto parents = parent_edges(p);

  Schedule s;
  s.problem = p;
  for (int t = 0; t < T; ++t) {
    int slot = 0;
    std::vector<std::vector<char>> freed(static_cast<size_t>(D),
                                         std::vector<char>(static_cast<size_t>(T), 0));
    for (int v = 0; v <= t; ++v) {
      for (int d = 0; d < D; ++d) {
        if (!bit(a, var_r(d, t, v))) continue;
        for (const auto& [u, e] : parents[static_cast<size_t>(v)]) {
          if (bit(a, var_z(d, t, u))) continue;
          int src_dev = -1;
          for (int d2 = 0; d2 < D; ++d2)
            if (bit(a, var_z(d2, t, u))) {
              src_dev = d2;
              break;
            }
          if (src_dev < 0)
            raise(Errc::IllegalAssignment,
                  "operator " + p.operators[static_cast<size_t>(v)].name + " at t=" +
                      std::to_string(t) + " needs tensor " +
                      p.operators[static_cast<size_t>(u)].name + " resident on no device");
          if (freed[static_cast<size_t>(src_dev)][static_cast<size_t>(u)])
            raise(Errc::IllegalAssignment,
                  "copy source for tensor " + p.operators[static_cast<size_t>(u)].name +
                      " was freed earlier in timestep " + std::to_string(t));
          Action cp;
          cp.kind = ActionKind::Copy;
          cp.timestep = t;
          cp.slot = slot++;
          cp.src = u;
          cp.dst = v;
          cp.from = src_dev;
          cp.to = d;
          s.actions.push_back(cp);
        }
        Action cm;
        cm.kind = ActionKind::Compute;
        cm.timestep = t;
        cm.slot = slot++;
        cm.device = d;
        cm.op = v;
        s.actions.push_back(cm);
        for (const auto& [u, e] : parents[static_cast<size_t>(v)]) {
          if (!bit(a, var_f(d, t, e))) continue;
          Action fr;
          fr.kind = ActionKind::Free;
          fr.timestep = t;
          fr.slot = slot++;
          fr.device = d;
          fr.src = u;
          fr.dst = v;
          s.actions.push_back(fr);
          freed[static_cast<size_t>(d)][static_cast<size_t>(u)] = 1;
        }
        if (bit(a, var_f(d, t, E + v))) {
          Action fr;
          fr.kind = ActionKind::Free;
          fr.timestep = t;
          fr.slot = slot++;
          fr.device = d;
          fr.src = v;
          fr.dst = v;
          s.actions.push_back(fr);
          freed[static_cast<size_t>(d)][static_cast<size_t>(v)] = 1;
        }
      }
    }
    for (int d = 0; d < D; ++d)
      for (int i = 0; i < T; ++i) {
        if (!bit(a, var_z(d, t, i)) || freed[static_cast<size_t>(d)][static_cast<size_t>(i)])
          continue;
        if (t + 1 < T && bit(a, var_s(d, t + 1, i))) continue;
        Action dr;
        dr.kind = ActionKind::Drop;
        dr.timestep = t;
        dr.slot = slot++;
        dr.device = d;
        dr.op = i;
        s.actions.push_back(dr);
      }
  }
  return s;
}

ValidationReport validate(const Schedule& s, const Problem& p,
                          const std::vector<std::int64_t>& budgets) {
  const int D = p.device_count(), T = p.op_count();
  std::vector<std::int64_t> bud;
  if (budgets.empty())
    for (const auto& d : p.devices) bud.push_back(d.budget_bytes);
  else if (static_cast<int>(budgets.size()) == D)
    bud = budgets;
  else
    raise(Errc::DimensionMismatch, "one budget per device required");

  auto parents = parent_edges(p);
  ValidationReport rep;
  std::vector<std::vector<char>> res(static_cast<size_t>(D),
                                     std::vector<char>(static_cast<size_t>(T), 0));
  std::vector<std::int64_t> bytes(static_cast<size_t>(D), 0);
  std::vector<char> ever_computed(static_cast<size_t>(T), 0);

  size_t k = 0;
  for (int t = 0; t < T; ++t) {
    for (int d = 0; d < D; ++d) {
      bytes[static_cast<size_t>(d)] = 0;
      for (int i = 0; i < T; ++i)
        if (res[static_cast<size_t>(d)][static_cast<size_t>(i)])
          bytes[static_cast<size_t>(d)] += p.operators[static_cast<size_t>(i)].output_bytes;
    }
    std::vector<std::vector<char>> copyin(static_cast<size_t>(D),
                                          std::vector<char>(static_cast<size_t>(T), 0));
    for (; k < s.actions.size() && s.actions[k].timestep == t; ++k) {
      const Action& act = s.actions[k];
      switch (act.kind) {
        case ActionKind::Compute: {
          for (const auto& [u, e] : parents[static_cast<size_t>(act.op)]) {
            (void)e;
            if (res[static_cast<size_t>(act.device)][static_cast<size_t>(u)] ||
                copyin[static_cast<size_t>(act.device)][static_cast<size_t>(u)])
              continue;
            Violation v;
            v.kind = ViolationKind::ComputeWithoutInputs;
            v.device = act.device;
            v.timestep = t;
            v.slot = act.slot;
            v.detail = "operator " + p.operators[static_cast<size_t>(act.op)].name +
                       " missing input " + p.operators[static_cast<size_t>(u)].name;
            rep.violations.push_back(v);
          }
          res[static_cast<size_t>(act.device)][static_cast<size_t>(act.op)] = 1;
          ever_computed[static_cast<size_t>(act.op)] = 1;
          bytes[static_cast<size_t>(act.device)] +=
              p.operators[static_cast<size_t>(act.op)].output_bytes;
          if (bytes[static_cast<size_t>(act.device)] > bud[static_cast<size_t>(act.device)]) {
            Violation v;
            v.kind = ViolationKind::BudgetExceeded;
            v.device = act.device;
            v.timestep = t;
            v.slot = act.slot;
            v.bytes = bytes[static_cast<size_t>(act.device)];
            v.detail = "device " + p.devices[static_cast<size_t>(act.device)].id + " holds " +
                       std::to_string(v.bytes) + " bytes over budget " +
                       std::to_string(bud[static_cast<size_t>(act.device)]);
            rep.violations.push_back(v);
          }
          break;
        }
        case ActionKind::Copy: {
          if (!res[static_cast<size_t>(act.from)][static_cast<size_t>(act.src)]) {
            Violation v;
            v.kind = ViolationKind::CopyFromNonResident;
            v.device = act.from;
            v.timestep = t;
            v.slot = act.slot;
            v.detail = "tensor " + p.operators[static_cast<size_t>(act.src)].name +
                       " not resident on " + p.devices[static_cast<size_t>(act.from)].id;
            rep.violations.push_back(v);
          }
          copyin[static_cast<size_t>(act.to)][static_cast<size_t>(act.src)] = 1;
          break;
        }
        case ActionKind::Free:
        case ActionKind::Drop: {
          int tensor = act.kind == ActionKind::Free ? act.src : act.op;
          if (!res[static_cast<size_t>(act.device)][static_cast<size_t>(tensor)]) {
            Violation v;
            v.kind = ViolationKind::FreeNonResident;
            v.device = act.device;
            v.timestep = t;
            v.slot = act.slot;
            v.detail = "tensor " + p.operators[static_cast<size_t>(tensor)].name +
                       " not resident on " + p.devices[static_cast<size_t>(act.device)].id;
            rep.violations.push_back(v);
          } else {
            res[static_cast<size_t>(act.device)][static_cast<size_t>(tensor)] = 0;
            if (act.kind == ActionKind::Free)
              bytes[static_cast<size_t>(act.device)] -=
                  p.operators[static_cast<size_t>(tensor)].output_bytes;
          }
          break;
        }
      }
    }
  }
  for (int i = 0; i < T; ++i)
    if (!ever_computed[static_cast<size_t>(i)]) {
      Violation v;
      v.kind = ViolationKind::UncomputedOperator;
      v.detail = "operator " + p.operators[static_cast<size_t>(i)].name + " never computed";
      rep.violations.push_back(v);
    }
  return rep;
}

double action_cost(const Problem& p, const Action& act) {
  switch (act.kind) {
    case ActionKind::Compute:
      return p.operators[static_cast<size_t>(act.op)].costs_ms[static_cast<size_t>(act.device)];
    case ActionKind::Copy: {
      for (const auto& e : p.edges)
        if (e.src == act.src && e.dst == act.dst) return copy_cost(p, e, act.from, act.to);
      TensorEdge e;
      e.src = act.src;
      e.dst = act.dst;
      return copy_cost(p, e, act.from, act.to);
    }
    case ActionKind::Free:
    case ActionKind::Drop:
      return 0.0;
  }
  return 0.0;
}

Trace replay(const Schedule& s, const Problem& p, const ModelOptions& opts,
             const std::optional<Assignment>& a) {
  auto rep = validate(s, p);
  if (!rep.ok())
    raise(Errc::IllegalSchedule, std::to_string(rep.violations.size()) +
                                     " violation(s), first: " + rep.violations.front().detail);

  const int D = p.device_count(), T = p.op_count();
  auto parents = parent_edges(p);
  Trace tr;
  tr.per_device_memory.assign(static_cast<size_t>(D), {});
  tr.peaks.assign(static_cast<size_t>(D), 0);

  for (const auto& act : s.actions)
    if (act.kind == ActionKind::Compute || act.kind == ActionKind::Copy)
      tr.total_action_ms += action_cost(p, act);

  if (a) {
    tr.eq1_objective_ms = objective_value(*a, p, opts);
  } else {
    // Reconstruct availability per timestep: saved-in tensors plus everything
    // computed during the timestep, per device.
    std::vector<std::vector<char>> res(static_cast<size_t>(D),
                                       std::vector<char>(static_cast<size_t>(T), 0));
    double obj = 0.0;
    size_t k = 0;
    for (int t = 0; t < T; ++t) {
      std::vector<std::vector<char>> avail = res;
      size_t begin = k;
      while (k < s.actions.size() && s.actions[k].timestep == t) ++k;
      for (size_t j = begin; j < k; ++j)
        if (s.actions[j].kind == ActionKind::Compute)
          avail[static_cast<size_t>(s.actions[j].device)]
               [static_cast<size_t>(s.actions[j].op)] = 1;
      // Availability is a timestep-level quantity: a tensor freed mid-timestep
      // still counts as resident for this timestep's double-residency charge.
      for (size_t j = begin; j < k; ++j) {
        const Action& act = s.actions[j];
        if (act.kind != ActionKind::Compute) continue;
        obj += p.operators[static_cast<size_t>(act.op)]
                   .costs_ms[static_cast<size_t>(act.device)];
        if (opts.energy)
          obj += opts.energy->alpha *
                 opts.energy->q_joules[static_cast<size_t>(act.device)]
                                      [static_cast<size_t>(act.op)];
        for (const auto& [u, e] : parents[static_cast<size_t>(act.op)])
          for (int ds = 0; ds < D; ++ds) {
            if (ds == act.device || !avail[static_cast<size_t>(ds)][static_cast<size_t>(u)])
              continue;
            obj += copy_cost(p, p.edges[static_cast<size_t>(e)], ds, act.device);
          }
      }
      for (size_t j = begin; j < k; ++j) {
        const Action& act = s.actions[j];
        if (act.kind == ActionKind::Compute)
          res[static_cast<size_t>(act.device)][static_cast<size_t>(act.op)] = 1;
        else if (act.kind == ActionKind::Free)
          res[static_cast<size_t>(act.device)][static_cast<size_t>(act.src)] = 0;
        else if (act.kind == ActionKind::Drop)
          res[static_cast<size_t>(act.device)][static_cast<size_t>(act.op)] = 0;
      }
    }
    tr.eq1_objective_ms = obj;
  }

  // Memory series: one sample per operator slot, mirroring the model's U
  // recurrence — allocations land at their slot, frees fire after their
  // consumer's sample, drops after the last slot.
  std::vector<std::vector<char>> res(static_cast<size_t>(D),
                                     std::vector<char>(static_cast<size_t>(T), 0));
  size_t k = 0;
  for (int t = 0; t < T; ++t) {
    std::vector<std::int64_t> bytes(static_cast<size_t>(D), 0);
    for (int d = 0; d < D; ++d)
      for (int i = 0; i < T; ++i)
        if (res[static_cast<size_t>(d)][static_cast<size_t>(i)])
          bytes[static_cast<size_t>(d)] += p.operators[static_cast<size_t>(i)].output_bytes;
    size_t begin = k;
    while (k < s.actions.size() && s.actions[k].timestep == t) ++k;
    for (int v = 0; v < T; ++v) {
      for (size_t j = begin; j < k; ++j) {
        const Action& act = s.actions[j];
        if (act.kind == ActionKind::Compute && act.op == v) {
          res[static_cast<size_t>(act.device)][static_cast<size_t>(v)] = 1;
          bytes[static_cast<size_t>(act.device)] +=
              p.operators[static_cast<size_t>(v)].output_bytes;
        }
      }
      for (int d = 0; d < D; ++d) {
        tr.per_device_memory[static_cast<size_t>(d)].push_back(
            {t, v, bytes[static_cast<size_t>(d)]});
        tr.peaks[static_cast<size_t>(d)] =
            std::max(tr.peaks[static_cast<size_t>(d)], bytes[static_cast<size_t>(d)]);
      }
      for (size_t j = begin; j < k; ++j) {
        const Action& act = s.actions[j];
        if (act.kind == ActionKind::Free && act.dst == v) {
          res[static_cast<size_t>(act.device)][static_cast<size_t>(act.src)] = 0;
          bytes[static_cast<size_t>(act.device)] -=
              p.operators[static_cast<size_t>(act.src)].output_bytes;
        }
      }
    }
    for (size_t j = begin; j < k; ++j)
      if (s.actions[j].kind == ActionKind::Drop)
        res[static_cast<size_t>(s.actions[j].device)][static_cast<size_t>(s.actions[j].op)] = 0;
  }
  return tr;
}

std::vector<std::pair<int, std::int64_t>> memory_timeline(const Trace& tr, int device) {
  if (device < 0 || device >= static_cast<int>(tr.per_device_memory.size()))
    raise(Errc::DimensionMismatch, "device index out of range");
  std::vector<std::pair<int, std::int64_t>> out;
  for (const auto& sample : tr.per_device_memory[static_cast<size_t>(device)]) {
    if (out.empty() || out.back().first != sample.timestep)
      out.push_back({sample.timestep, sample.bytes});
    else
      out.back().second = std::max(out.back().second, sample.bytes);
  }
  return out;
}

std::vector<std::pair<int, std::int64_t>> combined_memory_timeline(const Trace& tr) {
  std::vector<std::pair<int, std::int64_t>> out;
  for (int d = 0; d < static_cast<int>(tr.per_device_memory.size()); ++d) {
    auto series = memory_timeline(tr, d);
    if (out.empty()) {
      out = series;
    } else {
      for (size_t i = 0; i < out.size() && i < series.size(); ++i)
        out[i].second += series[i].second;
    }
  }
  return out;
}

namespace {

std::string kv(const std::string& token, const std::string& key) {
  if (token.size() <= key.size() + 1 || token.compare(0, key.size(), key) != 0 ||
      token[key.size()] != '=')
    raise(Errc::MalformedDocument, "expected " + key + "=..., got '" + token + "'");
  return token.substr(key.size() + 1);
}

int parse_int(const std::string& text) {
  char* end = nullptr;
  long v = std::strtol(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size() || text.empty())
    raise(Errc::MalformedDocument, "not an integer: '" + text + "'");
  return static_cast<int>(v);
}

int op_by_name(const Problem& p, const std::string& name) {
  for (int i = 0; i < p.op_count(); ++i)
    if (p.operators[static_cast<size_t>(i)].name == name) return i;
  raise(Errc::MalformedDocument, "unknown operator '" + name + "'");
}

int device_by_id(const Problem& p, const std::string& id) {
  int d = p.find_device(id);
  if (d < 0) raise(Errc::UnknownDevice, "'" + id + "'");
  return d;
}

std::pair<int, int> parse_edge(const Problem& p, const std::string& text) {
  size_t pos = text.find("->");
  if (pos == std::string::npos)
    raise(Errc::MalformedDocument, "expected <u>-><v>, got '" + text + "'");
  int u = op_by_name(p, text.substr(0, pos));
  int v = op_by_name(p, text.substr(pos + 2));
  if (u != v) {
    bool found = false;
    for (const auto& e : p.edges) found = found || (e.src == u && e.dst == v);
    if (!found)
      raise(Errc::MalformedDocument, "no edge '" + text + "' in problem " + p.name);
  }
  return {u, v};
}

}  // namespace

std::string format_schedule(const Schedule& s) {
  const Problem& p = s.problem;
  std::string out;
  for (const auto& act : s.actions) {
    out += "t=" + std::to_string(act.timestep) + " slot=" + std::to_string(act.slot) + " ";
    switch (act.kind) {
      case ActionKind::Compute:
        out += "COMPUTE d=" + p.devices[static_cast<size_t>(act.device)].id +
               " op=" + p.operators[static_cast<size_t>(act.op)].name;
        break;
      case ActionKind::Copy:
        out += "COPY edge=" + p.operators[static_cast<size_t>(act.src)].name + "->" +
               p.operators[static_cast<size_t>(act.dst)].name +
               " from=" + p.devices[static_cast<size_t>(act.from)].id +
               " to=" + p.devices[static_cast<size_t>(act.to)].id;
        break;
      case ActionKind::Free:
        out += "FREE d=" + p.devices[static_cast<size_t>(act.device)].id +
               " edge=" + p.operators[static_cast<size_t>(act.src)].name + "->" +
               p.operators[static_cast<size_t>(act.dst)].name;
        break;
      case ActionKind::Drop:
        out += "DROP d=" + p.devices[static_cast<size_t>(act.device)].id +
               " op=" + p.operators[static_cast<size_t>(act.op)].name;
        break;
    }
    out += "\n";
  }
  return out;
}

Schedule parse_schedule(const std::string& text, const Problem& p) {
  Schedule s;
  s.problem = p;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    std::string t;
    while (ls >> t) tok.push_back(t);
    if (tok.size() < 4) raise(Errc::MalformedDocument, "short action line: '" + line + "'");
    Action act;
    act.timestep = parse_int(kv(tok[0], "t"));
    act.slot = parse_int(kv(tok[1], "slot"));
    if (act.timestep < 0 || act.timestep >= p.op_count() || act.slot < 0)
      raise(Errc::MalformedDocument, "action out of range: '" + line + "'");
    const std::string& kind = tok[2];
    if (kind == "COMPUTE" && tok.size() == 5) {
      act.kind = ActionKind::Compute;
      act.device = device_by_id(p, kv(tok[3], "d"));
      act.op = op_by_name(p, kv(tok[4], "op"));
    } else if (kind == "COPY" && tok.size() == 6) {
      act.kind = ActionKind::Copy;
      auto [u, v] = parse_edge(p, kv(tok[3], "edge"));
      act.src = u;
      act.dst = v;
      act.from = device_by_id(p, kv(tok[4], "from"));
      act.to = device_by_id(p, kv(tok[5], "to"));
    } else if (kind == "FREE" && tok.size() == 5) {
      act.kind = ActionKind::Free;
      act.device = device_by_id(p, kv(tok[3], "d"));
      auto [u, v] = parse_edge(p, kv(tok[4], "edge"));
      act.src = u;
      act.dst = v;
    } else if (kind == "DROP" && tok.size() == 5) {
      act.kind = ActionKind::Drop;
      act.device = device_by_id(p, kv(tok[3], "d"));
      act.op = op_by_name(p, kv(tok[4], "op"));
    } else {
      raise(Errc::MalformedDocument, "unrecognized action line: '" + line + "'");
    }
    s.actions.push_back(act);
  }
  return s;
}

std::string trace_csv(const Trace& tr, const Problem& p) {
  std::string out = "device,timestep,slot,bytes\n";
  for (int d = 0; d < static_cast<int>(tr.per_device_memory.size()); ++d)
    for (const auto& sample : tr.per_device_memory[static_cast<size_t>(d)])
      out += p.devices[static_cast<size_t>(d)].id + "," + std::to_string(sample.timestep) + "," +
             std::to_string(sample.slot) + "," + std::to_string(sample.bytes) + "\n";
  return out;
}

}  // namespace xengine
