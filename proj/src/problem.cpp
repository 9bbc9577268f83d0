// SPDX-License-Identifier: Apache-2.0
#include "xengine/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace xengine {

using nlohmann::json;

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MalformedDocument: return "MalformedDocument";
    case Errc::NonTopologicalEdge: return "NonTopologicalEdge";
    case Errc::UnknownDevice: return "UnknownDevice";
    case Errc::NonPositiveSize: return "NonPositiveSize";
    case Errc::NegativeCost: return "NegativeCost";
    case Errc::EmptyNetwork: return "EmptyNetwork";
    case Errc::PercentOutOfRange: return "PercentOutOfRange";
    case Errc::MissingLink: return "MissingLink";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::IncompleteEnergyTable: return "IncompleteEnergyTable";
    case Errc::UnknownVariable: return "UnknownVariable";
    case Errc::NonIntegralBinary: return "NonIntegralBinary";
    case Errc::EmptySolution: return "EmptySolution";
    case Errc::InfeasibleMarker: return "InfeasibleMarker";
    case Errc::InfeasibleProblem: return "InfeasibleProblem";
    case Errc::TooLarge: return "TooLarge";
    case Errc::ExternalSolverUnavailable: return "ExternalSolverUnavailable";
    case Errc::SolverFailed: return "SolverFailed";
    case Errc::UnparsableSolution: return "UnparsableSolution";
    case Errc::ObjectiveMismatch: return "ObjectiveMismatch";
    case Errc::IllegalAssignment: return "IllegalAssignment";
    case Errc::IllegalSchedule: return "IllegalSchedule";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::NonPositiveTime: return "NonPositiveTime";
    case Errc::IoError: return "IoError";
  }
  return "Error";
}

int Problem::find_device(const std::string& id) const {
  for (int d = 0; d < device_count(); ++d)
    if (devices[d].id == id) return d;
  return -1;
}

namespace {

std::int64_t require_size(const json& j, const std::string& ctx) {
  if (!j.is_number_integer())
    raise(Errc::MalformedDocument, ctx + " must be an integer byte count");
  auto v = j.get<std::int64_t>();
  if (v <= 0) raise(Errc::NonPositiveSize, ctx + " must be positive, got " + std::to_string(v));
  return v;
}

double require_cost(const json& j, const std::string& ctx) {
  if (!j.is_number()) raise(Errc::MalformedDocument, ctx + " must be a number");
  double v = j.get<double>();
  if (v < 0.0) raise(Errc::NegativeCost, ctx + " must be non-negative");
  return v;
}

std::vector<DeviceSpec> parse_devices(const json& doc) {
  if (!doc.contains("devices") || !doc["devices"].is_array() || doc["devices"].empty())
    raise(Errc::MalformedDocument, "document needs a non-empty devices array");
  std::vector<DeviceSpec> out;
  std::set<std::string> seen;
  for (const auto& jd : doc["devices"]) {
    DeviceSpec d;
    if (!jd.contains("id") || !jd["id"].is_string())
      raise(Errc::MalformedDocument, "device entry needs a string id");
    d.id = jd["id"].get<std::string>();
    if (!seen.insert(d.id).second) raise(Errc::MalformedDocument, "duplicate device id " + d.id);
    d.budget_bytes = require_size(jd.at("budget_bytes"), "device " + d.id + " budget_bytes");
    if (jd.contains("ram_bytes")) {
      d.ram_bytes = require_size(jd["ram_bytes"], "device " + d.id + " ram_bytes");
      if (*d.ram_bytes < d.budget_bytes)
        raise(Errc::MalformedDocument, "device " + d.id + " budget exceeds its ram");
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<double> parse_costs(const json& jc, const Problem& p, const std::string& ctx) {
  if (!jc.is_object()) raise(Errc::MalformedDocument, ctx + " costs_ms must be an object");
  std::vector<double> costs(static_cast<size_t>(p.device_count()), kProhibitiveMs);
  for (auto it = jc.begin(); it != jc.end(); ++it) {
    int d = p.find_device(it.key());
    if (d < 0) raise(Errc::UnknownDevice, ctx + " costs_ms names unknown device " + it.key());
    costs[static_cast<size_t>(d)] = require_cost(it.value(), ctx + " cost for " + it.key());
  }
  return costs;
}

// "cpu->gpu" keys used by edge overrides and edge_copy_ms maps.
std::pair<int, int> parse_pair_key(const std::string& key, const Problem& p) {
  auto arrow = key.find("->");
  if (arrow == std::string::npos)
    raise(Errc::MalformedDocument, "copy override key '" + key + "' is not <from>-><to>");
  int a = p.find_device(key.substr(0, arrow));
  int b = p.find_device(key.substr(arrow + 2));
  if (a < 0 || b < 0) raise(Errc::UnknownDevice, "copy override key '" + key + "'");
  return {a, b};
}

CopyLinkModel parse_links(const json& doc, const Problem& p) {
  CopyLinkModel cm;
  if (!doc.contains("links")) return cm;
  if (!doc["links"].is_array()) raise(Errc::MalformedDocument, "links must be an array");
  for (const auto& jl : doc["links"]) {
    LinkSpec l;
    auto resolve = [&](const char* field) {
      const auto& v = jl.at(field);
      if (!v.is_string()) raise(Errc::MalformedDocument, "link endpoint must be a device id");
      auto s = v.get<std::string>();
      if (s == "*") return -1;
      int d = p.find_device(s);
      if (d < 0) raise(Errc::UnknownDevice, "link names unknown device " + s);
      return d;
    };
    l.from = resolve("from");
    l.to = resolve("to");
    l.latency_ms = require_cost(jl.at("latency_ms"), "link latency_ms");
    if (!jl.at("bytes_per_ms").is_number() || jl["bytes_per_ms"].get<double>() <= 0.0)
      raise(Errc::NonPositiveSize, "link bytes_per_ms must be positive");
    l.bytes_per_ms = jl["bytes_per_ms"].get<double>();
    cm.links.push_back(l);
  }
  return cm;
}

Problem load_direct(const json& doc) {
  Problem p;
  p.name = doc.value("name", std::string("unnamed"));
  p.devices = parse_devices(doc);

  if (!doc.contains("operators") || !doc["operators"].is_array() || doc["operators"].empty())
    raise(Errc::EmptyNetwork, "document has no operators");
  for (const auto& jo : doc["operators"]) {
    OperatorNode op;
    if (!jo.contains("name") || !jo["name"].is_string())
      raise(Errc::MalformedDocument, "operator entry needs a string name");
    op.name = jo["name"].get<std::string>();
    op.output_bytes = require_size(jo.at("output_bytes"), "operator " + op.name + " output_bytes");
    op.costs_ms = parse_costs(jo.at("costs_ms"), p, "operator " + op.name);
    if (jo.contains("pinned")) {
      int d = p.find_device(jo["pinned"].get<std::string>());
      if (d < 0) raise(Errc::UnknownDevice, "operator " + op.name + " pinned to unknown device");
      op.pinned_device = d;
    }
    p.operators.push_back(std::move(op));
  }

  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) raise(Errc::MalformedDocument, "edges must be an array");
    for (const auto& je : doc["edges"]) {
      TensorEdge e;
      if (je.is_array()) {
        if (je.size() != 2 || !je[0].is_number_integer() || !je[1].is_number_integer())
          raise(Errc::MalformedDocument, "edge array entry must be [src, dst]");
        e.src = je[0].get<int>();
        e.dst = je[1].get<int>();
      } else if (je.is_object()) {
        e.src = je.at("src").get<int>();
        e.dst = je.at("dst").get<int>();
        if (je.contains("copy_ms")) {
          for (auto it = je["copy_ms"].begin(); it != je["copy_ms"].end(); ++it)
            e.override_copy_ms[parse_pair_key(it.key(), p)] =
                require_cost(it.value(), "edge copy_ms");
        }
      } else {
        raise(Errc::MalformedDocument, "edge entry must be an array or object");
      }
      p.edges.push_back(std::move(e));
    }
  }

  validate_problem(p);
  return p;
}

Problem load_layered(const json& doc) {
  Problem shell;
  shell.name = doc.value("name", std::string("unnamed"));
  shell.devices = parse_devices(doc);
  shell.copy_model = parse_links(doc, shell);

  if (!doc.contains("input") || !doc["input"].is_object())
    raise(Errc::MalformedDocument, "layer document needs an input object");
  std::int64_t input_bytes = require_size(doc["input"].at("output_bytes"), "input output_bytes");
  int home = shell.find_device(doc["input"].at("home").get<std::string>());
  if (home < 0) raise(Errc::UnknownDevice, "input home device");

  std::vector<LayerSpec> layers;
  for (const auto& jl : doc["layers"]) {
    LayerSpec l;
    l.name = jl.at("name").get<std::string>();
    l.output_bytes = require_size(jl.at("output_bytes"), "layer " + l.name + " output_bytes");
    l.costs_ms = parse_costs(jl.at("costs_ms"), shell, "layer " + l.name);
    l.backward_output_bytes =
        require_size(jl.at("backward_output_bytes"), "layer " + l.name + " backward_output_bytes");
    l.backward_costs_ms =
        parse_costs(jl.at("backward_costs_ms"), shell, "layer " + l.name + " backward");
    layers.push_back(std::move(l));
  }

  Problem p = make_training_graph(shell.name, shell.devices, shell.copy_model, layers,
                                  input_bytes, home);
  if (doc.contains("edge_copy_ms")) {
    std::map<std::pair<int, int>, double> overrides;
    for (auto it = doc["edge_copy_ms"].begin(); it != doc["edge_copy_ms"].end(); ++it)
      overrides[parse_pair_key(it.key(), p)] = require_cost(it.value(), "edge_copy_ms");
    for (auto& e : p.edges) e.override_copy_ms = overrides;
  }
  return p;
}

}  // namespace

Problem load_problem(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& ex) {
    raise(Errc::MalformedDocument, ex.what());
  }
  if (!doc.is_object()) raise(Errc::MalformedDocument, "top level must be an object");
  try {
    if (doc.contains("layers")) return load_layered(doc);
    Problem p = load_direct(doc);
    p.copy_model = parse_links(doc, p);
    return p;
  } catch (const json::exception& ex) {
    raise(Errc::MalformedDocument, ex.what());
  }
}

Problem load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_problem(ss.str());
}

void validate_problem(const Problem& p) {
  const int T = p.op_count();
  if (T == 0) raise(Errc::EmptyNetwork, "problem has no operators");
  if (p.devices.empty()) raise(Errc::MalformedDocument, "problem has no devices");
  for (const auto& op : p.operators)
    if (static_cast<int>(op.costs_ms.size()) != p.device_count())
      raise(Errc::DimensionMismatch, "operator " + op.name + " cost vector size");
  std::set<std::pair<int, int>> seen;
  std::vector<int> indegree(static_cast<size_t>(T), 0);
  for (const auto& e : p.edges) {
    if (e.src < 0 || e.dst < 0 || e.src >= T || e.dst >= T)
      raise(Errc::MalformedDocument, "edge endpoint out of range");
    if (e.src >= e.dst)
      raise(Errc::NonTopologicalEdge, "edge " + std::to_string(e.src) + "->" +
                                          std::to_string(e.dst) + " violates index order");
    if (!seen.insert({e.src, e.dst}).second)
      raise(Errc::MalformedDocument, "duplicate edge " + std::to_string(e.src) + "->" +
                                         std::to_string(e.dst));
    indegree[static_cast<size_t>(e.dst)]++;
  }
  for (int v = 1; v < T; ++v)
    if (indegree[static_cast<size_t>(v)] == 0)
      raise(Errc::MalformedDocument,
            "operator " + std::to_string(v) + " has no incoming edge; only operator 0 is a source");
}

Problem make_training_graph(const std::string& name, std::vector<DeviceSpec> devices,
                            CopyLinkModel copy_model, const std::vector<LayerSpec>& layers,
                            std::int64_t input_bytes, int input_home) {
  if (layers.empty()) raise(Errc::EmptyNetwork, "training graph needs at least one layer");
  if (input_bytes <= 0) raise(Errc::NonPositiveSize, "input_bytes must be positive");
  const int D = static_cast<int>(devices.size());
  if (input_home < 0 || input_home >= D) raise(Errc::UnknownDevice, "input home index");
  const int L = static_cast<int>(layers.size());

  Problem p;
  p.name = name;
  p.devices = std::move(devices);
  p.copy_model = std::move(copy_model);

  OperatorNode input;
  input.name = "input";
  input.output_bytes = input_bytes;
  input.costs_ms.assign(static_cast<size_t>(D), kProhibitiveMs);
  input.costs_ms[static_cast<size_t>(input_home)] = 0.0;  // a reload, not a computation
  input.pinned_device = input_home;
  p.operators.push_back(std::move(input));

  auto checked_costs = [&](const std::vector<double>& c, const std::string& ctx) {
    if (static_cast<int>(c.size()) != D) raise(Errc::DimensionMismatch, ctx + " cost vector size");
    for (double v : c)
      if (v < 0.0) raise(Errc::NegativeCost, ctx + " cost");
    return c;
  };

  for (int k = 1; k <= L; ++k) {
    const auto& l = layers[static_cast<size_t>(k - 1)];
    OperatorNode fwd;
    fwd.name = l.name;
    if (l.output_bytes <= 0) raise(Errc::NonPositiveSize, "layer " + l.name + " output_bytes");
    fwd.output_bytes = l.output_bytes;
    fwd.costs_ms = checked_costs(l.costs_ms, "layer " + l.name);
    p.operators.push_back(std::move(fwd));
  }
  for (int k = L; k >= 1; --k) {
    const auto& l = layers[static_cast<size_t>(k - 1)];
    OperatorNode bwd;
    bwd.name = l.name + "'";
    if (l.backward_output_bytes <= 0)
      raise(Errc::NonPositiveSize, "layer " + l.name + " backward_output_bytes");
    bwd.output_bytes = l.backward_output_bytes;
    bwd.costs_ms = checked_costs(l.backward_costs_ms, "layer " + l.name + " backward");
    p.operators.push_back(std::move(bwd));
  }

  for (int k = 0; k < L; ++k) p.edges.push_back({k, k + 1, {}});  // forward chain
  for (int j = L + 1; j <= 2 * L; ++j) {
    const int k = 2 * L + 1 - j;              // layer whose backward sits at j
    p.edges.push_back({j - 1, j, {}});        // upstream gradient
    p.edges.push_back({k - 1, j, {}});        // saved forward tensor (input when k == 1)
  }

  validate_problem(p);
  return p;
}

std::int64_t save_all_budget(const Problem& p) {
  std::int64_t total = 0;
  for (const auto& op : p.operators) total += op.output_bytes;
  return total;
}

std::int64_t budget_percent(std::int64_t full, double pct) {
  if (!(pct > 0.0) || pct > 100.0)
    raise(Errc::PercentOutOfRange, "pct must be in (0, 100], got " + std::to_string(pct));
  if (full <= 0) raise(Errc::NonPositiveSize, "full budget must be positive");
  double ipart = 0.0;
  if (std::modf(pct, &ipart) == 0.0) {
    auto n = static_cast<std::int64_t>(ipart);
    return full * n / 100;  // exact integer path, keeps (full, 100) an identity
  }
  return static_cast<std::int64_t>(std::floor(static_cast<double>(full) * pct / 100.0));
}

double copy_cost(const Problem& p, const TensorEdge& e, int d, int d_to) {
  const int D = p.device_count();
  if (d < 0 || d_to < 0 || d >= D || d_to >= D) raise(Errc::DimensionMismatch, "device index");
  if (d == d_to) return 0.0;
  if (auto it = e.override_copy_ms.find({d, d_to}); it != e.override_copy_ms.end())
    return it->second;
  const LinkSpec* best = nullptr;
  int best_rank = -1;
  for (const auto& l : p.copy_model.links) {
    if ((l.from != -1 && l.from != d) || (l.to != -1 && l.to != d_to)) continue;
    int rank = (l.from == d ? 1 : 0) + (l.to == d_to ? 1 : 0);
    if (rank > best_rank) {
      best = &l;
      best_rank = rank;
    }
  }
  if (!best)
    raise(Errc::MissingLink, "no link covers " + p.devices[static_cast<size_t>(d)].id + "->" +
                                 p.devices[static_cast<size_t>(d_to)].id);
  return best->latency_ms +
         static_cast<double>(p.operators[static_cast<size_t>(e.src)].output_bytes) /
             best->bytes_per_ms;
}

Problem with_budgets(const Problem& p, const std::vector<std::int64_t>& budgets) {
  if (static_cast<int>(budgets.size()) != p.device_count())
    raise(Errc::DimensionMismatch, "budget vector size");
  Problem out = p;
  for (size_t d = 0; d < budgets.size(); ++d) {
    if (budgets[d] <= 0) raise(Errc::NonPositiveSize, "budget for device " + out.devices[d].id);
    out.devices[d].budget_bytes = budgets[d];
    if (out.devices[d].ram_bytes && *out.devices[d].ram_bytes < budgets[d])
      out.devices[d].ram_bytes = budgets[d];
  }
  return out;
}

}  // namespace xengine
