// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: build -> solve -> decode -> validate -> simulate ->
// render -> report, plus the budget sweep. Exit codes: 0 success, 2 infeasible,
// 3 limit reached, 4 input error, 5 external-solver error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xengine/errors.hpp"
#include "xengine/model.hpp"
#include "xengine/mps_io.hpp"
#include "xengine/problem.hpp"
#include "xengine/report.hpp"
#include "xengine/schedule.hpp"
#include "xengine/solver.hpp"

namespace fs = std::filesystem;
using namespace xengine;

namespace {

constexpr int kOk = 0;
constexpr int kInfeasible = 2;
constexpr int kLimit = 3;
constexpr int kInputError = 4;
constexpr int kSolverError = 5;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot write " + path);
  out << text;
  if (!out) raise(Errc::IoError, "short write to " + path);
}

// Sink for single-artifact subcommands: --out file when given, else stdout.
void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text;
  else
    write_file(out_path, text);
}

// "12582912", "3MiB", "0.5GiB", "64KiB" -> bytes.
std::int64_t parse_byte_size(const std::string& text) {
  size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    raise(Errc::MalformedDocument, "bad byte size '" + text + "'");
  }
  std::string suffix = text.substr(pos);
  double scale = 1.0;
  if (suffix == "KiB")
    scale = 1024.0;
  else if (suffix == "MiB")
    scale = 1024.0 * 1024.0;
  else if (suffix == "GiB")
    scale = 1024.0 * 1024.0 * 1024.0;
  else if (!suffix.empty() && suffix != "B")
    raise(Errc::MalformedDocument, "bad byte suffix '" + suffix + "' in '" + text + "'");
  double bytes = value * scale;
  if (!(bytes >= 0))
    raise(Errc::MalformedDocument, "negative byte size '" + text + "'");
  return static_cast<std::int64_t>(bytes + 0.5);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  return parts;
}

// Objective printed with an explicit decimal marker: 9 -> "9.0".
std::string objective_text(double v) {
  std::string s = format_number(v);
  if (s.find_first_of(".eE") == std::string::npos &&
      s.find_first_of("0123456789") != std::string::npos)
    s += ".0";
  return s;
}

// Flags shared by the solving subcommands.
struct CommonArgs {
  std::string problem_path;
  std::string budget;         // absolute, comma list or broadcast single
  double budget_pct = -1.0;   // --budget-percent
  std::string backend = "exact";
  std::string solver_cmd;
  bool strict_free = false;
  bool quadratic = false;
  double alpha = 0.0;
  bool alpha_set = false;
  std::int64_t node_limit = -1;
  std::int64_t time_limit_ms = -1;
  std::string out;
};

void add_problem_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--problem", a.problem_path, "problem document (JSON)")
      ->required();
  auto* abs = cmd->add_option("--budget", a.budget,
                              "per-device byte budgets, comma separated; one value "
                              "broadcasts (suffixes KiB/MiB/GiB)");
  cmd->add_option("--budget-percent", a.budget_pct,
                  "uniform budget as a percentage of each device's save-all bytes")
      ->excludes(abs);
  cmd->add_flag("--strict-free", a.strict_free,
                "free hazards count later consumers on all devices");
  cmd->add_option("--alpha", a.alpha, "energy weight override")
      ->each([&a](const std::string&) { a.alpha_set = true; });
}

void add_solver_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--backend", a.backend, "exact | external")
      ->check(CLI::IsMember({"exact", "external"}));
  cmd->add_option("--solver-cmd", a.solver_cmd,
                  "external solver template with {mps} and {sol} placeholders")
      ->envname("XENGINE_SOLVER_CMD");
  cmd->add_option("--node-limit", a.node_limit, "search node budget");
  cmd->add_option("--time-limit-ms", a.time_limit_ms, "search wall-clock budget");
}

// The effective problem: document budgets overridden by --budget / --budget-percent.
Problem effective_problem(const CommonArgs& a) {
  Problem p = load_problem(read_file(a.problem_path));
  if (a.budget_pct >= 0) {
    std::vector<std::int64_t> budgets;
    budgets.reserve(p.devices.size());
    std::int64_t full = save_all_budget(p);
    for (size_t d = 0; d < p.devices.size(); ++d)
      budgets.push_back(budget_percent(full, a.budget_pct));
    return with_budgets(p, budgets);
  }
  if (!a.budget.empty()) {
    std::vector<std::int64_t> budgets;
    for (const std::string& part : split(a.budget, ','))
      budgets.push_back(parse_byte_size(part));
    if (budgets.size() == 1)
      budgets.assign(p.devices.size(), budgets[0]);
    return with_budgets(p, budgets);
  }
  return p;
}

ModelOptions effective_options(const CommonArgs& a, const Problem& p) {
  ModelOptions opts;
  opts.strict_free = a.strict_free;
  opts.quadratic_objective = a.quadratic;
  opts.energy = parse_energy(read_file(a.problem_path), p);
  if (a.alpha_set) {
    if (!opts.energy)
      raise(Errc::IncompleteEnergyTable,
            "--alpha given but the problem document has no energy section");
    opts.energy->alpha = a.alpha;
  }
  return opts;
}

SearchLimits effective_limits(const CommonArgs& a) {
  SearchLimits lim;
  if (a.node_limit >= 0) lim.node_limit = a.node_limit;
  if (a.time_limit_ms >= 0) lim.time_limit_ms = a.time_limit_ms;
  return lim;
}

// Artifact directory for solve/oracle: --out, else $XENGINE_WORKDIR, else ".".
std::string work_dir(const CommonArgs& a) {
  if (!a.out.empty()) return a.out;
  if (const char* env = std::getenv("XENGINE_WORKDIR"); env && *env) return env;
  return ".";
}

Solution run_solver(const CommonArgs& a, const Problem& p, const ModelOptions& opts) {
  if (a.backend == "external") {
    if (a.solver_cmd.empty())
      raise(Errc::ExternalSolverUnavailable,
            "no --solver-cmd and XENGINE_SOLVER_CMD is unset");
    fs::create_directories(work_dir(a));
    return solve_external(p, opts, {}, a.solver_cmd, work_dir(a));
  }
  return solve_exact(p, opts, {}, effective_limits(a));
}

void write_artifacts(const std::string& dir, const Problem& p, const ModelOptions& opts,
                     const Solution& sol) {
  fs::create_directories(dir);
  MilpModel m = build_model(p, opts);
  write_file(dir + "/model.mps", write_mps(m));
  write_file(dir + "/solution.txt", format_solution(sol.assignment));
  Schedule s = decode(sol.assignment, p);
  write_file(dir + "/schedule.txt", format_schedule(s));
  Trace tr = replay(s, p, opts, sol.assignment);
  write_file(dir + "/trace.csv", trace_csv(tr, p));
}

int finish_solve(const CommonArgs& a, const Problem& p, const ModelOptions& opts,
                 const Solution& sol, bool artifacts) {
  if (sol.status == SolveStatus::Infeasible) {
    std::cerr << "infeasible: no assignment satisfies the budgets\n";
    if (artifacts) {
      fs::create_directories(work_dir(a));
      write_file(work_dir(a) + "/model.mps", write_mps(build_model(p, opts)));
    }
    return kInfeasible;
  }
  if (sol.status == SolveStatus::LimitReached && sol.assignment.values.empty()) {
    std::cerr << "limit reached before any feasible assignment was found\n";
    return kLimit;
  }
  if (artifacts) write_artifacts(work_dir(a), p, opts, sol);
  std::cout << objective_text(sol.objective_ms) << "\n";
  if (sol.status == SolveStatus::LimitReached) {
    std::cerr << "limit reached; objective is the best incumbent, not proven optimal\n";
    return kLimit;
  }
  return kOk;
}

int cmd_build(const CommonArgs& a) {
  Problem p = effective_problem(a);
  ModelOptions opts = effective_options(a, p);
  emit(a.out, write_mps(build_model(p, opts)));
  return kOk;
}

int cmd_solve(const CommonArgs& a) {
  Problem p = effective_problem(a);
  ModelOptions opts = effective_options(a, p);
  return finish_solve(a, p, opts, run_solver(a, p, opts), /*artifacts=*/true);
}

int cmd_oracle(const CommonArgs& a) {
  Problem p = effective_problem(a);
  ModelOptions opts = effective_options(a, p);
  Solution sol = assignment_oracle(p);
  return finish_solve(a, p, opts, sol, /*artifacts=*/!a.out.empty());
}

int cmd_decode(const CommonArgs& a, const std::string& solution_path) {
  Problem p = effective_problem(a);
  ModelOptions opts = effective_options(a, p);
  MilpModel m = build_model(p, opts);
  Assignment asg = parse_solution(read_file(solution_path), m);
  emit(a.out, format_schedule(decode(asg, p)));
  return kOk;
}

int cmd_validate(const CommonArgs& a, const std::string& schedule_path) {
  Problem p = effective_problem(a);
  Schedule s = parse_schedule(read_file(schedule_path), p);
  ValidationReport rep = validate(s, p);
  if (rep.ok()) {
    std::cout << "ok\n";
    return kOk;
  }
  for (const Violation& v : rep.violations) {
    std::cout << violation_name(v.kind) << " t=" << v.timestep << " slot=" << v.slot;
    if (v.device >= 0) std::cout << " d=" << p.devices[v.device].id;
    if (v.kind == ViolationKind::BudgetExceeded) std::cout << " bytes=" << v.bytes;
    std::cout << " " << v.detail << "\n";
  }
  return kInputError;
}

int cmd_simulate(const CommonArgs& a, const std::string& schedule_path) {
  Problem p = effective_problem(a);
  ModelOptions opts = effective_options(a, p);
  Schedule s = parse_schedule(read_file(schedule_path), p);
  Trace tr = replay(s, p, opts);
  std::cout << "total_action_ms " << objective_text(tr.total_action_ms) << "\n";
  std::cout << "eq1_objective_ms " << objective_text(tr.eq1_objective_ms) << "\n";
  for (size_t d = 0; d < p.devices.size(); ++d)
    std::cout << "peak_bytes " << p.devices[d].id << " " << tr.peaks[d] << "\n";
  if (!a.out.empty()) write_file(a.out, trace_csv(tr, p));
  return kOk;
}

int cmd_render(const CommonArgs& a, const std::string& solution_path, bool memory) {
  Problem p = effective_problem(a);
  ModelOptions opts = effective_options(a, p);
  MilpModel m = build_model(p, opts);
  Assignment asg = parse_solution(read_file(solution_path), m);
  if (!memory) {
    emit(a.out, render_schedule_svg(asg, p));
    return kOk;
  }
  Trace tr = replay(decode(asg, p), p, opts, asg);
  std::vector<std::pair<std::string, MemorySeries>> traces;
  std::vector<std::pair<std::string, std::int64_t>> budgets;
  for (size_t d = 0; d < p.devices.size(); ++d) {
    traces.emplace_back(p.devices[d].id, memory_timeline(tr, static_cast<int>(d)));
    budgets.emplace_back(p.devices[d].id, p.devices[d].budget_bytes);
  }
  emit(a.out, render_memory_svg(traces, budgets));
  return kOk;
}

int cmd_report(const std::vector<std::string>& row_args, bool csv, const std::string& out) {
  std::vector<ImprovementRow> rows;
  for (const std::string& raw : row_args) {
    std::vector<std::string> f = split(raw, ',');
    if (f.size() != 4)
      raise(Errc::MalformedDocument, "--row wants label,cpu_ms,gpu_ms,combined_ms: " + raw);
    try {
      rows.push_back({f[0], std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
    } catch (const std::exception&) {
      raise(Errc::MalformedDocument, "bad number in --row '" + raw + "'");
    }
  }
  emit(out, improvement_table(rows, csv ? TableFormat::Csv : TableFormat::Text));
  return kOk;
}

int cmd_sweep(const CommonArgs& a, const std::string& grid_text) {
  Problem base = load_problem(read_file(a.problem_path));
  std::vector<double> grid;
  for (const std::string& part : split(grid_text, ',')) {
    try {
      grid.push_back(std::stod(part));
    } catch (const std::exception&) {
      raise(Errc::MalformedDocument, "bad percentage '" + part + "' in --grid");
    }
  }
  std::int64_t full = save_all_budget(base);
  std::ostringstream table;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %-14s %-10s %-12s %s\n", "percent",
                "budget_bytes", "status", "objective", "recomputes");
  table << line;
  for (double pct : grid) {
    std::int64_t budget = budget_percent(full, pct);
    Problem p = with_budgets(base, std::vector<std::int64_t>(base.devices.size(), budget));
    ModelOptions opts = effective_options(a, p);
    CommonArgs point = a;
    point.out.clear();  // per-point artifacts are not written
    Solution sol = run_solver(point, p, opts);
    std::string objective = "-";
    std::string recomputes = "-";
    if (sol.status != SolveStatus::Infeasible && !sol.assignment.values.empty()) {
      objective = objective_text(sol.objective_ms);
      int t = static_cast<int>(p.operators.size());
      int ones = 0;
      for (const auto& [ref, value] : sol.assignment.values)
        if (ref.family == VarFamily::R && value > 0.5) ++ones;
      recomputes = std::to_string(ones - t);
    }
    std::snprintf(line, sizeof line, "%-8s %-14lld %-10s %-12s %s\n",
                  format_number(pct).c_str(), static_cast<long long>(budget),
                  status_name(sol.status), objective.c_str(), recomputes.c_str());
    table << line;
  }
  std::cout << table.str();
  if (!a.out.empty()) write_file(a.out, table.str());
  return kOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"tensor rematerialization and device placement planner"};
  app.require_subcommand(1);

  CommonArgs a;
  std::string solution_path, schedule_path, grid = "100,90,80,65,50,35,25";
  std::vector<std::string> row_args;
  bool memory = false, csv = false;

  CLI::App* build = app.add_subcommand("build", "emit the MILP as an MPS file");
  add_problem_flags(build, a);
  build->add_flag("--quadratic-mps", a.quadratic, "QUADOBJ copy costs instead of P columns");
  build->add_option("--out", a.out, "output file (default stdout)");

  CLI::App* solve = app.add_subcommand("solve", "solve and write solution/schedule/trace");
  add_problem_flags(solve, a);
  add_solver_flags(solve, a);
  solve->add_option("--out", a.out, "artifact directory (default $XENGINE_WORKDIR or .)");

  CLI::App* oracle = app.add_subcommand("oracle", "exhaustive placement oracle objective");
  add_problem_flags(oracle, a);
  oracle->add_option("--out", a.out, "artifact directory (none by default)");

  CLI::App* decode_cmd = app.add_subcommand("decode", "solution file -> schedule text");
  add_problem_flags(decode_cmd, a);
  decode_cmd->add_option("--solution", solution_path, "solver solution file")->required();
  decode_cmd->add_option("--out", a.out, "output file (default stdout)");

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a schedule's legality");
  add_problem_flags(validate_cmd, a);
  validate_cmd->add_option("--schedule", schedule_path, "schedule text file")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "replay a schedule, report costs");
  add_problem_flags(simulate, a);
  simulate->add_option("--schedule", schedule_path, "schedule text file")->required();
  simulate->add_option("--out", a.out, "trace CSV file (none by default)");

  CLI::App* render = app.add_subcommand("render", "solution -> SVG figure");
  add_problem_flags(render, a);
  render->add_option("--solution", solution_path, "solver solution file")->required();
  render->add_flag("--memory", memory, "memory polylines instead of the R/S grids");
  render->add_option("--out", a.out, "output file (default stdout)");

  CLI::App* report = app.add_subcommand("report", "improvement table from time rows");
  report->add_option("--row", row_args, "label,cpu_ms,gpu_ms,combined_ms (repeatable)")
      ->required();
  report->add_flag("--csv", csv, "CSV instead of aligned text");
  report->add_option("--out", a.out, "output file (default stdout)");

  CLI::App* sweep = app.add_subcommand("sweep", "objective-vs-budget table over percentages");
  add_problem_flags(sweep, a);
  add_solver_flags(sweep, a);
  sweep->add_option("--grid", grid, "comma-separated budget percentages");
  sweep->add_option("--out", a.out, "table file (also printed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  if (build->parsed()) return cmd_build(a);
  if (solve->parsed()) return cmd_solve(a);
  if (oracle->parsed()) return cmd_oracle(a);
  if (decode_cmd->parsed()) return cmd_decode(a, solution_path);
  if (validate_cmd->parsed()) return cmd_validate(a, schedule_path);
  if (simulate->parsed()) return cmd_simulate(a, schedule_path);
  if (render->parsed()) return cmd_render(a, solution_path, memory);
  if (report->parsed()) return cmd_report(row_args, csv, a.out);
  if (sweep->parsed()) return cmd_sweep(a, grid);
  return kInputError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const Error& e) {
    std::cerr << "xengine: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::ExternalSolverUnavailable:
      case Errc::SolverFailed:
      case Errc::UnparsableSolution:
      case Errc::InfeasibleMarker:
      case Errc::ObjectiveMismatch:
        return kSolverError;
      case Errc::InfeasibleProblem:
        return kInfeasible;
      default:
        return kInputError;
    }
  } catch (const std::exception& e) {
    std::cerr << "xengine: " << e.what() << "\n";
    return kInputError;
  }
}
