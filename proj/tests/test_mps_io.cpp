// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xengine/fixtures.hpp"
#include "xengine/mps_io.hpp"
#include "xengine/solver.hpp"

#include "test_support.hpp"

using namespace xengine;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) lines.push_back(l);
  return lines;
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> toks;
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

// Minimal MPS section walk shared by the lint checks.
struct MpsScan {
  std::vector<std::string> section_order;
  std::map<std::string, std::vector<std::string>> rows;  // sense -> names
  std::set<std::string> referenced_rows;                 // from COLUMNS + RHS
  std::vector<std::string> column_order;                 // first appearance
  std::set<std::string> bounded;
  std::set<std::string> integer_columns;
  int intorg = 0, intend = 0;
  std::vector<std::pair<std::string, std::string>> quadobj;  // (row var, col var)

  explicit MpsScan(const std::string& text) {
    std::string section;
    std::set<std::string> seen_cols;
    for (const std::string& line : lines_of(text)) {
      if (line.empty()) continue;
      if (line[0] != ' ') {
        section = tokens_of(line)[0];
        section_order.push_back(section);
        continue;
      }
      auto tok = tokens_of(line);
      if (section == "ROWS") {
        rows[tok[0]].push_back(tok[1]);
      } else if (section == "COLUMNS") {
        if (tok.size() >= 3 && tok[1] == "'MARKER'") {
          if (tok[2] == "'INTORG'") ++intorg;
          if (tok[2] == "'INTEND'") ++intend;
          continue;
        }
        if (seen_cols.insert(tok[0]).second) {
          column_order.push_back(tok[0]);
          if (intorg > intend) integer_columns.insert(tok[0]);
        }
        for (size_t i = 1; i + 1 < tok.size(); i += 2) referenced_rows.insert(tok[i]);
      } else if (section == "RHS") {
        for (size_t i = 1; i + 1 < tok.size(); i += 2) referenced_rows.insert(tok[i]);
      } else if (section == "BOUNDS") {
        bounded.insert(tok[2]);
      } else if (section == "QUADOBJ") {
        quadobj.emplace_back(tok[0], tok[1]);
      }
    }
  }
};

}  // namespace

TEST_CASE("format_number is stable and minimal") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(-3.0) == "-3");
  CHECK(format_number(2.5) == "2.5");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1e9) == "1000000000");
  CHECK(format_number(12582912.0) == "12582912");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");

  for (double v : {0.1, 1.0 / 3.0, 1e-9, 123456.789, 0.25, 2.0 / 7.0}) {
    CAPTURE(v);
    CHECK(std::stod(format_number(v)) == v);
  }
}

TEST_CASE("variable names round trip") {
  std::vector<VarRef> refs{var_r(0, 1, 2), var_s(1, 6, 3), var_z(0, 0, 0),
                           var_f(1, 3, 15), var_u(0, 2, 2), var_p(4, 8, 0, 1)};
  for (const VarRef& v : refs) {
    auto back = parse_var_name(var_name(v));
    REQUIRE(back.has_value());
    CHECK(*back == v);
  }
  CHECK(var_name(var_r(0, 1, 2)) == "R_0_1_2");
  CHECK(var_name(var_p(4, 8, 0, 1)) == "P_4_8_0_1");

  CHECK_FALSE(parse_var_name("").has_value());
  CHECK_FALSE(parse_var_name("Q_0_0_0").has_value());
  CHECK_FALSE(parse_var_name("R_0_0").has_value());
  CHECK_FALSE(parse_var_name("R_0_0_x").has_value());
  CHECK_FALSE(parse_var_name("P_0_0_0").has_value());
  CHECK_FALSE(parse_var_name("R_0_0_0_0").has_value());
}

TEST_CASE("chain3 MPS matches the golden file") {
  std::string text = write_mps(build_model(make_chain3()));
  CHECK(text == testsup::read_file(testsup::data_path("f1_golden.mps")));
  CHECK(text == write_mps(build_model(make_chain3())));  // deterministic
}

TEST_CASE("MPS structure lint") {
  for (const char* fixture : {"f1", "f2"}) {
    CAPTURE(fixture);
    Problem p = std::string(fixture) == "f1" ? make_chain3() : make_fig2();
    MilpModel m = build_model(p);
    std::string text = write_mps(m);
    MpsScan scan(text);

    CHECK(scan.section_order == std::vector<std::string>{"NAME", "ROWS", "COLUMNS", "RHS",
                                                         "BOUNDS", "ENDATA"});
    CHECK(lines_of(text).front() == "NAME XENGINE");
    CHECK(lines_of(text).back() == "ENDATA");

    // Exactly one objective row and one integer marker pair.
    REQUIRE(scan.rows.count("N"));
    CHECK(scan.rows["N"].size() == 1);
    CHECK(scan.intorg == 1);
    CHECK(scan.intend == 1);

    // No orphan rows: every constraint row is referenced by some column.
    size_t constraint_rows = 0;
    for (const auto& [sense, names] : scan.rows) {
      if (sense == "N") continue;
      constraint_rows += names.size();
      for (const std::string& r : names) CHECK(scan.referenced_rows.count(r));
    }
    CHECK(constraint_rows == m.constraints.size());

    // Every column carries a bound; binaries are inside the marker block.
    CHECK(scan.column_order.size() == scan.bounded.size());
    for (const std::string& name : scan.column_order) {
      CHECK(scan.bounded.count(name));
      auto ref = parse_var_name(name);
      REQUIRE(ref.has_value());
      bool integral = m.is_binary(ref->family);
      CHECK(scan.integer_columns.count(name) == (integral ? 1u : 0u));
    }

    // Binary columns are contiguous: one marker pair covers them all.
    bool seen_continuous_after_int = false;
    bool in_int = false;
    for (const std::string& name : scan.column_order) {
      bool integral = scan.integer_columns.count(name) > 0;
      if (integral) {
        CHECK_FALSE(seen_continuous_after_int);
        in_int = true;
      } else if (in_int) {
        seen_continuous_after_int = true;
      }
    }
  }
}

TEST_CASE("quadratic serialization swaps P columns for QUADOBJ") {
  Problem p = make_fig2();
  ModelOptions opts;
  opts.quadratic_objective = true;
  MilpModel m = build_model(p, opts);
  std::string text = write_mps(m);
  MpsScan scan(text);

  CHECK(scan.section_order == std::vector<std::string>{"NAME", "ROWS", "COLUMNS", "RHS",
                                                       "BOUNDS", "QUADOBJ", "ENDATA"});
  for (const std::string& name : scan.column_order) CHECK(name.substr(0, 2) != "P_");
  for (const auto& names : scan.rows) {
    for (const std::string& r : names.second) CHECK(r.substr(0, 6) != "P_LINK");
  }
  REQUIRE(scan.quadobj.size() == m.quad.size());
  // Each entry pairs the computing R with the source-device Z.
  CHECK(scan.quadobj.front().first[0] == 'R');
  CHECK(scan.quadobj.front().second[0] == 'Z');

  // The linear form still carries the P machinery.
  MpsScan linear(write_mps(build_model(p)));
  bool has_p = false;
  for (const std::string& name : linear.column_order) has_p |= name.substr(0, 2) == "P_";
  CHECK(has_p);
}

TEST_CASE("parse_solution accepts both solver layouts") {
  MilpModel m = build_model(make_chain3());

  SUBCASE("bare pairs") {
    Assignment a = parse_solution("R_0_0_0 1\nU_0_0_0 4194304\n", m);
    CHECK(a.at(var_r(0, 0, 0)) == 1.0);
    CHECK(a.at(var_u(0, 0, 0)) == 4194304.0);
    CHECK(a.at(var_r(0, 1, 1)) == 0.0);  // absent defaults to zero
    CHECK_FALSE(a.objective_reported.has_value());
  }

  SUBCASE("tabular CBC layout with banner") {
    std::string text =
        "Optimal - objective value 9.00000000\n"
        "      0 R_0_0_0               1                       2\n"
        "      5 U_0_0_0         4194304                       0\n";
    Assignment a = parse_solution(text, m);
    CHECK(a.at(var_r(0, 0, 0)) == 1.0);
    CHECK(a.at(var_u(0, 0, 0)) == 4194304.0);
    REQUIRE(a.objective_reported.has_value());
    CHECK(*a.objective_reported == 9.0);
  }

  SUBCASE("objective comment") {
    Assignment a = parse_solution("# objective 9.5\nR_0_0_0 1\n", m);
    REQUIRE(a.objective_reported.has_value());
    CHECK(*a.objective_reported == 9.5);
  }

  SUBCASE("near-integral binaries are rounded") {
    Assignment a = parse_solution("R_0_0_0 0.99999995\nS_0_1_0 1.00000002\n", m);
    CHECK(a.at(var_r(0, 0, 0)) == 1.0);
    CHECK(a.at(var_s(0, 1, 0)) == 1.0);
  }

  SUBCASE("fractional binaries are rejected") {
    CHECK_THROWS_AS(parse_solution("R_0_0_0 0.5\n", m), Error);
  }

  SUBCASE("unknown variables outside the space") {
    CHECK_THROWS_AS(parse_solution("R_9_9_9 1\n", m), Error);
  }

  SUBCASE("non-variable words are banners, not errors") {
    Assignment a = parse_solution("Status reading finished\nR_0_0_0 1\n", m);
    CHECK(a.at(var_r(0, 0, 0)) == 1.0);
  }

  SUBCASE("infeasible banner") {
    try {
      parse_solution("Infeasible - objective value 0\n", m);
      FAIL("expected InfeasibleMarker");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InfeasibleMarker);
    }
  }

  SUBCASE("empty file") {
    try {
      parse_solution("# nothing here\n", m);
      FAIL("expected EmptySolution");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EmptySolution);
    }
  }
}

TEST_CASE("format_solution round trips through parse_solution") {
  Problem p = make_fig2();
  MilpModel m = build_model(p);
  Solution sol = solve_exact(p);
  REQUIRE(sol.status == SolveStatus::Optimal);

  std::string text = format_solution(sol.assignment);
  Assignment back = parse_solution(text, m);
  REQUIRE(back.objective_reported.has_value());
  CHECK(*back.objective_reported == sol.objective_ms);
  for (const auto& [ref, value] : sol.assignment.values) CHECK(back.at(ref) == value);
  for (const auto& [ref, value] : back.values) CHECK(sol.assignment.at(ref) == value);

  CHECK(format_solution(sol.assignment) == text);  // deterministic
}
