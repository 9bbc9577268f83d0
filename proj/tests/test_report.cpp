// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "xengine/fixtures.hpp"
#include "xengine/report.hpp"
#include "xengine/schedule.hpp"
#include "xengine/solver.hpp"

#include "test_support.hpp"

using namespace xengine;

namespace {
constexpr std::int64_t kMiB = 1024 * 1024;

size_t count_of(const std::string& text, const std::string& needle) {
  size_t n = 0;
  for (size_t at = text.find(needle); at != std::string::npos; at = text.find(needle, at + 1)) ++n;
  return n;
}
}  // namespace

TEST_CASE("improvement percentages") {
  CHECK(format_improvement(106.1, 209.1, 99.9) == "(-5.8)");
  CHECK(format_improvement(54.8, 56.6, 46.4) == "(-15.3)");
  CHECK(format_improvement(100.0, 100.0, 110.0) == "(+10.0)");
  CHECK(format_improvement(100.0, 200.0, 100.0) == "(-0)");
  CHECK(format_improvement(100.0, 200.0, 100.04) == "(-0)");  // rounds to zero
  CHECK(format_improvement(100.0, 200.0, 99.94) == "(-0.1)");  // first nonzero tenth
  CHECK(format_improvement(200.0, 100.0, 50.0) == "(-50.0)");

  CHECK_THROWS_AS(format_improvement(0.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(format_improvement(1.0, -2.0, 1.0), Error);
  CHECK_THROWS_AS(format_improvement(1.0, 1.0, 0.0), Error);
}

TEST_CASE("improvement tables match the golden files") {
  std::vector<ImprovementRow> rows{{"unet", 106.1, 209.1, 99.9}, {"vgg", 54.8, 56.6, 46.4}};
  CHECK(improvement_table(rows) == testsup::read_file(testsup::data_path("improvement_golden.txt")));
  CHECK(improvement_table(rows, TableFormat::Csv) ==
        testsup::read_file(testsup::data_path("improvement_golden.csv")));
  CHECK(improvement_table(rows) == improvement_table(rows));  // deterministic
}

TEST_CASE("csv table carries bare percent values") {
  std::vector<ImprovementRow> rows{{"one", 10.0, 20.0, 9.0}};
  std::string csv = improvement_table(rows, TableFormat::Csv);
  CHECK(csv.rfind("case,cpu_ms,gpu_ms,combined_ms,percent\n", 0) == 0);
  CHECK(csv.find("one,10,20,9,-10") != std::string::npos);
  CHECK(csv.find('(') == std::string::npos);
}

TEST_CASE("schedule grid: one matrix per device and family") {
  Problem p = make_fig2();
  Solution sol = solve_exact(p);
  std::string svg = render_schedule_svg(sol.assignment, p);

  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("R_0 (cpu)") != std::string::npos);
  CHECK(svg.find("R_1 (gpu)") != std::string::npos);
  CHECK(svg.find("S_0 (cpu)") != std::string::npos);
  CHECK(svg.find("S_1 (gpu)") != std::string::npos);
  // All R grids precede all S grids.
  CHECK(svg.find("R_1 (gpu)") < svg.find("S_0 (cpu)"));

  // No recomputation on this optimum: the recompute color is absent.
  CHECK(svg.find("#d62728") == std::string::npos);

  CHECK(render_schedule_svg(sol.assignment, p) == svg);  // deterministic
}

TEST_CASE("schedule grid marks recomputations") {
  Problem p = make_chain_lowmem();
  std::int64_t low = budget_percent(save_all_budget(p), 25.0);
  Solution sol = solve_exact(p, {}, {low});
  REQUIRE(sol.status == SolveStatus::Optimal);
  std::string svg = render_schedule_svg(sol.assignment, p);
  CHECK(svg.find("#d62728") != std::string::npos);
}

TEST_CASE("schedule grid rejects out-of-range keys and bad specs") {
  Problem p = make_chain3();
  Assignment a = save_all_assignment(p, {0, 0, 0});

  Assignment out_of_range = a;
  out_of_range.set(var_r(0, 0, 5), 1.0);
  CHECK_THROWS_AS(render_schedule_svg(out_of_range, p), Error);

  FigureSpec bad;
  bad.cell_px = 0;
  CHECK_THROWS_AS(render_schedule_svg(a, p, bad), Error);
}

TEST_CASE("memory figure: one polyline per series plus budget rules") {
  Problem p = make_fig2();
  Solution sol = solve_exact(p);
  Trace tr = replay(decode(sol.assignment, p), p, {}, sol.assignment);

  std::vector<std::pair<std::string, MemorySeries>> traces{
      {"cpu", memory_timeline(tr, 0)}, {"gpu", memory_timeline(tr, 1)}};
  std::vector<std::pair<std::string, std::int64_t>> budgets{{"cpu", 64 * kMiB},
                                                            {"gpu", 64 * kMiB}};
  std::string svg = render_memory_svg(traces, budgets);

  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count_of(svg, "<polyline") == 2);
  CHECK(count_of(svg, "stroke-dasharray") == 2);
  CHECK(svg.find("cpu") != std::string::npos);
  CHECK(svg.find("MiB") != std::string::npos);
  CHECK(render_memory_svg(traces, budgets) == svg);  // deterministic

  // Budgets are optional; the polylines stand alone.
  std::string bare = render_memory_svg(traces, {});
  CHECK(count_of(bare, "stroke-dasharray") == 0);
}

TEST_CASE("memory figure refuses empty input") {
  CHECK_THROWS_AS(render_memory_svg({}, {}), Error);
  std::vector<std::pair<std::string, MemorySeries>> traces{{"cpu", {}}};
  CHECK_THROWS_AS(render_memory_svg(traces, {}), Error);
}

TEST_CASE("figure labels are escaped") {
  Problem p = make_chain3();
  Solution sol = solve_exact(p);
  Trace tr = replay(decode(sol.assignment, p), p, {}, sol.assignment);
  std::vector<std::pair<std::string, MemorySeries>> traces{{"a<b&c", memory_timeline(tr, 0)}};
  std::string svg = render_memory_svg(traces, {});
  CHECK(svg.find("a<b&c") == std::string::npos);
  CHECK(svg.find("a&lt;b&amp;c") != std::string::npos);
}
