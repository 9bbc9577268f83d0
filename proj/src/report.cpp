// SPDX-License-Identifier: Apache-2.0
#include "xengine/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "xengine/mps_io.hpp"

namespace xengine {

namespace {

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

std::string num(double v) { return format_number(v); }

void check_spec(const FigureSpec& spec) {
  if (spec.cell_px <= 0) raise(Errc::DimensionMismatch, "cell_px must be positive");
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#8c564b", "#e377c2", "#17becf", "#bcbd22"};

}  // namespace

std::string render_schedule_svg(const Assignment& a, const Problem& p, const FigureSpec& spec) {
  check_spec(spec);
  validate_problem(p);
  const int D = p.device_count(), T = p.op_count();
  for (const auto& [ref, val] : a.values) {
    (void)val;
    if (ref.family != VarFamily::R && ref.family != VarFamily::S) continue;
    if (ref.a < 0 || ref.a >= D || ref.b < 0 || ref.b >= T || ref.c < 0 || ref.c >= T)
      raise(Errc::DimensionMismatch, "assignment indexes a different problem shape");
  }

  const int cell = spec.cell_px;
  const int ml = 24, mt = 28, gap = 24, mb = 30;
  const int grid_w = T * cell;
  const int grids = 2 * D;
  const int width = ml + grids * grid_w + (grids - 1) * gap + 8;
  const int height = mt + T * cell + mb;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) +
                    "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
                    "\">\n";
  svg += "<rect width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" fill=\"#ffffff\"/>\n";

  for (int g = 0; g < grids; ++g) {
    const bool is_r = g < D;
    const int d = is_r ? g : g - D;
    const int x0 = ml + g * (grid_w + gap);
    const std::string caption =
        std::string(is_r ? "R_" : "S_") + std::to_string(d) + " (" +
        esc(p.devices[static_cast<size_t>(d)].id) + ")";
    svg += "<text x=\"" + std::to_string(x0) + "\" y=\"" + std::to_string(mt - 8) +
           "\" font-family=\"monospace\" font-size=\"12\">" + caption + "</text>\n";
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < T; ++i) {
        const double val = a.at(is_r ? var_r(d, t, i) : var_s(d, t, i));
        if (val <= 0.5) continue;
        const std::string& color =
            !is_r ? spec.save_color : (t > i ? spec.recompute_color : spec.compute_color);
        svg += "<rect x=\"" + std::to_string(x0 + i * cell) + "\" y=\"" +
               std::to_string(mt + t * cell) + "\" width=\"" + std::to_string(cell) +
               "\" height=\"" + std::to_string(cell) + "\" fill=\"" + color + "\"/>\n";
      }
    for (int k = 0; k <= T; ++k) {
      svg += "<line x1=\"" + std::to_string(x0) + "\" y1=\"" + std::to_string(mt + k * cell) +
             "\" x2=\"" + std::to_string(x0 + grid_w) + "\" y2=\"" +
             std::to_string(mt + k * cell) + "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
      svg += "<line x1=\"" + std::to_string(x0 + k * cell) + "\" y1=\"" + std::to_string(mt) +
             "\" x2=\"" + std::to_string(x0 + k * cell) + "\" y2=\"" +
             std::to_string(mt + T * cell) + "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
    }
  }
  svg += "<text x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(height - 10) +
         "\" font-family=\"monospace\" font-size=\"12\">" + esc(spec.x_label) + " →, " +
         esc(spec.y_label) + " ↓</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::string render_memory_svg(const std::vector<std::pair<std::string, MemorySeries>>& traces,
                              const std::vector<std::pair<std::string, std::int64_t>>& budgets,
                              const FigureSpec& spec) {
  check_spec(spec);
  if (traces.empty()) raise(Errc::EmptySeries, "no memory series to render");
  for (const auto& [label, series] : traces)
    if (series.empty()) raise(Errc::EmptySeries, "series '" + label + "' is empty");

  const double mib = 1024.0 * 1024.0;
  int max_t = 0;
  double max_mib = 0.0;
  for (const auto& [label, series] : traces) {
    (void)label;
    for (const auto& [t, bytes] : series) {
      max_t = std::max(max_t, t);
      max_mib = std::max(max_mib, static_cast<double>(bytes) / mib);
    }
  }
  for (const auto& [label, bytes] : budgets) {
    (void)label;
    max_mib = std::max(max_mib, static_cast<double>(bytes) / mib);
  }
  if (max_mib <= 0.0) max_mib = 1.0;

  const int ml = 56, mt = 16, mr = 120, mb = 44;
  const int plot_w = 480, plot_h = 240;
  const int width = ml + plot_w + mr, height = mt + plot_h + mb;
  const double xstep = max_t > 0 ? static_cast<double>(plot_w) / max_t : 0.0;
  const double yscale = plot_h / max_mib;
  auto xpos = [&](int t) { return ml + xstep * t; };
  auto ypos = [&](double v_mib) { return mt + plot_h - v_mib * yscale; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) +
                    "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
                    "\">\n";
  svg += "<rect width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" fill=\"#ffffff\"/>\n";
  svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt) + "\" x2=\"" +
         std::to_string(ml) + "\" y2=\"" + std::to_string(mt + plot_h) +
         "\" stroke=\"#000000\"/>\n";
  svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt + plot_h) +
         "\" x2=\"" + std::to_string(ml + plot_w) + "\" y2=\"" + std::to_string(mt + plot_h) +
         "\" stroke=\"#000000\"/>\n";

  for (const auto& [label, bytes] : budgets) {
    const double y = ypos(static_cast<double>(bytes) / mib);
    svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + num(y) + "\" x2=\"" +
           std::to_string(ml + plot_w) + "\" y2=\"" + num(y) + "\" stroke=\"" +
           spec.budget_color + "\" stroke-dasharray=\"6 3\"/>\n";
    svg += "<text x=\"" + std::to_string(ml + plot_w + 6) + "\" y=\"" + num(y + 4) +
           "\" font-family=\"monospace\" font-size=\"11\" fill=\"" + spec.budget_color + "\">" +
           esc(label) + "</text>\n";
  }

  int ci = 0;
  for (const auto& [label, series] : traces) {
    const std::string color = kSeriesColors[ci % 8];
    std::string points;
    for (const auto& [t, bytes] : series) {
      if (!points.empty()) points += " ";
      points += num(xpos(t)) + "," + num(ypos(static_cast<double>(bytes) / mib));
    }
    svg += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + std::to_string(ml + 8) + "\" y=\"" + std::to_string(mt + 14 + 14 * ci) +
           "\" font-family=\"monospace\" font-size=\"11\" fill=\"" + color + "\">" + esc(label) +
           "</text>\n";
    ++ci;
  }

  const int stride = max_t >= 16 ? (max_t + 9) / 10 : 1;
  for (int t = 0; t <= max_t; t += stride)
    svg += "<text x=\"" + num(xpos(t)) + "\" y=\"" + std::to_string(mt + plot_h + 16) +
           "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">" +
           std::to_string(t) + "</text>\n";
  svg += "<text x=\"" + std::to_string(ml - 6) + "\" y=\"" + std::to_string(mt + plot_h + 4) +
         "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">0</text>\n";
  svg += "<text x=\"" + std::to_string(ml - 6) + "\" y=\"" + std::to_string(mt + 4) +
         "\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">" + num(max_mib) +
         "</text>\n";
  svg += "<text x=\"" + std::to_string(ml + plot_w / 2) + "\" y=\"" +
         std::to_string(height - 10) +
         "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">timesteps</text>\n";
  svg += "<text x=\"6\" y=\"" + std::to_string(mt + 12) +
         "\" font-family=\"monospace\" font-size=\"12\">MiB</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::string format_improvement(double cpu_ms, double gpu_ms, double combined_ms) {
  if (!(cpu_ms > 0.0) || !(gpu_ms > 0.0) || !(combined_ms > 0.0))
    raise(Errc::NonPositiveTime, "all times must be positive");
  const double base = std::min(cpu_ms, gpu_ms);
  const double pct = 100.0 * (combined_ms - base) / base;
  const double rounded = std::round(pct * 10.0) / 10.0;  // half away from zero
  if (rounded == 0.0) return "(-0)";
  char buf[32];
  std::snprintf(buf, sizeof buf, "(%+.1f)", rounded);
  return buf;
}

std::string improvement_table(const std::vector<ImprovementRow>& rows, TableFormat format) {
  if (format == TableFormat::Csv) {
    std::string out = "case,cpu_ms,gpu_ms,combined_ms,percent\n";
    for (const auto& r : rows) {
      std::string pct = format_improvement(r.cpu_ms, r.gpu_ms, r.combined_ms);
      pct = pct.substr(1, pct.size() - 2);  // strip parens
      out += r.label + "," + format_number(r.cpu_ms) + "," + format_number(r.gpu_ms) + "," +
             format_number(r.combined_ms) + "," + pct + "\n";
    }
    return out;
  }
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({"case", "cpu_ms", "gpu_ms", "combined_ms", "(%)"});
  for (const auto& r : rows)
    cells.push_back({r.label, format_number(r.cpu_ms), format_number(r.gpu_ms),
                     format_number(r.combined_ms),
                     format_improvement(r.cpu_ms, r.gpu_ms, r.combined_ms)});
  std::array<size_t, 5> widths = {0, 0, 0, 0, 0};
  for (const auto& row : cells)
    for (size_t c = 0; c < 5; ++c) widths[c] = std::max(widths[c], row[c].size());
  std::string out;
  for (const auto& row : cells) {
    for (size_t c = 0; c < 5; ++c) {
      if (c) out += "  ";
      const bool right = c >= 1 && c <= 3;
      const size_t pad = widths[c] - row[c].size();
      if (right) out += std::string(pad, ' ');
      out += row[c];
      if (!right && c != 4) out += std::string(pad, ' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
  }
  return out;
}

}  // namespace xengine
