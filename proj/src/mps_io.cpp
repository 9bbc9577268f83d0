// SPDX-License-Identifier: Apache-2.0
#include "xengine/mps_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <set>
#include <sstream>

namespace xengine {

std::string format_number(double v) {
  if (v == 0.0) return "0";
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string var_name(const VarRef& v) {
  const char* f = "?";
  switch (v.family) {
    case VarFamily::R: f = "R"; break;
    case VarFamily::S: f = "S"; break;
    case VarFamily::Z: f = "Z"; break;
    case VarFamily::F: f = "F"; break;
    case VarFamily::U: f = "U"; break;
    case VarFamily::P: f = "P"; break;
  }
  std::string out = std::string(f) + "_" + std::to_string(v.a) + "_" + std::to_string(v.b) +
                    "_" + std::to_string(v.c);
  if (v.family == VarFamily::P) out += "_" + std::to_string(v.d);
  return out;
}

std::optional<VarRef> parse_var_name(const std::string& name) {
  if (name.size() < 2 || name[1] != '_') return std::nullopt;
  VarFamily fam;
  switch (name[0]) {
    case 'R': fam = VarFamily::R; break;
    case 'S': fam = VarFamily::S; break;
    case 'Z': fam = VarFamily::Z; break;
    case 'F': fam = VarFamily::F; break;
    case 'U': fam = VarFamily::U; break;
    case 'P': fam = VarFamily::P; break;
    default: return std::nullopt;
  }
  std::vector<int> idx;
  size_t pos = 2;
  while (pos <= name.size()) {
    size_t next = name.find('_', pos);
    std::string part = name.substr(pos, next == std::string::npos ? next : next - pos);
    if (part.empty()) return std::nullopt;
    for (char c : part)
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    idx.push_back(std::atoi(part.c_str()));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  size_t want = fam == VarFamily::P ? 4 : 3;
  if (idx.size() != want) return std::nullopt;
  VarRef ref;
  ref.family = fam;
  ref.a = static_cast<std::int16_t>(idx[0]);
  ref.b = static_cast<std::int16_t>(idx[1]);
  ref.c = static_cast<std::int16_t>(idx[2]);
  ref.d = static_cast<std::int16_t>(want == 4 ? idx[3] : 0);
  return ref;
}

namespace {

std::string row_name(const LinearConstraint& c) {
  return std::string(tag_name(c.tag)) + "_" + std::to_string(c.ordinal);
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

bool is_integer_token(const std::string& s) {
  if (s.empty()) return false;
  size_t i = s[0] == '-' || s[0] == '+' ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string write_mps(const MilpModel& m) {
  const bool quad = m.options.quadratic_objective;
  auto skip = [&](const VarRef& v) { return quad && v.family == VarFamily::P; };

  // Full variable universe in (family, index) order; values are the column
  // entries in row emission order.
  std::map<VarRef, std::vector<std::pair<std::string, double>>> cols;
  for (int d = 0; d < m.D; ++d)
    for (int t = 0; t < m.T; ++t)
      for (int i = 0; i < m.T; ++i) {
        cols[var_r(d, t, i)];
        cols[var_s(d, t, i)];
        cols[var_z(d, t, i)];
        cols[var_u(d, t, i)];
      }
  for (int d = 0; d < m.D; ++d)
    for (int t = 0; t < m.T; ++t)
      for (int eo = 0; eo < m.f_edges; ++eo) cols[var_f(d, t, eo)];
  if (!quad)
    for (int t = 0; t < m.T; ++t)
      for (int e = 0; e < m.E; ++e)
        for (int ds = 0; ds < m.D; ++ds)
          for (int dc = 0; dc < m.D; ++dc)
            if (ds != dc) cols[var_p(t, e, ds, dc)];

  for (const auto& [ref, coef] : m.objective)
    if (!skip(ref)) cols[ref].push_back({"OBJ", coef});

  std::ostringstream os;
  os << "NAME XENGINE\n";
  os << "ROWS\n";
  os << " N OBJ\n";
  for (const auto& c : m.constraints) {
    if (quad && c.tag == ConstraintTag::P_LINK) continue;
    char rel = c.rel == Relation::LE ? 'L' : c.rel == Relation::GE ? 'G' : 'E';
    os << " " << rel << " " << row_name(c) << "\n";
    for (const auto& [ref, coef] : c.terms) cols[ref].push_back({row_name(c), coef});
  }

  os << "COLUMNS\n";
  bool in_int = false;
  for (const auto& [ref, entries] : cols) {
    bool bin = m.is_binary(ref.family);
    if (bin && !in_int) {
      os << "    MARK  'MARKER'  'INTORG'\n";
      in_int = true;
    }
    if (!bin && in_int) {
      os << "    MARK  'MARKER'  'INTEND'\n";
      in_int = false;
    }
    for (const auto& [row, coef] : entries)
      os << "    " << var_name(ref) << "  " << row << "  " << format_number(coef) << "\n";
  }
  if (in_int) os << "    MARK  'MARKER'  'INTEND'\n";

  os << "RHS\n";
  for (const auto& c : m.constraints) {
    if (quad && c.tag == ConstraintTag::P_LINK) continue;
    if (c.rhs != 0.0)
      os << "    RHS  " << row_name(c) << "  " << format_number(c.rhs) << "\n";
  }

  std::set<VarRef> fixed(m.fixed_zero.begin(), m.fixed_zero.end());
  os << "BOUNDS\n";
  for (const auto& [ref, entries] : cols) {
    (void)entries;
    if (fixed.count(ref)) {
      os << " FX BND " << var_name(ref) << " 0\n";
    } else if (m.is_binary(ref.family)) {
      os << " BV BND " << var_name(ref) << "\n";
    } else if (ref.family == VarFamily::U) {
      os << " UP BND " << var_name(ref) << " "
         << format_number(static_cast<double>(m.budgets[static_cast<size_t>(ref.a)])) << "\n";
    } else {
      os << " UP BND " << var_name(ref) << " 1\n";
    }
  }

  if (quad && !m.quad.empty()) {
    os << "QUADOBJ\n";
    for (const auto& q : m.quad) {
      const auto& edge = m.problem.edges[static_cast<size_t>(q.e)];
      os << "    " << var_name(var_r(q.d_cmp, q.t, edge.dst)) << "  "
         << var_name(var_z(q.d_src, q.t, edge.src)) << "  " << format_number(q.w) << "\n";
    }
  }

  os << "ENDATA\n";
  return os.str();
}

Assignment parse_solution(const std::string& text, const MilpModel& m) {
  Assignment a;
  bool any_var = false;

  auto record = [&](const std::string& name, double value) -> bool {
    auto ref = parse_var_name(name);
    if (!ref) return false;  // looks like a banner word, not a variable
    if (!m.in_space(*ref)) raise(Errc::UnknownVariable, name);
    if (m.is_binary(ref->family)) {
      if (std::abs(value) <= 1e-4)
        value = 0.0;
      else if (std::abs(value - 1.0) <= 1e-4)
        value = 1.0;
      else
        raise(Errc::NonIntegralBinary, name + " = " + format_number(value));
    }
    a.set(*ref, value);
    any_var = true;
    return true;
  };

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    if (tok[0][0] == '#') {
      if (tok.size() >= 3 && tok[0] == "#" && lower(tok[1]) == "objective" && is_number(tok[2]))
        a.objective_reported = std::strtod(tok[2].c_str(), nullptr);
      continue;
    }
    std::string low = lower(line);
    if (low.find("infeasible") != std::string::npos)
      raise(Errc::InfeasibleMarker, line);

    if (tok.size() == 2 && is_number(tok[1]) && record(tok[0], std::strtod(tok[1].c_str(), nullptr)))
      continue;
    if (tok.size() == 4 && is_integer_token(tok[0]) && is_number(tok[2]) &&
        record(tok[1], std::strtod(tok[2].c_str(), nullptr)))
      continue;

    if (low.find("objective") != std::string::npos) {
      for (auto it = tok.rbegin(); it != tok.rend(); ++it)
        if (is_number(*it)) {
          a.objective_reported = std::strtod(it->c_str(), nullptr);
          break;
        }
    }
  }
  if (!any_var) raise(Errc::EmptySolution, "no variable lines");
  return a;
}

std::string format_solution(const Assignment& a) {
  std::string out;
  if (a.objective_reported)
    out += "# objective " + format_number(*a.objective_reported) + "\n";
  for (const auto& [ref, val] : a.values) out += var_name(ref) + " " + format_number(val) + "\n";
  return out;
}

}  // namespace xengine
