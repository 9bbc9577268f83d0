// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "xengine/model.hpp"

namespace xengine {

// Shortest decimal string that round-trips to the same double; integral
// values print without a decimal point. Used everywhere a number must be
// byte-stable across runs.
std::string format_number(double v);

std::string var_name(const VarRef& v);
std::optional<VarRef> parse_var_name(const std::string& name);

// Free-format MPS. Rows appear in model order behind the single objective
// row OBJ; columns are grouped per variable in (family, index) order with
// the objective entry first. Binary variables are wrapped in INTORG/INTEND
// markers and bounded BV; memory variables get UP <budget>, copy-product
// variables UP 1, and diagonally impossible variables FX 0.
//
// With model.options.quadratic_objective the copy products are dropped
// entirely (columns, rows, bounds, objective entries) and a QUADOBJ section
// lists one `R Z w` entry per product; under the conventional symmetric
// 1/2 x'Qx reading each entry contributes w*R*Z.
std::string write_mps(const MilpModel& m);

// Accepts two shapes of line anywhere in the file, ignoring anything else:
//   <var> <value>                e.g. "R_0_1_1 1"
//   <idx> <var> <value> <cost>   the tabular layout CBC emits
// plus `# objective <v>` comments and status banners. A banner containing
// "infeasible" raises InfeasibleMarker; a line whose last number follows the
// word "objective" sets objective_reported. Binary variables are rounded to
// the nearest bit when within 1e-4, else NonIntegralBinary. Variables the
// model does not contain raise UnknownVariable; a file with no variable
// lines at all raises EmptySolution. Missing variables default to zero.
Assignment parse_solution(const std::string& text, const MilpModel& m);

// Inverse of parse_solution's two-token form: optional `# objective` header
// followed by every stored variable in index order.
std::string format_solution(const Assignment& a);

}  // namespace xengine
