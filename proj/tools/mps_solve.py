# SPDX-License-Identifier: Apache-2.0
"""Solve a free-format MPS file with scipy's HiGHS MILP interface.

Usage: python3 mps_solve.py MODEL.mps SOLUTION.out

Writes one `# objective <value>` comment followed by `<name> <value>` lines
for every structural variable with a nonzero value. Infeasible models produce
a single status line containing the word "Infeasible". Exit codes: 0 solved
(including proven infeasible), 2 bad invocation, 3 solve failure.
"""
import sys

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp


def fail(msg):
    sys.stderr.write("mps_solve: %s\n" % msg)
    sys.exit(3)


def parse_mps(path):
    rows = {}  # name -> (sense, rhs)
    row_order = []
    cols = {}  # name -> index
    col_order = []
    integrality = {}
    entries = []  # (row, col, coef); objective row name None
    bounds = {}  # col -> [lo, hi]
    quad = []

    section = None
    in_integer = False
    with open(path) as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line[0].isspace():
                section = line.split()[0]
                continue
            tok = line.split()
            if section == "ROWS":
                sense, name = tok[0], tok[1]
                if sense == "N":
                    rows[name] = ("N", 0.0)
                else:
                    rows[name] = (sense, 0.0)
                    row_order.append(name)
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    in_integer = tok[2] == "'INTORG'"
                    continue
                name = tok[0]
                if name not in cols:
                    cols[name] = len(col_order)
                    col_order.append(name)
                    integrality[name] = 1 if in_integer else 0
                for i in range(1, len(tok) - 1, 2):
                    entries.append((tok[i], name, float(tok[i + 1])))
            elif section == "RHS":
                for i in range(1, len(tok) - 1, 2):
                    sense, _ = rows[tok[i]]
                    rows[tok[i]] = (sense, float(tok[i + 1]))
            elif section == "BOUNDS":
                kind, _, name = tok[0], tok[1], tok[2]
                lo, hi = bounds.get(name, [0.0, np.inf])
                if kind == "BV":
                    lo, hi = 0.0, 1.0
                    integrality[name] = 1
                elif kind == "UP":
                    hi = float(tok[3])
                elif kind == "LO":
                    lo = float(tok[3])
                elif kind == "FX":
                    lo = hi = float(tok[3])
                elif kind == "FR":
                    lo, hi = -np.inf, np.inf
                else:
                    fail("unsupported bound kind %s" % kind)
                bounds[name] = [lo, hi]
            elif section == "QUADOBJ":
                quad.append((tok[0], tok[1], float(tok[2])))
            elif section in ("NAME", "ENDATA"):
                pass
            else:
                fail("unsupported section %s" % section)

    obj_rows = [n for n, (s, _) in rows.items() if s == "N"]
    if len(obj_rows) != 1:
        fail("expected exactly one N row")
    return rows, row_order, cols, col_order, integrality, entries, bounds, obj_rows[0], quad


def main():
    if len(sys.argv) != 3:
        sys.stderr.write("usage: mps_solve.py MODEL.mps SOLUTION.out\n")
        sys.exit(2)
    mps_path, sol_path = sys.argv[1], sys.argv[2]
    (rows, row_order, cols, col_order, integrality, entries, bounds, obj_row,
     quad) = parse_mps(mps_path)
    if quad:
        fail("QUADOBJ models are not solvable by this linear bridge")

    n = len(col_order)
    m = len(row_order)
    c = np.zeros(n)
    a = sparse.dok_matrix((m, n))
    row_index = {name: i for i, name in enumerate(row_order)}
    for row, col, coef in entries:
        if row == obj_row:
            c[cols[col]] += coef
        else:
            a[row_index[row], cols[col]] += coef
    lb = np.full(m, -np.inf)
    ub = np.full(m, np.inf)
    for name, i in row_index.items():
        sense, rhs = rows[name]
        if sense == "L":
            ub[i] = rhs
        elif sense == "G":
            lb[i] = rhs
        else:
            lb[i] = ub[i] = rhs

    var_lo = np.zeros(n)
    var_hi = np.full(n, np.inf)
    integ = np.zeros(n)
    for name, i in cols.items():
        if name in bounds:
            var_lo[i], var_hi[i] = bounds[name]
        integ[i] = integrality[name]

    res = milp(
        c,
        constraints=LinearConstraint(a.tocsr(), lb, ub),
        bounds=Bounds(var_lo, var_hi),
        integrality=integ,
        options={"mip_rel_gap": 0.0},
    )
    if res.status == 2:
        with open(sol_path, "w") as fh:
            fh.write("Infeasible - problem has no feasible solution\n")
        return
    if res.status != 0 or res.x is None:
        fail("solver status %d: %s" % (res.status, res.message))
    with open(sol_path, "w") as fh:
        fh.write("# objective %r\n" % float(res.fun))
        for name in col_order:
            v = float(res.x[cols[name]])
            if integrality[name]:
                v = round(v)
            if v != 0.0:
                fh.write("%s %r\n" % (name, v))


if __name__ == "__main__":
    main()
