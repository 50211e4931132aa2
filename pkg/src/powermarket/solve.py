"""Solve tagged LPs to optimality with exact row duals and reduced costs.

The in-process backend is the HiGHS dual simplex (via scipy), which returns
vertex-exact duals; the module also reads and writes a canonical solution
file so external solvers can be bridged through the MPS interchange format.

Sign convention: ``dual[row]`` is the sensitivity of the optimal objective to
the row's right-hand side (dObj/dRHS).  Balance rows therefore carry
non-negative electricity prices whenever the price-setting marginal cost is
non-negative; shadow prices of ``<=`` rows are <= 0 and of ``>=`` rows >= 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .formulate import INF, LinearProgram

__all__ = ["Solution", "SolveError", "solve", "solve_external", "write_solution_file"]


class SolveError(RuntimeError):
    pass


@dataclass
class Solution:
    """Primal/dual solution of a tagged LP."""

    status: str                      # optimal | infeasible | unbounded
    objective: float = float("nan")
    primal: dict = field(default_factory=dict)        # column id -> value
    dual: dict = field(default_factory=dict)          # row id -> dObj/dRHS
    reduced_cost: dict = field(default_factory=dict)  # column id -> value
    iterations: int = 0
    wall_time: float = 0.0
    message: str = ""

    def price(self, node: str, t: int) -> float:
        return self.dual[f"balance.{node}.t{t}"]


_STATUS = {0: "optimal", 1: "iteration-limit", 2: "infeasible", 3: "unbounded",
           4: "numerical"}


def _to_arrays(lp: LinearProgram):
    n = len(lp.columns)
    c = np.array([col.objective for col in lp.columns])
    bounds = [(None if col.lower == -INF else col.lower,
               None if col.upper == INF else col.upper) for col in lp.columns]
    eq_rows, ub_rows = [], []      # (original row index, sign for dual recovery)
    for i, row in enumerate(lp.rows):
        if row.sense == "=":
            eq_rows.append(i)
        else:
            ub_rows.append((i, 1.0 if row.sense == "<=" else -1.0))
    eq_pos = {ri: k for k, ri in enumerate(eq_rows)}
    ub_pos = {ri: k for k, (ri, _) in enumerate(ub_rows)}
    ub_sign = {ri: s for ri, s in ub_rows}

    eq_data, eq_r, eq_c = [], [], []
    ub_data, ub_r, ub_c = [], [], []
    for r, cix, v in lp.entries:
        if r in eq_pos:
            eq_r.append(eq_pos[r]); eq_c.append(cix); eq_data.append(v)
        else:
            ub_r.append(ub_pos[r]); ub_c.append(cix); ub_data.append(ub_sign[r] * v)
    A_eq = sparse.csr_matrix((eq_data, (eq_r, eq_c)), shape=(len(eq_rows), n)) \
        if eq_rows else None
    b_eq = np.array([lp.rows[ri].rhs for ri in eq_rows]) if eq_rows else None
    A_ub = sparse.csr_matrix((ub_data, (ub_r, ub_c)), shape=(len(ub_rows), n)) \
        if ub_rows else None
    b_ub = np.array([ub_sign[ri] * lp.rows[ri].rhs for ri, _ in ub_rows]) \
        if ub_rows else None
    return c, bounds, A_eq, b_eq, A_ub, b_ub, eq_rows, [ri for ri, _ in ub_rows], ub_sign


def solve(lp: LinearProgram, feas_tol: float = 1e-9, opt_tol: float = 1e-9) -> Solution:
    """Minimize the LP; infeasibility/unboundedness are reported as status,
    not raised."""
    lp.validate_structure()
    c, bounds, A_eq, b_eq, A_ub, b_ub, eq_rows, ub_rows, ub_sign = _to_arrays(lp)
    t0 = time.perf_counter()
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
        method="highs-ds",
        options={
            "primal_feasibility_tolerance": max(feas_tol, 1e-10),
            "dual_feasibility_tolerance": max(opt_tol, 1e-10),
        },
    )
    wall = time.perf_counter() - t0
    status = _STATUS.get(res.status, "numerical")
    if status != "optimal":
        return Solution(status=status, iterations=int(getattr(res, "nit", 0) or 0),
                        wall_time=wall, message=str(res.message))

    sol = Solution(status="optimal", objective=float(res.fun),
                   iterations=int(res.nit), wall_time=wall, message=str(res.message))
    for col, x in zip(lp.columns, res.x):
        sol.primal[col.id] = float(x)
    red = np.asarray(res.lower.marginals) + np.asarray(res.upper.marginals)
    for col, z in zip(lp.columns, red):
        sol.reduced_cost[col.id] = float(z)
    if eq_rows:
        for ri, y in zip(eq_rows, res.eqlin.marginals):
            sol.dual[lp.rows[ri].id] = float(y)
    if ub_rows:
        for ri, y in zip(ub_rows, res.ineqlin.marginals):
            # a ">=" row was negated on the way in; negate the dual back
            sol.dual[lp.rows[ri].id] = float(ub_sign[ri] * y)
    return sol


def write_solution_file(sol: Solution, path) -> None:
    """Canonical solution file: one `col`/`row` line per primal/dual value."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"status {sol.status}\n")
        fh.write(f"objective {sol.objective!r}\n")
        for cid in sorted(sol.primal):
            fh.write(f"col {cid} {sol.primal[cid]!r}\n")
        for rid in sorted(sol.dual):
            fh.write(f"row {rid} {sol.dual[rid]!r}\n")


def solve_external(lp: LinearProgram, solution_file) -> Solution:
    """Parse an externally produced solution file against the LP's tags.

    The file must cover every column; a missing dual section makes the
    solution unusable for theorem checks and is reported as an error.
    """
    sol = Solution(status="optimal")
    with open(solution_file, encoding="utf-8") as fh:
        for line in fh:
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            kind = tokens[0]
            if kind == "status":
                sol.status = tokens[1]
            elif kind == "objective":
                sol.objective = float(tokens[1])
            elif kind == "col":
                try:
                    lp.col_index(tokens[1])
                except KeyError:
                    raise SolveError(f"unmatched tag: unknown column '{tokens[1]}'") from None
                sol.primal[tokens[1]] = float(tokens[2])
            elif kind == "row":
                if not lp.has_row(tokens[1]):
                    raise SolveError(f"unmatched tag: unknown row '{tokens[1]}'")
                sol.dual[tokens[1]] = float(tokens[2])
            else:
                raise SolveError(f"unknown record '{kind}' in solution file")
    if sol.status == "optimal":
        missing = [c.id for c in lp.columns if c.id not in sol.primal]
        if missing:
            raise SolveError(f"solution file misses columns, e.g. '{missing[0]}'")
        if not sol.dual and lp.rows:
            raise SolveError("solution file has no dual section; "
                             "unusable for theorem checks")
        if np.isnan(sol.objective):
            c = {col.id: col.objective for col in lp.columns}
            sol.objective = float(sum(c[k] * v for k, v in sol.primal.items()))
    return sol
