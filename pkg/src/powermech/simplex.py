"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Meant for the small programs built by the multi-slot mechanisms (a few dozen
variables). Pivoting is fully deterministic: the entering variable is the
lowest-index column with a positive reduced cost and ratio-test ties leave on
the lowest-index basic variable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import Infeasible, Unbounded

LE, GE, EQ = "<=", ">=", "="
_RELATIONS = {LE: LE, GE: GE, EQ: EQ, "≤": LE, "≥": GE, "==": EQ}

FEAS_TOL = 1e-9
_PIVOT_TOL = 1e-11
_MAX_ITER = 100_000


@dataclass
class LinearProgram:
    """``maximize objective @ x`` subject to ``constraints`` and ``x >= lower_bounds``.

    Each constraint is ``(coefficients, relation, bound)`` with relation one of
    ``"<="``, ``">="``, ``"="``.
    """

    objective: Sequence[float]
    constraints: list = field(default_factory=list)
    lower_bounds: Sequence[float] | None = None

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def add(self, coefficients, relation: str, bound: float) -> None:
        self.constraints.append((coefficients, relation, bound))


@dataclass
class LPSolution:
    x: np.ndarray
    value: float


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])


def _iterate(T: np.ndarray, basis: list[int], n_cols: int) -> None:
    """Run simplex pivots on ``T`` (last row = reduced costs) until optimal.

    Only the first ``n_cols`` columns may enter the basis.
    """
    m = len(basis)
    for _ in range(_MAX_ITER):
        reduced = T[-1, :n_cols]
        eligible = np.flatnonzero(reduced > FEAS_TOL)
        if eligible.size == 0:
            return
        col = int(eligible[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > _PIVOT_TOL)
        if rows.size == 0:
            raise Unbounded("objective is unbounded above")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + FEAS_TOL * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise RuntimeError("simplex iteration limit reached")


def _standard_form(lp: LinearProgram):
    n = lp.n_vars
    lb = np.zeros(n) if lp.lower_bounds is None else np.asarray(lp.lower_bounds, float)
    rows, rels, rhs = [], [], []
    for coeffs, rel, bound in lp.constraints:
        a = np.asarray(coeffs, dtype=float)
        if a.shape != (n,):
            raise ValueError(f"constraint has {a.size} coefficients, expected {n}")
        rel = _RELATIONS[rel]
        if not np.isfinite(bound) or not np.isfinite(a).all():
            raise ValueError("constraint data must be finite")
        b = float(bound) - float(a @ lb)
        if b < 0:
            a, b = -a, -b
            rel = {LE: GE, GE: LE, EQ: EQ}[rel]
        rows.append(a)
        rels.append(rel)
        rhs.append(b)
    return lb, rows, rels, rhs


def lp_solve(lp: LinearProgram) -> LPSolution:
    """Solve ``lp`` to a vertex optimum.

    Raises :class:`~powermech.errors.Infeasible` or
    :class:`~powermech.errors.Unbounded`.
    """
    c = np.asarray(lp.objective, dtype=float)
    n = c.size
    lb, rows, rels, rhs = _standard_form(lp)
    m = len(rows)

    n_slack = sum(r != EQ for r in rels)
    n_art = sum(r != LE for r in rels)
    width = n + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    basis = []
    s_col, a_col = n, n + n_slack
    for i, (a, rel, b) in enumerate(zip(rows, rels, rhs)):
        T[i, :n] = a
        T[i, -1] = b
        if rel == LE:
            T[i, s_col] = 1.0
            basis.append(s_col)
            s_col += 1
        else:
            if rel == GE:
                T[i, s_col] = -1.0
                s_col += 1
            T[i, a_col] = 1.0
            basis.append(a_col)
            a_col += 1

    art_start = n + n_slack
    if n_art:
        # phase 1: maximize -(sum of artificials)
        T[-1, :] = 0.0
        for i, bcol in enumerate(basis):
            if bcol >= art_start:
                T[-1] += T[i]
        T[-1, art_start:width] = 0.0
        _iterate(T, basis, width)
        if T[-1, -1] > FEAS_TOL * max(1.0, float(np.abs(rhs).max(initial=0.0))):
            raise Infeasible("no point satisfies all constraints")
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = []
        for i in range(m):
            if basis[i] >= art_start:
                cands = np.flatnonzero(np.abs(T[i, :art_start]) > 1e-9)
                if cands.size == 0:
                    continue
                _pivot(T, i, int(cands[0]))
                basis[i] = int(cands[0])
            keep.append(i)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
        T = np.delete(T, np.s_[art_start:width], axis=1)
        m = len(basis)

    # phase 2 reduced costs: c_j - c_B B^-1 A_j
    cost = np.zeros(art_start)
    cost[:n] = c
    T[-1, :] = 0.0
    T[-1, :art_start] = cost
    for i, bcol in enumerate(basis):
        if cost[bcol] != 0.0:
            T[-1] -= cost[bcol] * T[i]
    _iterate(T, basis, art_start)

    y = np.zeros(art_start)
    for i, bcol in enumerate(basis):
        y[bcol] = T[i, -1]
    x = np.maximum(y[:n], 0.0) + lb
    return LPSolution(x=x, value=float(c @ x))
