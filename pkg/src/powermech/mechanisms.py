"""The six allocation mechanisms.

Cases 1-3 are single-slot; cases 4-6 work on any number of slots.

* case1: all-or-nothing supply, the distributor counts as a player.
* case2: serve the subset of users with the largest total demand that fits.
* case3: divisible fill; rationing splits supply in proportion to demand.
* case4: time shifting with per-user energy floors, solved as an LP.
* case5: fixed proportional rule per slot, Clarke payments against the rule.
* case6: energy ceilings and a congestion penalty instead of Clarke payments.
"""
from __future__ import annotations

import math

import numpy as np

from .engine import Allocation, OutcomeSolver, SolveCache
from .errors import Infeasible
from .model import MechanismKind, Scenario
from .simplex import LinearProgram, lp_solve
from .solvers import proportional_ration, subset_sum_max

__all__ = [
    "MechanismKind", "solver_for", "case1_solve", "case2_solve", "case3_solve",
    "case4_solve", "case5_allocate", "case6_solve", "case6_payment",
]


def _single_slot(s: Scenario) -> tuple[np.ndarray, float]:
    if s.n_slots != 1:
        raise ValueError(f"{s.mechanism} needs a single-slot scenario, got {s.n_slots} slots")
    return s.demand_matrix()[:, 0], float(s.production.values[0])


def capped_valuations(s: Scenario, alloc: Allocation) -> np.ndarray:
    """Energy each user receives once grants above demand are discarded."""
    if s.n_users == 0:
        return np.zeros(0)
    useful = np.minimum(alloc.grants, s.demand_matrix())
    return np.array([math.fsum(row) * s.slot_duration for row in useful])


# -- case 1 -----------------------------------------------------------------

def case1_solve(s: Scenario) -> Allocation:
    """Grant every demand when the total fits the production, otherwise nothing.

    A total exactly equal to production is served.
    """
    x, p = _single_slot(s)
    served = math.fsum(x) <= p
    grants = x[:, None] if served else np.zeros((len(x), 1))
    return Allocation(grants, outcome=int(served))


class Case1(OutcomeSolver):
    kind = MechanismKind.CASE1

    def solve(self, s):
        return case1_solve(s)

    def valuations(self, s, alloc):
        # consumption enters as a cost; the distributor's production offsets it
        x, _ = _single_slot(s)
        return -x * s.slot_duration * alloc.outcome

    def house_value(self, s, alloc):
        return float(s.production.values[0]) * s.slot_duration * alloc.outcome


# -- case 2 -----------------------------------------------------------------

def case2_solve(s: Scenario) -> Allocation:
    """Serve the largest-total subset that fits; ties go to the lexicographically
    smallest index set."""
    x, p = _single_slot(s)
    chosen, _ = subset_sum_max(x, p)
    grants = np.zeros((len(x), 1))
    grants[list(chosen), 0] = x[list(chosen)]
    return Allocation(grants, outcome=chosen)


class Case2(OutcomeSolver):
    kind = MechanismKind.CASE2

    def solve(self, s):
        return case2_solve(s)

    def valuations(self, s, alloc):
        return capped_valuations(s, alloc)


# -- case 3 -----------------------------------------------------------------

def case3_solve(s: Scenario) -> Allocation:
    """Grant demands in full when they fit, else ration production proportionally."""
    x, p = _single_slot(s)
    return Allocation(proportional_ration(x, p)[:, None])


class Case3(Case2):
    kind = MechanismKind.CASE3

    def solve(self, s):
        return case3_solve(s)


def case3_closed_form_payments(s: Scenario, alloc: Allocation) -> np.ndarray:
    """Clarke payments of case 3 without re-solving.

    With ``others`` the total demand of everyone but ``i`` and ``used`` the
    energy actually dispatched (``min(P, sum x)``): a user pays its own grant
    when the others alone could absorb the production, else
    ``others - (used - grant)``.
    """
    x, p = _single_slot(s)
    a = alloc.grants[:, 0]
    used = min(p, math.fsum(x))
    total = math.fsum(x)
    out = np.empty(len(x))
    for i in range(len(x)):
        others = total - x[i]
        out[i] = a[i] if others >= p else others - (used - a[i])
    return out * s.slot_duration


# -- cases 4 and 6: linear programs ------------------------------------------

def _shift_lp(s: Scenario, floor: bool) -> Allocation:
    """Welfare-optimal grants with per-slot capacity and per-user energy bounds.

    Variables per (user, slot): useful power ``u <= x`` and excess ``e``; the
    grant is ``u + e``. Passes: maximize useful energy, then minimize dispatched
    energy, then minimize each grant in row-major order. Each optimum is frozen
    as a constraint for the following passes; the phase-1 tolerance absorbs
    the roundoff in the frozen values.
    """
    n, T = s.n_users, s.n_slots
    if n == 0:
        return Allocation.empty(T)
    x = s.demand_matrix()
    P = s.production_array()
    dt = s.slot_duration
    nv = 2 * n * T

    def u_idx(i, t):
        return i * T + t

    def e_idx(i, t):
        return n * T + i * T + t

    def grant_vec(i, t):
        v = np.zeros(nv)
        v[u_idx(i, t)] = v[e_idx(i, t)] = 1.0
        return v

    base = []
    for t in range(T):
        row = np.zeros(nv)
        for i in range(n):
            row += grant_vec(i, t)
        base.append((row, "<=", P[t]))
    for i in range(n):
        row = np.zeros(nv)
        for t in range(T):
            row += grant_vec(i, t) * dt
        target = math.fsum(x[i]) * dt
        base.append((row, ">=" if floor else "<=", target))
    for i in range(n):
        for t in range(T):
            row = np.zeros(nv)
            row[u_idx(i, t)] = 1.0
            base.append((row, "<=", x[i, t]))

    useful = np.zeros(nv)
    useful[: n * T] = dt
    dispatched = np.full(nv, dt)

    try:
        best = lp_solve(LinearProgram(useful, list(base)))
    except Infeasible:
        raise Infeasible("no allocation meets every user's energy floor") from None
    cons = list(base)
    cons.append((useful, ">=", best.value))
    sol = lp_solve(LinearProgram(-dispatched, list(cons)))
    low = -sol.value
    cons.append((dispatched, "<=", low))
    for i in range(n):
        for t in range(T):
            g = grant_vec(i, t)
            sol = lp_solve(LinearProgram(-g, list(cons)))
            cons.append((g, "<=", -sol.value))

    z = sol.x
    grants = np.array([[z[u_idx(i, t)] + z[e_idx(i, t)] for t in range(T)] for i in range(n)])
    return Allocation(np.maximum(grants, 0.0))


def case4_solve(s: Scenario) -> Allocation:
    """Shift consumption: each user receives at least its demanded energy.

    Raises :class:`~powermech.errors.Infeasible` when total production cannot
    cover the energy floors.
    """
    return _shift_lp(s, floor=True)


def case6_solve(s: Scenario) -> Allocation:
    """Like case 4 but demanded energy is a ceiling; always feasible."""
    return _shift_lp(s, floor=False)


class Case4(OutcomeSolver):
    kind = MechanismKind.CASE4

    def solve(self, s):
        return case4_solve(s)

    def valuations(self, s, alloc):
        return capped_valuations(s, alloc)


# -- case 5 -----------------------------------------------------------------

def case5_allocate(s: Scenario) -> Allocation:
    """Per slot: demands in full when they fit, else a proportional share of P(t)."""
    if s.n_users == 0:
        return Allocation.empty(s.n_slots)
    x = s.demand_matrix()
    P = s.production_array()
    grants = np.column_stack([proportional_ration(x[:, t], P[t]) for t in range(s.n_slots)])
    return Allocation(grants)


class Case5(Case4):
    """Clarke payments where the leave-one-out outcome is the same rule applied
    to the remaining users."""

    kind = MechanismKind.CASE5

    def solve(self, s):
        return case5_allocate(s)


# -- case 6 -----------------------------------------------------------------

def case6_payment(s: Scenario, alloc: Allocation, i: int) -> float:
    """Consumed energy plus a linear congestion charge shared by every user.

    The charge per slot is ``k * max(0, sum of grants - c * P(t))``; both terms
    are integrated over slots.
    """
    P = s.production_array()
    load = alloc.column_sums() if alloc.n_users else np.zeros(s.n_slots)
    excess = np.maximum(0.0, load - P * s.params.c)
    per_slot = alloc.grants[i] + s.params.k * excess
    return math.fsum(per_slot) * s.slot_duration


class Case6(Case4):
    kind = MechanismKind.CASE6

    def solve(self, s):
        return case6_solve(s)

    def payments(self, s, alloc, cache: SolveCache):
        return np.array([case6_payment(s, alloc, i) for i in range(s.n_users)])


_SOLVERS = {cls.kind: cls() for cls in (Case1, Case2, Case3, Case4, Case5, Case6)}


def solver_for(kind: MechanismKind | str) -> OutcomeSolver:
    return _SOLVERS[MechanismKind(kind)]
