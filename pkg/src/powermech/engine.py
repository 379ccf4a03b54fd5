"""Generic VCG machinery over a pluggable outcome solver.

A solver (see :class:`OutcomeSolver`) knows how to pick the welfare-optimal
allocation for any scenario and how every player values an allocation. The
engine builds Groves and Clarke pivot payments on top of that, solving each
leave-one-out sub-problem at most once per call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .model import EPS, Scenario, require_valid


@dataclass(frozen=True, eq=False)
class Allocation:
    """Granted power, one row per user and one column per slot.

    ``outcome`` optionally carries the mechanism's discrete outcome label
    (the 0/1 decision of case 1, the chosen index set of case 2).
    """

    grants: np.ndarray
    outcome: Any = None

    def __post_init__(self):
        g = np.array(self.grants, dtype=float, copy=True)
        if g.ndim != 2:
            raise ValueError("grants must be a 2-D (users x slots) array")
        g.setflags(write=False)
        object.__setattr__(self, "grants", g)

    @classmethod
    def empty(cls, n_slots: int, outcome: Any = None) -> Allocation:
        return cls(np.zeros((0, n_slots)), outcome)

    @property
    def n_users(self) -> int:
        return self.grants.shape[0]

    def column_sums(self) -> np.ndarray:
        return self.grants.sum(axis=0)

    def capacity_violation(self, production: np.ndarray) -> float:
        """Largest per-slot overshoot of production (0 when feasible)."""
        if self.n_users == 0:
            return 0.0
        return float(max(0.0, (self.column_sums() - production).max()))

    def is_feasible(self, production: np.ndarray, eps: float = EPS) -> bool:
        g = self.grants
        return bool(np.isfinite(g).all() and (g >= 0).all()
                    and self.capacity_violation(production) <= eps)


class OutcomeSolver:
    """Interface every mechanism implements.

    ``solve`` must be deterministic and must accept any sub-scenario obtained
    by removing users, since Clarke payments re-solve without each player.
    """

    def solve(self, s: Scenario) -> Allocation:
        raise NotImplementedError

    def valuations(self, s: Scenario, alloc: Allocation) -> np.ndarray:
        """Per-user valuation (currency) of ``alloc`` under the declared demands."""
        raise NotImplementedError

    def house_value(self, s: Scenario, alloc: Allocation) -> float:
        """Valuation of non-user players (counted in welfare, never charged)."""
        return 0.0

    def payments(self, s: Scenario, alloc: Allocation, cache: SolveCache) -> np.ndarray:
        """Per-user payments; Clarke pivot payments unless overridden."""
        return np.array([clarke_payment(self, s, i, cache=cache) for i in range(s.n_users)])


@dataclass(frozen=True, eq=False)
class MechanismResult:
    scenario: Scenario
    allocation: Allocation
    valuations: np.ndarray
    payments: np.ndarray
    utilities: np.ndarray
    welfare: float
    pivotal: np.ndarray


class SolveCache:
    """Memoizes solver output per removed-user set for one scenario."""

    def __init__(self, solver: OutcomeSolver, s: Scenario):
        self.solver = solver
        self.scenario = s
        self._allocs: dict[frozenset, tuple[Scenario, Allocation]] = {}

    def solve(self, removed=()) -> tuple[Scenario, Allocation]:
        key = frozenset(removed)
        if key not in self._allocs:
            sub = self.scenario.without(key) if key else self.scenario
            self._allocs[key] = (sub, self.solver.solve(sub))
        return self._allocs[key]


def total_welfare(solver: OutcomeSolver, s: Scenario, alloc: Allocation) -> float:
    return math.fsum(solver.valuations(s, alloc)) + solver.house_value(s, alloc)


def others_welfare(solver: OutcomeSolver, s: Scenario, alloc: Allocation, i: int) -> float:
    """Welfare of every player except user ``i`` at ``alloc``."""
    vals = solver.valuations(s, alloc)
    return math.fsum(np.delete(vals, i)) + solver.house_value(s, alloc)


def social_choice(solver: OutcomeSolver, s: Scenario) -> Allocation:
    """Welfare-maximizing allocation for the full user set."""
    require_valid(s)
    return solver.solve(s)


def clarke_term(solver: OutcomeSolver, sub: Scenario) -> float:
    """Optimal welfare of a sub-scenario (the pivot term of the Clarke rule)."""
    return total_welfare(solver, sub, solver.solve(sub))


def groves_payment(
    solver: OutcomeSolver,
    s: Scenario,
    i: int,
    h: Callable[[Scenario], float],
    cache: SolveCache | None = None,
) -> float:
    """``h(scenario without i)`` minus the others' welfare at the chosen outcome."""
    if not 0 <= i < s.n_users:
        raise IndexError(f"user index {i} out of range for {s.n_users} users")
    cache = cache or SolveCache(solver, s)
    _, alloc = cache.solve()
    return h(s.without([i])) - others_welfare(solver, s, alloc, i)


def clarke_payment(solver: OutcomeSolver, s: Scenario, i: int,
                   cache: SolveCache | None = None) -> float:
    cache = cache or SolveCache(solver, s)

    def pivot(_sub: Scenario) -> float:
        sub, b = cache.solve([i])
        return total_welfare(solver, sub, b)

    return groves_payment(solver, s, i, pivot, cache=cache)


def run_mechanism(s: Scenario, solver: OutcomeSolver | None = None,
                  eps: float = EPS) -> MechanismResult:
    """Allocation, valuations, payments and utilities for ``s``.

    The solver defaults to the one registered for ``s.mechanism``.
    """
    require_valid(s)
    if solver is None:
        from .mechanisms import solver_for
        solver = solver_for(s.mechanism)
    cache = SolveCache(solver, s)
    _, alloc = cache.solve()
    vals = np.asarray(solver.valuations(s, alloc), dtype=float)
    pays = np.asarray(solver.payments(s, alloc, cache), dtype=float).reshape(s.n_users)
    utils = vals - pays
    for a in (vals, pays, utils):
        a.setflags(write=False)
    return MechanismResult(
        scenario=s,
        allocation=alloc,
        valuations=vals,
        payments=pays,
        utilities=utils,
        welfare=total_welfare(solver, s, alloc),
        pivotal=pays > eps,
    )
