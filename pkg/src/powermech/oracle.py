"""Brute-force verifiers and game-theoretic property checks.

Nothing here reuses the mechanisms' solvers: :func:`brute_force_outcome`
enumerates the outcome set directly, so it can serve as an independent oracle
for the welfare the engine reports. :func:`check_properties` combines that
with misreport sweeps and sign checks into a :class:`PropertyReport`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .engine import Allocation, MechanismResult, run_mechanism
from .errors import BudgetExceeded, Infeasible
from .mechanisms import solver_for
from .model import EPS, MechanismKind, Scenario, require_valid

DEFAULT_FACTORS = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
DEFAULT_RESOLUTION = 0.5
DEFAULT_BUDGET = 10**7
TRUTH_TOL = 1e-7

HOLDS, VIOLATED, RECORDED, SKIPPED = "holds", "violated", "recorded", "skipped"

EXPERIENCED = "experienced"
VALUATION = "valuation"

# Properties the mechanisms are claimed to satisfy; everything else is only recorded.
IR_ASSERTED = {MechanismKind.CASE2, MechanismKind.CASE3, MechanismKind.CASE4}
TRUTH_ASSERTED = {MechanismKind.CASE1, MechanismKind.CASE2, MechanismKind.CASE3}


@dataclass(frozen=True)
class MisreportGrid:
    factors: tuple[float, ...] = DEFAULT_FACTORS

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(float(f) for f in self.factors))
        if any(f < 0 for f in self.factors):
            raise ValueError("misreport factors must be non-negative")
        if 1.0 not in self.factors:
            raise ValueError("misreport grid must contain the truthful factor 1.0")


@dataclass(frozen=True)
class Witness:
    scenario: Scenario
    user: int | None = None
    factor: float | None = None


@dataclass
class Verdict:
    name: str
    status: str
    margin: float = math.inf
    asserted: bool = True
    witness: Witness | None = None
    samples: list[float] = field(default_factory=list)
    note: str = ""


@dataclass
class PropertyReport:
    scenario: Scenario
    verdicts: dict[str, Verdict] = field(default_factory=dict)
    infeasible: bool = False

    @property
    def ok(self) -> bool:
        """True when no asserted property is violated."""
        return not any(v.status == VIOLATED for v in self.verdicts.values())

    def add(self, v: Verdict) -> None:
        self.verdicts[v.name] = v


@dataclass(frozen=True)
class MisreportEntry:
    factor: float
    truthful_utility: float
    misreport_utility: float
    skipped: bool = False

    @property
    def margin(self) -> float:
        return self.truthful_utility - self.misreport_utility


# -- brute force ---------------------------------------------------------------

def _levels(top: float, resolution: float) -> np.ndarray:
    steps = int(math.floor(top / resolution + 1e-9))
    lv = np.arange(steps + 1) * resolution
    if top - lv[-1] > 1e-12:
        lv = np.append(lv, top)
    return lv


def _grid_search(levels, feasible, welfare, budget, chunk=1 << 16):
    sizes = [len(lv) for lv in levels]
    total = math.prod(sizes)
    if total > budget:
        raise BudgetExceeded(f"grid has {total} points, budget is {budget}")
    best_val, best_pt = -math.inf, None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        pts = np.empty((idx.size, len(levels)))
        # mixed radix decode, last coordinate varies fastest
        rem = idx
        for d in range(len(levels) - 1, -1, -1):
            rem, digit = np.divmod(rem, sizes[d])
            pts[:, d] = levels[d][digit]
        vals = np.where(feasible(pts), welfare(pts), -np.inf)
        k = int(np.argmax(vals))
        if vals[k] > best_val + 1e-12:
            best_val, best_pt = float(vals[k]), pts[k]
    return best_pt, best_val


def brute_force_outcome(s: Scenario, resolution: float = DEFAULT_RESOLUTION,
                        budget: int = DEFAULT_BUDGET) -> tuple[Allocation, float]:
    """Welfare-maximal outcome found by exhaustive enumeration.

    Case 1 enumerates {0, 1}, case 2 all subsets; the divisible cases search a
    grid of ``resolution`` kW per (user, slot) coordinate, up to the user's
    demand (cases 3, 5, 6) or up to the slot's production (case 4, whose
    grants may exceed demand in a slot). Test oracle only.
    """
    require_valid(s)
    kind = s.mechanism
    n, T, dt = s.n_users, s.n_slots, s.slot_duration
    x = s.demand_matrix()
    P = s.production_array()

    if kind == MechanismKind.CASE1:
        scores = {a: a * (P[0] - math.fsum(x[:, 0])) * dt for a in (1, 0)}
        a = max(scores, key=lambda k: (scores[k], k))
        return Allocation(x * a, outcome=a), scores[a]

    if kind == MechanismKind.CASE2:
        if 2**n > budget:
            raise BudgetExceeded(f"{2**n} subsets exceed budget {budget}")
        best, best_set = -1.0, ()
        for r in range(n + 1):
            for subset in itertools.combinations(range(n), r):
                total = math.fsum(x[j, 0] for j in subset)
                if total <= P[0] and total > best:
                    best, best_set = total, subset
        grants = np.zeros((n, 1))
        grants[list(best_set), 0] = x[list(best_set), 0]
        return Allocation(grants, outcome=best_set), best * dt

    if n == 0:
        return Allocation.empty(T), 0.0

    cells = [(i, t) for i in range(n) for t in range(T)]
    if kind == MechanismKind.CASE4:
        levels = [_levels(P[t], resolution) for i, t in cells]
    else:
        levels = [_levels(x[i, t], resolution) for i, t in cells]
    x_flat = np.array([x[i, t] for i, t in cells])
    slot_of = np.array([t for _, t in cells])
    user_of = np.array([i for i, _ in cells])
    energy_need = x.sum(axis=1) * dt

    def feasible(pts):
        ok = np.ones(len(pts), dtype=bool)
        for t in range(T):
            ok &= pts[:, slot_of == t].sum(axis=1) <= P[t] + 1e-9
        if kind in (MechanismKind.CASE4, MechanismKind.CASE6):
            for i in range(n):
                got = pts[:, user_of == i].sum(axis=1) * dt
                if kind == MechanismKind.CASE4:
                    ok &= got >= energy_need[i] - 1e-9
                else:
                    ok &= got <= energy_need[i] + 1e-9
        return ok

    def welfare(pts):
        return np.minimum(pts, x_flat).sum(axis=1) * dt

    pt, val = _grid_search(levels, feasible, welfare, budget)
    if pt is None or not math.isfinite(val):
        raise Infeasible("no grid point satisfies the outcome constraints")
    return Allocation(pt.reshape(n, T)), val


# -- misreporting --------------------------------------------------------------

def experienced_utility(true_s: Scenario, result: MechanismResult, i: int,
                        convention: str = EXPERIENCED) -> float:
    """Utility user ``i`` actually gets from ``result`` given its true demand.

    ``experienced``: value is received energy capped at true demand per slot.
    In the binary-need cases 1 and 2 a need counts only when met in full, so a
    user served less than its true demand gets nothing.
    ``valuation``: the mechanism's own valuation with true demands, so in
    case 1 a denied user has value 0 and still pays its charge.
    """
    alloc = result.allocation
    pay = float(result.payments[i])
    if convention == VALUATION:
        return float(solver_for(true_s.mechanism).valuations(true_s, alloc)[i]) - pay
    if convention != EXPERIENCED:
        raise ValueError(f"unknown utility convention {convention!r}")
    truth = np.asarray(true_s.users[i].demand.values)
    got = alloc.grants[i]
    dt = true_s.slot_duration
    if true_s.mechanism in (MechanismKind.CASE1, MechanismKind.CASE2):
        met = bool((got >= truth - EPS).all())
        value = math.fsum(truth) * dt if met else 0.0
    else:
        value = math.fsum(np.minimum(got, truth)) * dt
    return value - pay


def misreport_sweep(s: Scenario, i: int, grid: MisreportGrid | None = None,
                    convention: str = EXPERIENCED,
                    truthful: MechanismResult | None = None) -> list[MisreportEntry]:
    """Run the mechanism with user ``i``'s demand scaled by each grid factor.

    Reports whose rebuilt scenario is infeasible are returned with
    ``skipped=True``.
    """
    grid = grid or MisreportGrid()
    truthful = truthful or run_mechanism(s)
    u_true = experienced_utility(s, truthful, i, convention)
    out = []
    for f in grid.factors:
        if f == 1.0:
            out.append(MisreportEntry(f, u_true, u_true))
            continue
        lie = s.with_demand(i, s.users[i].demand.scaled(f))
        try:
            res = run_mechanism(lie)
        except Infeasible:
            out.append(MisreportEntry(f, u_true, math.nan, skipped=True))
            continue
        out.append(MisreportEntry(f, u_true, experienced_utility(s, res, i, convention)))
    return out


# -- property report -------------------------------------------------------------

def _sign_verdict(name, values, s, asserted, tol):
    if len(values) == 0:
        return Verdict(name, HOLDS if asserted else RECORDED, asserted=asserted)
    k = int(np.argmin(values))
    margin = float(values[k])
    bad = margin < -tol
    if asserted:
        status = VIOLATED if bad else HOLDS
    else:
        status = RECORDED
    return Verdict(name, status, margin, asserted, Witness(s, k) if bad else None)


def check_properties(s: Scenario, grid: MisreportGrid | None = None,
                     resolution: float = DEFAULT_RESOLUTION,
                     budget: int = DEFAULT_BUDGET, eps: float = EPS,
                     truthfulness: bool = True, oracle: bool = True,
                     result: MechanismResult | None = None) -> PropertyReport:
    """Check the allocation properties the mechanism is claimed to have.

    Capacity and no positive transfer are asserted for every case; individual
    rationality for cases 2-4; truthfulness for cases 1-3 (case 1 under the
    ``valuation`` utility convention). Other combinations are recorded with
    their worst margin and a witness, never failed.
    """
    require_valid(s)
    report = PropertyReport(s)
    kind = s.mechanism
    try:
        result = result or run_mechanism(s, eps=eps)
    except Infeasible as exc:
        report.infeasible = True
        report.add(Verdict("feasibility", RECORDED, asserted=False, note=str(exc)))
        return report

    P = s.production_array()
    over = result.allocation.capacity_violation(P)
    report.add(Verdict("capacity", VIOLATED if over > eps else HOLDS, 0.0 - over,
                       witness=Witness(s) if over > eps else None))

    if kind == MechanismKind.CASE3:
        used = float(result.allocation.grants.sum()) if s.n_users else 0.0
        target = min(float(P[0]), math.fsum(s.demand_matrix()[:, 0]))
        gap = abs(used - target)
        report.add(Verdict("utilization", VIOLATED if gap > eps else HOLDS, 0.0 - gap,
                           witness=Witness(s) if gap > eps else None))

    report.add(_sign_verdict("no_positive_transfer", result.payments, s, True, eps))
    report.add(_sign_verdict("individual_rationality", result.utilities, s,
                             kind in IR_ASSERTED, eps))

    if truthfulness:
        report.add(_truth_verdict(s, result, grid))

    if oracle:
        report.add(_oracle_verdict(s, result, resolution, budget, eps))
    return report


def _truth_verdict(s, result, grid) -> Verdict:
    kind = s.mechanism
    asserted = kind in TRUTH_ASSERTED
    convention = VALUATION if kind == MechanismKind.CASE1 else EXPERIENCED
    worst, witness, samples = math.inf, None, []
    for i in range(s.n_users):
        for e in misreport_sweep(s, i, grid, convention, truthful=result):
            if e.skipped:
                continue
            samples.append(e.margin)
            if e.margin < worst:
                worst, witness = e.margin, Witness(s, i, e.factor)
    bad = worst < -TRUTH_TOL
    if asserted:
        status = VIOLATED if bad else HOLDS
    else:
        status = RECORDED
    return Verdict("truthfulness", status, worst, asserted,
                   witness if bad else None, samples, note=f"convention={convention}")


def _oracle_verdict(s, result, resolution, budget, eps) -> Verdict:
    try:
        _, best = brute_force_outcome(s, resolution, budget)
    except BudgetExceeded as exc:
        return Verdict("welfare_oracle", SKIPPED, note=str(exc))
    except Infeasible:
        return Verdict("welfare_oracle", SKIPPED, note="grid contains no feasible point")
    if s.mechanism in (MechanismKind.CASE1, MechanismKind.CASE2):
        tol = eps
    else:
        tol = resolution * s.n_users * s.n_slots * s.slot_duration + eps
    gap = abs(result.welfare - best)
    return Verdict("welfare_oracle", VIOLATED if gap > tol else HOLDS, tol - gap,
                   witness=Witness(s) if gap > tol else None,
                   note=f"engine={result.welfare!r} oracle={best!r}")


def truth_margins(reports: Sequence[PropertyReport]) -> np.ndarray:
    """All recorded truthfulness margins across reports (for distributions)."""
    out = []
    for r in reports:
        v = r.verdicts.get("truthfulness")
        if v is not None:
            out.extend(v.samples)
    return np.asarray(out, dtype=float)
