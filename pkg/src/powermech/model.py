"""Problem-instance data model: power series, users, scenarios.

All types are frozen dataclasses. Construction never raises on bad values so
that :func:`validate_scenario` can report every violation at once; operations
that need a valid scenario call :func:`require_valid`.

Units: power in kW per slot, slot durations in hours, energy in kWh. One
currency unit is worth one kWh.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidScenario

#: Absolute tolerance (kW or currency) for feasibility and sign checks.
EPS = 1e-9


class MechanismKind(str, enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"
    CASE3 = "case3"
    CASE4 = "case4"
    CASE5 = "case5"
    CASE6 = "case6"

    @property
    def single_slot(self) -> bool:
        return self in (MechanismKind.CASE1, MechanismKind.CASE2, MechanismKind.CASE3)


@dataclass(frozen=True)
class PowerSeries:
    values: tuple[float, ...]
    slot_duration: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "slot_duration", float(self.slot_duration))

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def scaled(self, factor: float) -> PowerSeries:
        return PowerSeries(tuple(v * factor for v in self.values), self.slot_duration)


@dataclass(frozen=True)
class UserProfile:
    id: str
    demand: PowerSeries


@dataclass(frozen=True)
class PenaltyParams:
    """Case 6 penalty: safety fraction ``c`` of production, slope ``k`` per kW over it."""

    c: float = 1.0
    k: float = 1.0


@dataclass(frozen=True)
class Scenario:
    users: tuple[UserProfile, ...]
    production: PowerSeries
    mechanism: MechanismKind = MechanismKind.CASE3
    params: PenaltyParams = field(default_factory=PenaltyParams)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if not isinstance(self.mechanism, MechanismKind):
            try:
                object.__setattr__(self, "mechanism", MechanismKind(self.mechanism))
            except ValueError:
                pass  # reported by validate_scenario

    @classmethod
    def build(
        cls,
        demands: Sequence[Sequence[float]] | Sequence[float],
        production: Sequence[float] | float,
        mechanism: MechanismKind | str = MechanismKind.CASE3,
        slot_duration: float = 1.0,
        ids: Sequence[str] | None = None,
        c: float = 1.0,
        k: float = 1.0,
    ) -> Scenario:
        """Convenience constructor from plain numbers.

        Scalars are promoted to single-slot series, so
        ``Scenario.build([5, 4, 3], 7, "case2")`` is a three-user, one-slot instance.
        """
        if np.ndim(production) == 0:
            production = [production]
        rows = [[d] if np.ndim(d) == 0 else list(d) for d in demands]
        if ids is None:
            ids = [f"u{i + 1}" for i in range(len(rows))]
        users = tuple(
            UserProfile(str(uid), PowerSeries(tuple(row), slot_duration))
            for uid, row in zip(ids, rows)
        )
        return cls(users, PowerSeries(tuple(production), slot_duration), mechanism,
                   PenaltyParams(c, k))

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_slots(self) -> int:
        return len(self.production)

    @property
    def slot_duration(self) -> float:
        return self.production.slot_duration

    @property
    def user_ids(self) -> list[str]:
        return [u.id for u in self.users]

    def demand_matrix(self) -> np.ndarray:
        """Demands as an ``(n_users, n_slots)`` array."""
        if not self.users:
            return np.zeros((0, self.n_slots))
        return np.array([u.demand.values for u in self.users], dtype=float)

    def production_array(self) -> np.ndarray:
        return self.production.as_array()

    def without(self, removed: Iterable[int]) -> Scenario:
        """Same scenario with the users at the given indices removed (order kept)."""
        gone = set(removed)
        return replace(self, users=tuple(u for i, u in enumerate(self.users) if i not in gone))

    def with_demand(self, i: int, demand: PowerSeries) -> Scenario:
        users = list(self.users)
        users[i] = replace(users[i], demand=demand)
        return replace(self, users=tuple(users))


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


def _series_violations(name: str, series: PowerSeries) -> list[Violation]:
    out = []
    if len(series) < 1:
        out.append(Violation("EmptySeries", f"{name} has no slots"))
    for t, v in enumerate(series.values):
        if not math.isfinite(v):
            out.append(Violation("NonFinitePower", f"{name}[{t}] = {v} is not finite"))
        elif v < 0:
            out.append(Violation("NegativePower", f"{name}[{t}] = {v} is negative"))
    d = series.slot_duration
    if not (math.isfinite(d) and d > 0):
        out.append(Violation("NonPositiveSlotDuration", f"{name} slot duration {d} must be > 0"))
    return out


def validate_scenario(s: Scenario) -> list[Violation]:
    """Return every invariant violation of ``s``; an empty list means valid."""
    out = _series_violations("production", s.production)
    seen: set[str] = set()
    for u in s.users:
        label = f"demand[{u.id}]"
        out.extend(_series_violations(label, u.demand))
        if len(u.demand) != len(s.production):
            out.append(Violation(
                "SeriesLengthMismatch",
                f"{label} has {len(u.demand)} slots, production has {len(s.production)}",
            ))
        if u.demand.slot_duration != s.production.slot_duration:
            out.append(Violation(
                "SlotDurationMismatch",
                f"{label} slot duration {u.demand.slot_duration} != "
                f"production slot duration {s.production.slot_duration}",
            ))
        if u.id in seen:
            out.append(Violation("DuplicateUserId", f"user id {u.id!r} appears more than once"))
        seen.add(u.id)

    if not isinstance(s.mechanism, MechanismKind):
        out.append(Violation("UnknownMechanism", f"unknown mechanism {s.mechanism!r}"))
    elif s.mechanism.single_slot and len(s.production) != 1:
        out.append(Violation(
            "MultiSlotUnsupported",
            f"{s.mechanism.value} is a single-slot mechanism, got {len(s.production)} slots",
        ))

    c, k = s.params.c, s.params.k
    if not (math.isfinite(c) and 0 < c <= 1):
        out.append(Violation("InvalidPenaltyParams", f"c = {c} must lie in (0, 1]"))
    if not (math.isfinite(k) and k >= 0):
        out.append(Violation("InvalidPenaltyParams", f"k = {k} must be >= 0"))
    return out


def require_valid(s: Scenario) -> None:
    violations = validate_scenario(s)
    if violations:
        raise InvalidScenario(violations)


def aggregate_demand(s: Scenario) -> PowerSeries:
    """Per-slot sum of all user demands (zeros when there are no users)."""
    total = s.demand_matrix().sum(axis=0) if s.users else np.zeros(s.n_slots)
    return PowerSeries(tuple(total), s.slot_duration)


def headroom(s: Scenario) -> np.ndarray:
    """Production minus aggregate demand per slot; negative marks a constrained slot."""
    return s.production_array() - np.asarray(aggregate_demand(s).values)


def energy_of(p: PowerSeries) -> float:
    """Energy in kWh: sum of value * slot duration."""
    return math.fsum(v * p.slot_duration for v in p.values)
