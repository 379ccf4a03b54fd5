"""Scenario and report files, plus the seeded scenario generator.

Scenario JSON::

    {"slot_duration_h": 1.0,
     "production": [10.0],
     "users": [{"id": "u1", "demand": [3.0]}, ...],
     "mechanism": "case3",
     "params": {"c": 1.0, "k": 1.0}}

Floats are written with Python's shortest round-trip repr, so
``load(write(x))`` reproduces every finite value bit for bit.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from .engine import MechanismResult
from .errors import ParseError, ValidationError
from .model import (MechanismKind, PenaltyParams, PowerSeries, Scenario, UserProfile,
                    aggregate_demand, headroom, validate_scenario)
from .oracle import PropertyReport, Verdict

POLICIES = ("tight", "loose", "fixed")
TREND_HEADER = ["t", "production", "agg_demand", "agg_grant", "headroom"]


# -- scenarios -------------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    mech = s.mechanism.value if isinstance(s.mechanism, MechanismKind) else str(s.mechanism)
    return {
        "slot_duration_h": s.slot_duration,
        "production": list(s.production.values),
        "users": [{"id": u.id, "demand": list(u.demand.values)} for u in s.users],
        "mechanism": mech,
        "params": {"c": s.params.c, "k": s.params.k},
    }


def _field(doc: dict, name: str, where: str = "scenario"):
    if name not in doc:
        raise ParseError(f"{where}: missing field {name!r}")
    return doc[name]


def _numbers(value, where: str) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ParseError(f"{where}: expected an array of numbers")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{where}: {v!r} is not a number")
        out.append(float(v))
    return tuple(out)


def scenario_from_dict(doc: Any) -> Scenario:
    """Build a scenario from a parsed document (no validation beyond structure)."""
    if not isinstance(doc, dict):
        raise ParseError("scenario: top level must be an object")
    dt = _field(doc, "slot_duration_h")
    if isinstance(dt, bool) or not isinstance(dt, (int, float)):
        raise ParseError("scenario: slot_duration_h must be a number")
    production = PowerSeries(_numbers(_field(doc, "production"), "production"), dt)
    users_doc = _field(doc, "users")
    if not isinstance(users_doc, list):
        raise ParseError("scenario: users must be an array")
    users = []
    for k, u in enumerate(users_doc):
        if not isinstance(u, dict):
            raise ParseError(f"users[{k}]: expected an object")
        uid = _field(u, "id", f"users[{k}]")
        demand = _numbers(_field(u, "demand", f"users[{k}]"), f"users[{k}].demand")
        users.append(UserProfile(str(uid), PowerSeries(demand, dt)))
    mech = _field(doc, "mechanism")
    try:
        mech = MechanismKind(mech)
    except ValueError:
        raise ParseError(f"scenario: unknown mechanism {mech!r}") from None
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ParseError("scenario: params must be an object")
    c = params.get("c", PenaltyParams.c)
    k = params.get("k", PenaltyParams.k)
    for name, v in (("c", c), ("k", k)):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"params.{name} must be a number")
    return Scenario(tuple(users), production, mech, PenaltyParams(float(c), float(k)))


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


def loads_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    s = scenario_from_dict(doc)
    violations = validate_scenario(s)
    if violations:
        raise ValidationError(violations)
    return s


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file.

    Raises :class:`ParseError` for malformed documents and
    :class:`ValidationError` (carrying the violation list) for invalid ones.
    """
    return loads_scenario(Path(path).read_text())


def save_scenario(s: Scenario, path) -> None:
    atomic_write(Path(path), dumps_scenario(s))


def scenario_digest(s: Scenario) -> str:
    canon = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# -- generator --------------------------------------------------------------------

def generate_scenario(
    seed: int,
    n_users: int,
    n_slots: int,
    demand_range: tuple[float, float] = (0.5, 5.0),
    production_policy: str = "tight",
    mechanism: MechanismKind | str = MechanismKind.CASE3,
    fixed_level: float | None = None,
    slot_duration: float = 1.0,
    c: float = 1.0,
    k: float = 1.0,
    decimals: int = 3,
    step: float | None = None,
) -> Scenario:
    """Random scenario that depends only on its arguments.

    Demands are uniform on ``demand_range`` rounded to ``decimals`` places.
    Production per slot is 0.8x aggregate demand (``tight``), 1.2x
    (``loose``), or a constant (``fixed``; defaults to the mean aggregate
    demand, so total energy supply equals total demand).

    With ``step`` every demand is snapped to a multiple of it (at least one
    step) and production is rounded up to one, which keeps brute-force grids
    of that resolution feasible.
    """
    if n_users < 0 or n_slots < 1:
        raise ValueError("need n_users >= 0 and n_slots >= 1")
    lo, hi = demand_range
    if not 0 <= lo <= hi:
        raise ValueError(f"bad demand range {demand_range}")
    if step is not None and step <= 0:
        raise ValueError("step must be positive")
    if production_policy not in POLICIES:
        raise ValueError(f"production policy must be one of {POLICIES}")
    rng = np.random.default_rng(seed)
    x = np.round(rng.uniform(lo, hi, size=(n_users, n_slots)), decimals)
    if step is not None:
        x = np.maximum(np.round(x / step), 1) * step
    agg = x.sum(axis=0)
    if production_policy == "tight":
        P = 0.8 * agg
    elif production_policy == "loose":
        P = 1.2 * agg
    else:
        level = float(agg.mean()) if fixed_level is None else float(fixed_level)
        P = np.full(n_slots, level)
    if step is not None:
        P = np.ceil(np.round(P / step, 9)) * step
    return Scenario.build(x, P, mechanism, slot_duration, c=c, k=k)


# -- reports --------------------------------------------------------------------

def _verdict_to_dict(v: Verdict) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "status": v.status,
        "asserted": v.asserted,
        "margin": v.margin if math.isfinite(v.margin) else None,
    }
    if v.witness is not None:
        doc["witness"] = {
            "scenario_digest": scenario_digest(v.witness.scenario),
            "user": v.witness.user,
            "factor": v.witness.factor,
        }
    if v.samples:
        m = np.asarray(v.samples)
        doc["samples"] = {
            "count": int(m.size),
            "min": float(m.min()),
            "median": float(np.median(m)),
            "max": float(m.max()),
            "negative": int((m < 0).sum()),
        }
    if v.note:
        doc["note"] = v.note
    return doc


def trend_rows(result: MechanismResult) -> list[list[float]]:
    """One row per slot: t, production, aggregate demand/grant, headroom, grants."""
    s = result.scenario
    P = s.production_array()
    demand = np.asarray(aggregate_demand(s).values)
    room = headroom(s)
    grants = result.allocation.grants
    agg_grant = grants.sum(axis=0) if s.n_users else np.zeros(s.n_slots)
    rows = []
    for t in range(s.n_slots):
        rows.append([t, float(P[t]), float(demand[t]), float(agg_grant[t]), float(room[t]),
                     *(float(g) for g in grants[:, t])])
    return rows


def report_to_dict(result: MechanismResult, props: PropertyReport | None) -> dict[str, Any]:
    s = result.scenario
    users = []
    for i, u in enumerate(s.users):
        users.append({
            "id": u.id,
            "grant": [float(g) for g in result.allocation.grants[i]],
            "valuation": float(result.valuations[i]),
            "payment": float(result.payments[i]),
            "utility": float(result.utilities[i]),
            "pivotal": bool(result.pivotal[i]),
        })
    doc: dict[str, Any] = {
        "scenario_digest": scenario_digest(s),
        "mechanism": s.mechanism.value,
        "slot_duration_h": s.slot_duration,
        "welfare": float(result.welfare),
        "users": users,
        "trends": {
            "header": TREND_HEADER + [f"grant_{u.id}" for u in s.users],
            "rows": trend_rows(result),
        },
    }
    if props is not None:
        doc["properties"] = {
            "ok": props.ok,
            "verdicts": {k: _verdict_to_dict(v) for k, v in props.verdicts.items()},
        }
    return doc


def trends_csv(result: MechanismResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TREND_HEADER + [f"grant_{u.id}" for u in result.scenario.users])
    for row in trend_rows(result):
        w.writerow([row[0]] + [repr(v) for v in row[1:]])
    return buf.getvalue()


def trends_path(path) -> Path:
    return Path(path).with_suffix(".csv")


def write_report(result: MechanismResult, props: PropertyReport | None, path) -> None:
    """Write the JSON report to ``path`` and the trend table next to it (``.csv``)."""
    path = Path(path)
    atomic_write(path, json.dumps(report_to_dict(result, props), indent=2) + "\n")
    atomic_write(trends_path(path), trends_csv(result))


def load_report(path) -> dict[str, Any]:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed report: {exc}") from None


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
