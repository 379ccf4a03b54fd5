import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from powermech.engine import run_mechanism
from powermech.errors import BudgetExceeded, InvalidScenario
from powermech.model import Scenario
from powermech.oracle import (EXPERIENCED, VALUATION, MisreportGrid, brute_force_outcome,
                              check_properties, experienced_utility, misreport_sweep,
                              truth_margins)


def scen(demands, prod, mech, **kw):
    return Scenario.build(demands, prod, mech, **kw)


class TestBruteForce:
    def test_case4_grid_welfare(self):
        alloc, best = brute_force_outcome(scen([[3, 0], [3, 2]], [4, 4], "case4"))
        assert best == 6.0
        assert (alloc.grants.sum(axis=0) <= 4).all()

    def test_case2_exact(self):
        _, best = brute_force_outcome(scen([5, 4, 3], 7, "case2"))
        assert best == 7.0

    def test_case1_prefers_blackout_free_outcome(self):
        alloc, best = brute_force_outcome(scen([6, 5], 10, "case1"))
        assert alloc.outcome == 0 and best == 0.0

    def test_case1_tie_serves(self):
        alloc, best = brute_force_outcome(scen([4, 6], 10, "case1"))
        assert alloc.outcome == 1 and best == 0.0

    def test_case3_grid_is_within_resolution(self):
        _, best = brute_force_outcome(scen([4, 8], 6, "case3"), resolution=0.5)
        assert best == 6.0

    def test_budget(self):
        s = scen([[5] * 4] * 4, [20] * 4, "case5")
        with pytest.raises(BudgetExceeded):
            brute_force_outcome(s, resolution=0.5, budget=1000)


class TestMisreport:
    def test_case3_truthful_is_best(self):
        s = scen([4, 4], 6, "case3")
        entries = misreport_sweep(s, 0)
        truthful = next(e for e in entries if e.factor == 1.0)
        assert truthful.truthful_utility == pytest.approx(2.0)
        assert min(e.margin for e in entries) >= -1e-7

    def test_grid_requires_truthful_factor(self):
        with pytest.raises(ValueError):
            MisreportGrid((0.5, 2.0))
        with pytest.raises(ValueError):
            MisreportGrid((-1.0, 1.0))

    def test_case1_conventions(self):
        s = scen([6, 5], 10, "case1")
        truthful = run_mechanism(s)
        # reporting nothing gets user 0 served with the others and charged nothing
        lie = run_mechanism(s.with_demand(0, s.users[0].demand.scaled(0.0)))
        assert experienced_utility(s, truthful, 0, EXPERIENCED) == -5.0
        assert experienced_utility(s, lie, 0, EXPERIENCED) == 0.0
        assert experienced_utility(s, truthful, 0, VALUATION) == -5.0
        assert experienced_utility(s, lie, 0, VALUATION) == -6.0

    def test_unknown_convention(self):
        s = scen([1], 2, "case3")
        with pytest.raises(ValueError):
            experienced_utility(s, run_mechanism(s), 0, "other")

    def test_infeasible_misreports_are_skipped(self):
        s = scen([[2, 2], [2, 2]], [4, 4], "case4")
        entries = misreport_sweep(s, 0, MisreportGrid((1.0, 2.0)))
        assert [e.skipped for e in entries] == [False, True]
        assert math.isnan(entries[1].misreport_utility)


class TestCheckProperties:
    def test_case3_all_hold(self):
        report = check_properties(scen([4, 8], 6, "case3"))
        assert report.ok
        assert {n: v.status for n, v in report.verdicts.items()} == {
            "capacity": "holds", "utilization": "holds", "no_positive_transfer": "holds",
            "individual_rationality": "holds", "truthfulness": "holds",
            "welfare_oracle": "holds"}

    def test_case6_ir_recorded_with_witness(self):
        s = scen([2, 6], 8, "case6", c=0.5)
        v = check_properties(s).verdicts["individual_rationality"]
        assert v.status == "recorded" and not v.asserted
        assert v.margin == pytest.approx(-4.0)
        assert v.witness.scenario == s and v.witness.user in (0, 1)

    def test_case1_ir_recorded(self):
        report = check_properties(scen([6, 5], 10, "case1"))
        v = report.verdicts["individual_rationality"]
        assert v.status == "recorded" and v.margin == -5.0
        assert report.verdicts["truthfulness"].status == "holds"
        assert report.ok

    def test_empty_scenario(self):
        report = check_properties(scen([], 3, "case3"))
        assert report.ok
        assert report.verdicts["truthfulness"].margin == math.inf

    def test_infeasible_scenario_recorded(self):
        report = check_properties(scen([[6, 6]], [5, 5], "case4"))
        assert report.infeasible and report.ok
        assert report.verdicts["feasibility"].status == "recorded"

    def test_invalid_rejected(self):
        with pytest.raises(InvalidScenario):
            check_properties(scen([math.inf], 3, "case3"))

    def test_oracle_skipped_on_budget(self):
        s = scen([[5] * 4] * 4, [20] * 4, "case5")
        v = check_properties(s, truthfulness=False, budget=1000).verdicts["welfare_oracle"]
        assert v.status == "skipped"

    def test_witness_is_reproducible(self):
        s = scen([3, 4], 5, "case5")
        a = check_properties(s).verdicts["truthfulness"]
        b = check_properties(s).verdicts["truthfulness"]
        assert a.margin == b.margin and a.samples == b.samples
        assert (a.witness is None) == (b.witness is None)
        if a.witness is not None:
            assert (a.witness.user, a.witness.factor) == (b.witness.user, b.witness.factor)

    def test_truth_margins_collects_samples(self):
        reports = [check_properties(scen([4, 4], 6, "case3"), oracle=False)]
        margins = truth_margins(reports)
        assert margins.size == 2 * 9
        assert (margins >= -1e-7).all()

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from(["case2", "case3"]),
           st.lists(st.integers(1, 12).map(lambda v: v / 2), min_size=1, max_size=4),
           st.integers(0, 24).map(lambda v: v / 2))
    def test_asserted_properties_hold(self, mech, demands, prod):
        report = check_properties(scen(demands, prod, mech))
        assert report.ok, {n: v.margin for n, v in report.verdicts.items()}


def test_truthfulness_recorded_not_failed_for_case5():
    v = check_properties(scen([2, 6], 4, "case5"), oracle=False).verdicts["truthfulness"]
    assert v.status == "recorded"
    assert np.isfinite(v.margin)
