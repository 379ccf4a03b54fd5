import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from powermech.engine import (Allocation, SolveCache, clarke_payment, groves_payment,
                              run_mechanism, social_choice)
from powermech.errors import Infeasible, InvalidScenario
from powermech.mechanisms import solver_for
from powermech.model import Scenario
from powermech.oracle import brute_force_outcome


def scen(demands, prod, mech, **kw):
    return Scenario.build(demands, prod, mech, **kw)


class TestSocialChoice:
    def test_case3_under_capacity(self):
        a = social_choice(solver_for("case3"), scen([2, 3], 10, "case3"))
        assert a.grants.tolist() == [[2], [3]]

    def test_case2_matches_enumeration(self):
        s = scen([5, 4, 3], 7, "case2")
        a = social_choice(solver_for("case2"), s)
        oracle, best = brute_force_outcome(s)
        assert a.grants.tolist() == [[0], [4], [3]]
        assert best == 7.0
        np.testing.assert_array_equal(a.grants, oracle.grants)

    @pytest.mark.parametrize("mech", ["case1", "case2", "case3", "case4", "case5", "case6"])
    def test_empty_scenario(self, mech):
        s = scen([], 5, mech)
        r = run_mechanism(s)
        assert r.allocation.grants.shape == (0, 1)
        assert r.payments.size == 0
        # case 1 keeps the distributor as a player, so its welfare is the production
        assert r.welfare == (5.0 if mech == "case1" else 0.0)

    def test_invalid_scenario_rejected(self):
        with pytest.raises(InvalidScenario) as err:
            run_mechanism(scen([-1], 5, "case3"))
        assert err.value.violations[0].code == "NegativePower"


class TestPayments:
    def test_groves_with_zero_h(self):
        s = scen([2, 3], 10, "case3")
        assert groves_payment(solver_for("case3"), s, 0, lambda sub: 0.0) == -3.0

    def test_groves_single_user(self):
        s = scen([4], 10, "case3")
        assert groves_payment(solver_for("case3"), s, 0, lambda sub: 0.0) == 0.0

    def test_groves_with_clarke_term_equals_clarke(self):
        solver = solver_for("case2")
        s = scen([5, 4, 3], 7, "case2")

        def h(sub):
            b = solver.solve(sub)
            return float(solver.valuations(sub, b).sum())

        for i in range(3):
            assert groves_payment(solver, s, i, h) == clarke_payment(solver, s, i)

    def test_clarke_case2(self):
        s = scen([5, 4, 3], 7, "case2")
        # leave-one-out optimum for user 2 from enumeration: {5} alone, worth 5
        _, b = brute_force_outcome(s.without([1]))
        assert b == 5.0
        assert clarke_payment(solver_for("case2"), s, 1) == b - 3.0 == 2.0

    def test_clarke_case3_rationed(self):
        s = scen([4, 8], 6, "case3")
        assert clarke_payment(solver_for("case3"), s, 0) == pytest.approx(2.0, abs=1e-12)

    def test_clarke_case3_no_rationing(self):
        s = scen([2, 3], 10, "case3")
        assert [clarke_payment(solver_for("case3"), s, i) for i in range(2)] == [0.0, 0.0]

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            clarke_payment(solver_for("case3"), scen([2], 3, "case3"), 1)

    def test_cache_solves_each_subproblem_once(self):
        calls = []
        base = solver_for("case2")

        class Counting(type(base)):
            def solve(self, s):
                calls.append(s.user_ids)
                return super().solve(s)

        run_mechanism(scen([5, 4, 3], 7, "case2"), solver=Counting())
        assert sorted(map(tuple, calls)) == sorted(
            [("u1", "u2", "u3"), ("u2", "u3"), ("u1", "u3"), ("u1", "u2")])

    def test_infeasible_propagates(self):
        with pytest.raises(Infeasible):
            run_mechanism(scen([[6, 6]], [5, 5], "case4"))


class TestRunMechanism:
    def test_case1_served(self):
        r = run_mechanism(scen([3, 4], 10, "case1"))
        assert r.allocation.grants.ravel().tolist() == [3, 4]
        assert r.payments.tolist() == [0, 0]
        # enumeration of A = {0, 1}: 10 - 7 = 3 >= 0
        assert r.welfare == 3.0

    def test_case1_blackout_avoided(self):
        r = run_mechanism(scen([6, 5], 10, "case1"))
        assert r.allocation.grants.ravel().tolist() == [0, 0]
        # without user 1, b = 1 worth 10 - 5; without user 2, 10 - 6
        assert r.payments.tolist() == [5, 4]
        assert r.utilities.tolist() == [-5, -4]
        assert r.pivotal.tolist() == [True, True]

    def test_case5_example(self):
        r = run_mechanism(scen([2, 6], 4, "case5"))
        np.testing.assert_allclose(r.allocation.grants.ravel(), [1, 3])
        np.testing.assert_allclose(r.payments, [1, 1])
        np.testing.assert_allclose(r.utilities, [0, 2])

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(["case1", "case2", "case3", "case5", "case6"]),
           st.lists(st.integers(0, 20).map(lambda v: v / 2), max_size=5),
           st.integers(0, 40).map(lambda v: v / 2))
    def test_result_invariants(self, mech, demands, prod):
        r = run_mechanism(scen(demands, prod, mech))
        np.testing.assert_array_equal(r.utilities, r.valuations - r.payments)
        solver = solver_for(mech)
        assert r.welfare == pytest.approx(
            r.valuations.sum() + solver.house_value(r.scenario, r.allocation), abs=1e-12)
        assert (r.pivotal == (r.payments > 1e-9)).all()
        assert r.allocation.is_feasible(r.scenario.production_array())

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(["case2", "case3", "case5"]),
           st.lists(st.integers(0, 20).map(lambda v: v / 2), min_size=1, max_size=5),
           st.integers(0, 40).map(lambda v: v / 2))
    def test_leave_one_out_monotone(self, mech, demands, prod):
        s = scen(demands, prod, mech)
        solver = solver_for(mech)
        cache = SolveCache(solver, s)
        _, a = cache.solve()
        vals = solver.valuations(s, a)
        for i in range(s.n_users):
            sub, b = cache.solve([i])
            assert solver.valuations(sub, b).sum() >= vals.sum() - vals[i] - 1e-9


def test_allocation_is_read_only():
    a = Allocation([[1.0, 2.0]])
    with pytest.raises(ValueError):
        a.grants[0, 0] = 5.0
