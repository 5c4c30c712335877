import numpy as np
import pytest

from leoho.errors import OracleCapError, ValidationError
from leoho.oracle import SEARCH_SPACE_CAP, brute_force_alloc, brute_force_ue
from leoho.planner import initial_plan
from leoho.utility import UtilitySpec

from conftest import make_tiny_scenario
from leoho.channel import compute_rates
from leoho.geometry import build_visibility


class TestBruteForceUe:
    def test_single_visible_sat_returns_only_sequence(self):
        scenario = make_tiny_scenario(n_ues=1, n_sats=4, num_slots=3, min_elevation_deg=30.0)
        vis = build_visibility(scenario)
        rates = compute_rates(scenario, vis)
        base = initial_plan(scenario, vis)
        single = all(len(vis.sats(0, t)) == 1 for t in range(vis.num_slots))
        row, obj = brute_force_ue(0, base, scenario, vis, rates)
        if single:
            assert row == [vis.sats(0, t)[0] for t in range(vis.num_slots)]

    def test_enumeration_count(self, tiny_world):
        # M choices per slot over T slots enumerates prod(|M_i[t]|) sequences.
        scenario, vis, rates = tiny_world
        base = initial_plan(scenario, vis)
        calls = 0
        import leoho.oracle as oracle_mod

        original = oracle_mod.evaluate_plan

        def counting(*args, **kwargs):
            nonlocal calls
            calls += 1
            return original(*args, **kwargs)

        oracle_mod.evaluate_plan = counting
        try:
            brute_force_ue(0, base, scenario, vis, rates)
        finally:
            oracle_mod.evaluate_plan = original
        expected = 1
        for t in range(vis.num_slots):
            expected *= len(vis.sats(0, t))
        assert calls == expected

    def test_cap_enforced(self, tiny_world):
        scenario, vis, rates = tiny_world
        base = initial_plan(scenario, vis)
        import leoho.oracle as oracle_mod

        old_cap = oracle_mod.SEARCH_SPACE_CAP
        oracle_mod.SEARCH_SPACE_CAP = 1
        try:
            with pytest.raises(OracleCapError):
                brute_force_ue(0, base, scenario, vis, rates)
        finally:
            oracle_mod.SEARCH_SPACE_CAP = old_cap


class TestBruteForceAlloc:
    def test_single_ue(self):
        got = brute_force_alloc(UtilitySpec(alpha=1.0), {4: 7.0})
        assert got.shares == {4: 1.0}

    def test_symmetric_pair_splits_evenly(self):
        got = brute_force_alloc(UtilitySpec(alpha=1.0), {0: 5.0, 1: 5.0}, grid_step=1e-3)
        assert got.shares[0] == pytest.approx(0.5, abs=1e-3)
        assert got.shares[1] == pytest.approx(0.5, abs=1e-3)

    def test_alpha_half_matches_closed_form(self):
        from leoho.alloc import allocate_closed_form

        got = brute_force_alloc(UtilitySpec(alpha=0.5), {0: 1.0, 1: 3.0}, grid_step=1e-3)
        want = allocate_closed_form(0.5, {0: 1.0, 1: 3.0})
        for ue in (0, 1):
            assert got.shares[ue] == pytest.approx(want.shares[ue], abs=1.5e-3)

    def test_three_ues(self):
        from leoho.alloc import allocate_closed_form

        dmax = {0: 1.0, 1: 2.0, 2: 4.0}
        got = brute_force_alloc(UtilitySpec(alpha=2.0), dmax, grid_step=5e-3)
        want = allocate_closed_form(2.0, dmax)
        for ue in dmax:
            assert got.shares[ue] == pytest.approx(want.shares[ue], abs=6e-3)

    def test_rejects_more_than_three(self):
        with pytest.raises(ValidationError):
            brute_force_alloc(UtilitySpec(alpha=1.0), {0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0})
