import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmboost.core import CovariatePath, value_at
from lmboost.errors import InvalidArgumentError
from lmboost.rng import substream
from lmboost.simulate import (
    _envelope_values,
    _hazard_values,
    oracle_survival,
    scenario_constant,
    scenario_hazard,
    scenario_highdim,
    scenario_linear,
    scenario_nonlinear,
    scenario_two_state,
    simulate_panel,
    two_state_survival_analytic,
)


def _path(jumps, values):
    vals = np.asarray(values, dtype=np.float64)
    return CovariatePath(np.asarray(jumps, dtype=np.float64), vals)


class TestHazardFormulas:
    def test_linear(self):
        scen = scenario_linear()
        path = _path([0.0], [[1.0, 0.0, 0.7]])
        got = scenario_hazard(scen, 0.4, path)
        want = math.exp(math.log(0.3) + 0.2 * 0.4 + 0.1 * 1.0 + 0.3 * 0.0 + 0.3 * 0.7)
        assert got == pytest.approx(want, rel=1e-12)

    def test_linear_uses_value_at_t(self):
        scen = scenario_linear()
        path = _path([0.0, 0.5], [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
        before = scenario_hazard(scen, 0.49, path)
        after = scenario_hazard(scen, 0.5, path)
        assert before == pytest.approx(0.3 * math.exp(0.2 * 0.49), rel=1e-12)
        assert after == pytest.approx(
            math.exp(math.log(0.3) + 0.2 * 0.5 + 0.1 + 0.3 + 0.3), rel=1e-12)

    def test_nonlinear_pre_change_convention(self):
        scen = scenario_nonlinear()
        path = _path([0.0, 0.5], [[1.0, 1.0, 0.2], [1.0, 0.0, 0.9]])
        # before the first update the pre-change value is the zero convention
        got0 = scenario_hazard(scen, 0.3, path)
        want0 = math.exp(
            math.log(0.3) + 0.3 * abs(math.sin(math.pi * 0.3 * 1.0))
            + 0.2 * math.cos(1.0) + 0.5 * 1.0 + 0.3 * 0.0 ** 2
        )
        assert got0 == pytest.approx(want0, rel=1e-12)
        # after it, the previous segment's third covariate enters squared
        got1 = scenario_hazard(scen, 0.8, path)
        want1 = math.exp(
            math.log(0.3) + 0.3 * abs(math.sin(math.pi * 0.8 * 0.0))
            + 0.2 * math.cos(1.0) + 0.5 * 0.0 + 0.3 * 0.2 ** 2
        )
        assert got1 == pytest.approx(want1, rel=1e-12)

    def test_nonlinear_indicator_needs_both_conditions(self):
        scen = scenario_nonlinear()
        base = dict(t=np.array([0.2]), w3p=np.zeros(1))
        on = _hazard_values(scen, base["t"], np.array([[1.0, 0.0, 0.4]]), base["w3p"])[0]
        off1 = _hazard_values(scen, base["t"], np.array([[0.0, 0.0, 0.4]]), base["w3p"])[0]
        off2 = _hazard_values(scen, base["t"], np.array([[1.0, 0.0, 0.6]]), base["w3p"])[0]
        assert on / off2 == pytest.approx(math.exp(0.5), rel=1e-12)
        assert off1 < on

    def test_highdim_noise_has_no_effect(self):
        lin = scenario_linear()
        hd = scenario_highdim(dataset_seed=3)
        t = np.array([0.6])
        w3 = np.array([0.0])
        w_lin = np.array([[1.0, 1.0, 0.25]])
        w_hd = np.concatenate([w_lin, 5.0 * np.ones((1, 47))], axis=1)
        assert _hazard_values(hd, t, w_hd, w3)[0] == \
            pytest.approx(_hazard_values(lin, t, w_lin, w3)[0], rel=1e-15)

    def test_constant_and_two_state(self):
        assert scenario_hazard(scenario_constant(0.5), 0.3, _path([0.0], np.empty((1, 0)))) == 0.5
        scen = scenario_two_state(0.2, 0.6, flip_rate=2.0)
        assert scenario_hazard(scen, 0.1, _path([0.0], [[0.0]])) == pytest.approx(0.2)
        assert scenario_hazard(scen, 0.1, _path([0.0], [[1.0]])) == pytest.approx(0.8)


class TestEnvelope:
    @given(
        kind=st.sampled_from(["linear", "nonlinear"]),
        w1=st.sampled_from([0.0, 1.0]),
        w2=st.sampled_from([0.0, 1.0]),
        w3=st.floats(-3.0, 3.0),
        w3p=st.floats(-3.0, 3.0),
        lo=st.floats(0.0, 0.9),
        frac=st.floats(0.0, 1.0),
    )
    @settings(max_examples=300, deadline=None)
    def test_envelope_dominates_hazard(self, kind, w1, w2, w3, w3p, lo, frac):
        scen = scenario_linear() if kind == "linear" else scenario_nonlinear()
        hi = lo + (1.0 - lo) * 0.5
        t = lo + frac * (hi - lo)
        w = np.array([[w1, w2, w3]])
        w3p_arr = np.array([w3p])
        alpha = _hazard_values(scen, np.array([t]), w, w3p_arr)[0]
        bound = _envelope_values(scen, w, w3p_arr, hi)[0]
        assert alpha <= bound * (1 + 1e-9)


class TestSimulation:
    def test_panel_deterministic_and_thread_invariant(self):
        scen = scenario_linear()
        a = simulate_panel(scen, 40, seed=11)
        b = simulate_panel(scen, 40, seed=11)
        c = simulate_panel(scen, 40, seed=11, threads=3)
        for x, y in ((a, b), (a, c)):
            assert len(x) == len(y)
            for r1, r2 in zip(x, y):
                assert r1.id == r2.id
                assert r1.event_time == r2.event_time
                assert r1.censor_time == r2.censor_time
                assert np.array_equal(r1.path.jump_times, r2.path.jump_times)
                assert np.array_equal(r1.path.values, r2.path.values)

    def test_different_seeds_differ(self):
        scen = scenario_linear()
        a = simulate_panel(scen, 10, seed=1)
        b = simulate_panel(scen, 10, seed=2)
        assert any(x.censor_time != y.censor_time or
                   x.path.jump_times.size != y.path.jump_times.size
                   for x, y in zip(a, b))

    def test_record_invariants(self):
        scen = scenario_nonlinear()
        for rec in simulate_panel(scen, 60, seed=5):
            assert rec.censor_time <= scen.horizon_T
            assert rec.path.jump_times[0] == 0.0
            if rec.event_time is not None:
                assert 0 < rec.event_time <= rec.censor_time
            # full-window path: jumps stay inside [0, T)
            assert rec.path.jump_times[-1] < scen.horizon_T

    def test_no_censoring_means_horizon(self):
        scen = scenario_constant(0.5, lambda_C=0.0)
        recs = simulate_panel(scen, 25, seed=3)
        assert all(r.censor_time == 1.0 for r in recs)

    def test_constant_event_fraction(self):
        c, n = 2.0, 4000
        recs = simulate_panel(scenario_constant(c, lambda_C=0.0), n, seed=9)
        frac = np.mean([r.event_time is not None for r in recs])
        want = 1 - math.exp(-c)
        sigma = math.sqrt(want * (1 - want) / n)
        assert abs(frac - want) < 4 * sigma

    def test_update_rate(self):
        lam = 2.0
        recs = simulate_panel(scenario_linear(lambda_W=lam), 3000, seed=21)
        mean_jumps = np.mean([r.path.jump_times.size - 1 for r in recs])
        sigma = math.sqrt(lam / 3000)
        assert abs(mean_jumps - lam) < 4 * sigma


class TestOracle:
    def test_at_horizon_is_one(self):
        scen = scenario_linear()
        path = _path([0.0], [[1.0, 0.0, 0.5]])
        assert oracle_survival(scen, 0.4, path, 0.4, 100, substream(0, 7, 0)) == 1.0

    def test_constant_matches_closed_form(self):
        c = 0.8
        scen = scenario_constant(c)
        path = _path([0.0], np.empty((1, 0)))
        n = 40000
        got = oracle_survival(scen, 0.25, path, 1.0, n, substream(5, 7, 0))
        want = math.exp(-c * 0.75)
        sigma = math.sqrt(want * (1 - want) / n)
        assert abs(got - want) < 4 * sigma

    def test_two_state_mc_matches_analytic(self):
        scen = scenario_two_state(0.2, 0.6, flip_rate=2.0)
        n = 40000
        for w0 in (0.0, 1.0):
            path = _path([0.0], [[w0]])
            got = oracle_survival(scen, 0.2, path, 1.0, n, substream(8, 7, int(w0)))
            want = two_state_survival_analytic(0.2, 0.6, 2.0, 0.2, w0, 1.0)
            sigma = math.sqrt(max(want * (1 - want), 1e-8) / n)
            assert abs(got - want) < 4 * sigma

    def test_analytic_mode_dispatch(self):
        scen = scenario_two_state(0.2, 0.6, flip_rate=2.0)
        path = _path([0.0], [[1.0]])
        got = oracle_survival(scen, 0.3, path, 0.9, 1, None, method="analytic")
        assert got == pytest.approx(two_state_survival_analytic(0.2, 0.6, 2.0, 0.3, 1.0, 0.9))
        with pytest.raises(InvalidArgumentError):
            oracle_survival(scenario_linear(), 0.3, _path([0.0], [[0, 0, 0]]), 0.9, 1,
                            None, method="analytic")

    def test_two_state_analytic_no_flips_reduces_to_exponential(self):
        # with the flip rate at zero the chain never leaves its state
        assert two_state_survival_analytic(0.2, 0.6, 0.0, 0.1, 0.0, 1.0) == \
            pytest.approx(math.exp(-0.2 * 0.9), rel=1e-10)
        assert two_state_survival_analytic(0.2, 0.6, 0.0, 0.1, 1.0, 1.0) == \
            pytest.approx(math.exp(-0.8 * 0.9), rel=1e-10)

    def test_oracle_uses_history_state(self):
        scen = scenario_two_state(0.3, 1.5, flip_rate=0.0, lambda_C=0.0)
        path0 = _path([0.0], [[0.0]])
        path1 = _path([0.0, 0.2], [[0.0], [1.0]])
        s0 = oracle_survival(scen, 0.5, path0, 1.0, 20000, substream(2, 7, 0))
        s1 = oracle_survival(scen, 0.5, path1, 1.0, 20000, substream(2, 7, 1))
        assert s0 > s1  # the high-hazard state must survive less

    def test_bad_window(self):
        scen = scenario_linear()
        path = _path([0.0], [[0.0, 0.0, 0.0]])
        with pytest.raises(InvalidArgumentError):
            oracle_survival(scen, 0.5, path, 0.4, 10, substream(0, 7, 0))
        with pytest.raises(InvalidArgumentError):
            oracle_survival(scen, 0.5, path, 1.5, 10, substream(0, 7, 0))


class TestHighDim:
    def test_sigma_depends_on_dataset_seed(self):
        a = scenario_highdim(dataset_seed=1)
        b = scenario_highdim(dataset_seed=1)
        c = scenario_highdim(dataset_seed=2)
        assert np.array_equal(a.sigma_chol, b.sigma_chol)
        assert not np.array_equal(a.sigma_chol, c.sigma_chol)

    def test_noise_block_is_correlated(self):
        scen = scenario_highdim(dataset_seed=4)
        recs = simulate_panel(scen, 400, seed=6)
        noise0 = np.array([value_at(r.path, 0.0)[3:] for r in recs])
        sigma = scen.sigma_chol @ scen.sigma_chol.T
        emp = noise0.T @ noise0 / len(recs)
        # crude check on a couple of entries: empirical covariance tracks Sigma
        assert np.corrcoef(emp.ravel(), sigma.ravel())[0, 1] > 0.9

    def test_panel_has_50_covariates(self):
        scen = scenario_highdim(dataset_seed=4)
        rec = simulate_panel(scen, 1, seed=0)[0]
        assert rec.path.p == 50
