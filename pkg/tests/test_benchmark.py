import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubicgate.benchmark import (
    QWindow,
    estimate_chi_eff,
    gaussian_map,
    gaussian_map_moments,
    golden_section,
    ideal_moments,
    optimize_benchmark,
    solve_kappa,
)
from cubicgate.errors import FitError, SolverError
from cubicgate.fock import coherent, fidelity_mixed, moments, vacuum
from cubicgate.gate import run_deterministic


class TestMap:
    def test_no_coupling_is_identity(self):
        s = coherent(0.8, 48)
        rho = gaussian_map(s, 1e-4, 0.0, dim=48)
        assert fidelity_mixed(rho, s) >= 1 - 1e-6

    @pytest.mark.parametrize("lam", [0.25, 0.5, 1.0])
    def test_back_action(self, lam):
        base = moments(vacuum(48))
        rep = moments(gaussian_map(vacuum(48), lam, 0.0))
        assert rep.var_x == pytest.approx(base.var_x, abs=1e-8)
        assert rep.var_p - base.var_p == pytest.approx(lam**2 / 2, abs=1e-4)

    def test_back_action_value(self):
        rep = moments(gaussian_map(vacuum(48), 0.5, 0.0))
        assert rep.var_p == pytest.approx(0.625, abs=1e-6)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.1, 2.0), st.floats(-0.2, 0.2))
    def test_position_mean_preserved(self, lam, kappa):
        s = coherent(1.3, 48)
        rep = gaussian_map_moments(s, lam, kappa, with_purity=False)
        assert rep.mean_x == pytest.approx(moments(s).mean_x, abs=1e-8)
        assert rep.mean_x2 == pytest.approx(moments(s).mean_x2, abs=1e-8)

    def test_fock_and_grid_agree_where_fock_holds(self):
        s = coherent(0.5, 48)
        a = moments(gaussian_map(s, 0.7, 0.05))
        b = gaussian_map_moments(s, 0.7, 0.05)
        for k in ("mean_x", "mean_p", "mean_x2", "mean_p2", "purity"):
            assert getattr(a, k) == pytest.approx(getattr(b, k), abs=1e-7)


class TestKappa:
    def test_zero_target(self):
        assert solve_kappa(coherent(1.0, 48), 0.8, 0.0) == pytest.approx(0.0, abs=1e-9)

    def test_affine_in_kappa(self):
        s = coherent(1.0, 48)
        win = QWindow(-12.0, 12.0, 241)
        ks = np.array([-0.05, 0.02, 0.11])
        ps = [gaussian_map_moments(s, 0.6, k, win, with_purity=False).mean_p for k in ks]
        slope = (ps[1] - ps[0]) / (ks[1] - ks[0])
        assert ps[2] == pytest.approx(ps[0] + slope * (ks[2] - ks[0]), abs=1e-9)

    def test_closure_on_vacuum(self):
        s = vacuum(48)
        k = solve_kappa(s, 1.0, 0.09)
        rep = gaussian_map_moments(s, 1.0, k, with_purity=False)
        assert rep.mean_p == pytest.approx(0.09 * 0.5, abs=1e-6)

    def test_rejects_zero_gain(self):
        with pytest.raises(SolverError):
            solve_kappa(vacuum(48), 0.0, 0.09)


class TestIdeal:
    def test_ideal_first_moment(self):
        s = coherent(1.5, 48)
        m = moments(s)
        ideal = ideal_moments(s, 0.09)
        assert ideal.mean_p == pytest.approx(m.mean_p + 0.09 * m.mean_x2, abs=1e-12)
        assert ideal.mean_x2 == m.mean_x2

    def test_ideal_second_moment_closed_form(self):
        # coherent real alpha: <(p + c x^2)^2> = 1/2 + c^2 <x^4> with <x^4> = X^4 + 3X^2 + 3/4
        s = coherent(1.0, 48)
        X = math.sqrt(2.0)
        c = 0.09
        expected = 0.5 + c * c * (X**4 + 3 * X**2 + 0.75)
        assert ideal_moments(s, c).mean_p2 == pytest.approx(expected, abs=1e-12)


class TestGolden:
    def test_quadratic(self):
        x, fx = golden_section(lambda t: (t - 0.37) ** 2 + 1.0, 0.0, 2.0, 1e-8)
        assert x == pytest.approx(0.37, abs=1e-7)
        assert fx == pytest.approx(1.0)


class TestOptimize:
    def test_no_target_prefers_doing_nothing(self):
        s = coherent(1.0, 48)
        res = optimize_benchmark(s, 0.0)
        assert res.boundary
        assert res.lambda_opt < 0.01
        assert res.kappa_opt == pytest.approx(0.0, abs=1e-9)
        assert res.report.mean_p2 == pytest.approx(moments(s).mean_p2, abs=1e-4)

    def test_constraints_and_reproducibility(self):
        s = coherent(1.5, 48)
        a = optimize_benchmark(s, 0.09)
        b = optimize_benchmark(s, 0.09)
        assert a.report == b.report
        m = moments(s)
        assert a.report.mean_p == pytest.approx(m.mean_p + 0.09 * m.mean_x2, abs=1e-6)
        assert a.report.mean_x == pytest.approx(m.mean_x, abs=1e-8)
        assert a.added_noise > 0
        assert len(a.profile) == 25

    def test_profile_is_unimodal_for_large_alpha(self):
        res = optimize_benchmark(coherent(2.0, 48), 0.09)
        assert not res.boundary
        values = [v for _, v in res.profile]
        k = int(np.argmin(values))
        assert 0 < k < len(values) - 1
        assert np.all(np.diff(values[: k + 1]) < 0)
        assert np.all(np.diff(values[k:]) > 0)

    @pytest.mark.xfail(
        strict=True,
        reason="for |alpha| <= 1 the small-lambda noisy-displacement strategy wins; optimum sits at the lower edge",
    )
    def test_interior_optimum_for_unit_coherent(self):
        res = optimize_benchmark(coherent(1.0, 48), 0.09)
        assert not res.boundary

    @pytest.mark.xfail(
        strict=True,
        reason="the gate carries lambda^2 <p_R^2> = 1/2 of back-action; the optimized Gaussian map undercuts it",
    )
    def test_gaussian_above_gate_at_one_and_a_half(self):
        s = coherent(1.5, 48)
        gate = run_deterministic(s).report
        chi_eff = 0.0899
        res = optimize_benchmark(s, chi_eff)
        assert res.report.mean_p2 > gate.mean_p2


class TestFit:
    def test_exact_recovery(self):
        rng = np.random.default_rng(3)
        p_in = rng.normal(size=9)
        x2 = rng.uniform(0.5, 8, size=9)
        x = rng.normal(size=9)
        assert estimate_chi_eff(p_in, x2, p_in + 0.07 * x2, x) == pytest.approx(0.07, abs=1e-10)

    def test_needs_five_rows(self):
        with pytest.raises(FitError):
            estimate_chi_eff([0] * 4, [1] * 4, [0] * 4)

    def test_needs_distinct_positions(self):
        with pytest.raises(FitError):
            estimate_chi_eff([0] * 6, [1] * 6, [0.1] * 6, [0.5] * 6)

    def test_rank_deficient(self):
        with pytest.raises(FitError):
            estimate_chi_eff([0] * 6, [0] * 6, [0.1] * 6)

    def test_shape_mismatch(self):
        with pytest.raises(FitError):
            estimate_chi_eff([0] * 6, [1] * 5, [0] * 6)
