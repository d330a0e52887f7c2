import hashlib
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gaussian_bump
from jkoflow.diagnostics import (K_SEARCH_MAX, decay_rate_fit, entropy_decay_check,
                                 entropy_monotonicity, lambda_constant,
                                 lambda_constant_details, lp_norm, lyapunov_check,
                                 predicted_decay_slope, truncated_energies,
                                 truncated_energy_check, truncation_level_scan,
                                 truncation_tau_exponent)
from jkoflow.errors import ConfigError, DomainError
from jkoflow.jko import JkoConfig, JkoTrajectory, run_scheme
from jkoflow.mobility import POWER, TRUNCATED_POWER, EntropyGenerator, MobilitySpec
from jkoflow.reference import exact_fractional_heat, run_reference
from jkoflow.spectral import ScalarField, TorusGrid


def synthetic_trajectory(states, tau=0.1, s=0.25, spec=None, U=None, norms=None):
    spec = spec or MobilitySpec.power_shifted(1, 0.1)
    n = len(states)
    return JkoTrajectory(tau, s, spec, list(states), [0.0] * n, [0.0] * n,
                         list(U if U is not None else [0.0] * n),
                         list(norms if norms is not None else [0.0] * n), [0] * n)


def fingerprint(traj):
    h = hashlib.sha256()
    for u in traj.states:
        h.update(u.values.tobytes())
    h.update(np.asarray(traj.u_functionals).tobytes())
    h.update(np.asarray(traj.h1ms_norms).tobytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def run_1d():
    g = TorusGrid(1, 64, 8.0)
    cfg = JkoConfig(0.02, 15, 0.25, MobilitySpec.power_shifted(1, 0), auto_shift=True)
    return run_scheme(gaussian_bump(g, 0.5), cfg)


@pytest.fixture(scope="module")
def run_2d():
    g = TorusGrid(2, 16, 4.0)
    cfg = JkoConfig(0.02, 5, 0.25, MobilitySpec.power_shifted(1, 0), auto_shift=True,
                    n_time=4)
    return run_scheme(gaussian_bump(g, 0.4), cfg)


class TestLpNorm:
    def test_uniform_unit_volume(self):
        g = TorusGrid(2, 8, 1.0)
        u = ScalarField(g, np.ones(g.shape))
        for p in (1, 2, 3.5, math.inf):
            assert lp_norm(u, p) == pytest.approx(1.0, rel=1e-14)

    def test_block(self):
        g = TorusGrid(1, 64, 8.0)
        v = np.zeros(64)
        v[10:26] = 1.0
        width = 16 * g.spacing
        u = ScalarField(g, v / width)
        for p in (1.0, 2.0, 4.0):
            assert lp_norm(u, p) == pytest.approx(width ** (1 / p - 1), rel=1e-12)

    def test_p_below_one(self):
        g = TorusGrid(1, 8, 1.0)
        with pytest.raises(DomainError):
            lp_norm(ScalarField(g, np.ones(8)), 0.5)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), p=st.floats(1, 3), r=st.floats(4, 8),
           theta=st.floats(0, 1))
    def test_hoelder_interpolation(self, seed, p, r, theta):
        g = TorusGrid(1, 32, 2.0)
        u = ScalarField(g, np.random.default_rng(seed).standard_normal(32))
        q = 1.0 / (theta / p + (1 - theta) / r)
        bound = lp_norm(u, p) ** theta * lp_norm(u, r) ** (1 - theta)
        assert lp_norm(u, q) <= bound * (1 + 1e-12)


class TestLambdaConstant:
    def test_unit_exponent_closed_form(self):
        # d = 2, alpha = 1/2, s = 1/2 gives exponent (2 - 1) * 2 / 2 = 1.
        for k0 in (2, 3, 10):
            assert lambda_constant(k0, 1, 2, 0.5, 0.5, 3.0) == pytest.approx(
                3.0 * (k0 - 1) / k0, rel=1e-12)

    def test_positive_and_decreasing_in_levels(self, rng):
        for _ in range(10):
            d = int(rng.integers(1, 4))
            alpha, s = rng.uniform(0.2, 2), rng.uniform(0.05, 0.45)
            k0 = int(rng.integers(2, 20))
            vals = [lambda_constant(k0, L, d, alpha, s, 1.0) for L in (1, 2, 3, 4)]
            assert all(v > 0 for v in vals)
            assert np.all(np.diff(vals) <= 0)

    def test_large_start_tends_to_tail(self):
        e = 3 * 1 / (1 + 1.5)
        for k0 in (10 ** 3, 10 ** 5):
            got = lambda_constant_details(k0, 2, 1, 1.0, 0.25, 1.0)
            assert not got.attained_at_tail
            assert got.value == pytest.approx(1 / e, rel=2.0 / k0)

    def test_tail_branch(self):
        got = lambda_constant_details(K_SEARCH_MAX + 5, 2, 1, 1.0, 0.25, 2.0)
        assert got.attained_at_tail
        assert got.value == pytest.approx(2.0 / (3 / 2.5), rel=1e-14)

    @pytest.mark.parametrize("args", [(1, 1), (2, 0), (2.5, 1)])
    def test_invalid(self, args):
        with pytest.raises(DomainError):
            lambda_constant(args[0], args[1], 1, 1.0, 0.25, 1.0)


class TestDecayFit:
    def test_synthetic_power_law(self):
        t = np.geomspace(0.5, 4, 20)
        fit = decay_rate_fit((t, 3.0 * t ** -0.37), 2.0, (0.5, 4.0))
        assert fit.fitted_slope == pytest.approx(-0.37, abs=1e-10)
        assert fit.n_samples == 20

    def test_predicted_slope(self):
        assert predicted_decay_slope(2, 1, 1.0, 0.25) == pytest.approx(-0.2)
        fit = decay_rate_fit((np.geomspace(0.5, 4, 9), np.geomspace(1, 0.5, 9)), 2, (0.5, 4),
                             dim=1, alpha=1.0, s=0.25)
        assert fit.predicted_slope == pytest.approx(-0.2)

    @pytest.mark.parametrize("t", [np.geomspace(0.5, 4, 5), np.linspace(1, 2, 20)])
    def test_degenerate_window(self, t):
        with pytest.raises(DomainError):
            decay_rate_fit((t, t ** -1.0), 2, (0.5, 4))

    def test_nonpositive_norms(self):
        t = np.geomspace(0.5, 4, 10)
        with pytest.raises(DomainError):
            decay_rate_fit((t, np.zeros(10)), 2, (0.5, 4))

    def test_fractional_heat_self_similar_rate(self):
        # Heat-like limit (alpha = 0): L^2 decays like t^(-d / (4 (1 - s))).
        g = TorusGrid(1, 1024, 64.0)
        u0 = gaussian_bump(g, 0.2)
        t = np.geomspace(0.5, 4, 12)
        norms = [lp_norm(exact_fractional_heat(u0, ti, 0.25), 2) for ti in t]
        fit = decay_rate_fit((t, norms), 2, (0.5, 4), dim=1, alpha=0.0, s=0.25)
        assert fit.predicted_slope == pytest.approx(-1 / 3)
        assert fit.relative_error < 0.05

    def test_reference_run_source(self):
        g = TorusGrid(1, 64, 8.0)
        run = run_reference(gaussian_bump(g, 0.5), 1.0, 0.25, np.geomspace(0.05, 0.4, 8))
        fit = decay_rate_fit(run, 2, (0.05, 0.4), dim=1, alpha=1.0, s=0.25)
        assert fit.fitted_slope < 0


class TestLyapunov:
    def test_fixed_point(self):
        g = TorusGrid(1, 8, 1.0)
        u = ScalarField(g, np.ones(8))
        rep = lyapunov_check(synthetic_trajectory([u] * 4, U=[2.0] * 4))
        assert np.all(rep.slacks == 0) and rep.ok

    def test_zero_norm_slacks_are_differences(self):
        g = TorusGrid(1, 8, 1.0)
        U = [5.0, 3.0, 2.5, 2.4]
        rep = lyapunov_check(synthetic_trajectory([ScalarField(g, np.ones(8))] * 4, U=U))
        np.testing.assert_allclose(rep.slacks, -np.diff(U))

    def test_violation_flagged(self):
        g = TorusGrid(1, 8, 1.0)
        traj = synthetic_trajectory([ScalarField(g, np.ones(8))] * 3, tau=1.0,
                                    U=[1.0, 0.9, 0.8], norms=[0.0, 0.1, 1.0])
        assert lyapunov_check(traj).violations == (2,)

    def test_real_run(self, run_1d):
        rep = lyapunov_check(run_1d)
        assert rep.ok, rep.slacks


class TestEntropy:
    def test_dimension_precondition(self, run_1d):
        with pytest.raises(ConfigError):
            entropy_decay_check(run_1d, run_1d.mobility, EntropyGenerator(POWER, 2.0))

    def test_fixed_point(self):
        g = TorusGrid(2, 8, 1.0)
        u = ScalarField(g, np.ones(g.shape))
        rep = entropy_decay_check(synthetic_trajectory([u] * 3), MobilitySpec.power_shifted(1, 0.1),
                                  EntropyGenerator(POWER, 2.0))
        assert np.all(rep.decrements == 0) and rep.ok

    def test_quadratic_generator_constant_mobility(self, run_2d):
        spec = MobilitySpec.constant(1.0)
        rep = entropy_decay_check(run_2d, spec, EntropyGenerator(POWER, 2.0))
        q = 2 * 2 / (2 - 2 * (1 - run_2d.s))
        for k, u in enumerate(run_2d.states[1:]):
            nq = (np.sum((math.sqrt(2) * u.values) ** q) * u.grid.cell_volume) ** (1 / q)
            assert rep.gradient_terms[k] == pytest.approx(run_2d.tau * nq * nq, rel=1e-7)
        assert rep.ok and rep.min_ratio > 0

    @pytest.mark.parametrize("p", [2.0, 4.0])
    def test_monotone_on_runs(self, run_1d, run_2d, p):
        for traj in (run_1d, run_2d):
            dec, bad = entropy_monotonicity(traj, EntropyGenerator(POWER, p))
            assert not bad and np.all(dec >= -1e-6)

    def test_truncated_generator_agrees_with_truncation_check(self, run_2d):
        lam = 0.5 * float(run_2d.states[0].values.max())
        gen = EntropyGenerator(TRUNCATED_POWER, 2.0, lam)
        rep = entropy_decay_check(run_2d, run_2d.mobility, gen)
        trunc = truncated_energy_check(run_2d, lam)
        np.testing.assert_allclose(rep.decrements, trunc.energies[:-1] - trunc.energies[1:],
                                   rtol=1e-12, atol=1e-15)
        assert rep.ok == trunc.ok


class TestTruncation:
    def test_level_above_maximum(self, run_1d):
        rep = truncated_energy_check(run_1d, float(run_1d.states[0].values.max()))
        assert np.all(rep.energies == 0) and rep.ok

    def test_zero_level_is_l2(self, run_1d):
        e = truncated_energies(run_1d, 0.0)
        np.testing.assert_allclose(e, [lp_norm(u, 2) ** 2 for u in run_1d.states], rtol=1e-12)

    def test_negative_level(self, run_1d):
        with pytest.raises(DomainError):
            truncated_energy_check(run_1d, -1.0)

    def test_statistics_in_two_dimensions(self, run_2d):
        rep = truncated_energy_check(run_2d, 0.1 * float(run_2d.states[0].values.max()),
                                     t_start=0.04)
        assert math.isfinite(rep.integral_after) and rep.integral_after > 0
        assert rep.sup_after > 0

    def test_level_scan(self, run_1d):
        lam = truncation_level_scan(run_1d, 1e-3, t_start=0.1)
        after = [u for t, u in zip(run_1d.times, run_1d.states) if t >= 0.1]
        worst = max(math.sqrt(np.sum(np.maximum(u.values - lam, 0) ** 2) * u.grid.cell_volume)
                    for u in after)
        assert worst == pytest.approx(1e-3, rel=1e-6)
        assert 0 < lam < max(float(u.values.max()) for u in after)

    def test_level_decreases_with_tau(self):
        g = TorusGrid(1, 64, 8.0)
        u0 = gaussian_bump(g, 0.5)
        levels = []
        for tau in (0.04, 0.02, 0.01):
            cfg = JkoConfig(tau, round(0.4 / tau), 0.25, MobilitySpec.power_shifted(1, 0),
                            auto_shift=True, shift_constant=0.01)
            levels.append(truncation_level_scan(run_scheme(u0, cfg), 1e-3, t_start=0.2))
        assert levels[0] > levels[1] > levels[2]

    def test_tau_exponent(self):
        assert truncation_tau_exponent(1, 1.0, 0.25) == pytest.approx(2 / 1.5 + 2)


def test_checks_are_read_only(run_1d):
    before = fingerprint(run_1d)
    lyapunov_check(run_1d)
    entropy_monotonicity(run_1d, EntropyGenerator(POWER, 4.0))
    truncated_energy_check(run_1d, 0.1)
    truncation_level_scan(run_1d, 1e-3, 0.1)
    decay_rate_fit(run_1d, 2, (0.02, 0.3))
    assert fingerprint(run_1d) == before
