import math

import numpy as np
import pytest

from conftest import gaussian_bump
from jkoflow.errors import CflError, DomainError
from jkoflow.reference import (cfl_report, exact_fractional_heat, explicit_pme_step,
                               ot_1d_exact, run_reference)
from jkoflow.spectral import ScalarField, TorusGrid


@pytest.fixture(scope="module")
def grid():
    return TorusGrid(1, 128, 8.0)


@pytest.fixture(scope="module")
def bump(grid):
    return gaussian_bump(grid, 0.5)


class TestExactHeat:
    def test_time_zero(self, bump):
        assert exact_fractional_heat(bump, 0.0, 0.25) is bump

    def test_single_mode(self, grid):
        x = grid.coordinates()[0]
        k = 2 * math.pi * 3 / grid.box_length
        u = ScalarField(grid, np.cos(k * x))
        out = exact_fractional_heat(u, 0.7, 0.25)
        np.testing.assert_allclose(out.values, math.exp(-k ** 1.5 * 0.7) * u.values, atol=1e-14)

    def test_semigroup(self, bump):
        a = exact_fractional_heat(exact_fractional_heat(bump, 0.3, 0.4), 0.5, 0.4)
        b = exact_fractional_heat(bump, 0.8, 0.4)
        np.testing.assert_allclose(a.values, b.values, atol=1e-12)

    def test_mass_and_monotone_amplitudes(self, bump):
        prev = np.abs(np.fft.fft(bump.values))
        for t in (0.1, 0.2, 0.5, 1.0):
            u = exact_fractional_heat(bump, t, 0.25)
            assert u.integral() == pytest.approx(1.0, abs=1e-13)
            amp = np.abs(np.fft.fft(u.values))
            assert np.all(amp <= prev + 1e-13)
            prev = amp

    def test_negative_time(self, bump):
        with pytest.raises(DomainError):
            exact_fractional_heat(bump, -1.0, 0.25)


class TestCfl:
    def test_uniform_is_unbounded(self, grid):
        rep = cfl_report(ScalarField(grid, np.full(grid.shape, 0.125)), 1.0, 0.25)
        assert rep.max_dt == math.inf and rep.max_speed == 0.0

    def test_bump_is_finite(self, bump):
        rep = cfl_report(bump, 1.0, 0.25)
        assert 0 < rep.max_dt < math.inf and rep.max_speed > 0

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
    def test_speed_homogeneity(self, bump, alpha):
        one = cfl_report(bump, alpha, 0.25).max_speed
        two = cfl_report(ScalarField(bump.grid, 2 * bump.values), alpha, 0.25).max_speed
        assert two == pytest.approx(2 ** alpha * one, rel=1e-12)


class TestExplicitStep:
    def test_uniform_unchanged(self, grid):
        u = ScalarField(grid, np.full(grid.shape, 0.125))
        out, rep = explicit_pme_step(u, 0.01, 1.0, 0.25)
        np.testing.assert_array_equal(out.values, u.values)
        assert rep.clipped_mass == 0.0

    def test_mass_after_many_steps(self, bump):
        u = bump
        for _ in range(100):
            u, _ = explicit_pme_step(u, cfl_report(u, 1.0, 0.25).max_dt, 1.0, 0.25)
        assert u.integral() == pytest.approx(1.0, abs=1e-10)
        assert np.all(u.values >= 0)

    def test_cfl_refusal(self, bump):
        dt = 10 * cfl_report(bump, 1.0, 0.25).max_dt
        with pytest.raises(CflError) as err:
            explicit_pme_step(bump, dt, 1.0, 0.25)
        assert err.value.report.max_dt < dt

    def test_negative_input(self, grid):
        v = np.ones(grid.shape)
        v[3] = -0.1
        with pytest.raises(DomainError):
            explicit_pme_step(ScalarField(grid, v), 1e-4, 1.0, 0.25)

    def test_max_norm_nonincreasing(self, bump):
        run = run_reference(bump, 1.0, 0.25, [0.1, 0.2, 0.3])
        maxima = [float(u.values.max()) for u in [bump] + run.states]
        assert np.all(np.diff(maxima) <= 1e-12)
        assert run.max_norm_increase <= 1e-12
        assert run.times == [0.1, 0.2, 0.3]

    def test_time_order_against_linear_flow(self):
        # alpha = 0: the step is forward Euler for du/dt = -(-Δ)^(1-s) u with
        # a discrete spatial operator; successive dt halvings expose the order.
        g = TorusGrid(1, 64, 8.0)
        u0 = gaussian_bump(g, 0.8)
        T, s = 0.2, 0.25

        def solve(n):
            u = u0
            for _ in range(n):
                u, _ = explicit_pme_step(u, T / n, 0.0, s, upwind=False, check_cfl=False)
            return u.values

        a, b, c = solve(100), solve(200), solve(400)
        order = math.log2(np.linalg.norm(a - b) / np.linalg.norm(b - c))
        assert order >= 0.9
        exact = exact_fractional_heat(u0, T, s).values
        assert np.linalg.norm(c - exact) / np.linalg.norm(exact) < 0.05


class TestOt1d:
    def test_identical(self, bump):
        assert ot_1d_exact(bump, bump) == 0.0

    @pytest.mark.parametrize("cells", [1, 4, 16])
    def test_translation(self, grid, bump, cells):
        moved = ScalarField(grid, np.roll(bump.values, cells))
        delta = cells * grid.spacing
        assert ot_1d_exact(bump, moved) == pytest.approx(delta, abs=grid.spacing)

    def test_uniform_blocks(self, grid):
        a = np.zeros(grid.shape)
        b = np.zeros(grid.shape)
        a[20:36] = 1.0
        b[60:76] = 1.0
        delta = 40 * grid.spacing
        r0 = ScalarField(grid, a / (a.sum() * grid.spacing))
        r1 = ScalarField(grid, b / (b.sum() * grid.spacing))
        assert ot_1d_exact(r0, r1) == pytest.approx(delta, rel=1e-10)

    def test_errors(self, grid, bump):
        with pytest.raises(DomainError):
            ot_1d_exact(bump, ScalarField(grid, 2 * bump.values))
        with pytest.raises(DomainError):
            ot_1d_exact(bump, bump, n_quantiles=100)
        g2 = TorusGrid(2, 8, 1.0)
        u2 = ScalarField(g2, np.ones(g2.shape))
        with pytest.raises(DomainError):
            ot_1d_exact(u2, u2)
