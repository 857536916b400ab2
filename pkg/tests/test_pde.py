import numpy as np
import pytest

from mfglab.errors import StepSizeError
from mfglab.measures import GridMeasure, TorusGrid, make_probe, w1_distance
from mfglab.model import ModelSpec, TrigPoly
from mfglab.pde import (
    TimeGrid,
    check_advective_step,
    central_gradient,
    fp_path,
    fp_step,
    hjb_backward_solve,
    second_difference,
)
from oracles import fp_spectral_error


class TestTimeGrid:
    def test_basics(self):
        tg = TimeGrid(dt=0.1, n_steps=5)
        assert tg.horizon == pytest.approx(0.5)
        np.testing.assert_allclose(tg.times, 0.1 * np.arange(6))

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(dt=0.0, n_steps=5)
        with pytest.raises(ValueError):
            TimeGrid(dt=0.1, n_steps=0)


class TestStepChecks:
    def test_cfl_violation(self):
        with pytest.raises(StepSizeError):
            check_advective_step(dt=0.1, h=1 / 64, max_alpha=2.0, nu=1.0)

    def test_peclet_violation(self):
        with pytest.raises(StepSizeError):
            check_advective_step(dt=1e-5, h=0.25, max_alpha=20.0, nu=1.0)

    def test_valid_step(self):
        check_advective_step(dt=5e-3, h=1 / 64, max_alpha=1.0, nu=1.0)


class TestTransport:
    def test_heat_flow_contracts_to_uniform(self):
        grid = TorusGrid(64)
        m = make_probe(grid, "bump", kappa=4.0)
        uniform = make_probe(grid, "uniform")
        zero = np.zeros((1, 64))
        dists = [w1_distance(m, uniform)]
        for _ in range(40):
            m = GridMeasure(grid, fp_path(m, zero, 0.01)[1])
            dists.append(w1_distance(m, uniform))
        assert all(b <= a + 1e-14 for a, b in zip(dists, dists[1:]))
        assert dists[-1] < 1e-3

    def test_fp_step_matches_path(self):
        grid = TorusGrid(32)
        m = make_probe(grid, "cosine")
        alpha = 0.5 * np.sin(2 * np.pi * grid.x)
        one = fp_step(m, alpha, 5e-3)
        path = fp_path(m, alpha[None, :], 5e-3)
        np.testing.assert_array_equal(one.mass, path[1])

    def test_shape_validation(self):
        grid = TorusGrid(32)
        m = make_probe(grid, "uniform")
        with pytest.raises(ValueError):
            fp_path(m, np.zeros((3, 16)), 5e-3)

    def test_spectral_dt_order(self):
        errs = [fp_spectral_error(64, dt, 0.5, semi_discrete=True)
                for dt in (4e-3, 2e-3, 1e-3)]
        orders = [np.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(orders) >= 0.9

    def test_spectral_h_order(self):
        errs = [fp_spectral_error(n, 2e-5, 0.1) for n in (8, 16, 32)]
        orders = [np.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(orders) >= 1.9


class TestHJB:
    def test_constant_data(self, model):
        grid = TorusGrid(32)
        c, delta = 0.7, 0.5
        const_model = ModelSpec(f_coupling=TrigPoly(), theta=0.0,
                                coupling_constant=c)
        m_path = np.broadcast_to(make_probe(grid, "uniform").mass, (101, 32))
        # F(x, m) is the flat derivative, which is 0 for constant coupling;
        # u decays from the terminal plateau toward 0
        u = hjb_backward_solve(const_model, grid, m_path, delta, 5e-3,
                               terminal_u=np.full(32, 1.0))
        assert np.all(np.diff(u[:, 0]) >= -1e-14)
        np.testing.assert_allclose(u[-1], 1.0)

    def test_comparison_in_terminal_data(self, model):
        grid = TorusGrid(32)
        m_path = np.broadcast_to(make_probe(grid, "cosine").mass, (201, 32))
        u_low = hjb_backward_solve(model, grid, m_path, 0.5, 5e-3)
        u_high = hjb_backward_solve(model, grid, m_path, 0.5, 5e-3,
                                    terminal_u=np.full(32, 0.3))
        diff = u_high - u_low
        assert np.all(diff >= -1e-12)
        # a constant raise contracts by (1 + delta dt)^(-steps)
        bound = 0.3 * (1 + 0.5 * 5e-3) ** (-200)
        assert diff[0].max() == pytest.approx(bound, rel=1e-6)

    def test_two_resolution_agreement(self, model):
        vals = {}
        for n in (32, 64):
            grid = TorusGrid(n)
            m_path = np.broadcast_to(make_probe(grid, "cosine").mass, (401, n))
            u = hjb_backward_solve(model, grid, m_path, 0.5, 5e-3)
            vals[n] = float(np.interp(0.5, grid.x, u[0]))
        assert vals[32] == pytest.approx(vals[64], abs=5e-3)

    def test_monotonicity_guard(self, model):
        grid = TorusGrid(64)
        m_path = np.broadcast_to(make_probe(grid, "uniform").mass, (11, 64))
        steep = 80.0 * np.cos(2 * np.pi * grid.x)
        with pytest.raises(StepSizeError):
            hjb_backward_solve(model, grid, m_path, 0.5, 0.05,
                               terminal_u=steep)


class TestDifferences:
    def test_central_gradient_exact_for_modes(self):
        grid = TorusGrid(128)
        u = np.sin(2 * np.pi * grid.x)
        g = central_gradient(u, grid.h)
        expected = 2 * np.pi * np.cos(2 * np.pi * grid.x) * np.sinc(2 * grid.h)
        np.testing.assert_allclose(g, expected, atol=1e-10)

    def test_second_difference_constant(self):
        grid = TorusGrid(16)
        np.testing.assert_allclose(second_difference(np.ones(16), grid.h), 0.0)
