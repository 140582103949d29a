"""Time marching, Uzawa inner iteration and sparse SPD solves."""

import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp

from crcontact.analysis import brute_force_vi_oracle, energy_norm
from crcontact.assembly import assemble_load
from crcontact.solver import (
    FrictionState,
    SolverError,
    SPDFactor,
    TimeGrid,
    UzawaConfig,
    UzawaError,
    march,
    projection_P,
    solve_spd,
    stable_rho_tilde,
    uzawa_step_solve,
)
from crcontact.space import CRFunction
from conftest import random_cr


def random_spd(rng, n):
    A = rng.standard_normal((n, n))
    return sp.csr_matrix(A @ A.T + n * np.eye(n))


class TestTimeGrid:
    def test_schedule(self):
        grid = TimeGrid(T=1.0, N=40)
        assert grid.k == 0.025
        assert len(grid.nodes) == 41
        assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 1.0

    @pytest.mark.parametrize("T,N", [(0.0, 10), (-1.0, 10), (1.0, 0)])
    def test_validation(self, T, N):
        with pytest.raises(ValueError):
            TimeGrid(T=T, N=N)


class TestProjection:
    def test_clamps(self):
        assert projection_P(1.5) == 1.0
        assert projection_P(-2.0) == -1.0
        assert projection_P(0.3) == 0.3

    def test_vectorized(self):
        out = projection_P(np.array([-5.0, 0.0, 5.0]))
        assert np.array_equal(out, [-1.0, 0.0, 1.0])


class TestFrictionState:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            FrictionState(np.array([1.1]))


class TestUzawaConfig:
    def test_auto_accepted(self):
        UzawaConfig(rho_tilde="auto")

    @pytest.mark.parametrize("kw", [
        dict(rho_tilde=0.0), dict(rho_tilde="fast"),
        dict(eps=0.0), dict(max_iter=0),
    ])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            UzawaConfig(**kw)


class TestSolveSPD:
    def test_identity(self):
        rhs = np.array([1.0, -2.0, 3.0])
        assert np.allclose(solve_spd(sp.eye(3, format="csr"), rhs), rhs)

    def test_random_consistency(self):
        rng = np.random.default_rng(0)
        K = random_spd(rng, 10)
        x_star = rng.standard_normal(10)
        x = solve_spd(K, K @ x_star)
        assert np.allclose(x, x_star, rtol=1e-10, atol=1e-12)

    def test_zero_rhs(self, system2):
        x = solve_spd(system2.K, np.zeros(system2.K.shape[0]))
        assert np.all(x == 0.0)

    def test_singular_matrix_rejected(self):
        K = sp.csr_matrix(np.zeros((3, 3)))
        with pytest.raises(SolverError):
            solve_spd(K, np.ones(3))


class TestUzawaStep:
    def test_zero_loads_fixed_point(self, system2, space2, config):
        cfg = UzawaConfig(rho_tilde=1.0)
        u, state, it = uzawa_step_solve(system2, np.zeros(space2.n_dofs_free),
                                        CRFunction.zero(space2), 0.025, cfg,
                                        config.loads.g_a)
        assert it == 1
        assert np.all(u.coeffs == 0.0)
        assert np.all(state.lam == 0.0)

    def test_frictionless_matches_linear_solve(self, system2, space2, config):
        load = assemble_load(space2, config.loads, 1.0)
        cfg = UzawaConfig(rho_tilde=1.0)
        u, state, it = uzawa_step_solve(system2, load, CRFunction.zero(space2),
                                        0.025, cfg, g_a=0.0)
        direct = solve_spd(system2.K, load)
        assert np.max(np.abs(u.coeffs - direct)) <= 1e-9 * max(1, np.max(np.abs(direct)))
        assert np.all(state.lam == 0.0)

    def test_first_step_matches_oracle(self, system2, space2, material, config):
        k = 0.025
        load = assemble_load(space2, config.loads, k)
        cfg = UzawaConfig(rho_tilde="auto", eps=1e-12)
        u, state, _ = uzawa_step_solve(system2, load, CRFunction.zero(space2),
                                       k, cfg, config.loads.g_a)
        ref = brute_force_vi_oracle(system2, load, CRFunction.zero(space2), k,
                                    config.loads.g_a, tol=1e-12)
        err = energy_norm(u - ref, material, config.rho).total
        scale = energy_norm(ref, material, config.rho).total
        assert err <= 1e-6 * scale
        assert np.max(np.abs(state.lam)) <= 1.0

    def test_max_iter_exceeded_carries_state(self, system2, space2, config):
        load = assemble_load(space2, config.loads, 1.0)
        cfg = UzawaConfig(rho_tilde=1.0, eps=1e-14, max_iter=3)
        with pytest.raises(UzawaError) as exc_info:
            uzawa_step_solve(system2, load, CRFunction.zero(space2), 0.025,
                             cfg, config.loads.g_a)
        err = exc_info.value
        assert err.last_u is not None
        assert err.last_lam is not None
        assert len(err.history) == 3

    def test_fixed_point_independent_of_rho_tilde(self, system2, space2,
                                                  material, config):
        k = 0.025
        load = assemble_load(space2, config.loads, k)
        auto = stable_rho_tilde(system2, config.loads.g_a, k)
        results = []
        for rho_tilde in (0.5 * auto, auto):
            cfg = UzawaConfig(rho_tilde=rho_tilde, eps=1e-13, max_iter=100000)
            u, _, _ = uzawa_step_solve(system2, load, CRFunction.zero(space2),
                                       k, cfg, config.loads.g_a)
            results.append(u)
        diff = energy_norm(results[0] - results[1], material, config.rho).total
        scale = energy_norm(results[1], material, config.rho).total
        assert diff <= 1e-7 * scale


class TestStableRhoTilde:
    def test_positive_and_scales_with_k(self, system2, config):
        r1 = stable_rho_tilde(system2, config.loads.g_a, 0.025)
        r2 = stable_rho_tilde(system2, config.loads.g_a, 0.0125)
        assert r1 > 0
        assert r2 == pytest.approx(0.5 * r1, rel=1e-12)

    def test_trivial_without_contact(self, system2):
        assert stable_rho_tilde(system2, 0.0, 0.025) == 1.0


class TestMarch:
    def test_zero_everything(self, system2, config):
        loads = dataclasses.replace(config.loads, g_coeffs=((0.0,) * 3, (0.0,) * 3))
        traj = march(system2, loads, TimeGrid(T=1.0, N=5), UzawaConfig(rho_tilde=1.0))
        assert len(traj.displacements) == 6
        for u in traj.displacements:
            assert np.all(u.coeffs == 0.0)

    def test_step_schedule(self, system2, config):
        traj = march(system2, config.loads, TimeGrid(T=1.0, N=40),
                     UzawaConfig(rho_tilde="auto"))
        assert traj.grid.k == 0.025
        assert len(traj.uzawa_iters) == 40
        assert len(traj.displacements) == 41

    def test_monotone_growth_under_ramp(self, system2, material, config):
        traj = march(system2, config.loads, TimeGrid(T=1.0, N=40),
                     UzawaConfig(rho_tilde="auto"))
        norms = [energy_norm(u, material, config.rho).total
                 for u in traj.displacements]
        assert norms[0] == 0.0
        assert all(b > a for a, b in zip(norms[1:], norms[2:]))

    def test_multiplier_feasibility(self, system2, config):
        traj = march(system2, config.loads, TimeGrid(T=1.0, N=40),
                     UzawaConfig(rho_tilde="auto"))
        for lam in traj.multipliers:
            assert np.max(np.abs(lam)) <= 1.0

    def test_determinism(self, system2, config):
        runs = []
        for _ in range(2):
            traj = march(system2, config.loads, TimeGrid(T=1.0, N=10),
                         UzawaConfig(rho_tilde="auto"))
            runs.append(np.concatenate([u.coeffs for u in traj.displacements]))
        assert np.array_equal(runs[0], runs[1])

    def test_failure_reports_step(self, system2, config):
        cfg = UzawaConfig(rho_tilde=1.0, eps=1e-14, max_iter=2)
        with pytest.raises(UzawaError) as exc_info:
            march(system2, config.loads, TimeGrid(T=1.0, N=5), cfg)
        assert exc_info.value.step == 1

    def test_vi_residual_on_random_test_functions(self, system2, space2,
                                                  material, config):
        grid = TimeGrid(T=1.0, N=10)
        cfg = UzawaConfig(rho_tilde="auto", eps=1e-12)
        traj = march(system2, config.loads, grid, cfg)
        from crcontact.assembly import friction_value

        rng = np.random.default_rng(17)
        K = system2.K
        k = grid.k
        for n in (1, 5, 10):
            u = traj.displacements[n].coeffs
            du = (u - traj.displacements[n - 1].coeffs) / k
            load = assemble_load(space2, config.loads, grid.nodes[n])
            for _ in range(20):
                v = random_cr(space2, rng, scale=np.max(np.abs(du)) + 1e-3)
                a_term = float((K @ u) @ (v.coeffs - du))
                j_v = friction_value(space2, config.loads.g_a, v)
                j_du = friction_value(space2, config.loads.g_a,
                                      CRFunction(space2, du))
                l_term = float(load @ (v.coeffs - du))
                residual = a_term + j_v - j_du - l_term
                scale = abs(a_term) + j_v + j_du + abs(l_term)
                assert residual >= -1e-6 * scale
