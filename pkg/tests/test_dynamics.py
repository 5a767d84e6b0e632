import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lambdajc.dynamics import (BlockCouplings, amplitudes_at, assemble_state, block_couplings,
                               cubic_coefficients, cubic_residual, default_ode_step,
                               initial_weights, ode_oracle_block, ode_oracle_trajectory,
                               prepare_blocks, solve_block, solve_cubic_trig)
from lambdajc.errors import ComplexRootsError, DegenerateRootsError, StepSizeError
from lambdajc.model import FockGrid

from conftest import CONST, INV, SQRT, make_params


def couplings(va=0.0, vb=0.0, vc=0.0, k1=1.0, k2=1.0, d2=0.0, d3=0.0):
    return BlockCouplings(np.float64(va), np.float64(vb), np.float64(vc),
                          np.float64(k1), np.float64(k2), d2, d3)


def random_couplings(rng, size=None, scale=5.0):
    return BlockCouplings(rng.uniform(-scale, scale, size), rng.uniform(-scale, scale, size),
                          rng.uniform(-scale, scale, size), rng.uniform(0.05, scale, size),
                          rng.uniform(0.05, scale, size), *rng.uniform(-scale, scale, 2))


def arrowhead_charpoly(c):
    """Characteristic polynomial of the block generator in the mu variable, via numpy."""
    m = np.array([[c.V_A, c.kappa1, c.kappa2],
                  [c.kappa1, c.V_B + c.delta2, 0.0],
                  [c.kappa2, 0.0, c.V_C + c.delta3]], dtype=float)
    return np.poly(c.delta2 * np.eye(3) - m)


class TestCoefficients:
    def test_resonant_no_kerr(self):
        x = cubic_coefficients(couplings(k1=3.0, k2=4.0))
        assert x == (0.0, -25.0, 0.0)

    def test_explicit_values(self):
        # hand expansion of the defining determinant
        c = couplings(va=1.0, vb=2.0, vc=3.0, k1=0.5, k2=1.5, d2=0.25, d3=-1.0)
        x1, x2, x3 = cubic_coefficients(c)
        assert x1 == pytest.approx(4.5)
        assert x2 == pytest.approx(2.75 * 1.75 + 2.0 * 0.75 - 0.25 - 2.25)
        assert x3 == pytest.approx(2.0 * (0.75 * 1.75 - 2.25) - 0.25 * 1.75)

    def test_against_numpy_charpoly(self, rng):
        for _ in range(200):
            c = random_couplings(rng)
            np.testing.assert_allclose(cubic_coefficients(c), arrowhead_charpoly(c)[1:],
                                       rtol=1e-11, atol=1e-10)

    def test_block_couplings_from_params(self):
        p = make_params(chi=0.4, f=SQRT, delta=(7.0, 15.0))
        c = block_couplings(p, 3, 2)
        assert (c.V_A, c.V_B, c.V_C) == pytest.approx((2.4, 3.2, 3.6))
        assert (c.kappa1, c.kappa2) == pytest.approx((4.0, 3.0))
        assert (c.delta2, c.delta3) == (7.0, 15.0)


class TestCubic:
    def test_simple_roots(self):
        sol = solve_cubic_trig(0.0, -1.0, 0.0)
        np.testing.assert_allclose(np.sort(sol.mu), [-1.0, 0.0, 1.0], atol=1e-15)
        assert not sol.degenerate

    def test_integer_roots(self):
        sol = solve_cubic_trig(-6.0, 11.0, -6.0)
        np.testing.assert_allclose(np.sort(sol.mu), [1.0, 2.0, 3.0], rtol=1e-14)

    def test_triple_root_flagged(self):
        sol = solve_cubic_trig(-6.0, 12.0, -8.0)
        np.testing.assert_allclose(sol.mu, [2.0, 2.0, 2.0])
        assert sol.degenerate

    def test_double_root_flagged(self):
        # (mu - 1)^2 (mu + 2)
        assert solve_cubic_trig(0.0, -3.0, 2.0).degenerate

    def test_complex_roots_rejected(self):
        # mu^3 + mu has roots 0, +-i
        with pytest.raises(ComplexRootsError):
            solve_cubic_trig(0.0, 1.0, 0.0)

    def test_random_hermitian_blocks(self, rng):
        c = random_couplings(rng, size=1000, scale=20.0)
        sol = solve_cubic_trig(*cubic_coefficients(c))
        assert sol.residual.max() < 1e-9
        for i in range(0, 1000, 10):
            ref = np.sort(np.linalg.eigvalsh(np.array(
                [[c.V_A[i], c.kappa1[i], c.kappa2[i]],
                 [c.kappa1[i], c.V_B[i] + c.delta2, 0.0],
                 [c.kappa2[i], 0.0, c.V_C[i] + c.delta3]])))
            np.testing.assert_allclose(np.sort(sol.mu[i]), np.sort(c.delta2 - ref),
                                       atol=1e-9 * max(1.0, np.abs(ref).max()))

    def test_residual_definition(self):
        x = (np.array(-6.0), np.array(11.0), np.array(-6.0))
        r = cubic_residual(x, np.array([1.0, 2.0, 4.0]))
        # p(4) = 6; scale 11 * (1 + 4 + 16 + 64)
        assert r[2] == pytest.approx(6.0 / (11.0 * 85.0))
        assert r[0] == 0.0
        assert cubic_residual((np.array(0.0),) * 3, np.zeros(3)).tolist() == [0.0] * 3

    def test_accurate_small_root_next_to_large_one(self):
        # roots 682, 12.19, -0.024 of a Hermitian block: small root exact to roundoff
        sol = solve_cubic_trig(-694.1755410644807, 8296.9011165894, 199.9505428773555)
        assert sol.residual.max() < 1e-12

    @given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
    @settings(max_examples=200)
    def test_roots_from_real_triple(self, roots):
        x1, x2, x3 = np.poly(roots)[1:]
        sol = solve_cubic_trig(x1, x2, x3, check=False)
        assert sol.residual.max() < 1e-9


class TestWeights:
    def test_moment_identities(self, rng):
        for _ in range(100):
            c = random_couplings(rng)
            cubic = solve_cubic_trig(*cubic_coefficients(c))
            b = initial_weights(cubic, c)
            mu = cubic.mu
            assert np.sum(b) == pytest.approx(0.0, abs=1e-9)
            assert np.sum(mu * b) == pytest.approx(-1.0, abs=1e-9)
            assert np.sum(mu**2 * b) == pytest.approx(c.V_A + c.V_B - c.delta2, abs=1e-8)

    def test_root_order_does_not_matter(self, rng):
        c = random_couplings(rng)
        cubic = solve_cubic_trig(*cubic_coefficients(c))
        sol = solve_block(c, cubic)
        perm = cubic.__class__(cubic.x, cubic.mu[[2, 0, 1]], cubic.theta, cubic.degenerate)
        sol_p = solve_block(c, perm)
        for t in (0.3, 2.0, 9.0):
            np.testing.assert_allclose(amplitudes_at(sol, t), amplitudes_at(sol_p, t),
                                       atol=1e-12)

    def test_degenerate_block_raises(self):
        with pytest.raises(DegenerateRootsError):
            solve_block(couplings(k1=0.0, k2=0.0))


def rabi(k1, k2, t):
    w = np.hypot(k1, k2)
    return np.cos(w * t), -1j * k1 / w * np.sin(w * t), -1j * k2 / w * np.sin(w * t)


class TestClosedForm:
    def test_initial_condition(self, rng):
        for _ in range(20):
            amp = amplitudes_at(solve_block(random_couplings(rng)), 0.0)
            np.testing.assert_allclose(amp, (1.0, 0.0, 0.0), atol=1e-12)

    @pytest.mark.parametrize("k1,k2", [(1.0, 1.0), (3.3166, 3.3166), (2.0, 5.0), (7.0, 0.3)])
    def test_rabi_oracle(self, k1, k2):
        sol = solve_block(couplings(k1=k1, k2=k2))
        for t in np.linspace(0.0, 25.0, 101):
            np.testing.assert_allclose(amplitudes_at(sol, t), rabi(k1, k2, t), atol=1e-10)

    def test_norm_conserved(self, rng):
        sol = solve_block(random_couplings(rng, size=200, scale=30.0))
        for t in (0.1, 3.0, 25.0):
            assert np.max(np.abs(amplitudes_at(sol, t).norm - 1.0)) < 1e-9

    def test_matches_ode_on_random_blocks(self, rng):
        times = [1.0, 5.0, 20.0]
        for _ in range(6):
            c = random_couplings(rng)
            ode = ode_oracle_trajectory(c, times, default_ode_step(c))
            sol = solve_block(c)
            closed = np.array([amplitudes_at(sol, t) for t in times])
            assert np.max(np.abs(ode - closed)) < 1e-6

    def test_matches_ode_on_detuned_kerr_blocks(self, rng):
        p = make_params(chi=0.4, f=SQRT, g=INV, delta=(7.0, 15.0))
        for n1, n2 in rng.integers(0, 37, size=(4, 2)):
            c = block_couplings(p, int(n1), int(n2))
            for t in (1.0, 5.0, 20.0):
                got = amplitudes_at(solve_block(c), t)
                ref = ode_oracle_block(c, t, default_ode_step(c))
                assert np.max(np.abs(np.subtract(got, ref))) < 1e-6

    def test_kappa2_zero_reduces_to_two_level(self):
        c = couplings(va=0.3, vb=-0.2, vc=1.0, k1=1.7, k2=0.0, d2=0.5, d3=2.0)
        sol = solve_block(c)
        for t in (0.5, 4.0, 11.0):
            got = amplitudes_at(sol, t)
            assert got.C == 0
            np.testing.assert_allclose(got, ode_oracle_block(c, t, 0.01), atol=1e-7)

    def test_kappa1_zero(self):
        c = couplings(va=0.3, vb=-0.2, vc=1.0, k1=0.0, k2=1.7, d2=0.5, d3=2.0)
        sol = solve_block(c)
        for t in (0.5, 4.0, 11.0):
            got = amplitudes_at(sol, t)
            assert abs(got.B) < 1e-12
            np.testing.assert_allclose(got, ode_oracle_block(c, t, 0.01), atol=1e-7)

    def test_continuity_under_small_perturbation(self, rng):
        c = random_couplings(rng)
        eps = 1e-9
        c2 = BlockCouplings(c.V_A + eps, c.V_B, c.V_C, c.kappa1 + eps, c.kappa2, c.delta2,
                            c.delta3)
        a, b = amplitudes_at(solve_block(c), 7.0), amplitudes_at(solve_block(c2), 7.0)
        assert np.max(np.abs(np.subtract(a, b))) < 1e-6


class TestOracle:
    def test_initial_value(self):
        np.testing.assert_array_equal(ode_oracle_block(couplings(), 0.0, 0.1), (1, 0, 0))

    def test_norm(self, rng):
        c = random_couplings(rng)
        traj = ode_oracle_trajectory(c, [2.0, 10.0], default_ode_step(c))
        assert np.max(np.abs(np.sum(np.abs(traj) ** 2, axis=1) - 1.0)) < 1e-9

    def test_step_size_error(self):
        with pytest.raises(StepSizeError):
            ode_oracle_trajectory(couplings(k1=40.0, k2=40.0), [25.0], 1.0, max_halvings=1)

    def test_bad_times(self):
        with pytest.raises(ValueError):
            ode_oracle_trajectory(couplings(), [2.0, 1.0], 0.1)


class TestState:
    def test_initial_snapshot(self, small_modes, small_grid):
        blocks = prepare_blocks(make_params(chi=0.4), small_modes, small_grid)
        snap = assemble_state(blocks, 0.0)
        np.testing.assert_allclose(snap.A, 1.0, atol=1e-12)
        np.testing.assert_allclose(snap.B, 0.0, atol=1e-12)
        np.testing.assert_allclose(snap.C, 0.0, atol=1e-12)

    def test_block_count(self, coherent10):
        blocks = prepare_blocks(make_params(), coherent10, FockGrid.for_modes(coherent10))
        assert blocks.n_blocks == 37 * 37
        assert blocks.degenerate_blocks == []

    def test_grid_matches_single_block(self, small_modes, small_grid):
        blocks = prepare_blocks(make_params(chi=0.4, delta=(7.0, 15.0)), small_modes, small_grid)
        snap = assemble_state(blocks, 3.7)
        ref = amplitudes_at(solve_block(block_couplings(blocks.params, 5, 3)), 3.7)
        np.testing.assert_allclose(snap.triple(5, 3), ref, atol=1e-13)

    @pytest.mark.parametrize("g", [CONST, INV])
    def test_global_norm(self, coherent10, g):
        p = make_params(chi=0.4, f=SQRT, g=g, delta=(7.0, 15.0))
        blocks = prepare_blocks(p, coherent10, FockGrid.for_modes(coherent10))
        for t in (0.0, 12.5, 25.0):
            snap = assemble_state(blocks, t)
            assert np.max(np.abs(snap.block_norms() - 1.0)) < 1e-8
            assert abs(snap.global_norm() - 1.0) < 1e-6

    def test_degenerate_blocks_use_oracle(self, small_modes):
        p = make_params(lam=(0.0, 0.0))
        blocks = prepare_blocks(p, small_modes, FockGrid((2, 2)))
        assert len(blocks.degenerate_blocks) == 9
        snap = assemble_state(blocks, 2.0)
        np.testing.assert_allclose(snap.A, 1.0, atol=1e-12)
        with pytest.raises(DegenerateRootsError):
            blocks.block(0, 0)

    def test_negative_time(self, small_modes, small_grid):
        with pytest.raises(ValueError):
            assemble_state(prepare_blocks(make_params(), small_modes, small_grid), -1.0)
