import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from couplersim.numerics import (
    RngStream,
    bessel_j,
    fit_least_squares,
    propagate,
    taylor_coefficients,
)

# J1(1.0) from the integral representation (1/pi) int_0^pi cos(t - sin t) dt,
# evaluated with adaptive quadrature before the build
J1_AT_1 = 0.44005058574493344


def bessel_quadrature(n, x):
    val, _ = quad(lambda t: math.cos(n * t - x * math.sin(t)) / math.pi, 0.0, math.pi,
                  limit=200, epsabs=1e-14)
    return val


class TestBessel:
    def test_identity_cases(self):
        assert bessel_j(0, 0.0) == 1.0
        assert bessel_j(1, 0.0) == 0.0

    def test_j1_at_one_matches_frozen_quadrature(self):
        assert bessel_j(1, 1.0) == pytest.approx(J1_AT_1, abs=1e-12)

    @pytest.mark.parametrize("n", [0, 1, 2, 5, 8])
    @pytest.mark.parametrize("x", [0.3, 2.0, 7.5, 13.0, 20.0])
    def test_against_quadrature(self, n, x):
        assert bessel_j(n, x) == pytest.approx(bessel_quadrature(n, x), abs=1e-12)

    def test_negative_argument_parity(self):
        assert bessel_j(2, -3.7) == pytest.approx(bessel_j(2, 3.7), abs=1e-14)
        assert bessel_j(3, -3.7) == pytest.approx(-bessel_j(3, 3.7), abs=1e-14)

    def test_recurrence_on_grid(self):
        for x in np.linspace(0.1, 20.0, 64):
            for n in range(1, 7):
                lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x)
                rhs = (2.0 * n / x) * bessel_j(n, x)
                assert lhs == pytest.approx(rhs, abs=1e-10)

    @given(n=st.integers(1, 8), x=st.floats(0.1, 20.0))
    @settings(max_examples=60, deadline=None)
    def test_recurrence_property(self, n, x):
        lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x)
        assert lhs == pytest.approx((2.0 * n / x) * bessel_j(n, x), abs=1e-10)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bessel_j(-1, 1.0)
        with pytest.raises(ValueError):
            bessel_j(0, 1e3)


class TestTaylorCoefficients:
    def test_exponential(self):
        deriv = taylor_coefficients(np.exp, 0.0, 8, 0.5)
        assert np.max(np.abs(deriv - 1.0)) < 1e-9

    def test_sine_off_center(self):
        deriv = taylor_coefficients(np.sin, 0.3, 7, 0.4)
        s, c = math.sin(0.3), math.cos(0.3)
        exact = [s, c, -s, -c, s, c, -s, -c]
        assert np.max(np.abs(deriv - exact)) < 1e-9


def random_hermitian(rng, dim, scale=1e7):
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (m + m.conj().T) / 2.0


def random_density(rng, dim):
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


class TestPropagate:
    def test_unitary_limit_preserves_purity(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            dim = int(rng.integers(2, 5))
            h = random_hermitian(rng, dim)
            rho0 = random_density(rng, dim)
            rho = propagate(h, [], rho0, duration=2e-7)
            p0 = np.trace(rho0 @ rho0).real
            p1 = np.trace(rho @ rho).real
            assert abs(p1 - p0) < 1e-9

    def test_pure_decay(self):
        gamma = 50e3  # Hz
        op = np.array([[0, 1], [0, 0]], dtype=complex)
        rho0 = np.array([[1, 0], [0, 0]], dtype=complex)

        # excited state is index 0 here: decay operator |g><e| with g = index 1
        op = np.array([[0, 0], [1, 0]], dtype=complex)
        duration = 3e-6
        rho = propagate(np.zeros((2, 2)), [(op, gamma)], rho0, duration)
        expected = math.exp(-2.0 * math.pi * gamma * duration)
        assert rho[0, 0].real == pytest.approx(expected, abs=1e-6)

        # trajectory (adaptive) path agrees too
        ts = np.linspace(0, duration, 7)
        traj = propagate(np.zeros((2, 2)), [(op, gamma)], rho0, duration, t_eval=ts)
        assert traj[-1][0, 0].real == pytest.approx(expected, abs=1e-6)

    def test_trace_preserved_on_random_systems(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            dim = int(rng.integers(2, 7))
            h = random_hermitian(rng, dim)
            n_ops = int(rng.integers(1, 4))
            collapse = []
            for _ in range(n_ops):
                op = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
                collapse.append((op / np.linalg.norm(op), float(rng.uniform(1e3, 1e6))))
            rho0 = random_density(rng, dim)
            rho = propagate(h, collapse, rho0, duration=1e-6)
            assert abs(np.trace(rho).real - 1.0) < 1e-9
            assert np.linalg.eigvalsh(rho).min() > -1e-8

    def test_rejects_non_hermitian_hamiltonian(self):
        h = np.array([[0, 1], [0, 0]], dtype=complex) * 1e6
        rho0 = np.diag([1.0, 0.0]).astype(complex)
        with pytest.raises(ValueError, match="Hermitian"):
            propagate(h, [], rho0, 1e-7)

    def test_rejects_bad_initial_state(self):
        h = np.zeros((2, 2))
        with pytest.raises(ValueError):
            propagate(h, [], np.array([[0.5, 0], [0, 0.4]]), 1e-7)  # trace != 1
        with pytest.raises(ValueError):
            propagate(h, [], np.array([[1.5, 0], [0, -0.5]]), 1e-7)  # not PSD

    def test_rejects_too_coarse_step(self):
        f0 = 5e9
        h = 2 * math.pi * f0 * np.diag([0.0, 1.0])
        rho0 = np.diag([0.0, 1.0]).astype(complex)
        with pytest.raises(ValueError, match="too coarse"):
            propagate(lambda t: h, [], rho0, 1e-8, step=1e-9)


class TestFitLeastSquares:
    def test_exact_linear(self):
        x = np.linspace(0, 10, 14)
        y = 3.0 * x - 1.25

        def model(x, a, b):
            return a * x + b

        fit = fit_least_squares(model, x, y, [1.0, 0.0])
        assert fit.converged
        assert fit.residual_norm == pytest.approx(0.0, abs=1e-10)
        assert fit.params[0] == pytest.approx(3.0, abs=1e-12)
        assert fit.params[1] == pytest.approx(-1.25, abs=1e-11)

    def test_noiseless_exponential_roundtrip(self):
        n = np.arange(0, 60, 3, dtype=float)
        a_true, lam_true = 0.71, 0.955
        y = a_true * lam_true ** n

        def model(n, a, lam):
            return a * lam ** n

        fit = fit_least_squares(model, n, y, [0.5, 0.9])
        assert abs(fit.params[0] - a_true) < 1e-8
        assert abs(fit.params[1] - lam_true) < 1e-8

    def test_permutation_invariance_is_exact(self):
        rng = np.random.default_rng(3)
        x = np.linspace(0, 5, 40)
        y = 2.0 * np.exp(-0.7 * x) + 0.05 * rng.standard_normal(40)

        def model(x, a, b):
            return a * np.exp(-b * x)

        fit1 = fit_least_squares(model, x, y, [1.0, 1.0])
        perm = rng.permutation(40)
        fit2 = fit_least_squares(model, x[perm], y[perm], [1.0, 1.0])
        assert np.array_equal(fit1.params, fit2.params)

    def test_rb_curve_vs_grid_search_oracle(self):
        rng = np.random.default_rng(42)
        n = np.unique(np.geomspace(1, 400, 16).astype(int)).astype(float)
        a0, b0, lam = 0.5, 0.5, 0.992
        p_true = a0 + b0 * lam ** n
        shots = 10_000
        y = rng.binomial(shots, p_true) / shots
        sigma = np.sqrt(np.clip(p_true * (1 - p_true), 1e-6, None) / shots)

        def model(n, a, b, l):
            return a + b * l ** n

        fit = fit_least_squares(model, n, y, [0.4, 0.6, 0.98], sigma=sigma)
        err_lam = fit.stderr()[2]
        assert abs(fit.params[2] - lam) < 3 * err_lam

        # dense grid-search oracle over (A0, B0, lambda0)
        grid_a = np.linspace(0.4, 0.6, 41)
        grid_b = np.linspace(0.4, 0.6, 41)
        grid_l = np.linspace(0.985, 0.998, 53)
        best = (np.inf, None)
        for a in grid_a:
            for b in grid_b:
                resid = (a + b * grid_l[:, None] ** n[None, :] - y) / sigma
                cost = np.sum(resid ** 2, axis=1)
                i = int(np.argmin(cost))
                if cost[i] < best[0]:
                    best = (cost[i], grid_l[i])
        fit_cost = fit.residual_norm ** 2
        assert fit_cost <= best[0] + 1e-9
        assert abs(best[1] - fit.params[2]) < 3 * err_lam + (grid_l[1] - grid_l[0])

    def test_nonconvergence_flagged(self):
        x = np.linspace(0, 1, 8)
        y = np.sin(7 * x)

        def model(x, a, b):
            return a * np.exp(b * x)

        fit = fit_least_squares(model, x, y, [1.0, 1.0], max_nfev=2)
        assert not fit.converged
        assert fit.params is not None

    def test_requires_enough_points(self):
        with pytest.raises(ValueError):
            fit_least_squares(lambda x, a, b, c: a * x, np.array([1.0]), np.array([2.0]),
                              [1.0, 1.0, 1.0])


class TestRngStream:
    def test_bit_identical_sequences(self):
        a = RngStream(seed=1234, stream_id=5).generator().standard_normal(64)
        b = RngStream(seed=1234, stream_id=5).generator().standard_normal(64)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(seed=1234, stream_id=0).generator().standard_normal(8)
        b = RngStream(seed=1234, stream_id=1).generator().standard_normal(8)
        assert not np.array_equal(a, b)

    def test_children_independent_of_chunking(self):
        s = RngStream(seed=9, stream_id=2)
        direct = [s.child(i).integers(0, 100, 4).tolist() for i in range(6)]
        chunked = []
        for chunk in ([0, 1, 2], [3], [4, 5]):
            for i in chunk:
                chunked.append(s.child(i).integers(0, 100, 4).tolist())
        assert direct == chunked
