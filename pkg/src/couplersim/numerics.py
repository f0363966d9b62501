"""Shared numerical kernels.

Conventions used across the package:

* User-facing frequencies, couplings and decay rates are cyclic (Hz, the
  ``omega/2pi`` numbers).  Dynamical formulas convert to angular units
  (``2*pi*f``) internally.
* Hamiltonian matrices handed to :func:`propagate` carry angular entries
  (energy/hbar in rad/s); collapse rates are cyclic Hz and are multiplied
  by ``2*pi`` inside the dissipator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import least_squares
from scipy.special import factorial

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream addressed by (seed, stream_id).

    Identical (seed, stream_id) pairs yield bit-identical sequences.
    Parallel work partitions by ``stream_id`` (or by :meth:`child` keys),
    never by splitting a single generator.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, self.stream_id]))
        )

    def child(self, *keys: int) -> np.random.Generator:
        """Generator for a sub-task, independent of how work is chunked."""
        return np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, self.stream_id, *keys]))
        )


@dataclass
class FitResult:
    """Outcome of a nonlinear least-squares fit."""

    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    message: str = ""

    def stderr(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.covariance), 0.0))


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind J_n(x).

    Miller's backward recurrence normalised with J_0 + 2*sum_k J_{2k} = 1.
    Absolute accuracy better than 1e-12 for |x| <= 20 (cross-checked against
    the integral representation (1/pi) * int_0^pi cos(n t - x sin t) dt).

    Raises
    ------
    ValueError
        If ``n < 0`` or ``|x| >= 1e3``.
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"order must be a non-negative integer, got {n}")
    n = int(n)
    if not np.isfinite(x):
        raise ValueError("x must be finite")
    if abs(x) >= 1e3:
        raise ValueError(f"|x| = {abs(x)} outside supported window |x| < 1e3")

    sign = -1.0 if (x < 0 and n % 2) else 1.0
    x = abs(x)
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    if x < 1e-6:
        # leading series term, exact to double precision here
        return sign * (x / 2.0) ** n / math.factorial(n) if n < 170 else 0.0

    top = max(n, int(math.ceil(x)))
    m_start = top + 42 + 4 * int(math.ceil(math.sqrt(top + 1.0)))
    if m_start % 2:
        m_start += 1

    j_up = 0.0     # J_{m+1}
    j_cur = 1e-300  # J_m seed
    j_n = 0.0
    norm = 0.0
    for m in range(m_start, 0, -1):
        j_dn = (2.0 * m / x) * j_cur - j_up  # J_{m-1}
        j_up, j_cur = j_cur, j_dn
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_up *= 1e-250
            j_n *= 1e-250
            norm *= 1e-250
        idx = m - 1
        if idx == n:
            j_n = j_cur
        if idx % 2 == 0:
            norm += j_cur if idx == 0 else 2.0 * j_cur
    return sign * j_n / norm


def taylor_coefficients(
    func: Callable[[np.ndarray], np.ndarray],
    center: float,
    order: int,
    radius: float,
) -> np.ndarray:
    """Derivatives ``d^k f / dx^k`` at ``center`` for k = 0..order.

    Cauchy-integral evaluation on a circle of given radius in the complex
    plane (trapezoidal rule, exponentially accurate for analytic ``func``).
    ``func`` must accept complex ndarray input and be analytic within the
    circle.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = 1 << max(8, int(math.ceil(math.log2(8 * (order + 1)))))
    theta = TWO_PI * np.arange(n) / n
    z = center + radius * np.exp(1j * theta)
    vals = np.asarray(func(z), dtype=complex)
    coeffs = np.fft.fft(vals) / n
    k = np.arange(order + 1)
    taylor = coeffs[: order + 1] / radius ** k
    return np.real(taylor) * factorial(k, exact=False)


# ---------------------------------------------------------------------------
# open-system propagation
# ---------------------------------------------------------------------------

def _check_density_matrix(rho: np.ndarray) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("initial state must be a square matrix")
    if np.linalg.norm(rho - rho.conj().T) > 1e-9 * max(1.0, np.linalg.norm(rho)):
        raise ValueError("initial state must be Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-9 or abs(np.trace(rho).imag) > 1e-12:
        raise ValueError("initial state must have unit trace")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -1e-9:
        raise ValueError(f"initial state not positive semidefinite (min eig {evals.min():.2e})")


def _max_frequency_hz(h_samples: Sequence[np.ndarray], collapse: Sequence[tuple]) -> float:
    f = 0.0
    for h in h_samples:
        ev = np.linalg.eigvalsh(h)
        f = max(f, float(ev.max() - ev.min()) / TWO_PI)
    for _, rate_hz in collapse:
        f = max(f, abs(rate_hz))
    return f


def propagate(
    hamiltonian: np.ndarray | Callable[[float], np.ndarray],
    collapse_rates: Sequence[tuple[np.ndarray, float]],
    initial_state: np.ndarray,
    duration: float,
    step: float | None = None,
    t_eval: np.ndarray | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> np.ndarray:
    """Propagate a density matrix under the Lindblad master equation.

    Parameters
    ----------
    hamiltonian : ndarray or callable
        Hermitian matrix in angular units (rad/s), or a function of time
        returning one.
    collapse_rates : sequence of (operator, rate_hz)
        Jump operators with cyclic rates; the dissipator uses
        ``C = sqrt(2*pi*rate) * operator``.
    initial_state : ndarray
        Density matrix (Hermitian, unit trace, positive semidefinite).
    duration : float
        Evolution time in seconds.
    step : float, optional
        Upper bound on the solver step.  Must resolve the fastest frequency:
        ``step <= 1/(20 * f_max)``; coarser values raise ``ValueError``.
    t_eval : ndarray, optional
        If given, return the trajectory ``rho(t)`` at these times
        (shape ``(len(t_eval), d, d)``) instead of the final state.

    Returns
    -------
    ndarray
        ``rho(duration)``, or the trajectory when ``t_eval`` is given.
    """
    rho0 = np.asarray(initial_state, dtype=complex)
    _check_density_matrix(rho0)
    d = rho0.shape[0]

    static = not callable(hamiltonian)
    h_fn = (lambda t, _h=np.asarray(hamiltonian, dtype=complex): _h) if static else hamiltonian
    h_probe = [h_fn(0.0)]
    if not static:
        h_probe += [h_fn(duration / 2), h_fn(duration)]
    for h in h_probe:
        if h.shape != (d, d):
            raise ValueError("Hamiltonian dimension does not match state")
        if np.linalg.norm(h - h.conj().T) > 1e-6 * max(1.0, np.linalg.norm(h)):
            raise ValueError("Hamiltonian must be Hermitian")

    f_max = _max_frequency_hz(h_probe, collapse_rates)
    step_required = 1.0 / (20.0 * f_max) if f_max > 0 else np.inf
    if step is not None and step > step_required * (1 + 1e-12):
        raise ValueError(
            f"step {step:.3e} s too coarse: fastest frequency {f_max:.3e} Hz "
            f"requires step <= {step_required:.3e} s"
        )

    c_ops = [math.sqrt(TWO_PI * abs(rate)) * np.asarray(op, dtype=complex)
             for op, rate in collapse_rates if rate != 0.0]
    cdc = [c.conj().T @ c for c in c_ops]

    if static and t_eval is None:
        # exact: exponentiate the Liouvillian once (row-major vec convention)
        h = h_probe[0]
        ident = np.eye(d)
        liou = -1j * (np.kron(h, ident) - np.kron(ident, h.T))
        for c, cc in zip(c_ops, cdc):
            liou += np.kron(c, c.conj()) - 0.5 * (np.kron(cc, ident) + np.kron(ident, cc.T))
        rho_t = (expm(liou * duration) @ rho0.reshape(-1)).reshape(d, d)
        return rho_t

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        rho = y.reshape(d, d)
        h = h_fn(t)
        drho = -1j * (h @ rho - rho @ h)
        for c, cc in zip(c_ops, cdc):
            drho += c @ rho @ c.conj().T - 0.5 * (cc @ rho + rho @ cc)
        return drho.reshape(-1)

    max_step = step if step is not None else min(step_required, duration)
    sol = solve_ivp(
        rhs, (0.0, duration), rho0.reshape(-1), method="DOP853",
        t_eval=t_eval, rtol=rtol, atol=atol, max_step=max_step,
    )
    if not sol.success:
        raise RuntimeError(f"propagation failed: {sol.message}")
    out = sol.y.T.reshape(-1, d, d)
    traces = np.einsum("tii->t", out).real
    if np.max(np.abs(traces - traces[0])) > 1e-9:
        raise RuntimeError("trace drifted by more than 1e-9 during propagation")
    return out if t_eval is not None else out[-1]


def schrodinger_propagate(
    hamiltonian: np.ndarray | Callable[[float], np.ndarray],
    psi0: np.ndarray,
    t_eval: np.ndarray,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    max_step: float | None = None,
) -> np.ndarray:
    """State-vector evolution (no dissipation); H in rad/s."""
    psi0 = np.asarray(psi0, dtype=complex)
    static = not callable(hamiltonian)
    h_fn = (lambda t, _h=np.asarray(hamiltonian, dtype=complex): _h) if static else hamiltonian

    def rhs(t, y):
        return -1j * (h_fn(t) @ y)

    kwargs = {} if max_step is None else {"max_step": max_step}
    sol = solve_ivp(rhs, (float(t_eval[0]), float(t_eval[-1])), psi0,
                    method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol, **kwargs)
    if not sol.success:
        raise RuntimeError(f"propagation failed: {sol.message}")
    return sol.y.T


# ---------------------------------------------------------------------------
# nonlinear least squares
# ---------------------------------------------------------------------------

def fit_least_squares(
    model: Callable[..., np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    initial_guess: Sequence[float],
    sigma: np.ndarray | None = None,
    bounds: tuple | None = None,
    max_nfev: int | None = None,
) -> FitResult:
    """Weighted nonlinear least squares, ``model(x, *params) -> y``.

    Data are canonically re-ordered internally (lexicographic sort), so the
    result is invariant to the ordering of the input samples.  The parameter
    covariance comes from the Jacobian at the optimum: ``inv(J^T J)`` scaled
    by the reduced chi-square when no ``sigma`` is supplied.

    Non-convergence is flagged on the result (best point still returned),
    never raised.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p0 = np.asarray(initial_guess, dtype=float)
    n = y.shape[0]
    if n < p0.size:
        raise ValueError(f"need at least {p0.size} data points, got {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("data must be finite")
    w = np.ones(n) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)

    xcols = x.reshape(n, -1)
    # lexsort treats the last key as primary, so x columns go last
    order = np.lexsort((w, y) + tuple(xcols[:, i] for i in range(xcols.shape[1] - 1, -1, -1)))
    xs, ys, ws = x[order], y[order], w[order]

    def residuals(p):
        return (np.asarray(model(xs, *p), dtype=float) - ys) * ws

    res = least_squares(
        residuals, p0, bounds=bounds if bounds is not None else (-np.inf, np.inf),
        max_nfev=max_nfev, xtol=1e-15, ftol=1e-15, gtol=1e-15,
    )
    converged = bool(res.success) and res.status in (1, 2, 3, 4)

    jac = res.jac
    jtj = jac.T @ jac
    try:
        cov = np.linalg.pinv(jtj)
    except np.linalg.LinAlgError:  # pragma: no cover
        cov = np.full((p0.size, p0.size), np.nan)
    dof = max(n - p0.size, 1)
    if sigma is None:
        cov = cov * (2.0 * res.cost / dof)
    return FitResult(
        params=res.x,
        covariance=cov,
        residual_norm=float(np.linalg.norm(res.fun)),
        converged=converged,
        message=str(res.message),
    )
