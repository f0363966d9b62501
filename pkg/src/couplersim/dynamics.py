"""Time-domain models: pulse envelopes, the closed-form damped two-level
swap, three-level leakage-recovery dynamics, and Pauli-transfer-matrix
characterisation of simulated channels.

Rates and couplings are cyclic (Hz); formulas convert to angular units
internally, consistent with :mod:`couplersim.numerics`.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .circuit import DecayRates
from .numerics import TWO_PI

EDGE_SIGMAS = 2.5  # each Gaussian edge occupies this many sigma


class NonPhysicalChannelWarning(UserWarning):
    """A reconstructed channel is not completely positive."""


@dataclass(frozen=True)
class EnvelopeSpec:
    """Flat-top Gaussian pulse envelope.

    Gaussian rise/fall of widths ``sigma_rise`` / ``sigma_fall`` (each edge
    truncated at ``EDGE_SIGMAS`` sigma, offset-subtracted so the envelope is
    exactly 0 at the pulse boundary and ``peak`` on the plateau).
    """

    total_length: float
    sigma_rise: float
    sigma_fall: float
    peak: float = 1.0

    def __post_init__(self):
        if self.total_length <= 0:
            raise ValueError("total_length must be positive")
        if self.sigma_rise < 0 or self.sigma_fall < 0:
            raise ValueError("edge widths must be non-negative")
        if EDGE_SIGMAS * (self.sigma_rise + self.sigma_fall) > self.total_length:
            raise ValueError("rise and fall edges do not fit inside total_length")

    @property
    def rise_end(self) -> float:
        return EDGE_SIGMAS * self.sigma_rise

    @property
    def fall_start(self) -> float:
        return self.total_length - EDGE_SIGMAS * self.sigma_fall


def _edge(u: np.ndarray, sigma: float) -> np.ndarray:
    """Offset-subtracted Gaussian edge; u is distance from the plateau."""
    cut = math.exp(-(EDGE_SIGMAS ** 2) / 2.0)
    return (np.exp(-(u / sigma) ** 2 / 2.0) - cut) / (1.0 - cut)


def envelope_value(t, env: EnvelopeSpec):
    """Envelope amplitude at time t (0 outside the pulse window)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t >= 0) & (t <= env.total_length)
    plateau = inside & (t >= env.rise_end) & (t <= env.fall_start)
    out[plateau] = 1.0
    if env.sigma_rise > 0:
        rising = inside & (t < env.rise_end)
        out[rising] = _edge(env.rise_end - t[rising], env.sigma_rise)
    if env.sigma_fall > 0:
        falling = inside & (t > env.fall_start)
        out[falling] = _edge(t[falling] - env.fall_start, env.sigma_fall)
    out *= env.peak
    return out if out.ndim else float(out)


def _edge_integral(x: float, sigma: float) -> float:
    """Integral of the offset-subtracted edge over the first x seconds of a
    rise (x measured from the pulse boundary, 0 <= x <= EDGE_SIGMAS*sigma)."""
    if sigma == 0:
        return 0.0
    cut = math.exp(-(EDGE_SIGMAS ** 2) / 2.0)
    e = EDGE_SIGMAS * sigma
    gauss = sigma * math.sqrt(math.pi / 2.0) * (
        erf(e / (sigma * math.sqrt(2.0))) - erf((e - x) / (sigma * math.sqrt(2.0)))
    )
    return (gauss - cut * x) / (1.0 - cut)


def envelope_area(tau: float, env: EnvelopeSpec) -> float:
    """Accumulated pulse area ``gamma(tau) = int_0^tau A(t) dt``.

    Substituting ``gamma(t)`` for ``t`` in the closed-form swap dynamics
    accounts for the finite pulse edges.
    """
    tau = min(max(tau, 0.0), env.total_length)
    area = _edge_integral(min(tau, env.rise_end), env.sigma_rise)
    if tau > env.rise_end:
        area += min(tau, env.fall_start) - env.rise_end
    if tau > env.fall_start:
        full_fall = _edge_integral(EDGE_SIGMAS * env.sigma_fall, env.sigma_fall)
        remaining = _edge_integral(env.total_length - tau, env.sigma_fall)
        area += full_fall - remaining
    return env.peak * area


# ---------------------------------------------------------------------------
# damped swap (single-excitation manifold, non-Hermitian model)
# ---------------------------------------------------------------------------

def _swap_bracket(t: float, g_ang: float, kappa_delta: float) -> float:
    """cos(M t) + (kappa_delta / 4M) sin(M t), continuous across branches."""
    mu = cmath.sqrt(complex((kappa_delta / 4.0) ** 2 - g_ang ** 2))  # real if overdamped
    z = mu * t
    if abs(z) < 1e-8:
        sinh_over = t * (1.0 + (z * z) / 6.0)
    else:
        sinh_over = cmath.sinh(z) / mu
    return (cmath.cosh(z) + (kappa_delta / 4.0) * sinh_over).real


def damped_swap_population(t, g_tilde: float, gamma_1: float, kappa_r: float):
    """Donor-state population of the damped two-level swap (Appendix-style
    closed form; all rates cyclic Hz).

    Overdamped, critically damped and underdamped branches are selected by
    the sign of ``|g~| - kappa_Delta/4`` (angular) and evaluated through one
    analytically continued expression, so the result is continuous across
    the branch boundaries.  ``P(0) = 1``.
    """
    g = TWO_PI * abs(g_tilde)
    kap = TWO_PI * kappa_r
    gam = TWO_PI * gamma_1
    k_sigma = kap + gam
    k_delta = kap - gam
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(ts)
    for i, ti in enumerate(ts):
        br = _swap_bracket(ti, g, k_delta)
        out[i] = math.exp(-k_sigma * ti / 2.0) * br * br
    out = np.clip(out, 0.0, None)
    return out if np.ndim(t) else float(out[0])


def acceptor_population(t, g_tilde: float, gamma_1: float, kappa_r: float):
    """Acceptor-state population of the damped swap: ``g^2 e^{-k_S t/2}
    |sin(M t)/M|^2`` (cyclic inputs)."""
    g = TWO_PI * abs(g_tilde)
    kap = TWO_PI * kappa_r
    gam = TWO_PI * gamma_1
    k_sigma = kap + gam
    mu = cmath.sqrt(complex(((kap - gam) / 4.0) ** 2 - g ** 2))
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(ts)
    for i, ti in enumerate(ts):
        z = mu * ti
        s = ti * (1.0 + (z * z) / 6.0) if abs(z) < 1e-8 else cmath.sinh(z) / mu
        out[i] = g * g * math.exp(-k_sigma * ti / 2.0) * abs(s) ** 2
    return out if np.ndim(t) else float(out[0])


def swap_completion_time(g_tilde: float, gamma_1: float, kappa_r: float) -> float:
    """Time of the first full swap (first zero of the donor population).

    Damping shifts the extremum away from ``pi/(2 g~)``; the zero of the
    oscillatory bracket is returned.  ``math.inf`` when the system is not
    underdamped (no full swap occurs).
    """
    g = TWO_PI * abs(g_tilde)
    k_delta = TWO_PI * (kappa_r - gamma_1)
    if g <= abs(k_delta) / 4.0 or g == 0.0:
        return math.inf
    m = math.sqrt(g * g - (k_delta / 4.0) ** 2)
    c = k_delta / (4.0 * m)
    theta = math.atan2(1.0, -c)  # first positive root of cos + c sin = 0
    return theta / m


def pulsed_swap_population(t, env: EnvelopeSpec, g_tilde: float,
                           gamma_1: float, kappa_r: float):
    """Damped swap with the envelope-weighted time substitution
    ``t -> gamma(t)`` (accounts for the pulse edges)."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    eff = np.array([envelope_area(ti, env) for ti in ts])
    out = damped_swap_population(eff, g_tilde, gamma_1, kappa_r)
    return out if np.ndim(t) else float(np.atleast_1d(out)[0])


# ---------------------------------------------------------------------------
# three-level leakage-recovery dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PopulationVector:
    """Tracked populations.  ``p_r`` counts the resonator photon and overlaps
    with ``p_e`` while the excitation sits in |e1> (the qubit-state sum
    ``p_g + p_e + p_f`` is the conserved quantity)."""

    p_g: float
    p_e: float
    p_f: float
    p_r: float = 0.0

    def __post_init__(self):
        for name in ("p_g", "p_e", "p_f", "p_r"):
            v = getattr(self, name)
            if not -1e-9 <= v <= 1.0 + 1e-9:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if self.qubit_total > 1.0 + 1e-9:
            raise ValueError("qubit populations exceed unity")

    @property
    def qubit_total(self) -> float:
        return self.p_g + self.p_e + self.p_f

    @property
    def p_subspace(self) -> float:
        return self.p_g + self.p_e


def lr_three_level_populations(t: float, g_tilde: float, rates: DecayRates,
                               qubit: str = "Q1") -> PopulationVector:
    """Populations during the leakage-recovery drive, starting from |f, 0>.

    The |f0> <-> |e1> swap follows the damped two-level closed form (donor
    decay Gamma_f->e, acceptor decay kappa_R); everything that has left |f>
    is counted as qubit |e> and relaxes to |g> at Gamma_1:

        P_f = damped swap donor population
        P_e = (1 - P_f) * exp(-Gamma_1 t)
        P_g = (1 - P_f) * (1 - exp(-Gamma_1 t))

    This is the probability-conserving reading of the model; the Lindblad
    propagation quantifies the residual approximation error.
    """
    p_f = damped_swap_population(t, g_tilde, rates.gamma_fe, rates.kappa_r)
    decay = math.exp(-TWO_PI * rates.gamma1[qubit] * t)
    p_e = (1.0 - p_f) * decay
    p_g = (1.0 - p_f) * (1.0 - decay)
    p_r = min(acceptor_population(t, g_tilde, rates.gamma_fe, rates.kappa_r), 1.0)
    return PopulationVector(p_g=p_g, p_e=p_e, p_f=p_f, p_r=p_r)


def lr_swap_time(g_tilde: float, rates: DecayRates) -> float:
    """First full |f0> -> |e1> transfer time (first minimum of P_f)."""
    return swap_completion_time(g_tilde, rates.gamma_fe, rates.kappa_r)


# ---------------------------------------------------------------------------
# Lindblad reference models (oracles for the closed forms)
# ---------------------------------------------------------------------------

def reset_lindblad_model(g_tilde: float, rates: DecayRates, env: EnvelopeSpec | None = None,
                         qubit: str = "Q1"):
    """Resonant-frame model of the reset swap on basis {|e0>, |g1>, |g0>}.

    Returns ``(hamiltonian, collapse_list, initial_state)`` for
    :func:`couplersim.numerics.propagate`; the donor population is element
    (0, 0) of the propagated density matrix.
    """
    h_bare = TWO_PI * g_tilde * np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex)
    if env is None:
        h = h_bare
    else:
        def h(t, _h=h_bare, _env=env):
            return envelope_value(t, _env) * _h
    collapse = [
        (np.array([[0, 0, 0], [0, 0, 0], [0, 1, 0]], dtype=complex), rates.kappa_r),
        (np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0]], dtype=complex), rates.gamma1[qubit]),
    ]
    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[0, 0] = 1.0
    return h, collapse, rho0


def lr_lindblad_model(g_tilde: float, rates: DecayRates, qubit: str = "Q1"):
    """Resonant-frame LR model on basis {|g0>, |e0>, |f0>, |e1>, |g1>}.

    |f0> <-> |e1> swap at g~, resonator decay |e1> -> |e0>, |g1> -> |g0>,
    qubit decay |e0> -> |g0>, |e1> -> |g1>, and f -> e relaxation.
    """
    dim = 5
    g0, e0, f0, e1, g1 = range(dim)
    h = np.zeros((dim, dim), dtype=complex)
    h[f0, e1] = h[e1, f0] = TWO_PI * g_tilde

    def op(i, j):
        m = np.zeros((dim, dim), dtype=complex)
        m[i, j] = 1.0
        return m

    collapse = [
        (op(e0, e1), rates.kappa_r),
        (op(g0, g1), rates.kappa_r),
        (op(g0, e0), rates.gamma1[qubit]),
        (op(g1, e1), rates.gamma1[qubit]),
        (op(e0, f0), rates.gamma_fe),
    ]
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[f0, f0] = 1.0
    labels = {"g": (g0, g1), "e": (e0, e1), "f": (f0,), "r": (e1, g1)}
    return h, collapse, rho0, labels


def lr_subspace_channel(rates: DecayRates, duration: float,
                        qubit_shift: float = 0.0, qubit: str = "Q1"):
    """Channel seen by computational-subspace inputs during the LR drive.

    The recovery drive is resonant only with |f0> <-> |e1>; a qubit prepared
    in the subspace just decoheres for the pulse duration and picks up the
    drive-induced frequency shift ``qubit_shift`` (Hz) on |e>.  Returns a
    callable mapping 2x2 density matrices to 3x3 outputs (qutrit space), for
    use with :func:`pauli_transfer_matrix`.
    """
    from .numerics import propagate

    h = TWO_PI * qubit_shift * np.diag([0.0, 1.0, 0.0]).astype(complex)
    collapse = [
        (np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=complex), rates.gamma1[qubit]),
        (np.array([[0, 0, 0], [0, 0, 1], [0, 0, 0]], dtype=complex), rates.gamma_fe),
        (math.sqrt(2.0) * np.diag([0.0, 1.0, 2.0]).astype(complex), rates.gamma_phi[qubit]),
    ]

    def channel(rho2: np.ndarray) -> np.ndarray:
        rho3 = np.zeros((3, 3), dtype=complex)
        rho3[:2, :2] = rho2
        return propagate(h, collapse, rho3, duration)

    return channel


def virtual_z_phase(channel) -> float:
    """Drive-induced qubit phase extracted from a superposition input.

    Mirrors the experimental virtual-Z calibration: the phase of the
    off-diagonal element of the channel output for the |+> state.
    """
    plus = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    out = np.asarray(channel(plus))
    return float(np.angle(out[0, 1]))


def with_virtual_z(channel, phase: float):
    """Compose a channel with the frame rotation cancelling the measured
    phase (pass the value returned by :func:`virtual_z_phase`)."""
    rz = np.diag([1.0, np.exp(1j * phase)])

    def corrected(rho2: np.ndarray) -> np.ndarray:
        out = np.asarray(channel(rho2), dtype=complex)
        full = np.eye(out.shape[0], dtype=complex)
        full[:2, :2] = rz
        return full @ out @ full.conj().T

    return corrected


# ---------------------------------------------------------------------------
# Pauli transfer matrix
# ---------------------------------------------------------------------------

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass
class PTMResult:
    """Pauli transfer matrix of a qubit-subspace channel.

    ``leakage`` is the population that left the {|g>, |e>} block for each
    probe state (the PTM itself is computed on the renormalised block).
    ``physical`` is False when the Choi operator has an eigenvalue below
    tolerance.
    """

    matrix: np.ndarray
    leakage: np.ndarray
    choi_min_eigenvalue: float
    physical: bool


def pauli_transfer_matrix(channel, tol: float = 1e-7) -> PTMResult:
    """Reconstruct the PTM of ``channel`` from the standard tomography set.

    ``channel`` maps a 2x2 density matrix to a density matrix; outputs of
    larger dimension are projected onto their upper-left 2x2 block and
    renormalised, with the discarded population reported as leakage.
    """
    probes = [
        np.array([[1, 0], [0, 0]], dtype=complex),
        np.array([[0, 0], [0, 1]], dtype=complex),
        0.5 * np.array([[1, 1], [1, 1]], dtype=complex),
        0.5 * np.array([[1, -1j], [1j, 1]], dtype=complex),
    ]
    outputs = []
    leakage = []
    for rho in probes:
        out = np.asarray(channel(rho), dtype=complex)
        if out.shape[0] > 2:
            block = out[:2, :2]
            leak = float(np.trace(out).real - np.trace(block).real)
            tr = np.trace(block).real
            block = block / tr if tr > 0 else block
            outputs.append(block)
            leakage.append(leak)
        else:
            outputs.append(out)
            leakage.append(0.0)

    lam_0, lam_1, lam_p, lam_i = outputs
    lam = {
        0: lam_0 + lam_1,                        # identity
        1: 2.0 * lam_p - lam_0 - lam_1,          # X
        2: 2.0 * lam_i - lam_0 - lam_1,          # Y
        3: lam_0 - lam_1,                        # Z
    }
    r = np.empty((4, 4))
    for i, sig_i in enumerate(_PAULIS):
        for jj in range(4):
            r[i, jj] = 0.5 * np.trace(sig_i @ lam[jj]).real

    # Choi operator from the PTM; CP requires it positive semidefinite
    choi = np.zeros((4, 4), dtype=complex)
    for i, sig_i in enumerate(_PAULIS):
        for jj, sig_j in enumerate(_PAULIS):
            choi += 0.25 * r[i, jj] * np.kron(sig_j.T, sig_i)
    min_eig = float(np.linalg.eigvalsh(choi).min())
    physical = min_eig > -tol
    if not physical:
        warnings.warn(
            f"reconstructed channel is not completely positive "
            f"(Choi min eigenvalue {min_eig:.2e})",
            NonPhysicalChannelWarning,
            stacklevel=2,
        )
    return PTMResult(
        matrix=r,
        leakage=np.asarray(leakage),
        choi_min_eigenvalue=min_eig,
        physical=physical,
    )


def average_gate_fidelity(ptm: PTMResult | np.ndarray, target: np.ndarray | None = None) -> float:
    """Average gate fidelity of a PTM against a target unitary (default
    identity): ``F = (2 F_pro + 1) / 3`` with ``F_pro = Tr(R_t^T R) / 4``."""
    r = ptm.matrix if isinstance(ptm, PTMResult) else np.asarray(ptm)
    if target is None:
        r_t = np.eye(4)
    else:
        r_t = np.empty((4, 4))
        for i, sig_i in enumerate(_PAULIS):
            for jj, sig_j in enumerate(_PAULIS):
                r_t[i, jj] = 0.5 * np.trace(sig_i @ target @ sig_j @ target.conj().T).real
    f_pro = float(np.trace(r_t.T @ r)) / 4.0
    return (2.0 * f_pro + 1.0) / 3.0
