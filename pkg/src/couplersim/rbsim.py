"""Randomized benchmarking with leakage: rate-equation engine and closed
forms, Monte Carlo qutrit Clifford simulation, leakage-RB curve fitting and
periodic leakage-recovery traces.

The per-Clifford cycle follows the interleaved sequence
Clifford -> leakage injection -> (optional) leakage recovery, with the
population vector (P_subspace, P_f, P_resonator).  The qubit probability
P_subspace + P_f is conserved; the resonator column drains at its decay
rate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .circuit import DecayRates
from .dynamics import PopulationVector
from .numerics import TWO_PI, FitResult, RngStream, fit_least_squares

DEFAULT_N_CL_GRID = tuple(int(round(x)) for x in np.unique(np.geomspace(1, 1000, 20).round()))


@dataclass(frozen=True)
class RBScenario:
    """Leakage-RB scenario parameters.

    ``l_cl`` is the injected leakage per Clifford, ``f_lr`` the recovery
    success probability and ``n_lr`` the recovery cadence (every N
    Cliffords; 0 disables recovery).  Times are seconds, rates cyclic Hz.
    """

    l_cl: float
    rates: DecayRates
    tau_cl: float = 200e-9
    tau_leak: float = 100e-9
    tau_lr: float = 310e-9
    f_lr: float = 0.985
    n_lr: int = 1
    n_cl_grid: tuple = DEFAULT_N_CL_GRID
    shots_per_point: int = 0
    qubit: str = "Q1"

    def __post_init__(self):
        if not 0.0 <= self.l_cl <= 1.0:
            raise ValueError("l_cl must lie in [0, 1]")
        if not 0.0 <= self.f_lr <= 1.0:
            raise ValueError("f_lr must lie in [0, 1]")
        if min(self.tau_cl, self.tau_leak, self.tau_lr) < 0:
            raise ValueError("durations must be non-negative")
        if self.n_lr < 0:
            raise ValueError("n_lr must be >= 0 (0 disables recovery)")

    @property
    def d_q(self) -> float:
        """f-state survival over one Clifford, exp(-tau_cl * Gamma_fe)."""
        return math.exp(-self.tau_cl * TWO_PI * self.rates.gamma_fe)

    @property
    def d_r(self) -> float:
        """Resonator survival over one full cycle."""
        tau = self.tau_cl + self.tau_leak + self.tau_lr
        return math.exp(-tau * TWO_PI * self.rates.kappa_r)


# ---------------------------------------------------------------------------
# rate-equation engine
# ---------------------------------------------------------------------------

def rate_matrices(scenario: RBScenario) -> dict:
    """The four per-cycle transfer matrices on (P_sub, P_f, P_R)."""
    l_cl, f_lr = scenario.l_cl, scenario.f_lr
    m_leak = np.array([
        [1.0 - l_cl / 2.0, l_cl, 0.0],
        [l_cl / 2.0, 1.0 - l_cl, 0.0],
        [0.0, 0.0, 1.0],
    ])
    m_lr = np.array([
        [1.0, f_lr, -f_lr / 2.0],
        [0.0, 1.0 - f_lr, f_lr / 2.0],
        [0.0, f_lr, 1.0 - f_lr / 2.0],
    ])
    m_fe = np.array([
        [1.0, 1.0 - scenario.d_q, 0.0],
        [0.0, scenario.d_q, 0.0],
        [0.0, 0.0, 1.0],
    ])
    m_r = np.diag([1.0, 1.0, scenario.d_r])
    return {"leak": m_leak, "lr": m_lr, "fe": m_fe, "r": m_r}


def cycle_matrix(scenario: RBScenario, with_lr: bool) -> np.ndarray:
    m = rate_matrices(scenario)
    if with_lr:
        return m["r"] @ m["fe"] @ m["lr"] @ m["leak"]
    return m["fe"] @ m["leak"]


def rate_step(pop: PopulationVector, scenario: RBScenario, with_lr: bool = True) -> PopulationVector:
    """One per-Clifford cycle of the rate equation.

    The computational-subspace population enters as ``p_g + p_e`` and is
    returned split evenly between them (the model averages over random
    Cliffords, which occupy |e> half of the time).
    """
    vec = np.array([pop.p_subspace, pop.p_f, pop.p_r])
    out = cycle_matrix(scenario, with_lr) @ vec
    return PopulationVector(p_g=out[0] / 2.0, p_e=out[0] / 2.0, p_f=out[1],
                            p_r=min(out[2], 1.0))


def steady_state_leakage(scenario: RBScenario, with_lr: bool, tol: float = 1e-14,
                         max_iter: int = 2_000_000) -> float:
    """Equilibrium P_f by power iteration of the cycle matrix (the oracle
    for the closed forms)."""
    m = cycle_matrix(scenario, with_lr)
    vec = np.array([1.0, 0.0, 0.0])
    for _ in range(max_iter):
        new = m @ vec
        if np.max(np.abs(new - vec)) < tol:
            return float(new[1])
        vec = new
    warnings.warn("power iteration did not converge to tolerance", UserWarning, stacklevel=2)
    return float(vec[1])


@dataclass(frozen=True)
class LeakageSteadyStates:
    """Closed-form equilibrium leakage values and the no-recovery transient."""

    a2_leak: float
    a2_lr_full: float
    a2_lr_simplified: float
    n_cl: np.ndarray
    p_f_of_n: np.ndarray


def a2_closed_forms(scenario: RBScenario) -> LeakageSteadyStates:
    """Equilibrium-leakage closed forms.

    ``a2_leak``: no recovery, f-state relaxation only.  ``a2_lr_full``: with
    recovery, finite fidelity and f-state decay.  ``a2_lr_simplified``: the
    resonator-limited form, i.e. the exact steady state of the simplified
    model (perfect recovery, no f-state decay); its denominator is
    ``4(1 - d_r) + 3 L d_r``.  ``p_f_of_n`` is the no-recovery transient on
    the scenario grid.
    """
    l_cl = scenario.l_cl
    d_q, d_r, f_lr = scenario.d_q, scenario.d_r, scenario.f_lr
    e_fe = 1.0 / d_q

    denom_leak = 3.0 * l_cl + 2.0 * (e_fe - 1.0)
    a2_leak = l_cl / denom_leak if denom_leak > 0 else (1.0 / 3.0 if l_cl > 0 else 0.0)

    block = 2.0 - 2.0 * f_lr + d_r * (3.0 * f_lr - 2.0)
    denom_full = 4.0 + 2.0 * d_r * (f_lr - 2.0) + (3.0 * l_cl - 2.0) * d_q * block
    a2_lr_full = l_cl * d_q * block / denom_full

    a2_lr_simplified = l_cl * d_r / (4.0 * (1.0 - d_r) + 3.0 * l_cl * d_r)

    n = np.asarray(scenario.n_cl_grid, dtype=float)
    base = d_q * (1.0 - 1.5 * l_cl)
    if denom_leak > 0:
        p_f = l_cl * (1.0 - base ** n) / denom_leak
    else:
        p_f = np.full_like(n, 0.0)
    return LeakageSteadyStates(
        a2_leak=float(a2_leak),
        a2_lr_full=float(a2_lr_full),
        a2_lr_simplified=float(a2_lr_simplified),
        n_cl=n.astype(int),
        p_f_of_n=p_f,
    )


@dataclass(frozen=True)
class ErrorModels:
    eps_ref: float
    eps_leak: float
    eps_lr: float
    breakeven_l: float


def error_models(scenario: RBScenario) -> ErrorModels:
    """Average-gate-error models (decoherence plus leakage terms):

        eps_ref  = Gamma_S tau_Cl / 3
        eps_leak = Gamma_S (tau_Cl + tau_leak) / 3 + L/2
        eps_LR   = Gamma_S (tau_Cl + tau_leak + tau_LR) / 3 + L/6

    and the break-even injected leakage ``L* = tau_LR * Gamma_S`` above
    which recovery lowers the total error.  Gamma_S is angular internally.
    """
    gs = TWO_PI * scenario.rates.gamma_sigma(scenario.qubit)
    l_cl = scenario.l_cl
    return ErrorModels(
        eps_ref=gs * scenario.tau_cl / 3.0,
        eps_leak=gs * (scenario.tau_cl + scenario.tau_leak) / 3.0 + l_cl / 2.0,
        eps_lr=gs * (scenario.tau_cl + scenario.tau_leak + scenario.tau_lr) / 3.0 + l_cl / 6.0,
        breakeven_l=gs * scenario.tau_lr,
    )


def leakage_dephasing_rate(l_cl: float, tau: float) -> tuple[float, float]:
    """Dephasing rate of the decoherent leakage-recovery cycle.

    The surviving coherence factor ``sqrt(1 - L)`` maps to
    ``exp(-Gamma_leak tau)``; returns ``(exact, small_l)`` with the exact
    rate ``-ln(sqrt(1 - L))/tau`` and the small-leakage limit ``L / (2 tau)``
    in 1/s.
    """
    if not 0.0 <= l_cl < 1.0:
        raise ValueError("l_cl must lie in [0, 1)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    exact = -math.log(math.sqrt(1.0 - l_cl)) / tau
    return exact, l_cl / (2.0 * tau)


def periodic_lr_trace(scenario: RBScenario) -> tuple[np.ndarray, np.ndarray]:
    """P_f(n_Cl) when recovery runs only every ``scenario.n_lr`` Cliffords.

    Stepwise rate equation; produces the shark-fin trace whose maxima stay
    below ``n_lr * l_cl / 2``.  ``n_lr = 0`` gives the no-recovery
    transient.
    """
    n_max = int(max(scenario.n_cl_grid))
    m = rate_matrices(scenario)
    plain = m["fe"] @ m["leak"]
    with_lr = m["r"] @ m["fe"] @ m["lr"] @ m["leak"]
    vec = np.array([1.0, 0.0, 0.0])
    p_f = np.empty(n_max + 1)
    p_f[0] = 0.0
    for n in range(1, n_max + 1):
        use_lr = scenario.n_lr > 0 and n % scenario.n_lr == 0
        vec = (with_lr if use_lr else plain) @ vec
        p_f[n] = vec[1]
    return np.arange(n_max + 1), p_f


# ---------------------------------------------------------------------------
# qutrit Clifford Monte Carlo
# ---------------------------------------------------------------------------

def _canonical_phase(u: np.ndarray) -> np.ndarray:
    flat = u.reshape(-1)
    k = np.argmax(np.abs(flat) > 1e-9)
    return u * (np.abs(flat[k]) / flat[k])


def single_qubit_cliffords() -> np.ndarray:
    """The 24 single-qubit Clifford unitaries (phase-canonical 2x2)."""
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
    s = np.array([[1, 0], [0, 1j]], dtype=complex)
    seen = {}
    frontier = [np.eye(2, dtype=complex)]
    while frontier:
        new = []
        for u in frontier:
            cu = _canonical_phase(u)
            key = (np.round(cu, 9) + (0.0 + 0.0j)).tobytes()  # clear negative zeros
            if key in seen:
                continue
            seen[key] = cu
            new.extend([cu @ h, cu @ s])
        frontier = new
    table = np.stack(list(seen.values()))
    if table.shape[0] != 24:
        raise RuntimeError(f"Clifford closure produced {table.shape[0]} elements")
    return table


_CLIFFORDS_2 = single_qubit_cliffords()


def _embed_qubit_gate(u2: np.ndarray) -> np.ndarray:
    """Qubit gate as exact unitary on the {g,e} block, identity on |f>,
    identity on the resonator (qutrit x resonator ordering, idx = 2q + r)."""
    u3 = np.eye(3, dtype=complex)
    u3[:2, :2] = u2
    return np.kron(u3, np.eye(2, dtype=complex))


_CLIFFORDS_6 = np.stack([_embed_qubit_gate(u) for u in _CLIFFORDS_2])


def _leak_unitary(l_cl: float) -> np.ndarray:
    """Weak |e> <-> |f> rotation injecting leakage l_cl from |e>."""
    c, s = math.sqrt(1.0 - l_cl), math.sqrt(l_cl)
    u3 = np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=complex)
    return np.kron(u3, np.eye(2, dtype=complex))


def _lr_unitary(f_lr: float) -> np.ndarray:
    """Partial |f0> <-> |e1> swap with transfer probability f_lr."""
    u = np.eye(6, dtype=complex)
    c, s = math.sqrt(1.0 - f_lr), math.sqrt(f_lr)
    f0, e1 = 4, 3
    u[f0, f0] = c
    u[e1, e1] = c
    u[f0, e1] = -s
    u[e1, f0] = s
    return u


def _lindblad_superop(collapse: list, dim: int, tau: float) -> np.ndarray:
    """Dissipator exponential in the row-major vec convention."""
    ident = np.eye(dim)
    liou = np.zeros((dim * dim, dim * dim), dtype=complex)
    for op, rate_hz in collapse:
        c = math.sqrt(TWO_PI * rate_hz) * op
        cc = c.conj().T @ c
        liou += np.kron(c, c.conj()) - 0.5 * (np.kron(cc, ident) + np.kron(ident, cc.T))
    return expm(liou * tau)


def _decoherence_superops(scenario: RBScenario) -> dict:
    q = scenario.qubit
    r = scenario.rates
    low_q = np.kron(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=complex), np.eye(2))
    low_f = np.kron(np.array([[0, 0, 0], [0, 0, 1], [0, 0, 0]], dtype=complex), np.eye(2))
    deph = np.kron(np.diag([0.0, 1.0, 2.0]).astype(complex), np.eye(2)) * math.sqrt(2.0)
    low_r = np.kron(np.eye(3), np.array([[0, 1], [0, 0]], dtype=complex))
    collapse = [
        (low_q, r.gamma1[q]),
        (low_f, r.gamma_fe),
        (deph, r.gamma_phi[q]),
        (low_r, r.kappa_r),
    ]
    return {
        "cl": _lindblad_superop(collapse, 6, scenario.tau_cl),
        "leak": _lindblad_superop(collapse, 6, scenario.tau_leak),
        "lr": _lindblad_superop(collapse, 6, scenario.tau_lr),
    }


def _depolarizing_superop(p_error: float) -> np.ndarray:
    """Qubit-subspace depolarizing channel with average gate error p_error.

    Kraus mixture of the embedded Paulis with mixing probability
    ``p' = 2 * p_error`` (``p' = p * d/(d-1)``, d = 2), so the RB decay
    parameter is exactly ``lambda_0 = 1 - 2 * p_error``.
    """
    p_mix = 2.0 * p_error
    paulis = [
        np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex),
        np.array([[0, -1j, 0], [1j, 0, 0], [0, 0, 1]], dtype=complex),
        np.array([[1, 0, 0], [0, -1, 0], [0, 0, 1]], dtype=complex),
    ]
    ident6 = np.eye(6, dtype=complex)
    sup = (1.0 - 0.75 * p_mix) * np.kron(ident6, ident6.conj())
    for p in paulis:
        u = np.kron(p, np.eye(2, dtype=complex))
        sup = sup + 0.25 * p_mix * np.kron(u, u.conj())
    return sup


@dataclass
class RBCurves:
    """Per-length Monte Carlo survival and leakage statistics."""

    n_cl: np.ndarray
    p_g_mean: np.ndarray
    p_g_std: np.ndarray
    p_f_mean: np.ndarray
    p_f_std: np.ndarray
    n_randomizations: int

    def standard_error(self, which: str = "g") -> np.ndarray:
        std = self.p_g_std if which == "g" else self.p_f_std
        return std / math.sqrt(self.n_randomizations)


def monte_carlo_rb(
    scenario: RBScenario,
    stream: RngStream,
    n_randomizations: int = 50,
    with_lr: bool = True,
    noise: str = "physical",
    depolarizing_error: float = 0.0,
) -> RBCurves:
    """Monte Carlo leakage RB on a qutrit coupled to a two-level resonator.

    Random Cliffords act as exact unitaries on the computational subspace;
    leakage injection is a weak |e> <-> |f> rotation, recovery a partial
    |f0> <-> |e1> swap, and decoherence acts as per-window Lindblad channels
    (``noise='physical'``) or as a per-Clifford depolarizing channel of the
    given average error (``noise='depolarizing'``).  Deterministic per
    stream, independent of chunking: each randomization draws its gates from
    ``stream.child(index)``.
    """
    if noise not in ("physical", "depolarizing", "none"):
        raise ValueError("noise must be 'physical', 'depolarizing' or 'none'")
    n_grid = np.asarray(scenario.n_cl_grid, dtype=int)
    n_max = int(n_grid.max())
    r_count = n_randomizations

    apply_channels = noise == "physical"
    sups = _decoherence_superops(scenario) if apply_channels else None
    dep = _depolarizing_superop(depolarizing_error) if noise == "depolarizing" else None

    u_leak = _leak_unitary(scenario.l_cl) if scenario.l_cl > 0 else None
    u_lr = _lr_unitary(scenario.f_lr) if with_lr else None

    gate_idx = np.stack([
        stream.child(r).integers(0, 24, size=n_max) for r in range(r_count)
    ])

    rho = np.zeros((r_count, 6, 6), dtype=complex)
    rho[:, 0, 0] = 1.0
    ctot = np.broadcast_to(np.eye(2, dtype=complex), (r_count, 2, 2)).copy()

    grid_set = set(int(n) for n in n_grid)
    p_g = np.empty((r_count, len(n_grid)))
    p_f = np.empty((r_count, len(n_grid)))
    col = {int(n): i for i, n in enumerate(n_grid)}

    def conj_batch(u, r):
        return np.einsum("rij,rjk,rlk->ril", u, r, u.conj())

    def conj_same(u, r):
        return np.einsum("ij,rjk,lk->ril", u, r, u.conj())

    def superop(s, r):
        return (r.reshape(r_count, 36) @ s.T).reshape(r_count, 6, 6)

    def measure(n):
        u2_inv = np.conj(np.transpose(ctot, (0, 2, 1)))
        u_inv = np.zeros((r_count, 6, 6), dtype=complex)
        u_inv[:, 4, 4] = 1.0
        u_inv[:, 5, 5] = 1.0
        for a in range(2):
            for b in range(2):
                u_inv[:, 2 * a, 2 * b] = u2_inv[:, a, b]
                u_inv[:, 2 * a + 1, 2 * b + 1] = u2_inv[:, a, b]
        rho_m = conj_batch(u_inv, rho)
        if apply_channels:
            rho_m = superop(sups["cl"], rho_m)
        j = col[n]
        p_g[:, j] = (rho_m[:, 0, 0] + rho_m[:, 1, 1]).real
        p_f[:, j] = (rho_m[:, 4, 4] + rho_m[:, 5, 5]).real

    if 0 in grid_set:
        measure(0)
    for n in range(1, n_max + 1):
        u6 = _CLIFFORDS_6[gate_idx[:, n - 1]]
        rho = conj_batch(u6, rho)
        ctot = np.einsum("rij,rjk->rik", _CLIFFORDS_2[gate_idx[:, n - 1]], ctot)
        if apply_channels:
            rho = superop(sups["cl"], rho)
        elif dep is not None:
            rho = superop(dep, rho)
        if u_leak is not None:
            rho = conj_same(u_leak, rho)
        if apply_channels:
            rho = superop(sups["leak"], rho)
        if u_lr is not None and (scenario.n_lr > 0 and n % scenario.n_lr == 0):
            rho = conj_same(u_lr, rho)
        if apply_channels:
            rho = superop(sups["lr"], rho)
        if n in grid_set:
            measure(n)

    if scenario.shots_per_point > 0:
        shots = scenario.shots_per_point
        for r in range(r_count):
            rng = stream.child(r, 10_000)
            p_g[r] = rng.binomial(shots, np.clip(p_g[r], 0, 1)) / shots
            p_f[r] = rng.binomial(shots, np.clip(p_f[r], 0, 1)) / shots

    return RBCurves(
        n_cl=n_grid,
        p_g_mean=p_g.mean(axis=0),
        p_g_std=p_g.std(axis=0, ddof=1),
        p_f_mean=p_f.mean(axis=0),
        p_f_std=p_f.std(axis=0, ddof=1),
        n_randomizations=r_count,
    )


# ---------------------------------------------------------------------------
# leakage-RB fitting
# ---------------------------------------------------------------------------

@dataclass
class RBFitResult:
    """Joint leakage-RB fit of P_g and P_f sharing (B2, lambda2):

        P_g = A0 + B0 lambda0^n + B2 lambda2^n
        P_f = A2 + B2 lambda2^n

    ``epsilon = (1 - lambda0 + L2)/2`` with ``L2 = (1 - A2)(1 - lambda2)``.
    """

    a0: float
    b0: float
    lambda0: float
    a2: float
    b2: float
    lambda2: float
    covariance: np.ndarray
    converged: bool
    degenerate: bool = False

    @property
    def l2(self) -> float:
        return (1.0 - self.a2) * (1.0 - self.lambda2)

    @property
    def epsilon(self) -> float:
        return (1.0 - self.lambda0 + self.l2) / 2.0


def _rb_initial_guess(n, p_g, p_f):
    tail = max(2, len(n) // 5)
    a2 = float(np.mean(p_f[-tail:]))
    b2 = float(p_f[0] - a2)
    lam2 = 0.9
    if abs(b2) > 1e-12:
        mid = float(p_f[len(n) // 2] - a2)
        if mid / b2 > 0:
            lam2 = float(np.clip((mid / b2) ** (1.0 / max(n[len(n) // 2] - n[0], 1)), 0.2, 0.999))
    a0 = float(np.mean(p_g[-tail:]))
    b0 = float(p_g[0] - a0)
    lam0 = 0.99
    mid = float(p_g[len(n) // 2] - a0)
    if abs(b0) > 1e-12 and mid / b0 > 0:
        lam0 = float(np.clip((mid / b0) ** (1.0 / max(n[len(n) // 2] - n[0], 1)), 0.2, 0.99999))
    return [a0, b0, lam0, a2, b2, lam2]


def fit_rb(
    n_cl: np.ndarray,
    p_g: np.ndarray,
    p_f: np.ndarray | None = None,
    sigma_g: np.ndarray | None = None,
    sigma_f: np.ndarray | None = None,
    degeneracy_threshold: float = 0.01,
) -> RBFitResult:
    """Fit leakage-RB curves; joint in (B2, lambda2) when P_f is given.

    When the two decays come out within ``degeneracy_threshold`` (relative)
    of each other the leakage amplitude is poorly identified: the fit is
    redone with the single-exponential model for P_g, the degeneracy flag is
    set and the covariance is the (wider) fallback one.
    """
    n = np.asarray(n_cl, dtype=float)
    p_g = np.asarray(p_g, dtype=float)
    if len(n) < 5:
        raise ValueError("need at least 5 sequence lengths")

    if p_f is None:
        def model_g(x, a0, b0, lam0):
            return a0 + b0 * lam0 ** x

        fit = fit_least_squares(model_g, n, p_g, [p_g[-1], p_g[0] - p_g[-1], 0.99],
                                sigma=sigma_g,
                                bounds=([-1, -2, 1e-6], [2, 2, 1.0]))
        cov = np.zeros((6, 6))
        cov[:3, :3] = fit.covariance
        return RBFitResult(a0=fit.params[0], b0=fit.params[1], lambda0=fit.params[2],
                           a2=0.0, b2=0.0, lambda2=1.0,
                           covariance=cov, converged=fit.converged)

    p_f = np.asarray(p_f, dtype=float)
    m = len(n)
    x_joint = np.concatenate([n, n])
    y_joint = np.concatenate([p_g, p_f])
    if sigma_g is not None or sigma_f is not None:
        sg = np.ones(m) if sigma_g is None else np.asarray(sigma_g, dtype=float)
        sf = np.ones(m) if sigma_f is None else np.asarray(sigma_f, dtype=float)
        sigma = np.concatenate([sg, sf])
    else:
        sigma = None

    # curve tag rides along as a second x column so the model can split
    x2 = np.column_stack([x_joint, np.concatenate([np.zeros(m), np.ones(m)])])

    def model(x, a0, b0, lam0, a2, b2, lam2):
        nn, tag = x[:, 0], x[:, 1]
        g = a0 + b0 * lam0 ** nn + b2 * lam2 ** nn
        f = a2 + b2 * lam2 ** nn
        return np.where(tag < 0.5, g, f)

    p0 = _rb_initial_guess(n, p_g, p_f)
    lo = [-1.0, -2.0, 1e-6, -1.0, -2.0, 1e-6]
    hi = [2.0, 2.0, 1.0, 2.0, 2.0, 1.0]
    fit = fit_least_squares(model, x2, y_joint, p0, sigma=sigma, bounds=(lo, hi))
    a0, b0, lam0, a2, b2, lam2 = fit.params

    degenerate = abs(lam0 - lam2) < degeneracy_threshold * max(lam0, lam2)
    if degenerate:
        g_only = fit_rb(n_cl, p_g, None, sigma_g=sigma_g)

        def model_f(x, a2_, b2_, lam2_):
            return a2_ + b2_ * lam2_ ** x

        f_fit = fit_least_squares(model_f, n, p_f, [p_f[-1], p_f[0] - p_f[-1], 0.9],
                                  sigma=sigma_f,
                                  bounds=([-1, -2, 1e-6], [2, 2, 1.0]))
        cov = np.zeros((6, 6))
        cov[:3, :3] = g_only.covariance[:3, :3]
        cov[3:, 3:] = f_fit.covariance
        return RBFitResult(a0=g_only.a0, b0=g_only.b0, lambda0=g_only.lambda0,
                           a2=f_fit.params[0], b2=f_fit.params[1], lambda2=f_fit.params[2],
                           covariance=cov, converged=g_only.converged and f_fit.converged,
                           degenerate=True)

    return RBFitResult(a0=a0, b0=b0, lambda0=lam0, a2=a2, b2=b2, lambda2=lam2,
                       covariance=fit.covariance, converged=fit.converged)
