"""Drive-frame theory of the parametrically modulated coupler.

Fourier decomposition of the modulated coupler frequency, effective
parametric couplings and shifts (k = 2 closed forms), the Schrieffer-Wolff
coupler elimination, the parametric chi shift, and an exact time-domain
oracle (stroboscopic one-period propagator of the three-state drive-frame
model) used to validate the closed forms.

The flux pulse is ``phi_ext(t) = phi_dc + a_d * sin(2*pi*f_d*t)``; the
modulated coupler frequency is expanded as

    omega_C(t) = omega_bar_C + sum_m D_m cos[m (2*pi*f_d*t - pi/2)].

All frequencies are cyclic (Hz).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .circuit import CircuitSpec, CouplerSpec, coupler_frequency, josephson_energy
from .numerics import TWO_PI, bessel_j, taylor_coefficients


class ValidityWarning(UserWarning):
    """A result was produced outside its stated validity window."""


@dataclass(frozen=True)
class DriveSpec:
    """Flux-pulse definition: static offset, amplitude (rad), frequency (Hz)
    and the harmonic order ``k`` used to activate the transition."""

    phi_dc: float
    a_d: float
    omega_d: float
    k: int = 2
    envelope: object | None = None

    def __post_init__(self):
        if self.a_d < 0:
            raise ValueError("drive amplitude must be non-negative")
        if self.omega_d <= 0:
            raise ValueError("drive frequency must be positive")
        if self.k not in (1, 2):
            raise ValueError("harmonic order k must be 1 or 2")


@dataclass(frozen=True)
class DriveSpectrum:
    """Mean coupler frequency and Fourier harmonics of omega_C(t).

    ``omega_bar_c`` / ``d_m`` come from an FFT of one exactly sampled drive
    period (exact up to sampling); ``series_omega_bar_c`` / ``series_d_m``
    are the analytic flux-derivative series truncated at derivative order
    ``2 * m_max``.  The two agree within 1% for a_d <= 0.1 rad.
    """

    omega_bar_c: float
    d_m: tuple
    series_omega_bar_c: float
    series_d_m: tuple

    def coefficient(self, m: int) -> float:
        if not 1 <= m <= len(self.d_m):
            raise ValueError(f"harmonic m={m} not available (m_max={len(self.d_m)})")
        return self.d_m[m - 1]


def _singularity_distance(phi_dc: float, d: float) -> float:
    """Distance from phi_dc to the nearest complex singularity of omega_C."""
    y_s = math.asinh(d / math.sqrt(1.0 - d * d)) if d < 1.0 else math.inf
    k_near = round((phi_dc - math.pi / 2) / math.pi)
    dist = math.inf
    for k in (k_near - 1, k_near, k_near + 1):
        x = phi_dc - (math.pi / 2 + k * math.pi)
        dist = min(dist, math.hypot(x, y_s))
    return dist


def fourier_decompose(
    drive: DriveSpec,
    coupler: CouplerSpec,
    m_max: int = 4,
    n_samples: int = 4096,
) -> DriveSpectrum:
    """Fourier decomposition of the modulated coupler frequency.

    Returns both the numerically exact coefficients (FFT of one sampled
    period) and the analytic flux-derivative series truncated at derivative
    order ``2 * m_max``.

    Raises
    ------
    ValueError
        If the flux excursion crosses the E_J = 0 point of a symmetric
        (d = 0) SQUID, where omega_C(phi) is not analytic.
    """
    if m_max < drive.k:
        raise ValueError("m_max must be at least the drive harmonic k")

    # excursion must stay clear of the |cos| kink of a d = 0 SQUID
    if coupler.d < 1e-9:
        lo, hi = drive.phi_dc - drive.a_d, drive.phi_dc + drive.a_d
        k_lo = math.ceil((lo - math.pi / 2) / math.pi)
        if math.pi / 2 + k_lo * math.pi <= hi:
            raise ValueError(
                "flux excursion crosses the E_J = 0 region (d = 0 SQUID); "
                "the Fourier expansion is invalid there"
            )

    # exact path: omega_C(phi_dc + a sin(wt)) is even in y = w t - pi/2
    y = TWO_PI * np.arange(n_samples) / n_samples
    f = coupler_frequency(drive.phi_dc + drive.a_d * np.sin(y + math.pi / 2), coupler)
    coef = np.fft.rfft(f) / n_samples
    omega_bar = float(coef[0].real)
    d_m = tuple(float(2.0 * coef[m].real) for m in range(1, m_max + 1))

    # analytic path: flux-derivative series
    dist = _singularity_distance(drive.phi_dc, coupler.d)
    radius = 0.8 * min(dist, 1.2)
    deriv = taylor_coefficients(
        lambda z: coupler_frequency(z, coupler), drive.phi_dc, 2 * m_max, radius
    )
    a = drive.a_d
    omega_bar_series = sum(
        deriv[2 * n] * a ** (2 * n) / (4 ** n * math.factorial(n) ** 2)
        for n in range(m_max + 1)
    )
    series = []
    for m in range(1, m_max + 1):
        total = 0.0
        if m % 2 == 0:
            for n in range(m // 2, m_max + 1):
                total += (
                    deriv[2 * n] * 2.0 * a ** (2 * n)
                    / (4 ** n * math.factorial((2 * n - m) // 2) * math.factorial((2 * n + m) // 2))
                )
        else:
            for n in range((m - 1) // 2, m_max):
                if 2 * n + 1 > 2 * m_max:
                    break
                total += (
                    deriv[2 * n + 1] * a ** (2 * n + 1)
                    / (4 ** n * math.factorial((2 * n + 1 - m) // 2) * math.factorial((2 * n + 1 + m) // 2))
                )
        series.append(float(total))

    return DriveSpectrum(
        omega_bar_c=omega_bar,
        d_m=d_m,
        series_omega_bar_c=float(omega_bar_series),
        series_d_m=tuple(series),
    )


def effective_coupling(
    g_ic: float,
    g_jc: float,
    k: int,
    omega_d: float,
    spectrum: DriveSpectrum,
) -> float:
    """Leading-order parametric coupling (Hz) activated at the k-th harmonic:

        g~ = g_iC * g_jC / (k * omega_D) * J1(D_k / (k * omega_D))

    Signed through the signs of the inputs; the overall (-i)^k phase of the
    drive-frame derivation is absorbed into the basis convention.  Emits a
    :class:`ValidityWarning` when ``|D_k| > k * omega_D / 2``, outside the
    stated small-modulation window.
    """
    if k < 1:
        raise ValueError("harmonic order k must be positive")
    d_k = spectrum.coefficient(k)
    if abs(d_k) > k * omega_d / 2.0:
        warnings.warn(
            f"|D_{k}| = {abs(d_k):.3e} Hz exceeds k*omega_D/2 = {k * omega_d / 2:.3e} Hz; "
            "the leading-order coupling formula is outside its validity window",
            ValidityWarning,
            stacklevel=2,
        )
    return g_ic * g_jc / (k * omega_d) * bessel_j(1, d_k / (k * omega_d))


# ---------------------------------------------------------------------------
# transition manifolds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionManifold:
    """Three-state manifold {A, B, coupler-excited} for one driven transition.

    Energies are absolute (Hz); couplings are the signed matrix elements of
    the circuit Hamiltonian within the manifold (bosonic factors included,
    single-excitation element of a pair is -g_ij).  ``delta_c_offset`` maps
    the mean coupler frequency to the coupler-state detuning from A:
    ``Delta_C = omega_bar_C + delta_c_offset``.
    """

    kind: str
    label_a: str
    label_b: str
    omega_a: float
    omega_b: float
    g_ac: float
    g_bc: float
    g_ab: float
    delta_c_offset: float
    k: int

    @property
    def transition(self) -> float:
        """Bare A -> B transition frequency (Hz)."""
        return self.omega_b - self.omega_a

    @property
    def bare_drive_frequency(self) -> float:
        return self.transition / self.k


def transition_manifold(circuit: CircuitSpec, kind: str, qubit: str = "Q1") -> TransitionManifold:
    """Manifold for one of the four driven operations.

    ``reset``   |e0> <-> |g1>   (qubit-resonator, k = 2)
    ``lr``      |f0> <-> |e1>   (qubit-resonator, k = 2)
    ``readout`` same transition as ``lr`` driven off-resonantly (k = 2)
    ``cz``      |ee> <-> |fg>   (Q1-Q2, k = 1)
    """
    w = circuit.omega
    al = circuit.alpha
    root2 = math.sqrt(2.0)
    if kind == "reset":
        return TransitionManifold(
            kind=kind, label_a=f"e0({qubit})", label_b="g1",
            omega_a=w[qubit], omega_b=w["R"],
            g_ac=-circuit.coupling(qubit, "C"), g_bc=-circuit.coupling("C", "R"),
            g_ab=-circuit.coupling(qubit, "R"),
            delta_c_offset=-w[qubit], k=2,
        )
    if kind in ("lr", "readout"):
        return TransitionManifold(
            kind=kind, label_a=f"f0({qubit})", label_b=f"e1({qubit})",
            omega_a=2 * w[qubit] + al[qubit], omega_b=w[qubit] + w["R"],
            g_ac=-root2 * circuit.coupling(qubit, "C"), g_bc=-circuit.coupling("C", "R"),
            g_ab=-root2 * circuit.coupling(qubit, "R"),
            delta_c_offset=-(w[qubit] + al[qubit]), k=2,
        )
    if kind == "cz":
        return TransitionManifold(
            kind=kind, label_a="ee", label_b="fg",
            omega_a=w["Q1"] + w["Q2"], omega_b=2 * w["Q1"] + al["Q1"],
            g_ac=-circuit.coupling("Q2", "C"), g_bc=-root2 * circuit.coupling("Q1", "C"),
            g_ab=-root2 * circuit.coupling("Q1", "Q2"),
            delta_c_offset=-w["Q2"], k=1,
        )
    raise ValueError(f"unknown transition kind {kind!r}")


# ---------------------------------------------------------------------------
# k = 2 closed forms and Schrieffer-Wolff correction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveFrame:
    """Drive-frame frequencies and couplings (all Hz).

    ``omega_tilde_a`` / ``omega_tilde_b`` are the drive-induced shifts of the
    two driven states, ``delta_tilde_c`` the shifted coupler detuning and the
    ``g_tilde_*`` the effective couplings.  ``g_tilde_prime_ab`` is filled by
    the Schrieffer-Wolff correction.
    """

    omega_tilde_a: float
    omega_tilde_b: float
    delta_tilde_c: float
    g_tilde_ab: float
    g_tilde_ac: float
    g_tilde_bc: float
    g_tilde_prime_ab: float | None = None
    manifold: TransitionManifold | None = None
    omega_d: float | None = None

    def matrix(self, delta_b: float = 0.0) -> np.ndarray:
        """Effective 3x3 drive-frame Hamiltonian (Hz).

        ``delta_b`` is the bare B-state detuning ``(omega_B - omega_A) -
        k*omega_D`` left after the rotating transformation; zero exactly on
        the bare resonance.
        """
        return np.array([
            [self.omega_tilde_a, self.g_tilde_ab, self.g_tilde_ac],
            [self.g_tilde_ab, delta_b + self.omega_tilde_b, self.g_tilde_bc],
            [self.g_tilde_ac, self.g_tilde_bc, self.delta_tilde_c],
        ])

    def with_schrieffer_wolff(self) -> "EffectiveFrame":
        return replace(self, g_tilde_prime_ab=schrieffer_wolff_correction(self))

    def _qubit_gap(self, delta_b: float) -> float:
        evals = np.linalg.eigvalsh(self.matrix(delta_b))
        low = np.sort(evals[np.argsort(np.abs(evals - self.omega_tilde_a))[:2]])
        return float(low[1] - low[0])

    def dressed_resonance_offset(self, window: float | None = None) -> float:
        """B-state detuning ``delta_b`` at which the dressed A and B branches
        anticross (the dressed-resonance condition)."""
        if window is None:
            scale = max(abs(self.omega_tilde_a), abs(self.omega_tilde_b),
                        abs(self.g_tilde_ab), 1e5)
            window = 10.0 * scale + 20e6
        res = minimize_scalar(self._qubit_gap, bounds=(-window, window),
                              method="bounded", options={"xatol": 1e-2})
        return float(res.x)

    def swap_coupling(self) -> float:
        """Exact effective A-B coupling of this frame (Hz): half the minimum
        eigenvalue splitting of the 3x3 drive-frame matrix over the B-state
        detuning (exact coupler elimination).

        The perturbative coupler elimination with the conventional
        second-order weight is ``g~_AB - g~_AC g~_CB / Delta~_C``, which this
        quantity reproduces to O((g/Delta)^2); the correction returned by
        :func:`schrieffer_wolff_correction` counts the virtual path with
        twice that weight, as printed in its source.
        """
        return 0.5 * self._qubit_gap(self.dressed_resonance_offset())


def k2_closed_forms(
    circuit: CircuitSpec,
    drive: DriveSpec,
    states: str | TransitionManifold,
    m_max: int = 4,
) -> EffectiveFrame:
    """Closed-form drive-frame parameters for a k = 2 parametric transition.

    Evaluates the second-order truncation of the Floquet expansion in terms
    of ``J_{n,m} = J_n(D1/omega_D) * J_m(-D2/(2*omega_D))``.  Only k = 2 is
    supported; the analytic block is specific to the second harmonic.
    """
    if drive.k != 2:
        raise ValueError("closed forms are k = 2 specific")
    man = states if isinstance(states, TransitionManifold) else transition_manifold(circuit, states)
    spec = fourier_decompose(drive, circuit.coupler, m_max=max(m_max, 2))
    wd = drive.omega_d
    x1 = spec.d_m[0] / wd
    x2 = -spec.d_m[1] / (2.0 * wd)
    j = {(n, m): bessel_j(n, x1) * bessel_j(m, x2) for n in range(3) for m in range(3)}

    g_ac, g_bc, g_ab = man.g_ac, man.g_bc, man.g_ab
    delta_c = spec.omega_bar_c + man.delta_c_offset

    gt_ac = g_ac * j[0, 0] + g_ab * g_bc / (2 * wd) * (j[0, 2] + j[2, 1])
    wt_a = (1.0 / wd) * (
        g_ab ** 2 / 2.0
        + g_ac ** 2 * (4 * j[1, 0] * j[1, 1] - 2 * (j[0, 1] * j[2, 2] + j[0, 0] * j[2, 1]))
    )
    gt_bc = (
        -g_bc * (j[0, 1] + j[2, 0] + j[2, 2])
        + g_ab * g_ac / (2 * wd) * (-j[0, 1] + j[2, 0] + j[2, 2])
    )
    wt_b = (1.0 / (2 * wd)) * (
        g_bc ** 2 * (
            j[0, 0] ** 2 - j[0, 2] ** 2 - j[2, 1] ** 2
            + 2 * (j[1, 0] ** 2 - j[1, 2] ** 2 - j[0, 1] * j[2, 2])
            + 4 * j[1, 1] * (j[1, 2] - j[1, 0])
        )
        - g_ab ** 2
    )
    gt_ab = (g_ac * g_bc / (2 * wd)) * (
        j[0, 0] * (j[0, 1] - j[2, 0])
        + j[0, 1] * (j[0, 2] + j[2, 1])
        + j[0, 2] * j[2, 2]
        + j[2, 0] * j[2, 1]
        + 2 * j[1, 0] * (j[1, 0] + j[1, 1] - j[1, 2])
        + 2 * j[1, 1] * j[1, 2]
        - 4 * j[1, 1] ** 2
    )
    return EffectiveFrame(
        omega_tilde_a=float(wt_a),
        omega_tilde_b=float(wt_b),
        delta_tilde_c=float(delta_c - wt_a - wt_b),
        g_tilde_ab=float(gt_ab),
        g_tilde_ac=float(gt_ac),
        g_tilde_bc=float(gt_bc),
        manifold=man,
        omega_d=wd,
    )


def schrieffer_wolff_correction(frame: EffectiveFrame) -> float:
    """Coupler-eliminated effective coupling (Hz):

        g~'_AB = g~_AB - 2 * g~_AC * g~_CB / Delta~_C

    Valid when the coupler stays far detuned; a :class:`ValidityWarning` is
    emitted when ``|Delta~_C|`` is less than five times the largest shift or
    coupling.  ``Delta~_C = 0`` is refused.
    """
    if frame.delta_tilde_c == 0.0:
        raise ValueError("Delta~_C = 0: Schrieffer-Wolff elimination is singular")
    scale = max(abs(frame.omega_tilde_a), abs(frame.omega_tilde_b),
                abs(frame.g_tilde_ab), abs(frame.g_tilde_ac), abs(frame.g_tilde_bc))
    if abs(frame.delta_tilde_c) < 5.0 * scale:
        warnings.warn(
            f"|Delta~_C| = {abs(frame.delta_tilde_c):.3e} Hz is below 5x the largest "
            f"frame scale {scale:.3e} Hz; the dispersive elimination is marginal",
            ValidityWarning,
            stacklevel=2,
        )
    return frame.g_tilde_ab - 2.0 * frame.g_tilde_ac * frame.g_tilde_bc / frame.delta_tilde_c


# ---------------------------------------------------------------------------
# parametric chi shift
# ---------------------------------------------------------------------------

def lab_to_drive_detuning(delta_lab: float, k: int) -> float:
    """Detuning conversion: the drive frame sees k times the lab detuning."""
    return k * delta_lab


def chi_shift(g_tilde_qr: float, delta_drive: float) -> float:
    """Qubit-state dependent resonator shift (Hz) of the driven avoided
    crossing:

        2*chi = (|Delta| - sqrt(4 |g~_QR|^2 + Delta^2)) / 2

    ``delta_drive`` must already be in the drive frame (lab detuning times
    k, see :func:`lab_to_drive_detuning`).  The returned value is <= 0 on
    this branch and reaches -|g~_QR| at Delta = 0.
    """
    ad = abs(delta_drive)
    return (ad - math.sqrt(4.0 * g_tilde_qr ** 2 + delta_drive ** 2)) / 2.0


@dataclass(frozen=True)
class ReadoutOperatingPoint:
    """Parametric readout working point (all Hz).

    ``delta`` is stored in the drive frame; ``chi`` holds the shift returned
    by :func:`chi_shift` at this point.
    """

    g_tilde_qr: float
    delta: float
    chi: float
    delta_p: float = 0.0


def readout_operating_point(
    g_tilde_qr: float,
    delta_lab: float,
    k: int = 2,
    delta_p: float = 0.0,
) -> ReadoutOperatingPoint:
    delta = lab_to_drive_detuning(delta_lab, k)
    return ReadoutOperatingPoint(
        g_tilde_qr=g_tilde_qr, delta=delta, chi=chi_shift(g_tilde_qr, delta), delta_p=delta_p
    )


# ---------------------------------------------------------------------------
# exact time-domain oracle (stroboscopic three-state propagation)
# ---------------------------------------------------------------------------

def drive_frame_hamiltonian(
    manifold: TransitionManifold,
    coupler: CouplerSpec,
    drive: DriveSpec,
    omega_d: float | None = None,
):
    """Callable ``t -> H(t)`` (rad/s) for the three-state drive-frame model.

    Frame: A-referenced, with B rotated at ``k * omega_d`` so the residual
    B detuning is ``(omega_B - omega_A) - k*omega_d``.  The coupler state
    carries the full flux modulation ``omega_C(phi(t))``, no Fourier
    truncation.
    """
    wd = drive.omega_d if omega_d is None else omega_d
    k = manifold.k
    delta_b = manifold.transition - k * wd

    def h_of_t(t: float) -> np.ndarray:
        ph = np.exp(1j * TWO_PI * k * wd * t)
        wc = coupler_frequency(drive.phi_dc + drive.a_d * math.sin(TWO_PI * wd * t), coupler)
        h = np.array([
            [0.0, manifold.g_ab * np.conj(ph), manifold.g_ac],
            [manifold.g_ab * ph, delta_b, manifold.g_bc * ph],
            [manifold.g_ac, manifold.g_bc * np.conj(ph), wc + manifold.delta_c_offset],
        ], dtype=complex)
        return TWO_PI * h

    return h_of_t


def one_period_propagator(
    manifold: TransitionManifold,
    coupler: CouplerSpec,
    drive: DriveSpec,
    omega_d: float | None = None,
    n_sub: int = 4096,
) -> np.ndarray:
    """Propagator over one drive period (midpoint piecewise-exact product)."""
    wd = drive.omega_d if omega_d is None else omega_d
    h_fn = drive_frame_hamiltonian(manifold, coupler, drive, omega_d=wd)
    dt = 1.0 / (wd * n_sub)
    ts = (np.arange(n_sub) + 0.5) * dt
    h_stack = np.stack([h_fn(t) for t in ts])
    evals, evecs = np.linalg.eigh(h_stack)
    phases = np.exp(-1j * evals * dt)
    steps = np.einsum("nij,nj,nkj->nik", evecs, phases, evecs.conj())
    u = np.eye(3, dtype=complex)
    for s in steps:
        u = s @ u
    return u


def quasi_energy_gap(
    manifold: TransitionManifold,
    coupler: CouplerSpec,
    drive: DriveSpec,
    omega_d: float | None = None,
    n_sub: int = 4096,
) -> float:
    """Quasi-energy splitting (Hz) of the A- and B-like Floquet branches.

    The eigenphases of the one-period propagator give the quasi-energies;
    the avoided-crossing gap equals twice the exact effective coupling.
    """
    wd = drive.omega_d if omega_d is None else omega_d
    u = one_period_propagator(manifold, coupler, drive, omega_d=wd, n_sub=n_sub)
    ev, vec = np.linalg.eig(u)
    eps = -np.angle(ev) * wd / TWO_PI  # Hz, defined mod omega_d

    weights = np.abs(vec[0, :]) ** 2 + np.abs(vec[1, :]) ** 2
    idx = np.argsort(weights)[-2:]
    de = eps[idx[0]] - eps[idx[1]]
    de = (de + wd / 2.0) % wd - wd / 2.0
    return abs(de)


def find_parametric_resonance(
    manifold: TransitionManifold,
    coupler: CouplerSpec,
    drive: DriveSpec,
    span: float = 30e6,
    n_coarse: int = 25,
    n_sub: int = 2048,
) -> tuple[float, float]:
    """Locate the dressed resonance: the drive frequency minimising the
    quasi-energy gap.  Returns ``(omega_d_star, gap_hz)``."""
    w0 = manifold.bare_drive_frequency

    def gap(wd: float) -> float:
        return quasi_energy_gap(manifold, coupler, drive, omega_d=wd, n_sub=n_sub)

    grid = w0 + np.linspace(-span, span, n_coarse)
    gaps = [gap(w) for w in grid]
    i = int(np.argmin(gaps))
    lo = grid[max(0, i - 1)]
    hi = grid[min(n_coarse - 1, i + 1)]
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded",
                          options={"xatol": span * 1e-5})
    return float(res.x), float(res.fun)


def stroboscopic_populations(
    manifold: TransitionManifold,
    coupler: CouplerSpec,
    drive: DriveSpec,
    omega_d: float | None = None,
    n_periods: int = 2000,
    n_sub: int = 4096,
) -> tuple[np.ndarray, np.ndarray]:
    """Population of state A at stroboscopic times (multiples of the drive
    period), starting from A.  Micromotion-free by construction."""
    wd = drive.omega_d if omega_d is None else omega_d
    u = one_period_propagator(manifold, coupler, drive, omega_d=wd, n_sub=n_sub)
    un = np.eye(3, dtype=complex)
    pops = np.empty(n_periods)
    for i in range(n_periods):
        pops[i] = abs(un[0, 0]) ** 2
        un = u @ un
    return np.arange(n_periods) / wd, pops
