"""Scenario models for the four coupler operations and their metrics:
reset, leakage-recovery support, parametric readout with Gaussian-mixture
classification, CZ calibration, and flux-amplitude calibration.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import h as PLANCK_H
from scipy.constants import k as BOLTZMANN_K
from scipy.optimize import nnls
from scipy.special import erfc

from .circuit import CircuitSpec, CouplerSpec, DecayRates, coupler_frequency
from .floquet import DriveSpec, one_period_propagator, transition_manifold
from .numerics import TWO_PI, FitResult, RngStream, fit_least_squares

STATE_LABELS = ("g", "e", "f")


# ---------------------------------------------------------------------------
# reset metrics and thermal budget
# ---------------------------------------------------------------------------

def reset_metrics(p_id: float, p_pi: float, p_id_r: float, p_pi_r: float) -> dict:
    """Reset efficiency and fidelity from the four measured excited-state
    populations (no pulse / pi-pulse, each without and with reset):

        eta_r = 1 - P_pi^r / P_pi
        F_r   = 1 - (P_Id^r + P_pi^r) / 2
    """
    for name, v in (("p_id", p_id), ("p_pi", p_pi), ("p_id_r", p_id_r), ("p_pi_r", p_pi_r)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} = {v} is not a probability")
    if p_pi == 0.0:
        raise ValueError("p_pi = 0: reset efficiency is undefined")
    return {
        "eta_r": 1.0 - p_pi_r / p_pi,
        "f_r": 1.0 - (p_id_r + p_pi_r) / 2.0,
    }


def population_to_temperature(p_e: float, omega_q: float) -> float:
    """Effective temperature (K) of a two-level Boltzmann distribution with
    excited-state population ``p_e`` at transition frequency ``omega_q`` (Hz)."""
    if not 0.0 < p_e < 0.5:
        raise ValueError("p_e must lie in (0, 0.5) for a positive temperature")
    return PLANCK_H * omega_q / (BOLTZMANN_K * math.log((1.0 - p_e) / p_e))


def temperature_to_population(temperature: float, omega_q: float) -> float:
    """Inverse of :func:`population_to_temperature` (exact roundtrip)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    x = math.exp(-PLANCK_H * omega_q / (BOLTZMANN_K * temperature))
    return x / (1.0 + x)


def bose_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation of a mode at ``omega`` (Hz) and T (K)."""
    if temperature <= 0:
        return 0.0
    return 1.0 / math.expm1(PLANCK_H * omega / (BOLTZMANN_K * temperature))


@dataclass(frozen=True)
class ThermalBudget:
    """Thermal limits on the reset floor.

    ``n_th`` is the resonator thermal occupation (shared bath at the qubit's
    idle temperature unless overridden), ``n_up`` the rethermalisation during
    reset + measurement, and their sum the floor on the post-reset
    excited-state population.  ``t_r_bound`` is the swap bound
    ``T^r >= (omega_q / omega_r) T_R``.
    """

    temperature: float
    n_th: float
    n_up: float
    kappa_01: float
    tau_r: float
    tau_m: float
    t_r_bound: float

    @property
    def floor(self) -> float:
        return self.n_th + self.n_up


def thermal_budget(
    p_id: float,
    gamma_1: float,
    omega_q: float,
    omega_r: float,
    tau_r: float,
    tau_m: float,
    resonator_temperature: float | None = None,
) -> ThermalBudget:
    """Thermal reset budget from the idle population and qubit decay rate.

    The qubit rethermalises at ``kappa_01/2pi ~ P_Id * Gamma_1`` giving
    ``n_up ~ kappa_01 (tau_r + tau_m) / 2`` (angular rate times time); the
    resonator occupation is the Bose factor at its frequency.
    """
    t_id = population_to_temperature(p_id, omega_q)
    t_res = t_id if resonator_temperature is None else resonator_temperature
    n_th = bose_occupation(omega_r, t_res)
    kappa_01 = p_id * gamma_1  # cyclic Hz
    n_up = TWO_PI * kappa_01 * (tau_r + tau_m) / 2.0
    return ThermalBudget(
        temperature=t_id, n_th=n_th, n_up=n_up, kappa_01=kappa_01,
        tau_r=tau_r, tau_m=tau_m,
        t_r_bound=(omega_q / omega_r) * t_res,
    )


# ---------------------------------------------------------------------------
# flux-amplitude calibration
# ---------------------------------------------------------------------------

def mean_coupler_frequency(phi_dc: float, a_d: float, coupler: CouplerSpec,
                           n_samples: int = 2048) -> float:
    """Average coupler frequency over one drive period."""
    theta = TWO_PI * np.arange(n_samples) / n_samples
    return float(np.mean(coupler_frequency(phi_dc + a_d * np.sin(theta), coupler)))


def flux_amplitude_calibration(
    volts: np.ndarray,
    delta_c: np.ndarray,
    coupler: CouplerSpec,
    phi_dc: float,
    c0: float | None = None,
) -> FitResult:
    """Volts-to-flux conversion factor from the drive-induced coupler shift.

    Fits the measured mean-frequency shift ``Delta_C(V)`` with the model
    ``omega_bar_C(a = c V) - omega_C(phi_dc)``; the single parameter is the
    conversion factor c (rad/V).
    """
    volts = np.asarray(volts, dtype=float)
    delta_c = np.asarray(delta_c, dtype=float)
    if volts.size < 3:
        raise ValueError("need at least 3 calibration points")
    order = np.argsort(np.abs(volts))
    trend = np.abs(delta_c[order])
    if np.any(np.diff(trend) < -0.05 * (trend.max() + 1e-30)):
        raise ValueError("|Delta_C| must grow monotonically with |V_D|")

    w_static = float(coupler_frequency(phi_dc, coupler))

    def model(v, c):
        return np.array([mean_coupler_frequency(phi_dc, abs(c) * vi, coupler)
                         for vi in np.atleast_1d(v)]) - w_static

    if c0 is None:
        # quadratic small-signal guess from the largest point
        i = int(np.argmax(np.abs(volts)))
        curv = (mean_coupler_frequency(phi_dc, 0.1, coupler) - w_static) / 0.1 ** 2
        c0 = math.sqrt(max(delta_c[i] / curv, 1e-12)) / abs(volts[i]) if curv != 0 else 1.0
    fit = fit_least_squares(model, volts, delta_c, [c0])
    fit.params = np.abs(fit.params)
    return fit


# ---------------------------------------------------------------------------
# resonator response
# ---------------------------------------------------------------------------

def resonator_response(chi: float, kappa_r: float, delta_p, qubit_state: str = "g"):
    """Complex transmission of the readout resonator near resonance.

    Lorentzian line of half-width ``kappa_r / 2`` centred at the undriven
    resonance for ``qubit_state='g'`` and pulled by the full state-dependent
    shift ``2*chi`` for ``qubit_state='e'`` (``chi`` is the half-shift).
    """
    if kappa_r <= 0:
        raise ValueError("kappa_r must be positive")
    if qubit_state not in ("g", "e"):
        raise ValueError("qubit_state must be 'g' or 'e'")
    center = 0.0 if qubit_state == "g" else 2.0 * chi
    delta = np.asarray(delta_p, dtype=float)
    hw = kappa_r / 2.0
    s21 = np.asarray(hw / (hw + 1j * (delta - center)))
    return s21 if s21.ndim else complex(s21)


# ---------------------------------------------------------------------------
# synthetic shots and the Gaussian-mixture classifier
# ---------------------------------------------------------------------------

@dataclass
class ShotSet:
    """Single-shot IQ records with a preparation tag."""

    iq: np.ndarray
    label: str = "unknown"
    stream: RngStream | None = None

    def __post_init__(self):
        self.iq = np.asarray(self.iq, dtype=float).reshape(-1, 2)
        if self.iq.shape[0] < 1:
            raise ValueError("a ShotSet needs at least one shot")
        if not np.all(np.isfinite(self.iq)):
            raise ValueError("shots must be finite")

    def __len__(self) -> int:
        return self.iq.shape[0]


def shotset_to_csv(shots: ShotSet, path: str) -> None:
    """Write a shot set as CSV with columns (I, Q, label)."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["I", "Q", "label"])
        for i, q in shots.iq:
            writer.writerow([format(i, ".17g"), format(q, ".17g"), shots.label])


def shotset_from_csv(path: str) -> ShotSet:
    """Read a shot set written by :func:`shotset_to_csv`."""
    import csv

    iq = []
    labels = set()
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            iq.append((float(row["I"]), float(row["Q"])))
            labels.add(row["label"])
    label = labels.pop() if len(labels) == 1 else "unknown"
    return ShotSet(iq=np.asarray(iq), label=label)


def generate_shots(
    populations,
    centers,
    sigma: float,
    n_shots: int,
    stream: RngStream,
    label: str = "unknown",
    decay: tuple[float, float] | None = None,
) -> ShotSet:
    """Draw IQ shots from a three-component Gaussian mixture.

    ``populations`` are the (g, e, f) preparation probabilities and
    ``centers`` the component means (3, 2).  When ``decay=(gamma_1_hz,
    tau_meas)`` is given, shots prepared in |e> that relax before half the
    measurement window are rendered at the |g> centre (mid-measurement
    label-flip model).  Deterministic per stream.
    """
    p = np.asarray(populations, dtype=float)
    if p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("populations must be a probability vector")
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    centers = np.asarray(centers, dtype=float).reshape(3, 2)
    rng = stream.generator()
    states = rng.choice(3, size=n_shots, p=np.clip(p, 0, None) / np.clip(p, 0, None).sum())
    if decay is not None:
        gamma_1, tau_meas = decay
        excited = states == 1
        n_e = int(np.count_nonzero(excited))
        if n_e:
            t_decay = rng.exponential(1.0 / (TWO_PI * gamma_1), size=n_e)
            flip = t_decay < tau_meas / 2.0
            idx = np.flatnonzero(excited)[flip]
            states[idx] = 0
    iq = centers[states] + sigma * rng.standard_normal((n_shots, 2))
    return ShotSet(iq=iq, label=label, stream=stream)


def _histogram2d(iq: np.ndarray, bins: int):
    lo = iq.min(axis=0)
    hi = iq.max(axis=0)
    pad = 0.05 * (hi - lo + 1e-12)
    counts, xe, ye = np.histogram2d(
        iq[:, 0], iq[:, 1], bins=bins,
        range=[[lo[0] - pad[0], hi[0] + pad[0]], [lo[1] - pad[1], hi[1] + pad[1]]],
    )
    xc = 0.5 * (xe[:-1] + xe[1:])
    yc = 0.5 * (ye[:-1] + ye[1:])
    gx, gy = np.meshgrid(xc, yc, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()]), counts.ravel()


class ReadoutClassifier:
    """Three-state Gaussian readout calibration (sklearn-style estimator).

    Sequential calibration: a single 2-D Gaussian fit on the ground-state
    histogram pins the shared width ``sigma_`` and the g centre; the e and f
    centres are then fitted at fixed width; finally three-component
    height-only fits on each calibration set give the per-state mixture
    amplitudes ``heights_``.  The assignment ``confusion_`` matrix (row
    -stochastic, P(assigned j | prepared i)) comes from nearest-centre
    classification of the calibration sets, and its inverse converts
    measured assignment fractions into state populations.
    """

    def __init__(self, bins: int = 60):
        self.bins = bins

    def get_params(self, deep: bool = True) -> dict:
        return {"bins": self.bins}

    def set_params(self, **params) -> "ReadoutClassifier":
        for k, v in params.items():
            if not hasattr(self, k):
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    # -- calibration --------------------------------------------------------

    def _fit_blob(self, iq: np.ndarray, sigma: float | None):
        xy, counts = _histogram2d(iq, self.bins)
        i0 = int(np.argmax(counts))
        x0, y0 = xy[i0]
        if sigma is None:
            spread = float(np.mean(np.std(iq, axis=0)))

            def model(x, h, cx, cy, sig):
                r2 = (x[:, 0] - cx) ** 2 + (x[:, 1] - cy) ** 2
                return h * np.exp(-r2 / (2.0 * sig ** 2))

            fit = fit_least_squares(model, xy, counts,
                                    [counts.max(), x0, y0, spread])
            h, cx, cy, sig = fit.params
            return (cx, cy), abs(sig), h, fit
        else:

            def model(x, h, cx, cy, _s=sigma):
                r2 = (x[:, 0] - cx) ** 2 + (x[:, 1] - cy) ** 2
                return h * np.exp(-r2 / (2.0 * _s ** 2))

            fit = fit_least_squares(model, xy, counts, [counts.max(), x0, y0])
            h, cx, cy = fit.params
            return (cx, cy), sigma, h, fit

    def _component_heights(self, iq: np.ndarray) -> np.ndarray:
        """Height-only three-component fit (centers and width held fixed)."""
        xy, counts = _histogram2d(iq, self.bins)
        design = np.stack([
            np.exp(-((xy[:, 0] - cx) ** 2 + (xy[:, 1] - cy) ** 2) / (2.0 * self.sigma_ ** 2))
            for cx, cy in self.centers_
        ], axis=1)
        heights, _ = nnls(design, counts.astype(float))
        return heights

    def fit(self, X, y) -> "ReadoutClassifier":
        """Calibrate from labelled IQ shots (labels 0, 1, 2 for g, e, f)."""
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        y = np.asarray(y)
        sets = [X[y == s] for s in range(3)]
        for s, shots in zip(STATE_LABELS, sets):
            if shots.shape[0] < 1000:
                raise ValueError(f"calibration set '{s}' needs >= 1000 shots")

        center_g, sigma, _, _ = self._fit_blob(sets[0], sigma=None)
        self.sigma_ = float(sigma)
        center_e, _, _, _ = self._fit_blob(sets[1], sigma=self.sigma_)
        center_f, _, _, _ = self._fit_blob(sets[2], sigma=self.sigma_)
        self.centers_ = np.array([center_g, center_e, center_f])

        self.heights_ = np.stack([self._component_heights(s) for s in sets])

        confusion = np.stack([
            np.bincount(self._assign(s), minlength=3) / s.shape[0] for s in sets
        ])
        # the inverse amplifies statistical noise by 1/sigma_min; reject
        # calibrations whose states are effectively indistinguishable
        if np.linalg.svd(confusion, compute_uv=False).min() < 0.05:
            raise ValueError("confusion matrix is singular: states are indistinguishable")
        self.confusion_ = confusion
        return self

    # -- inference -----------------------------------------------------------

    def _assign(self, iq: np.ndarray) -> np.ndarray:
        d2 = ((iq[:, None, :] - self.centers_[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)

    def predict(self, X) -> np.ndarray:
        """Maximum-likelihood state assignment (nearest centre at shared
        width)."""
        return self._assign(np.asarray(X, dtype=float).reshape(-1, 2))

    def assignment_fractions(self, X) -> np.ndarray:
        return np.bincount(self.predict(X), minlength=3) / np.asarray(X).reshape(-1, 2).shape[0]

    def to_json(self) -> str:
        return json.dumps({
            "bins": self.bins,
            "centers": self.centers_.tolist(),
            "sigma": self.sigma_,
            "heights": self.heights_.tolist(),
            "confusion": self.confusion_.tolist(),
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ReadoutClassifier":
        data = json.loads(text)
        obj = cls(bins=data["bins"])
        obj.centers_ = np.asarray(data["centers"], dtype=float)
        obj.sigma_ = float(data["sigma"])
        obj.heights_ = np.asarray(data["heights"], dtype=float)
        obj.confusion_ = np.asarray(data["confusion"], dtype=float)
        return obj


def calibrate_classifier(shots_g: ShotSet, shots_e: ShotSet, shots_f: ShotSet,
                         bins: int = 60) -> ReadoutClassifier:
    """Run the sequential Gaussian calibration on three labelled shot sets."""
    sets = (shots_g, shots_e, shots_f)
    x = np.concatenate([s.iq for s in sets])
    y = np.concatenate([np.full(len(s), i) for i, s in enumerate(sets)])
    return ReadoutClassifier(bins=bins).fit(x, y)


@dataclass(frozen=True)
class PopulationEstimate:
    """Confusion-corrected state populations.

    ``clamp_correction`` is the Euclidean distance moved by the projection
    onto the probability simplex (zero when the inversion was physical).
    """

    populations: np.ndarray
    raw_fractions: np.ndarray
    clamp_correction: float


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    cumsum = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > (cumsum - 1.0))[0][-1]
    theta = (cumsum[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def estimate_populations(classifier: ReadoutClassifier, shots: ShotSet) -> PopulationEstimate:
    """State populations from assignment fractions and the inverse confusion
    matrix, projected back onto the probability simplex if needed."""
    fractions = classifier.assignment_fractions(shots.iq)
    raw = np.linalg.solve(classifier.confusion_.T, fractions)
    clamped = _project_simplex(raw)
    return PopulationEstimate(
        populations=clamped,
        raw_fractions=fractions,
        clamp_correction=float(np.linalg.norm(clamped - raw)),
    )


def gaussian_overlap_error(distance: float, sigma: float) -> float:
    """Misassignment probability of two equal-width Gaussians separated by
    ``distance``: Q(d / 2 sigma)."""
    return 0.5 * erfc(distance / (2.0 * sigma) / math.sqrt(2.0))


@dataclass(frozen=True)
class AssignmentFidelity:
    f_meas: float
    f_overlap: float
    f_decay: float | None
    f_budget: float | None


def assignment_fidelity(
    shots_g: ShotSet,
    shots_e: ShotSet,
    classifier: ReadoutClassifier,
    gamma_1: float | None = None,
    tau_meas: float | None = None,
) -> AssignmentFidelity:
    """Two-state assignment fidelity decomposition.

    ``f_meas`` is the empirical [P(g|g) + P(e|e)]/2 from hard two-state
    discrimination (each shot assigned to the nearer of the g and e
    centres, as in a thresholded one-dimensional histogram);
    ``f_overlap`` the fidelity limit set by the fitted Gaussian overlap; and
    ``f_decay = exp(-tau_meas * Gamma_1 / 2)`` (angular rate) the limit from
    relaxation during the measurement, reported when the budget inputs are
    supplied, together with the product ``f_overlap * f_decay``.
    """
    def binary_assign(iq):
        d2 = ((iq[:, None, :] - classifier.centers_[None, :2, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)

    p_gg = float(np.mean(binary_assign(shots_g.iq) == 0))
    p_ee = float(np.mean(binary_assign(shots_e.iq) == 1))
    f_meas = 0.5 * (p_gg + p_ee)
    dist = float(np.linalg.norm(classifier.centers_[1] - classifier.centers_[0]))
    f_overlap = 1.0 - gaussian_overlap_error(dist, classifier.sigma_)
    f_decay = None
    f_budget = None
    if gamma_1 is not None and tau_meas is not None:
        f_decay = math.exp(-tau_meas * TWO_PI * gamma_1 / 2.0)
        f_budget = f_overlap * f_decay
    return AssignmentFidelity(f_meas=f_meas, f_overlap=f_overlap,
                              f_decay=f_decay, f_budget=f_budget)


# ---------------------------------------------------------------------------
# CZ calibration
# ---------------------------------------------------------------------------

@dataclass
class CZPhaseScan:
    """Chevron and conditional-phase scan of the |ee> <-> |fg> drive.

    ``duration`` holds the full-oscillation time per drive frequency
    (NaN where no full oscillation fits in the scan window); ``phase`` the
    virtual-Z-corrected conditional phase after that duration.  The
    operating point is the scanned frequency whose phase is closest to pi.
    """

    omega_d: np.ndarray
    duration: np.ndarray
    rabi: np.ndarray
    phase: np.ndarray
    valid: np.ndarray
    times: np.ndarray
    p_ee: np.ndarray
    omega_d_star: float
    tau_cz: float
    phase_star: float


def _cz_models(circuit: CircuitSpec, drive: DriveSpec, omega_d: float):
    """Lab-frame periodic Hamiltonians for the double- and single-excitation
    manifolds of the CZ drive (states referenced to |gg>, resonator idle).

    Double-excitation basis: |ee>, |fg>, |gf>, |eg,c1>, |ge,c1>, |gg,c2>;
    single-excitation basis: |eg>, |ge>, |gg,c1>.  Keeping the full
    manifolds matters: the coupler-photon states produce equal virtual
    shifts in |ee> and the single-excitation states, and truncating them
    unbalances the conditional-phase combination.
    """
    w, al, cp = circuit.omega, circuit.alpha, circuit.coupler
    g12 = circuit.coupling("Q1", "Q2")
    g1c = circuit.coupling("Q1", "C")
    g2c = circuit.coupling("Q2", "C")
    root2 = math.sqrt(2.0)

    def phi(t):
        return drive.phi_dc + drive.a_d * math.sin(TWO_PI * omega_d * t)

    def h_double(t):
        wc = coupler_frequency(phi(t), cp)
        h = np.zeros((6, 6), dtype=complex)
        ee, fg, gf, eg1, ge1, gg2 = range(6)
        h[ee, ee] = w["Q1"] + w["Q2"]
        h[fg, fg] = 2 * w["Q1"] + al["Q1"]
        h[gf, gf] = 2 * w["Q2"] + al["Q2"]
        h[eg1, eg1] = w["Q1"] + wc
        h[ge1, ge1] = w["Q2"] + wc
        h[gg2, gg2] = 2 * wc + al["C"]
        h[ee, fg] = h[fg, ee] = -root2 * g12
        h[ee, gf] = h[gf, ee] = -root2 * g12
        h[ee, eg1] = h[eg1, ee] = -g2c
        h[ee, ge1] = h[ge1, ee] = -g1c
        h[fg, eg1] = h[eg1, fg] = -root2 * g1c
        h[gf, ge1] = h[ge1, gf] = -root2 * g2c
        h[eg1, ge1] = h[ge1, eg1] = -g12
        h[eg1, gg2] = h[gg2, eg1] = -root2 * g1c
        h[ge1, gg2] = h[gg2, ge1] = -root2 * g2c
        return TWO_PI * h

    def h_single(t):
        wc = coupler_frequency(phi(t), cp)
        return TWO_PI * np.array([
            [w["Q1"], -g12, -g1c],
            [-g12, w["Q2"], -g2c],
            [-g1c, -g2c, wc],
        ], dtype=complex)

    return h_double, h_single


def static_zz_shift(circuit: CircuitSpec, phi_dc: float) -> float:
    """Idle ZZ interaction (Hz) at a coupler flux point:

        zeta = E_ee - E_eg - E_ge + E_gg

    from dense diagonalisation of the undriven excitation manifolds.  Flux
    points with small |zeta| are natural two-qubit-gate operating points.
    """
    drive = DriveSpec(phi_dc=phi_dc, a_d=0.0, omega_d=1e9, k=1)
    h2, h1 = _cz_models(circuit, drive, 1e9)
    w = circuit.omega
    ev2 = np.linalg.eigvalsh(h2(0.0)) / TWO_PI
    ev1 = np.linalg.eigvalsh(h1(0.0)) / TWO_PI
    e_ee = ev2[np.argmin(np.abs(ev2 - (w["Q1"] + w["Q2"])))]
    e_eg = ev1[np.argmin(np.abs(ev1 - w["Q1"]))]
    e_ge = ev1[np.argmin(np.abs(ev1 - w["Q2"]))]
    return float(e_ee - e_eg - e_ge)


def _periodic_propagator(h_fn, period: float, n_sub: int = 2048) -> np.ndarray:
    dt = period / n_sub
    ts = (np.arange(n_sub) + 0.5) * dt
    h_stack = np.stack([h_fn(t) for t in ts])
    evals, evecs = np.linalg.eigh(h_stack)
    phases = np.exp(-1j * evals * dt)
    steps = np.einsum("nij,nj,nkj->nik", evecs, phases, evecs.conj())
    u = np.eye(h_stack.shape[1], dtype=complex)
    for s in steps:
        u = s @ u
    return u


def cz_conditional_phase(
    circuit: CircuitSpec,
    drive: DriveSpec,
    omega_d_span: tuple[float, float] = (-15e6, 15e6),
    n_omega: int = 15,
    max_duration: float = 1.5e-6,
    n_sub: int = 2048,
) -> CZPhaseScan:
    """Chevron and conditional-phase calibration of the parametric CZ gate.

    For each drive frequency the excitation manifolds are propagated through
    the exact periodic models; the duration of one full |ee> population
    oscillation and the conditional phase

        phi_c = arg(z_ee * conj(z_eg) * conj(z_ge)) - (undriven baseline)

    after that duration are recorded.  The single-excitation phases play the
    role of the calibrated virtual-Z corrections, and the phase is
    referenced to an undriven evolution of equal duration, i.e. to qubit
    frames that precess at the idle (static-ZZ-inclusive) frequencies.  The
    reported operating point is the scanned frequency whose conditional
    phase is closest to pi.
    """
    man = transition_manifold(circuit, "cz")
    w0 = man.bare_drive_frequency
    omega_grid = w0 + np.linspace(omega_d_span[0], omega_d_span[1], n_omega)

    n_periods = int(max_duration * omega_grid.min())
    p_ee = np.empty((n_omega, 0))
    rows = []
    durations = np.full(n_omega, np.nan)
    rabis = np.full(n_omega, np.nan)
    phases = np.full(n_omega, np.nan)
    valid = np.zeros(n_omega, dtype=bool)
    times_ref = None

    drive_off = DriveSpec(phi_dc=drive.phi_dc, a_d=0.0, omega_d=drive.omega_d,
                          k=drive.k, envelope=drive.envelope)

    for i, wd in enumerate(omega_grid):
        period = 1.0 / wd
        n_per = int(max_duration / period)
        h2, h1 = _cz_models(circuit, drive, wd)
        u2 = _periodic_propagator(h2, period, n_sub)
        u1 = _periodic_propagator(h1, period, n_sub)
        h2_0, h1_0 = _cz_models(circuit, drive_off, wd)
        u2_0 = _periodic_propagator(h2_0, period, n_sub)
        u1_0 = _periodic_propagator(h1_0, period, n_sub)

        z_ee = np.empty(n_per, dtype=complex)
        z_eg = np.empty(n_per, dtype=complex)
        z_ge = np.empty(n_per, dtype=complex)
        z_ref = np.empty(n_per, dtype=complex)
        m2 = np.eye(6, dtype=complex)
        m1 = np.eye(3, dtype=complex)
        m2_0 = np.eye(6, dtype=complex)
        m1_0 = np.eye(3, dtype=complex)
        for n in range(n_per):
            z_ee[n] = m2[0, 0]
            z_eg[n] = m1[0, 0]
            z_ge[n] = m1[1, 1]
            z_ref[n] = m2_0[0, 0] * np.conj(m1_0[0, 0]) * np.conj(m1_0[1, 1])
            m2 = u2 @ m2
            m1 = u1 @ m1
            m2_0 = u2_0 @ m2_0
            m1_0 = u1_0 @ m1_0
        pop = np.abs(z_ee) ** 2
        rows.append(pop)
        if times_ref is None:
            times_ref = np.arange(n_per) * period

        # full-oscillation duration from the dominant slow spectral line
        # (stroboscopic sampling still aliases weak coupler beats, so a
        # plain local-minimum search is too fragile)
        if pop.max() - pop.min() < 0.05:
            continue  # no appreciable transfer at this drive frequency
        q = (pop - pop.mean()) * np.hanning(n_per)
        spec = np.abs(np.fft.rfft(q))
        freqs = np.fft.rfftfreq(n_per, d=period)
        window = (freqs > 0) & (freqs < 60e6)
        if not np.any(window):
            continue
        k_peak = int(np.argmax(np.where(window, spec, 0.0)))
        if 0 < k_peak < len(freqs) - 1:
            y0, y1, y2 = spec[k_peak - 1], spec[k_peak], spec[k_peak + 1]
            denom = y0 - 2 * y1 + y2
            k_peak = k_peak + (0.5 * (y0 - y2) / denom if denom != 0 else 0.0)
        rabi = k_peak * freqs[1]
        if n_per * period * rabi < 1.5:
            continue  # window holds less than 1.5 oscillations
        n_full = int(round(1.0 / (rabi * period)))
        if n_full < 2 or n_full >= n_per:
            continue
        durations[i] = n_full * period
        rabis[i] = rabi
        zc = (z_ee[n_full] * np.conj(z_eg[n_full]) * np.conj(z_ge[n_full])
              * np.conj(z_ref[n_full]))
        phases[i] = math.atan2(zc.imag, zc.real) % TWO_PI
        valid[i] = True

    if not np.any(valid):
        raise RuntimeError("no full population oscillation found in the scanned window")

    n_cols = min(len(r) for r in rows)
    p_ee = np.stack([r[:n_cols] for r in rows])

    # operating point: interpolate the pi crossing between adjacent valid
    # scan points on a continuous phase branch; fall back to the nearest
    # point when no bracket exists
    w_star = tau_star = phi_star = None
    for i in range(n_omega - 1):
        if not (valid[i] and valid[i + 1]):
            continue
        dphi = phases[i + 1] - phases[i]
        if abs(dphi) >= math.pi:
            continue  # branch wrap between grid points
        if (phases[i] - math.pi) * (phases[i + 1] - math.pi) <= 0 and dphi != 0:
            f = (math.pi - phases[i]) / dphi
            w_star = omega_grid[i] + f * (omega_grid[i + 1] - omega_grid[i])
            tau_star = durations[i] + f * (durations[i + 1] - durations[i])
            phi_star = math.pi
            break
    if w_star is None:
        dist = np.where(valid, np.abs(phases - math.pi), np.inf)
        i_star = int(np.argmin(dist))
        w_star = omega_grid[i_star]
        tau_star = durations[i_star]
        phi_star = phases[i_star]

    return CZPhaseScan(
        omega_d=omega_grid,
        duration=durations,
        rabi=rabis,
        phase=phases,
        valid=valid,
        times=times_ref[:n_cols],
        p_ee=p_ee,
        omega_d_star=float(w_star),
        tau_cz=float(tau_star),
        phase_star=float(phi_star),
    )


# ---------------------------------------------------------------------------
# interleaved randomized benchmarking
# ---------------------------------------------------------------------------

def interleaved_rb_gate_error(lambda_b: float, lambda_i: float, d: int = 4) -> float:
    """Interleaved-gate error from baseline and interleaved RB decays:

        eps = (1 - lambda_i / lambda_b) * (d - 1) / d

    ``d = 4`` for a two-qubit system.  A negative estimate (lambda_i >
    lambda_b, possible with fit noise) is returned as-is with a warning.
    """
    if not 0.0 < lambda_b <= 1.0 or not 0.0 < lambda_i <= 1.0:
        raise ValueError("decay parameters must lie in (0, 1]")
    eps = (1.0 - lambda_i / lambda_b) * (d - 1) / d
    if eps < 0:
        warnings.warn("lambda_i > lambda_b: negative gate-error estimate",
                      UserWarning, stacklevel=2)
    return eps
