"""Static circuit model: element parameters, flux-tunable coupler frequency
and the truncated system Hamiltonian.

Elements are labelled ``Q1, Q2, C, R``; tensor factors are ordered the same
way everywhere in the package (Q1 x Q2 x C x R).  Flux ``phi_ext`` is the
phase argument entering the junction interference directly (period pi in
E_J); flux in units of Phi_0 maps as ``phi_ext = pi * Phi / Phi_0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .numerics import TWO_PI

ELEMENTS = ("Q1", "Q2", "C", "R")


@dataclass(frozen=True)
class CouplerSpec:
    """SQUID-based tunable coupler junction parameters (all energies E/h, Hz).

    ``e_sigma`` is the sum of the two junction Josephson energies, ``d`` their
    asymmetry and ``e_c`` the charging energy.
    """

    e_sigma: float
    d: float
    e_c: float

    def __post_init__(self):
        if self.e_sigma <= 0:
            raise ValueError("e_sigma must be positive")
        if self.e_c <= 0:
            raise ValueError("e_c must be positive")
        if not 0.0 <= self.d <= 1.0:
            raise ValueError("asymmetry d must lie in [0, 1]")


def josephson_energy(phi_ext, spec: CouplerSpec):
    """Effective Josephson energy E_J(phi_ext) in Hz.

    Uses the singularity-free form ``E_sigma * sqrt(cos^2 + d^2 sin^2)``,
    equivalent to ``E_sigma |cos| sqrt(1 + d^2 tan^2)`` but regular at
    phi = pi/2.  Accepts real or complex array input (complex analyticity is
    used by the Fourier-coefficient machinery).
    """
    phi = np.asarray(phi_ext)
    c, s = np.cos(phi), np.sin(phi)
    val = spec.e_sigma * np.sqrt(c * c + (spec.d * s) ** 2)
    return val if val.ndim else val[()]


def coupler_frequency(phi_ext, spec: CouplerSpec):
    """Coupler transition frequency ``sqrt(8 E_J E_C) - E_C`` in Hz.

    The asymptotic transmon expression is used as-is; no charge-dispersion
    corrections.
    """
    ej = josephson_energy(phi_ext, spec)
    return np.sqrt(8.0 * ej * spec.e_c) - spec.e_c


def coupler_spec_from_band(omega_min: float, omega_max: float, alpha_c: float) -> CouplerSpec:
    """Reverse-fit (E_sigma, d, E_C) from the coupler tuning band.

    The junction parameters are not independently known; this fixture pins
    them to the band endpoints ``omega_C(0) = omega_max``,
    ``omega_C(pi/2) = omega_min`` and ``E_C = -alpha_c``.
    """
    if alpha_c >= 0:
        raise ValueError("coupler anharmonicity must be negative")
    e_c = -alpha_c
    e_sigma = (omega_max + e_c) ** 2 / (8.0 * e_c)
    d = (omega_min + e_c) ** 2 / (8.0 * e_c * e_sigma)
    return CouplerSpec(e_sigma=e_sigma, d=d, e_c=e_c)


@dataclass(frozen=True)
class CircuitSpec:
    """Element frequencies, anharmonicities, static couplings and truncations.

    ``omega`` has one entry per element (Hz); ``alpha`` covers the
    transmon-like elements Q1, Q2, C (negative, Hz); the resonator is
    harmonic.  ``g`` maps unordered element pairs to coupling strengths (Hz),
    with the paper's signed convention (g_CR < 0 on the reference device).
    """

    omega: dict
    alpha: dict
    g: dict
    coupler: CouplerSpec
    truncation: dict = field(default_factory=lambda: {"Q1": 3, "Q2": 3, "C": 2, "R": 2})

    def __post_init__(self):
        for el in ELEMENTS:
            if el not in self.omega:
                raise ValueError(f"missing frequency for element {el}")
            if self.truncation.get(el, 0) < 2:
                raise ValueError(f"truncation for {el} must be >= 2")
        for el in ("Q1", "Q2", "C"):
            if el not in self.alpha:
                raise ValueError(f"missing anharmonicity for {el}")
            if self.alpha[el] >= 0:
                raise ValueError(f"anharmonicity of {el} must be negative")
        if "R" in self.alpha:
            raise ValueError("the resonator is harmonic; alpha['R'] must be absent")
        canon = {}
        for (i, j), val in self.g.items():
            if i == j:
                raise ValueError("self-couplings g_ii are not allowed")
            if i not in ELEMENTS or j not in ELEMENTS:
                raise ValueError(f"unknown element pair ({i}, {j})")
            key = tuple(sorted((i, j)))
            if key in canon and canon[key] != val:
                raise ValueError(f"conflicting values for coupling {key}")
            canon[key] = float(val)
        object.__setattr__(self, "g", canon)

    def coupling(self, i: str, j: str) -> float:
        """Symmetric static coupling g_ij (Hz); zero when unspecified."""
        return self.g.get(tuple(sorted((i, j))), 0.0)

    def at_flux(self, phi_ext: float) -> "CircuitSpec":
        """Copy with the coupler frequency evaluated at the given flux."""
        omega = dict(self.omega)
        omega["C"] = float(coupler_frequency(phi_ext, self.coupler))
        return CircuitSpec(omega=omega, alpha=dict(self.alpha), g=dict(self.g),
                           coupler=self.coupler, truncation=dict(self.truncation))

    @property
    def dimension(self) -> int:
        return int(np.prod([self.truncation[el] for el in ELEMENTS]))


@dataclass(frozen=True)
class DecayRates:
    """Dissipation rates, all cyclic (Hz, the Gamma/2pi numbers).

    ``gamma1`` and ``gamma_phi`` are per-element; ``kappa_r`` is the
    resonator linewidth and ``gamma_fe`` the qubit f -> e relaxation rate.
    ``gamma_sigma`` is the derived sum Gamma_1 + Gamma_phi.
    """

    gamma1: dict
    gamma_phi: dict
    kappa_r: float
    gamma_fe: float

    def __post_init__(self):
        for name, table in (("gamma1", self.gamma1), ("gamma_phi", self.gamma_phi)):
            for el, val in table.items():
                if val < 0:
                    raise ValueError(f"{name}[{el}] must be non-negative")
        if self.kappa_r < 0 or self.gamma_fe < 0:
            raise ValueError("rates must be non-negative")

    def gamma_sigma(self, element: str = "Q1") -> float:
        return self.gamma1[element] + self.gamma_phi[element]


def destroy(dim: int) -> np.ndarray:
    """Bosonic lowering operator truncated to ``dim`` levels."""
    return np.diag(np.sqrt(np.arange(1, dim)), k=1)


def _lift(op: np.ndarray, index: int, dims: list[int]) -> np.ndarray:
    mats = [np.eye(d) for d in dims]
    mats[index] = op
    return reduce(np.kron, mats)


def build_hamiltonian(spec: CircuitSpec) -> np.ndarray:
    """Truncated system Hamiltonian in angular units (rad/s).

    Kinetic terms ``omega_i n_i``, Kerr terms ``(alpha_i/2) n_i (n_i - 1)``
    and pairwise couplings ``g_ij (a_i^dag - a_i)(a_j^dag - a_j)`` with the
    full (non-RWA) coupling operator.  Tensor order is Q1 x Q2 x C x R; the
    single-excitation off-diagonal element of a coupled pair is ``-g_ij``.
    """
    dims = [spec.truncation[el] for el in ELEMENTS]
    lowering = {el: _lift(destroy(dims[i]), i, dims) for i, el in enumerate(ELEMENTS)}

    dim = int(np.prod(dims))
    h = np.zeros((dim, dim), dtype=complex)
    for el in ELEMENTS:
        a = lowering[el]
        n = a.conj().T @ a
        h += TWO_PI * spec.omega[el] * n
        if el in spec.alpha:
            h += TWO_PI * spec.alpha[el] / 2.0 * (n @ n - n)
    for (i, j), g in spec.g.items():
        if g == 0.0:
            continue
        qi = lowering[i].conj().T - lowering[i]
        qj = lowering[j].conj().T - lowering[j]
        h += TWO_PI * g * (qi @ qj)
    return h
