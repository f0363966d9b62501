"""Reference-device fixtures.

Device parameters follow the characterisation table of the reference unit
(two fixed-frequency transmons, one lossy readout resonator, one
flux-modulated coupler).  The coupler junction parameters (e_sigma, d, e_c)
are NOT independently measured quantities: they are reverse-fitted to the
quoted tuning band 3.13-5.45 GHz and anharmonicity -161 MHz, and should be
treated as a fixture, not ground truth.  The same applies to the static
flux offset and the drive amplitudes below, which are calibrated against
the package's own closed forms to reproduce the quoted effective couplings.
"""

from __future__ import annotations

import math
import warnings

from scipy.optimize import brentq

from .circuit import CircuitSpec, CouplerSpec, DecayRates, coupler_spec_from_band
from .dynamics import EnvelopeSpec
from .floquet import (
    DriveSpec,
    ValidityWarning,
    effective_coupling,
    fourier_decompose,
    k2_closed_forms,
    transition_manifold,
)

#: static flux offset of the qubit-resonator operations (rad); places the
#: idle coupler near 5.2 GHz, clear of the first-harmonic coupler resonances
PHI_DC = 0.12 * math.pi

#: static flux offset of the CZ operation (rad); the coupler sits near
#: 4.36 GHz there, where the |ee> <-> |fg> parametric coupling is strong
#: (at the qubit-resonator flux point the two virtual paths nearly cancel)
#: and the conditional-phase calibration lands at the quoted gate duration
PHI_DC_CZ = 0.3 * math.pi

#: fixture-fitted drive amplitudes (rad).  The k = 2 amplitudes reproduce
#: the quoted effective couplings through the k = 2 closed forms (exact
#: coupler elimination, ``EffectiveFrame.swap_coupling``); the CZ amplitude
#: is calibrated against the exact three-state dynamics so one full
#: oscillation takes 339 ns on the dressed resonance
A_D_RESET = 0.7928930524676335     # swap coupling 2.07 MHz on |e0> <-> |g1>
A_D_LR = 0.49080991682237063       # swap coupling 0.91 MHz on |f0> <-> |e1>
A_D_READOUT = 0.7640194132070083   # swap coupling 2.12 MHz on |f0> <-> |e1>
A_D_CZ = 0.07937531612644286       # pi-phase crossing at 339 ns on |ee> <-> |fg>

#: flat-top Gaussian sigma widths (rise/fall) per operation
RESET_PULSE = EnvelopeSpec(total_length=150e-9, sigma_rise=10e-9, sigma_fall=10e-9)
LR_PULSE = EnvelopeSpec(total_length=310e-9, sigma_rise=1e-9, sigma_fall=1e-9)
READOUT_PULSE = EnvelopeSpec(total_length=10e-6, sigma_rise=10e-9, sigma_fall=10e-9)
CZ_PULSE = EnvelopeSpec(total_length=339e-9, sigma_rise=10e-9, sigma_fall=10e-9)


def table_coupler() -> CouplerSpec:
    return coupler_spec_from_band(3.13e9, 5.45e9, -161e6)


def table_circuit() -> CircuitSpec:
    """Reference circuit; the coupler frequency entry is its zero-flux value
    (use ``CircuitSpec.at_flux`` for an operating point)."""
    return CircuitSpec(
        omega={"Q1": 3.83e9, "Q2": 3.11e9, "C": 5.45e9, "R": 5.85e9},
        alpha={"Q1": -205e6, "Q2": -216e6, "C": -161e6},
        g={
            ("Q1", "Q2"): 15e6,
            ("Q1", "C"): 115e6,
            ("Q1", "R"): 9e6,
            ("Q2", "C"): 110e6,
            ("Q2", "R"): 5e6,
            ("C", "R"): -75e6,
        },
        coupler=table_coupler(),
    )


def table_decay_rates() -> DecayRates:
    return DecayRates(
        gamma1={"Q1": 6.8e3, "Q2": 4.7e3, "C": 20e3},
        gamma_phi={"Q1": 4.4e3, "Q2": 11.3e3, "C": 143e3},
        kappa_r=770e3,
        gamma_fe=6.3e3,
    )


def _drive(kind: str, a_d: float, envelope: EnvelopeSpec,
           phi_dc: float = PHI_DC) -> DriveSpec:
    man = transition_manifold(table_circuit(), kind)
    return DriveSpec(phi_dc=phi_dc, a_d=a_d, omega_d=man.bare_drive_frequency,
                     k=man.k, envelope=envelope)


def reset_drive() -> DriveSpec:
    return _drive("reset", A_D_RESET, RESET_PULSE)


def lr_drive() -> DriveSpec:
    return _drive("lr", A_D_LR, LR_PULSE)


def readout_drive() -> DriveSpec:
    return _drive("readout", A_D_READOUT, READOUT_PULSE)


def cz_drive() -> DriveSpec:
    return _drive("cz", A_D_CZ, CZ_PULSE, phi_dc=PHI_DC_CZ)


def calibrate_drive_amplitude(
    circuit: CircuitSpec,
    kind: str,
    target_coupling: float,
    phi_dc: float = PHI_DC,
    a_max: float = 1.1,
) -> float:
    """Fixture calibration: the drive amplitude whose closed-form effective
    coupling magnitude equals ``target_coupling``.

    Uses the k = 2 closed forms with the Schrieffer-Wolff correction for the
    second-harmonic operations and the leading-order formula for k = 1.
    """
    man = transition_manifold(circuit, kind)

    def coupling(a: float) -> float:
        drive = DriveSpec(phi_dc=phi_dc, a_d=a, omega_d=man.bare_drive_frequency, k=man.k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            if man.k == 2:
                return abs(k2_closed_forms(circuit, drive, man).swap_coupling())
            spec = fourier_decompose(drive, circuit.coupler)
            return abs(effective_coupling(man.g_ac, man.g_bc, man.k, drive.omega_d, spec))

    return brentq(lambda a: coupling(a) - target_coupling, 1e-4, a_max, xtol=1e-13)
