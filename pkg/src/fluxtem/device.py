"""Closed-form beam-physics and SQUID-sizing calculators.

These are order-of-magnitude design estimates: the key outputs are the
magnetic (flux-quantum) beam deflection versus the diffraction-limited
beam spread, the same-order check via the Lorentz force, the much
weaker electrostatic (charge-qubit) deflection, and the inductance and
critical current that put an rf-SQUID into the macroscopic quantum
coherence regime (L * i_c of order one flux quantum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import CODATA, PhysicalConstants


@dataclass(frozen=True)
class BeamSpec:
    """Relativistic electron-beam kinematics plus the beam waist at the ring."""

    kinetic_energy: float  # [eV]
    wavelength: float      # [m]
    momentum: float        # [kg m/s]
    velocity: float        # [m/s]
    waist: float           # [m]

    def __post_init__(self):
        if self.kinetic_energy <= 0.0:
            raise ValueError("kinetic energy must be positive")
        if self.waist <= 0.0:
            raise ValueError("beam waist must be positive")


@dataclass(frozen=True)
class SquidSpec:
    """rf-SQUID sizing: geometry, inductance, and junction critical current."""

    wafer_thickness: float      # d [m]
    flux_path_length: float     # l, along the optical axis [m]
    permeability: float         # mu [H/m]
    inductance: float           # L [H]
    critical_current: float     # i_c [A]
    lateral_size: float = 10e-6
    turns: int = 1


@dataclass(frozen=True)
class DeflectionResult:
    theta_d: float  # flux-quantum deflection angle [rad]
    theta_b: float  # diffraction beam spread [rad]
    ratio: float    # theta_d / theta_b


def beam_from_energy(
    kinetic_energy_ev: float,
    waist: float = 10e-6,
    constants: PhysicalConstants = CODATA,
) -> BeamSpec:
    """Fill wavelength, momentum and velocity relativistically from the energy.

    Uses (pc)^2 = E_total^2 - (m c^2)^2 with E_total = E_kin + m c^2 and
    lambda = h / p, which is exact by construction.
    """
    if kinetic_energy_ev <= 0.0:
        raise ValueError(f"kinetic energy must be positive, got {kinetic_energy_ev!r}")
    c = constants.c
    e_kin = kinetic_energy_ev * constants.e
    e_total = e_kin + constants.rest_energy
    pc = math.sqrt(e_total**2 - constants.rest_energy**2)
    p = pc / c
    v = pc * c / e_total
    return BeamSpec(
        kinetic_energy=kinetic_energy_ev,
        wavelength=constants.h / p,
        momentum=p,
        velocity=v,
        waist=waist,
    )


def flux_deflection(beam: BeamSpec, constants: PhysicalConstants = CODATA) -> DeflectionResult:
    """Deflection by one flux quantum vs diffraction spread of the beam.

    theta_b = lambda / a = h / (p a) and theta_d = h / (2 p a), so the
    ratio is the algebraic constant 1/2 for every beam; theta_d is
    computed as theta_b / 2 to keep that identity exact in floating
    point.
    """
    if beam.waist <= 0.0:
        raise ValueError("beam waist must be positive")
    theta_b = constants.h / (beam.momentum * beam.waist)
    theta_d = 0.5 * theta_b
    return DeflectionResult(theta_d=theta_d, theta_b=theta_b, ratio=theta_d / theta_b)


def lorentz_consistency(beam: BeamSpec, flux_path_length: float, constants: PhysicalConstants = CODATA) -> float:
    """Deflection recomputed from the Lorentz force F = e v B = e v phi0 / (a l).

    The interaction time l / v cancels l and v exactly, leaving
    delta_p = e phi0 / a and theta_d = e phi0 / (a p) = h / (2 p a).
    """
    if flux_path_length <= 0.0:
        raise ValueError("flux path length must be positive")
    force = constants.e * beam.velocity * constants.phi0 / (beam.waist * flux_path_length)
    dt = flux_path_length / beam.velocity
    return force * dt / beam.momentum


def charge_deflection(beam: BeamSpec, constants: PhysicalConstants = CODATA) -> float:
    """Electrostatic (charge-qubit) deflection e^2 / (eps0 a v p).

    Falls off with velocity, which is why the electrostatic scheme is far
    weaker than the flux scheme at TEM energies.
    """
    return constants.e**2 / (constants.eps0 * beam.waist * beam.velocity * beam.momentum)


def squid_sizing(
    wafer_thickness: float,
    permeability: float = CODATA.mu0,
    log_factor: float = 1.0,
    flux_path_length: float | None = None,
    lateral_size: float = 10e-6,
    turns: int = 1,
    constants: PhysicalConstants = CODATA,
) -> SquidSpec:
    """Size the hollow-ring SQUID like a shorted coaxial cable.

    L = mu * d up to a geometry-dependent logarithmic factor (default 1,
    exposed as `log_factor`), and i_c = phi0 / L so that L * i_c equals
    one flux quantum by construction.
    """
    if wafer_thickness <= 0.0:
        raise ValueError("wafer thickness must be positive")
    if log_factor <= 0.0:
        raise ValueError("log factor must be positive")
    inductance = permeability * wafer_thickness * log_factor
    return SquidSpec(
        wafer_thickness=wafer_thickness,
        flux_path_length=wafer_thickness if flux_path_length is None else flux_path_length,
        permeability=permeability,
        inductance=inductance,
        critical_current=constants.phi0 / inductance,
        lateral_size=lateral_size,
        turns=turns,
    )


def ab_phase(flux_fraction: float, turns: int = 1) -> float:
    """Aharonov-Bohm phase pi * f * n: pi per flux quantum per loop turn."""
    if flux_fraction < 0.0:
        raise ValueError("flux fraction must be non-negative")
    if turns < 1:
        raise ValueError("turns must be >= 1")
    return math.pi * flux_fraction * turns


@dataclass
class DesignReport:
    """Tabulated design quantities plus timing/coherence feasibility flags."""

    rows: list[tuple[str, float, str]]
    warnings: list[str]

    @property
    def passed(self) -> bool:
        return not self.warnings

    def value(self, name: str) -> float:
        for row_name, value, _ in self.rows:
            if row_name == name:
                return value
        raise KeyError(name)

    def to_text(self) -> str:
        width = max(len(name) for name, _, _ in self.rows)
        lines = [f"{name:<{width}}  {value:.6e} {unit}" for name, value, unit in self.rows]
        if self.warnings:
            lines.append("")
            lines.extend(f"WARNING: {w}" for w in self.warnings)
        else:
            lines.append("")
            lines.append("all feasibility checks passed")
        return "\n".join(lines) + "\n"


def design_report(
    beam: BeamSpec,
    squid: SquidSpec,
    group_duration: float = 10e-9,
    mqc_frequency: float = 1e6,
    coherence_width: float = 10e-6,
    timing_margin: float = 10.0,
    constants: PhysicalConstants = CODATA,
) -> DesignReport:
    """Collect every design number and check the operating hierarchy.

    A k-electron group must finish well inside one qubit oscillation
    (group_duration * mqc_frequency * timing_margin <= 1), and the ring
    must fit inside the coherent patch of the wave front.
    """
    defl = flux_deflection(beam, constants)
    theta_lorentz = lorentz_consistency(beam, squid.flux_path_length, constants)
    theta_charge = charge_deflection(beam, constants)
    warnings: list[str] = []
    if group_duration * mqc_frequency * timing_margin > 1.0:
        warnings.append(
            f"group duration {group_duration:.3e} s is not << qubit period "
            f"{1.0 / mqc_frequency:.3e} s (margin {timing_margin:g}x)"
        )
    if squid.lateral_size > coherence_width:
        warnings.append(
            f"qubit lateral size {squid.lateral_size:.3e} m exceeds beam coherence width "
            f"{coherence_width:.3e} m"
        )
    rows = [
        ("kinetic_energy", beam.kinetic_energy, "eV"),
        ("wavelength", beam.wavelength, "m"),
        ("momentum", beam.momentum, "kg m/s"),
        ("velocity", beam.velocity, "m/s"),
        ("beam_waist", beam.waist, "m"),
        ("theta_d_flux", defl.theta_d, "rad"),
        ("theta_b_spread", defl.theta_b, "rad"),
        ("theta_ratio", defl.ratio, ""),
        ("theta_d_lorentz", theta_lorentz, "rad"),
        ("theta_d_charge", theta_charge, "rad"),
        ("charge_to_flux_ratio", theta_charge / defl.theta_d, ""),
        ("wafer_thickness", squid.wafer_thickness, "m"),
        ("inductance", squid.inductance, "H"),
        ("critical_current", squid.critical_current, "A"),
        ("L_ic_product", squid.inductance * squid.critical_current, "Wb"),
        ("flux_quantum", constants.phi0, "Wb"),
        ("lateral_size", squid.lateral_size, "m"),
        ("turns", float(squid.turns), ""),
        ("group_duration", group_duration, "s"),
        ("mqc_frequency", mqc_frequency, "Hz"),
        ("timing_headroom", 1.0 / (group_duration * mqc_frequency), "x"),
        ("coherence_width", coherence_width, "m"),
    ]
    return DesignReport(rows=rows, warnings=warnings)
