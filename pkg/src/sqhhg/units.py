"""Unit conversions between SI-style lab units and Hartree atomic units.

Conventions used throughout the package (atomic units unless stated):

* 1 a.u. of energy      = 27.2114 eV
* 1 a.u. of field       = 5.14221e11 V/m
* carrier frequency     omega_au = 45.5634 / wavelength_nm
* peak field from intensity  E0_au = sqrt(I[W/cm^2] / 3.50945e16)
* harmonic order        = energy / (hbar * omega)  (dimensionless)
"""

from __future__ import annotations

from .exceptions import InvalidParameterError

HARTREE_EV = 27.2114
FIELD_AU_V_PER_M = 5.14221e11
INTENSITY_AU_W_CM2 = 3.50945e16
OMEGA_AU_NM = 45.5634
BOHR_NM = 0.0529177


def omega_from_wavelength_nm(wavelength_nm: float) -> float:
    """Carrier angular frequency in a.u. for a vacuum wavelength in nm."""
    if not wavelength_nm > 0:
        raise InvalidParameterError(f"wavelength must be positive, got {wavelength_nm}")
    return OMEGA_AU_NM / wavelength_nm


def field_from_intensity_w_cm2(intensity: float) -> float:
    """Peak electric field in a.u. for a peak intensity in W/cm^2."""
    if not intensity >= 0:
        raise InvalidParameterError(f"intensity must be >= 0, got {intensity}")
    return (intensity / INTENSITY_AU_W_CM2) ** 0.5


_CONVERSIONS = {
    ("au_energy", "eV"): HARTREE_EV,
    ("eV", "au_energy"): 1.0 / HARTREE_EV,
    ("au_field", "V/m"): FIELD_AU_V_PER_M,
    ("V/m", "au_field"): 1.0 / FIELD_AU_V_PER_M,
    ("nm", "au_length"): 1.0 / BOHR_NM,
    ("au_length", "nm"): BOHR_NM,
}


def convert(value: float, unit_from: str, unit_to: str) -> float:
    """Convert `value` between a recognized pair of units.

    Recognized linear pairs: au_energy<->eV, au_field<->V/m, nm<->au_length.
    Nonlinear derived quantities (intensity -> field, wavelength -> omega)
    have dedicated functions above.
    """
    if unit_from == unit_to:
        return value
    try:
        return value * _CONVERSIONS[(unit_from, unit_to)]
    except KeyError:
        raise InvalidParameterError(
            f"unknown unit pair: {unit_from!r} -> {unit_to!r}"
        ) from None


def harmonic_order(energy_au: float, omega_au: float) -> float:
    """Express an energy as a harmonic order of the carrier."""
    if not omega_au > 0:
        raise InvalidParameterError("omega must be positive")
    return energy_au / omega_au
