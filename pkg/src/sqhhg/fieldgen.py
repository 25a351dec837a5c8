"""Pulse parameters, vacuum-field scale and per-shot field synthesis.

A sampled quadrature pair (X, P) defines one deterministic field realization

    E(t) = E_vac * exp[-2 ln2 (omega t / 2 pi N)^2] * (X cos(omega t) + P sin(omega t))

on a uniform time grid, with E_vac = sqrt(2 pi omega / V_eff) the vacuum
field amplitude of the quantization volume. The Gaussian envelope convention
makes the intensity-envelope FWHM exactly N optical cycles.

The ensemble-mean displacement is chosen as X_c = E0 / E_vac with P_c = 0 so
the mean peak field equals the configured E0 for every driver state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import units
from .exceptions import InvalidParameterError, ResolutionError
from .quadrature import QuadratureSample

# grid edges must reach where the *intensity* envelope is below this
ENVELOPE_SUPPORT_INTENSITY = 1e-8
# field sampling must resolve the carrier at least this finely
MIN_SAMPLES_PER_CYCLE = 40

MEAN_FIELD_SHOT_INDEX = -1  # sentinel for the deterministic reference shot


@dataclass(frozen=True)
class PulseSpec:
    """Carrier/envelope parameters with derived atomic-unit quantities."""

    wavelength_nm: float = 1500.0
    peak_intensity_w_cm2: float = 1e14
    n_cycles: float = 2.0

    def __post_init__(self):
        if self.n_cycles < 1:
            raise InvalidParameterError(f"n_cycles must be >= 1, got {self.n_cycles}")
        if self.wavelength_nm <= 0 or self.peak_intensity_w_cm2 <= 0:
            raise InvalidParameterError("wavelength and intensity must be positive")

    @property
    def omega_au(self) -> float:
        return units.omega_from_wavelength_nm(self.wavelength_nm)

    @property
    def e0_au(self) -> float:
        return units.field_from_intensity_w_cm2(self.peak_intensity_w_cm2)

    @property
    def period_au(self) -> float:
        return 2.0 * math.pi / self.omega_au

    @property
    def up_au(self) -> float:
        """Ponderomotive energy E0^2 / (4 omega^2)."""
        return self.e0_au**2 / (4.0 * self.omega_au**2)


@dataclass(frozen=True)
class ModeVolumeSpec:
    """How the vacuum-field scale is specified.

    mode is one of:
      * "ratio":     value = E_vac / E0 (dimensionless, default 1e-2)
      * "volume":    value = V_eff in a.u.
      * "amplitude": value = E_vac in a.u.
    """

    mode: str = "ratio"
    value: float = 1e-2

    def __post_init__(self):
        if self.mode not in ("ratio", "volume", "amplitude"):
            raise InvalidParameterError(f"unknown mode-volume mode {self.mode!r}")
        if not (math.isfinite(self.value) and self.value > 0):
            raise InvalidParameterError("mode-volume value must be positive")

    def e_vac_au(self, pulse: PulseSpec) -> float:
        if self.mode == "ratio":
            return self.value * pulse.e0_au
        if self.mode == "volume":
            return vacuum_field_amplitude(pulse.omega_au, self.value)
        return self.value


@dataclass(frozen=True)
class TimeGridSpec:
    """Uniform time grid [t_min, t_max] with step dt (all a.u.)."""

    t_min: float
    t_max: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0 or self.t_max <= self.t_min:
            raise InvalidParameterError("need dt > 0 and t_max > t_min")
        steps = (self.t_max - self.t_min) / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise InvalidParameterError(
                f"(t_max - t_min)/dt = {steps} is not integral within rounding"
            )

    @property
    def n_steps(self) -> int:
        return int(round((self.t_max - self.t_min) / self.dt))

    def times(self) -> np.ndarray:
        return self.t_min + self.dt * np.arange(self.n_steps + 1)

    def midpoints(self) -> np.ndarray:
        return self.t_min + self.dt * (np.arange(self.n_steps) + 0.5)


@dataclass(frozen=True)
class FieldRealization:
    """One shot's field on its grid, with the (X, P) sample that made it."""

    t_au: np.ndarray
    e_au: np.ndarray
    sample: QuadratureSample
    e_vac_au: float

    @property
    def dt(self) -> float:
        return float(self.t_au[1] - self.t_au[0])


def vacuum_field_amplitude(omega_au: float, v_eff_au: float) -> float:
    """Vacuum field sqrt(2 pi omega / V_eff), atomic units."""
    if not (omega_au > 0 and v_eff_au > 0):
        raise InvalidParameterError(
            f"omega and V_eff must be positive, got {omega_au}, {v_eff_au}"
        )
    return math.sqrt(2.0 * math.pi * omega_au / v_eff_au)


def envelope(t_au: np.ndarray, pulse: PulseSpec) -> np.ndarray:
    """Gaussian field envelope exp[-2 ln2 (omega t / 2 pi N)^2]."""
    u = pulse.omega_au * np.asarray(t_au) / (2.0 * math.pi * pulse.n_cycles)
    return np.exp(-2.0 * math.log(2.0) * u * u)


def default_time_grid(pulse: PulseSpec, dt: float = 0.02) -> TimeGridSpec:
    """Symmetric grid spanning +-3N optical periods with t = 0 on-grid."""
    half_steps = math.ceil(3.0 * pulse.n_cycles * pulse.period_au / dt)
    return TimeGridSpec(t_min=-half_steps * dt, t_max=half_steps * dt, dt=dt)


def _validate_grid(pulse: PulseSpec, grid: TimeGridSpec) -> None:
    if grid.dt > pulse.period_au / MIN_SAMPLES_PER_CYCLE:
        raise ResolutionError(
            f"dt={grid.dt} too coarse: need <= period/{MIN_SAMPLES_PER_CYCLE} "
            f"= {pulse.period_au / MIN_SAMPLES_PER_CYCLE:.4f} a.u."
        )
    edge = max(envelope(np.array([grid.t_min]), pulse)[0],
               envelope(np.array([grid.t_max]), pulse)[0])
    if edge**2 > ENVELOPE_SUPPORT_INTENSITY:
        raise ResolutionError(
            f"grid does not cover the envelope support: intensity envelope at the "
            f"edges is {edge**2:.2e} > {ENVELOPE_SUPPORT_INTENSITY}"
        )


def synthesize_field(
    sample: QuadratureSample,
    pulse: PulseSpec,
    e_vac_au: float,
    grid: TimeGridSpec,
) -> FieldRealization:
    """Deterministic field realization for one sampled (X, P) pair."""
    if not e_vac_au > 0:
        raise InvalidParameterError("e_vac must be positive")
    _validate_grid(pulse, grid)
    t = grid.times()
    carrier = pulse.omega_au * t
    e = e_vac_au * envelope(t, pulse) * (
        sample.x * np.cos(carrier) + sample.p * np.sin(carrier)
    )
    return FieldRealization(t_au=t, e_au=e, sample=sample, e_vac_au=e_vac_au)


def field_at(
    sample: QuadratureSample, pulse: PulseSpec, e_vac_au: float, t_au: np.ndarray
) -> np.ndarray:
    """Evaluate the same realization off-grid (used for midpoint fields)."""
    carrier = pulse.omega_au * np.asarray(t_au)
    return e_vac_au * envelope(t_au, pulse) * (
        sample.x * np.cos(carrier) + sample.p * np.sin(carrier)
    )


def mean_field_sample(pulse: PulseSpec, e_vac_au: float) -> QuadratureSample:
    """The deterministic displacement sample (X_c = E0/E_vac, P_c = 0)."""
    return QuadratureSample(
        x=pulse.e0_au / e_vac_au, p=0.0, shot_index=MEAN_FIELD_SHOT_INDEX
    )


def mean_field(
    pulse: PulseSpec, e_vac_au: float, grid: TimeGridSpec
) -> FieldRealization:
    """Coherent/deterministic reference: the ensemble-mean field."""
    return synthesize_field(mean_field_sample(pulse, e_vac_au), pulse, e_vac_au, grid)


def keldysh_gamma(ip_au: float, e0_au: float, omega_au: float) -> float:
    """Keldysh adiabaticity parameter omega sqrt(2 Ip) / E0.

    At the package defaults (1500 nm, 1e14 W/cm^2, Ip = 15.76 eV) this
    evaluates to 0.61: near, but not deep into, the tunneling regime.
    """
    if not (ip_au > 0 and e0_au > 0 and omega_au > 0):
        raise InvalidParameterError("keldysh_gamma needs positive inputs")
    return omega_au * math.sqrt(2.0 * ip_au) / e0_au
