"""Windowed emission spectra and the per-shot cutoff extraction protocol.

Spectrum convention: S(omega) = |dt * DFT(a(t) W(t))|^2 with W the Blackman
window (a0 = 0.42, a1 = 0.5, a2 = 0.08) spanning the full trace. With this
normalization the two-sided spectrum satisfies the discrete Parseval
identity  sum S(omega) d_omega = 2 pi sum |a W|^2 dt.

Cutoff protocol (all knobs in CutoffProtocol, defaults config-exposed):
smooth log10 S with a boxcar of width smooth_width_ho; take the plateau as
the median of the smoothed curve over plateau_window x hint; the cutoff is
the lowest frequency above 0.8 x hint where the smoothed curve sits
drop_decades below the plateau and stays there for persistence_ho. The
protocol only sees log-differences, so it is invariant under rescaling S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import uniform_filter1d

from . import units
from .exceptions import InvalidParameterError, ResolutionError
from .tdse import AccelerationTrace

LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class Spectrum:
    """Spectral intensity on a uniform frequency grid (one- or two-sided)."""

    omega_au: np.ndarray
    s: np.ndarray
    omega_carrier_au: float

    @property
    def harmonic_order(self) -> np.ndarray:
        return self.omega_au / self.omega_carrier_au

    @property
    def resolution_ho(self) -> float:
        return float((self.omega_au[1] - self.omega_au[0]) / self.omega_carrier_au)


@dataclass(frozen=True)
class CutoffProtocol:
    """Extraction knobs; defaults are deterministic and scale-invariant."""

    drop_decades: float = 3.0
    smooth_width_ho: float = 1.0
    plateau_window: tuple[float, float] = (0.3, 0.8)
    persistence_ho: float = 2.0

    def __post_init__(self):
        if self.drop_decades <= 0:
            raise InvalidParameterError("drop_decades must be positive")
        lo, hi = self.plateau_window
        if not (0.0 < lo < hi < 1.0):
            raise InvalidParameterError("plateau_window must be increasing within (0, 1)")
        if self.smooth_width_ho < 0 or self.persistence_ho <= 0:
            raise InvalidParameterError("invalid smoothing/persistence width")


@dataclass(frozen=True)
class CutoffExtraction:
    """Per-shot cutoff with plateau diagnostics and failure flags."""

    h_au: float
    h_ev: float
    h_ho: float
    plateau_level_log10: float
    flags: frozenset[str]

    @property
    def valid(self) -> bool:
        return not self.flags and math.isfinite(self.h_au)


def blackman_window(n: int) -> np.ndarray:
    """Blackman window with the classic 0.42 / 0.5 / 0.08 coefficients."""
    m = np.arange(n)
    return 0.42 - 0.5 * np.cos(2 * np.pi * m / (n - 1)) + 0.08 * np.cos(4 * np.pi * m / (n - 1))


def hann_window(n: int) -> np.ndarray:
    """Hann window (used only for the robustness cross-check)."""
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / (n - 1))


_WINDOWS = {"blackman": blackman_window, "hann": hann_window}


def hhg_spectrum(
    trace: AccelerationTrace,
    omega_carrier_au: float,
    window: str = "blackman",
    max_resolution_ho: float = 0.25,
    two_sided: bool = False,
) -> Spectrum:
    """Windowed power spectrum of the acceleration trace.

    Zero-pads as needed so the frequency spacing is at most
    max_resolution_ho harmonic orders.
    """
    t = trace.t_au
    if len(t) < 2:
        raise InvalidParameterError("trace too short")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=0, atol=1e-9 * abs(dt[0])):
        raise InvalidParameterError("acceleration trace must be on a uniform grid")
    if window not in _WINDOWS:
        raise InvalidParameterError(f"unknown window {window!r}")
    n = len(t)
    step = float(dt[0])
    sig = trace.a_au * _WINDOWS[window](n)
    min_len = int(math.ceil(2 * math.pi / (max_resolution_ho * omega_carrier_au * step)))
    nfft = sfft.next_fast_len(max(n, min_len))
    if two_sided:
        amp = sfft.fftshift(sfft.fft(sig, nfft)) * step
        omega = 2 * math.pi * sfft.fftshift(sfft.fftfreq(nfft, step))
    else:
        amp = sfft.rfft(sig, nfft) * step
        omega = 2 * math.pi * np.arange(len(amp)) / (nfft * step)
    return Spectrum(
        omega_au=omega, s=np.abs(amp) ** 2, omega_carrier_au=omega_carrier_au
    )


def _smoothed_log10(spectrum: Spectrum, width_ho: float) -> np.ndarray:
    logs = np.log10(np.maximum(spectrum.s, LOG_FLOOR))
    width_bins = int(round(width_ho / spectrum.resolution_ho))
    if width_bins > 1:
        logs = uniform_filter1d(logs, size=width_bins, mode="nearest")
    return logs


def extract_cutoff(
    spectrum: Spectrum,
    protocol: CutoffProtocol,
    classical_cutoff_hint_au: float,
) -> CutoffExtraction:
    """Locate the per-shot cutoff by the plateau-drop protocol."""
    if classical_cutoff_hint_au <= 0:
        raise InvalidParameterError("cutoff hint must be positive")
    omega = spectrum.omega_au
    if omega[0] < 0:
        raise InvalidParameterError("extraction needs a one-sided spectrum")
    if omega[-1] < 1.5 * classical_cutoff_hint_au:
        raise ResolutionError(
            f"spectrum ends at {omega[-1]:.3f} a.u., need >= 1.5x hint "
            f"({1.5 * classical_cutoff_hint_au:.3f})"
        )
    flags = set()
    sm = _smoothed_log10(spectrum, protocol.smooth_width_ho)

    lo, hi = protocol.plateau_window
    sel = (omega >= lo * classical_cutoff_hint_au) & (omega <= hi * classical_cutoff_hint_au)
    if sel.sum() >= 4:
        region = sm[sel]
    else:
        # degenerate plateau window: global scan over everything past the carrier
        flags.add("no_plateau")
        region = sm[omega > spectrum.omega_carrier_au]
    plateau = float(np.median(region))
    if float(np.median(np.abs(region - plateau))) > 1.5:
        flags.add("noisy")

    threshold = plateau - protocol.drop_decades
    persistence_bins = max(1, int(round(protocol.persistence_ho / spectrum.resolution_ho)))
    start = int(np.searchsorted(omega, 0.8 * classical_cutoff_hint_au))
    below = sm <= threshold
    h_au = None
    run = 0
    for i in range(start, len(below)):
        run = run + 1 if below[i] else 0
        if run == persistence_bins:
            h_au = float(omega[i - persistence_bins + 1])
            break
    if h_au is None:
        flags.add("no_drop")
        h_au = float(omega[-1])

    return CutoffExtraction(
        h_au=h_au,
        h_ev=h_au * units.HARTREE_EV,
        h_ho=h_au / spectrum.omega_carrier_au,
        plateau_level_log10=plateau,
        flags=frozenset(flags),
    )


def spectrum_to_csv(spectrum: Spectrum, path) -> None:
    """Two-column CSV: harmonic_order, log10_intensity."""
    ho = spectrum.harmonic_order
    logs = np.log10(np.maximum(spectrum.s, LOG_FLOOR))
    with open(path, "w", newline="") as fh:
        fh.write("harmonic_order,log10_intensity\n")
        for h, v in zip(ho, logs):
            fh.write(f"{float(h)!r},{float(v)!r}\n")
