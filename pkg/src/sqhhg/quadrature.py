"""Squeezed-state quadrature covariances and stochastic (X, P) sampling.

Dimensionless quadratures with vacuum variance 1/2. A squeezed state of
magnitude r and angle theta has the rotated covariance

    sxx = (cos^2(theta) e^{-2r} + sin^2(theta) e^{+2r}) / 2
    spp = (sin^2(theta) e^{-2r} + cos^2(theta) e^{+2r}) / 2
    sxp = sin(theta) cos(theta) (e^{+2r} - e^{-2r}) / 2

which saturates the Robertson-Schroedinger bound: det(Sigma) = 1/4 exactly.
theta = 0 suppresses the in-phase (X) quadrature (amplitude squeezing),
theta = pi/2 suppresses P (phase squeezing).

Sampling is exact: the Wigner function of these states is a positive
Gaussian, drawn here through its 2x2 Cholesky factor applied to a pair of
standard normals. Reproducibility contract: one Philox stream is keyed by
the master seed and each shot owns one 256-bit counter block
(counter = shot_index), from which its normals are produced by a fixed
Box-Muller transform. A sample is therefore bit-identical whether drawn
alone, in bulk, or in any parallel execution order, and distinct shot
indices are independent by the counter-based construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError, InvalidParameterError

VACUUM_VARIANCE = 0.5


@dataclass(frozen=True)
class SqueezeParams:
    """Driver-state parameters: squeezing (r, theta) and displacement."""

    r: float = 0.0
    theta: float = 0.0
    alpha_mag: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r >= 0.0):
            raise InvalidParameterError(f"squeezing magnitude must be finite and >= 0, got {self.r}")
        for name in ("theta", "alpha_mag", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")
        # covariance is pi-periodic in theta; store the representative in [0, pi)
        object.__setattr__(self, "theta", self.theta % math.pi)

    def mean_quadratures(self) -> tuple[float, float]:
        """Displacement (X_c, P_c) = |alpha| (cos phi, sin phi)."""
        return (self.alpha_mag * math.cos(self.phi), self.alpha_mag * math.sin(self.phi))


@dataclass(frozen=True)
class QuadratureCovariance:
    """Symmetric 2x2 covariance of the (X, P) Wigner Gaussian."""

    sxx: float
    spp: float
    sxp: float

    def det(self) -> float:
        # sxx*spp and sxp^2 cancel almost exactly for strong squeezing
        # (both ~ e^{4r}/16 at 45 degrees); extended precision keeps the
        # result meaningful at the 1e-12 level up to r ~ 3
        prod = np.longdouble(self.sxx) * np.longdouble(self.spp)
        return float(prod - np.longdouble(self.sxp) * np.longdouble(self.sxp))

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.sxx, self.sxp], [self.sxp, self.spp]])

    def rotated_variance(self, theta_prime: float) -> float:
        """Variance of the rotated marginal X' = X cos(t') + P sin(t')."""
        c, s = math.cos(theta_prime), math.sin(theta_prime)
        return c * c * self.sxx + s * s * self.spp + 2.0 * c * s * self.sxp


@dataclass(frozen=True)
class QuadratureSample:
    """One sampled quadrature pair, tagged by its substream index."""

    x: float
    p: float
    shot_index: int


@dataclass(frozen=True)
class SeedSpec:
    """Counter-based substream address: (master_seed, shot_index)."""

    master_seed: int
    shot_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise InvalidParameterError("master_seed must fit in 64 bits")
        if self.shot_index < 0:
            raise InvalidParameterError("shot_index must be >= 0")

    def child(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.shot_index + offset)


def standard_normal_pairs(seed: SeedSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n independent standard-normal pairs, one per Philox counter block.

    Block i (counter = shot_index + i) yields two uniforms from its first
    two 64-bit words, mapped through Box-Muller. Drawing blocks one at a
    time or as one contiguous raw stream gives bit-identical results.
    """
    bg = np.random.Philox(key=[seed.master_seed, 0],
                          counter=[seed.shot_index, 0, 0, 0])
    raw = bg.random_raw(4 * n).reshape(n, 4)
    u1 = (raw[:, 0] >> np.uint64(11)) * 2.0**-53
    u2 = (raw[:, 1] >> np.uint64(11)) * 2.0**-53
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * math.pi * u2
    return radius * np.cos(angle), radius * np.sin(angle)


def covariance_of(r: float, theta: float) -> QuadratureCovariance:
    """Rotated squeezed-state covariance for magnitude r and angle theta."""
    if not (math.isfinite(r) and r >= 0.0) or not math.isfinite(theta):
        raise InvalidParameterError(f"invalid squeezing parameters r={r}, theta={theta}")
    em, ep = math.exp(-2.0 * r), math.exp(2.0 * r)
    c, s = math.cos(theta), math.sin(theta)
    # inputs within one ulp of a principal axis are the principal axis:
    # the cross-covariance there is exactly zero, not O(eps) * e^{2r}
    if abs(c) < 1e-15:
        c = 0.0
    if abs(s) < 1e-15:
        s = 0.0
    return QuadratureCovariance(
        sxx=0.5 * (c * c * em + s * s * ep),
        spp=0.5 * (s * s * em + c * c * ep),
        sxp=0.5 * s * c * (ep - em),
    )


def covariance_det_residual(r: float, theta: float) -> float:
    """|det(Sigma) - 1/4| with the covariance evaluated in long double.

    The minimum-uncertainty identity det = 1/4 is exact, but its float64
    evaluation is ill-conditioned (products ~ e^{4r} cancel to 0.25, losing
    ~ e^{4r} * eps absolutely, i.e. ~ 4e-12 already at r = 3). Identity
    checks at the 1e-12 level therefore evaluate the same formulas in
    extended precision.
    """
    rl = np.longdouble(r)
    em, ep = np.exp(-2 * rl), np.exp(2 * rl)
    c, s = np.cos(np.longdouble(theta)), np.sin(np.longdouble(theta))
    sxx = 0.5 * (c * c * em + s * s * ep)
    spp = 0.5 * (s * s * em + c * c * ep)
    sxp = 0.5 * s * c * (ep - em)
    return float(abs(sxx * spp - sxp * sxp - np.longdouble(0.25)))


def benchmark_covariance(r: float, theta: float) -> QuadratureCovariance:
    """Most permissive classical (P >= 0) covariance matched to sigma_X^2.

    Matches the squeezed amplitude variance where it is classical and clips
    at the vacuum value otherwise (every marginal of a P >= 0 field is
    bounded below by 1/2); the conjugate variance saturates the SQL and the
    cross term is zero.
    """
    cov = covariance_of(r, theta)
    return QuadratureCovariance(
        sxx=max(cov.sxx, VACUUM_VARIANCE), spp=VACUUM_VARIANCE, sxp=0.0
    )


def _cholesky_2x2(cov: QuadratureCovariance) -> tuple[float, float, float]:
    """Lower Cholesky factor [[l11, 0], [l21, l22]] of the 2x2 covariance."""
    if cov.sxx <= 0.0 or cov.spp <= 0.0:
        raise InvalidParameterError("covariance diagonal must be positive")
    l11 = math.sqrt(cov.sxx)
    l21 = cov.sxp / l11
    rem = cov.spp - l21 * l21
    if rem < 0.0:
        if rem < -1e-12 * cov.spp:
            raise InvalidParameterError("covariance is not positive semidefinite")
        rem = 0.0
    return l11, l21, math.sqrt(rem)


def _sample_gaussian(
    cov: QuadratureCovariance,
    mean: tuple[float, float],
    n: int,
    seed: SeedSpec,
) -> list[QuadratureSample]:
    if n < 1:
        raise InvalidParameterError(f"sample count must be >= 1, got {n}")
    l11, l21, l22 = _cholesky_2x2(cov)
    xc, pc = mean
    z1, z2 = standard_normal_pairs(seed, n)
    x = xc + l11 * z1
    p = pc + l21 * z1 + l22 * z2
    return [
        QuadratureSample(x=float(x[i]), p=float(p[i]), shot_index=seed.shot_index + i)
        for i in range(n)
    ]


def sample_wigner(
    params: SqueezeParams,
    mean: tuple[float, float],
    n: int,
    seed: SeedSpec,
) -> list[QuadratureSample]:
    """Draw n quadrature pairs from the squeezed-state Wigner Gaussian."""
    return _sample_gaussian(covariance_of(params.r, params.theta), mean, n, seed)


def sample_classical_benchmark(
    r: float,
    theta: float,
    mean: tuple[float, float],
    n: int,
    seed: SeedSpec,
) -> list[QuadratureSample]:
    """Draw n pairs from the SQL-bounded classical benchmark distribution."""
    return _sample_gaussian(benchmark_covariance(r, theta), mean, n, seed)


def sample_coherent(
    mean: tuple[float, float], n: int, seed: SeedSpec
) -> list[QuadratureSample]:
    """Coherent-state (vacuum covariance) sampling: the SQL reference."""
    return _sample_gaussian(
        QuadratureCovariance(VACUUM_VARIANCE, VACUUM_VARIANCE, 0.0), mean, n, seed
    )


def estimate_covariance(samples: list[QuadratureSample]) -> QuadratureCovariance:
    """Unbiased (n-1 divisor) sample covariance of a list of samples."""
    n = len(samples)
    if n < 2:
        raise InsufficientDataError(f"need >= 2 samples to estimate covariance, got {n}")
    x = np.array([s.x for s in samples])
    p = np.array([s.p for s in samples])
    dx, dp = x - x.mean(), p - p.mean()
    return QuadratureCovariance(
        sxx=float(dx @ dx) / (n - 1),
        spp=float(dp @ dp) / (n - 1),
        sxp=float(dx @ dp) / (n - 1),
    )
