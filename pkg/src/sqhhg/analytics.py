"""Closed-form layer: tunneling statistics, cutoff laws, two-channel variance.

Everything here works on scalars in atomic units and is independent of the
TDSE pipeline, so it doubles as the analytic oracle for the ensemble results:

* quasi-static tunneling rate  Gamma(E) ~ exp(-B/|E|), B = (2/3)(2 Ip)^{3/2}
* ensemble yield <Gamma> as a Gaussian convolution (Gauss-Hermite quadrature)
  and its cumulant approximation  <Gamma>/Gamma_coh = exp[eta (2 sx2 - 1)]
* classical cutoff Ip + 3.17 Up(E) and the rate-weighted ensemble cutoff,
  with the small-parameter shift  3.17 Up(E0) eps^2 (1 + 2B/E0),
  eps = sigma_X(r, theta) E_vac / E0
* classical three-step return-energy map with derivative diagnostics
* the two-channel variance model  dH^2(r) = C_X e^{-2r} + C_P e^{+2r}
  with its optimum r_opt = ln(C_X/C_P)/4
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import nnls

from .exceptions import ConvergenceError, InvalidParameterError, ValidityWarning
from .quadrature import covariance_of

CUTOFF_COEFFICIENT = 3.17
EPSILON_VALIDITY = 0.2  # asymptotic formulas hold for eps << 1


@dataclass(frozen=True)
class AdkParams:
    """Tunneling-exponent parameters; the prefactor is held constant."""

    ip_au: float
    b_au: float

    @classmethod
    def from_ip(cls, ip_au: float) -> "AdkParams":
        if not ip_au > 0:
            raise InvalidParameterError("Ip must be positive")
        return cls(ip_au=ip_au, b_au=(2.0 / 3.0) * (2.0 * ip_au) ** 1.5)


@dataclass(frozen=True)
class FieldMarginal:
    """Gaussian field-amplitude distribution at the pulse maximum."""

    mean_e0_au: float
    var_au: float  # = E_vac^2 * sigma_X^2(r, theta)

    def __post_init__(self):
        if self.var_au < 0 or self.mean_e0_au <= 0:
            raise InvalidParameterError("marginal needs mean > 0 and var >= 0")


@dataclass(frozen=True)
class CumulantCoeffs:
    """Dimensionless yield-expansion coefficient eta and the vacuum variance."""

    sigma_vac_sq: float  # E_vac^2 / 2, field^2
    eta: float           # sigma_vac_sq * (B^2 / 2 E0^4 - B / E0^3)

    @classmethod
    def from_params(cls, e_vac_au: float, e0_au: float, adk: AdkParams) -> "CumulantCoeffs":
        if not (e_vac_au > 0 and e0_au > 0):
            raise InvalidParameterError("fields must be positive")
        svac = 0.5 * e_vac_au**2
        b = adk.b_au
        return cls(sigma_vac_sq=svac, eta=svac * (b**2 / (2 * e0_au**4) - b / e0_au**3))


def adk_rate(e_abs: float, params: AdkParams) -> float:
    """Quasi-static tunneling rate exp(-B/|E|) with unit prefactor."""
    if not e_abs > 0:
        raise InvalidParameterError(f"field magnitude must be positive, got {e_abs}")
    return math.exp(-params.b_au / e_abs)


def epsilon_parameter(r: float, theta: float, e_vac_au: float, e0_au: float) -> float:
    """Largest-fluctuation parameter sigma_X(r, theta) E_vac / E0.

    Reduces to E_vac e^r / (sqrt(2) E0) for phase squeezing (theta = pi/2)
    and to E_vac / (sqrt(2) E0) for a coherent driver.
    """
    sx2 = covariance_of(r, theta).sxx
    return math.sqrt(sx2) * e_vac_au / e0_au


def _warn_if_outside_validity(eps: float, what: str) -> None:
    if eps > EPSILON_VALIDITY:
        warnings.warn(
            f"{what}: eps = {eps:.3f} exceeds the validity guard {EPSILON_VALIDITY}; "
            "value computed anyway",
            ValidityWarning,
            stacklevel=3,
        )


def _gauss_hermite_mean(f, mean: float, var: float, nodes: int) -> float:
    """< f(E) > over N(mean, var), integrand restricted to E > 0."""
    x, w = hermgauss(nodes)
    e = mean + math.sqrt(2.0 * var) * x
    keep = e > 0.0
    vals = np.zeros_like(e)
    vals[keep] = f(e[keep])
    return float((w * vals).sum() / math.sqrt(math.pi))


def _converged_quadrature(f, marginal: FieldMarginal, nodes: int):
    """Evaluate with node doubling; raise unless the change is < 1e-6."""
    a = _gauss_hermite_mean(f, marginal.mean_e0_au, marginal.var_au, nodes)
    b = _gauss_hermite_mean(f, marginal.mean_e0_au, marginal.var_au, 2 * nodes)
    if abs(b - a) > 1e-6 * max(abs(b), 1e-300):
        raise ConvergenceError(
            f"Gauss-Hermite not converged: {a} vs {b} at {nodes}/{2 * nodes} nodes"
        )
    return b


def yield_numeric(
    marginal: FieldMarginal,
    adk: AdkParams,
    vacuum_var_au: float,
    nodes: int = 64,
) -> float:
    """Ensemble yield from exact Gaussian quadrature, normalized to the
    coherent-state (vacuum variance) yield at the same mean field."""
    if vacuum_var_au < 0:
        raise InvalidParameterError("vacuum variance must be >= 0")
    rate = lambda e: np.exp(-adk.b_au / e)
    num = _converged_quadrature(rate, marginal, nodes)
    ref_marginal = FieldMarginal(marginal.mean_e0_au, vacuum_var_au)
    den = _converged_quadrature(rate, ref_marginal, nodes)
    return num / den


def yield_analytic(r: float, theta: float, coeffs: CumulantCoeffs) -> float:
    """Cumulant-expansion yield ratio exp[eta (2 sigma_X^2(r, theta) - 1)]."""
    sx2 = covariance_of(r, theta).sxx
    return math.exp(coeffs.eta * (2.0 * sx2 - 1.0))


def yield_analytic_guarded(
    r: float, theta: float, coeffs: CumulantCoeffs, e_vac_au: float, e0_au: float
) -> float:
    """Same as yield_analytic, warning when eps(r, theta) exceeds the guard."""
    _warn_if_outside_validity(epsilon_parameter(r, theta, e_vac_au, e0_au), "yield_analytic")
    return yield_analytic(r, theta, coeffs)


def classical_cutoff(e_abs: float, ip_au: float, omega_au: float) -> float:
    """Single-realization cutoff law Ip + 3.17 E^2/(4 omega^2), a.u."""
    if not (e_abs >= 0 and ip_au > 0 and omega_au > 0):
        raise InvalidParameterError("classical_cutoff needs positive Ip, omega and E >= 0")
    return ip_au + CUTOFF_COEFFICIENT * e_abs**2 / (4.0 * omega_au**2)


def rate_weighted_cutoff_numeric(
    marginal: FieldMarginal,
    adk: AdkParams,
    ip_au: float,
    omega_au: float,
    nodes: int = 64,
) -> float:
    """Ensemble cutoff Ip + 3.17 <Gamma Up>/<Gamma> by shared quadrature."""
    if marginal.var_au == 0.0:
        return classical_cutoff(marginal.mean_e0_au, ip_au, omega_au)
    rate = lambda e: np.exp(-adk.b_au / e)
    rate_up = lambda e: np.exp(-adk.b_au / e) * e**2 / (4.0 * omega_au**2)
    num = _converged_quadrature(rate_up, marginal, nodes)
    den = _converged_quadrature(rate, marginal, nodes)
    return ip_au + CUTOFF_COEFFICIENT * num / den


def cutoff_shift_analytic(
    r: float,
    theta: float,
    e0_au: float,
    omega_au: float,
    e_vac_au: float,
    adk: AdkParams,
) -> float:
    """Asymptotic ensemble cutoff Ip + 3.17 Up(E0) [1 + eps^2 (1 + 2B/E0)]."""
    eps = epsilon_parameter(r, theta, e_vac_au, e0_au)
    _warn_if_outside_validity(eps, "cutoff_shift_analytic")
    up0 = e0_au**2 / (4.0 * omega_au**2)
    return adk.ip_au + CUTOFF_COEFFICIENT * up0 * (
        1.0 + eps**2 * (1.0 + 2.0 * adk.b_au / e0_au)
    )


def variance_ratio_leading(r: float, theta: float) -> float:
    """Leading-order witness ratio sigma_X^2(r, theta) / (1/2)."""
    if r < 0:
        raise InvalidParameterError("r must be >= 0")
    return covariance_of(r, theta).sxx / 0.5


# ---------------------------------------------------------------------------
# classical three-step trajectories (monochromatic field E0 cos(omega t))
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryResult:
    """First-return data for one ionization phase (phases in radians)."""

    ionization_phase: float
    return_energy_over_up: float  # nan when the electron never returns
    dreturn_denergy: float        # d(return energy)/dE0 at fixed phase, a.u.
    dreturn_dtion: float          # d(return energy)/dt_ion, a.u.
    returned: bool


def _excursion(phi_r: np.ndarray, phi_i: np.ndarray) -> np.ndarray:
    """Scaled position (omega^2/E0) x(phi_r; phi_i); zero at a return."""
    return np.cos(phi_r) - np.cos(phi_i) + (phi_r - phi_i) * np.sin(phi_i)


def _first_return_phase(phi_i: np.ndarray, max_cycles: float = 1.25) -> np.ndarray:
    """First root of the excursion after each birth phase (nan if none)."""
    n = len(phi_i)
    out = np.full(n, np.nan)
    n_scan = 2048
    delta = np.linspace(0.0, max_cycles * 2.0 * math.pi, n_scan + 1)[1:]
    chunk = max(1, int(2e6 / n_scan))
    for lo in range(0, n, chunk):
        pi_c = phi_i[lo : lo + chunk, None]
        g = _excursion(pi_c + delta[None, :], pi_c)
        sign_change = (g[:, 1:] * g[:, :-1]) < 0.0
        has = sign_change.any(axis=1)
        first = np.argmax(sign_change, axis=1)
        a = pi_c[:, 0] + delta[first]
        b = pi_c[:, 0] + delta[first + 1]
        pi_row = phi_i[lo : lo + chunk]
        for _ in range(60):  # bisection to machine precision
            mid = 0.5 * (a + b)
            gm = _excursion(mid, pi_row)
            ga = _excursion(a, pi_row)
            left = (ga * gm) <= 0.0
            b = np.where(left, mid, b)
            a = np.where(left, a, mid)
        root = 0.5 * (a + b)
        out[lo : lo + chunk] = np.where(has, root, np.nan)
    return out


def three_step_trajectories(
    e0_au: float,
    omega_au: float,
    ip_au: float,
    phase_grid: np.ndarray,
) -> list[TrajectoryResult]:
    """Classical ionization->return map over a grid of birth phases.

    The electron starts at the origin at rest at phase phi_i and moves in
    E(t) = E0 cos(omega t); the scaled return energy 2 (sin(phi_r) -
    sin(phi_i))^2 depends only on phases, so dE_ret/dE0 = 2 E_ret / E0
    exactly, while d/dt_ion comes from centered differences on the grid.
    """
    if not (e0_au > 0 and omega_au > 0 and ip_au > 0):
        raise InvalidParameterError("three_step_trajectories needs positive inputs")
    phi = np.asarray(phase_grid, dtype=float)
    if phi.ndim != 1 or len(phi) < 3:
        raise InvalidParameterError("phase grid must be 1-D with >= 3 points")
    up = e0_au**2 / (4.0 * omega_au**2)
    phi_r = _first_return_phase(phi)
    ret = ~np.isnan(phi_r)
    e_over_up = np.where(ret, 2.0 * (np.sin(phi_r) - np.sin(phi)) ** 2, np.nan)

    e_ret = e_over_up * up
    dphi = np.gradient(phi)
    de_dphi = np.full_like(e_ret, np.nan)
    ok = ret.copy()
    # centered differences only where both neighbors returned
    inner = np.zeros_like(ok)
    inner[1:-1] = ok[1:-1] & ok[:-2] & ok[2:]
    idx = np.nonzero(inner)[0]
    de_dphi[idx] = (e_ret[idx + 1] - e_ret[idx - 1]) / (phi[idx + 1] - phi[idx - 1])

    results = []
    for i in range(len(phi)):
        results.append(
            TrajectoryResult(
                ionization_phase=float(phi[i]),
                return_energy_over_up=float(e_over_up[i]),
                dreturn_denergy=float(2.0 * e_ret[i] / e0_au) if ret[i] else math.nan,
                dreturn_dtion=float(de_dphi[i] * omega_au),
                returned=bool(ret[i]),
            )
        )
    return results


# ---------------------------------------------------------------------------
# two-channel variance model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoChannelModel:
    """Fitted dH^2(r) = c_x e^{-2r} + c_p e^{+2r} with quality flags."""

    c_x: float
    c_p: float
    r_opt: float          # nan when a coefficient hit the zero boundary
    residual_rms_rel: float
    poor_fit: bool
    boundary: bool


def two_channel_predict(r: float, model: TwoChannelModel) -> float:
    """Evaluate the two-channel variance at squeezing r."""
    if model.c_x < 0 or model.c_p < 0:
        raise InvalidParameterError("coefficients must be nonnegative")
    return model.c_x * math.exp(-2.0 * r) + model.c_p * math.exp(2.0 * r)


def two_channel_fit(r_values, variances) -> TwoChannelModel:
    """Nonnegative least-squares fit of the two-channel variance law."""
    r = np.asarray(r_values, dtype=float)
    v = np.asarray(variances, dtype=float)
    if r.shape != v.shape or r.ndim != 1:
        raise InvalidParameterError("r and variance tables must be equal-length 1-D")
    if len(np.unique(r)) < 4:
        raise InvalidParameterError("need >= 4 distinct r values to fit two channels")
    if np.any(v < 0):
        raise InvalidParameterError("variances must be nonnegative")
    design = np.column_stack([np.exp(-2.0 * r), np.exp(2.0 * r)])
    coef, _ = nnls(design, v)
    c_x, c_p = float(coef[0]), float(coef[1])
    resid = design @ coef - v
    scale = math.sqrt(float(np.mean(v**2)))
    residual = math.sqrt(float(np.mean(resid**2))) / scale if scale > 0 else math.inf
    # nnls pins degenerate coefficients at (or within rounding of) zero
    tiny = 1e-10 * (c_x + c_p)
    boundary = (c_x <= tiny) or (c_p <= tiny)
    r_opt = 0.25 * math.log(c_x / c_p) if not boundary else math.nan
    return TwoChannelModel(
        c_x=c_x,
        c_p=c_p,
        r_opt=r_opt,
        residual_rms_rel=residual,
        poor_fit=residual > 0.30,
        boundary=boundary,
    )
