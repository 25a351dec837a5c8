"""Shot ensembles: sample -> field -> TDSE -> spectrum -> cutoff, plus the
statistics that turn per-shot cutoffs into the variance witness.

Determinism contract: every shot is a pure function of (config, master_seed,
shot_index). Shots are propagated in fixed batches of consecutive indices
(BATCH_SIZE), whose numerical content does not depend on the worker count,
so outputs are identical for any parallelism including none. Distinct
ensembles inside a sweep get disjoint shot-index ranges via seed_offset so
the test and SQL-reference ensembles are statistically independent.

Failure policy: a pathological shot (propagation blow-up or extraction
flags) is recorded as flagged and excluded from statistics; it never aborts
the ensemble. Callers cap the flagged fraction (the CLI exits nonzero above
5%).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__ as _pkg_version
from . import quadrature
from .analytics import classical_cutoff
from .exceptions import (
    InsufficientDataError,
    InvalidParameterError,
    UndefinedRatioError,
)
from .fieldgen import (
    ModeVolumeSpec,
    PulseSpec,
    TimeGridSpec,
    default_time_grid,
    synthesize_field,
)
from .quadrature import QuadratureSample, SeedSpec, SqueezeParams
from .spectral import CutoffExtraction, CutoffProtocol, Spectrum, extract_cutoff, hhg_spectrum
from .tdse import AtomModel, GridSpec, Wavefunction, calibrate_softcore, ground_state, propagate_batch

BATCH_SIZE = 16
SCHEMA_VERSION = 1
DRIVER_KINDS = ("squeezed", "classical_benchmark", "coherent")


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines an ensemble (no execution knobs)."""

    squeeze: SqueezeParams = SqueezeParams()
    pulse: PulseSpec = PulseSpec()
    mode_volume: ModeVolumeSpec = ModeVolumeSpec()
    atom: AtomModel = AtomModel(softening_a=math.nan, ip_target_ev=15.76)
    grid: GridSpec = GridSpec()
    protocol: CutoffProtocol = CutoffProtocol()
    n_shot: int = 200
    master_seed: int = 20250808
    driver_kind: str = "squeezed"
    store_spectra: bool = False
    seed_offset: int = 0

    def __post_init__(self):
        if self.n_shot < 1:
            raise InvalidParameterError("n_shot must be >= 1")
        if self.driver_kind not in DRIVER_KINDS:
            raise InvalidParameterError(
                f"driver_kind must be one of {DRIVER_KINDS}, got {self.driver_kind!r}"
            )

    def e_vac_au(self) -> float:
        return self.mode_volume.e_vac_au(self.pulse)

    def time_grid(self) -> TimeGridSpec:
        return default_time_grid(self.pulse, self.grid.dt)

    def effective_squeeze(self) -> SqueezeParams:
        """alpha_mag = 0 in the config means 'match the mean field':
        the displacement becomes X_c = E0/E_vac so the ensemble-mean peak
        field equals the configured E0."""
        if self.squeeze.alpha_mag != 0.0:
            return self.squeeze
        return replace(self.squeeze, alpha_mag=self.pulse.e0_au / self.e_vac_au())

    def cutoff_hint_au(self) -> float:
        return classical_cutoff(
            self.pulse.e0_au, self.atom.ip_achieved_au, self.pulse.omega_au
        )


@dataclass(frozen=True)
class ShotRecord:
    """One shot's sample, cutoff and diagnostics."""

    shot_index: int
    x: float
    p: float
    cutoff: CutoffExtraction | None
    norm_loss: float
    spectrum: Spectrum | None = None

    @property
    def flags(self) -> frozenset[str]:
        if self.cutoff is None:
            return frozenset({"propagation_failed"})
        return self.cutoff.flags

    @property
    def valid(self) -> bool:
        return self.cutoff is not None and self.cutoff.valid

    @property
    def h_ev(self) -> float:
        return self.cutoff.h_ev if self.cutoff is not None else math.nan


@dataclass(frozen=True)
class EnsembleStats:
    """Mean/variance of the cutoff (eV) with bootstrap 95% intervals."""

    mean_h: float
    var_h: float
    ci95_var: tuple[float, float]
    ci95_mean: tuple[float, float]
    n_valid: int
    n_flagged: int


def resolve_atom(atom: AtomModel) -> AtomModel:
    """Calibrate the soft-core parameter when not supplied."""
    if math.isnan(atom.softening_a) or math.isnan(atom.ip_achieved_au):
        return calibrate_softcore(atom.ip_target_ev)
    return atom


def draw_samples(config: RunConfig, indices: list[int]) -> list[QuadratureSample]:
    """Per-shot quadrature samples for any contiguous or scattered index set."""
    sq = config.effective_squeeze()
    mean = sq.mean_quadratures()
    out = []
    for i in indices:
        seed = SeedSpec(config.master_seed, config.seed_offset + i)
        if config.driver_kind == "squeezed":
            s = quadrature.sample_wigner(sq, mean, 1, seed)[0]
        elif config.driver_kind == "classical_benchmark":
            s = quadrature.sample_classical_benchmark(sq.r, sq.theta, mean, 1, seed)[0]
        else:
            s = quadrature.sample_coherent(mean, 1, seed)[0]
        out.append(QuadratureSample(x=s.x, p=s.p, shot_index=i))
    return out


def _process_batch(
    config: RunConfig, ground: Wavefunction, indices: list[int]
) -> list[ShotRecord]:
    samples = draw_samples(config, indices)
    e_vac = config.e_vac_au()
    tgrid = config.time_grid()
    fields = [synthesize_field(s, config.pulse, e_vac, tgrid) for s in samples]
    traces, ok = propagate_batch(ground, fields, config.atom, config.grid)
    hint = config.cutoff_hint_au()
    records = []
    for sample, trace, good in zip(samples, traces, ok):
        if not good:
            records.append(
                ShotRecord(sample.shot_index, sample.x, sample.p, None, math.nan)
            )
            continue
        spec = hhg_spectrum(trace, config.pulse.omega_au)
        cut = extract_cutoff(spec, config.protocol, hint)
        records.append(
            ShotRecord(
                shot_index=sample.shot_index,
                x=sample.x,
                p=sample.p,
                cutoff=cut,
                norm_loss=trace.norm_loss,
                spectrum=spec if config.store_spectra else None,
            )
        )
    return records


def _batch_worker(args) -> list[ShotRecord]:
    config, ground_values, indices = args
    ground = Wavefunction(values=ground_values, grid=config.grid)
    return _process_batch(config, ground, indices)


def run_ensemble(
    config: RunConfig,
    workers: int = 1,
    ground: Wavefunction | None = None,
) -> list[ShotRecord]:
    """Execute all shots; returns records ordered by shot_index."""
    config = replace(config, atom=resolve_atom(config.atom))
    if ground is None:
        ground = ground_state(config.atom, config.grid)
    batches = [
        list(range(lo, min(lo + BATCH_SIZE, config.n_shot)))
        for lo in range(0, config.n_shot, BATCH_SIZE)
    ]
    if workers <= 1 or len(batches) == 1:
        chunks = [_process_batch(config, ground, idx) for idx in batches]
    else:
        payloads = [(config, ground.values, idx) for idx in batches]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_batch_worker, payloads))
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: r.shot_index)
    return records


def _bootstrap_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, 0xB005]))


def cutoff_statistics(
    records: list[ShotRecord],
    n_boot: int = 2000,
    seed: int = 0,
    require_variance: bool = True,
) -> EnsembleStats:
    """Sample mean and unbiased variance of valid cutoffs, bootstrap CIs."""
    h = np.array([r.h_ev for r in records if r.valid])
    n_valid = len(h)
    n_flagged = len(records) - n_valid
    if n_valid < 1:
        raise InsufficientDataError("no valid shots")
    mean = float(h.mean())
    if n_valid < 10:
        if require_variance:
            raise InsufficientDataError(
                f"variance needs >= 10 valid shots, got {n_valid}"
            )
        nan_pair = (math.nan, math.nan)
        return EnsembleStats(mean, math.nan, nan_pair, nan_pair, n_valid, n_flagged)
    var = float(h.var(ddof=1))
    rng = _bootstrap_rng(seed)
    idx = rng.integers(0, n_valid, size=(n_boot, n_valid))
    res = h[idx]
    boot_var = res.var(axis=1, ddof=1)
    boot_mean = res.mean(axis=1)
    ci_var = tuple(float(q) for q in np.percentile(boot_var, [2.5, 97.5]))
    ci_mean = tuple(float(q) for q in np.percentile(boot_mean, [2.5, 97.5]))
    return EnsembleStats(mean, var, ci_var, ci_mean, n_valid, n_flagged)


@dataclass(frozen=True)
class WitnessResult:
    ratio: float
    ci95: tuple[float, float]


def witness_ratio(
    records_test: list[ShotRecord],
    records_sql: list[ShotRecord],
    n_boot: int = 2000,
    seed: int = 0,
) -> WitnessResult:
    """Variance ratio test/SQL with a paired-bootstrap percentile CI.

    Each bootstrap replicate independently resamples both ensembles (they
    are statistically independent) and takes the ratio of the resampled
    unbiased variances.
    """
    ht = np.array([r.h_ev for r in records_test if r.valid])
    hs = np.array([r.h_ev for r in records_sql if r.valid])
    if len(ht) < 10 or len(hs) < 10:
        raise InsufficientDataError("need >= 10 valid shots on both sides")
    sql_stats = cutoff_statistics(records_sql, n_boot=n_boot, seed=seed)
    if sql_stats.ci95_var[0] <= 0.0:
        raise UndefinedRatioError("SQL variance CI includes zero")
    rng = _bootstrap_rng(seed + 1)
    vt = ht[rng.integers(0, len(ht), size=(n_boot, len(ht)))].var(axis=1, ddof=1)
    vs = hs[rng.integers(0, len(hs), size=(n_boot, len(hs)))].var(axis=1, ddof=1)
    # a zero-variance replicate (possible for tiny, quantized samples) maps
    # to an infinite ratio and lands at the top percentile; 0/0 is dropped
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = vt / vs
    ci = tuple(float(q) for q in np.nanpercentile(ratios, [2.5, 97.5]))
    return WitnessResult(
        ratio=float(ht.var(ddof=1) / hs.var(ddof=1)), ci95=ci
    )


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    stats: EnsembleStats
    witness: WitnessResult | None


@dataclass(frozen=True)
class SweepResult:
    axis: str
    rows: list[SweepRow]
    sql_stats: EnsembleStats | None


# disjoint shot-index ranges for the ensembles inside one sweep
SEED_STRIDE = 1_000_000


def sweep(
    config: RunConfig,
    axis: str,
    values,
    workers: int = 1,
    sql_records: list[ShotRecord] | None = None,
    n_boot: int = 2000,
) -> SweepResult:
    """One ensemble per axis value plus witness ratios vs a SQL reference."""
    if axis not in ("r", "theta"):
        raise InvalidParameterError("axis must be 'r' or 'theta'")
    values = list(values)
    if not values:
        return SweepResult(axis=axis, rows=[], sql_stats=None)
    config = replace(config, atom=resolve_atom(config.atom))
    ground = ground_state(config.atom, config.grid)
    if sql_records is None:
        sql_cfg = replace(config, driver_kind="coherent", seed_offset=0)
        sql_records = run_ensemble(sql_cfg, workers=workers, ground=ground)
    sql_stats = cutoff_statistics(sql_records, seed=config.master_seed)
    rows = []
    for k, val in enumerate(values):
        sq = replace(config.squeeze, **{axis: float(val)})
        cfg = replace(config, squeeze=sq, seed_offset=(k + 1) * SEED_STRIDE)
        records = run_ensemble(cfg, workers=workers, ground=ground)
        stats = cutoff_statistics(records, seed=config.master_seed)
        wit = witness_ratio(records, sql_records, n_boot=n_boot, seed=config.master_seed)
        rows.append(SweepRow(axis_value=float(val), stats=stats, witness=wit))
    return SweepResult(axis=axis, rows=rows, sql_stats=sql_stats)


def two_channel_table(result: SweepResult):
    """Fit the two-channel variance law to an r-sweep's (r, var_h) table."""
    if result.axis != "r":
        raise InvalidParameterError("two-channel fit needs an r-axis sweep")
    r = [row.axis_value for row in result.rows]
    v = [row.stats.var_h for row in result.rows]
    from .analytics import two_channel_fit

    return two_channel_fit(r, v)


def averaged_spectrum(records: list[ShotRecord]) -> Spectrum:
    """Arithmetic mean of stored spectra over valid shots."""
    specs = [r.spectrum for r in records if r.valid and r.spectrum is not None]
    if not specs:
        raise InvalidParameterError("no stored spectra among valid shots")
    ref = specs[0]
    for s in specs[1:]:
        if s.omega_au.shape != ref.omega_au.shape or not np.array_equal(
            s.omega_au, ref.omega_au
        ):
            raise InvalidParameterError("spectra are not on a common frequency grid")
    mean_s = np.mean([s.s for s in specs], axis=0)
    return Spectrum(omega_au=ref.omega_au, s=mean_s, omega_carrier_au=ref.omega_carrier_au)


# ---------------------------------------------------------------------------
# persistence (CSV rows, stats/manifest JSON) — byte-deterministic formatting
# ---------------------------------------------------------------------------

def write_shots_csv(records: list[ShotRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("shot_index,x,p,h_ev,h_ho,plateau_log10,flags,norm_loss\n")
        for r in records:
            if r.cutoff is not None:
                h_ev, h_ho, plat = r.cutoff.h_ev, r.cutoff.h_ho, r.cutoff.plateau_level_log10
            else:
                h_ev = h_ho = plat = math.nan
            flags = "|".join(sorted(r.flags))
            fh.write(
                f"{r.shot_index},{float(r.x)!r},{float(r.p)!r},{float(h_ev)!r},"
                f"{float(h_ho)!r},{float(plat)!r},{flags},{float(r.norm_loss)!r}\n"
            )


def stats_to_dict(stats: EnsembleStats) -> dict:
    return {
        "mean_h_ev": stats.mean_h,
        "var_h_ev2": stats.var_h,
        "ci95_var_ev2": list(stats.ci95_var),
        "ci95_mean_ev": list(stats.ci95_mean),
        "n_valid": stats.n_valid,
        "n_flagged": stats.n_flagged,
    }


def _json_sanitize(obj):
    if isinstance(obj, dict):
        return {k: _json_sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_sanitize(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def config_to_dict(config: RunConfig) -> dict:
    d = asdict(config)
    d["squeeze"]["alpha_mag_effective"] = config.effective_squeeze().alpha_mag
    d["derived"] = {
        "omega_au": config.pulse.omega_au,
        "e0_au": config.pulse.e0_au,
        "e_vac_au": config.e_vac_au(),
        "up_au": config.pulse.up_au,
        "cutoff_hint_au": config.cutoff_hint_au()
        if not math.isnan(config.atom.ip_achieved_au)
        else None,
    }
    return _json_sanitize(d)


def write_manifest(config: RunConfig, path, workers: int, timings: dict | None = None) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "code_version": _pkg_version,
        "master_seed": config.master_seed,
        "config": config_to_dict(config),
        "workers": workers,
        "timings_s": timings or {},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
