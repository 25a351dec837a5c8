"""Batch front-end: `sqhhg {calibrate,run,sweep,analytics}`.

Configuration is one JSON file; any leaf can be overridden on the command
line with repeatable `--set dotted.key=value` flags (values parsed as JSON,
falling back to strings). Exit codes: 0 ok, 2 config error, 3 quality-gate
failure (flagged-shot fraction above 5%), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__, analytics, units
from .analytics import AdkParams, CumulantCoeffs, FieldMarginal
from .ensemble import (
    RunConfig,
    averaged_spectrum,
    config_to_dict,
    cutoff_statistics,
    resolve_atom,
    run_ensemble,
    stats_to_dict,
    sweep,
    two_channel_table,
    write_manifest,
    write_shots_csv,
)
from .exceptions import InvalidParameterError, SqhhgError
from .fieldgen import ModeVolumeSpec, PulseSpec, mean_field
from .quadrature import SqueezeParams, covariance_of
from .spectral import CutoffProtocol, extract_cutoff, hhg_spectrum, spectrum_to_csv
from .tdse import AtomModel, GridSpec, calibrate_softcore, ground_state, propagate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_QUALITY = 3
EXIT_NUMERIC = 4

MAX_FLAGGED_FRACTION = 0.05

DEFAULT_CONFIG = {
    "squeeze": {"r": 0.0, "theta": 0.0, "alpha_mag": 0.0, "phi": 0.0},
    "pulse": {"wavelength_nm": 1500.0, "peak_intensity_w_cm2": 1e14, "n_cycles": 2.0},
    "mode_volume": {"mode": "ratio", "value": 1e-2},
    "atom": {"ip_target_ev": 15.76, "softening_a": None},
    "grid": {
        "x_min": -409.6,
        "x_max": 409.6,
        "nx": 4096,
        "dt": 0.02,
        "absorber_width": 50.0,
        "absorber_kind": "cos8",
    },
    "protocol": {
        "drop_decades": 3.0,
        "smooth_width_ho": 1.0,
        "plateau_window": [0.3, 0.8],
        "persistence_ho": 2.0,
    },
    "run": {
        "n_shot": 200,
        "master_seed": 20250808,
        "driver_kind": "squeezed",
        "store_spectra": False,
        "seed_offset": 0,
    },
    "sweep": {"axis": "r", "values": [0.0, 0.5, 1.0, 1.5]},
    "analytics": {"r_values": [round(0.25 * i, 2) for i in range(13)]},
    "calibrate": {"ladder": True},
}


class ConfigError(Exception):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {here!r} must be a table")
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = val
    return out


def _apply_set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set needs key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.strip().split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config key: {key!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key: {key!r}")
    node[parts[-1]] = value


def load_config(path: str | None, sets: list[str], seed: int | None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _merge(cfg, user)
    for assignment in sets:
        _apply_set(cfg, assignment)
    if seed is not None:
        cfg["run"]["master_seed"] = seed
    return cfg


def build_run_config(cfg: dict) -> RunConfig:
    a = cfg["atom"]["softening_a"]
    atom = AtomModel(
        softening_a=math.nan if a is None else float(a),
        ip_target_ev=float(cfg["atom"]["ip_target_ev"]),
    )
    try:
        return RunConfig(
            squeeze=SqueezeParams(**cfg["squeeze"]),
            pulse=PulseSpec(**cfg["pulse"]),
            mode_volume=ModeVolumeSpec(**cfg["mode_volume"]),
            atom=atom,
            grid=GridSpec(**cfg["grid"]),
            protocol=CutoffProtocol(
                drop_decades=cfg["protocol"]["drop_decades"],
                smooth_width_ho=cfg["protocol"]["smooth_width_ho"],
                plateau_window=tuple(cfg["protocol"]["plateau_window"]),
                persistence_ho=cfg["protocol"]["persistence_ho"],
            ),
            n_shot=int(cfg["run"]["n_shot"]),
            master_seed=int(cfg["run"]["master_seed"]),
            driver_kind=cfg["run"]["driver_kind"],
            store_spectra=bool(cfg["run"]["store_spectra"]),
            seed_offset=int(cfg["run"]["seed_offset"]),
        )
    except (TypeError, InvalidParameterError) as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config, args.set or [], args.seed)
    config = build_run_config(cfg)
    out = _out_dir(args)
    t0 = time.perf_counter()
    atom = resolve_atom(config.atom)
    report = {
        "softening_a": atom.softening_a,
        "ip_target_ev": atom.ip_target_ev,
        "ip_achieved_ev": atom.ip_achieved_au * units.HARTREE_EV,
        "ip_achieved_au": atom.ip_achieved_au,
    }
    with open(out / "calibration.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    config = replace(config, atom=atom)
    if cfg["calibrate"]["ladder"]:
        _write_convergence_ladder(config, out)
    write_manifest(
        config, out / "manifest.json", workers=args.workers,
        timings={"total": time.perf_counter() - t0},
    )
    print(f"calibrated a = {atom.softening_a:.6f}, "
          f"Ip = {report['ip_achieved_ev']:.4f} eV -> {out}")
    return EXIT_OK


def _coherent_reference_cutoff(config: RunConfig) -> tuple[float, float]:
    """Extracted cutoff (H.O., eV) of the deterministic mean-field run."""
    ground = ground_state(config.atom, config.grid)
    field = mean_field(config.pulse, config.e_vac_au(), config.time_grid())
    trace = propagate(ground, field, config.atom, config.grid)
    spec = hhg_spectrum(trace, config.pulse.omega_au)
    cut = extract_cutoff(spec, config.protocol, config.cutoff_hint_au())
    return cut.h_ho, cut.h_ev


def _write_convergence_ladder(config: RunConfig, out: Path) -> None:
    grid = config.grid
    variants = [
        ("base", grid),
        ("half_dt", replace(grid, dt=grid.dt / 2)),
        ("half_dx", replace(grid, nx=grid.nx * 2)),
        ("double_box", replace(grid, x_min=2 * grid.x_min, x_max=2 * grid.x_max,
                               nx=2 * grid.nx,
                               absorber_width=2 * grid.absorber_width)),
    ]
    with open(out / "convergence.csv", "w", newline="") as fh:
        fh.write("variant,dt,dx,half_box,cutoff_ho,cutoff_ev\n")
        for name, g in variants:
            cfg = replace(config, grid=g)
            ho, ev = _coherent_reference_cutoff(cfg)
            fh.write(f"{name},{_fmt(g.dt)},{_fmt(g.dx)},{_fmt(g.half_box)},"
                     f"{_fmt(ho)},{_fmt(ev)}\n")


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set or [], args.seed)
    config = build_run_config(cfg)
    out = _out_dir(args)
    t0 = time.perf_counter()
    config = replace(config, atom=resolve_atom(config.atom))
    records = run_ensemble(config, workers=args.workers)
    n_valid = sum(1 for r in records if r.valid)
    n_flagged = config.n_shot - n_valid
    write_shots_csv(records, out / "shots.csv")
    if n_valid >= 1:
        stats = cutoff_statistics(records, seed=config.master_seed,
                                  require_variance=False)
        with open(out / "stats.json", "w") as fh:
            doc = stats_to_dict(stats)
            doc["mean_h_ho"] = stats.mean_h / (config.pulse.omega_au * units.HARTREE_EV)
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"{config.n_shot} shots ({n_flagged} flagged), "
              f"<H> = {stats.mean_h:.3f} eV, varH = {stats.var_h:.4f} eV^2 -> {out}")
    else:
        print(f"{config.n_shot} shots, all flagged -> {out}")
    if config.store_spectra and n_valid >= 1:
        spectrum_to_csv(averaged_spectrum(records), out / "mean_spectrum.csv")
    write_manifest(config, out / "manifest.json", workers=args.workers,
                   timings={"total": time.perf_counter() - t0})
    frac = n_flagged / config.n_shot
    if frac > MAX_FLAGGED_FRACTION:
        print(f"quality gate: flagged fraction {frac:.1%} > {MAX_FLAGGED_FRACTION:.0%}",
              file=sys.stderr)
        return EXIT_QUALITY
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.set or [], args.seed)
    config = build_run_config(cfg)
    axis = cfg["sweep"]["axis"]
    values = cfg["sweep"]["values"]
    out = _out_dir(args)
    t0 = time.perf_counter()
    config = replace(config, atom=resolve_atom(config.atom))
    result = sweep(config, axis, values, workers=args.workers)
    omega_ev = config.pulse.omega_au * units.HARTREE_EV
    with open(out / "sweep.csv", "w", newline="") as fh:
        fh.write("axis_value,mean_h_ev,mean_h_ho,var_h_ev2,ci_var_lo_ev2,"
                 "ci_var_hi_ev2,witness_ratio,ratio_ci_lo,ratio_ci_hi\n")
        for row in result.rows:
            s, w = row.stats, row.witness
            fh.write(
                f"{_fmt(row.axis_value)},{_fmt(s.mean_h)},{_fmt(s.mean_h / omega_ev)},"
                f"{_fmt(s.var_h)},{_fmt(s.ci95_var[0])},{_fmt(s.ci95_var[1])},"
                f"{_fmt(w.ratio)},{_fmt(w.ci95[0])},{_fmt(w.ci95[1])}\n"
            )
    if result.sql_stats is not None:
        with open(out / "sql_reference.json", "w") as fh:
            json.dump(stats_to_dict(result.sql_stats), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if axis == "r" and len(set(values)) >= 4:
        model = two_channel_table(result)
        with open(out / "twochannel.json", "w") as fh:
            json.dump(
                {
                    "c_x_ev2": model.c_x,
                    "c_p_ev2": model.c_p,
                    "r_opt": model.r_opt,
                    "residual_rms_rel": model.residual_rms_rel,
                    "poor_fit": model.poor_fit,
                    "boundary": model.boundary,
                },
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")
    write_manifest(config, out / "manifest.json", workers=args.workers,
                   timings={"total": time.perf_counter() - t0})
    print(f"sweep over {axis} = {values} -> {out}")
    return EXIT_OK


def cmd_analytics(args) -> int:
    cfg = load_config(args.config, args.set or [], args.seed)
    config = build_run_config(cfg)
    out = _out_dir(args)
    r_values = [float(r) for r in cfg["analytics"]["r_values"]]
    pulse = config.pulse
    e0, omega = pulse.e0_au, pulse.omega_au
    e_vac = config.e_vac_au()
    ip_au = config.atom.ip_target_ev / units.HARTREE_EV
    adk = AdkParams.from_ip(ip_au)
    coeffs = CumulantCoeffs.from_params(e_vac, e0, adk)
    vac_var = 0.5 * e_vac**2
    with open(out / "yield_vs_r.csv", "w", newline="") as fh:
        fh.write("r,yield_numeric_as,yield_analytic_as,yield_numeric_ps,yield_analytic_ps\n")
        for r in r_values:
            row = [r]
            for theta in (0.0, math.pi / 2):
                marg = FieldMarginal(e0, e_vac**2 * covariance_of(r, theta).sxx)
                row.append(analytics.yield_numeric(marg, adk, vac_var))
                row.append(analytics.yield_analytic(r, theta, coeffs))
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    with open(out / "cutoff_vs_r.csv", "w", newline="") as fh:
        fh.write("r,classical_au,classical_ev,analytic_as_au,analytic_as_ev,"
                 "numeric_as_au,numeric_as_ev,analytic_ps_au,analytic_ps_ev,"
                 "numeric_ps_au,numeric_ps_ev\n")
        base = analytics.classical_cutoff(e0, ip_au, omega)
        for r in r_values:
            row = [r, base, base * units.HARTREE_EV]
            for theta in (0.0, math.pi / 2):
                ana = analytics.cutoff_shift_analytic(r, theta, e0, omega, e_vac, adk)
                marg = FieldMarginal(e0, e_vac**2 * covariance_of(r, theta).sxx)
                num = analytics.rate_weighted_cutoff_numeric(marg, adk, ip_au, omega)
                row += [ana, ana * units.HARTREE_EV, num, num * units.HARTREE_EV]
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    write_manifest(config, out / "manifest.json", workers=args.workers, timings={})
    print(f"analytics tables ({len(r_values)} r values) -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqhhg",
        description="Squeezed-light HHG ensemble simulator",
    )
    parser.add_argument("--version", action="version", version=f"sqhhg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("calibrate", cmd_calibrate),
        ("run", cmd_run),
        ("sweep", cmd_sweep),
        ("analytics", cmd_analytics),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=1, help="parallel workers")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="dotted-key config override (repeatable)")
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SqhhgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
