"""Benchmark: compiled split-step kernels vs the pure-numpy fallback.

Runs the same short propagation workload through both backends (the numpy
path is forced in a subprocess via SQHHG_FORCE_NUMPY=1), reports per-step
and per-shot timings, and cross-checks that the two backends agree.

Usage: python benchmarks/bench_backends.py [--nx 4096] [--steps 4000] [--batch 16]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time
import numpy as np
from sqhhg import _kernels, fieldgen, tdse
from sqhhg.quadrature import QuadratureSample

nx, steps, batch = {nx}, {steps}, {batch}
grid = tdse.GridSpec(x_min=-nx * 0.1, x_max=nx * 0.1, nx=nx, dt=0.02,
                     absorber_width=max(10.0, nx * 0.1 * 0.15))
atom = tdse.AtomModel(softening_a=1.1891)
ground = tdse.ground_state(atom, grid)
pulse = fieldgen.PulseSpec()
tg = fieldgen.TimeGridSpec(-steps / 2 * grid.dt, steps / 2 * grid.dt, grid.dt)
t = tg.times()
rng = np.random.default_rng(0)
samples = [QuadratureSample(100.0 + rng.standard_normal(), rng.standard_normal(), i)
           for i in range(batch)]
fields = [fieldgen.FieldRealization(
    t_au=t,
    e_au=pulse.e0_au * np.exp(-(t / (t[-1] * 0.6))**2) * (
        s.x * np.cos(pulse.omega_au * t) + s.p * np.sin(pulse.omega_au * t)) / 100.0,
    sample=s, e_vac_au=1e-2 * pulse.e0_au) for s in samples]

tdse.propagate_batch(ground, fields[:2], atom, grid)  # warm up
t0 = time.perf_counter()
traces, ok = tdse.propagate_batch(ground, fields, atom, grid)
wall = time.perf_counter() - t0
print(json.dumps({{
    "backend": _kernels.backend_name(),
    "wall_s": wall,
    "us_per_step_per_shot": wall / steps / batch * 1e6,
    "s_per_shot": wall / batch,
    "checksum": float(np.nansum([np.abs(tr.a_au).sum() for tr in traces])),
}}))
"""


def run(env_extra, nx, steps, batch):
    env = dict(os.environ, **env_extra)
    code = WORKLOAD.format(nx=nx, steps=steps, batch=batch)
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True,
                          text=True, env=env)
    if proc.returncode != 0:
        raise RuntimeError(proc.stderr)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=4096)
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--batch", type=int, default=16)
    args = ap.parse_args()

    compiled = run({"SQHHG_FORCE_NUMPY": "0"}, args.nx, args.steps, args.batch)
    fallback = run({"SQHHG_FORCE_NUMPY": "1"}, args.nx, args.steps, args.batch)

    print(f"\nworkload: nx={args.nx}, steps={args.steps}, batch={args.batch}\n")
    for res in (compiled, fallback):
        print(f"  {res['backend']:>8}: {res['us_per_step_per_shot']:7.1f} us/step/shot   "
              f"{res['s_per_shot']:6.2f} s/shot   wall {res['wall_s']:6.2f} s")
    if compiled["backend"] == fallback["backend"]:
        print("\n  note: extension not built; both runs used the numpy backend")
    else:
        speedup = fallback["wall_s"] / compiled["wall_s"]
        print(f"\n  speedup: {speedup:.2f}x")
    rel = abs(compiled["checksum"] - fallback["checksum"]) / max(compiled["checksum"], 1e-300)
    print(f"  cross-backend checksum agreement: {rel:.2e} relative")


if __name__ == "__main__":
    main()
