"""Pure-numpy twins of the compiled split-step kernels.

Same operations, same geometric phase recurrence (np.cumprod), so results
match the compiled path to floating-point rounding. Used automatically when
the extension is unavailable; force with SQHHG_FORCE_NUMPY=1.
"""

from __future__ import annotations

import numpy as np


def _phase_rows(coef: np.ndarray, x0: float, dx: float, nx: int) -> np.ndarray:
    """exp(i coef[b] x_j) for x_j = x0 + j dx, via per-row cumprod."""
    steps = np.empty((len(coef), nx), dtype=np.complex128)
    steps[:, 0] = np.exp(1j * coef * x0)
    steps[:, 1:] = np.exp(1j * coef * dx)[:, None]
    return np.cumprod(steps, axis=1)


def apply_half_step(psi, exp_v, coef, x0, dx):
    psi *= exp_v[None, :] * _phase_rows(np.asarray(coef), x0, dx, psi.shape[1])


def apply_half_step_accum(psi, exp_v_masked, coef, x0, dx, neg_grad_v, out_force, out_norm):
    psi *= exp_v_masked[None, :] * _phase_rows(np.asarray(coef), x0, dx, psi.shape[1])
    rho = psi.real**2 + psi.imag**2
    out_force[:] = rho @ neg_grad_v
    out_norm[:] = rho.sum(axis=1)
