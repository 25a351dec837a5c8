import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from sqhhg import fieldgen, tdse


def fd_ground_energy(softening_a: float, dx: float = 0.05, half_box: float = 60.0) -> float:
    """Independent oracle: 3-point finite-difference Hamiltonian diagonalization."""
    x = np.arange(-half_box, half_box + dx / 2, dx)
    v = -1.0 / np.sqrt(x**2 + softening_a**2)
    diag = v + 1.0 / dx**2
    off = np.full(len(x) - 1, -0.5 / dx**2)
    return float(eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))[0][0])


def fd_ground_energy_extrapolated(softening_a: float) -> float:
    """Richardson-extrapolated (O(dx^4)) finite-difference ground energy."""
    coarse = fd_ground_energy(softening_a, dx=0.1)
    fine = fd_ground_energy(softening_a, dx=0.05)
    return (4.0 * fine - coarse) / 3.0


@pytest.fixture(scope="session")
def calibrated_atom():
    return tdse.calibrate_softcore(15.76)


@pytest.fixture(scope="session")
def coherent_reference(calibrated_atom):
    """One production-grid coherent mean-field run, shared by slow tests."""
    grid = tdse.GridSpec()
    pulse = fieldgen.PulseSpec()
    ground = tdse.ground_state(calibrated_atom, grid)
    tgrid = fieldgen.default_time_grid(pulse, grid.dt)
    e_vac = 1e-2 * pulse.e0_au
    field = fieldgen.mean_field(pulse, e_vac, tgrid)
    trace = tdse.propagate(ground, field, calibrated_atom, grid)
    return {
        "atom": calibrated_atom,
        "grid": grid,
        "pulse": pulse,
        "ground": ground,
        "e_vac": e_vac,
        "trace": trace,
    }
