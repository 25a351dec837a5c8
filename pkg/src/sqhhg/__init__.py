"""sqhhg: stochastic strong-field simulator for squeezed-light-driven HHG.

Maps squeezed-coherent driver states onto ensembles of 1D TDSE realizations,
computes per-shot spectra and cutoffs, and provides the closed-form layer
(tunneling statistics, cutoff laws, two-channel variance model) needed to
verify the sub-SQL cutoff-variance witness.
"""

__version__ = "0.1.0"

from ._kernels import backend_name

__all__ = ["__version__", "backend_name"]
