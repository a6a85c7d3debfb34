"""Modulation-space toolkit for the higher-order anisotropic NLS.

Subpackages follow the pipeline: `spectral` (periodic grids and fields),
`modspace` (frequency-uniform decomposition and the M/Planchon/X norms),
`dispersion` (exact propagator and exact-rational exponent algebra),
`nonlinear` (power and exponential nonlinearities), `solver` (Duhamel
fixed point, split-step oracle, scattering maps), `harness` (Monte-Carlo
inequality verification) and `cli`.
"""

__version__ = "0.1.0"

from . import dispersion, harness, modspace, nonlinear, solver, spectral  # noqa: F401
