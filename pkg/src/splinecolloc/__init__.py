"""Orthogonal spline collocation with an almost-block-diagonal solver.

Modules:

* abd: block-structured LU factorization, solve and transpose solve
* basis: Gauss-Legendre collocation nodes, monomial and Hermite bases
* osc1d: 1D collocation (ODE and interpolation modes)
* osc2d: 2D bicubic Hermite tensor-product fitting
* baselines: nearest / linear / cubic reference interpolators
* trajectory, datagen: finite-difference data generation and storage
* spacetime, adaptive: space-time surrogates and adaptive sampling
* autodiff, surrogate: differentiable pipeline and the learned stepper
* cli: command line entry points
"""

from . import abd, basis, osc1d, osc2d  # noqa: F401

__all__ = ["abd", "basis", "osc1d", "osc2d"]
__version__ = "0.1.0"
