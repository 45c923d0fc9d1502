"""Conditional-score estimation for functional GLMs with measurement error."""

from ._condscore import (
    brownian_bridge_kernel,
    eigen_decompose,
    estimate_error_kernel,
    fit,
    fourier_basis,
    run_scenario,
    sqexp_kernel,
)

__all__ = [
    "brownian_bridge_kernel",
    "eigen_decompose",
    "estimate_error_kernel",
    "fit",
    "fourier_basis",
    "run_scenario",
    "sqexp_kernel",
]
