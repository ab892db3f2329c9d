"""Exact non-archimedean measures, stochastic integrals and spectral tools.

All arithmetic is exact: rationals, valuation exponents and cyclotomic
roots of unity.  There is no floating point anywhere in the library.
"""

from .padic_core import (
    Cyclotomic,
    FracClass,
    UltraNorm,
    cyc_mul,
    frac_part,
    padic_valuation,
    root_of_unity,
    vp,
)

__all__ = [
    "Cyclotomic",
    "FracClass",
    "UltraNorm",
    "cyc_mul",
    "frac_part",
    "padic_valuation",
    "root_of_unity",
    "vp",
]
