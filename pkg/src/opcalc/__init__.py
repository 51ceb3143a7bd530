"""Finite-dimensional functional calculus for contractions and verification of
its Lipschitz estimates, double operator integrals and trace formulae."""

from .calculus import (Contraction, calc_dilation, calc_fourier, calc_spectral, defects,
                       finite_dilation)
from .circlefn import CircleFunction, jackson_truncate, lip_arc, lip_chordal, zoo
from .linalg import INF, schatten_norm

__version__ = "0.1.0"

__all__ = ["INF", "CircleFunction", "Contraction", "calc_dilation", "calc_fourier",
           "calc_spectral", "defects", "finite_dilation", "jackson_truncate", "lip_arc",
           "lip_chordal", "schatten_norm", "zoo"]
