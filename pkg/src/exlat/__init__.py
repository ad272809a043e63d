"""Spectral toolkit for nearest-neighbor hopping models on simply laced root lattices.

Roots are scaled so the minimal vectors have squared length 8; with hopping
amplitude -1 on each of the tau nearest neighbors the band minimum sits at
-tau exactly.
"""

from .lattice import Family, LatticeSpec, RootSystem, build_roots
from .dispersion import Dispersion

__all__ = [
    "Family",
    "LatticeSpec",
    "RootSystem",
    "build_roots",
    "Dispersion",
]

__version__ = "0.1.0"
