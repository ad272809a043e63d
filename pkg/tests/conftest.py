import pytest

from exlat.dispersion import Dispersion
from exlat.lattice import LatticeSpec, build_roots

_ROOTS = {}
_DISP = {}


def root_system(token):
    if token not in _ROOTS:
        _ROOTS[token] = build_roots(LatticeSpec.parse(token))
    return _ROOTS[token]


def dispersion(token):
    if token not in _DISP:
        _DISP[token] = Dispersion(root_system(token))
    return _DISP[token]


@pytest.fixture(scope="session")
def rs_for():
    """Cached root systems, keyed by lattice label."""
    return root_system


@pytest.fixture(scope="session")
def disp_for():
    """Cached dispersion evaluators, keyed by lattice label."""
    return dispersion
