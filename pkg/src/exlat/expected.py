"""Reference values the test suite and the `reproduce` command check against.

Walk count sequences are OEIS A292881 (E6), A292882 (E7), A292883 (E8).
Tail constants are exact closed forms obtained from the band-edge Hessians;
the return probability intervals are previously published 95% confidence
ranges used as regression targets.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.special import gamma as _gamma

SQRT3 = float(np.sqrt(3.0))
PI = float(np.pi)

# W_0 .. W_8: closed nearest-neighbor walks returning to the origin.
WALK_COUNTS = {
    "E6": [1, 0, 72, 1440, 54216, 2134080, 93993120, 4423628160, 219463602120],
    "E7": [1, 0, 126, 4032, 228690, 14394240, 1020623940, 78353170560,
           6393827197170],
    "E8": [1, 0, 240, 13440, 1260720, 137813760, 17141798400, 2336327078400,
           341350907713200],
}

OEIS_IDS = {"E6": "A292881", "E7": "A292882", "E8": "A292883"}

# Critical classes: (energy, n_down, n_up, degenerate).  Degenerate classes
# have five zero Hessian directions at their maximally flat stratum.
SINGULARITIES = {
    "E6": [
        (Fraction(-72), 0, 6, False),
        (Fraction(-8), 1, 5, False),
        (Fraction(0), 2, 4, False),
        (Fraction(8), 1, 0, True),
        (Fraction(9), 6, 0, False),
    ],
    "E7": [
        (Fraction(-126), 0, 7, False),
        (Fraction(-18), 1, 6, False),
        (Fraction(2), 1, 6, False),
        (Fraction(18, 5), 2, 5, False),
        (Fraction(6), 3, 4, False),
        (Fraction(9), 2, 0, True),
        (Fraction(10), 6, 1, False),
        (Fraction(14), 7, 0, False),
    ],
    "E8": [
        (Fraction(-240), 0, 8, False),
        (Fraction(-16), 1, 7, False),
        (Fraction(3), 2, 6, False),
        (Fraction(8), 3, 5, False),
        (Fraction(10), 4, 4, False),
        (Fraction(11), 5, 3, False),
        (Fraction(185, 16), 6, 2, False),
        (Fraction(320, 27), 7, 1, False),
        (Fraction(12), 7, 1, False),
        (Fraction(12), 8, 0, False),
        (Fraction(16), 8, 0, False),
    ],
}

DEGENERATE_N_ZERO = 5

EPS_MAX = {"E6": 9.0, "E7": 14.0, "E8": 16.0}
GAMMA = {"E6": 8, "E7": 9, "E8": 15}

# Distinct extremal positions per reciprocal unit cell.
N_MIN = {"E6": 1, "E7": 1, "E8": 1}
N_MAX = {"E6": 80, "E7": 36, "E8": 135}

# Leading DOS coefficients c in rho ~ c |eps - eps_edge|^(d/2 - 1).
TAIL_MIN = {
    "E6": 1.0 / (2 ** 13 * 9 * SQRT3 * PI ** 3),
    "E7": 1.0 / (2 ** 7 * 3 ** 8 * 5 * PI ** 4),
    "E8": 1.0 / (2 ** 13 * 3 ** 5 * 5 ** 4 * PI ** 4),
}
TAIL_MAX = {
    "E6": 5.0 / (9 * SQRT3 * PI ** 3),
    "E7": 3.0 / (160 * PI ** 4),
    "E8": 45.0 / (2 ** 13 * PI ** 4),
}

# 95% confidence intervals for the return probability.
RETURN_CI = {
    "E6": (0.022901, 0.022916),
    "E7": (0.011973, 0.011982),
    "E8": (0.0059014, 0.0059064),
}


def watson_a3() -> float:
    """Closed-form return probability on A_3 (the fcc walk),
    1 - 16 * 4^(1/3) pi^4 / (9 Gamma(1/3)^6)."""
    return 1.0 - 16.0 * 4.0 ** (1.0 / 3.0) * PI ** 4 / (9.0 * _gamma(1.0 / 3.0) ** 6)
