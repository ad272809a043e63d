"""Lattice Green's function from a binned density of states.

Convention: G(eps + i0) = integral rho(x) / (eps - x + i0) dx, so inside the
band Im G = -pi rho(eps), below the band Re G < 0, and Re G(eps) ~ 1/eps as
eps -> +-infinity.  For a piecewise-constant density the principal value is
exact per bin:

    PV int_lo^hi rho_b / (eps - x) dx = rho_b * ln|(eps - lo)/(eps - hi)|

so the real part needs no quadrature at all.  Evaluation points that land on
a bin edge (where the log blows up spuriously) are nudged off the edge by
half of 1e-9 of the local bin width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dos import DosHistogram

__all__ = ["GreensScan", "re_g", "im_g", "greens_scan"]

EDGE_NUDGE = 1e-9


def _nudged(edges: np.ndarray, energies: np.ndarray) -> np.ndarray:
    """Move any evaluation energy off a coinciding bin edge."""
    e = np.array(energies, dtype=float, copy=True)
    idx = np.clip(np.searchsorted(edges, e), 1, len(edges) - 1)
    local_w = edges[idx] - edges[idx - 1]
    for j in (idx, idx - 1):
        d = e - edges[j]
        hit = np.abs(d) < EDGE_NUDGE * local_w
        if hit.any():
            # The shift must survive the addition: floor it at a few ulp.
            shift = np.maximum(0.5 * EDGE_NUDGE * local_w[hit],
                               4.0 * np.spacing(np.abs(edges[j][hit])))
            sign = np.where(d[hit] >= 0, 1.0, -1.0)
            e[hit] = edges[j][hit] + sign * shift
    return e


def re_g(edges: np.ndarray, density: np.ndarray, energies: np.ndarray,
         chunk: int = 512) -> np.ndarray:
    """Re G on an array of energies for a histogram density.

    Vectorized over (energies x bins) in chunks to bound memory.
    """
    edges = np.asarray(edges, dtype=float)
    density = np.asarray(density, dtype=float)
    e = _nudged(edges, np.atleast_1d(np.asarray(energies, dtype=float)))
    lo = edges[:-1]
    hi = edges[1:]
    live = density != 0.0  # empty bins contribute zero even at a shared edge
    lo, hi, density = lo[live], hi[live], density[live]
    out = np.empty(len(e))
    for start in range(0, len(e), chunk):
        ee = e[start:start + chunk, None]
        out[start:start + chunk] = (
            density * np.log(np.abs((ee - lo) / (ee - hi)))
        ).sum(axis=1)
    return out


def im_g(edges: np.ndarray, density: np.ndarray, energies: np.ndarray) -> np.ndarray:
    """Im G = -pi rho(eps), with rho read off the histogram (0 outside)."""
    edges = np.asarray(edges, dtype=float)
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    idx = np.searchsorted(edges, e, side="right") - 1
    inside = (idx >= 0) & (idx < len(edges) - 1)
    rho = np.zeros(len(e))
    rho[inside] = np.asarray(density)[idx[inside]]
    return -np.pi * rho


@dataclass
class GreensScan:
    energies: np.ndarray
    re: np.ndarray
    im: np.ndarray
    re_err: np.ndarray | None = None


def greens_scan(hist: DosHistogram, energies: np.ndarray) -> GreensScan:
    """Green's function of a sampled DOS, with error bars on Re G propagated
    from the per-batch histogram spread."""
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    re = re_g(hist.edges, hist.density, e)
    im = im_g(hist.edges, hist.density, e)

    err = None
    mass = hist.batch_mass
    bz = mass.sum(axis=1)
    live = bz > 0
    if live.sum() > 1:
        widths = hist.widths()
        per_batch = mass[live] / (bz[live, None] * widths[None, :])
        vals = np.stack([re_g(hist.edges, pb, e) for pb in per_batch])
        err = vals.std(axis=0, ddof=1) / np.sqrt(live.sum())
    return GreensScan(energies=e, re=re, im=im, re_err=err)
