"""Return probability of the nearest-neighbor random walk.

For a walk stepping to one of tau neighbors uniformly, the return probability
is P = 1 - 1/(tau I) with I the Brillouin zone average of 1/(eps - eps_min).
Sampling pi(u) prop. to 1/(eps(u) - eps_min) turns this into a plain mean:
under pi, E[eps] = (1 - tau I)/I, hence

    P = E_pi[eps] / eps_min.

The dual route goes through the Green's function at the band bottom:
P = 1 + 1/(tau Re G(eps_min)), with Re G read off a sampled DOS histogram.
Both are exposed so they can be checked against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import Dispersion
from .dos import DosHistogram
from .greens import re_g
from .lattice import LatticeSpec, build_roots
from .mcmc import ChainConfig, run_chains

__all__ = ["ReturnProbResult", "sample_return_probability", "greens_return_probability"]

N_BATCHES = 200
MIN_BATCH_STEPS = 512  # keep batches much longer than the correlation time
EDGE_GUARD = 1e-12


def _n_batches(n_samples: int, n_chains: int, cap: int = N_BATCHES) -> int:
    """Batch count: the cap, unless that would make batches too short.

    The chain's integrated autocorrelation time is tens of steps, so short
    batches correlate and the variance estimate collapses; a floor on the
    batch length keeps the error bars honest at small budgets."""
    n_steps = -(-int(n_samples) // int(n_chains))
    return max(2, min(cap, n_steps // MIN_BATCH_STEPS))


@dataclass
class ReturnProbResult:
    lattice: str
    p: float
    stderr: float
    eps_mean: float
    n_samples: int
    acceptance_rate: float
    batch_p: np.ndarray

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.p - 1.96 * self.stderr, self.p + 1.96 * self.stderr)


class _EnergyBatches:
    def __init__(self, n_batches: int):
        self.sums = np.zeros(n_batches)
        self.counts = np.zeros(n_batches, dtype=np.int64)
        self.n_batches = n_batches

    def __call__(self, step, n_steps, eps, w):
        b = step * self.n_batches // n_steps
        self.sums[b] += float(eps.sum())
        self.counts[b] += len(eps)


def sample_return_probability(lattice: str, n_samples: int, seed: int = 0,
                              n_chains: int = 4096, burn_in: int = 10000,
                              eps_max: float | None = None) -> ReturnProbResult:
    """Metropolis estimate of P with batch-means error bars.

    The chain targets 1/(eps - eps_min); proposals within 1e-12 of the band
    bottom are rejected outright to keep the weight finite.
    """
    spec = LatticeSpec.parse(lattice)
    disp = Dispersion(build_roots(spec))
    tau = float(spec.tau)
    eps_min = -tau

    def weight(eps: np.ndarray) -> np.ndarray:
        t = eps - eps_min
        w = np.zeros_like(t)
        ok = t > EDGE_GUARD
        w[ok] = 1.0 / t[ok]
        return w

    acc = _EnergyBatches(_n_batches(n_samples, n_chains))
    support_hi = eps_max if eps_max is not None else float("inf")
    # The weight has no structure narrower than the bottom basin, so the
    # step mixture starts at 1e-2 rather than the histogramming default;
    # smaller floors just slow the mixing (measured on both A3 and E8).
    stats = run_chains(
        disp.fast_energies, spec.rank,
        ChainConfig(n_samples=n_samples, n_chains=n_chains,
                    burn_in=burn_in, seed=seed, step_lo=1e-2),
        weight_fn=weight, observer=acc,
        support=(eps_min, support_hi) if np.isfinite(support_hi) else None,
    )
    live = acc.counts > 0
    batch_means = acc.sums[live] / acc.counts[live]
    batch_p = batch_means / eps_min
    eps_mean = float(acc.sums.sum() / acc.counts.sum())
    p = eps_mean / eps_min
    nb = int(live.sum())
    stderr = float(batch_p.std(ddof=1) / np.sqrt(nb)) if nb > 1 else float("nan")
    return ReturnProbResult(
        lattice=spec.label, p=p, stderr=stderr, eps_mean=eps_mean,
        n_samples=stats.n_samples, acceptance_rate=stats.acceptance_rate,
        batch_p=batch_p,
    )


def greens_return_probability(hist: DosHistogram, tau: float) -> tuple[float, float]:
    """P from the sampled DOS: P = 1 + 1/(tau Re G(-tau)).

    Returns (p, stderr) with the error propagated from the per-batch
    histogram spread through the same transform.
    """
    e0 = np.array([-float(tau)])
    g = float(re_g(hist.edges, hist.density, e0)[0])
    p = 1.0 + 1.0 / (tau * g)

    mass = hist.batch_mass
    bz = mass.sum(axis=1)
    live = bz > 0
    if live.sum() > 1:
        widths = hist.widths()
        per_batch = mass[live] / (bz[live, None] * widths[None, :])
        gs = np.array([float(re_g(hist.edges, pb, e0)[0]) for pb in per_batch])
        ps = 1.0 + 1.0 / (tau * gs)
        stderr = float(ps.std(ddof=1) / np.sqrt(live.sum()))
    else:
        stderr = float("nan")
    return p, stderr
