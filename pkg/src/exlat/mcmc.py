"""Vectorized Metropolis random walk on the Brillouin zone torus.

All chains advance in lockstep as rows of one array, fed by a single PCG64
stream; per step the engine draws step lengths, Gaussian displacements and
acceptance uniforms in fixed (n_chains, ...) blocks.  Results are therefore
bit-identical for a fixed (seed, n_chains) no matter how the caller chunks
its accumulation, which is the determinism contract the tests pin down.

The target density is proportional to weight_fn(eps(u)) du on [0,1)^d; with
weight_fn None the chain samples the flat torus measure (every proposal is
accepted) and the visited energies are distributed as the density of states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["ChainConfig", "RunStats", "run_chains"]

STEP_LO = 1e-5
STEP_HI = 0.5


@dataclass
class ChainConfig:
    """Budget and stream parameters for one Metropolis run.

    n_samples counts post-burn-in energy evaluations; the engine rounds the
    step count up so n_chains * n_steps >= n_samples.  burn_in is in sweeps
    (vectorized steps), discarded before the observer sees anything.
    """

    n_samples: int
    n_chains: int = 4096
    burn_in: int = 10000
    seed: int = 0
    step_lo: float = STEP_LO
    step_hi: float = STEP_HI


@dataclass
class RunStats:
    n_samples: int
    n_steps: int
    n_chains: int
    acceptance_rate: float
    eps_min_seen: float
    eps_max_seen: float


def run_chains(
    energy_fn: Callable[[np.ndarray], np.ndarray],
    d: int,
    cfg: ChainConfig,
    weight_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    observer: Callable[[int, int, np.ndarray, np.ndarray], None] | None = None,
    support: tuple[float, float] | None = None,
) -> RunStats:
    """Run the walk and feed post-burn-in states to the observer.

    Parameters
    ----------
    energy_fn : maps (m, d) fractional momenta to (m,) energies.
    d : lattice rank.
    cfg : ChainConfig.
    weight_fn : target weight w(eps) > 0; proposals with w = 0 are rejected
        outright.  None means uniform sampling.
    observer : called as observer(step, n_steps, eps, w) after each
        post-burn-in sweep with the current chain energies and weights.
    support : optional (lo, hi); any sampled energy outside it by more than
        1e-6 raises RuntimeError (the dispersion and the run disagree).

    Returns RunStats with the realized sample count and acceptance rate.
    """
    if cfg.n_samples <= 0:
        raise ValueError("n_samples must be positive")
    m = cfg.n_chains
    if m <= 0:
        raise ValueError("n_chains must be positive")
    n_steps = -(-int(cfg.n_samples) // m)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    log_lo = np.log(cfg.step_lo)
    log_hi = np.log(cfg.step_hi)

    u = rng.random((m, d))
    eps = energy_fn(u)
    if weight_fn is None:
        w = np.ones(m)
    else:
        w = weight_fn(eps)
        # Redraw any chain that starts in the rejected zone (w = 0).
        for _ in range(1000):
            bad = ~(w > 0.0)
            if not bad.any():
                break
            u[bad] = rng.random((int(bad.sum()), d))
            eps[bad] = energy_fn(u[bad])
            w[bad] = weight_fn(eps[bad])
        else:
            raise RuntimeError("could not find valid initial states (weight always 0)")

    lo_guard = hi_guard = None
    if support is not None:
        lo_guard = support[0] - 1e-6
        hi_guard = support[1] + 1e-6

    accepted = 0
    total = 0
    eps_lo_seen = float(eps.min())
    eps_hi_seen = float(eps.max())

    for step in range(-cfg.burn_in, n_steps):
        step_len = np.exp(rng.uniform(log_lo, log_hi, m))
        prop = (u + step_len[:, None] * rng.standard_normal((m, d))) % 1.0
        eps_p = energy_fn(prop)
        if weight_fn is None:
            acc = np.ones(m, dtype=bool)
            rng.random(m)  # keep the stream layout identical in both modes
        else:
            w_p = weight_fn(eps_p)
            acc = rng.random(m) * w < w_p
        u[acc] = prop[acc]
        eps[acc] = eps_p[acc]
        if weight_fn is not None:
            w[acc] = w_p[acc]

        lo = float(eps.min())
        hi = float(eps.max())
        eps_lo_seen = min(eps_lo_seen, lo)
        eps_hi_seen = max(eps_hi_seen, hi)
        if support is not None and (lo < lo_guard or hi > hi_guard):
            raise RuntimeError(
                f"sampled energy outside the band: saw [{lo}, {hi}], "
                f"expected [{support[0]}, {support[1]}] within 1e-6"
            )

        if step >= 0:
            accepted += int(acc.sum())
            total += m
            if observer is not None:
                observer(step, n_steps, eps, w)

    return RunStats(
        n_samples=n_steps * m,
        n_steps=n_steps,
        n_chains=m,
        acceptance_rate=accepted / total if total else 0.0,
        eps_min_seen=eps_lo_seen,
        eps_max_seen=eps_hi_seen,
    )
