"""Density of states by reweighted Metropolis sampling.

Pipeline: bin the band [eps_min, eps_max] (uniform bulk plus log-spaced bins
crowding both band edges), optionally build a tail-flattening weight from a
short uniform pilot run, then sample pi(u) prop. to w(eps(u)) and histogram
the visited energies with importance weights 1/w.  Self-normalizing, so the
histogram integrates to one by construction; error bars come from batch means
over 100 time slices of the post-burn-in stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dispersion import Dispersion
from .lattice import LatticeSpec, build_roots
from .mcmc import ChainConfig, run_chains

__all__ = [
    "DosConfig",
    "DosHistogram",
    "WeightFunction",
    "make_bins",
    "pilot_then_flatten",
    "sample_dos",
    "moment",
]

N_UNIFORM_BINS = 2000
N_EDGE_BINS = 200
EDGE_WINDOW = 1.0
EDGE_RESOLUTION = 1e-8
N_BATCHES = 100
MIN_BATCH_STEPS = 512  # floor on steps per batch so batch means decorrelate
PILOT_FRACTION = 0.1
MIN_PILOT_COUNT = 100


def make_bins(eps_min: float, eps_max: float,
              n_uniform: int = N_UNIFORM_BINS) -> np.ndarray:
    """Bin edges: n_uniform uniform across the band plus 200 log-spaced bins
    packed into the unit-distance window at each band edge."""
    if not eps_max > eps_min:
        raise ValueError(f"need eps_max > eps_min, got [{eps_min}, {eps_max}]")
    width = eps_max - eps_min
    window = min(EDGE_WINDOW, 0.49 * width)
    uniform = np.linspace(eps_min, eps_max, n_uniform + 1)
    dist = np.geomspace(EDGE_RESOLUTION, window, N_EDGE_BINS + 1)
    edges = np.concatenate([uniform, eps_min + dist, eps_max - dist])
    edges = np.unique(edges)
    # Drop near-duplicate edges so no bin has zero width.
    keep = np.concatenate([[True], np.diff(edges) > 1e-12 * width])
    return edges[keep]


@dataclass
class WeightFunction:
    """Piecewise sampling weight w(eps): analytic power-law tails spliced onto
    a tabulated bulk profile, continuous at both splice points.

    The tails follow |eps - eps_edge|^(1 - d/2), the reciprocal of the leading
    density-of-states behavior near a band edge in d dimensions, so the
    reweighted chain visits the tail bins at a roughly flat rate.
    """

    eps_min: float
    eps_max: float
    exponent: float
    splice_lo: float
    splice_hi: float
    c_lo: float
    c_hi: float
    grid: np.ndarray
    bulk: np.ndarray

    T_FLOOR = 1e-15

    def __call__(self, eps: np.ndarray) -> np.ndarray:
        eps = np.asarray(eps, dtype=float)
        w = np.interp(eps, self.grid, self.bulk)
        lo = eps < self.splice_lo
        if lo.any():
            t = np.maximum(eps[lo] - self.eps_min, self.T_FLOOR)
            w[lo] = self.c_lo * t ** self.exponent
        hi = eps > self.splice_hi
        if hi.any():
            t = np.maximum(self.eps_max - eps[hi], self.T_FLOOR)
            w[hi] = self.c_hi * t ** self.exponent
        return w

    def validate(self, n_grid: int = 10000) -> None:
        """Positivity and splice continuity on a dense energy grid."""
        pad = 1e-9 * (self.eps_max - self.eps_min)
        e = np.linspace(self.eps_min + pad, self.eps_max - pad, n_grid)
        w = self(e)
        if not np.all(np.isfinite(w)) or not np.all(w > 0.0):
            raise AssertionError("BUG: weight function not positive on the band")
        for sp in (self.splice_lo, self.splice_hi):
            lo, hi = self(np.array([sp - 1e-9])), self(np.array([sp + 1e-9]))
            if abs(lo[0] - hi[0]) > 1e-3 * max(lo[0], hi[0]):
                raise AssertionError("BUG: weight function discontinuous at splice")


@dataclass
class DosHistogram:
    """Self-normalized density of states estimate with batch-means errors.

    density integrates to one over the edges; stderr is the per-bin standard
    error across per-batch self-normalized histograms.  The raw per-batch
    inverse-weight mass matrix rides along so histograms from disjoint runs
    (same edges) can be merged exactly.
    """

    edges: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    n_samples: int
    ess: float
    eps_min: float
    eps_max: float
    batch_mass: np.ndarray = field(repr=False)
    inv_weight_mean: float = 1.0
    pilot_weight_mean: float | None = None
    acceptance_rate: float = 1.0

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def normalization_product(self) -> float | None:
        """E_pi[1/w] * E_pilot[w]; equals 1 in expectation, so its distance
        from 1 is an end-to-end consistency check on the reweighting."""
        if self.pilot_weight_mean is None:
            return None
        return self.inv_weight_mean * self.pilot_weight_mean

    def merge(self, other: "DosHistogram") -> "DosHistogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different bins")
        mass = np.vstack([self.batch_mass, other.batch_mass])
        dens, err, ess = _finalize(mass, self.edges)
        n = self.n_samples + other.n_samples
        iwm = (self.inv_weight_mean * self.n_samples
               + other.inv_weight_mean * other.n_samples) / n
        return DosHistogram(
            edges=self.edges, density=dens, stderr=err, n_samples=n,
            ess=ess, eps_min=self.eps_min, eps_max=self.eps_max,
            batch_mass=mass, inv_weight_mean=iwm,
            pilot_weight_mean=self.pilot_weight_mean,
            acceptance_rate=0.5 * (self.acceptance_rate + other.acceptance_rate),
        )


def moment(hist: DosHistogram, n: int) -> float:
    """n-th energy moment of the histogram density."""
    return float(np.sum(hist.midpoints() ** n * hist.density * hist.widths()))


T_LO_MAX_RELERR = 0.2   # deep cut: batch relative error ceiling on cum mass
T_HI_BASIN_FRACTION = 0.3   # shallow cut as a fraction of the basin depth


def edge_exponent(hist: DosHistogram, side: str, t_lo: float | None = None,
                  t_hi: float | None = None,
                  basin_depth: float | None = None) -> tuple[float, int]:
    """Fitted log-log exponent of the density against distance from a band
    edge, estimated through the cumulative edge mass.

    A density c * t^p integrates to c * t^(p+1) / (p+1) within distance t
    of the edge, so the log-log slope of the cumulative mass minus one
    estimates p.  Fitting the integral instead of the per-bin densities
    keeps the estimate stable when deep bins hold few samples: unvisited
    bins enter the running sum as zeros instead of being dropped, and each
    fit point pools every sample below it rather than leaning on one sparse
    bin.  The fit model is log M = a + s log t + c t; the linear term soaks
    up the leading correction to the edge power law, which lets the window
    reach far enough from the edge for a stable slope without inheriting
    curvature bias from the interior.

    The window adapts to the histogram unless pinned explicitly.  The deep
    cut t_lo is the smallest distance at which the batch-means relative
    error of the cumulative mass stays below T_LO_MAX_RELERR, which keeps
    out stretches the chains visited only a handful of times.  The shallow
    cut t_hi is T_HI_BASIN_FRACTION of basin_depth (the energy gap from
    this edge to the nearest interior critical value) when that is given,
    so the correction term stays perturbative; otherwise the full
    geometric-bin span is used.  Returns (exponent, points used).
    """
    if side == "min":
        t = hist.edges[1:] - hist.eps_min
        forward = slice(None)
    elif side == "max":
        t = hist.eps_max - hist.edges[:-1]
        forward = slice(None, None, -1)
    else:
        raise ValueError("side must be 'min' or 'max'")
    mass = hist.density * hist.widths()
    cum = np.cumsum(mass[forward])[forward]
    if t_lo is None:
        t_lo = float(t.min())
        bm = getattr(hist, "batch_mass", None)
        if bm is not None and len(bm) >= 2:
            rows = bm / bm.sum(axis=1, keepdims=True)
            bcum = np.cumsum(rows[:, forward], axis=1)[:, forward]
            mean = bcum.mean(axis=0)
            err = bcum.std(axis=0, ddof=1) / np.sqrt(len(bcum))
            ok = (mean > 0) & (err <= T_LO_MAX_RELERR * mean)
            if not ok.any():
                raise RuntimeError("too few populated bins in the fit window")
            t_lo = float(t[ok].min())
    if t_hi is None:
        t_hi = EDGE_WINDOW
        if basin_depth is not None:
            t_hi = min(EDGE_WINDOW, T_HI_BASIN_FRACTION * basin_depth)
    sel = (t >= t_lo) & (t <= t_hi) & (cum > 0)
    if sel.sum() < 8 or t[sel].max() < 5.0 * t[sel].min():
        raise RuntimeError("too few populated bins in the fit window")
    x = np.log(t[sel])
    design = np.column_stack([np.ones_like(x), x, t[sel]])
    coef, *_ = np.linalg.lstsq(design, np.log(cum[sel]), rcond=None)
    return float(coef[1]) - 1.0, int(sel.sum())


@dataclass
class DosConfig:
    lattice: str
    n_samples: int
    seed: int = 0
    n_chains: int = 4096
    burn_in: int = 10000
    mode: str = "tail_flattened"  # or "uniform"
    eps_max: float | None = None  # band top; searched if not given
    bins: int = N_UNIFORM_BINS  # uniform bins across the band
    proposal_scales: tuple[float, float] = (1e-5, 0.5)

    def __post_init__(self):
        if self.mode not in ("tail_flattened", "uniform"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.n_samples <= self.burn_in * self.n_chains:
            raise ValueError(
                f"n_samples={self.n_samples} must exceed burn_in*n_chains="
                f"{self.burn_in * self.n_chains}; lower burn_in or n_chains "
                "for short runs")
        lo, hi = self.proposal_scales
        if not 0.0 < lo <= hi <= 0.5:
            raise ValueError(f"proposal_scales must satisfy 0 < lo <= hi "
                             f"<= 0.5, got {self.proposal_scales}")
        if self.bins < 2:
            raise ValueError(f"need at least 2 uniform bins, got {self.bins}")


class _HistAccumulator:
    """Streams (eps, w) states into a per-batch inverse-weight histogram."""

    def __init__(self, edges: np.ndarray, n_batches: int):
        self.edges = edges
        self.mass = np.zeros((n_batches, len(edges) - 1))
        self.inv_w_sum = 0.0
        self.count = 0
        self.n_batches = n_batches

    def __call__(self, step: int, n_steps: int, eps: np.ndarray, w: np.ndarray):
        b = step * self.n_batches // n_steps
        iw = 1.0 / w
        idx = np.searchsorted(self.edges, eps, side="right") - 1
        np.clip(idx, 0, self.mass.shape[1] - 1, out=idx)
        self.mass[b] += np.bincount(idx, weights=iw, minlength=self.mass.shape[1])
        self.inv_w_sum += float(iw.sum())
        self.count += len(eps)


def _finalize(mass: np.ndarray, edges: np.ndarray):
    widths = np.diff(edges)
    total = mass.sum(axis=0)
    z = total.sum()
    density = total / (z * widths)
    # Per-batch self-normalized densities for the spread estimate.
    bz = mass.sum(axis=1, keepdims=True)
    live = bz[:, 0] > 0
    per_batch = mass[live] / (bz[live] * widths[None, :])
    nb = int(live.sum())
    if nb > 1:
        stderr = per_batch.std(axis=0, ddof=1) / np.sqrt(nb)
    else:
        stderr = np.full_like(density, np.nan)
    # Effective sample size from the batch-to-batch wobble of the mean energy.
    mids = 0.5 * (edges[:-1] + edges[1:])
    mean_b = per_batch @ (mids * widths)
    mean_all = float(density @ (mids * widths))
    var_all = float(density @ ((mids - mean_all) ** 2 * widths))
    vb = mean_b.var(ddof=1) if nb > 1 else np.inf
    ess = nb * var_all / vb if vb > 0 else float(nb)
    return density, stderr, float(ess)


def _resolve_band_top(spec: LatticeSpec, disp: Dispersion, seed: int) -> float:
    from .vanhove import band_top, exact_band_top

    top = exact_band_top(spec)
    if top is not None:
        return float(top)
    return float(band_top(disp, n_starts=20000, seed=seed + 101)[0])


def pilot_then_flatten(cfg: DosConfig, disp: Dispersion | None = None,
                       edges: np.ndarray | None = None,
                       eps_max: float | None = None) -> WeightFunction:
    """Build the tail-flattening weight from a uniform pilot run.

    Runs a uniform-weight chain with 10% of the configured budget, smooths the
    pilot histogram with a 5-bin moving average, sets the bulk weight to its
    reciprocal, and splices |eps - eps_edge|^(1-d/2) tails where the pilot has
    fewer than 100 counts per bin, matching constants at the splice points.
    """
    spec = LatticeSpec.parse(cfg.lattice)
    if disp is None:
        disp = Dispersion(build_roots(spec))
    eps_min = -float(spec.tau)
    if eps_max is None:
        eps_max = cfg.eps_max if cfg.eps_max is not None else _resolve_band_top(spec, disp, cfg.seed)
    if edges is None:
        edges = make_bins(eps_min, eps_max, cfg.bins)

    n_pilot = max(int(cfg.n_samples * PILOT_FRACTION), 200 * cfg.n_chains)
    acc = _HistAccumulator(edges, 1)
    run_chains(
        disp.fast_energies, spec.rank,
        ChainConfig(n_samples=n_pilot, n_chains=cfg.n_chains,
                    burn_in=min(cfg.burn_in, 500), seed=cfg.seed + 1,
                    step_lo=cfg.proposal_scales[0],
                    step_hi=cfg.proposal_scales[1]),
        weight_fn=None, observer=acc,
        support=(eps_min, eps_max),
    )
    counts = acc.mass[0]  # uniform weights, so mass = counts
    widths = np.diff(edges)
    dens = counts / (counts.sum() * widths)
    kernel = np.ones(5) / 5.0
    smooth = np.convolve(dens, kernel, mode="same")
    # Convolve shortens the effective window at the ends; renormalize there.
    norm = np.convolve(np.ones_like(dens), kernel, mode="same")
    smooth /= norm

    # Bulk/tail split at the count floor.  Short exploratory runs cannot put
    # MIN_PILOT_COUNT samples into any of the ~2000 bins, so the floor backs
    # off to a per-bin share for them; production budgets keep the full 100.
    count_floor = min(MIN_PILOT_COUNT,
                      max(5.0, counts.sum() / (4.0 * len(counts))))
    ok = counts >= count_floor
    if not ok.any():
        raise RuntimeError("pilot run too short: no bin reached the count floor")
    lo_idx = int(np.argmax(ok))                   # first well-sampled bin
    hi_idx = int(len(ok) - 1 - np.argmax(ok[::-1]))  # last well-sampled bin
    mids = 0.5 * (edges[:-1] + edges[1:])
    splice_lo = float(mids[lo_idx])
    splice_hi = float(mids[hi_idx])

    floor = 1e-12 * smooth.max()
    bulk = 1.0 / np.maximum(smooth, floor)
    exponent = 1.0 - spec.rank / 2.0
    c_lo = float(bulk[lo_idx] / max(splice_lo - eps_min, 1e-300) ** exponent)
    c_hi = float(bulk[hi_idx] / max(eps_max - splice_hi, 1e-300) ** exponent)

    wf = WeightFunction(
        eps_min=eps_min, eps_max=float(eps_max), exponent=exponent,
        splice_lo=splice_lo, splice_hi=splice_hi, c_lo=c_lo, c_hi=c_hi,
        grid=mids, bulk=bulk,
    )
    wf.validate()
    return wf


def sample_dos(cfg: DosConfig) -> DosHistogram:
    """Estimate the density of states of one lattice.

    mode="tail_flattened" spends 10% of the budget on the uniform pilot that
    shapes the weight and the rest on the reweighted main run; mode="uniform"
    histograms the flat-measure walk directly.
    """
    spec = LatticeSpec.parse(cfg.lattice)
    disp = Dispersion(build_roots(spec))
    eps_min = -float(spec.tau)
    eps_max = cfg.eps_max if cfg.eps_max is not None else _resolve_band_top(spec, disp, cfg.seed)
    edges = make_bins(eps_min, eps_max, cfg.bins)

    pilot_w_mean = None
    if cfg.mode == "tail_flattened":
        wf = pilot_then_flatten(cfg, disp, edges, eps_max)
        n_main = cfg.n_samples - max(int(cfg.n_samples * PILOT_FRACTION), 200 * cfg.n_chains)
        n_main = max(n_main, cfg.n_chains)
        weight_fn = wf
    else:
        wf = None
        n_main = cfg.n_samples
        weight_fn = None

    n_steps_main = -(-n_main // cfg.n_chains)
    n_batches = max(2, min(N_BATCHES, n_steps_main // MIN_BATCH_STEPS))
    acc = _HistAccumulator(edges, n_batches)
    stats = run_chains(
        disp.fast_energies, spec.rank,
        ChainConfig(n_samples=n_main, n_chains=cfg.n_chains,
                    burn_in=cfg.burn_in, seed=cfg.seed,
                    step_lo=cfg.proposal_scales[0],
                    step_hi=cfg.proposal_scales[1]),
        weight_fn=weight_fn, observer=acc,
        support=(eps_min, eps_max),
    )

    if wf is not None:
        # Independent uniform estimate of E[w] from a fresh short run.
        probe = _WeightMeanProbe(wf)
        run_chains(
            disp.fast_energies, spec.rank,
            ChainConfig(n_samples=max(cfg.n_chains * 100, 10 * cfg.n_chains),
                        n_chains=cfg.n_chains, burn_in=200, seed=cfg.seed + 2,
                        step_lo=cfg.proposal_scales[0],
                        step_hi=cfg.proposal_scales[1]),
            weight_fn=None, observer=probe,
            support=(eps_min, eps_max),
        )
        pilot_w_mean = probe.mean()

    density, stderr, ess = _finalize(acc.mass, edges)
    return DosHistogram(
        edges=edges, density=density, stderr=stderr,
        n_samples=stats.n_samples, ess=ess,
        eps_min=eps_min, eps_max=float(eps_max),
        batch_mass=acc.mass,
        inv_weight_mean=acc.inv_w_sum / acc.count,
        pilot_weight_mean=pilot_w_mean,
        acceptance_rate=stats.acceptance_rate,
    )


class _WeightMeanProbe:
    def __init__(self, wf: WeightFunction):
        self.wf = wf
        self.total = 0.0
        self.count = 0

    def __call__(self, step, n_steps, eps, w):
        self.total += float(self.wf(eps).sum())
        self.count += len(eps)

    def mean(self) -> float:
        return self.total / self.count
