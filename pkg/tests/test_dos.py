"""DOS sampling: binning, weight construction, histogram machinery."""

import numpy as np
import pytest

from conftest import dispersion
from exlat.dos import (DosConfig, EDGE_RESOLUTION, edge_exponent, make_bins,
                       moment, pilot_then_flatten, sample_dos)
from exlat.walks import moments_check, walk_counts


def small_cfg(lattice, n_samples=200000, seed=0, mode="tail_flattened"):
    return DosConfig(lattice=lattice, n_samples=n_samples, seed=seed,
                     n_chains=64, burn_in=100, mode=mode)


def test_make_bins_strictly_increasing_and_edge_refined():
    edges = make_bins(-6.0, 3.0)
    assert np.all(np.diff(edges) > 0)
    assert edges[0] == -6.0
    assert edges[-1] == 3.0
    # Geometric refinement reaches the stated resolution at both edges.
    assert edges[1] - edges[0] <= 2 * EDGE_RESOLUTION
    assert edges[-1] - edges[-2] <= 2 * EDGE_RESOLUTION


def test_bad_mode_rejected():
    with pytest.raises(ValueError):
        DosConfig(lattice="A2", n_samples=1000, mode="flat")


def test_weight_function_positive_and_continuous():
    cfg = small_cfg("A3", n_samples=50000)
    disp = dispersion("A3")
    weight = pilot_then_flatten(cfg, disp=disp)
    weight.validate()
    grid = np.linspace(weight.eps_min, weight.eps_max, 20001)
    vals = weight(grid)
    assert np.all(vals > 0)
    # No jump at the splice points: compare both sides at a tiny offset.
    for splice in (weight.splice_lo, weight.splice_hi):
        if splice is None:
            continue
        lo, hi = weight(np.array([splice - 1e-9, splice + 1e-9]))
        assert hi == pytest.approx(lo, rel=1e-3)


def test_uniform_histogram_matches_walk_moments():
    # Moments of the uniform-mode histogram equal signed walk counts; the
    # walk table is exact, so this cross-checks sampler and binning.
    hist = sample_dos(small_cfg("A2", n_samples=400000, mode="uniform"))
    table = walk_counts("A2", 4)
    errs = moments_check(table, hist)
    assert abs(errs[0]) <= 1e-12
    assert abs(errs[1]) <= 0.05
    assert abs(errs[2]) <= 0.05
    assert abs(errs[4]) <= 0.10


def test_density_normalized_and_errors_finite():
    hist = sample_dos(small_cfg("A3"))
    total = float((hist.density * hist.widths()).sum())
    assert total == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.isfinite(hist.stderr))
    assert hist.ess > 0
    assert hist.eps_min == -12.0
    assert abs(hist.normalization_product - 1.0) <= 0.05
    assert 0.0 < hist.acceptance_rate <= 1.0


def test_flattening_populates_band_edges():
    # The whole point of the weight: geometric edge bins carry samples deep
    # into both tails.  Under the flattened target the counts per bin scale
    # with bin width, so at this budget bins within a few 1e-3 of each edge
    # must be populated.
    flat = sample_dos(small_cfg("A3", n_samples=300000))
    nonzero = flat.density > 0
    t_lo = flat.midpoints() - flat.eps_min
    assert t_lo[nonzero].min() < 5e-3
    t_hi = flat.eps_max - flat.midpoints()
    assert t_hi[nonzero].min() < 5e-3


def test_sample_dos_deterministic_for_fixed_seed():
    a = sample_dos(small_cfg("A2", n_samples=100000, seed=9))
    b = sample_dos(small_cfg("A2", n_samples=100000, seed=9))
    assert np.array_equal(a.batch_mass, b.batch_mass)
    assert np.array_equal(a.density, b.density)
    assert a.ess == b.ess


def test_merge_pools_batches():
    a = sample_dos(small_cfg("A2", seed=1, n_samples=100000))
    b = sample_dos(small_cfg("A2", seed=2, n_samples=100000))
    ab = a.merge(b)
    assert ab.n_samples == a.n_samples + b.n_samples
    assert ab.batch_mass.shape[0] == a.batch_mass.shape[0] + b.batch_mass.shape[0]
    # Merged density is the sample-weighted pool of the two runs.
    pooled = ab.batch_mass.sum(axis=0)
    direct = a.batch_mass.sum(axis=0) + b.batch_mass.sum(axis=0)
    assert np.allclose(pooled, direct)


def test_moment_zero_is_one():
    hist = sample_dos(small_cfg("A2", n_samples=50000))
    assert moment(hist, 0) == pytest.approx(1.0, abs=1e-12)


def _power_law_hist(p):
    """Synthetic histogram whose bins hold the exact average of t^p, with t
    the distance from the lower edge, so the cumulative mass telescopes."""
    edges = make_bins(0.0, 4.0)
    lo, hi = edges[:-1], edges[1:]
    density = (hi ** (p + 1) - lo ** (p + 1)) / ((p + 1) * (hi - lo))

    class Fake:
        pass

    fake = Fake()
    fake.eps_min = 0.0
    fake.eps_max = 4.0
    fake.edges = edges
    fake.density = density
    fake.widths = lambda: hi - lo
    return fake


def test_edge_exponent_recovers_power_law():
    fake = _power_law_hist(1.5)
    slope, used = edge_exponent(fake, "min")
    assert used >= 10
    assert slope == pytest.approx(1.5, abs=1e-6)
    with pytest.raises(ValueError):
        edge_exponent(fake, "middle")


def test_edge_exponent_tolerates_empty_deep_bins():
    # Zeroing every bin below t = 3e-5 mimics a tail the chain has not
    # reached; the zeros stay in the running sum, so the cumulative fit
    # shifts by a few hundredths while a per-bin fit would drop the bins
    # and tilt by ~0.5.
    fake = _power_law_hist(1.5)
    fake.density = fake.density.copy()
    fake.density[fake.edges[1:] < 3e-5] = 0.0
    slope, used = edge_exponent(fake, "min")
    assert used >= 10
    assert slope == pytest.approx(1.5, abs=0.03)


def test_edge_exponent_skips_poorly_measured_depths():
    # One batch carrying all the mass below t = 1e-3 (at five times the true
    # level) models an excursion artifact.  The batch scatter flags those
    # depths and the fit window starts above them; anchoring the window at
    # the deepest populated bin instead absorbs the bias.
    fake = _power_law_hist(1.5)
    w = fake.widths()
    mass = fake.density * w
    deep = fake.edges[1:] < 1e-3
    rows = np.tile(mass, (10, 1))
    rows[:, deep] = 0.0
    rows[0, deep] = 50.0 * mass[deep]
    fake.density = rows.mean(axis=0) / w
    fake.batch_mass = rows
    slope, used = edge_exponent(fake, "min")
    assert used >= 10
    assert slope == pytest.approx(1.5, abs=0.02)
    naive, _ = edge_exponent(fake, "min", t_lo=float(fake.edges[1]))
    assert abs(naive - 1.5) > 0.05


def test_edge_exponent_basin_cap():
    # A tall shoulder above t = 0.31 stands in for the next van Hove level;
    # passing the basin depth keeps the window below thirty percent of it,
    # which excludes the shoulder bins and leaves the fit exact.
    fake = _power_law_hist(1.5)
    fake.density = fake.density + 100.0 * (fake.edges[1:] > 0.31)
    capped, used = edge_exponent(fake, "min", basin_depth=1.0)
    assert used >= 10
    assert capped == pytest.approx(1.5, abs=1e-6)
    default, used_default = edge_exponent(fake, "min")
    assert used < used_default
    assert abs(default - 1.5) > 5e-3
