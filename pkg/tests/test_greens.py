"""Green's function transform: exact piecewise logs, KK-style checks."""

import numpy as np
import pytest

from exlat.dos import sample_dos
from exlat.greens import greens_scan, im_g, re_g
from test_dos import small_cfg


def test_single_bin_matches_closed_form():
    # For a flat density on [-1, 1] the transform is (1/2) ln|(e+1)/(e-1)|.
    edges = np.array([-1.0, 1.0])
    density = np.array([0.5])
    e = np.array([-3.0, -1.5, 0.25, 2.0, 10.0])
    want = 0.5 * np.log(np.abs((e + 1) / (e - 1)))
    assert np.allclose(re_g(edges, density, e), want, atol=1e-12)


def test_linearity_in_the_density():
    rng = np.random.Generator(np.random.PCG64(2))
    edges = np.linspace(-2.0, 2.0, 41)
    rho1 = rng.random(40)
    rho2 = rng.random(40)
    e = np.linspace(-5.0, 5.0, 57)
    lhs = re_g(edges, 2.0 * rho1 - 0.5 * rho2, e)
    rhs = 2.0 * re_g(edges, rho1, e) - 0.5 * re_g(edges, rho2, e)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_delta_limit():
    # A narrowing unit-mass bin converges to the bare pole 1/(e - e0).
    e = np.array([2.0, -3.0, 0.5])
    for h in (1e-2, 1e-4):
        edges = np.array([-h, h])
        density = np.array([1.0 / (2 * h)])
        got = re_g(edges, density, e)
        assert np.allclose(got, 1.0 / e, atol=2 * h)
    # Quadratic convergence: the tighter bin is much closer.
    tight = re_g(np.array([-1e-4, 1e-4]), np.array([5e3]), e)
    assert np.max(np.abs(tight - 1.0 / e)) < 1e-7


def test_sign_below_support():
    rng = np.random.Generator(np.random.PCG64(3))
    edges = np.linspace(-1.0, 1.0, 21)
    density = rng.random(20) + 0.1
    below = np.array([-1.5, -2.0, -10.0])
    above = -below
    assert np.all(re_g(edges, density, below) < 0)
    assert np.all(re_g(edges, density, above) > 0)


def test_edge_evaluation_is_nudged_finite():
    edges = np.linspace(-1.0, 1.0, 21)
    density = np.ones(20) * 0.5
    vals = re_g(edges, density, edges.copy())
    assert np.all(np.isfinite(vals))


def test_im_g_reads_off_density():
    edges = np.array([0.0, 1.0, 3.0])
    density = np.array([0.25, 0.75])
    e = np.array([-1.0, 0.5, 2.0, 5.0])
    want = -np.pi * np.array([0.0, 0.25, 0.75, 0.0])
    assert np.allclose(im_g(edges, density, e), want, atol=1e-15)


def test_scan_on_sampled_histogram():
    hist = sample_dos(small_cfg("A2", n_samples=200000))
    e = np.linspace(hist.eps_min - 5.0, hist.eps_max + 5.0, 301)
    scan = greens_scan(hist, e)
    inside = (e > hist.eps_min) & (e < hist.eps_max)
    assert np.all(scan.im[inside] <= 0)
    assert np.all(scan.im[~inside] == 0)
    assert scan.re_err is not None
    assert np.all(np.isfinite(scan.re_err))
    assert np.all(scan.re_err >= 0)
    # Below the band the resolvent is strictly negative and approaches zero
    # from below as e goes far negative.
    far = re_g(hist.edges, hist.density, np.array([-100.0, -1000.0]))
    assert far[0] < far[1] < 0
