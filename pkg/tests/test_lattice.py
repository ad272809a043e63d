"""Root system construction: counts, norms, frames, exact bases."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import root_system
from exlat.lattice import Family, LatticeSpec

ALL_TOKENS = ("A1", "A2", "A3", "A4", "D4", "D5", "D6", "E6", "E7", "E8")


@pytest.mark.parametrize("token,tau", [
    ("A1", 2), ("A2", 6), ("A3", 12), ("A4", 20), ("A7", 56),
    ("D4", 24), ("D5", 40), ("D8", 112),
    ("E6", 72), ("E7", 126), ("E8", 240),
])
def test_kissing_numbers(token, tau):
    assert LatticeSpec.parse(token).tau == tau


@pytest.mark.parametrize("token", ["B3", "E9", "E5", "D3", "D2", "A0", "F4",
                                   "", "8E", "Exx"])
def test_parse_rejects_bad_tokens(token):
    with pytest.raises(ValueError):
        LatticeSpec.parse(token)


@given(st.sampled_from([Family.A, Family.D, Family.E]), st.integers(1, 12))
def test_parse_round_trips_valid_labels(family, d):
    if family is Family.D and d < 4:
        return
    if family is Family.E and d not in (6, 7, 8):
        return
    spec = LatticeSpec(family, d)
    assert LatticeSpec.parse(spec.label) == spec


@pytest.mark.parametrize("token", ALL_TOKENS)
def test_roots_norm_count_negation(token):
    rs = root_system(token)
    assert len(rs.roots) == rs.tau
    norms = (rs.roots ** 2).sum(axis=1)
    assert (norms == 8).all()
    # Closed under negation, no duplicates.
    as_set = {tuple(r) for r in rs.roots}
    assert len(as_set) == rs.tau
    assert {tuple(-r) for r in rs.roots} == as_set


@pytest.mark.parametrize("token", ALL_TOKENS)
def test_root_angles_are_crystallographic(token):
    # Equal-length roots of a simply laced system meet only at angles with
    # dot products 0, +-4, +-8 in this scaling.
    rs = root_system(token)
    dots = rs.roots @ rs.roots.T
    assert set(np.unique(dots)) <= {-8, -4, 0, 4, 8}


@pytest.mark.parametrize("token", ALL_TOKENS)
def test_basis_is_integral_and_spans(token):
    rs = root_system(token)
    d = rs.rank
    assert rs.basis.shape == (d, rs.ambient_dim)
    assert rs.basis.dtype.kind == "i"
    # Integer coordinates reproduce the roots exactly, so the basis lattice
    # contains the root lattice; the frozen Gram determinants below pin the
    # covolume, which rules out a proper superlattice.
    assert rs.root_coords.dtype.kind == "i"
    assert (rs.root_coords @ rs.basis == rs.roots).all()


@pytest.mark.parametrize("token", ["A1", "A2", "A3", "D4", "D5", "E6"])
def test_basis_rows_are_roots_where_greedy_selection_works(token):
    # E7/E8 need non-root basis vectors (their greedy root spans hit an
    # index-2 sublattice), so this holds only for the other families.
    rs = root_system(token)
    root_set = {tuple(r) for r in rs.roots}
    assert all(tuple(b) in root_set for b in rs.basis)


@pytest.mark.parametrize("token,det", [
    ("A1", 8),
    ("A2", 48),
    ("D4", 1024),
    ("E6", 12288),
    ("E7", 32768),
    ("E8", 65536),
])
def test_gram_determinants(token, det):
    # Frozen independently: det of the exact integer Gram matrix, computed
    # with Fraction arithmetic when these bases were first constructed.
    rs = root_system(token)
    gram = rs.basis @ rs.basis.T
    assert (gram == rs.gram).all()
    assert rs.gram_det == det
    assert rs.covolume == pytest.approx(np.sqrt(det), rel=1e-14)


@pytest.mark.parametrize("token", ALL_TOKENS)
def test_reciprocal_duality(token):
    rs = root_system(token)
    d = rs.rank
    prod = rs.basis @ rs.reciprocal.T
    assert np.allclose(prod, 2 * np.pi * np.eye(d), atol=1e-10)
    assert rs.bz_volume == pytest.approx((2 * np.pi) ** d / rs.covolume,
                                         rel=1e-14)


@pytest.mark.parametrize("token", ALL_TOKENS)
def test_orthonormal_frame_spans_roots(token):
    rs = root_system(token)
    q = rs.orthonormal_frame()
    assert q.shape == (rs.ambient_dim, rs.rank)
    assert np.allclose(q.T @ q, np.eye(rs.rank), atol=1e-12)
    # The roots live entirely inside the frame's span.
    proj = q @ q.T
    assert np.allclose(rs.roots @ proj, rs.roots, atol=1e-9)


def test_e7_is_sum_zero_slice_of_e8():
    e8 = root_system("E8")
    e7 = root_system("E7")
    sums = e8.roots.sum(axis=1)
    expect = {tuple(r) for r in e8.roots[sums == 0]}
    assert {tuple(r) for r in e7.roots} == expect
    assert len(expect) == 126


def test_e6_is_equal_tail_slice_of_e8():
    e8 = root_system("E8")
    e6 = root_system("E6")
    tail = e8.roots[:, -3:]
    mask = (tail == tail[:, :1]).all(axis=1)
    expect = {tuple(r) for r in e8.roots[mask]}
    assert {tuple(r) for r in e6.roots} == expect
    assert len(expect) == 72
