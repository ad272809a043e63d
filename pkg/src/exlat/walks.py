"""Exact closed-walk counts on a root lattice.

W_n is the number of length-n nearest-neighbor walks that return to the
origin.  The counter runs a dynamic program for the reachable-site counts
N_m(v) in integer lattice coordinates, encoded as packed int64 keys, and
closes walks by meet-in-the-middle:

    W_(a+b) = sum_v N_a(v) N_b(v)

using N_b(-v) = N_b(v) (the root set is symmetric).  This needs tables only
up to m = ceil(n/2), which is what makes n = 8 on 240 neighbors cheap.  All
per-level counts are held in int64 with explicit overflow guards; the final
contractions are summed into Python integers, so the results are exact.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .lattice import LatticeSpec, RootSystem, build_roots

__all__ = ["WalkTable", "walk_counts", "walk_counts_multinomial",
           "moments_check"]

_INT64_GUARD = 2 ** 62


@dataclasses.dataclass(frozen=True)
class WalkTable:
    """Closed-walk counts W_0..W_nmax for one lattice."""

    lattice: str
    counts: list

    def __post_init__(self):
        c = self.counts
        if c[0] != 1 or (len(c) > 1 and c[1] != 0):
            raise ValueError("walk table must start 1, 0")
        if any(w % 2 for w in c[2:]):
            raise ValueError("counts beyond W_1 must be even")

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, n):
        return self.counts[n]


def _packing(root_coords: np.ndarray, n_steps: int):
    """Mixed-radix packing of lattice coordinates reachable in <= n_steps."""
    half = np.abs(root_coords).max(axis=0).astype(np.int64)  # per-axis step bound
    span = 2 * n_steps * half + 1
    if np.prod(span.astype(object)) >= _INT64_GUARD:
        raise OverflowError("coordinate box too large for int64 packing")
    strides = np.ones_like(span)
    strides[1:] = np.cumprod(span[:-1])
    return root_coords.astype(np.int64) @ strides


def _accumulate(keys: np.ndarray, counts: np.ndarray):
    """Sum counts over duplicate keys; returns sorted unique keys and totals."""
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    counts = counts[order]
    edge = np.concatenate([[True], keys[1:] != keys[:-1]])
    uk = keys[edge]
    totals = np.add.reduceat(counts, np.nonzero(edge)[0])
    return uk, totals


def _advance(keys: np.ndarray, counts: np.ndarray, step_keys: np.ndarray,
             chunk_rows: int = 100_000):
    """One DP level: spread every site over all tau steps and re-aggregate.

    Chunked over source sites to bound the transient key array; each chunk is
    aggregated and merged into the running level immediately.
    """
    tau = len(step_keys)
    if counts.max(initial=0) * tau >= _INT64_GUARD:
        raise OverflowError("walk counts would overflow int64; reduce n")
    out_k = np.empty(0, dtype=np.int64)
    out_c = np.empty(0, dtype=np.int64)
    for s in range(0, len(keys), chunk_rows):
        k = (keys[s:s + chunk_rows, None] + step_keys[None, :]).ravel()
        c = np.repeat(counts[s:s + chunk_rows], tau)
        uk, uc = _accumulate(k, c)
        out_k, out_c = _accumulate(np.concatenate([out_k, uk]),
                                   np.concatenate([out_c, uc]))
    return out_k, out_c


def _contract(a_keys, a_counts, b_keys, b_counts) -> int:
    """sum_v N_a(v) N_b(v) over the common support, exactly."""
    common, ia, ib = np.intersect1d(a_keys, b_keys, assume_unique=True,
                                    return_indices=True)
    if len(common) == 0:
        return 0
    ca = a_counts[ia]
    cb = b_counts[ib]
    # Products are nonnegative, so if the float estimate of the total is
    # comfortably inside int64 every partial sum is too; otherwise fall back
    # to Python integers.
    est = float(np.dot(ca.astype(float), cb.astype(float)))
    if est < 2e18:
        return int(np.dot(ca, cb))
    return sum(int(x) * int(y) for x, y in zip(ca.tolist(), cb.tolist()))


def _as_root_system(lattice: str | RootSystem) -> RootSystem:
    if isinstance(lattice, RootSystem):
        return lattice
    return build_roots(LatticeSpec.parse(lattice))


def walk_counts(lattice: str | RootSystem, n_max: int) -> WalkTable:
    """Exact W_0..W_n_max for the given lattice.

    Builds site-count tables to ceil(n_max/2) levels and closes each W_n by
    the level pair (ceil(n/2), floor(n/2)).
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    rs = _as_root_system(lattice)
    half = (n_max + 1) // 2
    if half == 0:
        return WalkTable(rs.spec.label, [1])
    step_keys = np.sort(_packing(rs.root_coords, max(half, 1)))

    levels = [(np.zeros(1, dtype=np.int64), np.ones(1, dtype=np.int64))]  # N_0
    for _ in range(half):
        levels.append(_advance(*levels[-1], step_keys))

    out = []
    for n in range(n_max + 1):
        a, b = (n + 1) // 2, n // 2
        out.append(_contract(*levels[a], *levels[b]))
    return WalkTable(rs.spec.label, out)


def walk_counts_multinomial(lattice: str | RootSystem, n: int) -> int:
    """W_n as a constrained multinomial sum; independent oracle for small n.

    Enumerates step multisets with zero vector sum as nondecreasing index
    tuples, resolving the final index through a key lookup, and adds the
    multinomial coefficient n!/prod(m_j!) of each multiset.  The term count
    grows like tau^(n-1)/(n-1)!, so this route refuses n > 4.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > 4:
        raise ValueError(
            "multinomial enumeration is limited to n <= 4; term count "
            "explodes beyond that, use walk_counts instead")
    if n < 2:
        return 1 - n  # W_0 = 1 and W_1 = 0: no single root sums to zero
    rs = _as_root_system(lattice)
    tau = rs.tau
    keys = np.sort(_packing(rs.root_coords, max(n, 1)))

    def last_index(need: np.ndarray, at_least: np.ndarray):
        """Index of the root with packed key `need`, or -1 if absent."""
        pos = np.searchsorted(keys, need).clip(0, tau - 1)
        found = np.where(keys[pos] == need, pos, -1)
        return np.where(found >= at_least, found, -1)

    total = 0
    if n == 2:
        # Multisets {j, l} with c_l = -c_j; weight 2 each, or 1 if l = j
        # (impossible here since no root is its own negative).
        js = np.arange(tau)
        ls = last_index(-keys, js)
        total = int(2 * (ls >= 0).sum())
    elif n == 3:
        for i in range(tau):
            js = np.arange(i, tau)
            ls = last_index(-(keys[i] + keys[js]), js)
            ok = ls >= 0
            pair_i = (js[ok] == i)
            pair_l = (ls[ok] == js[ok])
            weight = np.where(pair_i & pair_l, 1, np.where(pair_i | pair_l, 3, 6))
            total += int(weight.sum())
    else:
        # Runs among the sorted indices (i, j, k, l) decide the coefficient
        # 24/prod(run length factorials); three equality bits index it.
        factor = np.array([24, 12, 12, 4, 12, 6, 4, 1])
        for i in range(tau):
            for j in range(i, tau):
                ks = np.arange(j, tau)
                ls = last_index(-(keys[i] + keys[j] + keys[ks]), ks)
                ok = ls >= 0
                pattern = (4 * int(i == j) + 2 * (ks[ok] == j)
                           + (ls[ok] == ks[ok]))
                total += int(factor[pattern].sum())
    return total


def moments_check(table: WalkTable, hist) -> np.ndarray:
    """Signed relative errors of histogram energy moments against the table.

    Entry n compares the n-th moment of the sampled density with the exact
    value (-1)^n W_n.
    """
    from .dos import moment

    errors = np.empty(len(table))
    for n in range(len(table)):
        want = (-1) ** n * table[n]
        got = moment(hist, n)
        errors[n] = (got - want) / max(abs(want), 1)
    return errors
