"""Root systems and lattice frames for the simply laced families A, D, E.

All roots are integer vectors in an ambient Z^N with squared length exactly 8:
A_d and D_d use the permutation representations of (-2, 2, 0, ...) and
(+-2, +-2, 0, ...), E8 uses the even-coordinate-sum model scaled by 2, and
E6 / E7 are carved out of the E8 root list by linear conditions.  Keeping
everything integral lets the basis extraction and reciprocal frame be computed
in exact rational arithmetic; floats only appear at the very end.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

__all__ = ["Family", "LatticeSpec", "RootSystem", "build_roots"]

ROOT_NORM_SQ = 8

_E_TAU = {6: 72, 7: 126, 8: 240}


class Family(str, Enum):
    A = "A"
    D = "D"
    E = "E"


@dataclass(frozen=True)
class LatticeSpec:
    """Which lattice: a family letter plus a rank.

    Valid ranks: A_d for d >= 1, D_d for d >= 4, E_d for d in {6, 7, 8}.
    """

    family: Family
    rank: int

    def __post_init__(self) -> None:
        d = self.rank
        fam = self.family
        if not isinstance(d, int):
            raise ValueError(f"rank must be an integer, got {d!r}")
        if fam == Family.A and d < 1:
            raise ValueError(f"A_d needs d >= 1, got d={d}")
        if fam == Family.D and d < 4:
            raise ValueError(f"D_d needs d >= 4, got d={d}")
        if fam == Family.E and d not in (6, 7, 8):
            raise ValueError(f"E_d exists for d in 6, 7, 8 only, got d={d}")

    @classmethod
    def parse(cls, token: str) -> "LatticeSpec":
        """Parse a label like 'E8', 'A3', 'D12' (case insensitive)."""
        t = token.strip()
        if len(t) < 2 or t[0].upper() not in ("A", "D", "E"):
            raise ValueError(f"unknown lattice token {token!r}")
        try:
            rank = int(t[1:])
        except ValueError:
            raise ValueError(f"unknown lattice token {token!r}") from None
        return cls(Family(t[0].upper()), rank)

    @property
    def tau(self) -> int:
        """Kissing number = number of roots."""
        d = self.rank
        if self.family == Family.A:
            return d * d + d
        if self.family == Family.D:
            return 2 * d * d - 2 * d
        return _E_TAU[d]

    @property
    def ambient_dim(self) -> int:
        if self.family == Family.A:
            return self.rank + 1
        if self.family == Family.D:
            return self.rank
        return 8

    @property
    def label(self) -> str:
        return f"{self.family.value}{self.rank}"

    def __str__(self) -> str:  # pragma: no cover
        return self.label


def _roots_a(d: int) -> list[tuple[int, ...]]:
    out = []
    for i in range(d + 1):
        for j in range(d + 1):
            if i == j:
                continue
            v = [0] * (d + 1)
            v[i] = -2
            v[j] = 2
            out.append(tuple(v))
    return out


def _roots_d(d: int) -> list[tuple[int, ...]]:
    out = []
    for i, j in itertools.combinations(range(d), 2):
        for si in (-2, 2):
            for sj in (-2, 2):
                v = [0] * d
                v[i] = si
                v[j] = sj
                out.append(tuple(v))
    return out


def _roots_e8() -> list[tuple[int, ...]]:
    out = _roots_d(8)
    for signs in itertools.product((-1, 1), repeat=8):
        if signs.count(-1) % 2 == 0:
            out.append(signs)
    return out


def _roots_e(d: int) -> list[tuple[int, ...]]:
    e8 = _roots_e8()
    if d == 8:
        return e8
    if d == 7:
        # Span orthogonal to (1,...,1): roots with zero coordinate sum.
        return [r for r in e8 if sum(r) == 0]
    # E6: additionally orthogonal to (0,...,0,1,-1) and (0,...,1,-1,0),
    # i.e. the last three coordinates are equal.
    return [r for r in e8 if r[5] == r[6] == r[7]]


def build_root_vectors(spec: LatticeSpec) -> np.ndarray:
    """All roots of the lattice as an (tau, N) int64 array, lexicographically sorted."""
    if spec.family == Family.A:
        vecs = _roots_a(spec.rank)
    elif spec.family == Family.D:
        vecs = _roots_d(spec.rank)
    else:
        vecs = _roots_e(spec.rank)
    vecs.sort()
    arr = np.array(vecs, dtype=np.int64)
    if arr.shape != (spec.tau, spec.ambient_dim):
        raise AssertionError(
            f"BUG: generated {arr.shape[0]} roots for {spec.label}, expected {spec.tau}"
        )
    return arr


# ---------------------------------------------------------------------------
# Exact rational linear algebra (tiny systems, d <= ambient <= rank+1)
# ---------------------------------------------------------------------------

def _frac_matrix(rows):
    return [[Fraction(x) for x in row] for row in rows]


def _frac_solve(a, rhs_cols):
    """Solve a X = rhs over the rationals by Gaussian elimination.

    a is n x n (list of Fraction rows), rhs_cols is n x m.  Returns X (n x m).
    """
    n = len(a)
    m = len(rhs_cols[0])
    aug = [list(a[i]) + list(rhs_cols[i]) for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular matrix in exact solve")
        if piv != col:
            aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:n + m] for row in aug]


def _frac_det(a) -> Fraction:
    n = len(a)
    mat = [list(row) for row in a]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if mat[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            mat[col], mat[piv] = mat[piv], mat[col]
            det = -det
        det *= mat[col][col]
        inv = mat[col][col]
        for r in range(col + 1, n):
            if mat[r][col] != 0:
                f = mat[r][col] / inv
                mat[r] = [x - f * y for x, y in zip(mat[r], mat[col])]
    return det


def _row_hnf(rows: list[list[int]]) -> list[list[int]]:
    """Hermite-style row reduction of an integer matrix.

    Returns a basis (list of rows) of the integer row span, upper triangular
    up to column permutation.  Plain Euclidean sweeps; sizes here are tiny.
    """
    mat = [list(r) for r in rows if any(r)]
    ncols = len(mat[0])
    basis: list[list[int]] = []
    col = 0
    while col < ncols and mat:
        live = [r for r in mat if r[col] != 0]
        if not live:
            col += 1
            continue
        # Euclidean reduction on this column.
        while True:
            live = [r for r in mat if r[col] != 0]
            if len(live) <= 1:
                break
            live.sort(key=lambda r: abs(r[col]))
            p = live[0]
            for r in live[1:]:
                q = r[col] // p[col]
                for k in range(ncols):
                    r[k] -= q * p[k]
            mat = [r for r in mat if any(r)]
        live = [r for r in mat if r[col] != 0]
        if live:
            p = live[0]
            if p[col] < 0:
                p[:] = [-x for x in p]
            basis.append(list(p))
            mat.remove(p)
        col += 1
    return basis


def _integer_coords_or_none(basis_rows, vecs) -> np.ndarray | None:
    """Coordinates of each vec in the given basis if all are integral, else None.

    basis_rows: d x N ints, vecs: (tau, N) ints.  Solves via the Gram matrix in
    exact arithmetic.
    """
    d = len(basis_rows)
    gram = [[sum(a * b for a, b in zip(r1, r2)) for r2 in basis_rows] for r1 in basis_rows]
    if _frac_det(_frac_matrix(gram)) == 0:
        return None
    bt = [[sum(int(basis_rows[i][k]) * int(v[k]) for k in range(len(v))) for v in vecs]
          for i in range(d)]
    coords = _frac_solve(_frac_matrix(gram), _frac_matrix(bt))
    out = np.empty((len(vecs), d), dtype=np.int64)
    for j in range(len(vecs)):
        for i in range(d):
            c = coords[i][j]
            if c.denominator != 1:
                return None
            out[j, i] = int(c)
    return out


def _choose_basis(spec: LatticeSpec, roots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pick an integral basis of the root lattice and express every root in it.

    First tries the greedy scan: walk the sorted root list and keep each root
    that enlarges the span.  That gives a genuine lattice basis for A_d, D_d
    and E6.  For E7/E8 the greedy d-tuple only spans an index-2 sublattice, so
    we fall back to a Hermite reduction of the whole root list expressed in the
    greedy frame, which is exact and always yields a true basis.
    """
    d = spec.rank
    greedy: list[list[int]] = []
    for r in roots:
        cand = greedy + [list(int(x) for x in r)]
        gram = [[sum(a * b for a, b in zip(u, v)) for v in cand] for u in cand]
        if _frac_det(_frac_matrix(gram)) != 0:
            greedy.append(cand[-1])
            if len(greedy) == d:
                break
    if len(greedy) != d:
        raise AssertionError(f"BUG: could not find {d} independent roots for {spec.label}")

    coords = _integer_coords_or_none(greedy, roots)
    if coords is not None:
        basis = np.array(greedy, dtype=np.int64)
        return basis, coords

    # Rational coordinates of all roots in the greedy frame, then HNF over the
    # integers after clearing denominators.
    gram = [[sum(a * b for a, b in zip(u, v)) for v in greedy] for u in greedy]
    bt = [[sum(int(greedy[i][k]) * int(v[k]) for k in range(len(v))) for v in roots]
          for i in range(d)]
    cf = _frac_solve(_frac_matrix(gram), _frac_matrix(bt))  # d x tau fractions
    denom = 1
    for row in cf:
        for x in row:
            denom = denom * x.denominator // np.gcd(denom, x.denominator)
    scaled = [[int(cf[i][j] * denom) for i in range(d)] for j in range(len(roots))]
    hnf = _row_hnf(scaled)
    if len(hnf) != d:
        raise AssertionError(f"BUG: HNF rank {len(hnf)} != {d} for {spec.label}")
    # New basis rows in ambient coordinates: (hnf/denom) . greedy, exact.
    new_basis = []
    for row in hnf:
        amb = [sum(Fraction(row[i], denom) * greedy[i][k] for i in range(d))
               for k in range(spec.ambient_dim)]
        if any(x.denominator != 1 for x in amb):
            raise AssertionError("BUG: HNF basis vector not integral in ambient coords")
        new_basis.append([int(x) for x in amb])
    coords = _integer_coords_or_none(new_basis, roots)
    if coords is None:
        raise AssertionError(f"BUG: HNF basis does not span the root lattice of {spec.label}")
    return np.array(new_basis, dtype=np.int64), coords


@dataclass(frozen=True)
class RootSystem:
    """A root lattice with its working frames.

    Attributes
    ----------
    spec : LatticeSpec
    roots : (tau, N) int64 array, lexicographically sorted, closed under negation.
    basis : (d, N) int64 array of primitive lattice vectors a_1..a_d.
    root_coords : (tau, d) int64 array, roots[i] = root_coords[i] @ basis.
    reciprocal : (d, N) float64 array, b_i with a_i . b_j = 2 pi delta_ij
        within the lattice span.
    gram : (d, d) int64 Gram matrix of the basis.
    gram_det : exact integer determinant of the Gram matrix.
    """

    spec: LatticeSpec
    roots: np.ndarray
    basis: np.ndarray
    root_coords: np.ndarray
    reciprocal: np.ndarray
    gram: np.ndarray
    gram_det: int

    @property
    def rank(self) -> int:
        return self.spec.rank

    @property
    def tau(self) -> int:
        return self.spec.tau

    @property
    def ambient_dim(self) -> int:
        return self.spec.ambient_dim

    @property
    def covolume(self) -> float:
        """Volume of the unit cell, sqrt(det Gram)."""
        return float(np.sqrt(float(self.gram_det)))

    @property
    def bz_volume(self) -> float:
        """Volume of the Brillouin zone, (2 pi)^d / covolume."""
        return float((2.0 * np.pi) ** self.rank / self.covolume)

    def frac_to_cartesian(self, u: np.ndarray) -> np.ndarray:
        """Map fractional momenta u (in units of the reciprocal basis) to ambient k.

        k = sum_i u_i b_i; accepts (..., d) arrays.
        """
        return np.asarray(u, dtype=float) @ self.reciprocal

    def orthonormal_frame(self) -> np.ndarray:
        """(N, d) matrix with orthonormal columns spanning the lattice span.

        Deterministic: QR of basis^T with the R diagonal made positive.
        """
        q, r = np.linalg.qr(self.basis.astype(float).T)
        sign = np.sign(np.diag(r))
        sign[sign == 0] = 1.0
        return q * sign

    def span_projector(self) -> np.ndarray:
        """Orthogonal projector of the ambient space onto the lattice span."""
        q = self.orthonormal_frame()
        return q @ q.T


def build_roots(spec: LatticeSpec) -> RootSystem:
    """Construct the full root system with validated frames.

    Raises AssertionError if any structural invariant fails; these are bugs,
    not user errors.
    """
    roots = build_root_vectors(spec)
    tau, n = roots.shape

    norms = (roots * roots).sum(axis=1)
    if not np.all(norms == ROOT_NORM_SQ):
        raise AssertionError(f"BUG: {spec.label} roots not all of squared length {ROOT_NORM_SQ}")
    # Closed under negation, no duplicates.
    as_set = {tuple(int(x) for x in r) for r in roots}
    if len(as_set) != tau:
        raise AssertionError(f"BUG: duplicate roots for {spec.label}")
    for r in roots:
        if tuple(-int(x) for x in r) not in as_set:
            raise AssertionError(f"BUG: {spec.label} roots not closed under negation")

    basis, coords = _choose_basis(spec, roots)
    if not np.array_equal(coords @ basis, roots):
        raise AssertionError(f"BUG: root coordinates inconsistent for {spec.label}")

    gram_rows = [[int((basis[i] * basis[j]).sum()) for j in range(spec.rank)]
                 for i in range(spec.rank)]
    gram = np.array(gram_rows, dtype=np.int64)
    det = _frac_det(_frac_matrix(gram_rows))
    if det.denominator != 1 or det <= 0:
        raise AssertionError(f"BUG: bad Gram determinant {det} for {spec.label}")

    # Reciprocal frame: b = 2 pi G^{-1} A, exact rationals then one float cast.
    inv_cols = _frac_solve(_frac_matrix(gram_rows),
                           [[Fraction(int(x)) for x in row] for row in basis])
    reciprocal = 2.0 * np.pi * np.array([[float(x) for x in row] for row in inv_cols])

    return RootSystem(
        spec=spec,
        roots=roots,
        basis=basis,
        root_coords=coords,
        reciprocal=reciprocal,
        gram=gram,
        gram_det=int(det),
    )
