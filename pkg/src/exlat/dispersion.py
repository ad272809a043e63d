"""Tight-binding dispersion on a root lattice.

Momenta are handled in fractional coordinates u in [0,1)^d of the reciprocal
basis, so every lattice works the same way regardless of its ambient embedding:

    eps(u)  = -2 sum_pairs cos(2 pi c . u)
    grad    =  4 pi   sum_pairs c       sin(2 pi c . u)
    hess    =  8 pi^2 sum_pairs c c^T   cos(2 pi c . u)

where c runs over one integer coordinate vector per +-root pair.  eps(0) is
exactly -tau.  Everything is exactly periodic with period 1 in each u_i
because the evaluators reduce u mod 1 on entry.

The batched `fast_energies` route regroups the cosine sum per family (power
sums and sign products in ambient cartesian coordinates), which cuts the trig
count per sample by an order of magnitude.  It is checked against the generic
route in the tests and used by the samplers.
"""

from __future__ import annotations

import numpy as np

from .lattice import Family, RootSystem

__all__ = ["Dispersion"]

TWO_PI = 2.0 * np.pi


def _pair_frequencies(root_coords: np.ndarray) -> np.ndarray:
    """One representative per +-pair of root coordinate vectors, lex sorted."""
    reps = set()
    for c in root_coords:
        t = tuple(int(x) for x in c)
        neg = tuple(-x for x in t)
        reps.add(max(t, neg))
    out = np.array(sorted(reps), dtype=np.int64)
    if 2 * out.shape[0] != root_coords.shape[0]:
        raise AssertionError("BUG: root coordinates not closed under negation")
    return out


class Dispersion:
    """Energy, gradient and Hessian of eps(u) for one root system."""

    def __init__(self, rs: RootSystem):
        self.rs = rs
        self.freqs = _pair_frequencies(rs.root_coords)  # (P, d) int64
        self._freqs_f = self.freqs.astype(float)
        self._cc = self._freqs_f[:, :, None] * self._freqs_f[:, None, :]  # (P, d, d)
        # Fractional from cartesian-span jacobian, u = jac @ y.
        self.jac = rs.basis.astype(float) @ rs.orthonormal_frame() / TWO_PI

    @property
    def rank(self) -> int:
        return self.rs.rank

    # ------------------------------------------------------------------
    # Generic frequency-table route
    # ------------------------------------------------------------------

    def energies(self, u: np.ndarray) -> np.ndarray:
        """eps for a batch of fractional momenta, shape (..., d) -> (...)."""
        u = np.asarray(u, dtype=float) % 1.0
        ph = TWO_PI * (u @ self._freqs_f.T)
        return -2.0 * np.cos(ph).sum(axis=-1)

    def energy(self, u: np.ndarray) -> float:
        return float(self.energies(np.atleast_2d(u))[0])

    def gradients(self, u: np.ndarray) -> np.ndarray:
        """grad eps, shape (..., d) -> (..., d)."""
        u = np.asarray(u, dtype=float) % 1.0
        ph = TWO_PI * (u @ self._freqs_f.T)
        return 4.0 * np.pi * (np.sin(ph) @ self._freqs_f)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return self.gradients(np.atleast_2d(u))[0]

    def hessians(self, u: np.ndarray) -> np.ndarray:
        """Hessian in fractional coordinates, shape (..., d) -> (..., d, d)."""
        u = np.asarray(u, dtype=float) % 1.0
        ph = TWO_PI * (u @ self._freqs_f.T)
        c = np.cos(ph)
        h = np.tensordot(c, self._cc, axes=([-1], [0]))
        return 8.0 * np.pi ** 2 * h

    def hessian(self, u: np.ndarray) -> np.ndarray:
        return self.hessians(np.atleast_2d(u))[0]

    def cartesian_hessians(self, u: np.ndarray) -> np.ndarray:
        """Hessian with respect to cartesian momentum in an orthonormal span frame.

        H_k = J^T H_u J with J = d u / d k restricted to the span; at u = 0 this
        equals (8 tau / d) I by the isotropy of the root shell.
        """
        hu = self.hessians(u)
        return self.jac.T @ hu @ self.jac

    def cartesian_hessian(self, u: np.ndarray) -> np.ndarray:
        return self.cartesian_hessians(np.atleast_2d(u))[0]

    # ------------------------------------------------------------------
    # Regrouped per-family route (used in the sampler hot loops)
    # ------------------------------------------------------------------

    def fast_energies(self, u: np.ndarray) -> np.ndarray:
        """Same values as `energies` via per-family trig identities.

        Agreement with the generic route is part of the test suite; both
        reduce u mod 1 first, so the two only differ by regrouped float
        summation (about 1e-12 tau).
        """
        u = np.atleast_2d(np.asarray(u, dtype=float)) % 1.0
        k = u @ self.rs.reciprocal  # ambient cartesian momenta
        fam = self.rs.spec.family
        d = self.rank
        if fam == Family.A:
            return self._eps_a(k)
        if fam == Family.D:
            return self._eps_d(k)
        if d == 8:
            return self._eps_e8(k)
        if d == 7:
            return self._eps_e7(k)
        return self._eps_e6(k)

    @staticmethod
    def _eps_a(k: np.ndarray) -> np.ndarray:
        # roots 2(e_j - e_i), i != j: sum_roots e^{i a.k} = |sum_j e^{2ik_j}|^2 - (d+1)
        c = np.cos(2.0 * k)
        s = np.sin(2.0 * k)
        return -(c.sum(axis=-1) ** 2 + s.sum(axis=-1) ** 2 - k.shape[-1])

    @staticmethod
    def _eps_d(k: np.ndarray) -> np.ndarray:
        # roots (+-2, +-2) at positions i<j: sum = 2[(sum cos 2k)^2 - sum cos^2 2k]
        c = np.cos(2.0 * k)
        return -2.0 * (c.sum(axis=-1) ** 2 - (c * c).sum(axis=-1))

    @staticmethod
    def _eps_e8(k: np.ndarray) -> np.ndarray:
        c1 = np.cos(k)
        s1 = np.sin(k)
        c2 = c1 * c1 - s1 * s1
        shell_d8 = 2.0 * (c2.sum(axis=-1) ** 2 - (c2 * c2).sum(axis=-1))
        shell_spinor = 128.0 * (c1.prod(axis=-1) + s1.prod(axis=-1))
        return -(shell_d8 + shell_spinor)

    @staticmethod
    def _eps_e7(k: np.ndarray) -> np.ndarray:
        # Roots of E8 with zero coordinate sum: the (+-2,+-2) shell restricted to
        # opposite signs gives |sum_j e^{2ik_j}|^2 - 8; the balanced-sign spinor
        # shell is e^{-i sum k} e_4(w), w_j = e^{2ik_j}, via Newton's identities.
        c1 = np.cos(k)
        s1 = np.sin(k)
        w = (c1 * c1 - s1 * s1) + 1j * (2.0 * c1 * s1)
        p1 = w.sum(axis=-1)
        w2 = w * w
        p2 = w2.sum(axis=-1)
        w3 = w2 * w
        p3 = w3.sum(axis=-1)
        p4 = (w3 * w).sum(axis=-1)
        e1 = p1
        e2 = (e1 * p1 - p2) / 2.0
        e3 = (e2 * p1 - e1 * p2 + p3) / 3.0
        e4 = (e3 * p1 - e2 * p2 + e1 * p3 - p4) / 4.0
        ksum = k.sum(axis=-1)
        spinor = np.cos(ksum) * e4.real + np.sin(ksum) * e4.imag  # Re[e^{-i ksum} e4]
        shell_a7 = p1.real ** 2 + p1.imag ** 2 - 8.0
        return -(shell_a7 + spinor)

    @staticmethod
    def _eps_e6(k: np.ndarray) -> np.ndarray:
        # Roots of E8 whose last three coordinates are equal.  (+-2,+-2) pairs
        # live in the first five slots; the spinor shell collapses to
        # 32[cos(K) prod cos k_i - sin(K) prod sin k_i] with K = k_5+k_6+k_7.
        kk = k[..., :5]
        c1 = np.cos(kk)
        s1 = np.sin(kk)
        c2 = c1 * c1 - s1 * s1
        shell_d5 = 2.0 * (c2.sum(axis=-1) ** 2 - (c2 * c2).sum(axis=-1))
        bigk = k[..., 5] + k[..., 6] + k[..., 7]
        spinor = 32.0 * (np.cos(bigk) * c1.prod(axis=-1) - np.sin(bigk) * s1.prod(axis=-1))
        return -(shell_d5 + spinor)
