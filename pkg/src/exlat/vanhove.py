"""Critical points of the dispersion and the Van Hove catalog.

Strategy: many random starts, each driven to a zero of the gradient by a
batched Levenberg-Marquardt iteration on |grad eps|^2 (the Hessian of eps is
the exact Jacobian of the residual), then a few pseudo-inverse Newton steps
in the orthonormal cartesian frame to polish.  The pseudo-inverse cutoff
makes the polish well behaved on degenerate critical manifolds, where the
Hessian has exact zero modes along the manifold.

Classification uses the cartesian Hessian signature (n_down, n_zero, n_up)
with a relative zero threshold; classes are keyed by energy cluster plus
signature, and multiplicities count distinct converged positions per
reciprocal unit cell (mod 1), inversion images included as separate points.
Degenerate classes get multiplicity None, a point count being meaningless
for a continuum of critical points.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gamma as _gamma_fn

from .dispersion import Dispersion
from .lattice import Family, LatticeSpec

__all__ = [
    "CriticalPoint",
    "VanHoveCatalog",
    "find_critical_points",
    "band_top",
    "exact_band_top",
    "tail_coefficient",
]

GRAD_TOL = 1e-9          # max |grad eps| (cartesian, inf-norm) to accept a point
ENERGY_CLUSTER_TOL = 1e-8
POSITION_TOL = 1e-6
HESS_ZERO_REL = 1e-6
MAX_LM_ITER = 120
POLISH_STEPS = 5


@dataclass
class CriticalPoint:
    """One symmetry class of critical points."""

    energy: float
    u: np.ndarray                 # representative position, fractional, mod 1
    n_down: int
    n_zero: int
    n_up: int
    degenerate: bool
    multiplicity: int | None      # distinct positions per unit cell; None if degenerate
    grad_norm: float
    hess_eigs: np.ndarray = field(repr=False)

    @property
    def signature(self) -> tuple[int, int]:
        return (self.n_down, self.n_up)

    @property
    def index(self) -> int:
        return self.n_down


@dataclass
class VanHoveCatalog:
    lattice: str
    classes: list[CriticalPoint]
    eps_min: float
    eps_max: float
    n_starts: int
    seed: int

    @property
    def gamma(self) -> float:
        """Band asymmetry tau / eps_max."""
        return -self.eps_min / self.eps_max

    @property
    def gamma_exact(self) -> int | None:
        g = self.gamma
        r = round(g)
        return r if abs(g - r) < 1e-9 * max(1.0, abs(g)) else None


def exact_band_top(spec: LatticeSpec) -> float | None:
    """Closed-form band maximum where one is known.

    A_d: the d+1 unit phasors e^{2ik_j} can cancel, so eps_max = d + 1.
    D_d: maximize 2[sum c_i^2 - (sum c_i)^2] over c_i in [-1,1]: alternating
    signs give 2d for even d and 2(d-1) for odd d.  No closed form is wired
    for the E family; use the search.
    """
    if spec.family == Family.A:
        return float(spec.rank + 1)
    if spec.family == Family.D:
        d = spec.rank
        return float(2 * d if d % 2 == 0 else 2 * (d - 1))
    return None


# ---------------------------------------------------------------------------
# Batched solvers
# ---------------------------------------------------------------------------

def _lm_converge(disp: Dispersion, u0: np.ndarray, max_iter: int = MAX_LM_ITER):
    """Drive each row of u0 to a critical point of eps; returns polished u."""
    u = u0 % 1.0
    m, d = u.shape
    lam = np.full(m, 1e-2)
    g = disp.gradients(u)
    h = disp.hessians(u)
    f = (g * g).sum(axis=1)
    eye = np.eye(d)
    # Work in the fractional frame; the gradient scale there is O(tau).
    ftol = (1e-12 * max(1.0, disp.rs.tau)) ** 2
    active = np.arange(m)
    for _ in range(max_iter):
        if len(active) == 0:
            break
        ua, ga, ha, la = u[active], g[active], h[active], lam[active]
        hh = ha @ ha
        # Damping relative to the local curvature scale keeps the solve
        # nonsingular without drowning the Newton step.
        scale = np.maximum(np.trace(hh, axis1=1, axis2=2) / d, 1e-30)
        a_mat = hh + (la * scale)[:, None, None] * eye
        rhs = -np.einsum("mij,mj->mi", ha, ga)
        delta = np.linalg.solve(a_mat, rhs[..., None])[..., 0]
        u_try = (ua + delta) % 1.0
        g_try = disp.gradients(u_try)
        f_try = (g_try * g_try).sum(axis=1)
        better = f_try < f[active]
        idx_b = active[better]
        u[idx_b] = u_try[better]
        g[idx_b] = g_try[better]
        h[idx_b] = disp.hessians(u_try[better])
        f[idx_b] = f_try[better]
        lam[idx_b] = np.maximum(lam[idx_b] / 3.0, 1e-14)
        idx_w = active[~better]
        lam[idx_w] = np.minimum(lam[idx_w] * 7.0, 1e12)
        active = active[(f[active] > ftol) & (lam[active] < 1e11)]
    return u


def _polish(disp: Dispersion, u: np.ndarray, steps: int = POLISH_STEPS) -> np.ndarray:
    """Pseudo-inverse Newton in the cartesian frame; safe on flat directions."""
    jac = disp.jac
    for _ in range(steps):
        g = disp.gradients(u)
        hy = disp.cartesian_hessians(u)
        gy = g @ jac  # grad wrt cartesian momentum: J^T grad_u, rows
        vals, vecs = np.linalg.eigh(hy)
        cut = HESS_ZERO_REL * np.abs(vals).max(axis=1, keepdims=True)
        inv = np.where(np.abs(vals) > cut, 1.0 / np.where(vals == 0, 1.0, vals), 0.0)
        gy_r = np.einsum("mji,mj->mi", vecs, gy)
        dy = -np.einsum("mij,mj->mi", vecs, inv * gy_r)
        u = (u + dy @ jac.T) % 1.0
    return u


def _ascend(disp: Dispersion, u0: np.ndarray, sign: float = 1.0,
            max_iter: int = 400) -> np.ndarray:
    """Adaptive-step gradient ascent (sign=+1) or descent (sign=-1)."""
    u = u0 % 1.0
    m, d = u.shape
    step = np.full(m, 0.05)
    eps = disp.energies(u)
    for _ in range(max_iter):
        g = disp.gradients(u)
        gn = np.linalg.norm(g, axis=1)
        gn = np.where(gn > 0, gn, 1.0)
        u_try = (u + sign * step[:, None] * g / gn[:, None]) % 1.0
        e_try = disp.energies(u_try)
        better = sign * (e_try - eps) > 0
        u[better] = u_try[better]
        eps[better] = e_try[better]
        step[better] *= 1.6
        step[~better] *= 0.5
        if step.max() < 1e-12:
            break
        np.clip(step, 1e-14, 0.25, out=step)
    return u


def band_top(disp: Dispersion, n_starts: int = 20000, seed: int = 0,
             chunk: int = 20000) -> tuple[float, np.ndarray]:
    """Global band maximum by multistart ascent plus Newton polish."""
    rng = np.random.Generator(np.random.PCG64(seed))
    best_e = -np.inf
    best_u = None
    d = disp.rank
    for start in range(0, n_starts, chunk):
        u0 = rng.random((min(chunk, n_starts - start), d))
        u = _ascend(disp, u0, sign=1.0)
        u = _polish(disp, u)
        e = disp.energies(u)
        j = int(np.argmax(e))
        if e[j] > best_e:
            best_e = float(e[j])
            best_u = u[j].copy()
    return best_e, best_u


# ---------------------------------------------------------------------------
# Catalog assembly
# ---------------------------------------------------------------------------

def _position_keys(u: np.ndarray) -> np.ndarray:
    """Integer keys identifying positions mod 1 at POSITION_TOL resolution."""
    n = int(round(1.0 / POSITION_TOL))
    k = np.round(u / POSITION_TOL).astype(np.int64) % n
    mult = n ** np.arange(u.shape[1], dtype=object)
    # Object dtype keeps the mixed-radix key exact for d up to 8.
    return (k.astype(object) * mult).sum(axis=1)


def _extremum_scan(disp: Dispersion, rng, n_starts: int, sign: float,
                   grad_tol: float, chunk: int):
    """Monotone pass over the band extremum in the given direction.

    Ascent (sign=+1) or descent (sign=-1) sends every start to some extremum
    basin, so the position count saturates with far fewer starts than the
    general critical-point search, whose starts spread over all classes.
    Only points converged below grad_tol count, which keeps position keys
    sharp.  Returns the extremal energy, the best-converged representative,
    and the set of distinct position keys at that energy.
    """
    d = disp.rank
    jac = disp.jac
    es, us, gs = [], [], []
    for start in range(0, n_starts, chunk):
        u0 = rng.random((min(chunk, n_starts - start), d))
        u = _polish(disp, _ascend(disp, u0, sign=sign))
        es.append(disp.energies(u))
        us.append(u)
        gs.append(np.abs(disp.gradients(u) @ jac).max(axis=1))
    e = np.concatenate(es)
    u = np.vstack(us)
    gy = np.concatenate(gs)
    conv = gy <= grad_tol
    if not conv.any():
        raise RuntimeError("no extremum candidates converged; raise n_starts")
    e_ext = float(sign * (sign * e[conv]).max())
    sel = conv & (np.abs(e - e_ext) <= 1e-6)
    rep = np.flatnonzero(sel)[int(np.argmin(gy[sel]))]
    return e_ext, u[rep].copy(), set(_position_keys(u[sel]))


def band_extrema(disp: Dispersion, n_starts: int = 20000, seed: int = 0,
                 chunk: int = 20000) -> tuple[CriticalPoint, CriticalPoint]:
    """Refined band minimum and maximum without a full catalog sweep.

    Runs one descent and one ascent pass, classifies the Hessian at the
    best representative of each extremum, and counts distinct positions.
    Degenerate extrema get multiplicity None, as in the full catalog.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for sign in (-1.0, 1.0):
        e_ext, u_rep, keys = _extremum_scan(disp, rng, n_starts, sign,
                                            GRAD_TOL, chunk)
        vals = np.linalg.eigvalsh(disp.cartesian_hessian(u_rep))
        cut = HESS_ZERO_REL * np.abs(vals).max()
        nz = int((np.abs(vals) <= cut).sum())
        gy = float(np.abs(disp.gradient(u_rep) @ disp.jac).max())
        out.append(CriticalPoint(
            energy=e_ext,
            u=u_rep,
            n_down=int((vals < -cut).sum()), n_zero=nz,
            n_up=int((vals > cut).sum()),
            degenerate=nz > 0,
            multiplicity=None if nz > 0 else len(keys),
            grad_norm=gy,
            hess_eigs=vals,
        ))
    return out[0], out[1]


def find_critical_points(disp: Dispersion, n_starts: int = 100000, seed: int = 0,
                         grad_tol: float = GRAD_TOL,
                         chunk: int = 20000) -> VanHoveCatalog:
    """Multistart search for every critical class of the dispersion.

    Converged points with cartesian gradient below grad_tol are classified by
    Hessian signature, clustered in energy, and deduplicated by position.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    d = disp.rank
    jac = disp.jac
    us = []
    for start in range(0, n_starts, chunk):
        u0 = rng.random((min(chunk, n_starts - start), d))
        u = _lm_converge(disp, u0)
        u = _polish(disp, u)
        us.append(u)
    u = np.vstack(us)

    gy = disp.gradients(u) @ jac
    ok = np.abs(gy).max(axis=1) <= grad_tol
    u = u[ok]
    if len(u) == 0:
        raise RuntimeError("no critical points converged; raise n_starts")

    e = disp.energies(u)
    hy = disp.cartesian_hessians(u)
    vals = np.linalg.eigh(hy)[0]
    cut = HESS_ZERO_REL * np.abs(vals).max(axis=1, keepdims=True)
    n_zero = (np.abs(vals) <= cut).sum(axis=1)
    n_down = (vals < -cut).sum(axis=1)
    n_up = (vals > cut).sum(axis=1)

    order = np.argsort(e, kind="stable")
    e, u, vals = e[order], u[order], vals[order]
    n_zero, n_down, n_up = n_zero[order], n_down[order], n_up[order]
    gy = np.abs(disp.gradients(u) @ jac).max(axis=1)

    # Energy clusters: split the sorted energies at gaps above the tolerance.
    breaks = np.nonzero(np.diff(e) > ENERGY_CLUSTER_TOL)[0] + 1
    groups = np.split(np.arange(len(e)), breaks)

    classes: list[CriticalPoint] = []
    class_keys: dict[int, set] = {}
    for grp in groups:
        # A degenerate critical set is a manifold along which the transverse
        # spectrum varies, so all degenerate points at one energy are one
        # class; its signature is read off the maximally degenerate stratum.
        deg = [i for i in grp if n_zero[i] > 0]
        if deg:
            deg = np.array(deg)
            best = deg[np.lexsort((gy[deg], -n_zero[deg]))[0]]
            classes.append(CriticalPoint(
                energy=float(np.median(e[deg])),
                u=u[best].copy(),
                n_down=int(n_down[best]), n_zero=int(n_zero[best]),
                n_up=int(n_up[best]),
                degenerate=True, multiplicity=None,
                grad_norm=float(gy[best]),
                hess_eigs=vals[best].copy(),
            ))
        sigs = {}
        for i in grp:
            if n_zero[i] > 0:
                continue
            sigs.setdefault((int(n_down[i]), int(n_up[i])), []).append(i)
        for (nd, nu), members in sorted(sigs.items()):
            members = np.array(members)
            rep = members[int(np.argmin(gy[members]))]
            keys = set(_position_keys(u[members]))
            class_keys[len(classes)] = keys
            classes.append(CriticalPoint(
                energy=float(np.median(e[members])),
                u=u[rep].copy(),
                n_down=nd, n_zero=0, n_up=nu,
                degenerate=False,
                multiplicity=len(keys),
                grad_norm=float(gy[rep]),
                hess_eigs=vals[rep].copy(),
            ))

    order2 = sorted(range(len(classes)),
                    key=lambda i: (classes[i].energy, classes[i].n_down))
    classes = [classes[i] for i in order2]
    class_keys = {order2.index(i): k for i, k in class_keys.items()}
    tau = disp.rs.tau
    bot_idx = [i for i, c in enumerate(classes)
               if c.n_down == 0 and not c.degenerate]
    # The band top may itself be a degenerate manifold (A_3, D_5, ...), so the
    # top class is any class with no upward direction.
    top_idx = [i for i, c in enumerate(classes) if c.n_up == 0]
    if not bot_idx or abs(classes[bot_idx[0]].energy + tau) > 1e-6:
        raise RuntimeError("catalog is missing the band minimum; raise n_starts")
    if not top_idx:
        raise RuntimeError("catalog is missing the band maximum; raise n_starts")
    top_i = max(top_idx, key=lambda i: classes[i].energy)

    # The random-start search splits its budget across every class, so the
    # extremum multiplicities saturate slowly.  Refine them with dedicated
    # monotone passes and merge the discovered positions.
    for i, sign in ((bot_idx[0], -1.0), (top_i, 1.0)):
        cls = classes[i]
        if cls.degenerate:
            continue
        e_ext, _, found = _extremum_scan(disp, rng, n_starts, sign,
                                         grad_tol, chunk)
        if abs(e_ext - cls.energy) > 1e-6:
            raise RuntimeError(
                "extremum scan reached an energy outside the catalog; "
                "raise n_starts")
        classes[i] = replace(cls, multiplicity=len(class_keys[i] | found))

    return VanHoveCatalog(
        lattice=disp.rs.spec.label,
        classes=classes,
        eps_min=-float(tau),
        eps_max=float(classes[top_i].energy),
        n_starts=n_starts,
        seed=seed,
    )


def tail_coefficient(disp: Dispersion, cp: CriticalPoint,
                     multiplicity: int | None = None) -> float:
    """Leading DOS coefficient c in rho ~ c |eps - eps_c|^(d/2 - 1) at a band
    extremum: c = (N / V_BZ) (2 pi)^(d/2) / (Gamma(d/2) sqrt(|det H|)),
    with H the cartesian Hessian and N the class multiplicity."""
    if cp.degenerate:
        raise ValueError("tail coefficient undefined for a degenerate class")
    n = multiplicity if multiplicity is not None else cp.multiplicity
    if n is None:
        raise ValueError("class multiplicity unknown")
    d = disp.rank
    det = float(np.prod(cp.hess_eigs))
    if det == 0.0:
        raise ValueError("singular Hessian")
    v_bz = disp.rs.bz_volume
    return float(n / v_bz * (2.0 * np.pi) ** (d / 2.0)
                 / (_gamma_fn(d / 2.0) * np.sqrt(abs(det))))
