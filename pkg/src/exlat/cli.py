"""Command-line driver.

Subcommands: roots, band, dos, greens, vanhove, walks, returnprob,
reproduce.  Catalogs and scalars are emitted as JSON, curves as CSV (or
gnuplot-style columns); every stochastic command takes an explicit --seed
and reruns bit-identically for the same seed and chain count.  When an
output file is written, a `<file>.manifest.json` sidecar records the full
configuration, seed, version and wall time needed to rerun it.

Exit codes: 0 success, 1 domain or reproduction failure, 2 usage error.
Diagnostics go to standard error; data goes to standard output or files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

SCHEMA_VERSION = 1

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _cap_threads(argv) -> None:
    """Apply --threads as an environment cap before numeric libraries load."""
    n = None
    for i, tok in enumerate(argv):
        if tok == "--threads" and i + 1 < len(argv):
            n = argv[i + 1]
        elif tok.startswith("--threads="):
            n = tok.split("=", 1)[1]
    if n and n.isdigit():
        for var in _THREAD_VARS:
            os.environ.setdefault(var, n)


def _lattice_arg(token: str):
    from .lattice import LatticeSpec
    try:
        return LatticeSpec.parse(token)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fmt(x) -> str:
    """Round-trip decimal formatting; integral values print without .0."""
    if isinstance(x, int):
        return str(x)
    f = float(x)
    return str(int(f)) if f.is_integer() and abs(f) < 1e15 else repr(f)


@dataclasses.dataclass
class RunManifest:
    """Sidecar emitted next to every output file; rerunning with this
    configuration reproduces the output (bit-exactly for exact stages,
    bit-exactly per seed for sampled ones)."""

    subcommand: str
    config: dict
    seed: int | None
    version: str
    wall_time_s: float
    outputs: list


def _write_output(args, text: str, t0: float) -> None:
    """Write data to --out (with a manifest sidecar) or standard output."""
    if not args.out:
        sys.stdout.write(text)
        return
    with open(args.out, "w") as fh:
        fh.write(text)
    from . import __version__
    config = {}
    for k, v in vars(args).items():
        if k in ("fn", "out"):
            continue
        config[k] = getattr(v, "label", v)
    manifest = RunManifest(
        subcommand=args.command,
        config=config,
        seed=getattr(args, "seed", None),
        version=__version__,
        wall_time_s=round(time.time() - t0, 3),
        outputs=[args.out],
    )
    with open(args.out + ".manifest.json", "w") as fh:
        json.dump(dataclasses.asdict(manifest), fh, indent=1)
        fh.write("\n")


def _emit_json(args, payload: dict, t0: float) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    _write_output(args, json.dumps(payload, indent=1) + "\n", t0)


def _emit_curve(args, columns, rows, payload: dict, t0: float) -> None:
    """Curve output: CSV by default, gnuplot columns, or JSON arrays."""
    fmt = getattr(args, "format", "csv") or "csv"
    if fmt == "json":
        data = {name: [r[i] for r in rows] for i, name in enumerate(columns)}
        _emit_json(args, {**payload, **data}, t0)
        return
    head = [f"# schema_version: {SCHEMA_VERSION}"]
    head += [f"# {k}: {v}" for k, v in payload.items()]
    if fmt == "csv":
        body = [",".join(columns)]
        body += [",".join(_fmt(x) for x in r) for r in rows]
    else:
        head.append("# columns: " + " ".join(columns))
        body = [" ".join(_fmt(x) for x in r) for r in rows]
    _write_output(args, "\n".join(head + body) + "\n", t0)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_roots(args, t0) -> int:
    from .lattice import build_roots
    rs = build_roots(args.lattice)
    if args.format in (None, "json"):
        _emit_json(args, {
            "lattice": rs.spec.label,
            "tau": rs.tau,
            "rank": rs.rank,
            "ambient_dim": rs.ambient_dim,
            "gram_det": rs.gram_det,
            "covolume": rs.covolume,
            "bz_volume": rs.bz_volume,
            "roots": rs.roots.tolist(),
            "basis": rs.basis.tolist(),
            "reciprocal": rs.reciprocal.tolist(),
        }, t0)
    else:
        cols = [f"c{i}" for i in range(rs.ambient_dim)]
        rows = [tuple(int(x) for x in r) for r in rs.roots]
        _emit_curve(args, cols, rows,
                    {"lattice": rs.spec.label, "tau": rs.tau}, t0)
    return 0


def _cmd_band(args, t0) -> int:
    import numpy as np
    from .dispersion import Dispersion
    from .lattice import build_roots
    rs = build_roots(args.lattice)
    disp = Dispersion(rs)
    d = rs.rank
    if args.at:
        u = np.array([float(x) for x in args.at.split(",")])
        if len(u) != d:
            print(f"error: expected {d} fractional coordinates, got {len(u)}",
                  file=sys.stderr)
            return 2
    else:
        u = np.zeros(d)
    _emit_json(args, {
        "lattice": rs.spec.label,
        "u": u.tolist(),
        "energy": disp.energy(u),
        "gradient": disp.gradient(u).tolist(),
        "cartesian_hessian_eigs":
            np.linalg.eigvalsh(disp.cartesian_hessian(u)).tolist(),
    }, t0)
    return 0


def _resolve_burn_in(args) -> int:
    if args.burn_in is not None:
        return args.burn_in
    return max(1, min(10 ** 4, args.samples // (2 * args.chains)))


def _cmd_dos(args, t0) -> int:
    from .dos import DosConfig, sample_dos
    cfg = DosConfig(lattice=args.lattice.label, n_samples=args.samples,
                    seed=args.seed, mode=args.mode, n_chains=args.chains,
                    burn_in=_resolve_burn_in(args))
    hist = sample_dos(cfg)
    print(f"dos {args.lattice.label}: {hist.n_samples} samples, "
          f"acceptance {hist.acceptance_rate:.4f}, ess {hist.ess:.4g}, "
          f"normalization {hist.normalization_product:.6f}", file=sys.stderr)
    rows = list(zip(hist.edges[:-1], hist.edges[1:], hist.density,
                    hist.stderr))
    _emit_curve(args, ("eps_lo", "eps_hi", "density", "stderr"), rows, {
        "lattice": args.lattice.label,
        "n_samples": hist.n_samples,
        "seed": args.seed,
        "mode": args.mode,
        "ess": _fmt(hist.ess),
        "acceptance_rate": _fmt(hist.acceptance_rate),
        "normalization_product": _fmt(hist.normalization_product),
    }, t0)
    return 0


def _cmd_greens(args, t0) -> int:
    import numpy as np
    from .dos import DosConfig, sample_dos
    from .greens import greens_scan
    cfg = DosConfig(lattice=args.lattice.label, n_samples=args.samples,
                    seed=args.seed, n_chains=args.chains,
                    burn_in=_resolve_burn_in(args))
    hist = sample_dos(cfg)
    energies = np.linspace(hist.eps_min - args.margin,
                           hist.eps_max + args.margin, args.points)
    scan = greens_scan(hist, energies)
    err = scan.re_err if scan.re_err is not None else np.full(len(energies),
                                                             np.nan)
    rows = list(zip(scan.energies, scan.re, err, scan.im))
    _emit_curve(args, ("energy", "re_g", "re_err", "im_g"), rows, {
        "lattice": args.lattice.label,
        "n_samples": hist.n_samples,
        "seed": args.seed,
    }, t0)
    return 0


def _cmd_vanhove(args, t0) -> int:
    from .dispersion import Dispersion
    from .lattice import build_roots
    from .vanhove import find_critical_points, tail_coefficient
    disp = Dispersion(build_roots(args.lattice))
    cat = find_critical_points(disp, n_starts=args.starts, seed=args.seed)
    rows = []
    for c in cat.classes:
        row = {
            "energy": c.energy,
            "n_down": c.n_down, "n_zero": c.n_zero, "n_up": c.n_up,
            "degenerate": c.degenerate,
            "multiplicity": c.multiplicity,
            "grad_norm": c.grad_norm,
            "u": c.u.tolist(),
            "hess_eigs": c.hess_eigs.tolist(),
        }
        if not c.degenerate and (c.n_down == 0 or c.n_up == 0):
            row["tail_coefficient"] = tail_coefficient(disp, c)
        rows.append(row)
    _emit_json(args, {
        "lattice": cat.lattice,
        "n_starts": cat.n_starts,
        "seed": cat.seed,
        "eps_min": cat.eps_min,
        "eps_max": cat.eps_max,
        "gamma": cat.gamma,
        "gamma_exact": cat.gamma_exact,
        "classes": rows,
    }, t0)
    return 0


def _cmd_walks(args, t0) -> int:
    from . import expected
    from .walks import walk_counts
    table = walk_counts(args.lattice.label, args.nmax)
    if args.oeis:
        ident = expected.OEIS_IDS.get(table.lattice)
        head = f"# {ident}: " if ident else "# "
        lines = [head + f"closed walk counts on {table.lattice}"]
        lines += [f"{n} {w}" for n, w in enumerate(table.counts)]
        _write_output(args, "\n".join(lines) + "\n", t0)
    else:
        _emit_json(args, {"lattice": table.lattice, "nmax": args.nmax,
                          "counts": table.counts}, t0)
    return 0


def _cmd_returnprob(args, t0) -> int:
    from .returnprob import sample_return_probability
    res = sample_return_probability(args.lattice.label, args.samples,
                                    seed=args.seed, n_chains=args.chains,
                                    burn_in=_resolve_burn_in(args))
    lo, hi = res.ci95
    _emit_json(args, {
        "lattice": res.lattice,
        "p": res.p,
        "stderr": res.stderr,
        "ci95": [lo, hi],
        "eps_mean": res.eps_mean,
        "n_samples": res.n_samples,
        "acceptance_rate": res.acceptance_rate,
        "seed": args.seed,
    }, t0)
    return 0


# ---------------------------------------------------------------------------
# reproduce: recompute the published tables and diff against embedded values
# ---------------------------------------------------------------------------

def _reproduce_table3(args, report) -> None:
    """Exact walk counts."""
    from . import expected
    from .walks import walk_counts
    for lat in ("E6", "E7", "E8"):
        table = walk_counts(lat, 8)
        want = expected.WALK_COUNTS[lat]
        for n in range(3, 9):
            report(f"table3 {lat} W_{n}", table[n] == want[n],
                   str(table[n]), str(want[n]))


def _reproduce_table1(args, report) -> None:
    """Critical point catalogs."""
    from . import expected
    from .dispersion import Dispersion
    from .lattice import LatticeSpec, build_roots
    from .vanhove import find_critical_points
    for lat in ("E6", "E7", "E8"):
        disp = Dispersion(build_roots(LatticeSpec.parse(lat)))
        cat = find_critical_points(disp, n_starts=args.starts, seed=args.seed)
        want = expected.SINGULARITIES[lat]
        report(f"table1 {lat} class count", len(cat.classes) == len(want),
               str(len(cat.classes)), str(len(want)))
        for we, wd, wu, wdeg in want:
            tag = (f"table1 {lat} e={float(we):.8g} ({wd},{wu})"
                   + (" degenerate" if wdeg else ""))
            hits = [c for c in cat.classes
                    if abs(c.energy - float(we)) <= 1e-6
                    and (c.n_down, c.n_up, c.degenerate) == (wd, wu, wdeg)]
            report(tag, len(hits) == 1, f"{len(hits)} matches", "1 match")
        report(f"table1 {lat} eps_max",
               abs(cat.eps_max - expected.EPS_MAX[lat]) <= 1e-9,
               _fmt(cat.eps_max), str(expected.EPS_MAX[lat]))
        report(f"table1 {lat} gamma",
               cat.gamma_exact == expected.GAMMA[lat],
               str(cat.gamma_exact), str(expected.GAMMA[lat]))


def _reproduce_table2(args, report) -> None:
    """Extrema, multiplicities, tail constants and return probabilities."""
    from . import expected
    from .dispersion import Dispersion
    from .lattice import LatticeSpec, build_roots
    from .returnprob import sample_return_probability
    from .vanhove import band_extrema, tail_coefficient
    for lat in ("E6", "E7", "E8"):
        spec = LatticeSpec.parse(lat)
        disp = Dispersion(build_roots(spec))
        bot, top = band_extrema(disp, n_starts=args.starts, seed=args.seed)
        report(f"table2 {lat} eps_min", abs(bot.energy + spec.tau) <= 1e-9,
               _fmt(bot.energy), str(-spec.tau))
        report(f"table2 {lat} eps_max",
               abs(top.energy - expected.EPS_MAX[lat]) <= 1e-9,
               _fmt(top.energy), str(expected.EPS_MAX[lat]))
        ratio = -bot.energy / top.energy
        report(f"table2 {lat} gamma",
               abs(ratio - expected.GAMMA[lat]) <= 1e-9,
               _fmt(ratio), str(expected.GAMMA[lat]))
        report(f"table2 {lat} N_min",
               bot.multiplicity == expected.N_MIN[lat],
               str(bot.multiplicity), str(expected.N_MIN[lat]))
        report(f"table2 {lat} N_max",
               top.multiplicity == expected.N_MAX[lat],
               str(top.multiplicity), str(expected.N_MAX[lat]))
        for name, cp, want in (("bottom", bot, expected.TAIL_MIN[lat]),
                               ("top", top, expected.TAIL_MAX[lat])):
            got = tail_coefficient(disp, cp)
            report(f"table2 {lat} tail {name}",
                   abs(got - want) <= 1e-9 * want, _fmt(got), _fmt(want))
    for lat in ("E6", "E7", "E8"):
        burn = max(1, min(10 ** 4, args.samples // (2 * 4096)))
        res = sample_return_probability(lat, args.samples, seed=args.seed,
                                        burn_in=burn)
        lo, hi = expected.RETURN_CI[lat]
        mid = 0.5 * (lo + hi)
        report(f"table2 {lat} return P",
               abs(res.p - mid) <= 0.005 * mid,
               f"{res.p!r} (stderr {res.stderr:.2g})",
               f"{mid!r} within 0.5%")


def _reproduce_fig_dos(args, report) -> None:
    """DOS normalization, moments and band-edge exponents."""
    import numpy as np
    from .dispersion import Dispersion
    from .dos import DosConfig, edge_exponent, sample_dos
    from .lattice import LatticeSpec, build_roots
    from .vanhove import find_critical_points
    from .walks import moments_check, walk_counts
    for lat in ("E6", "E7", "E8"):
        spec = LatticeSpec.parse(lat)
        d = spec.rank
        burn = max(1, min(30000, args.samples // (2 * 4096)))
        cfg = DosConfig(lattice=lat, n_samples=args.samples, seed=args.seed,
                        burn_in=burn)
        hist = sample_dos(cfg)
        cat = find_critical_points(Dispersion(build_roots(spec)),
                                   n_starts=3000, seed=args.seed)
        energies = sorted({c.energy for c in cat.classes})
        basin = {"min": energies[1] - energies[0],
                 "max": energies[-1] - energies[-2]}
        total = float(hist.density @ np.diff(hist.edges))
        report(f"fig_dos {lat} normalization",
               abs(total - 1.0) <= 0.002, _fmt(total), "1 within 0.2%")
        errs = moments_check(walk_counts(lat, 8), hist)
        for n in range(1, 9):
            tol = 0.02 if n <= 4 else 0.05
            report(f"fig_dos {lat} moment {n}", abs(errs[n]) <= tol,
                   f"rel err {errs[n]:+.4f}", f"|err| <= {tol}")
        for side in ("min", "max"):
            try:
                slope, nb = edge_exponent(hist, side,
                                          basin_depth=basin[side])
            except RuntimeError:
                report(f"fig_dos {lat} {side} edge exponent", False,
                       "too few populated bins", f"{d / 2 - 1} within 0.05")
                continue
            report(f"fig_dos {lat} {side} edge exponent",
                   abs(slope - (d / 2 - 1)) <= 0.05,
                   f"{slope:.4f} ({nb} bins)", f"{d / 2 - 1} within 0.05")


_REPRODUCE_TARGETS = {
    "table1": _reproduce_table1,
    "table2": _reproduce_table2,
    "table3": _reproduce_table3,
    "fig_dos": _reproduce_fig_dos,
}


def _cmd_reproduce(args, t0) -> int:
    lines = []
    failures = 0

    def report(name: str, ok: bool, got: str, want: str):
        nonlocal failures
        if not ok:
            failures += 1
        line = f"{'PASS' if ok else 'FAIL'} {name}: got {got}, want {want}"
        lines.append(line)
        print(line, flush=True)

    for target in args.targets:
        _REPRODUCE_TARGETS[target](args, report)
    summary = f"{len(lines) - failures}/{len(lines)} checks passed"
    print(summary)
    if args.out:
        _write_output(args, "\n".join(lines + [summary]) + "\n", t0)
    return 1 if failures else 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="exlat",
        description="Spectral toolkit for nearest-neighbor bands on root "
                    "lattices.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_text, fn, lattice=True, seed=True, fmt=None):
        p = sub.add_parser(name, help=help_text)
        if lattice:
            p.add_argument("--lattice", type=_lattice_arg, required=True,
                           help="lattice label: A<d>, D<d>, E6, E7 or E8")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if fmt:
            p.add_argument("--format", choices=("csv", "json", "gnuplot"),
                           default=fmt)
        p.add_argument("--out", default=None,
                       help="output file (default standard output)")
        p.add_argument("--threads", type=int, default=None,
                       help="cap numeric library threads")
        p.set_defaults(fn=fn)
        return p

    add("roots", "list the root system and lattice frames", _cmd_roots,
        seed=False, fmt="json")

    p = add("band", "energy, gradient and Hessian at one momentum",
            _cmd_band, seed=False)
    p.add_argument("--at", default=None,
                   help="comma-separated fractional coordinates (default 0)")

    p = add("dos", "sample the density of states", _cmd_dos, fmt="csv")
    p.add_argument("--samples", type=int, default=10 ** 7)
    p.add_argument("--chains", type=int, default=4096)
    p.add_argument("--burn-in", type=int, default=None,
                   help="burn-in steps per chain (default 10^4, capped at samples//(2*chains) so short runs stay valid)")
    p.add_argument("--mode", choices=("tail_flattened", "uniform"),
                   default="tail_flattened")

    p = add("greens", "Green's function scan from a sampled DOS",
            _cmd_greens, fmt="csv")
    p.add_argument("--samples", type=int, default=10 ** 7)
    p.add_argument("--chains", type=int, default=4096)
    p.add_argument("--burn-in", type=int, default=None,
                   help="burn-in steps per chain (default 10^4, capped at samples//(2*chains) so short runs stay valid)")
    p.add_argument("--points", type=int, default=2001)
    p.add_argument("--margin", type=float, default=20.0,
                   help="scan this far beyond each band edge")

    p = add("vanhove", "critical point catalog", _cmd_vanhove)
    p.add_argument("--starts", type=int, default=10 ** 5)

    p = add("walks", "exact closed walk counts", _cmd_walks, seed=False)
    p.add_argument("--nmax", type=int, default=8)
    p.add_argument("--oeis", action="store_true",
                   help="b-file style output: index and value per line")

    p = add("returnprob", "random walk return probability", _cmd_returnprob)
    p.add_argument("--samples", type=int, default=10 ** 7)
    p.add_argument("--chains", type=int, default=4096)
    p.add_argument("--burn-in", type=int, default=None,
                   help="burn-in steps per chain (default 10^4, capped at samples//(2*chains) so short runs stay valid)")

    p = add("reproduce", "recompute published tables and diff",
            _cmd_reproduce, lattice=False)
    p.add_argument("targets", nargs="+", choices=sorted(_REPRODUCE_TARGETS),
                   help="table1 (catalogs), table2 (extrema, tails, return "
                        "probabilities), table3 (walks), fig_dos")
    p.add_argument("--samples", type=int, default=10 ** 9)
    p.add_argument("--starts", type=int, default=10 ** 5)

    return ap


def main(argv=None) -> int:
    _cap_threads(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    t0 = time.time()
    try:
        return args.fn(args, t0)
    except (ValueError, RuntimeError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
