"""Command-line interface: ``sevensphere {build,optimize,range,verify,render}``.

Exit codes: 0 for success (file written, feasible, valid), 1 for a
domain-negative outcome (infeasible, invalid, pipeline failure) and 2 for
usage or file-format errors.

Every subcommand accepts ``--config FILE`` (JSON), ``--out FILE`` and
``--seed N``.  The config file may hold the sections ``optimizer`` (fields of
:class:`OptimizerConfig`), ``verify`` (``tol``, ``h``), ``render`` (fields
of :class:`RenderSpec`) and ``range`` (``scan``: list of radii).  The number
of BLAS threads is taken from the ``SEVENSPHERE_THREADS`` environment
variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

LEDGER_HEADER = "m\tvariant\tconfig_hash\tr_min\tr_max\tratio\tprobes\tseconds"


class UsageError(Exception):
    """Bad arguments or unreadable input (exit 2)."""


class DomainFailure(Exception):
    """The computation ran but the answer is negative (exit 1)."""


def _set_threads():
    n = os.environ.get("SEVENSPHERE_THREADS")
    if n:
        for var in THREAD_VARS:
            os.environ[var] = n


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as ex:
        raise UsageError(f"cannot read config {path}: {ex}") from ex
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _optimizer_config(args, cfg: dict):
    from .optimize import OptimizerConfig

    oc = OptimizerConfig.from_dict(cfg.get("optimizer", {}))
    oc.seed = args.seed
    if getattr(args, "symmetry", None) is not None:
        oc.symmetry = args.symmetry == "on"
    return oc


def _load_tiling(path):
    from .tiling import SphericalTiling, TilingFormatError

    try:
        return SphericalTiling.load(path)
    except OSError as ex:
        raise UsageError(f"cannot read {path}: {ex}") from ex
    except TilingFormatError as ex:
        raise UsageError(f"{path}: {ex}") from ex


def _write(path, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _emit(obj: dict):
    print(json.dumps(obj, sort_keys=True))


# ---------------------------------------------------------------------------
# results ledger


def read_ledger(path) -> list:
    """Rows of the results ledger as dicts; later rows win for a repeated key."""
    rows = {}
    if not path or not os.path.exists(path):
        return []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != LEDGER_HEADER:
        raise UsageError(f"{path} is not a results ledger")
    for ln in lines[1:]:
        f = ln.split("\t")
        if len(f) != 8:
            raise UsageError(f"{path}: bad ledger row {ln!r}")
        row = {"m": int(f[0]), "variant": f[1], "config_hash": f[2], "r_min": float(f[3]),
               "r_max": float(f[4]), "ratio": float(f[5]), "probes": int(f[6]), "seconds": float(f[7])}
        rows[(row["m"], row["variant"], row["config_hash"])] = row
    return list(rows.values())


def append_ledger(path, row: dict):
    """Append one row unless an identical (m, variant, config hash) row exists."""
    existing = read_ledger(path)
    key = (row["m"], row["variant"], row["config_hash"])
    if any((r["m"], r["variant"], r["config_hash"]) == key for r in existing):
        return False
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a") as fh:
        if new:
            fh.write(LEDGER_HEADER + "\n")
        fh.write("\t".join([str(row["m"]), row["variant"], row["config_hash"], repr(row["r_min"]),
                            repr(row["r_max"]), repr(row["ratio"]), str(row["probes"]),
                            f"{row['seconds']:.1f}"]) + "\n")
    return True


def covered_minimum(rows: list):
    """Smallest radius from which the union of the ranges is unbroken up to the largest computed m."""
    rows = sorted((r for r in rows if r["variant"] == "base"), key=lambda r: r["m"])
    if not rows:
        return None
    lo = rows[-1]["r_min"]
    for prev in reversed(rows[:-1]):
        if prev["r_max"] >= lo:
            lo = min(lo, prev["r_min"])
        else:
            break
    return lo


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(args, cfg):
    from .optimize import build_tiling, estimate_radius
    from .tiling import provenance

    if args.m < 1:
        raise UsageError("--m must be at least 1")
    r = args.radius
    if r is None:
        known = [row for row in read_ledger(args.ledger) if row["m"] == args.m and row["variant"] == "base"]
        r = 0.5 * (known[-1]["r_min"] + known[-1]["r_max"]) if known else round(estimate_radius(args.m), 2)
    if r <= 0:
        raise UsageError("--radius must be positive")
    try:
        t, _ = build_tiling(args.m, r, args.phase)
    except (RuntimeError, ValueError) as ex:
        raise DomainFailure(f"{type(ex).__name__}: {ex}") from ex
    t.provenance = provenance({"cmd": "build", "m": args.m, "radius": r, "phase": args.phase, **cfg}, args.seed)
    _write(args.out, t.dumps())
    _emit({"m": args.m, "radius": r, "tiles": len(t.tiles), "vertices": len(t.vertices),
           "expected_unscalable": len(t.expected_unscalable)})


def cmd_optimize(args, cfg):
    from .optimize import Problem
    from .tiling import provenance

    t = _load_tiling(args.input)
    oc = _optimizer_config(args, cfg)
    r = args.radius if args.radius is not None else t.r
    P = Problem.from_tiling(t.scaled(r) if r != t.r else t, oc)
    fr = P.solve(r, P.base.vertices)
    out = P.tiling(r, fr.vertices)
    out.provenance = provenance({"cmd": "optimize", "radius": r, "optimizer": oc.as_dict()}, args.seed)
    if args.out is not None:
        _write(args.out, out.dumps())
    _emit({"feasible": fr.feasible, "max_violation": fr.max_violation, "iterations": fr.iterations,
           "radius": r, "message": fr.message})
    if not fr.feasible:
        raise DomainFailure(f"infeasible at r={r}: max violation {fr.max_violation:.3e}")


def cmd_range(args, cfg):
    from .optimize import NoFeasibleSeed, exclusion_variant, radius_range
    from .render import RangeRow, render_ranges
    from .tiling import config_hash

    if args.m is None and not args.plot:
        raise UsageError("range needs --m (or only --plot)")
    if args.m is not None:
        if args.m < 1:
            raise UsageError("--m must be at least 1")
        oc = _optimizer_config(args, cfg)
        scan = cfg.get("range", {}).get("scan")
        try:
            res = radius_range(args.m, oc, scan=scan)
            variant = "base"
            if args.exclusion:
                res = exclusion_variant(args.m, oc, base=res)
                variant = "exclusion"
        except NoFeasibleSeed as ex:
            raise DomainFailure(str(ex)) from ex
        h = config_hash({"optimizer": oc.as_dict(), "scan": scan})
        row = {"m": args.m, "variant": variant, "config_hash": h, "r_min": float(res.r_min),
               "r_max": float(res.r_max), "ratio": float(res.ratio), "probes": len(res.probes),
               "seconds": float(res.seconds)}
        if args.ledger:
            append_ledger(args.ledger, row)
        out = dict(row)
        if args.exclusion:
            out["narrowing"] = float(res.narrowing)
            out["width_narrowing"] = float(res.width_narrowing)
        if args.out is not None:
            _write(args.out, json.dumps({**out, "probe_log": res.to_dict()["probes"]}, sort_keys=True) + "\n")
        _emit(out)
    if args.plot:
        rows = [r for r in read_ledger(args.ledger) if r["variant"] == "base"]
        _write(args.plot, render_ranges([RangeRow(r["m"], r["r_min"], r["r_max"]) for r in rows]))


def cmd_verify(args, cfg):
    from .optimize import Problem
    from .verify import CoverageGap, OverlapError, build_platonic_fixture, verify_tiling

    vc = cfg.get("verify", {})
    tol = args.tol if args.tol is not None else vc.get("tol", 1e-6)
    h = args.h if args.h is not None else vc.get("h", 0.005)
    if args.fixture:
        if args.input:
            raise UsageError("give either an input file or --fixture")
        if args.radius is None:
            raise UsageError("--fixture needs --radius")
        try:
            t = build_platonic_fixture(args.fixture, args.radius)
        except ValueError as ex:
            raise UsageError(str(ex)) from ex
    elif args.input:
        t = _load_tiling(args.input)
    else:
        raise UsageError("verify needs an input file or --fixture")
    feasible_at = None
    if args.scalability:
        P = Problem.from_tiling(t, _optimizer_config(args, cfg))
        feasible_at = lambda r: P.solve(r, t.vertices * (r / t.r)).feasible  # noqa: E731
    try:
        rep = verify_tiling(t, tol=tol, h=h, patch=bool(t.spec.get("patch")), feasible_at=feasible_at)
    except (CoverageGap, OverlapError) as ex:
        _emit({"valid": False, "error": f"{type(ex).__name__}: {ex}"})
        raise DomainFailure(str(ex)) from ex
    d = rep.to_dict()
    if args.out is not None:
        _write(args.out, json.dumps(d, sort_keys=True, indent=1) + "\n")
    _emit({k: d[k] for k in ("valid", "classification", "worst_diameter", "worst_separation", "n_tiles")}
          | {"siamese": len(d["siamese"]), "unscalable": len(d["unscalable"])})
    if not rep.valid:
        raise DomainFailure("tiling is not a valid 7-coloring")


def cmd_render(args, cfg):
    from .render import RenderSpec, render_tiling

    t = _load_tiling(args.input)
    rc = dict(cfg.get("render", {}))
    if args.view:
        rc["projection"] = args.view
    elif t.spec.get("patch"):
        rc.setdefault("projection", "net")
    if args.axis:
        try:
            rc["axis"] = tuple(float(x) for x in args.axis.split(","))
        except ValueError as ex:
            raise UsageError(f"bad --axis {args.axis!r}") from ex
        if len(rc["axis"]) != 3:
            raise UsageError("--axis needs three comma-separated numbers")
    elif t.spec.get("patch"):
        rc.setdefault("axis", (1.0, 0.0, 0.0))
    if args.size:
        rc["size"] = args.size
    if args.no_chords:
        rc["unit_chords"] = False
    if "axis" in rc:
        rc["axis"] = tuple(rc["axis"])
    if "palette" in rc:
        rc["palette"] = tuple(rc["palette"])
    try:
        spec = RenderSpec(**rc)
    except (TypeError, ValueError) as ex:
        raise UsageError(f"bad render settings: {ex}") from ex
    _write(args.out, render_tiling(t, spec))


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sevensphere", description="7-colorings of spheres of large radius")
    p.add_argument("-v", "--verbose", action="store_true", help="log optimizer progress")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output file (default: stdout where applicable)")
        sp.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("build", help="build the stitched tiling for one m and realize it radially")
    common(b)
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--radius", type=float)
    b.add_argument("--phase", type=int, default=0, choices=(0, 1))
    b.add_argument("--ledger", help="results ledger used for the default radius")

    o = sub.add_parser("optimize", help="make a tiling file valid at its radius")
    common(o)
    o.add_argument("input")
    o.add_argument("--radius", type=float, help="rescale to this radius first")
    o.add_argument("--symmetry", choices=("on", "off"))

    r = sub.add_parser("range", help="feasible radius range for one m")
    common(r)
    r.add_argument("--m", type=int)
    r.add_argument("--ledger", default="results.tsv", help="append-only results table")
    r.add_argument("--plot", help="write an SVG chart of the ledger ranges")
    r.add_argument("--exclusion", action="store_true", help="forbid distances in [0.99, 1.01]")
    r.add_argument("--symmetry", choices=("on", "off"))

    v = sub.add_parser("verify", help="independent validity check")
    common(v)
    v.add_argument("input", nargs="?")
    v.add_argument("--fixture", choices=("octahedron", "cube", "dodecahedron"))
    v.add_argument("--radius", type=float)
    v.add_argument("--tol", type=float)
    v.add_argument("--h", type=float)
    v.add_argument("--scalability", action="store_true", help="probe r(1 +- 0.02) for quasi-scalability")
    v.add_argument("--symmetry", choices=("on", "off"))

    g = sub.add_parser("render", help="SVG picture of a tiling file")
    common(g)
    g.add_argument("input")
    g.add_argument("--view", choices=("orthographic", "net"))
    g.add_argument("--axis", help="view axis x,y,z")
    g.add_argument("--size", type=int)
    g.add_argument("--no-chords", action="store_true")
    return p


COMMANDS = {"build": cmd_build, "optimize": cmd_optimize, "range": cmd_range, "verify": cmd_verify,
            "render": cmd_render}


def main(argv=None) -> int:
    _set_threads()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return int(ex.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _load_config(args.config)
        COMMANDS[args.cmd](args, cfg)
    except UsageError as ex:
        print(json.dumps({"error": "usage", "message": str(ex)}), file=sys.stderr)
        return 2
    except DomainFailure as ex:
        print(json.dumps({"error": "negative", "message": str(ex)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
