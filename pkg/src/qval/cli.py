"""Command line front end: ``qval examples|solve|analyze|embed|decompose|extend``.

Every subcommand reads JSON from a file or stdin (``-``) and writes JSON or
CSV to stdout or ``--out``. Exit codes: 0 success, 2 invalid input or
failed precondition, 3 non-convergence or failed verification.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .aq_core import DimensionError, PreconditionError, QPoint
from .io import InputError, csv_rows, document, dumps, load_json, write_text
from .selection import TWO_PI, AmbiguousMatching, NotIrreducible, SampledQPath

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILED = 3

logger = logging.getLogger("qval")


# ---------------------------------------------------------------------------
# input helpers


def _parse_vector(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise InputError(f"cannot parse vector {text!r}") from exc


def _parse_radii(text: str) -> np.ndarray:
    """``a:b:step`` (b included) or a comma separated list."""
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            count = int(round((b - a) / step)) + 1
            return np.round(a + step * np.arange(count), 12)
        return np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise InputError(f"cannot parse radii {text!r}; expected a:b:step or r1,r2,...") from exc


def _kind(obj, path: str) -> str:
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected a JSON object")
    if "kind" in obj:
        return obj["kind"]
    if "topology" in obj:
        return "trace"
    if "mask" in obj:
        return "grid"
    if "mesh" in obj and "values" in obj:
        return "function"
    raise InputError(f"{path}: cannot tell what this document holds")


def _field(obj: dict, key: str, path: str):
    try:
        return obj[key]
    except KeyError as exc:
        raise InputError(f"{path}: missing field {key!r}") from exc


def _load_trace(obj: dict, path: str) -> tuple[SampledQPath, dict | None]:
    kind = _kind(obj, path)
    if kind == "boundary":
        return SampledQPath.from_json(_field(obj, "trace", path)), obj.get("mesh")
    if kind == "trace":
        return SampledQPath.from_json(obj), None
    raise InputError(f"{path}: expected a boundary trace, got {kind!r}")


def _load_function(obj: dict, path: str):
    from .dirichlet import QFunction

    kind = _kind(obj, path)
    if kind == "solution":
        return QFunction.from_json(_field(obj, "function", path))
    if kind == "function":
        return QFunction.from_json(obj)
    raise InputError(f"{path}: expected a solution, got {kind!r}")


def _disk_mesh(spec: dict | None, args, n_boundary: int):
    from .dirichlet import Mesh, build_disk_mesh

    if spec is not None and spec.get("type", "disk") != "disk":
        return Mesh.from_json(spec)
    radius = float(spec.get("radius", 1.0)) if spec else 1.0
    res = args.resolution
    if res is None and spec is not None and "resolution" in spec:
        res = int(spec["resolution"])
    if res is None:
        # the boundary ring of a disk mesh has 6 * resolution vertices
        if n_boundary % 6:
            raise InputError(f"cannot infer the resolution from {n_boundary} boundary samples; pass --resolution")
        res = n_boundary // 6
    return build_disk_mesh(radius, res)


# ---------------------------------------------------------------------------
# subcommands


def cmd_examples(args) -> int:
    from .dirichlet import build_disk_mesh, harmonic_boundary, root_boundary

    mesh = build_disk_mesh(1.0, args.resolution)
    name = args.name
    if name == "sqrt":
        trace = root_boundary(2, mesh)
    elif name == "cuberoot":
        trace = root_boundary(3, mesh)
    elif name == "root":
        trace = root_boundary(args.q, mesh)
    elif name == "harmonic":
        trace = harmonic_boundary(mesh, args.q)
    else:  # constant
        k = len(mesh.boundary)
        t = TWO_PI * np.arange(k) / k
        vals = np.broadcast_to(np.asarray(args.value, dtype=float), (k, args.q, len(args.value))).copy()
        trace = SampledQPath(t, vals, "circle")
    doc = document("boundary", mesh={"type": "disk", "radius": 1.0, "resolution": args.resolution},
                   trace=trace.to_json())
    write_text(args.out, dumps(doc))
    return EXIT_OK


def cmd_solve(args) -> int:
    from .dirichlet import SolveOptions, minimize

    path = args.boundary or args.input
    if path is None:
        raise InputError("no boundary given; pass a file, '-' or --boundary")
    trace, spec = _load_trace(load_json(path), path)
    if args.mesh != "disk":
        raise InputError(f"unsupported mesh {args.mesh!r}")
    mesh = _disk_mesh(spec, args, len(trace))
    inits = tuple(s for s in args.inits.split(",") if s)
    opts = SolveOptions(tol=args.tol, max_iters=args.max_iters, inits=inits, seed=args.seed)
    f, rep = minimize(trace, mesh, options=opts)
    doc = document("solution", energy=rep.final_energy, converged=rep.converged, iterations=rep.iterations,
                   start=rep.start, start_energies=rep.start_energies, energy_history=rep.energy_history,
                   function=f.to_json())
    write_text(args.out, dumps(doc))
    if args.history_csv:
        write_text(args.history_csv, rep.history_csv())
    if not rep.converged:
        logger.error("solver did not converge in %d iterations", rep.iterations)
        return EXIT_FAILED
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .analysis import check_monotonicity, profile, singular_clusters

    path = args.input_opt or args.input or "-"
    f = _load_function(load_json(path), path)
    center = _parse_vector(args.center)
    if len(center) != 2:
        raise InputError("--center needs two coordinates")
    radii = _parse_radii(args.radii)
    p = profile(f, center, radii)
    if args.format == "csv":
        write_text(args.out, p.to_csv())
        return EXIT_OK
    ok, worst = check_monotonicity(p, args.monotone_tol)
    clusters = singular_clusters(f)
    doc = document("profile", profile=p.to_json(), monotone=ok, worst_drop=worst,
                   singular_clusters=[{"size": len(c), "centroid": f.mesh.vertices[c].mean(0)} for c in clusters])
    write_text(args.out, dumps(doc))
    return EXIT_OK


def cmd_embed(args) -> int:
    from .embedding import build_gamma, build_lambda, verify_lambda

    if args.q < 1 or args.n < 1:
        raise PreconditionError("--q and --n must be positive")
    basis = build_lambda(args.n, args.q, seed=args.seed)
    if args.gamma:
        basis = build_gamma(basis)
    fields = {"basis": basis.to_json()}
    code = EXIT_OK
    if args.verify:
        res = verify_lambda(basis, trials=args.verify, rng_seed=args.seed)
        fields["verification"] = {"trials": args.verify, "passed": res.passed, "worst_margin": res.worst_margin}
        if not res.passed:
            logger.error("basis verification failed with margin %.3g", res.worst_margin)
            code = EXIT_FAILED
    write_text(args.out, dumps(document("basis", **fields)))
    return code


def cmd_decompose(args) -> int:
    from .dirichlet import NotDecomposable, decompose_minimizer, energy
    from .selection import decompose_circle

    path = args.input or "-"
    obj = load_json(path)
    kind = _kind(obj, path)
    if kind in ("boundary", "trace"):
        trace, _ = _load_trace(obj, path)
        pieces = decompose_circle(trace)
        out = [{"Q_j": pc.path.q, "multiplicity": pc.multiplicity, "path": pc.path.to_json()} for pc in pieces]
        write_text(args.out, dumps(document("circle_decomposition", pieces=out)))
        return EXIT_OK
    f = _load_function(obj, path)
    T = None
    if args.reference:
        pts = np.asarray([_parse_vector(s) for s in args.reference.split(";")])
        T = QPoint(pts)
    try:
        parts = decompose_minimizer(f, T, factor=args.factor)
    except NotDecomposable as exc:
        raise InputError(f"not decomposable: {exc}") from exc
    out = [{"q": g.q, "energy": energy(g), "function": g.to_json()} for g in parts]
    write_text(args.out, dumps(document("decomposition", energy=energy(f), pieces=out)))
    return EXIT_OK


def cmd_extend(args) -> int:
    from .extension import GridQFunction, grid_lipschitz, lipschitz_extend, pairwise_lipschitz, whitney_decompose

    path = args.input or "-"
    obj = load_json(path)
    kind = _kind(obj, path)
    if kind not in ("grid", "extension"):
        raise InputError(f"{path}: expected a grid function, got {kind!r}")
    f = GridQFunction.from_json(obj["function"] if "function" in obj else obj)
    if not f.mask.any():
        raise PreconditionError("the defined set is empty")
    cubes = whitney_decompose(f.shape, f.mask)
    g = lipschitz_extend(f, cubes)
    lip_in = pairwise_lipschitz(f)
    lip_out = grid_lipschitz(g)
    doc = document("extension", lipschitz_input=lip_in, lipschitz_output=lip_out,
                   whitney_squares=len(cubes.squares), whitney_comparability=cubes.comparability(f.mask),
                   function=g.to_json())
    write_text(args.out, dumps(doc))
    if args.csv:
        rows = [(i, j, k, *g.values[i, j, k]) for i in range(g.shape[0]) for j in range(g.shape[1])
                for k in range(g.q)]
        header = ["i", "j", "sheet"] + [f"x{c}" for c in range(g.n)]
        write_text(args.csv, csv_rows(header, rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qval", description="Q-valued functions: metric, embedding, "
                                 "extension, Dirichlet minimisers and frequency analysis.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", "-o", default=None, help="output path (default stdout)")
    common.add_argument("--threads", type=int, default=None,
                        help="BLAS thread pool size (default $QVAL_THREADS or library default)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("examples", parents=[common], help="boundary traces of closed-form examples")
    p.add_argument("name", choices=["sqrt", "cuberoot", "root", "harmonic", "constant"])
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--value", type=_parse_vector, default=(1.0, 0.0),
                   help="point repeated Q times for the constant example")
    p.set_defaults(func=cmd_examples)

    p = sub.add_parser("solve", parents=[common], help="discrete Dirichlet minimiser for a boundary trace")
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--boundary", default=None, help="boundary trace file (alternative to the positional input)")
    p.add_argument("--mesh", default="disk")
    p.add_argument("--resolution", type=int, default=None,
                   help="disk mesh resolution (default from the input, or boundary samples / 6)")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--inits", default="cone,jitter", help="comma separated: cone, jitter, embedding")
    p.add_argument("--history-csv", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("analyze", parents=[common], help="frequency profile of a solution")
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--in", dest="input_opt", default=None)
    p.add_argument("--center", default="0,0")
    p.add_argument("--radii", default="0.1:0.9:0.05")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--monotone-tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("embed", parents=[common], help="direction set for the embedding xi")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--verify", type=int, default=0, metavar="TRIALS")
    p.add_argument("--gamma", action="store_true", help="emit the enlarged set used by xi_BW")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("decompose", parents=[common],
                       help="irreducible pieces of a circle trace, or separation split of a solution")
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--reference", default=None, help="reference point 'x1,y1;x2,y2;...' for solutions")
    p.add_argument("--factor", type=float, default=None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("extend", parents=[common], help="Lipschitz extension of a grid function")
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--csv", default=None, help="also write node values as CSV")
    p.set_defaults(func=cmd_extend)
    return ap


def _thread_count(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("QVAL_THREADS")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise InputError(f"QVAL_THREADS must be an integer, got {env!r}") from exc
    return None


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="qval: %(levelname)s: %(message)s")
    try:
        threads = _thread_count(args)
        if threads is not None and threads < 1:
            raise InputError("thread count must be positive")
        if threads is None:
            return args.func(args)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=threads):
            return args.func(args)
    except (InputError, DimensionError, PreconditionError, AmbiguousMatching, NotIrreducible,
            ValueError, KeyError) as exc:
        print(f"qval {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
