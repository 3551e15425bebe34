"""Command-line entry point.

Exit status: 0 on success, 2 on bad arguments or invalid input, 1 when a run
fails for any other reason. Seeds default to ``$BB_SEED`` when not given.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis, crypto
from .cds import ALGORITHMS, DEFAULT_SOLVER_CAP, CdsError, canonical_algorithm, elect
from .flood import FloodError, average_flood_cost, flooding_cost_formula
from .sim import ScenarioError, load_scenario, run
from .udg import DeploymentSpec, Graph, GraphError, generate, generate_connected

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
VALIDATION_ERRORS = (analysis.SweepError, GraphError, ScenarioError, CdsError, FloodError)


class UsageError(ValueError):
    pass


def _env_seed() -> int | None:
    raw = os.environ.get("BB_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"BB_SEED must be an integer, got {raw!r}") from None


def _seed(args, default: int | None = 0) -> int | None:
    if args.seed is not None:
        return args.seed
    env = _env_seed()
    return default if env is None else env


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _algo_list(text: str) -> tuple[str, ...]:
    try:
        return tuple(canonical_algorithm(a.strip()) for a in text.split(",") if a.strip())
    except CdsError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _algo(text: str) -> str:
    try:
        return canonical_algorithm(text)
    except CdsError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# -- commands ----------------------------------------------------------------

def cmd_sweep(args) -> int:
    spec = analysis.SweepSpec(
        dim=args.dim, ell=args.ell, lambdas=args.lambdas, trials=args.trials, algorithms=args.algos,
        check_valve=args.valve, cap=args.cap, seed_base=_seed(args), placement=args.placement,
        workers=args.workers or analysis.default_workers())
    rows = analysis.sweep(spec)
    _write(analysis.rows_to_csv(rows), args.out)
    if args.report:
        lines = []
        if spec.dim == 1 and len(spec.lambdas) >= 3:
            for fit in analysis.slope_fit(rows).values():
                err = "" if fit.relative_error is None else f" expected {fit.expected:g} ({fit.relative_error:+.1%})"
                lines.append(f"slope {fit.algorithm} {fit.slope:.4f}{err}")
        shape = analysis.shape_checks(rows)
        lines += [f"note {x}" for x in shape.notes] + [f"FAIL {x}" for x in shape.failures]
        print("\n".join(lines), file=sys.stderr)
    return EXIT_OK


def cmd_valve(args) -> int:
    spec = analysis.SweepSpec(dim=1, ell=args.ell, lambdas=args.lambdas, trials=args.trials,
                              algorithms=args.algos, seed_base=_seed(args))
    out = ["lambda,algorithm,trials,mean_ratio,ci95"]
    for r in analysis.check_valve_ratio(spec):
        out.append(f"{r.lam:g},{r.algorithm},{r.trials},{r.mean_ratio:.6f},{r.ci95:.6f}")
    _write("\n".join(out) + "\n", args.out)
    return EXIT_OK


def cmd_scenario(args) -> int:
    sc = load_scenario(args.file)
    if args.seed is not None or _env_seed() is not None:
        sc = replace(sc, seed=_seed(args))
    result = run(sc)
    lines = result.trace
    if args.no_hello:
        lines = [x for x in lines if " hello:" not in x]
    _write("".join(x + "\n" for x in lines), args.out)
    m = result.metrics.summary()
    print(" ".join(f"{k}={v}" for k, v in m.items()) + f" trace_sha256={result.trace_hash}", file=sys.stderr)
    return EXIT_OK


def cmd_keygen(args) -> int:
    seed = _seed(args, default=None)
    if not 2 <= args.n <= crypto.MAX_MEMBERS:
        raise UsageError(f"--n must be between 2 and {crypto.MAX_MEMBERS}")
    matrix = crypto.generate_matrix(args.n, seed=seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for col in crypto.columns(matrix):
        path = out / f"member-{col.owner:03d}.bbkc"
        path.write_bytes(col.to_bytes())
        role = " leader" if col.owner == 0 else ""
        print(f"{path.name}{role}")
    return EXIT_OK


def _parse_graph_spec(text: str) -> tuple[DeploymentSpec, bool]:
    kv = {}
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise UsageError(f"expected key=value in --spec, got {item!r}")
        k, v = item.split("=", 1)
        kv[k.strip().replace("_", "-")] = v.strip()
    known = {"dim", "ell", "lambda", "seed", "placement", "width", "connected"}
    unknown = set(kv) - known
    if unknown:
        raise UsageError(f"unknown --spec keys: {', '.join(sorted(unknown))}")
    env = _env_seed()
    try:
        seed = int(kv["seed"], 0) if "seed" in kv else (env or 0)
        spec = DeploymentSpec(int(kv.get("dim", 1)), float(kv["ell"]), float(kv["lambda"]), seed,
                              kv.get("placement", "fixed-n"), float(kv.get("width", 1.0)))
    except KeyError as exc:
        raise UsageError(f"--spec needs {exc.args[0]}=...") from None
    except ValueError as exc:
        raise UsageError(f"bad --spec value: {exc}") from None
    connected = kv.get("connected", "true").lower() in ("1", "true", "yes", "on")
    return spec, connected


def cmd_graph(args) -> int:
    spec, connected = _parse_graph_spec(args.spec)
    if connected:
        g, resamples = generate_connected(spec)
        print(f"resamples {resamples}", file=sys.stderr)
    else:
        spec.validate()
        g = generate(spec)
    _write(g.dumps(), args.out)
    return EXIT_OK


def cmd_flood(args) -> int:
    try:
        g = Graph.loads(Path(args.graph).read_text(encoding="utf-8"))
    except (ValueError, IndexError) as exc:
        raise UsageError(f"cannot read graph {args.graph}: {exc}") from None
    r = elect(g, args.cds_algo, args.cap)
    formula = flooding_cost_formula(g, r.members)
    measured = average_flood_cost(g, r.members, args.valve)
    print(r.to_line())
    print(f"formula {formula} {float(formula):.6f}")
    print(f"measured{' valve' if args.valve else ''} {measured} {float(measured):.6f}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bubbleblue", description="Multihop group messaging experiments.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    s = sub.add_parser("sweep", help="CDS size and flooding cost versus density, as CSV")
    s.add_argument("--dim", type=int, choices=(1, 2), default=1, help="1 = segment, 2 = rectangle 1 x ell")
    s.add_argument("--ell", type=float, default=10.0, help="segment length or rectangle long side")
    s.add_argument("--lambda", dest="lambdas", type=_float_list, default=(5.0, 10.0, 20.0),
                   help="comma-separated densities (nodes per unit length or area)")
    s.add_argument("--trials", type=int, default=100, help="connected graphs per density")
    s.add_argument("--algos", type=_algo_list, default=("wu-li-1999", "mpr-cds"),
                   help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    s.add_argument("--valve", action="store_true", help="measure flooding with the check valve on")
    s.add_argument("--cap", type=int, default=DEFAULT_SOLVER_CAP, help="largest n the exact solver accepts")
    s.add_argument("--placement", choices=("fixed-n", "poisson"), default="fixed-n")
    s.add_argument("--seed", type=int, default=None, help="seed base (default $BB_SEED, else 0)")
    s.add_argument("--workers", type=int, default=None, help="worker processes (default: available CPUs)")
    s.add_argument("--out", default=None, help="CSV path (default stdout)")
    s.add_argument("--report", action="store_true", help="print slope fits and ordering checks to stderr")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("valve", help="measured check-valve savings on 1D deployments")
    v.add_argument("--ell", type=float, default=10.0)
    v.add_argument("--lambda", dest="lambdas", type=_float_list, default=(20.0,))
    v.add_argument("--trials", type=int, default=50)
    v.add_argument("--algos", type=_algo_list, default=("wu-li-1999", "mpr-cds"))
    v.add_argument("--seed", type=int, default=None, help="seed base (default $BB_SEED, else 0)")
    v.add_argument("--out", default=None, help="CSV path (default stdout)")
    v.set_defaults(func=cmd_valve)

    c = sub.add_parser("scenario", help="run a scenario file and print its event trace")
    c.add_argument("file", help="scenario file")
    c.add_argument("--seed", type=int, default=None, help="override the file's seed (or $BB_SEED)")
    c.add_argument("--no-hello", action="store_true", help="leave hello traffic out of the trace")
    c.add_argument("--out", default=None, help="trace path (default stdout)")
    c.set_defaults(func=cmd_scenario)

    k = sub.add_parser("keygen", help="generate a key matrix and write one column file per member")
    k.add_argument("--n", type=int, required=True, help="number of members (leader is member 0)")
    k.add_argument("--seed", type=int, default=None, help="reproducible keys (default $BB_SEED, else OS entropy)")
    k.add_argument("--out-dir", required=True, help="directory for member-XXX.bbkc files")
    k.set_defaults(func=cmd_keygen)

    g = sub.add_parser("graph", help="generate a unit disk graph in the text format")
    g.add_argument("--spec", required=True,
                   help="dim=1,ell=10,lambda=5[,seed=0][,placement=fixed-n][,width=1][,connected=true]")
    g.add_argument("--out", default=None, help="graph path (default stdout)")
    g.set_defaults(func=cmd_graph)

    f = sub.add_parser("flood", help="elect a CDS on a graph file and report flooding cost")
    f.add_argument("--graph", required=True, help="graph file")
    f.add_argument("--cds-algo", type=_algo, default="wu-li-1999", help=f"one of {','.join(ALGORITHMS)}")
    f.add_argument("--valve", action="store_true", help="measure with the check valve on")
    f.add_argument("--cap", type=int, default=DEFAULT_SOLVER_CAP, help="largest n the exact solver accepts")
    f.set_defaults(func=cmd_flood)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError, *VALIDATION_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort exit status
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
