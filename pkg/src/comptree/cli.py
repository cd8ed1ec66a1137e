"""Command-line interface.

Exit codes: 0 ok, 1 failed verification, 2 bad arguments, 3 bad data,
4 enumeration refused by the feasibility guard.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import synth, theory
from .basis import DEFAULT_SPEC, DomainError, catalog_spec, from_spec
from .estimator import CompositionalTreeRegressor
from .solver import clipped_loss, predict, trace_csv
from .tree import ParseError, deserialize, fmt_float, serialize

EXIT_OK, EXIT_VERIFY, EXIT_ARGS, EXIT_DATA, EXIT_GUARD = 0, 1, 2, 3, 4

log = logging.getLogger("comptree")


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message, EXIT_ARGS)


def _default_seed() -> int:
    raw = os.environ.get("COMPTREE_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"COMPTREE_SEED must be an integer, got {raw!r}", EXIT_ARGS) from None


def read_csv(path: str, target: str | None) -> tuple[list[str], np.ndarray, np.ndarray | None]:
    """Load a headered numeric CSV; returns (covariate names, X, y or None)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}", EXIT_DATA) from None
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise CliError(f"{path}: empty file", EXIT_DATA)
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise CliError(f"{path}: no data rows", EXIT_DATA)
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise CliError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}", EXIT_DATA)
    try:
        data = np.array([[float(c) for c in r] for r in body])
    except ValueError as e:
        raise CliError(f"{path}: non-numeric value ({e})", EXIT_DATA) from None
    if not np.all(np.isfinite(data)):
        raise CliError(f"{path}: non-finite value", EXIT_DATA)
    if target is None:
        return header, data, None
    if target not in header:
        raise CliError(f"{path}: target column {target!r} not found", EXIT_DATA)
    t = header.index(target)
    names = [h for i, h in enumerate(header) if i != t]
    X = np.delete(data, t, axis=1)
    if X.shape[1] == 0:
        raise CliError(f"{path}: no covariate columns", EXIT_DATA)
    return names, X, data[:, t]


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise CliError(f"cannot write {path}: {e.strerror}", EXIT_DATA) from None


# --- subcommands -------------------------------------------------------------------

def cmd_fit(args) -> int:
    if args.basis is None:
        args.basis = DEFAULT_SPEC if args.q is None else catalog_spec(args.q)
    try:
        basis = from_spec(args.basis, q=args.q)
    except ValueError as e:
        raise CliError(f"--basis/--q: {e}", EXIT_ARGS) from None
    if args.iters < 0:
        raise CliError("--iters must be >= 0", EXIT_ARGS)
    _, X, y = read_csv(args.data, args.target)
    est = CompositionalTreeRegressor(basis=args.basis, q=args.q, iters=args.iters,
                                     early_stop=not args.no_early_stop, rescale=args.rescale)
    try:
        est.fit(X, y)
    except DomainError as e:
        raise CliError(f"{args.data}: {e} (use --rescale)", EXIT_DATA) from None
    _write(args.out, serialize(est.model_) + "\n")
    if args.trace:
        _write(args.trace, trace_csv(est.trace_))
    clipped = float(np.mean(clipped_loss(y, est.predict(X))))
    print(f"leaves: {est.model_.n_leaves}")
    print(f"q: {basis.q}")
    print(f"seed: {args.seed}")
    print(f"rss: {fmt_float(est.rss_)}")
    print(f"clipped_risk: {fmt_float(clipped)}")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model = deserialize(Path(args.model).read_text(encoding="utf-8"))
    except OSError as e:
        raise CliError(f"cannot read {args.model}: {e.strerror}", EXIT_DATA) from None
    except ParseError as e:
        raise CliError(f"{args.model}: {e}", EXIT_DATA) from None
    header, data, _ = read_csv(args.data, None)
    if args.target in header:
        data = np.delete(data, header.index(args.target), axis=1)
    if model.p is not None and data.shape[1] != model.p:
        raise CliError(f"{args.data}: model expects {model.p} covariates, got {data.shape[1]}", EXIT_DATA)
    if model.root is not None and model.basis is None:
        raise CliError(f"{args.model}: model file has no :basis entry", EXIT_DATA)
    try:
        y_hat = predict(model, data)
    except (DomainError, ValueError) as e:
        raise CliError(f"{args.data}: {e}", EXIT_DATA) from None
    text = "y_hat\n" + "".join(fmt_float(v) + "\n" for v in y_hat)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bounds(args) -> int:
    try:
        b = theory.BoundInputs(n=args.n, k=args.k, p=args.p, q=args.q, delta=args.delta,
                               epsilon=args.eps, sigma_eps=args.sigma)
    except ValueError as e:
        raise CliError(str(e), EXIT_ARGS) from None
    report = theory.bound_report(b)
    sys.stdout.write(report.csv() if args.csv else report.text())
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.k < 0 or args.p < 1 or args.q < 1:
        raise CliError("--k must be >= 0 and --p, --q >= 1", EXIT_ARGS)
    try:
        enumerated = sum(1 for _ in theory.enumerate_tree_tuples(args.k, args.p, args.q, exact=args.exact,
                                                                 guard=args.guard))
    except theory.GuardError as e:
        raise CliError(str(e), EXIT_GUARD) from None
    recurrence = theory.count_trees(args.k, args.p, args.q, exact=args.exact)
    print(f"k: {args.k}")
    print(f"mode: {'exact' if args.exact else 'at-most'}")
    print(f"count: {enumerated}")
    print(f"recurrence: {recurrence}")
    if not args.verify:
        return EXIT_OK
    bound = theory.tree_count_bound(args.k, args.p, args.q)
    mf = theory.max_mf(args.k)
    mf_bound = theory.MF_GROWTH ** (args.k + 1)
    ok = enumerated == recurrence and enumerated <= bound and mf < mf_bound
    print(f"count_bound: {bound}")
    print(f"max_mf: {mf}")
    print(f"max_mf_bound: {mf_bound!r}")
    print(f"verified: {'yes' if ok else 'NO'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_experiment(args) -> int:
    if args.trials < 1:
        raise CliError("--trials must be >= 1", EXIT_ARGS)
    if args.scale <= 0:
        raise CliError("--scale must be positive", EXIT_ARGS)
    results = []
    for exp_id in args.id:
        rs = synth.run_experiment(exp_id, trials=args.trials, seed=args.seed, scale=args.scale,
                                  metric=args.metric, n_jobs=args.jobs)
        results.extend(rs)
        direction = synth.EXPECTED_DIRECTION[exp_id]
        for r in rs:
            print(f"experiment {exp_id} {r.sweep_variable}={r.sweep_value}: "
                  f"mean={r.mean:.6g} ci95={r.ci95_half_width:.6g}")
        print(f"experiment {exp_id} trend ({direction}): "
              f"{'ok' if synth.trend_holds(rs, direction) else 'violated'}")
    try:
        paths = synth.emit_results(results, args.out_dir)
    except OSError as e:
        raise CliError(f"cannot write to {args.out_dir}: {e}", EXIT_DATA) from None
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="comptree", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("fit", help="fit a tree to a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--target", default="y")
    p.add_argument("--basis", help=f"basis spec (default {DEFAULT_SPEC}, extended with Fourier terms if --q needs more)")
    p.add_argument("--q", type=int)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--rescale", action="store_true")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="apply a model file to a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--target", default="y", help="column to ignore if present")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bounds", help="evaluate the sample-complexity bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("enumerate", help="count labeled trees by brute force")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--exact", action="store_true", help="exactly k operations instead of at most k")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--guard", type=float, default=theory.GUARD_LIMIT)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("experiment", help="run synthetic sweeps")
    p.add_argument("--id", type=int, nargs="+", choices=sorted(synth.EXPERIMENTS), required=True)
    p.add_argument("--trials", type=int, default=synth.DEFAULT_TRIALS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--metric", choices=synth.METRICS, default="gap")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "seed", "absent") is None:
            args.seed = _default_seed()
        return args.func(args)
    except CliError as e:
        print(f"comptree: error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    raise SystemExit(main())
