"""Command-line front end.

Exit codes: 0 success, 1 numerical failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .manifolds import SO3, LogDomainError, get_manifold, project_rotation
from .thi import ManifoldSample, load_model, save_model, thi_eval, thi_fit

INPUT_TOL = 1e-8


class InputError(Exception):
    """Malformed or out-of-tolerance input file content."""


# -- line-oriented data files ----------------------------------------------

def _records(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                values = [float(tok) for tok in text.replace(",", " ").split()]
            except ValueError:
                raise InputError(f"{path}:{lineno}: cannot parse numbers from {line.strip()!r}") from None
            yield lineno, values


def _checked_point(manifold, values, where):
    if manifold is SO3:
        P = np.array(values, dtype=float).reshape(3, 3)
        err = np.max(np.abs(P.T @ P - np.eye(3)))
        if err > INPUT_TOL or np.linalg.det(P) <= 0:
            raise InputError(f"{where}: not a rotation (orthogonality error {err:.2e} > {INPUT_TOL:g})")
        return project_rotation(P) if err > 0 else P
    p = np.array(values, dtype=float)
    err = abs(np.linalg.norm(p) - 1.0)
    if err > INPUT_TOL:
        raise InputError(f"{where}: not a unit vector (norm error {err:.2e} > {INPUT_TOL:g})")
    return p / np.linalg.norm(p) if err > 0 else p


def read_samples(path, manifold, dim=2):
    """Parse a sample file: ``dim`` parameters, the point, then optionally
    ``dim`` ambient tangent vectors, whitespace separated, one per line."""
    psize = int(np.prod(manifold.point_shape))
    samples = []
    for lineno, vals in _records(path):
        where = f"{path}:{lineno}"
        if len(vals) not in (dim + psize, dim + psize + dim * psize):
            raise InputError(
                f"{where}: expected {dim + psize} or {dim + psize + dim * psize} numbers, got {len(vals)}"
            )
        omega = vals[:dim]
        p = _checked_point(manifold, vals[dim:dim + psize], where)
        derivs = None
        if len(vals) > dim + psize:
            rest = np.array(vals[dim + psize:])
            derivs = [v.reshape(manifold.point_shape) for v in rest.reshape(dim, psize)]
        samples.append(ManifoldSample(omega, p, derivs))
    if not samples:
        raise InputError(f"{path}: no samples")
    return samples


def read_queries(path, dim):
    rows = []
    for lineno, vals in _records(path):
        if len(vals) != dim:
            raise InputError(f"{path}:{lineno}: expected {dim} numbers, got {len(vals)}")
        rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, dim)


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def write_samples(samples, path):
    with open(path, "w") as fh:
        for s in samples:
            parts = [_fmt(s.omega), _fmt(s.p)]
            if s.derivs is not None:
                parts += [_fmt(v) for v in s.derivs]
            fh.write(" ".join(parts) + "\n")


def write_points(rows, path):
    with open(path, "w") as fh:
        for r in rows:
            fh.write(_fmt(r) + "\n")


# -- argument parsing ------------------------------------------------------

def _table_ids(text):
    try:
        ids = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid table list {text!r}") from None
    bad = [i for i in ids if i not in ex.TABLES]
    if bad or not ids:
        raise argparse.ArgumentTypeError(f"table ids must be in 1..{len(ex.TABLES)}, got {text!r}")
    return ids


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None


def _add_case_overrides(p):
    p.add_argument("--degree", type=int, help="total polynomial degree")
    p.add_argument("--no-derivatives", action="store_true", help="fit function values only")
    p.add_argument("--domain", type=float, nargs=2, metavar=("A", "B"), help="parameter box [A,B]^2")
    p.add_argument("--grid", choices=ex.GRID_KINDS, help="sampling grid kind")
    p.add_argument("--n-per-axis", type=int, help="sampling nodes per axis")


def build_parser():
    parser = argparse.ArgumentParser(prog="thi-arnoldi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run benchmark table cases")
    p.add_argument("--tables", type=_table_ids, default=list(ex.TABLES), help="comma list of ids 1..8")
    _add_case_overrides(p)
    p.add_argument("--out", type=Path, default=Path("reports"), help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--fd-step", type=float, default=1e-4)
    p.add_argument("--seed", type=int, help="use random uniform test points with this seed")

    p = sub.add_parser("convergence", help="average error against degree")
    p.add_argument("--test-fn", default="so3_simple", choices=sorted(ex.TEST_FUNCTIONS))
    p.add_argument("--degrees", type=_int_list, default=[2, 3, 4, 5, 6])
    p.add_argument("--grid", choices=ex.GRID_KINDS, default="uniform")
    p.add_argument("--n-per-axis", type=int, default=15)
    p.add_argument("--domain", type=float, nargs=2, default=(-0.5, 0.5), metavar=("A", "B"))
    p.add_argument("--no-derivatives", action="store_true")
    p.add_argument("--out", type=Path, default=Path("convergence.csv"))
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("fit", help="fit a model from a sample file")
    p.add_argument("samples", type=Path)
    p.add_argument("--manifold", choices=("so3", "s2"), required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--dim", type=int, default=2, help="parameter dimension")
    p.add_argument("--no-derivatives", action="store_true")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", help="evaluate a saved model at query points")
    p.add_argument("model", type=Path)
    p.add_argument("queries", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("export", help="write a table case's samples and test points")
    p.add_argument("--table", type=int, choices=sorted(ex.TABLES), required=True)
    _add_case_overrides(p)
    p.add_argument("--samples-out", type=Path, required=True)
    p.add_argument("--queries-out", type=Path)
    p.add_argument("--seed", type=int)
    return parser


def _case_from_args(tid, args):
    return ex.override_case(
        ex.TABLES[tid],
        degree=args.degree,
        with_derivatives=False if args.no_derivatives else None,
        kind=args.grid,
        n_per_axis=args.n_per_axis,
        domain=args.domain,
    )


# -- commands --------------------------------------------------------------

def cmd_bench(args):
    args.out.mkdir(parents=True, exist_ok=True)
    combined = {}
    for tid in args.tables:
        case = _case_from_args(tid, args)
        report = ex.run_case(case, fd_step=args.fd_step, seed=args.seed)
        report["reference_avg_err"] = ex.REFERENCE_AVG_ERR[tid]
        print(
            f"table {tid}: avg_err={report['avg_err']:.4e} max_err={report['max_err']:.4e} "
            f"rank={report['rank']}/{report['basis_size']}"
        )
        if args.format == "csv":
            ex.write_case_csv(report, args.out / f"table{tid}.csv")
        else:
            combined[f"table{tid}"] = {"config": ex.case_config(case), **report}
    if args.format == "json":
        ex.write_json(combined, args.out / "report.json")
    return 0


def cmd_convergence(args):
    rows = ex.convergence_study(
        args.test_fn, args.degrees, kind=args.grid, n_per_axis=args.n_per_axis,
        with_derivatives=not args.no_derivatives, domain=args.domain,
    )
    for r in rows:
        print(f"n={r['degree']:3d} points={r['m_points']} rank={r['rank']} avg_err={r['avg_err']:.4e}")
    if args.format == "csv":
        ex.write_rows_csv(rows, args.out)
    else:
        ex.write_json(rows, args.out)
    return 0


def cmd_fit(args):
    M = get_manifold(args.manifold)
    samples = read_samples(args.samples, M, args.dim)
    use_derivs = not args.no_derivatives
    if use_derivs and any(s.derivs is None for s in samples):
        raise InputError(f"{args.samples}: derivative data missing; pass --no-derivatives to fit values only")
    model = thi_fit(samples, args.degree, use_derivatives=use_derivs)
    save_model(model, args.out)
    print(f"fitted rank {model.rank}/{model.garnoldi.basis.size} on {len(samples)} samples -> {args.out}")
    return 0


def cmd_eval(args):
    model = load_model(args.model)
    queries = read_queries(args.queries, model.garnoldi.basis.dim)
    points = thi_eval(model, queries)
    write_points(points, args.out)
    return 0


def cmd_export(args):
    case = _case_from_args(args.table, args)
    samples = ex.make_samples(case.test_fn, case.plan.grid(), case.with_derivatives)
    write_samples(samples, args.samples_out)
    if args.queries_out:
        write_points(ex.case_test_grid(case, args.seed), args.queries_out)
    return 0


COMMANDS = {
    "bench": cmd_bench,
    "convergence": cmd_convergence,
    "fit": cmd_fit,
    "eval": cmd_eval,
    "export": cmd_export,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ArithmeticError, LogDomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
