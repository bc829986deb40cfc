"""Command line entry point: ``mlzeros <command> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BudgetError, DegenerateDataError, IntegrityError, MLZerosError, PreconditionError, StructuralError
from .likelihood import lagrange_system, parametric_system, restricted_system
from .mltable import (
    dual_pairing,
    hks_mldegree,
    hypersurface_column_bound,
    hypersurface_table_entry,
    ml_table,
    rank2_3xn_series,
)
from .models import (
    ModelSpec,
    ZeroPattern,
    determinantal,
    generic_hypersurface,
    grassmannian_2n,
    raw_model,
    tensor_2222_rank2,
)
from .poly import VariableSpace, polys_from_text
from .solver import (
    MULTIHOMOG,
    TOTAL_DEGREE,
    SolutionSet,
    SolverConfig,
    generic_data,
    ml_table_homotopy,
    parameter_homotopy,
    root_bound,
    solve,
    solve_special_fiber,
)

EXIT_OK = 0
EXIT_BUDGET = 2
EXIT_DATA = 3
EXIT_USAGE = 64

DEFAULT_BUDGET = SolverConfig().path_budget


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# argument helpers


def _model_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=["hypersurface", "matrix-rank", "grassmannian", "tensor2222", "raw"],
                   required=required)
    g.add_argument("--degree", type=int, help="hypersurface degree d")
    g.add_argument("--dim", type=int, help="hypersurface ambient dimension n")
    g.add_argument("--coeffs", help="comma-separated hypersurface coefficients")
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--rank", type=int)
    g.add_argument("--n", type=int, help="number of points for Gr(2, n)")
    g.add_argument("--paper-quadrics", action="store_true", help="Gr(2,6): use the six listed quadrics")
    g.add_argument("--generators", help="raw model: generator file in the polynomial text format")
    g.add_argument("--codim", type=int, help="raw model: codimension")


def _run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for data, model randomization and start system")
    p.add_argument("--strategy", choices=[MULTIHOMOG, TOTAL_DEGREE], default=MULTIHOMOG)
    p.add_argument("--config", help="JSON or TOML configuration file")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("--budget", type=int, default=None, help="path budget")
    p.add_argument("--extended", action="store_true", help="allow runs above the default path budget")
    p.add_argument("--manifest", help="manifest path (default: next to the output)")


def _parse_complex_list(text: str) -> np.ndarray:
    return np.array([complex(tok.strip().replace(" ", "")) for tok in text.split(",") if tok.strip()])


def build_model(args) -> ModelSpec:
    kind = args.model
    if kind == "hypersurface":
        if args.degree is None or args.dim is None:
            raise UsageError("hypersurface needs --degree and --dim")
        coeffs = None
        if args.coeffs:
            coeffs = [complex(c) if "j" in c else float(c) for c in args.coeffs.split(",")]
        return generic_hypersurface(args.degree, args.dim, coeffs=coeffs, seed=args.seed)
    if kind == "matrix-rank":
        if None in (args.rows, args.cols, args.rank):
            raise UsageError("matrix-rank needs --rows, --cols and --rank")
        if not 1 <= args.rank < min(args.rows, args.cols):
            raise UsageError("need 1 <= rank < min(rows, cols)")
        return determinantal(args.rows, args.cols, args.rank, seed=args.seed)
    if kind == "grassmannian":
        if args.n is None or args.n < 4:
            raise UsageError("grassmannian needs --n >= 4")
        return grassmannian_2n(args.n, seed=args.seed, paper_quadrics=args.paper_quadrics)
    if kind == "tensor2222":
        return tensor_2222_rank2(seed=args.seed)
    if kind == "raw":
        if not args.generators or args.codim is None:
            raise UsageError("raw needs --generators and --codim")
        text = Path(args.generators).read_text()
        first = next(line for line in text.splitlines() if ":" in line)
        n_vars = len(first.split(":")[1].split())
        space = VariableSpace.make([f"p{i}" for i in range(n_vars)], 0)
        gens = polys_from_text(space, text)
        return raw_model(Path(args.generators).stem, gens, args.codim, seed=args.seed)
    raise UsageError(f"unknown model {kind}")


def _index_set(model: ModelSpec, text: str | None) -> frozenset[int]:
    if text is None or not text.strip():
        return frozenset()
    try:
        return model.indices([tok.strip() for tok in text.split(",") if tok.strip()])
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad index set {text!r}: {exc}") from exc


def _config(args) -> SolverConfig:
    cfg = SolverConfig.load(args.config) if args.config else SolverConfig()
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if threads < 1:
        raise UsageError("--threads must be positive")
    tracker = cfg.tracker.replace(threads=threads, gamma_seed=cfg.tracker.gamma_seed + args.seed)
    budget = args.budget if args.budget is not None else cfg.path_budget
    if args.extended:
        budget = max(budget, 10**12)
    elif budget > DEFAULT_BUDGET:
        raise UsageError("budgets above the default need --extended")
    return cfg.replace(tracker=tracker, path_budget=budget, start_seed=cfg.start_seed + args.seed,
                       patch_seed=cfg.patch_seed + args.seed)


def _data(args, model: ModelSpec, S: frozenset[int]) -> np.ndarray:
    if getattr(args, "real_data", None):
        u = _parse_complex_list(args.real_data)
        if u.size != model.n + 1:
            raise UsageError(f"data vector needs {model.n + 1} entries")
        return u
    return generic_data(model.n, S, args.seed)


def _seeds(args, cfg: SolverConfig) -> dict:
    return {
        "seed": args.seed,
        "start_seed": cfg.start_seed,
        "patch_seed": cfg.patch_seed,
        "gamma_seed": cfg.tracker.gamma_seed,
    }


def _write_manifest(path: Path | None, args, model: ModelSpec | None, cfg: SolverConfig | None, timings: dict,
                    stats: dict, extra: dict | None = None) -> None:
    if path is None:
        return
    doc = {
        "command": sys.argv[:] if args is None else args._argv,
        "tool_version": __version__,
        "model": None if model is None else model.name,
        "model_hash": None if model is None else model.hash(),
        "seeds": None if cfg is None else _seeds(args, cfg),
        "config": None if cfg is None else cfg.to_json(),
        "timings": timings,
        "path_stats": _jsonable(stats),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        doc.update(_jsonable(extra))
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(sorted(k)) if isinstance(k, frozenset) else str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [[float(z.real), float(z.imag)] for z in obj.ravel()] if np.iscomplexobj(obj) else obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _manifest_path(args, out: Path | None) -> Path | None:
    if args.manifest:
        return Path(args.manifest)
    if out is not None:
        return out.with_name(out.name + ".manifest.json")
    return None


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    model = build_model(args)
    cfg = _config(args)
    S = _index_set(model, args.zeros)
    R = _index_set(model, args.model_zeros)
    if not R <= S:
        raise UsageError("--model-zeros must be a subset of --zeros")
    u = _data(args, model, S)
    if args.real_data and not args.zeros:
        S = frozenset(int(i) for i in np.flatnonzero(u == 0))
    t1 = time.perf_counter()
    if args.full_system:
        sols = solve(model, u, None, args.strategy, cfg)
    else:
        sols = solve(model, u, ZeroPattern(R, S), args.strategy, cfg)
    t2 = time.perf_counter()
    out = Path(args.out) if args.out else None
    if out is not None:
        sols.write(out, seeds=_seeds(args, cfg), config=cfg)
    count = sols.count(R) if not args.full_system else sols.count()
    t3 = time.perf_counter()
    _write_manifest(_manifest_path(args, out), args, model, cfg,
                    {"setup": t1 - t0, "solve": t2 - t1, "write": t3 - t2, "total": t3 - t0}, sols.stats,
                    {"count": count, "counts_by_pattern": {model.format_set(k): v for k, v in sols.counts.items()},
                     "proper": sols.proper})
    print(count)
    msg = f"{model.name}: {count} regular on-model solutions"
    if not sols.proper:
        msg += " (non-proper subproblem: count 0 by definition)"
    print(msg, file=sys.stderr)
    return EXIT_OK


def _parse_columns(model: ModelSpec, text: str) -> list[frozenset[int]]:
    return [_index_set(model, part) for part in text.split(";")]


def cmd_table(args) -> int:
    t0 = time.perf_counter()
    model = build_model(args)
    cfg = _config(args)
    cols = _parse_columns(model, args.columns)
    table = ml_table(model, cols, seed=args.seed, strategy=args.strategy, config=cfg)
    text = table.to_csv() if args.format == "csv" else table.to_markdown()
    lines = [text]
    for S, rep in table.column_bounds().items():
        verdict = "" if rep["bound_holds"] is None else (" <= " if rep["bound_holds"] else " > ") + str(rep["ml_degree"])
        lines.append(f"column {table.fmt(S)}: sum {rep['sum']}{verdict}")
    report = "\n".join(lines)
    if args.out:
        Path(args.out).write_text(text)
    print(report)
    stats = {f"{table.fmt(R)}|{table.fmt(S)}": st for (R, S), st in table.stats.items()}
    _write_manifest(_manifest_path(args, Path(args.out) if args.out else None), args, model, cfg,
                    {"total": time.perf_counter() - t0}, stats, {"table": table.to_json()})
    return EXIT_OK


def cmd_homotopy(args) -> int:
    t0 = time.perf_counter()
    model = build_model(args)
    cfg = _config(args)
    target = _parse_complex_list(args.target_u) if args.target_u else generic_data(model.n, (), args.seed + 1)
    if target.size != model.n + 1:
        raise UsageError(f"target data needs {model.n + 1} entries")
    par = parametric_system(model, ZeroPattern(), free_all_parameters=True)
    if args.start_archive:
        starts = SolutionSet.read(args.start_archive, model)
        start_counts = None
        result = parameter_homotopy(par, starts.u, starts.regular, target, cfg, seed=args.seed)
        n_starts = len(starts.regular)
    elif args.auto_subproblems:
        S = _index_set(model, args.zeros)
        if args.target_u:
            raise UsageError("--target-u is only used with --start-archive")
        result = ml_table_homotopy(model, S, args.seed, args.seed + 1, args.strategy, cfg)
        start_counts = result.start_counts
        n_starts = sum(start_counts.values())
    else:
        raise UsageError("need --start-archive or --auto-subproblems")
    out = Path(args.out) if args.out else None
    if out is not None:
        result.write(out, seeds=_seeds(args, cfg), config=cfg)
    n_end = result.count()
    report = {"starts": n_starts, "endpoints": n_end}
    if start_counts is not None:
        report["start_counts"] = {model.format_set(R): v for R, v in start_counts.items()}
    if args.compare_degree:
        gen = solve(model, generic_data(model.n, (), args.seed + 1), ZeroPattern(), args.strategy, cfg).count()
        report["ml_degree"] = gen
        report["deficit"] = gen - n_end
    _write_manifest(_manifest_path(args, out), args, model, cfg, {"total": time.perf_counter() - t0},
                    result.stats, {"report": report})
    print(json.dumps(report, sort_keys=True))
    if report.get("deficit"):
        print(f"start count {n_starts} is below the ML degree {report['ml_degree']}", file=sys.stderr)
    return EXIT_OK


def _hypersurface_grid(d: int, n: int) -> str:
    head = "r\\s | " + " | ".join(str(s) for s in range(n + 1))
    lines = [head]
    for r in range(n + 1):
        cells = [str(hypersurface_table_entry(d, n, r, s)) if r <= s else "" for s in range(n + 1)]
        lines.append(f"{r} | " + " | ".join(cells))
    lines.append("bound | " + " | ".join(str(hypersurface_column_bound(d, n, s)) for s in range(n + 1)))
    return "\n".join(lines)


def cmd_formulas(args) -> int:
    if args.kind == "hypersurface":
        vals = [int(v) for v in args.values]
        if len(vals) == 2:
            d, n = vals
            print(f"ml degree {hks_mldegree(d, n)}")
            print(_hypersurface_grid(d, n))
            if args.check:
                return _check_hypersurface(args, d, n)
        elif len(vals) == 4:
            d, n, r, s = vals
            print(hypersurface_table_entry(d, n, r, s))
        else:
            raise UsageError("formulas hypersurface d n [r s]")
        return EXIT_OK
    if args.kind == "rank2-3xn":
        if len(args.values) != 1:
            raise UsageError("formulas rank2-3xn n")
        print(rank2_3xn_series(int(args.values[0])))
        return EXIT_OK
    if args.kind == "bezout":
        model = build_model(args)
        S = _index_set(model, args.zeros)
        R = _index_set(model, args.model_zeros)
        u = generic_data(model.n, S, args.seed)
        system = restricted_system(model, ZeroPattern(R, S), u) if S else lagrange_system(model, u)
        print(json.dumps({"total_degree": root_bound(system, TOTAL_DEGREE),
                          "multihomog": root_bound(system, MULTIHOMOG)}))
        return EXIT_OK
    raise UsageError(f"unknown formula {args.kind}")


def _check_hypersurface(args, d: int, n: int) -> int:
    """Solve small instances and compare with the closed form."""
    model = generic_hypersurface(d, n, seed=args.seed)
    cfg = SolverConfig()
    bad = 0
    for s in range(min(n, 2) + 1):
        S = frozenset(range(s))
        u = generic_data(n, S, args.seed)
        for r in range(s + 1):
            R = frozenset(range(r))
            got = solve(model, u, ZeroPattern(R, S), MULTIHOMOG, cfg).count(R)
            want = hypersurface_table_entry(d, n, r, s)
            flag = "ok" if got == want else "MISMATCH"
            bad += got != want
            print(f"check r={r} s={s}: solver {got}, formula {want} {flag}")
    return EXIT_OK if not bad else EXIT_DATA


def cmd_duality(args) -> int:
    t0 = time.perf_counter()
    m, k, r = args.rows, args.cols, args.rank
    if min(m, k) < 2 or not 1 <= r < min(m, k):
        raise UsageError("need 1 <= rank < min(rows, cols)")
    cfg = _config(args)
    small = min(m, k)
    r_dual = small - r + 1
    X = determinantal(m, k, r, seed=args.seed)
    Y = X if r_dual == r else determinantal(m, k, r_dual, seed=args.seed)
    S = _index_set(X, args.zeros)
    u = generic_data(X.n, S, args.seed)
    if S:
        solsX = solve_special_fiber(X, u, args.strategy, cfg)
        solsY = solsX if Y is X else solve_special_fiber(Y, u, args.strategy, cfg)
    else:
        solsX = solve(X, u, ZeroPattern(), args.strategy, cfg)
        solsY = solsX if Y is X else solve(Y, u, ZeroPattern(), args.strategy, cfg)
    rep = dual_pairing(solsX, solsY, u.reshape(m, k), tol=args.tol)
    doc = rep.to_json(X.labels)
    doc["rank"] = r
    doc["dual_rank"] = r_dual
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    _write_manifest(_manifest_path(args, Path(args.out) if args.out else None), args, X, cfg,
                    {"total": time.perf_counter() - t0}, solsX.stats)
    return EXIT_OK


# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mlzeros", description="Likelihood critical points with sampling and model zeros.")
    parser.add_argument("--version", action="version", version=f"mlzeros {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve the likelihood equations for one zero pattern")
    _model_args(p)
    _run_args(p)
    p.add_argument("--zeros", help="data zeros S (comma-separated labels)")
    p.add_argument("--model-zeros", help="model zeros R, a subset of S")
    p.add_argument("--real-data", help="explicit data vector instead of seeded generic data")
    p.add_argument("--full-system", action="store_true",
                   help="solve the unrestricted system and classify endpoints by zero pattern")
    p.add_argument("--out", help="archive path (JSON lines)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("table", help="ML table for a list of columns S")
    _model_args(p)
    _run_args(p)
    p.add_argument("--columns", required=True, help="semicolon-separated index sets, e.g. ';11;12;11,12'")
    p.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    p.add_argument("--out", help="write the table here")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("homotopy", help="parameter homotopy from subproblem solutions or an archive")
    _model_args(p)
    _run_args(p)
    p.add_argument("--start-archive", help="archive with start solutions")
    p.add_argument("--auto-subproblems", action="store_true", help="solve all R within --zeros first")
    p.add_argument("--zeros", help="data zeros S for --auto-subproblems")
    p.add_argument("--target-u", help="target data vector (default: seeded generic)")
    p.add_argument("--compare-degree", action="store_true", help="also solve at the target and report the deficit")
    p.add_argument("--out", help="archive path for the endpoints")
    p.set_defaults(func=cmd_homotopy)

    p = sub.add_parser("formulas", help="closed-form counts")
    p.add_argument("kind", choices=["hypersurface", "rank2-3xn", "bezout"])
    p.add_argument("values", nargs="*")
    p.add_argument("--check", action="store_true", help="compare with solver counts on small instances")
    _model_args(p, required=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zeros")
    p.add_argument("--model-zeros")
    p.set_defaults(func=cmd_formulas)

    p = sub.add_parser("duality", help="pair critical points of a rank model and its dual")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--zeros", help="data zeros S as 'ij' labels")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", help="write the JSON report here")
    _run_args(p)
    p.set_defaults(func=cmd_duality)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args._argv = ["mlzeros", *argv]
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mlzeros: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"mlzeros: budget error: {exc} (bound {exc.bound}, budget {exc.budget})", file=sys.stderr)
        return EXIT_BUDGET
    except (DegenerateDataError, IntegrityError, PreconditionError, StructuralError, ValueError) as exc:
        print(f"mlzeros: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MLZerosError as exc:
        print(f"mlzeros: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
