"""Full solves, endpoint classification and parameter homotopies."""

from __future__ import annotations

import hashlib
import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetError, DegenerateDataError, IntegrityError, PreconditionError
from .likelihood import (
    LagrangeSystem,
    ParametricSystem,
    lagrange_system,
    parametric_system,
    restricted_system,
)
from .models import ModelSpec, ZeroPattern
from .poly import LAMBDA, P
from .tracker.kernels import STEP_FAILURE
from .tracker import (
    TrackerConfig,
    bezout_multihomog,
    bezout_total,
    build,
    compile_system,
    evaluate_system,
    merge_terms,
    multihomog_start,
    poly_terms,
    refine_points,
    total_degree_start,
    track_homotopy,
    variable_groups,
)

TOTAL_DEGREE = "total_degree"
MULTIHOMOG = "multihomog"


@dataclass
class SolverConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    path_budget: int = 2_000_000
    membership_tol: float = 1e-6
    zero_tol: float = 1e-6
    dedup_tol: float = 1e-6
    infinity_tol: float = 1e-8
    contraction_max: float = 0.1
    condition_max: float = 1e12
    late_failure_t: float = 1e-6
    start_seed: int = 0
    patch_seed: int = 0
    detour: bool = True

    def to_json(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "tracker"}
        d["tracker"] = self.tracker.to_json()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        d = dict(d)
        tr = TrackerConfig.from_dict(d.pop("tracker", {}))
        names = {f for f in cls.__dataclass_fields__} - {"tracker"}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown solver settings {sorted(unknown)}")
        return cls(tracker=tr, **d)

    @classmethod
    def load(cls, path: str | Path) -> "SolverConfig":
        """Read a JSON or TOML file: solver keys at top level, tracker keys in a ``tracker`` table."""
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError:  # python < 3.11
                import tomli as tomllib
            doc = tomllib.loads(text)
        else:
            doc = json.loads(text)
        return cls.from_dict(doc)

    def replace(self, **kw) -> "SolverConfig":
        d = dict(self.__dict__)
        d.update(kw)
        return SolverConfig(**d)


@dataclass
class CriticalPoint:
    p: np.ndarray
    lam: np.ndarray
    residual: float
    zero_pattern: frozenset[int]
    regular: bool
    on_model: bool
    source: str = "direct"
    contraction: float = 0.0
    condition: float = 1.0
    ambiguous: bool = False

    @property
    def counted(self) -> bool:
        return self.regular and self.on_model and not self.ambiguous

    def vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.lam])

    def to_json(self) -> dict:
        return {
            "p": [[float(z.real), float(z.imag)] for z in self.p],
            "lambda": [[float(z.real), float(z.imag)] for z in self.lam],
            "residual": float(self.residual),
            "regular": bool(self.regular),
            "on_model": bool(self.on_model),
            "ambiguous": bool(self.ambiguous),
            "zero_pattern": sorted(self.zero_pattern),
            "contraction": float(self.contraction),
            "condition": float(self.condition),
            "source": self.source,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CriticalPoint":
        return cls(
            p=np.array([complex(a, b) for a, b in d["p"]]),
            lam=np.array([complex(a, b) for a, b in d["lambda"]]),
            residual=d["residual"],
            zero_pattern=frozenset(d["zero_pattern"]),
            regular=d["regular"],
            on_model=d["on_model"],
            source=d.get("source", "archive"),
            contraction=d.get("contraction", 0.0),
            condition=d.get("condition", 1.0),
            ambiguous=d.get("ambiguous", False),
        )


@dataclass
class SolutionSet:
    points: list[CriticalPoint]
    model: ModelSpec
    u: np.ndarray
    pattern: ZeroPattern
    proper: bool = True
    stats: dict = field(default_factory=dict)
    start_counts: dict[frozenset[int], int] | None = None

    @property
    def counts(self) -> dict[frozenset[int], int]:
        out: dict[frozenset[int], int] = {}
        for pt in self.points:
            if pt.counted:
                out[pt.zero_pattern] = out.get(pt.zero_pattern, 0) + 1
        return out

    def count(self, R: Iterable[int] | None = None) -> int:
        """Regular on-model points, optionally only those with zero pattern ``R``."""
        if R is None:
            return sum(1 for pt in self.points if pt.counted)
        return self.counts.get(frozenset(R), 0)

    @property
    def regular(self) -> list[CriticalPoint]:
        return [pt for pt in self.points if pt.counted]

    @property
    def data_zeros(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.u == 0))

    def header(self, seeds: dict | None = None, config: SolverConfig | None = None) -> dict:
        return {
            "type": "header",
            "model": self.model.name,
            "model_hash": self.model.hash(),
            "model_json": self.model.to_json(),
            "u": [[float(z.real), float(z.imag)] for z in self.u],
            "pattern": self.pattern.to_json(),
            "proper": self.proper,
            "seeds": seeds or {},
            "config": config.to_json() if config else None,
            "count": self.count(),
        }

    def write(self, path: str | Path, seeds: dict | None = None, config: SolverConfig | None = None) -> None:
        lines = [json.dumps(self.header(seeds, config), sort_keys=True)]
        for pt in self.points:
            lines.append(json.dumps({"type": "point", **pt.to_json()}, sort_keys=True))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path: str | Path, model: ModelSpec | None = None) -> "SolutionSet":
        recs = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
        head = recs[0]
        if head.get("type") != "header":
            raise IntegrityError("archive has no header record")
        if model is None:
            model = ModelSpec.from_json(head["model_json"])
        elif model.hash() != head["model_hash"]:
            raise IntegrityError(f"archive belongs to model {head['model']} ({head['model_hash']}), not {model.hash()}")
        pts = [CriticalPoint.from_json(r) for r in recs[1:] if r.get("type") == "point"]
        u = np.array([complex(a, b) for a, b in head["u"]])
        pat = ZeroPattern(frozenset(head["pattern"]["R"]), frozenset(head["pattern"]["S"]))
        return cls(pts, model, u, pat, head.get("proper", True))


def generic_data(n: int, S: Iterable[int] = (), seed: int = 0) -> np.ndarray:
    """Seeded generic data in ``U_S``: entries from [1,2] x [-0.5,0.5]i, zeros on ``S``."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(1, 2, n + 1) + 1j * rng.uniform(-0.5, 0.5, n + 1)
    u[list(S)] = 0
    return u


# ---------------------------------------------------------------------------
# endpoint post-processing


def _canonical_key(pt: CriticalPoint):
    v = pt.vector()
    return tuple(itertools.chain.from_iterable((round(z.real, 6) + 0.0, round(z.imag, 6) + 0.0) for z in v))


def deduplicate(points: Sequence[CriticalPoint], tol: float = 1e-6) -> list[CriticalPoint]:
    """Cluster by max-norm distance below ``tol``; keep the lowest-residual member."""
    order = sorted(range(len(points)), key=lambda k: (points[k].residual, _canonical_key(points[k])))
    kept: list[CriticalPoint] = []
    vecs: list[np.ndarray] = []
    for k in order:
        v = points[k].vector()
        if any(np.max(np.abs(v - w)) < tol for w in vecs):
            continue
        kept.append(points[k])
        vecs.append(v)
    return sorted(kept, key=_canonical_key)


def classify_zero_pattern(p, S: Iterable[int], tol: float = 1e-6) -> tuple[frozenset[int], bool]:
    """Zero pattern ``R = {i in S : |p_i| < tol}`` and whether a zero sits outside ``S``."""
    p = np.asarray(p)
    S = frozenset(S)
    small = {int(i) for i in np.flatnonzero(np.abs(p) < tol)}
    return frozenset(small & S), bool(small - S)


def filter_membership(points: Sequence[CriticalPoint], model: ModelSpec, tol: float = 1e-6) -> list[CriticalPoint]:
    """Keep points at which every full generator vanishes (relative to its term sizes)."""
    return [pt for pt in points if model.membership_residual(pt.p) < tol]


# paths that reached t=0; the tracker's own final Newton pass can stall at the
# rounding floor, so regularity is decided by _finish, not by the status code
_REACHED = (0, 3)


def _late_failures(system: LagrangeSystem, Xa, rel, out, config: SolverConfig) -> np.ndarray:
    """Indices of step failures within ``late_failure_t`` of t=0 that Newton finishes.

    Badly scaled roots (large multipliers near the singular locus) make the
    step size collapse just before the end; their last points still sit
    inside the basin of the root.
    """
    late = (out.status == STEP_FAILURE) & (out.stats[:, 0] < config.late_failure_t) & (rel > config.infinity_tol)
    idx = np.flatnonzero(late)
    if idx.size == 0:
        return idx
    hom_f = compile_system(system.equations, system.scale_factors())
    _, _, contraction, ok = refine_points(hom_f, Xa[idx], config.tracker.final_refine_tol,
                                          config.tracker.max_newton_iters)
    return idx[ok & (contraction < config.contraction_max)]


def _condition(J: np.ndarray, X: np.ndarray) -> np.ndarray:
    if J.shape[0] == 0:
        return np.zeros(0)
    D = np.maximum(1.0, np.abs(X))
    Js = J * D[:, None, :]
    Js = Js / np.maximum(np.max(np.abs(Js), axis=2, keepdims=True), 1e-300)
    with np.errstate(all="ignore"):
        return np.linalg.cond(Js)


def _finish(
    system: LagrangeSystem,
    X: np.ndarray,
    config: SolverConfig,
    source: str,
    S_class: frozenset[int],
) -> list[CriticalPoint]:
    """Refine affine candidates against ``system`` and build critical points."""
    if X.shape[0] == 0:
        return []
    scales = system.scale_factors()
    hom_f = compile_system(system.equations, scales)
    tr = config.tracker
    X, _, contraction, ok = refine_points(hom_f, X, tr.final_refine_tol, tr.max_newton_iters)
    H, J = evaluate_system(hom_f, X)
    resid = np.max(np.abs(H / scales[None, :]), axis=1)
    cond = _condition(J, X)
    pts = []
    for k in range(X.shape[0]):
        if not np.all(np.isfinite(X[k])):
            continue
        p, lam = system.split(X[k])
        R, amb = classify_zero_pattern(p, S_class, config.zero_tol)
        regular = bool(ok[k]) and contraction[k] < config.contraction_max and cond[k] < config.condition_max
        on_model = system.model.membership_residual(p) < config.membership_tol
        pts.append(
            CriticalPoint(
                p=p,
                lam=lam,
                residual=float(resid[k]),
                zero_pattern=R,
                regular=regular,
                on_model=on_model,
                source=source,
                contraction=float(contraction[k]),
                condition=float(cond[k]),
                ambiguous=amb,
            )
        )
    return deduplicate(pts, config.dedup_tol)


# ---------------------------------------------------------------------------
# direct solves


def root_bound(system: LagrangeSystem, strategy: str) -> int:
    if strategy == TOTAL_DEGREE:
        return bezout_total(system.degrees())
    if strategy == MULTIHOMOG:
        return bezout_multihomog(system.bidegrees(), system.space.n_p, system.space.n_lambda)
    raise ValueError(f"unknown strategy {strategy!r}")


def build_system(model: ModelSpec, u, pattern: ZeroPattern | None) -> LagrangeSystem:
    if pattern is None:
        return lagrange_system(model, u)
    return restricted_system(model, pattern, u)


def solve_system(system: LagrangeSystem, strategy: str = MULTIHOMOG, config: SolverConfig | None = None,
                 label: str | None = None) -> SolutionSet:
    config = config or SolverConfig()
    pattern = system.pattern
    S_class = pattern.S | frozenset(int(i) for i in np.flatnonzero(system.u == 0))
    if not system.proper:
        return SolutionSet([], system.model, system.u, pattern, proper=False, stats={"paths": 0})
    bound = root_bound(system, strategy)
    if bound > config.path_budget:
        raise BudgetError(
            f"{strategy} bound {bound} exceeds the path budget {config.path_budget}"
            + (f" for {label}" if label else ""),
            bound,
            config.path_budget,
            label,
        )
    t0 = time.perf_counter()
    if strategy == TOTAL_DEGREE:
        start = total_degree_start(system.space, system.degrees(), seed=config.start_seed)
        groups = variable_groups(system.space.groups, "total")
    else:
        start = multihomog_start(system.space, system.bidegrees(), seed=config.start_seed)
        groups = variable_groups(system.space.groups, "multihomog")
        # factor group ids must follow the order of ``groups``
        if not system.space.group_indices(P):
            raise ValueError("system has no probability coordinates")
    scales = system.scale_factors()
    eqs = [poly_terms(f, s, -s) for f, s in zip(system.equations, scales)]
    gamma = config.tracker.gamma_value()
    hom = build(eqs, system.n_vars, start.factors, gamma, group_vars=groups, seed=config.patch_seed)
    X0 = hom.to_projective(start.points)
    t1 = time.perf_counter()
    out = track_homotopy(hom, X0, config.tracker)
    t2 = time.perf_counter()
    conv = np.isin(out.status, _REACHED)
    Xa, rel = hom.to_affine(out.X)
    finite = conv & (rel > config.infinity_tol)
    late = _late_failures(system, Xa, rel, out, config)
    source = "direct" if not pattern.R else f"subproblem({system.model.format_set(pattern.R)})"
    pts = _finish(system, np.concatenate([Xa[finite], Xa[late]]), config, source, S_class)
    t3 = time.perf_counter()
    counts = out.counts()
    stats = {
        "strategy": strategy,
        "paths": int(out.X.shape[0]),
        "bound": bound,
        **counts,
        "finite": int(finite.sum()),
        "at_infinity": int((conv & ~finite).sum()),
        "late_finished": int(late.size),
        "time_start": t1 - t0,
        "time_track": t2 - t1,
        "time_post": t3 - t2,
    }
    return SolutionSet(pts, system.model, system.u, pattern, proper=True, stats=stats)


def solve(
    model: ModelSpec,
    u,
    pattern: ZeroPattern | None = None,
    strategy: str = MULTIHOMOG,
    config: SolverConfig | None = None,
) -> SolutionSet:
    """Solve the (restricted) likelihood equations from a start system.

    ``pattern=None`` solves the unrestricted system, and the zeros of ``u``
    then only drive the classification of endpoints.
    """
    system = build_system(model, u, pattern)
    label = None if pattern is None else f"R={model.format_set(pattern.R)}, S={model.format_set(pattern.S)}"
    return solve_system(system, strategy, config, label)


# ---------------------------------------------------------------------------
# parameter homotopies


def _parametric_terms(par: ParametricSystem, ua: np.ndarray, ub: np.ndarray, scales: np.ndarray):
    """Terms of ``F(x; t ua + (1-t) ub)``."""
    eqs = []
    for f, s in zip(par.equations, scales):
        terms = {}
        for e, a in f.items():
            c_b = a[0] + a[1:] @ ub
            c_d = a[1:] @ (ua - ub)
            terms[e] = (s * c_b, s * c_d)
        eqs.append(terms)
    return eqs


def _start_vectors(par: ParametricSystem, starts) -> np.ndarray:
    if isinstance(starts, SolutionSet):
        starts = starts.points
    rows = []
    for pt in starts:
        if isinstance(pt, CriticalPoint):
            rows.append(np.concatenate([pt.p[list(par.p_index)], pt.lam]))
        else:
            rows.append(np.asarray(pt, dtype=complex))
    return np.array(rows, dtype=complex).reshape(-1, par.n_vars)


def parameter_homotopy(
    parametric: ParametricSystem,
    u_start,
    starts,
    u_target,
    config: SolverConfig | None = None,
    seed: int = 0,
) -> SolutionSet:
    """Move solutions of ``F(.; u_start)`` to ``F(.; u_target)`` along a complex parameter path."""
    config = config or SolverConfig()
    ua = np.asarray(u_start, dtype=complex)
    ub = np.asarray(u_target, dtype=complex)
    if not parametric.free_all_parameters:
        S = parametric.pattern.S
        if any(ub[i] != 0 for i in S) or any(ua[i] != 0 for i in S):
            raise ValueError("hard-wired data zeros must stay zero along the path")
    if ub.sum() == 0:
        raise DegenerateDataError("u_+ = 0 at the target")
    X = _start_vectors(parametric, starts)
    sys_a = parametric.specialize(ua)
    sys_b = parametric.specialize(ub)
    scales_a = sys_a.scale_factors()
    if X.shape[0]:
        res = np.max(np.abs(evaluate_system(compile_system(sys_a.equations, scales_a), X)[0]), axis=1)
        tol = max(1e3 * config.tracker.newton_tol, 1e-7)
        if np.any(res > tol):
            raise PreconditionError(f"{int(np.sum(res > tol))} start points do not solve the start system")
    S_class = frozenset(int(i) for i in np.flatnonzero(ub == 0)) | parametric.pattern.S
    t0 = time.perf_counter()
    waypoints = [ua]
    if config.detour and not np.array_equal(ua, ub):
        rng = np.random.default_rng(seed + 104729)
        scale = max(np.max(np.abs(ua)), np.max(np.abs(ub)))
        w = 0.5 * (ua + ub) + 0.5 * scale * (rng.normal(size=ua.size) + 1j * rng.normal(size=ua.size))
        if not parametric.free_all_parameters:
            w[list(parametric.pattern.S)] = 0
        waypoints.append(w)
    waypoints.append(ub)
    groups = variable_groups(parametric.space.groups, "multihomog")
    alive = np.arange(X.shape[0])
    track_counts = {"paths": int(X.shape[0])}
    cur = X
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        if np.array_equal(a, b) or cur.shape[0] == 0:
            continue
        sa = parametric.specialize(a).scale_factors()
        sb = parametric.specialize(b).scale_factors()
        scales = np.minimum(sa, sb)
        eqs = _parametric_terms(parametric, a, b, scales)
        hom = build(eqs, parametric.n_vars, group_vars=groups, seed=config.patch_seed)
        out = track_homotopy(hom, hom.to_projective(cur), config.tracker)
        Xa, rel = hom.to_affine(out.X)
        keep = np.isin(out.status, _REACHED) & (rel > config.infinity_tol)
        for k, name in enumerate(("converged", "diverged", "step_failure", "singular_endpoint")):
            track_counts[name] = track_counts.get(name, 0) + int(np.sum(out.status == k))
        cur = Xa[keep]
        alive = alive[keep]
    pts = _finish(sys_b, cur, config, f"tracked_from({_short(ua)})", S_class)
    track_counts["endpoints"] = len(pts)
    track_counts["time_track"] = time.perf_counter() - t0
    return SolutionSet(pts, parametric.model, ub, parametric.pattern, proper=parametric.proper, stats=track_counts)


def solve_special_fiber(
    model: ModelSpec,
    u,
    strategy: str = MULTIHOMOG,
    config: SolverConfig | None = None,
    solver=None,
) -> SolutionSet:
    """Critical points at data with zeros, assembled from the model-zero subproblems.

    Every ``R`` inside the zero set ``S`` of ``u`` is solved separately and the
    points carrying pattern ``R`` are collected into one set.
    """
    solver = solver or solve
    u = np.asarray(u, dtype=complex)
    S = frozenset(int(i) for i in np.flatnonzero(u == 0))
    pts: list[CriticalPoint] = []
    stats: dict = {}
    counts = {}
    for R in subsets(S):
        sols = solver(model, u, ZeroPattern(R, S), strategy, config)
        mine = [pt for pt in sols.points if pt.counted and pt.zero_pattern == R]
        counts[R] = len(mine)
        pts.extend(mine)
        for k, v in sols.stats.items():
            if isinstance(v, (int, float)) and not isinstance(v, bool) and k != "bound":
                stats[k] = stats.get(k, 0) + v
    out = SolutionSet(sorted(pts, key=_canonical_key), model, u, ZeroPattern(frozenset(), S), stats=stats)
    out.start_counts = counts
    return out


def _short(u: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(u).tobytes()).hexdigest()[:12]


def solve_fiber(model: ModelSpec, generic: SolutionSet, u_target, config: SolverConfig | None = None,
                seed: int = 0) -> SolutionSet:
    """Solutions of the unrestricted system at ``u_target`` reached from a generic solve."""
    par = parametric_system(model, ZeroPattern(), free_all_parameters=True)
    return parameter_homotopy(par, generic.u, generic.regular, u_target, config, seed=seed)


def subsets(S: Iterable[int]):
    S = sorted(S)
    for k in range(len(S) + 1):
        for R in itertools.combinations(S, k):
            yield frozenset(R)


def ml_table_homotopy(
    model: ModelSpec,
    S: Iterable[int],
    seed_start: int = 0,
    seed_target: int = 1,
    strategy: str = MULTIHOMOG,
    config: SolverConfig | None = None,
    solver=None,
) -> SolutionSet:
    """Solve every model-zero subproblem at data in ``U_S``, then move all of them to generic data.

    The per-``R`` start counts are returned in ``start_counts``.
    """
    config = config or SolverConfig()
    solver = solver or solve
    S = model.indices(S)
    u_s = generic_data(model.n, S, seed_start)
    u_t = generic_data(model.n, (), seed_target)
    starts: list[CriticalPoint] = []
    counts = {}
    for R in subsets(S):
        sols = solver(model, u_s, ZeroPattern(R, S), strategy, config)
        mine = [pt for pt in sols.points if pt.counted and pt.zero_pattern == R]
        counts[R] = len(mine)
        starts.extend(mine)
    par = parametric_system(model, ZeroPattern(), free_all_parameters=True)
    result = parameter_homotopy(par, u_s, starts, u_t, config, seed=seed_target)
    result.start_counts = counts
    result.stats["u_start"] = u_s
    return result
