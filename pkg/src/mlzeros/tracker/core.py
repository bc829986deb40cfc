"""Path tracking front end: configuration, batch tracking and refinement."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import PreconditionError
from ..poly import SparsePoly
from . import kernels
from .homotopy import Homotopy, build, merge_terms, poly_terms

STATUS_NAMES = kernels.STATUS_NAMES


@dataclass
class TrackerConfig:
    initial_step: float = 0.05
    min_step: float = 1e-7
    max_step: float = 0.1
    newton_tol: float = 1e-10
    corrector_tol: float = 1e-6
    max_newton_iters: int = 10
    max_corrector_iters: int = 3
    divergence_norm: float = 1e8
    end_t: float = 1e-12
    final_refine_tol: float = 1e-12
    predictor: str = "rk4"
    max_steps: int = 20000
    gamma_seed: int = 0
    gamma: complex | None = None
    threads: int = 1
    chunk_size: int = 2048

    def __post_init__(self):
        if not 0 < self.min_step <= self.initial_step < 1:
            raise ValueError("need 0 < min_step <= initial_step < 1")
        for name in ("newton_tol", "corrector_tol", "divergence_norm", "final_refine_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.predictor not in ("euler", "rk4"):
            raise ValueError("predictor must be 'euler' or 'rk4'")

    def gamma_value(self) -> complex:
        if self.gamma is not None:
            return complex(self.gamma)
        rng = np.random.default_rng(self.gamma_seed + 7919)
        return complex(np.exp(2j * np.pi * rng.uniform()))

    def replace(self, **kw) -> "TrackerConfig":
        d = asdict(self)
        d.update(kw)
        return TrackerConfig(**d)

    def to_json(self) -> dict:
        d = asdict(self)
        if d["gamma"] is not None:
            d["gamma"] = [d["gamma"].real, d["gamma"].imag]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown tracker settings {sorted(unknown)}")
        d = dict(d)
        if isinstance(d.get("gamma"), (list, tuple)):
            d["gamma"] = complex(*d["gamma"])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "TrackerConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError:  # python < 3.11
                import tomli as tomllib
            doc = tomllib.loads(text)
            doc = doc.get("tracker", doc)
        else:
            doc = json.loads(text)
            doc = doc.get("tracker", doc)
        return cls.from_dict(doc)


@dataclass
class PathResult:
    endpoint: np.ndarray
    status: str
    residual: float
    newton_contraction: float
    path_id: int
    t: float = 0.0
    steps: int = 0
    rejects: int = 0


@dataclass
class TrackResult:
    """Raw batch output in the homotopy's own coordinates."""

    X: np.ndarray
    status: np.ndarray
    stats: np.ndarray = field(repr=False)

    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.status == k)) for k, name in enumerate(STATUS_NAMES)}


def track_homotopy(hom: Homotopy, starts: np.ndarray, config: TrackerConfig) -> TrackResult:
    """Track every start point of ``hom`` (given in its coordinates) from t=1 to t=0."""
    X = np.ascontiguousarray(np.array(starts, dtype=complex).reshape(-1, hom.n))
    B = X.shape[0]
    status = np.zeros(B, dtype=np.int64)
    stats = np.zeros((B, 3), dtype=np.float64)
    args = (
        hom.arrs, hom.grp, hom.hom, config.end_t, config.initial_step, config.min_step,
        config.max_step, config.corrector_tol, config.max_corrector_iters, config.divergence_norm,
        config.final_refine_tol, config.max_newton_iters, config.predictor == "rk4", config.max_steps,
    )
    chunks = [(s, min(s + config.chunk_size, B)) for s in range(0, B, config.chunk_size)]

    def run(chunk):
        a, b = chunk
        kernels.track_many(X[a:b], *args, status[a:b], stats[a:b])

    if config.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            list(pool.map(run, chunks))
    else:
        for ch in chunks:
            run(ch)
    return TrackResult(X=X, status=status, stats=stats)


def compile_system(polys: Sequence[SparsePoly], scales=None) -> Homotopy:
    """Affine encoding of a fixed system (for evaluation and refinement)."""
    scales = np.ones(len(polys)) if scales is None else np.asarray(scales)
    eqs = [poly_terms(f, s, 0.0) for f, s in zip(polys, scales)]
    return build(eqs, len(polys[0].space))


def evaluate_system(hom: Homotopy, X, t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=complex)))
    H = np.zeros((X.shape[0], hom.n), dtype=complex)
    J = np.zeros((X.shape[0], hom.n, hom.n), dtype=complex)
    kernels.eval_many(X, float(t), hom.arrs, H, J)
    return H, J


def refine_points(hom: Homotopy, X, tol: float, max_iters: int):
    """Batch Newton refinement; returns (points, residual, contraction, converged)."""
    X = np.ascontiguousarray(np.array(np.atleast_2d(X), dtype=complex))
    B = X.shape[0]
    residual = np.zeros(B)
    contraction = np.zeros(B)
    iters = np.zeros(B, dtype=np.int64)
    ok = np.zeros(B, dtype=np.bool_)
    kernels.refine_many(X, hom.arrs, tol, max_iters, residual, contraction, iters, ok)
    return X, residual, contraction, ok


def newton_refine(system, point, tol: float = 1e-12, max_iters: int = 10):
    """Newton's method on a square system; returns ``(point, residual, contraction)``.

    A contraction well below 1 indicates quadratic convergence at a regular
    root; multiple roots converge linearly (contraction near ``1 - 1/m``).
    """
    polys = _equations(system)
    hom = compile_system(polys)
    X, res, contr, _ = refine_points(hom, np.asarray(point, dtype=complex)[None, :], tol, max_iters)
    return X[0], float(res[0]), float(contr[0])


def _equations(system) -> list[SparsePoly]:
    if hasattr(system, "equations"):
        return list(system.equations)
    return list(system)


def track_path(target, start, config: TrackerConfig | None = None, path_id: int = 0) -> PathResult:
    """Track one start point along ``gamma t G + (1-t) F`` in affine coordinates.

    ``start`` is ``(start_polys, point)``.
    """
    config = config or TrackerConfig()
    F = _equations(target)
    G, x0 = start
    G = _equations(G)
    x0 = np.asarray(x0, dtype=complex)
    hom_g = compile_system(G)
    res0 = np.max(np.abs(evaluate_system(hom_g, x0)[0]))
    if res0 > max(config.newton_tol, 1e-8):
        raise PreconditionError(f"start point residual {res0:.2e} exceeds tolerance")
    gamma = config.gamma_value()
    eqs = [merge_terms(poly_terms(f, 1.0, -1.0), poly_terms(g, 0.0, gamma)) for f, g in zip(F, G)]
    hom = build(eqs, len(F[0].space))
    out = track_homotopy(hom, x0[None, :], config)
    x = out.X[0]
    status = STATUS_NAMES[out.status[0]]
    contraction = 0.0
    hom_f = compile_system(F)
    if status == "converged":
        x, res, contr, ok = refine_points(hom_f, x[None, :], config.final_refine_tol, config.max_newton_iters)
        x, contraction = x[0], float(contr[0])
    residual = float(np.max(np.abs(evaluate_system(hom_f, x)[0]))) if np.all(np.isfinite(x)) else np.inf
    if status == "converged" and residual >= config.newton_tol:
        status = "singular_endpoint"
    t, steps, rejects = out.stats[0]
    return PathResult(x, status, residual, contraction, path_id, float(t), int(steps), int(rejects))
