"""ML tables, closed-form counts and the duality pairing for matrix models."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateDataError
from .models import ModelSpec, ZeroPattern
from .solver import (
    MULTIHOMOG,
    SolutionSet,
    SolverConfig,
    generic_data,
    parameter_homotopy,
    solve,
    subsets,
)
from .likelihood import parametric_system


# ---------------------------------------------------------------------------
# closed forms


def _check_d(d: int) -> None:
    if d == 1:
        raise ValueError("d = 1 is a pole of the formula (linear hypersurface)")
    if d < 1:
        raise ValueError("degree must be at least 2")


def hypersurface_table_entry(d: int, n: int, r: int, s: int) -> int:
    """ML table entry of a generic degree-``d`` hypersurface in ``P^n`` for ``|R|=r``, ``|S|=s``."""
    _check_d(d)
    if not (0 <= r and 0 <= s <= n):
        raise ValueError("need 0 <= r and 0 <= s <= n")
    if s < r:
        return 0
    if s == r:
        num = d * (d ** (n - s) - 1)
        assert num % (d - 1) == 0
        return num // (d - 1)
    return d ** (n - s + 1) * (d - 1) ** (s - r - 1)


def hks_mldegree(d: int, n: int) -> int:
    """ML degree of a generic degree-``d`` hypersurface in ``P^n``."""
    _check_d(d)
    if n < 1:
        raise ValueError("n must be positive")
    return d * (d**n - 1) // (d - 1)


def hypersurface_column(d: int, n: int, s: int) -> dict[int, int]:
    """Entries ``r -> M(r, s, n)`` of one column."""
    return {r: hypersurface_table_entry(d, n, r, s) for r in range(s + 1)}


def hypersurface_column_bound(d: int, n: int, s: int) -> int:
    """Column sum over all ``R`` subsets of an ``s``-set: ``sum_r C(s, r) M(r, s, n)``."""
    from math import comb

    return sum(comb(s, r) * m for r, m in hypersurface_column(d, n, s).items())


def rank2_3xn_series(n: int) -> int:
    """Conjectured ML degree ``2^(n+1) - 6`` of rank-2 3-by-n matrices (a conjecture value)."""
    if n < 3:
        raise ValueError("series starts at n = 3")
    return 2 ** (n + 1) - 6


# ---------------------------------------------------------------------------
# tables


@dataclass
class MLTable:
    model: str
    labels: tuple[str, ...]
    columns: list[frozenset[int]]
    entries: dict[tuple[frozenset[int], frozenset[int]], int] = field(default_factory=dict)
    proper_flags: dict[tuple[frozenset[int], frozenset[int]], bool] = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def set(self, R, S, count: int, proper: bool = True) -> None:
        R, S = frozenset(R), frozenset(S)
        if not R <= S:
            raise ValueError("table entries need R within S")
        self.entries[(R, S)] = 0 if not proper else int(count)
        self.proper_flags[(R, S)] = bool(proper)

    def entry(self, R, S) -> int:
        return self.entries[(frozenset(R), frozenset(S))]

    def column(self, S) -> dict[frozenset[int], int]:
        S = frozenset(S)
        return {R: v for (R, T), v in self.entries.items() if T == S}

    @property
    def ml_degree(self) -> int | None:
        return self.entries.get((frozenset(), frozenset()))

    def rows(self) -> list[frozenset[int]]:
        rs = {R for (R, _) in self.entries}
        return sorted(rs, key=lambda R: (len(R), sorted(R)))

    def fmt(self, idx) -> str:
        return "{" + ",".join(self.labels[i] for i in sorted(idx)) + "}"

    def column_bounds(self) -> dict[frozenset[int], dict]:
        out = {}
        for S in self.columns:
            total = column_bound(self, S)
            gen = self.ml_degree
            out[S] = {"sum": total, "ml_degree": gen, "bound_holds": None if gen is None else total <= gen}
        return out

    def to_markdown(self) -> str:
        head = "| R \\ S | " + " | ".join(self.fmt(S) for S in self.columns) + " |"
        sep = "|---" * (len(self.columns) + 1) + "|"
        lines = [head, sep]
        for R in self.rows():
            cells = []
            for S in self.columns:
                v = self.entries.get((R, S))
                if v is None:
                    cells.append("")
                else:
                    cells.append(str(v) if self.proper_flags.get((R, S), True) else f"{v}*")
            lines.append(f"| {self.fmt(R)} | " + " | ".join(cells) + " |")
        sums = [str(column_bound(self, S)) for S in self.columns]
        lines.append("| sum | " + " | ".join(sums) + " |")
        if any(not f for f in self.proper_flags.values()):
            lines.append("")
            lines.append("`*` marks a non-proper subproblem (entry 0 by definition).")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R\\S"] + [self.fmt(S) for S in self.columns])
        for R in self.rows():
            w.writerow([self.fmt(R)] + [
                "" if (R, S) not in self.entries else self.entries[(R, S)] for S in self.columns
            ])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "columns": [sorted(S) for S in self.columns],
            "entries": [
                {"R": sorted(R), "S": sorted(S), "count": v, "proper": self.proper_flags.get((R, S), True)}
                for (R, S), v in sorted(self.entries.items(), key=lambda kv: (sorted(kv[0][1]), sorted(kv[0][0])))
            ],
        }


def column_bound(table: MLTable, S) -> int:
    """Column sum ``sum_{R in S} entries[R, S]``; a lower bound for the ML degree."""
    S = frozenset(S)
    col = table.column(S)
    missing = [R for R in subsets(S) if R not in col]
    if missing:
        raise ValueError(f"column {table.fmt(S)} is incomplete: missing R = {[table.fmt(R) for R in missing]}")
    return sum(col.values())


class MLDegree(int):
    """An ML degree count that also carries the count found for a second data vector."""

    check_count: int | None
    solutions: SolutionSet | None

    def __new__(cls, value: int, check_count: int | None = None, solutions: SolutionSet | None = None):
        obj = super().__new__(cls, value)
        obj.check_count = check_count
        obj.solutions = solutions
        return obj

    @property
    def stable(self) -> bool | None:
        return None if self.check_count is None else self.check_count == int(self)


def _solve(model, u, pattern, strategy, config, cache):
    if cache is None:
        return solve(model, u, pattern, strategy, config)
    key = (model.hash(), np.asarray(u).tobytes(), pattern, strategy, repr(config.to_json() if config else None))
    if key not in cache:
        cache[key] = solve(model, u, pattern, strategy, config)
    return cache[key]


def cached_solver(cache: dict):
    """A ``solve``-compatible callable that memoizes on model, data, pattern and settings."""

    def run(model, u, pattern=None, strategy=MULTIHOMOG, config=None):
        return _solve(model, u, pattern, strategy, config, cache)

    return run


def ml_degree(
    model: ModelSpec,
    seed: int = 0,
    strategy: str = MULTIHOMOG,
    config: SolverConfig | None = None,
    check: str | None = "parameter",
    cache: dict | None = None,
) -> MLDegree:
    """Regular on-model count at seeded generic data.

    ``check="parameter"`` moves the solutions to a second generic data vector
    by a parameter homotopy, ``check="direct"`` solves there from scratch.
    """
    u = generic_data(model.n, (), seed)
    sols = _solve(model, u, ZeroPattern(), strategy, config, cache)
    count = sols.count()
    other = None
    if check is not None:
        u2 = generic_data(model.n, (), seed + 1)
        if check == "parameter":
            par = parametric_system(model, ZeroPattern())
            other = parameter_homotopy(par, u, sols.regular, u2, config, seed=seed).count()
        elif check == "direct":
            other = _solve(model, u2, ZeroPattern(), strategy, config, cache).count()
        else:
            raise ValueError(f"unknown check {check!r}")
    return MLDegree(count, other, sols)


def ml_table(
    model: ModelSpec,
    S_list: Sequence[Iterable],
    seed: int = 0,
    strategy: str = MULTIHOMOG,
    config: SolverConfig | None = None,
    cache: dict | None = None,
) -> MLTable:
    """Solve every ``(R, S)`` subproblem with ``R`` inside each requested ``S``."""
    columns = [model.indices(S) for S in S_list]
    table = MLTable(model.name, model.labels, columns)
    for S in columns:
        u = generic_data(model.n, S, seed)
        for R in subsets(S):
            sols = _solve(model, u, ZeroPattern(R, S), strategy, config, cache)
            table.set(R, S, sols.count(R), sols.proper)
            table.stats[(R, S)] = sols.stats
    return table


# ---------------------------------------------------------------------------
# duality


def omega_matrix(u) -> np.ndarray:
    """``Omega_ij = u_ij u_i+ u_+j / u_++^3``."""
    u = np.asarray(u)
    if u.ndim != 2:
        raise ValueError("u must be a matrix")
    tot = u.sum()
    if tot == 0:
        raise DegenerateDataError("u_++ = 0")
    rows = u.sum(axis=1, keepdims=True)
    cols = u.sum(axis=0, keepdims=True)
    return u * rows * cols / tot**3


@dataclass
class DualPair:
    x_index: int
    y_index: int | None
    residual: float
    R: frozenset[int]
    R_dual: frozenset[int]
    containment: bool  # (S \ R) within R'
    equality: bool  # (S \ R) == R' restricted to S
    direct_match: bool  # matched without entrywise division

    def to_json(self, fmt) -> dict:
        return {
            "x": self.x_index,
            "y": self.y_index,
            "residual": self.residual,
            "R": fmt(self.R),
            "R_dual": fmt(self.R_dual),
            "containment": self.containment,
            "equality": self.equality,
            "direct_match": self.direct_match,
        }


@dataclass
class DualReport:
    pairs: list[DualPair]
    n_x: int
    n_y: int
    S: frozenset[int]
    tol: float

    @property
    def bijection(self) -> bool:
        ys = [p.y_index for p in self.pairs]
        return (
            self.n_x == self.n_y == len(self.pairs)
            and None not in ys
            and len(set(ys)) == len(ys)
            and all(p.residual < self.tol for p in self.pairs)
        )

    @property
    def max_residual(self) -> float:
        return max((p.residual for p in self.pairs), default=0.0)

    @property
    def containment_holds(self) -> bool:
        return all(p.containment for p in self.pairs)

    def to_json(self, labels: Sequence[str] | None = None) -> dict:
        def fmt(idx):
            return sorted(idx) if labels is None else [labels[i] for i in sorted(idx)]

        return {
            "n_x": self.n_x,
            "n_y": self.n_y,
            "S": fmt(self.S),
            "tol": self.tol,
            "bijection": self.bijection,
            "max_residual": self.max_residual,
            "containment_holds": self.containment_holds,
            "equality_holds": all(p.equality for p in self.pairs),
            "pairs": [p.to_json(fmt) for p in self.pairs],
        }


def _as_matrix(p: np.ndarray, shape) -> np.ndarray:
    return np.asarray(p).reshape(shape)


def dual_pairing(solsX: SolutionSet, solsY: SolutionSet, u, tol: float = 1e-6,
                 zero_tol: float = 1e-6) -> DualReport:
    """Match critical points ``P`` of one rank model to ``Q`` of its dual with ``P * Q = Omega_U``.

    ``u`` is the data matrix; ``S`` is read off its zero entries.
    """
    u = np.asarray(u)
    shape = u.shape
    omega = omega_matrix(u)
    S = frozenset(int(i) for i in np.flatnonzero(u.ravel() == 0))
    X = [pt for pt in solsX.points if pt.counted]
    Y = [pt for pt in solsY.points if pt.counted]
    Qs = np.array([_as_matrix(q.p, shape) for q in Y]).reshape(len(Y), *shape)

    # candidate cost: Hadamard residual of every (P, Q)
    cost = np.full((len(X), len(Y)), np.inf)
    direct = np.zeros(len(X), dtype=bool)
    for a, P in enumerate(X):
        Pm = _as_matrix(P.p, shape)
        if len(Y):
            cost[a] = np.max(np.abs(Pm[None] * Qs - omega[None]), axis=(1, 2))
        direct[a] = bool(np.any(np.abs(Pm) < zero_tol))

    # greedy assignment by increasing residual, then verification
    order = np.dstack(np.unravel_index(np.argsort(cost, axis=None), cost.shape))[0] if cost.size else []
    used_x, used_y = set(), set()
    match: dict[int, int] = {}
    for a, b in order:
        a, b = int(a), int(b)
        if a in used_x or b in used_y or not np.isfinite(cost[a, b]):
            continue
        match[a] = b
        used_x.add(a)
        used_y.add(b)

    pairs = []
    for a, P in enumerate(X):
        b = match.get(a)
        R = P.zero_pattern
        if b is None:
            pairs.append(DualPair(a, None, np.inf, R, frozenset(), False, False, bool(direct[a])))
            continue
        Q = Y[b]
        Rd = frozenset(int(i) for i in np.flatnonzero(np.abs(Q.p) < zero_tol))
        want = S - R
        pairs.append(
            DualPair(
                x_index=a,
                y_index=b,
                residual=float(cost[a, b]),
                R=R,
                R_dual=Rd,
                containment=want <= Rd,
                equality=want == (Rd & S),
                direct_match=bool(direct[a]),
            )
        )
    return DualReport(pairs, len(X), len(Y), S, tol)
