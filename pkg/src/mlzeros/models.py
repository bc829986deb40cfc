"""Model zoo: projective varieties given by homogeneous generators.

Each constructor returns a :class:`ModelSpec` holding the full generating set
used for membership tests and a chosen regular sequence ``h_1..h_c`` that
enters the Lagrange likelihood equations.  When the generating set is larger
than the codimension, the regular sequence consists of seeded random complex
linear combinations of the generators (unit-modulus coefficients).
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .poly import P, SparsePoly, VariableSpace, polys_from_text, polys_to_text


@dataclass(frozen=True)
class ZeroPattern:
    """Data zeros ``S`` and the model zeros ``R`` among them (coordinate indices)."""

    R: frozenset[int] = frozenset()
    S: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "R", frozenset(int(i) for i in self.R))
        object.__setattr__(self, "S", frozenset(int(i) for i in self.S))
        if not self.R <= self.S:
            raise ValueError(f"model zeros {sorted(self.R)} are not data zeros {sorted(self.S)}")

    @classmethod
    def of(cls, R: Iterable[int] = (), S: Iterable[int] | None = None) -> "ZeroPattern":
        R = frozenset(R)
        return cls(R, R if S is None else frozenset(S))

    def check(self, n: int) -> None:
        bad = [i for i in self.S if not 0 <= i <= n]
        if bad:
            raise ValueError(f"indices {bad} outside coordinates 0..{n}")

    def to_json(self) -> dict:
        return {"R": sorted(self.R), "S": sorted(self.S)}


@dataclass(frozen=True)
class ModelSpec:
    name: str
    n: int
    c: int
    regular_sequence: tuple[SparsePoly, ...]
    full_generators: tuple[SparsePoly, ...]
    index_labels: tuple[str, ...] | None = None
    seed: int = 0
    proper: bool = True
    complete_intersection: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.c > self.n and self.proper:
            raise ValueError("codimension exceeds ambient dimension")
        if len(self.regular_sequence) != self.c and self.proper:
            raise ValueError("regular sequence length must equal the codimension")
        for h in self.regular_sequence + self.full_generators:
            if len(h.space) != self.n + 1:
                raise ValueError("generator lives in the wrong coordinate space")
            if not h.is_homogeneous(P):
                raise ValueError("generators must be homogeneous")

    @property
    def space(self) -> VariableSpace:
        return self.regular_sequence[0].space if self.regular_sequence else self.full_generators[0].space

    @property
    def labels(self) -> tuple[str, ...]:
        return self.index_labels or tuple(str(i) for i in range(self.n + 1))

    def index_of(self, key: int | str) -> int:
        if isinstance(key, (int, np.integer)):
            if not 0 <= key <= self.n:
                raise ValueError(f"coordinate {key} outside 0..{self.n}")
            return int(key)
        try:
            return self.labels.index(str(key))
        except ValueError:
            raise ValueError(f"unknown coordinate label {key!r}") from None

    def indices(self, keys: Iterable[int | str]) -> frozenset[int]:
        return frozenset(self.index_of(k) for k in keys)

    def format_set(self, idx: Iterable[int]) -> str:
        return "{" + ",".join(self.labels[i] for i in sorted(idx)) + "}"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "c": self.c,
            "seed": self.seed,
            "proper": self.proper,
            "complete_intersection": self.complete_intersection,
            "variables": list(self.space.names),
            "index_labels": list(self.index_labels) if self.index_labels else None,
            "regular_sequence": polys_to_text(self.regular_sequence),
            "full_generators": polys_to_text(self.full_generators),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ModelSpec":
        space = VariableSpace.make(doc["variables"])
        return cls(
            name=doc["name"],
            n=doc["n"],
            c=doc["c"],
            regular_sequence=tuple(polys_from_text(space, doc["regular_sequence"])) if doc["regular_sequence"] else (),
            full_generators=tuple(polys_from_text(space, doc["full_generators"])),
            index_labels=tuple(doc["index_labels"]) if doc.get("index_labels") else None,
            seed=doc.get("seed", 0),
            proper=doc.get("proper", True),
            complete_intersection=doc.get("complete_intersection", False),
        )

    def hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def membership_residual(self, p) -> float:
        """Largest relative value of a full generator at ``p``."""
        worst = 0.0
        for g in self.full_generators:
            scale = g.eval_scale(p)
            if scale > 0:
                worst = max(worst, abs(g.evaluate(p)) / scale)
        return worst


def unit_circle(rng: np.random.Generator, size) -> np.ndarray:
    return np.exp(2j * np.pi * rng.uniform(size=size))


def random_combinations(gens: Sequence[SparsePoly], c: int, seed: int) -> tuple[SparsePoly, ...]:
    rng = np.random.default_rng(seed)
    coeffs = unit_circle(rng, (c, len(gens)))
    out = []
    for row in coeffs:
        h = SparsePoly.zero(gens[0].space)
        for a, g in zip(row, gens):
            h = h + g * a
        out.append(h)
    return tuple(out)


def _p_space(labels: Sequence[str]) -> VariableSpace:
    return VariableSpace.make([f"p{lab}" for lab in labels])


def determinant(space: VariableSpace, idx: Sequence[Sequence[int]]) -> SparsePoly:
    """Leibniz expansion of the determinant of the matrix of variables ``idx``."""
    k = len(idx)
    terms: dict[tuple[int, ...], complex] = {}
    for perm in itertools.permutations(range(k)):
        inversions = sum(1 for a in range(k) for b in range(a + 1, k) if perm[a] > perm[b])
        exp = [0] * len(space)
        for row, col in enumerate(perm):
            exp[idx[row][col]] += 1
        key = tuple(exp)
        terms[key] = terms.get(key, 0) + (-1) ** inversions
    return SparsePoly(space, terms)


def minors(space: VariableSpace, matrix: Sequence[Sequence[int]], size: int) -> list[SparsePoly]:
    rows, cols = len(matrix), len(matrix[0])
    out = []
    for rs in itertools.combinations(range(rows), size):
        for cs in itertools.combinations(range(cols), size):
            out.append(determinant(space, [[matrix[r][c] for c in cs] for r in rs]))
    return out


def _pick_regular_sequence(gens, c, seed):
    if len(gens) == c:
        return tuple(gens), True
    return random_combinations(gens, c, seed), False


def generic_hypersurface(d: int, n: int, coeffs=None, seed: int = 0) -> ModelSpec:
    """Degree ``d`` hypersurface in P^n.

    With ``coeffs`` of length ``n+1`` (or no coeffs) the polynomial is the
    diagonal form ``sum a_i p_i^d``; a vector with one entry per degree-d
    monomial (graded-lex order) gives a dense polynomial.
    """
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    space = _p_space([str(i) for i in range(n + 1)])
    if coeffs is None:
        coeffs = unit_circle(np.random.default_rng(seed), n + 1)
    coeffs = np.asarray(coeffs, dtype=complex)
    if not np.any(coeffs):
        raise ValueError("coefficient vector is zero")
    if coeffs.size == n + 1:
        terms = {}
        for i, a in enumerate(coeffs):
            e = [0] * (n + 1)
            e[i] = d
            terms[tuple(e)] = a
    else:
        monos = sorted(
            (e for e in itertools.product(range(d + 1), repeat=n + 1) if sum(e) == d),
            key=lambda e: tuple(-x for x in e),
        )
        if coeffs.size != len(monos):
            raise ValueError(f"expected {n + 1} or {len(monos)} coefficients, got {coeffs.size}")
        terms = dict(zip(monos, coeffs))
    f = SparsePoly(space, terms)
    return ModelSpec(
        name=f"hypersurface-d{d}-n{n}",
        n=n,
        c=1,
        regular_sequence=(f,),
        full_generators=(f,),
        seed=seed,
        complete_intersection=True,
        meta={"d": d, "coeffs": [[z.real, z.imag] for z in coeffs]},
    )


def determinantal(m: int, n_cols: int, r: int, seed: int = 0) -> ModelSpec:
    """``m x n_cols`` matrices of rank at most ``r``."""
    if not 1 <= r < min(m, n_cols):
        raise ValueError(f"rank {r} must satisfy 1 <= r < min({m}, {n_cols})")
    labels = [f"{i + 1}{j + 1}" for i in range(m) for j in range(n_cols)]
    space = _p_space(labels)
    matrix = [[i * n_cols + j for j in range(n_cols)] for i in range(m)]
    gens = minors(space, matrix, r + 1)
    c = (m - r) * (n_cols - r)
    regseq, ci = _pick_regular_sequence(gens, c, seed)
    return ModelSpec(
        name=f"rank{r}-{m}x{n_cols}",
        n=m * n_cols - 1,
        c=c,
        regular_sequence=regseq,
        full_generators=tuple(gens),
        index_labels=tuple(labels),
        seed=seed,
        complete_intersection=ci,
        meta={"rows": m, "cols": n_cols, "rank": r},
    )


# the six quadrics listed for Gr(2,6), written as (i,j,k,l) relations
_GR26_LISTED = [(3, 4, 5, 6), (2, 3, 4, 5), (1, 3, 4, 5), (2, 4, 5, 6), (1, 4, 5, 6), (1, 2, 3, 4)]


def _plucker(space: VariableSpace, pos: dict, i: int, j: int, k: int, l: int) -> SparsePoly:
    def v(a, b):
        return SparsePoly.variable(space, pos[(a, b)])

    return v(i, j) * v(k, l) - v(i, k) * v(j, l) + v(i, l) * v(j, k)


def grassmannian_2n(n_pts: int, seed: int = 0, paper_quadrics: bool = False) -> ModelSpec:
    """Gr(2, n_pts) in its Plücker embedding."""
    if n_pts < 4:
        raise ValueError("need at least 4 points")
    pairs = list(itertools.combinations(range(1, n_pts + 1), 2))
    labels = [f"{i}{j}" for i, j in pairs]
    space = _p_space(labels)
    pos = {pr: k for k, pr in enumerate(pairs)}
    quads = [_plucker(space, pos, *q) for q in itertools.combinations(range(1, n_pts + 1), 4)]
    n = len(pairs) - 1
    c = n - 2 * (n_pts - 2)
    if paper_quadrics:
        if n_pts != 6:
            raise ValueError("the listed quadrics exist only for Gr(2,6)")
        regseq, ci = tuple(_plucker(space, pos, *q) for q in _GR26_LISTED), False
    else:
        regseq, ci = _pick_regular_sequence(quads, c, seed)
    return ModelSpec(
        name=f"gr2-{n_pts}" + ("-listed" if paper_quadrics else ""),
        n=n,
        c=c,
        regular_sequence=regseq,
        full_generators=tuple(quads),
        index_labels=tuple(labels),
        seed=seed,
        complete_intersection=ci and len(quads) == c,
        meta={"n_pts": n_pts},
    )


def tensor_2222_rank2(seed: int = 0) -> ModelSpec:
    """2x2x2x2 tensors of border rank at most 2 (3x3 minors of all flattenings)."""
    idx = list(itertools.product((1, 2), repeat=4))
    labels = ["".join(map(str, t)) for t in idx]
    space = _p_space(labels)
    pos = {t: k for k, t in enumerate(idx)}
    gens: list[SparsePoly] = []
    seen = set()
    for first in itertools.combinations(range(4), 2):
        if 0 not in first:
            continue
        rest = tuple(a for a in range(4) if a not in first)
        rows = list(itertools.product((1, 2), repeat=2))
        matrix = []
        for a in rows:
            row = []
            for b in rows:
                t = [0] * 4
                t[first[0]], t[first[1]] = a
                t[rest[0]], t[rest[1]] = b
                row.append(pos[tuple(t)])
            matrix.append(row)
        for g in minors(space, matrix, 3):
            key = frozenset(g.items())
            neg = frozenset((-g).items())
            if key not in seen and neg not in seen:
                seen.add(key)
                gens.append(g)
    c = 6
    return ModelSpec(
        name="tensor2222-rank2",
        n=15,
        c=c,
        regular_sequence=random_combinations(gens, c, seed),
        full_generators=tuple(gens),
        index_labels=tuple(labels),
        seed=seed,
    )


def raw_model(name: str, generators: Sequence[SparsePoly], c: int, seed: int = 0, labels=None) -> ModelSpec:
    """Model from user polynomials; no properness analysis is attempted."""
    gens = [g for g in generators if not g.is_zero()]
    if not gens:
        raise ValueError("no nonzero generators")
    regseq, ci = _pick_regular_sequence(gens, c, seed)
    return ModelSpec(
        name=name,
        n=len(gens[0].space) - 1,
        c=c,
        regular_sequence=regseq,
        full_generators=tuple(gens),
        index_labels=tuple(labels) if labels else None,
        seed=seed,
        complete_intersection=ci,
    )


def _independent_count(polys: Sequence[SparsePoly]) -> int:
    if not polys:
        return 0
    monos = sorted({e for p in polys for e in p.terms})
    col = {e: k for k, e in enumerate(monos)}
    mat = np.zeros((len(polys), len(monos)), dtype=complex)
    for r, p in enumerate(polys):
        for e, c in p.items():
            mat[r, col[e]] = c
    return int(np.linalg.matrix_rank(mat))


def restrict_model(model: ModelSpec, R: Iterable[int | str], seed: int | None = None) -> ModelSpec:
    """The model-zero variety ``X_R`` viewed in ``P^(n-|R|)``."""
    R = model.indices(R)
    if not R:
        return model
    if len(R) > model.n:
        raise ValueError("cannot set every coordinate to zero")
    seed = model.seed if seed is None else seed
    gens = []
    for g in model.full_generators:
        h = g.drop_variables(sorted(R))
        if not h.is_zero() and all(h != x and (-h) != x for x in gens):
            gens.append(h)
    labels = tuple(lab for i, lab in enumerate(model.labels) if i not in R)
    keep_names = [nm for i, nm in enumerate(model.space.names) if i not in R]
    space = VariableSpace.make(keep_names)
    n_new = model.n - len(R)
    c = model.c
    proper = _independent_count(gens) >= c and c <= n_new
    if not gens:
        regseq = ()
    elif proper and len(gens) == c:
        regseq = tuple(gens)
    elif proper:
        regseq = random_combinations(gens, c, seed)
    else:
        regseq = tuple(gens[:c])
    if not gens:
        gens = [SparsePoly.zero(space)]
    return ModelSpec(
        name=f"{model.name}|R={model.format_set(R)}",
        n=n_new,
        c=c,
        regular_sequence=regseq,
        full_generators=tuple(gens),
        index_labels=labels if model.index_labels else None,
        seed=seed,
        proper=proper,
        complete_intersection=proper and len(gens) == c,
        meta={"parent": model.name, "R": sorted(R)},
    )
