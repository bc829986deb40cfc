"""Flatten polynomial homotopies into the arrays consumed by the kernels.

Two encodings are produced from the same term lists:

* affine: the variables as given;
* projective: one homogenizing coordinate per variable group plus a random
  affine patch ``a . (x_g, x_h) = 1`` per group.  Paths heading to infinity
  stay bounded and are recognised by a vanishing homogenizing coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..poly import LAMBDA, P, SparsePoly

# exponent -> (c0, c1); the coefficient at time t is c0 + t*c1
TermMap = dict[tuple[int, ...], tuple[complex, complex]]


@dataclass
class LinearFactors:
    """Linear-product part: equation ``i`` is ``prod_l (A[l] . x + b[l])`` over its factor rows."""

    ptr: np.ndarray  # (neq+1,)
    A: np.ndarray  # (nfac, nvars)
    b: np.ndarray  # (nfac,)
    groups: np.ndarray  # (nfac,) group id of each factor, -1 = whole space


@dataclass
class Homotopy:
    n: int
    arrs: tuple
    grp: np.ndarray  # group id of each coordinate, -1 for homogenizing coordinates
    hom: np.ndarray  # index of the homogenizing coordinate of each group
    patches: np.ndarray | None  # (n_groups, n) patch rows
    n_affine: int
    group_vars: list[list[int]]

    def to_projective(self, X: np.ndarray) -> np.ndarray:
        """Lift affine points onto the patches."""
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        if self.hom.size == 0:
            return X.copy()
        out = np.zeros((X.shape[0], self.n), dtype=complex)
        out[:, : self.n_affine] = X
        for g, h in enumerate(self.hom):
            out[:, h] = 1.0
            idx = self.group_vars[g] + [int(h)]
            s = out[:, idx] @ self.patches[g, idx]
            out[:, idx] /= s[:, None]
        return out

    def to_affine(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Dehomogenize; also return each point's smallest relative homogenizing coordinate."""
        X = np.atleast_2d(X)
        if self.hom.size == 0:
            return X.copy(), np.ones(X.shape[0])
        out = X[:, : self.n_affine].copy()
        rel = np.full(X.shape[0], np.inf)
        for g, h in enumerate(self.hom):
            idx = self.group_vars[g]
            d = X[:, h]
            scale = np.max(np.abs(X[:, idx + [int(h)]]), axis=1)
            rel = np.minimum(rel, np.abs(d) / np.where(scale > 0, scale, 1.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                out[:, idx] = X[:, idx] / d[:, None]
        return out, rel


def poly_terms(poly: SparsePoly, c0: complex = 1.0, c1: complex = 0.0) -> TermMap:
    return {e: (c * c0, c * c1) for e, c in poly.items()}


def merge_terms(*maps: Mapping) -> TermMap:
    out: dict = {}
    for m in maps:
        for e, (a, b) in m.items():
            x, y = out.get(e, (0j, 0j))
            out[e] = (x + a, y + b)
    return out


def variable_groups(groups: Sequence[str], mode: str) -> list[list[int]]:
    """Variable index lists per homogenization group."""
    if mode == "total":
        return [list(range(len(groups)))]
    if mode == "multihomog":
        out = []
        for tag in (P, LAMBDA):
            idx = [i for i, g in enumerate(groups) if g == tag]
            if idx:
                out.append(idx)
        return out
    raise ValueError(f"unknown grouping {mode!r}")


def build(
    equations: Sequence[TermMap],
    n_vars: int,
    factors: LinearFactors | None = None,
    lp_weight: complex = 0.0,
    group_vars: list[list[int]] | None = None,
    seed: int = 0,
) -> Homotopy:
    """Encode ``sum_terms (c0 + t c1) x^e + lp_weight * t * prod(factors)``.

    With ``group_vars`` the system is homogenized group-wise and random patch
    equations are appended.
    """
    neq = len(equations)
    projective = group_vars is not None
    n_groups = len(group_vars) if projective else 0
    n = n_vars + n_groups
    grp = np.full(n, -1, dtype=np.int64)
    hom = np.arange(n_vars, n_vars + n_groups, dtype=np.int64)
    if projective:
        for g, idx in enumerate(group_vars):
            grp[idx] = g
    else:
        grp[:] = 0

    eq_terms: list[list[tuple[tuple[int, ...], complex, complex]]] = []
    for i, terms in enumerate(equations):
        rows = [(tuple(e), complex(a), complex(b)) for e, (a, b) in terms.items() if a != 0 or b != 0]
        if projective:
            gdeg = [max((sum(e[v] for v in idx) for e, _, _ in rows), default=0) for idx in group_vars]
            if factors is not None and lp_weight != 0:
                for g in range(n_groups):
                    cnt = int(np.sum(factors.groups[factors.ptr[i]: factors.ptr[i + 1]] == g))
                    gdeg[g] = max(gdeg[g], cnt)
            homog = []
            for e, a, b in rows:
                extra = [gdeg[g] - sum(e[v] for v in idx) for g, idx in enumerate(group_vars)]
                homog.append((tuple(e) + tuple(extra), a, b))
            rows = homog
        eq_terms.append(rows)

    patches = None
    if projective:
        rng = np.random.default_rng(seed)
        patches = np.zeros((n_groups, n), dtype=complex)
        for g, idx in enumerate(group_vars):
            cols = idx + [n_vars + g]
            patches[g, cols] = rng.normal(size=len(cols)) + 1j * rng.normal(size=len(cols))
            row = {}
            for v in cols:
                e = [0] * n
                e[v] = 1
                row[tuple(e)] = (patches[g, v], 0j)
            row[(0,) * n] = (-1.0 + 0j, 0j)
            eq_terms.append(list((e, a, b) for e, (a, b) in row.items()))

    t_eq, c0, c1, ptr, fvar, fexp = [], [], [], [0], [], []
    maxexp = np.zeros(n, dtype=np.int64)
    for i, rows in enumerate(eq_terms):
        for e, a, b in rows:
            t_eq.append(i)
            c0.append(a)
            c1.append(b)
            for v, k in enumerate(e):
                if k:
                    fvar.append(v)
                    fexp.append(k)
                    maxexp[v] = max(maxexp[v], k)
            ptr.append(len(fvar))

    n_eq_total = len(eq_terms)
    if factors is not None and lp_weight != 0:
        A = np.zeros((factors.A.shape[0], n), dtype=complex)
        A[:, :n_vars] = factors.A
        b = factors.b.astype(complex)
        if projective:
            for l in range(A.shape[0]):
                g = factors.groups[l]
                if g < 0:
                    raise ValueError("projective encoding needs group-wise factors")
                A[l, n_vars + g] = b[l]
            b = np.zeros_like(b)
        lp_ptr = np.concatenate([factors.ptr, np.full(n_eq_total - neq, factors.ptr[-1])]).astype(np.int64)
        lp_w = np.zeros(n_eq_total, dtype=complex)
        lp_w[:neq] = lp_weight
    else:
        A = np.zeros((0, n), dtype=complex)
        b = np.zeros(0, dtype=complex)
        lp_ptr = np.zeros(n_eq_total + 1, dtype=np.int64)
        lp_w = np.zeros(n_eq_total, dtype=complex)
    # nonzero columns of each factor row
    cptr, cidx = [0], []
    for row in A:
        cidx.extend(np.flatnonzero(row != 0).tolist())
        cptr.append(len(cidx))
    cptr = np.asarray(cptr, dtype=np.int64)
    cidx = np.asarray(cidx, dtype=np.int64)
    if n_eq_total != n:
        raise ValueError(f"homotopy is not square: {n_eq_total} equations in {n} unknowns")
    arrs = (
        np.asarray(t_eq, dtype=np.int64),
        np.asarray(c0, dtype=complex),
        np.asarray(c1, dtype=complex),
        np.asarray(ptr, dtype=np.int64),
        np.asarray(fvar, dtype=np.int64),
        np.asarray(fexp, dtype=np.int64),
        maxexp,
        lp_ptr,
        np.ascontiguousarray(A),
        b,
        lp_w,
        cptr,
        cidx,
    )
    return Homotopy(
        n=n,
        arrs=arrs,
        grp=grp,
        hom=hom if projective else np.zeros(0, dtype=np.int64),
        patches=patches,
        n_affine=n_vars,
        group_vars=[list(g) for g in group_vars] if projective else [],
    )
