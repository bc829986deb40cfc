"""Root-count bounds and the matching start systems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import StructuralError
from ..poly import LAMBDA, P, SparsePoly, VariableSpace
from .homotopy import LinearFactors


def bezout_total(degrees) -> int:
    """Product of the equation degrees."""
    out = 1
    for d in degrees:
        out *= int(d)
    return out


def bezout_multihomog(bidegrees, n_p: int, n_lambda: int) -> int:
    """Two-homogeneous Bézout number.

    Coefficient of ``a^n_p b^n_lambda`` in ``prod_i (d_i^P a + d_i^L b)``.
    """
    if len(bidegrees) != n_p + n_lambda:
        raise ValueError("system is not square")
    coeffs = {0: 1}  # power of b -> coefficient
    for dp, dl in bidegrees:
        nxt: dict[int, int] = {}
        for k, v in coeffs.items():
            if dp:
                nxt[k] = nxt.get(k, 0) + v * dp
            if dl:
                nxt[k + 1] = nxt.get(k + 1, 0) + v * dl
        coeffs = nxt
    return coeffs.get(n_lambda, 0)


@dataclass
class StartSystem:
    """A product of linear forms per equation, together with all its roots."""

    space: VariableSpace
    factors: LinearFactors
    points: np.ndarray
    grouping: str

    def __len__(self) -> int:
        return self.points.shape[0]

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        L = X @ self.factors.A.T + self.factors.b
        neq = len(self.factors.ptr) - 1
        out = np.ones((X.shape[0], neq), dtype=complex)
        for i in range(neq):
            for l in range(self.factors.ptr[i], self.factors.ptr[i + 1]):
                out[:, i] *= L[:, l]
        return out

    def residuals(self) -> np.ndarray:
        return np.max(np.abs(self.evaluate(self.points)), axis=1)

    def scaled_residuals(self) -> np.ndarray:
        """Residuals divided by the product of the factor magnitude bounds ``|a||x| + |b|``."""
        X = np.atleast_2d(self.points)
        bound = np.abs(X) @ np.abs(self.factors.A).T + np.abs(self.factors.b)
        neq = len(self.factors.ptr) - 1
        scale = np.ones((X.shape[0], neq))
        for i in range(neq):
            for l in range(self.factors.ptr[i], self.factors.ptr[i + 1]):
                scale[:, i] *= bound[:, l]
        return np.max(np.abs(self.evaluate(X)) / scale, axis=1)

    @cached_property
    def polys(self) -> list[SparsePoly]:
        """Expanded start polynomials (small systems only)."""
        out = []
        neq = len(self.factors.ptr) - 1
        one = SparsePoly.constant(self.space, 1.0)
        for i in range(neq):
            g = one
            for l in range(self.factors.ptr[i], self.factors.ptr[i + 1]):
                form = SparsePoly.constant(self.space, self.factors.b[l])
                for v, a in enumerate(self.factors.A[l]):
                    if a != 0:
                        form = form + SparsePoly.variable(self.space, v) * a
                g = g * form
            out.append(g)
        return out


def total_degree_start(space: VariableSpace, degrees, seed: int = 0) -> StartSystem:
    """``x_i^{d_i} - beta_i`` written as ``prod_k (x_i - r_ik)`` over its roots."""
    n = len(space)
    degrees = [int(d) for d in degrees]
    if len(degrees) != n:
        raise ValueError("total-degree start needs a square system")
    rng = np.random.default_rng(seed)
    beta = np.exp(2j * np.pi * rng.uniform(size=n))
    roots = [beta[i] ** (1.0 / d) * np.exp(2j * np.pi * np.arange(d) / d) for i, d in enumerate(degrees)]
    ptr = np.concatenate([[0], np.cumsum(degrees)]).astype(np.int64)
    A = np.zeros((ptr[-1], n), dtype=complex)
    b = np.zeros(ptr[-1], dtype=complex)
    for i, d in enumerate(degrees):
        A[ptr[i]: ptr[i + 1], i] = 1.0
        b[ptr[i]: ptr[i + 1]] = -roots[i]
    grids = np.meshgrid(*roots, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1) if n else np.zeros((1, 0), dtype=complex)
    factors = LinearFactors(ptr=ptr, A=A, b=b, groups=np.zeros(ptr[-1], dtype=np.int64))
    return StartSystem(space=space, factors=factors, points=points, grouping="total")


def multihomog_start(space: VariableSpace, bidegrees, seed: int = 0) -> StartSystem:
    """Linear-product start system with ``d_i^P`` generic forms in ``p`` and ``d_i^L`` in ``lambda``.

    Every root picks one vanishing factor per equation; the picks split into a
    square linear system for each group.
    """
    p_idx = space.group_indices(P)
    l_idx = space.group_indices(LAMBDA)
    n_p, n_l = len(p_idx), len(l_idx)
    bound = bezout_multihomog(bidegrees, n_p, n_l)
    if bound == 0:
        raise StructuralError("multihomogeneous Bezout number is zero: no valid group assignment")
    n = len(space)
    rng = np.random.default_rng(seed)
    ptr = [0]
    rows_A, rows_b, rows_g = [], [], []
    # (equation, group) -> list of factor row ids
    owner: dict[tuple[int, int], list[int]] = {}
    for i, (dp, dl) in enumerate(bidegrees):
        for g, (cnt, idx) in enumerate(((dp, p_idx), (dl, l_idx))):
            for _ in range(cnt):
                a = np.zeros(n, dtype=complex)
                a[idx] = rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx))
                owner.setdefault((i, g), []).append(len(rows_A))
                rows_A.append(a)
                rows_b.append(complex(rng.normal(), rng.normal()))
                rows_g.append(g)
        ptr.append(len(rows_A))
    A = np.array(rows_A, dtype=complex).reshape(len(rows_A), n)
    b = np.array(rows_b, dtype=complex)
    factors = LinearFactors(ptr=np.array(ptr, dtype=np.int64), A=A, b=b, groups=np.array(rows_g, dtype=np.int64))

    def solve_group(eqs, g, idx):
        # all choices of one factor per equation, then the batched linear solves
        choice = [owner[(i, g)] for i in eqs]
        rows = np.array(list(itertools.product(*choice)), dtype=np.int64).reshape(-1, len(eqs))
        if not idx:
            return np.zeros((1, 0), dtype=complex)
        M = A[rows][:, :, idx]
        rhs = -b[rows]
        return np.linalg.solve(M, rhs[..., None])[..., 0]

    pts = []
    eligible = [i for i, (_, dl) in enumerate(bidegrees) if dl > 0]
    for lam_eqs in itertools.combinations(eligible, n_l):
        p_eqs = [i for i in range(len(bidegrees)) if i not in lam_eqs]
        if any(bidegrees[i][0] == 0 for i in p_eqs):
            continue
        xp = solve_group(p_eqs, 0, p_idx)
        xl = solve_group(list(lam_eqs), 1, l_idx)
        block = np.zeros((xp.shape[0] * xl.shape[0], n), dtype=complex)
        block[:, p_idx] = np.repeat(xp, xl.shape[0], axis=0)
        if l_idx:
            block[:, l_idx] = np.tile(xl, (xp.shape[0], 1))
        pts.append(block)
    points = np.concatenate(pts, axis=0)
    assert points.shape[0] == bound
    return StartSystem(space=space, factors=factors, points=points, grouping="multihomog")
