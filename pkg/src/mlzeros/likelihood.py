"""Lagrange likelihood equations and their restricted and parametric forms.

For a model with regular sequence ``h_1..h_c`` and data ``u`` the unrestricted
system in the unknowns ``p_0..p_n, lambda_1..lambda_c`` is::

    h_1 = ... = h_c = 0
    u_+ p_i - u_i - p_i * sum_j lambda_j dh_j/dp_i = 0      (i = 0..n)

Summing the second block against Euler's relation forces ``sum p_i = 1`` when
``u_+ != 0``, so this form works in that affine chart.  With data zeros ``S``
and model zeros ``R`` the unknowns ``p_i, i in R`` are removed, the
equations for ``i in S \\ R`` are divided by ``p_i`` (sampling zeros) and the
rest keep the generic form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateDataError
from .models import ModelSpec, ZeroPattern, _independent_count
from .poly import LAMBDA, P, ParametricPoly, SparsePoly, VariableSpace, polys_to_text

# normalization variants of the generic equations
EQ2 = "eq2"  # u_+ p_i - u_i        (pins the chart p_+ = 1)
EQ4 = "eq4"  # u_+ p_i - p_+ u_i    (projective form, solutions come in scaling orbits)


@dataclass(frozen=True)
class LagrangeSystem:
    model: ModelSpec
    equations: tuple[SparsePoly, ...]
    space: VariableSpace
    u: np.ndarray
    pattern: ZeroPattern
    p_index: tuple[int, ...]
    normalization: str = EQ2
    proper: bool = True
    kinds: tuple[str, ...] = field(default=(), compare=False)

    @property
    def n_vars(self) -> int:
        return len(self.space)

    @property
    def is_square(self) -> bool:
        return len(self.equations) == len(self.space)

    def degrees(self) -> list[int]:
        return [f.degree() for f in self.equations]

    def bidegrees(self) -> list[tuple[int, int]]:
        return [(max(f.group_degree(P), 0), max(f.group_degree(LAMBDA), 0)) for f in self.equations]

    def scale_factors(self) -> np.ndarray:
        """Per-equation factors bringing the largest coefficient to 1."""
        return np.array([1.0 / f.max_abs_coeff() if not f.is_zero() else 1.0 for f in self.equations])

    def evaluate(self, x) -> np.ndarray:
        return np.array([f.evaluate(x) for f in self.equations])

    def residual(self, x) -> float:
        return float(np.max(np.abs(self.evaluate(x))))

    def split(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Full-length ``p`` (zeros at ``R``) and ``lambda`` from a solution vector."""
        x = np.asarray(x, dtype=complex)
        p = np.zeros(self.model.n + 1, dtype=complex)
        k = len(self.p_index)
        p[list(self.p_index)] = x[:k]
        return p, x[k:]

    def join(self, p, lam) -> np.ndarray:
        p = np.asarray(p, dtype=complex)
        return np.concatenate([p[list(self.p_index)], np.asarray(lam, dtype=complex)])

    def header(self) -> dict:
        return {
            "model": self.model.name,
            "model_hash": self.model.hash(),
            "pattern": self.pattern.to_json(),
            "u": [[z.real, z.imag] for z in self.u],
            "normalization": self.normalization,
            "variables": list(self.space.names),
        }

    def to_text(self) -> str:
        return json.dumps(self.header(), sort_keys=True) + "\n" + polys_to_text(self.equations) + "\n"


def _check_u(model: ModelSpec, u) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (model.n + 1,):
        raise ValueError(f"data vector must have length {model.n + 1}")
    if u.sum() == 0:
        raise DegenerateDataError("u_+ = 0: the likelihood equations degenerate")
    return u


def _space_for(model: ModelSpec, R: frozenset[int]) -> tuple[VariableSpace, list[int], list[int]]:
    keep = [i for i in range(model.n + 1) if i not in R]
    space = VariableSpace.make([model.space.names[i] for i in keep], model.c)
    mapping = [-1] * (model.n + 1)
    for new, old in enumerate(keep):
        mapping[old] = new
    return space, keep, mapping


def _restricted_pieces(model: ModelSpec, R: frozenset[int]):
    """Restricted h's and restricted gradients ``dh_j/dp_i`` (derivative first)."""
    space, keep, mapping = _space_for(model, R)
    hs = [h.substitute_zero(R) for h in model.regular_sequence]
    hs_emb = [h.embed(space, mapping) for h in hs]
    grads = {}
    for i in keep:
        grads[i] = [h.partial_derivative(i).substitute_zero(R).embed(space, mapping) for h in model.regular_sequence]
    proper = (
        model.proper
        and model.c <= model.n - len(R)
        and all(not h.is_zero() for h in hs)
        and _independent_count(hs) == model.c
    )
    return space, keep, mapping, hs_emb, grads, proper


def _multiplier_sum(space: VariableSpace, grads_i: Sequence[SparsePoly], c: int) -> SparsePoly:
    out = SparsePoly.zero(space)
    for j in range(c):
        out = out + SparsePoly.variable(space, space.names[len(space) - c + j]) * grads_i[j]
    return out


def restricted_system(model: ModelSpec, pattern: ZeroPattern, u, normalization: str = EQ2) -> LagrangeSystem:
    """Critical-point equations for data zeros ``S`` with model zeros ``R``."""
    u = _check_u(model, u)
    pattern.check(model.n)
    R, S = pattern.R, pattern.S
    for i in range(model.n + 1):
        if (i in S) != (u[i] == 0):
            raise ValueError(f"data vector inconsistent with data zeros at coordinate {i}")
    return _build(model, pattern, u, normalization)


def lagrange_system(model: ModelSpec, u, normalization: str = EQ2) -> LagrangeSystem:
    """The unrestricted system; ``u`` may contain zeros as long as ``u_+ != 0``."""
    u = _check_u(model, u)
    return _build(model, ZeroPattern(), u, normalization)


def _build(model, pattern, u, normalization) -> LagrangeSystem:
    if normalization not in (EQ2, EQ4):
        raise ValueError(f"unknown normalization {normalization!r}")
    R, S = pattern.R, pattern.S
    space, keep, mapping, hs, grads, proper = _restricted_pieces(model, R)
    u_plus = u.sum()
    p_plus = sum((SparsePoly.variable(space, mapping[i]) for i in keep), SparsePoly.zero(space))
    eqs = list(hs)
    kinds = ["model"] * len(hs)
    for i in keep:
        lam_grad = _multiplier_sum(space, grads[i], model.c)
        if i in S:
            eqs.append(u_plus - lam_grad)
            kinds.append("sampling")
        else:
            pi = SparsePoly.variable(space, mapping[i])
            data = u[i] if normalization == EQ2 else p_plus * u[i]
            eqs.append(pi * u_plus - data - pi * lam_grad)
            kinds.append("generic")
    return LagrangeSystem(
        model=model,
        equations=tuple(eqs),
        space=space,
        u=u,
        pattern=pattern,
        p_index=tuple(keep),
        normalization=normalization,
        proper=proper,
        kinds=tuple(kinds),
    )


@dataclass(frozen=True)
class ParametricSystem:
    model: ModelSpec
    equations: tuple[ParametricPoly, ...]
    space: VariableSpace
    pattern: ZeroPattern
    p_index: tuple[int, ...]
    free_all_parameters: bool = False
    normalization: str = EQ2
    proper: bool = True

    @property
    def n_params(self) -> int:
        return self.model.n + 1

    @property
    def n_vars(self) -> int:
        return len(self.space)

    def specialize(self, u) -> LagrangeSystem:
        u = np.asarray(u, dtype=complex)
        eqs = tuple(f.specialize(u) for f in self.equations)
        return LagrangeSystem(
            model=self.model,
            equations=eqs,
            space=self.space,
            u=u,
            pattern=self.pattern,
            p_index=self.p_index,
            normalization=self.normalization,
            proper=self.proper,
        )

    def bidegrees(self) -> list[tuple[int, int]]:
        return [(max(f.group_degree(P), 0), max(f.group_degree(LAMBDA), 0)) for f in self.equations]


def parametric_system(
    model: ModelSpec,
    pattern: ZeroPattern | None = None,
    free_all_parameters: bool = False,
    normalization: str = EQ2,
) -> ParametricSystem:
    """The restricted system with the data vector left symbolic.

    Data entries indexed by ``S`` are fixed at zero unless
    ``free_all_parameters`` is set, in which case every ``u_j`` enters ``u_+``.
    """
    pattern = pattern or ZeroPattern()
    pattern.check(model.n)
    R, S = pattern.R, pattern.S
    space, keep, mapping, hs, grads, proper = _restricted_pieces(model, R)
    m = model.n + 1
    free = range(m) if free_all_parameters else [j for j in range(m) if j not in S]
    one = SparsePoly.constant(space, 1.0)
    p_plus = sum((SparsePoly.variable(space, mapping[i]) for i in keep), SparsePoly.zero(space))
    eqs = [ParametricPoly.from_components(h, {}, m) for h in hs]
    for i in keep:
        lam_grad = _multiplier_sum(space, grads[i], model.c)
        if i in S:
            eqs.append(ParametricPoly.from_components(-lam_grad, {j: one for j in free}, m))
        else:
            pi = SparsePoly.variable(space, mapping[i])
            linear = {j: pi for j in free}
            data = -one if normalization == EQ2 else -p_plus
            linear[i] = linear.get(i, SparsePoly.zero(space)) + data
            eqs.append(ParametricPoly.from_components(-(pi * lam_grad), linear, m))
    return ParametricSystem(
        model=model,
        equations=tuple(eqs),
        space=space,
        pattern=pattern,
        p_index=tuple(keep),
        free_all_parameters=free_all_parameters,
        normalization=normalization,
        proper=proper,
    )
