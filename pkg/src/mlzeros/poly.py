"""Sparse multivariate polynomials with complex coefficients.

Polynomials are stored as maps from exponent tuples to complex coefficients
over a :class:`VariableSpace`.  Every variable carries a group tag: ``P`` for
the probability coordinates and ``LAMBDA`` for Lagrange multipliers.  The
:class:`ParametricPoly` variant carries coefficients that are affine-linear
in a data vector ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

P = "P"
LAMBDA = "LAMBDA"
GROUPS = (P, LAMBDA)


@dataclass(frozen=True)
class VariableSpace:
    names: tuple[str, ...]
    groups: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != len(self.groups):
            raise ValueError("every variable needs exactly one group tag")
        if len(set(self.names)) != len(self.names):
            raise ValueError("variable names must be unique")
        for g in self.groups:
            if g not in GROUPS:
                raise ValueError(f"unknown group tag {g!r}")

    @classmethod
    def make(cls, p_names: Sequence[str], n_lambda: int = 0) -> "VariableSpace":
        names = tuple(p_names) + tuple(f"lambda{j + 1}" for j in range(n_lambda))
        groups = (P,) * len(p_names) + (LAMBDA,) * n_lambda
        return cls(names, groups)

    def __len__(self) -> int:
        return len(self.names)

    def index(self, var: str | int) -> int:
        if isinstance(var, (int, np.integer)):
            if not 0 <= var < len(self.names):
                raise ValueError(f"variable index {var} out of range")
            return int(var)
        try:
            return self.names.index(var)
        except ValueError:
            raise ValueError(f"unknown variable {var!r}") from None

    def group_indices(self, group: str) -> list[int]:
        return [i for i, g in enumerate(self.groups) if g == group]

    @property
    def n_p(self) -> int:
        return self.groups.count(P)

    @property
    def n_lambda(self) -> int:
        return self.groups.count(LAMBDA)


def _grlex_key(exp: tuple[int, ...]):
    # graded lex, highest first
    return (-sum(exp), tuple(-e for e in exp))


class SparsePoly:
    """Immutable sparse polynomial ``sum c * x**e`` over a variable space."""

    __slots__ = ("space", "_terms", "_hash")

    def __init__(self, space: VariableSpace, terms: Mapping[tuple[int, ...], complex] | None = None):
        self.space = space
        clean: dict[tuple[int, ...], complex] = {}
        k = len(space)
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != k:
                raise ValueError(f"exponent {exp} does not match {k} variables")
            if any(e < 0 for e in exp):
                raise ValueError("exponents must be non-negative")
            c = complex(c)
            if c != 0:
                clean[exp] = clean.get(exp, 0) + c
                if clean[exp] == 0:
                    del clean[exp]
        self._terms = dict(sorted(clean.items(), key=lambda kv: _grlex_key(kv[0])))
        self._hash = None

    # construction helpers

    @classmethod
    def zero(cls, space: VariableSpace) -> "SparsePoly":
        return cls(space)

    @classmethod
    def constant(cls, space: VariableSpace, c: complex) -> "SparsePoly":
        return cls(space, {(0,) * len(space): c})

    @classmethod
    def variable(cls, space: VariableSpace, var: str | int) -> "SparsePoly":
        exp = [0] * len(space)
        exp[space.index(var)] = 1
        return cls(space, {tuple(exp): 1.0})

    @classmethod
    def monomial(cls, space: VariableSpace, exps: Mapping[str | int, int], c: complex = 1.0) -> "SparsePoly":
        exp = [0] * len(space)
        for v, e in exps.items():
            exp[space.index(v)] += e
        return cls(space, {tuple(exp): c})

    @property
    def terms(self) -> dict[tuple[int, ...], complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    # arithmetic

    def _coerce(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            if other.space != self.space:
                raise ValueError("polynomials live in different variable spaces")
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return SparsePoly.constant(self.space, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, 0) + c
        return SparsePoly(self.space, terms)

    __radd__ = __add__

    def __neg__(self):
        return SparsePoly(self.space, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return SparsePoly(self.space, {e: c * other for e, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[tuple[int, ...], complex] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return SparsePoly(self.space, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = SparsePoly.constant(self.space, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.space == other.space and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.space, tuple(self._terms.items())))
        return self._hash

    def allclose(self, other: "SparsePoly", tol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0) - other._terms.get(k, 0)) <= tol for k in keys)

    # degrees

    def degree(self) -> int:
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def group_degree(self, group: str) -> int:
        idx = self.space.group_indices(group)
        if not self._terms:
            return -1
        return max(sum(e[i] for i in idx) for e in self._terms)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # calculus and evaluation

    def evaluate(self, point) -> complex:
        point = np.asarray(point, dtype=complex)
        if point.shape != (len(self.space),):
            raise ValueError(f"point has length {point.size}, expected {len(self.space)}")
        total = 0j
        for exp, c in self._terms.items():
            v = c
            for x, e in zip(point, exp):
                if e:
                    v *= x ** e
            total += v
        return complex(total)

    __call__ = evaluate

    def eval_scale(self, point) -> float:
        """Sum of absolute term values at ``point``; the natural size of ``evaluate``."""
        point = np.abs(np.asarray(point, dtype=complex))
        total = 0.0
        for exp, c in self._terms.items():
            v = abs(c)
            for x, e in zip(point, exp):
                if e:
                    v *= x ** e
            total += v
        return float(total)

    def partial_derivative(self, var: str | int) -> "SparsePoly":
        k = self.space.index(var)
        terms = {}
        for exp, c in self._terms.items():
            if exp[k]:
                e = list(exp)
                e[k] -= 1
                terms[tuple(e)] = c * exp[k]
        return SparsePoly(self.space, terms)

    def gradient(self, group: str | None = None) -> list["SparsePoly"]:
        idx = range(len(self.space)) if group is None else self.space.group_indices(group)
        return [self.partial_derivative(i) for i in idx]

    def is_homogeneous(self, group: str = P) -> bool:
        idx = self.space.group_indices(group)
        degs = {sum(e[i] for i in idx) for e in self._terms}
        return len(degs) <= 1

    def euler_check(self, point, tol: float = 1e-10, value: complex | None = None) -> bool:
        """Check Euler's relation ``sum p_i dF/dp_i = d F`` at ``point``.

        ``value`` replaces ``F(point)`` on the right-hand side, e.g. to audit
        an evaluation computed elsewhere.
        """
        if not self.is_homogeneous(P):
            raise ValueError("Euler's relation needs a polynomial homogeneous in P")
        return euler_residual(self, point, value) < tol * (1 + abs(self.evaluate(point)))

    # variable-space manipulation

    def substitute_zero(self, vars: Iterable[str | int]) -> "SparsePoly":
        """Set the given variables to 0 (space unchanged)."""
        ks = [self.space.index(v) for v in vars]
        return SparsePoly(self.space, {e: c for e, c in self._terms.items() if all(e[k] == 0 for k in ks)})

    def embed(self, space: VariableSpace, mapping: Sequence[int]) -> "SparsePoly":
        """Move to ``space``; variable ``i`` of self becomes ``mapping[i]``."""
        terms = {}
        for exp, c in self._terms.items():
            e = [0] * len(space)
            for i, a in enumerate(exp):
                if a:
                    if mapping[i] < 0:
                        raise ValueError("cannot drop a variable that occurs in the polynomial")
                    e[mapping[i]] += a
            terms[tuple(e)] = c
        return SparsePoly(space, terms)

    def drop_variables(self, vars: Iterable[str | int]) -> "SparsePoly":
        """Substitute 0 for ``vars`` and remove them from the variable space."""
        ks = sorted({self.space.index(v) for v in vars})
        keep = [i for i in range(len(self.space)) if i not in ks]
        space = VariableSpace(tuple(self.space.names[i] for i in keep), tuple(self.space.groups[i] for i in keep))
        mapping = [-1] * len(self.space)
        for new, old in enumerate(keep):
            mapping[old] = new
        return self.substitute_zero(ks).embed(space, mapping)

    # text form

    def to_text(self) -> str:
        lines = []
        for exp, c in self._terms.items():
            lines.append(f"{c.real!r} {c.imag!r} : " + " ".join(str(e) for e in exp))
        return "\n".join(lines)

    @classmethod
    def from_text(cls, space: VariableSpace, text: str) -> "SparsePoly":
        terms = {}
        for line in text.strip().splitlines():
            line = line.strip()
            if not line:
                continue
            coeff, _, exps = line.partition(":")
            re_, im_ = coeff.split()
            exp = tuple(int(e) for e in exps.split())
            terms[exp] = terms.get(exp, 0) + complex(float(re_), float(im_))
        return cls(space, terms)

    def __repr__(self):
        if not self._terms:
            return "SparsePoly(0)"
        parts = []
        for exp, c in self._terms.items():
            mono = "*".join(
                n if e == 1 else f"{n}^{e}" for n, e in zip(self.space.names, exp) if e
            )
            cs = f"{c.real:g}" if c.imag == 0 else f"({c:g})"
            parts.append(f"{cs}*{mono}" if mono else cs)
        return "SparsePoly(" + " + ".join(parts) + ")"


def euler_residual(poly: SparsePoly, point, value: complex | None = None) -> float:
    """``|sum_i p_i dF/dp_i(x) - d F(x)|`` over the P group."""
    point = np.asarray(point, dtype=complex)
    d = poly.group_degree(P)
    if d < 0:
        return 0.0
    lhs = sum(point[i] * poly.partial_derivative(i).evaluate(point) for i in poly.space.group_indices(P))
    rhs = poly.evaluate(point) if value is None else value
    return float(abs(lhs - d * rhs))


def evaluate(poly: SparsePoly, point) -> complex:
    return poly.evaluate(point)


def partial_derivative(poly: SparsePoly, var: str | int) -> SparsePoly:
    return poly.partial_derivative(var)


def is_homogeneous(poly: SparsePoly, group: str = P) -> bool:
    return poly.is_homogeneous(group)


def euler_check(poly: SparsePoly, point, tol: float = 1e-10, value: complex | None = None) -> bool:
    return poly.euler_check(point, tol, value)


def polys_to_text(polys: Sequence[SparsePoly]) -> str:
    """Blocks of canonical text separated by blank lines; ``0`` marks a zero poly."""
    return "\n\n".join(p.to_text() if not p.is_zero() else "0" for p in polys)


def polys_from_text(space: VariableSpace, text: str) -> list[SparsePoly]:
    blocks = [b for b in text.strip().split("\n\n")]
    return [SparsePoly(space) if b.strip() == "0" else SparsePoly.from_text(space, b) for b in blocks]


class ParametricPoly:
    """Polynomial whose coefficients are affine-linear forms in a parameter vector.

    ``terms[exp]`` is an array ``a`` of length ``n_params + 1``; the coefficient
    of ``x**exp`` at parameters ``u`` is ``a[0] + a[1:] @ u``.
    """

    __slots__ = ("space", "n_params", "_terms")

    def __init__(self, space: VariableSpace, n_params: int, terms: Mapping[tuple[int, ...], Sequence[complex]] | None = None):
        self.space = space
        self.n_params = n_params
        clean = {}
        for exp, a in (terms or {}).items():
            a = np.asarray(a, dtype=complex)
            if a.shape != (n_params + 1,):
                raise ValueError("affine form has the wrong length")
            if np.any(a != 0):
                clean[tuple(int(e) for e in exp)] = a
        self._terms = dict(sorted(clean.items(), key=lambda kv: _grlex_key(kv[0])))

    @classmethod
    def from_components(cls, const: SparsePoly, linear: Mapping[int, SparsePoly], n_params: int) -> "ParametricPoly":
        """Build ``const + sum_k u_k * linear[k]``."""
        terms: dict[tuple[int, ...], np.ndarray] = {}

        def add(poly, slot):
            for exp, c in poly.items():
                a = terms.setdefault(exp, np.zeros(n_params + 1, dtype=complex))
                a[slot] += c

        add(const, 0)
        for k, poly in linear.items():
            add(poly, k + 1)
        return cls(const.space, n_params, terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def specialize(self, u) -> SparsePoly:
        u = np.asarray(u, dtype=complex)
        if u.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters")
        return SparsePoly(self.space, {e: a[0] + a[1:] @ u for e, a in self._terms.items()})

    def parameter_derivative(self, k: int) -> SparsePoly:
        return SparsePoly(self.space, {e: a[k + 1] for e, a in self._terms.items()})

    def constant_part(self) -> SparsePoly:
        return SparsePoly(self.space, {e: a[0] for e, a in self._terms.items()})

    def group_degree(self, group: str) -> int:
        idx = self.space.group_indices(group)
        return max((sum(e[i] for i in idx) for e in self._terms), default=-1)

    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=-1)
