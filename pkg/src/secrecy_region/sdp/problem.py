"""A tiny modeling layer for SDPs over Hermitian and scalar variable blocks.

Expressions are affine in the variables. Scalar expressions are real,
matrix expressions are Hermitian. A problem compiles into the real conic
form consumed by :mod:`secrecy_region.sdp.ipm`::

    minimize    c @ x
    subject to  A x = b
                G x + s = h,   s in (R_+^l  x  S_+^{n_1} x ... )
"""

from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .embedding import ValidationError, embed_stack, hermitian_basis, hermitian_coords


class Variable:
    kind: str = ""
    __array_ufunc__ = None      # make numpy defer to our reflected operators

    def __init__(self, name: str, dim: int = 1):
        self.name = name
        self.dim = dim

    def __hash__(self) -> int:
        return id(self)

    def __eq__(self, other) -> bool:
        return self is other

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class ScalarVar(Variable):
    """Nonnegative real scalar (a 1 x 1 PSD block)."""

    kind = "nonnegative-scalar"

    def _as_affine(self) -> Affine:
        return Affine({self: 1.0})

    def __add__(self, other):
        return self._as_affine() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._as_affine() - other

    def __rsub__(self, other):
        return other - self._as_affine()

    def __neg__(self):
        return -self._as_affine()

    def __mul__(self, k):
        return self._as_affine() * k

    __rmul__ = __mul__


class HermitianVar(Variable):
    """n x n complex Hermitian PSD block."""

    kind = "hermitian-psd"

    def _as_expr(self) -> HermAffine:
        return HermAffine(np.zeros((self.dim, self.dim), complex), {self: [(np.eye(self.dim), 1.0)]})

    def __add__(self, other):
        return self._as_expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._as_expr() - other

    def __rsub__(self, other):
        return other - self._as_expr()

    def __neg__(self):
        return -self._as_expr()

    def __mul__(self, k):
        return self._as_expr() * k

    __rmul__ = __mul__


class Affine:
    """Real affine scalar: sum of Re Tr(C_v X_v) and s_v x_v, plus a constant."""

    __array_ufunc__ = None

    def __init__(self, terms: dict | None = None, const: float = 0.0):
        self.terms = dict(terms or {})
        self.const = float(const)

    @staticmethod
    def lift(value) -> Affine:
        if isinstance(value, Affine):
            return value
        if isinstance(value, ScalarVar):
            return value._as_affine()
        if isinstance(value, Real):
            return Affine(const=float(value))
        raise TypeError(f"cannot use {type(value).__name__} as a scalar expression")

    def __add__(self, other):
        other = Affine.lift(other)
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms[v] + c if v in terms else c
        return Affine(terms, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-Affine.lift(other))

    def __rsub__(self, other):
        return Affine.lift(other) - self

    def __mul__(self, k):
        if not isinstance(k, Real):
            raise TypeError("scalar expressions can only be scaled by real numbers")
        k = float(k)
        return Affine({v: c * k for v, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def value(self, values: dict) -> float:
        total = self.const
        for v, c in self.terms.items():
            if isinstance(v, HermitianVar):
                total += float(np.real(np.trace(c @ values[v.name])))
            else:
                total += c * float(values[v.name])
        return total


class HermAffine:
    """Hermitian-matrix-valued affine map.

    ``terms`` maps a HermitianVar to a list of ``(M, c)`` pairs meaning
    ``c * M X M^H``, and a ScalarVar to a Hermitian coefficient ``F`` meaning
    ``x * F``.
    """

    __array_ufunc__ = None

    def __init__(self, const: np.ndarray, terms: dict | None = None):
        self.const = np.asarray(const, dtype=complex)
        self.terms = dict(terms or {})

    @property
    def dim(self) -> int:
        return self.const.shape[0]

    @staticmethod
    def lift(value, dim: int | None = None) -> HermAffine:
        if isinstance(value, HermAffine):
            return value
        if isinstance(value, HermitianVar):
            return value._as_expr()
        if isinstance(value, np.ndarray):
            return HermAffine(value)
        if isinstance(value, Real) and dim is not None:
            return HermAffine(float(value) * np.eye(dim))
        raise TypeError(f"cannot use {type(value).__name__} as a matrix expression")

    def __add__(self, other):
        other = HermAffine.lift(other, self.dim)
        if other.dim != self.dim:
            raise ValidationError(f"dimension mismatch: {self.dim} vs {other.dim}")
        terms = {v: (list(t) if isinstance(v, HermitianVar) else t) for v, t in self.terms.items()}
        for v, t in other.terms.items():
            if v not in terms:
                terms[v] = list(t) if isinstance(v, HermitianVar) else t
            elif isinstance(v, HermitianVar):
                terms[v] = terms[v] + list(t)
            else:
                terms[v] = terms[v] + t
        return HermAffine(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-HermAffine.lift(other, self.dim))

    def __rsub__(self, other):
        return HermAffine.lift(other, self.dim) - self

    def __mul__(self, k):
        if not isinstance(k, Real):
            raise TypeError("matrix expressions can only be scaled by real numbers")
        k = float(k)
        terms = {}
        for v, t in self.terms.items():
            terms[v] = [(M, c * k) for M, c in t] if isinstance(v, HermitianVar) else t * k
        return HermAffine(self.const * k, terms)

    __rmul__ = __mul__

    def value(self, values: dict) -> np.ndarray:
        out = self.const.copy()
        for v, t in self.terms.items():
            if isinstance(v, HermitianVar):
                X = values[v.name]
                for M, c in t:
                    out = out + c * (M @ X @ M.conj().T)
            else:
                out = out + float(values[v.name]) * t
        return 0.5 * (out + out.conj().T)


def congruence(M: np.ndarray, expr) -> HermAffine:
    """``M expr M^H`` for a matrix expression (or variable) ``expr``."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    expr = HermAffine.lift(expr)
    terms = {}
    for v, t in expr.terms.items():
        if isinstance(v, HermitianVar):
            terms[v] = [(M @ N, c) for N, c in t]
        else:
            terms[v] = M @ t @ M.conj().T
    return HermAffine(M @ expr.const @ M.conj().T, terms)


def quad(h: np.ndarray, expr) -> Affine:
    """Real scalar ``h X h^H`` for a row vector ``h``."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    if h.shape[0] != 1:
        raise ValidationError("quad expects a row vector")
    m = congruence(h, expr)
    return _scalarize(m)


def trace(expr) -> Affine:
    expr = HermAffine.lift(expr)
    terms = {}
    for v, t in expr.terms.items():
        if isinstance(v, HermitianVar):
            terms[v] = sum(c * (M.conj().T @ M) for M, c in t)
        else:
            terms[v] = float(np.real(np.trace(t)))
    return Affine(terms, float(np.real(np.trace(expr.const))))


def scalar_matrix(expr, F: np.ndarray) -> HermAffine:
    """``expr * F`` for a scalar expression and a constant Hermitian F."""
    expr = Affine.lift(expr)
    F = np.asarray(F, dtype=complex)
    terms = {}
    for v, c in expr.terms.items():
        if isinstance(v, ScalarVar):
            terms[v] = c * F
        else:
            raise ValidationError("scalar_matrix needs an expression in scalar variables only")
    return HermAffine(expr.const * F, terms)


def _scalarize(m: HermAffine) -> Affine:
    terms = {}
    for v, t in m.terms.items():
        if isinstance(v, HermitianVar):
            terms[v] = sum(c * (M.conj().T @ M) for M, c in t)
        else:
            terms[v] = float(np.real(t[0, 0]))
    return Affine(terms, float(np.real(m.const[0, 0])))


@dataclass
class CompiledProblem:
    c: np.ndarray
    c0: float
    sense: float
    A: np.ndarray
    b: np.ndarray
    Gl: np.ndarray
    hl: np.ndarray
    psd_groups: dict          # n -> (G (B, N, n, n), h (B, n, n))
    offsets: dict             # variable name -> (start, stop)
    var_cones: dict           # hermitian variable name -> (n, block index in group)


@dataclass
class SdpProblem:
    """Variables, a linear objective, and affine / LMI constraints.

    Inequalities are ``expr >= 0``; LMIs are ``expr >= 0`` in the PSD order.
    """

    variables: list = field(default_factory=list)
    objective: Affine = field(default_factory=Affine)
    sense: str = "max"
    eq_constraints: list = field(default_factory=list)
    ineq_constraints: list = field(default_factory=list)
    lmi_constraints: list = field(default_factory=list)

    def hermitian(self, name: str, n: int) -> HermitianVar:
        v = HermitianVar(name, n)
        self._declare(v)
        return v

    def scalar(self, name: str) -> ScalarVar:
        v = ScalarVar(name)
        self._declare(v)
        return v

    def _declare(self, v: Variable) -> None:
        if any(u.name == v.name for u in self.variables):
            raise ValidationError(f"duplicate block id {v.name!r}")
        self.variables.append(v)

    def maximize(self, expr) -> None:
        self.objective, self.sense = Affine.lift(expr), "max"

    def minimize(self, expr) -> None:
        self.objective, self.sense = Affine.lift(expr), "min"

    def add_eq(self, expr) -> None:
        self.eq_constraints.append(Affine.lift(expr))

    def add_ineq(self, expr) -> None:
        self.ineq_constraints.append(Affine.lift(expr))

    def add_lmi(self, expr) -> None:
        expr = HermAffine.lift(expr)
        self.lmi_constraints.append(expr)

    def validate(self) -> None:
        declared = set(self.variables)
        exprs = [self.objective, *self.eq_constraints, *self.ineq_constraints]
        for e in exprs + self.lmi_constraints:
            for v in e.terms:
                if v not in declared:
                    raise ValidationError(f"expression references undeclared block {v.name!r}")
        for e in exprs:
            for v, c in e.terms.items():
                if not np.all(np.isfinite(c)):
                    raise ValidationError(f"non-finite coefficient on {v.name!r}")
            if not np.isfinite(e.const):
                raise ValidationError("non-finite constant term")
        for m in self.lmi_constraints:
            if not np.all(np.isfinite(m.const)):
                raise ValidationError("non-finite LMI constant")

    def compile(self) -> CompiledProblem:
        self.validate()
        offsets, bases = {}, {}
        N = 0
        for v in self.variables:
            size = v.dim * v.dim if isinstance(v, HermitianVar) else 1
            offsets[v.name] = (N, N + size)
            if isinstance(v, HermitianVar):
                bases[v.name] = hermitian_basis(v.dim)
            N += size

        def row(e: Affine) -> np.ndarray:
            a = np.zeros(N)
            for v, coef in e.terms.items():
                lo, hi = offsets[v.name]
                if isinstance(v, HermitianVar):
                    a[lo:hi] += hermitian_coords(np.asarray(coef, dtype=complex))
                else:
                    a[lo] += coef
            return a

        sense = -1.0 if self.sense == "max" else 1.0
        c = sense * row(self.objective)
        A = np.array([row(e) for e in self.eq_constraints]).reshape(-1, N)
        b = np.array([-e.const for e in self.eq_constraints])

        l_rows, l_h = [], []
        for v in self.variables:
            if isinstance(v, ScalarVar):
                g = np.zeros(N)
                g[offsets[v.name][0]] = -1.0
                l_rows.append(g)
                l_h.append(0.0)
        for e in self.ineq_constraints:
            l_rows.append(-row(e))
            l_h.append(e.const)
        Gl = np.array(l_rows).reshape(-1, N)
        hl = np.array(l_h)

        groups: dict[int, tuple[list, list]] = {}
        var_cones = {}
        for v in self.variables:
            if isinstance(v, HermitianVar):
                lo, hi = offsets[v.name]
                G = np.zeros((N, v.dim, v.dim), dtype=complex)
                G[lo:hi] = -bases[v.name]
                gs, hs = groups.setdefault(2 * v.dim, ([], []))
                var_cones[v.name] = (2 * v.dim, len(gs))
                gs.append(embed_stack(G))
                hs.append(np.zeros((2 * v.dim, 2 * v.dim)))
        for m in self.lmi_constraints:
            d = m.dim
            G = np.zeros((N, d, d), dtype=complex)
            for v, t in m.terms.items():
                lo, hi = offsets[v.name]
                if isinstance(v, HermitianVar):
                    E = bases[v.name]
                    for M, coef in t:
                        G[lo:hi] -= coef * (M @ E @ M.conj().T)
                else:
                    G[lo] -= t
            gs, hs = groups.setdefault(2 * d, ([], []))
            gs.append(embed_stack(G))
            hs.append(embed_stack(m.const))
        psd_groups = {n: (np.array(gs), np.array(hs)) for n, (gs, hs) in groups.items()}
        return CompiledProblem(c, self.objective.const, sense, A, b, Gl, hl, psd_groups, offsets, var_cones)
