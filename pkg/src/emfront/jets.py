"""Dense truncated Taylor arithmetic (forward-mode jets) up to total order 4.

A :class:`Jet` stores the Taylor coefficients f_alpha = (d^alpha f / alpha!)
of a smooth function at an (implicit) expansion point, over all multi-indices
alpha with |alpha| <= order.  Arithmetic is exact truncated power-series
arithmetic, so every mixed partial derivative up to the jet order can be read
off without truncation error beyond float rounding.

Coefficients are held in a flat numpy vector indexed by a graded
lexicographic ranking of multi-indices; the ranking tables are cached per
(num_vars, order) pair.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

MAX_ORDER = 4


class JetError(ValueError):
    pass


class JetDomainError(JetError):
    """Constant term fell outside the real domain of an elementary function."""

    def __init__(self, kind: str, value: float):
        self.kind = kind
        self.value = value
        super().__init__(f"{kind}: constant term {value!r} outside the real domain")


@lru_cache(maxsize=None)
def _tables(m: int, order: int):
    """Multi-index tables for jets in m variables of the given order.

    Returns (exponents, position, mul_map) where `exponents` is an
    (n_idx, m) int array in graded lexicographic order, `position` maps an
    exponent tuple to its rank, and `mul_map[i, j]` is the rank of
    exponents[i] + exponents[j] (or -1 if the sum exceeds `order`).
    """
    if m < 1:
        raise JetError(f"need at least one variable, got m={m}")
    if not 0 <= order <= MAX_ORDER:
        raise JetError(f"order must be in 0..{MAX_ORDER}, got {order}")
    idx = []
    for total in range(order + 1):
        level = []

        def rec(prefix, remaining, slots):
            if slots == 1:
                level.append(prefix + (remaining,))
                return
            for k in range(remaining, -1, -1):
                rec(prefix + (k,), remaining - k, slots - 1)

        rec((), total, m)
        idx.extend(sorted(level, reverse=True))
    exponents = np.array(idx, dtype=np.int64)
    position = {tuple(e): i for i, e in enumerate(idx)}
    n = len(idx)
    degrees = exponents.sum(axis=1)
    ia, ib, iout = [], [], []
    for i in range(n):
        for j in range(n):
            if degrees[i] + degrees[j] <= order:
                ia.append(i)
                ib.append(j)
                iout.append(position[tuple(exponents[i] + exponents[j])])
    mul_coo = (np.array(ia), np.array(ib), np.array(iout))
    return exponents, position, mul_coo


def _factorial_alpha(alpha) -> float:
    out = 1.0
    for a in alpha:
        out *= math.factorial(int(a))
    return out


class Jet:
    """Truncated Taylor polynomial of a function at a point."""

    __slots__ = ("m", "order", "c")

    def __init__(self, m: int, order: int, coeffs: np.ndarray):
        exps, _, _ = _tables(m, order)
        if coeffs.shape != (len(exps),):
            raise JetError(
                f"coefficient vector has length {coeffs.shape}, expected {len(exps)}"
            )
        self.m = m
        self.order = order
        self.c = coeffs

    # -- constructors ------------------------------------------------------

    @staticmethod
    def constant(value: float, m: int, order: int) -> "Jet":
        exps, _, _ = _tables(m, order)
        c = np.zeros(len(exps))
        c[0] = value
        return Jet(m, order, c)

    @staticmethod
    def variable(index: int, value: float, m: int, order: int) -> "Jet":
        """Jet of the coordinate function x_index at the point."""
        if not 0 <= index < m:
            raise JetError(f"variable index {index} out of range for m={m}")
        exps, pos, _ = _tables(m, order)
        c = np.zeros(len(exps))
        c[0] = value
        if order >= 1:
            e = [0] * m
            e[index] = 1
            c[pos[tuple(e)]] = 1.0
        return Jet(m, order, c)

    # -- accessors ---------------------------------------------------------

    @property
    def value(self) -> float:
        return float(self.c[0])

    def coefficient(self, alpha) -> float:
        """Taylor coefficient d^alpha f / alpha!."""
        _, pos, _ = _tables(self.m, self.order)
        key = tuple(int(a) for a in alpha)
        if key not in pos:
            raise JetError(f"multi-index {key} exceeds jet order {self.order}")
        return float(self.c[pos[key]])

    def derivative(self, alpha) -> float:
        """Mixed partial derivative d^alpha f at the expansion point."""
        return self.coefficient(alpha) * _factorial_alpha(alpha)

    def gradient(self) -> np.ndarray:
        """First partial derivatives as a vector (requires order >= 1)."""
        g = np.empty(self.m)
        for a in range(self.m):
            e = [0] * self.m
            e[a] = 1
            g[a] = self.derivative(e)
        return g

    def evaluate(self, dx) -> float:
        """Value of the Taylor polynomial at expansion point + dx."""
        exps, _, _ = _tables(self.m, self.order)
        dx = np.asarray(dx, dtype=float)
        mono = np.prod(dx[None, :] ** exps, axis=1)
        return float(self.c @ mono)

    # -- structure ---------------------------------------------------------

    def _check_compatible(self, other: "Jet"):
        if self.m != other.m or self.order != other.order:
            raise JetError(
                f"mismatched jets: ({self.m} vars, order {self.order}) vs "
                f"({other.m} vars, order {other.order})"
            )

    def truncated(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError(f"cannot extend a jet of order {self.order} to {order}")
        exps, _, _ = _tables(self.m, order)
        return Jet(self.m, order, self.c[: len(exps)].copy())

    def derivative_jet(self, axis: int) -> "Jet":
        """Jet of the partial derivative along `axis` (order drops by one)."""
        if self.order == 0:
            raise JetError("cannot differentiate an order-0 jet")
        exps_out, pos_out, _ = _tables(self.m, self.order - 1)
        _, pos_in, _ = _tables(self.m, self.order)
        c = np.zeros(len(exps_out))
        for i, beta in enumerate(exps_out):
            parent = beta.copy()
            parent[axis] += 1
            c[i] = self.c[pos_in[tuple(parent)]] * parent[axis]
        return Jet(self.m, self.order - 1, c)

    def padded(self, order: int) -> "Jet":
        """Re-embed into a higher order with zero (unknown) top coefficients.

        Only safe where the missing coefficients cannot reach the result,
        e.g. before multiplying by a jet with zero constant term.
        """
        if order < self.order:
            return self.truncated(order)
        exps, _, _ = _tables(self.m, order)
        c = np.zeros(len(exps))
        c[: len(self.c)] = self.c
        return Jet(self.m, order, c)

    def embed(self, m_new: int, var_map) -> "Jet":
        """Re-index the jet into a larger variable set.

        var_map[i] is the new axis carrying old axis i.
        """
        var_map = list(var_map)
        if len(var_map) != self.m:
            raise JetError("var_map must assign every old variable")
        exps, _, _ = _tables(self.m, self.order)
        exps_new, pos_new, _ = _tables(m_new, self.order)
        c = np.zeros(len(exps_new))
        for i, alpha in enumerate(exps):
            beta = [0] * m_new
            for old_axis, e in enumerate(alpha):
                beta[var_map[old_axis]] += int(e)
            c[pos_new[tuple(beta)]] += self.c[i]
        return Jet(m_new, self.order, c)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check_compatible(other)
            return Jet(self.m, self.order, self.c + other.c)
        c = self.c.copy()
        c[0] += float(other)
        return Jet(self.m, self.order, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.m, self.order, -self.c)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -float(other))

    def __rsub__(self, other):
        return (-self) + float(other)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.m, self.order, self.c * float(other))
        self._check_compatible(other)
        _, _, (ia, ib, iout) = _tables(self.m, self.order)
        out = np.bincount(iout, weights=self.c[ia] * other.c[ib],
                          minlength=len(self.c))
        return Jet(self.m, self.order, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return self * (1.0 / float(other))

    def __rtruediv__(self, other):
        return reciprocal(self) * float(other)

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise JetError("use pow_real for non-integer exponents")
        if k < 0:
            return reciprocal(self.__pow__(-k))
        if k == 0:
            return Jet.constant(1.0, self.m, self.order)
        if k <= 4:
            out = self
            for _ in range(k - 1):
                out = out * self
            return out
        result = Jet.constant(1.0, self.m, self.order)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __repr__(self):
        return f"Jet(m={self.m}, order={self.order}, value={self.value!r})"


# -- elementary functions ---------------------------------------------------


def _series(a: Jet, coeffs) -> Jet:
    """Compose the univariate series sum_k coeffs[k] * (a - a0)^k with a."""
    u = a - a.value
    out = Jet.constant(coeffs[-1], a.m, a.order)
    for k in range(len(coeffs) - 2, -1, -1):
        out = out * u + coeffs[k]
    return out


def exp(a: Jet) -> Jet:
    e = math.exp(a.value)
    return _series(a, [e / math.factorial(k) for k in range(a.order + 1)])


def log(a: Jet) -> Jet:
    a0 = a.value
    if a0 <= 0.0:
        raise JetDomainError("log", a0)
    coeffs = [math.log(a0)]
    coeffs += [(-1.0) ** (k - 1) / (k * a0**k) for k in range(1, a.order + 1)]
    return _series(a, coeffs)


def sin(a: Jet) -> Jet:
    a0 = a.value
    return _series(
        a, [math.sin(a0 + k * math.pi / 2) / math.factorial(k) for k in range(a.order + 1)]
    )


def cos(a: Jet) -> Jet:
    a0 = a.value
    return _series(
        a, [math.cos(a0 + k * math.pi / 2) / math.factorial(k) for k in range(a.order + 1)]
    )


def pow_real(a: Jet, r: float) -> Jet:
    """a**r for real r; requires a strictly positive constant term."""
    a0 = a.value
    if a0 <= 0.0:
        raise JetDomainError("pow_real", a0)
    coeffs = []
    binom = 1.0
    for k in range(a.order + 1):
        coeffs.append(binom * a0 ** (r - k))
        binom *= (r - k) / (k + 1)
    return _series(a, coeffs)


def sqrt(a: Jet) -> Jet:
    if a.value <= 0.0:
        raise JetDomainError("sqrt", a.value)
    return pow_real(a, 0.5)


def reciprocal(a: Jet) -> Jet:
    a0 = a.value
    if a0 == 0.0:
        raise JetDomainError("reciprocal", a0)
    return _series(a, [(-1.0) ** k / a0 ** (k + 1) for k in range(a.order + 1)])


ELEMENTARY = {
    "exp": exp,
    "log": log,
    "sin": sin,
    "cos": cos,
    "sqrt": sqrt,
    "reciprocal": reciprocal,
}


def elementary(kind: str, a: Jet, extra: float | None = None) -> Jet:
    """Dispatch by name; `extra` is the exponent for pow_real."""
    if kind == "pow_real":
        if extra is None:
            raise JetError("pow_real requires the exponent argument")
        return pow_real(a, extra)
    try:
        fn = ELEMENTARY[kind]
    except KeyError:
        raise JetError(f"unknown elementary function {kind!r}") from None
    return fn(a)


# -- composition and inversion ----------------------------------------------


def compose(f: Jet, args: list[Jet]) -> Jet:
    """Jet of f(g_1, ..., g_k) where args are jets of the inner map.

    f is a jet in k variables at the point (args[0].value, ...); the result
    is a jet in the args' variables at their common expansion point.
    """
    if len(args) != f.m:
        raise JetError(f"f takes {f.m} arguments, got {len(args)}")
    if not args:
        raise JetError("composition needs at least one inner jet")
    m, order = args[0].m, args[0].order
    for g in args:
        if g.m != m or g.order != order:
            raise JetError("inner jets must share variables and order")
    shifted = [g - g.value for g in args]
    exps, _, _ = _tables(f.m, f.order)
    # Powers of each shifted argument up to the needed degree.
    pows = []
    for g in shifted:
        p = [Jet.constant(1.0, m, order)]
        for _ in range(f.order):
            p.append(p[-1] * g)
        pows.append(p)
    out = Jet.constant(0.0, m, order)
    for i, alpha in enumerate(exps):
        coeff = f.c[i]
        if coeff == 0.0:
            continue
        term = Jet.constant(coeff, m, order)
        for axis, e in enumerate(alpha):
            if e:
                term = term * pows[axis][e]
        out = out + term
    return out


def integrate(grads: list[Jet], value: float) -> Jet:
    """Jet of a function from jets of its partial derivatives plus its value.

    grads[a] is the jet of the a-th partial (all of one order w); the result
    has order w+1 with coefficient alpha read from grads along the first
    axis where alpha is positive.  Consistency of mixed partials is the
    caller's responsibility.
    """
    if not grads:
        raise JetError("integration needs at least one gradient jet")
    m, w = grads[0].m, grads[0].order
    if len(grads) != m:
        raise JetError(f"need {m} gradient jets, got {len(grads)}")
    for gj in grads:
        if gj.m != m or gj.order != w:
            raise JetError("gradient jets must share variables and order")
    order = w + 1
    if order > MAX_ORDER:
        raise JetError(f"integrated order {order} exceeds {MAX_ORDER}")
    exps, pos, _ = _tables(m, order)
    _, pos_in, _ = _tables(m, w)
    c = np.zeros(len(exps))
    c[0] = value
    for i, alpha in enumerate(exps[1:], start=1):
        a = int(np.argmax(alpha > 0))
        beta = alpha.copy()
        beta[a] -= 1
        c[i] = grads[a].c[pos_in[tuple(beta)]] / alpha[a]
    return Jet(m, order, c)


def inverse_map(f_jets: list[Jet], point: np.ndarray) -> list[Jet]:
    """Jets of the inverse of the map whose components are f_jets.

    f_jets are n jets in n variables expanded at `point` with values t;
    the result is n jets in n variables (the target coordinates, expanded at
    t) whose values are the components of `point`, satisfying F o G = id up
    to the jet order.
    """
    n = len(f_jets)
    if n == 0 or f_jets[0].m != n:
        raise JetError("inverse needs n jets in n variables")
    order = f_jets[0].order
    t = np.array([g.value for g in f_jets])
    J0 = np.array([[f_jets[i].derivative([1 if a == b else 0 for b in range(n)])
                    for a in range(n)] for i in range(n)])
    Jinv = np.linalg.inv(J0)
    ident = [Jet.variable(a, t[a], n, order) for a in range(n)]
    G = []
    for a in range(n):
        g = Jet.constant(float(point[a]), n, order)
        for b in range(n):
            g = g + Jinv[a, b] * (ident[b] - t[b])
        G.append(g)
    # Newton iteration with frozen Jacobian; each pass gains at least one
    # order of accuracy, so `order` passes suffice from the linear start.
    for _ in range(max(1, order - 1)):
        F_of_G = [compose(f, G) for f in f_jets]
        resid = [F_of_G[i] - ident[i] for i in range(n)]
        G = [G[a] - sum((Jinv[a, i] * resid[i] for i in range(n)),
                        Jet.constant(0.0, n, order))
             for a in range(n)]
    return G
