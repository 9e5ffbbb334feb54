"""Truncated multivariate Taylor arithmetic through total degree 3.

A :class:`Jet` stores, for every multi-index ``alpha`` with ``|alpha| <= 3``
over ``n`` chart variables, the Taylor-normalized coefficient
``d^alpha f / alpha!`` of a function at a fixed expansion point.  Products
are truncated polynomial convolutions, so derivatives of composite
quantities (metric inverses, orthonormalized frames, ...) come out exact up
to rounding, with no finite-difference truncation error.

Jets are batched like numpy arrays: ``coeffs`` has shape
``batch_shape + (ncoef,)`` and arithmetic broadcasts over the batch axes.
A jet also carries an ``order``: the highest degree whose coefficients are
meaningful.  Differentiating lowers it by one; products keep the smaller of
the two orders.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from .dsl import FUNCTIONS, Binary, Const, EmbeddingMap, Unary, Var, check_pow
from .errors import DivisionByZeroJet, EvalError

__all__ = [
    "MAX_ORDER", "Jet", "MultiIndexTable", "multi_index_table",
    "jet_var", "jet_const", "jet_arith", "jet_func", "jet_eval", "jet_eval_ast",
]

MAX_ORDER = 3


class MultiIndexTable:
    """Graded ordering of the multi-indices ``|alpha| <= 3`` for ``n`` variables,
    with the precomputed gather/scatter tables used by multiplication and
    differentiation."""

    def __init__(self, n: int):
        alphas = []
        for degree in range(MAX_ORDER + 1):
            for combo in combinations_with_replacement(range(n), degree):
                alpha = [0] * n
                for v in combo:
                    alpha[v] += 1
                alphas.append(tuple(alpha))
        self.n = n
        self.alphas = alphas
        self.size = len(alphas)
        self.index = {a: k for k, a in enumerate(alphas)}
        self.degree = np.array([sum(a) for a in alphas])
        self.factorial = np.array([math.prod(math.factorial(e) for e in a) for a in alphas],
                                  dtype=float)
        self.masks = {o: (self.degree <= o).astype(float) for o in range(MAX_ORDER + 1)}

        # products: coefficient pairs whose degrees add up to at most `order`
        self.products = {}
        for order in range(MAX_ORDER + 1):
            left, right, target = [], [], []
            for i, a in enumerate(alphas):
                for j, b in enumerate(alphas):
                    if sum(a) + sum(b) <= order:
                        left.append(i)
                        right.append(j)
                        target.append(self.index[tuple(x + y for x, y in zip(a, b))])
            scatter = np.zeros((len(left), self.size))
            scatter[np.arange(len(left)), target] = 1.0
            self.products[order] = (np.array(left), np.array(right), scatter)

        # d/dx_i: new[beta] = c[beta + e_i] * (beta_i + 1); index `size` is a zero pad
        self.grad_source = np.full((n, self.size), self.size)
        self.grad_factor = np.zeros((n, self.size))
        for k, beta in enumerate(alphas):
            if sum(beta) == MAX_ORDER:
                continue
            for i in range(n):
                up = list(beta)
                up[i] += 1
                self.grad_source[i, k] = self.index[tuple(up)]
                self.grad_factor[i, k] = up[i]

    def alpha_of(self, indices) -> tuple:
        """Multi-index for a list of variable indices, e.g. (0, 1, 1) -> (1, 2)."""
        alpha = [0] * self.n
        for i in indices:
            alpha[i] += 1
        return tuple(alpha)


@lru_cache(maxsize=None)
def multi_index_table(n: int) -> MultiIndexTable:
    if n < 1:
        raise ValueError("jets need at least one variable")
    return MultiIndexTable(n)


def _is_jet(x) -> bool:
    return isinstance(x, Jet)


class Jet:
    __slots__ = ("coeffs", "n", "order")
    __array_priority__ = 1000   # make ndarray <op> Jet defer to Jet's reflected ops

    def __init__(self, coeffs, n: int, order: int = MAX_ORDER):
        coeffs = np.asarray(coeffs, dtype=float)
        table = multi_index_table(n)
        if coeffs.shape[-1:] != (table.size,):
            raise ValueError(f"expected trailing axis of {table.size} coefficients, "
                             f"got shape {coeffs.shape}")
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"order must lie in 0..{MAX_ORDER}")
        self.coeffs = coeffs
        self.n = n
        self.order = order

    # construction ------------------------------------------------------
    @classmethod
    def constant(cls, value, n: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (multi_index_table(n).size,))
        coeffs[..., 0] = value
        return cls(coeffs, n)

    @classmethod
    def stack(cls, jets, axis: int = 0) -> "Jet":
        jets = list(jets)
        n = jets[0].n
        order = min(j.order for j in jets)
        ndim = jets[0].coeffs.ndim - 1
        axis = axis if axis >= 0 else axis + ndim + 1
        return cls(np.stack([j.coeffs for j in jets], axis=axis), n, order)

    @property
    def table(self) -> MultiIndexTable:
        return multi_index_table(self.n)

    # array protocol ----------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.coeffs.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    def __len__(self):
        return self.shape[0]

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            key = key + (slice(None),)
        return Jet(self.coeffs[key], self.n, self.order)

    def _axis(self, axis):
        if axis is None:
            return tuple(range(self.ndim))
        if isinstance(axis, tuple):
            return tuple(a % self.ndim for a in axis)
        return axis % self.ndim

    def sum(self, axis=None) -> "Jet":
        return Jet(self.coeffs.sum(axis=self._axis(axis)), self.n, self.order)

    def transpose(self, *axes) -> "Jet":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return Jet(self.coeffs.transpose(tuple(axes) + (self.ndim,)), self.n, self.order)

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet(self.coeffs.reshape(tuple(shape) + (self.coeffs.shape[-1],)), self.n, self.order)

    def __repr__(self):
        return f"Jet(shape={self.shape}, n={self.n}, order={self.order})"

    # extraction ----------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.coeffs[..., 0]

    def coefficient(self, alpha) -> np.ndarray:
        """Taylor-normalized coefficient ``d^alpha f / alpha!``."""
        return self.coeffs[..., self.table.index[tuple(alpha)]]

    def partial(self, alpha) -> np.ndarray:
        """Raw partial derivative ``d^alpha f`` at the expansion point."""
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise ValueError(f"derivative of degree {sum(alpha)} exceeds jet order {self.order}")
        k = self.table.index[alpha]
        return self.coeffs[..., k] * self.table.factorial[k]

    def derivative(self, *indices) -> np.ndarray:
        """``derivative(i, j)`` is d_i d_j f; any permutation gives the same value."""
        return self.partial(self.table.alpha_of(indices))

    def as_dict(self) -> dict:
        """``{alpha: coefficient}`` for a scalar jet."""
        if self.shape != ():
            raise ValueError("as_dict needs a scalar jet")
        return {a: float(c) for a, c in zip(self.table.alphas, self.coeffs)}

    def grad(self) -> "Jet":
        """Jet of the gradient, with the derivative index as a new last axis."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        t = self.table
        padded = np.concatenate([self.coeffs, np.zeros(self.shape + (1,))], axis=-1)
        out = padded[..., t.grad_source] * t.grad_factor
        return Jet(out * t.masks[self.order - 1], self.n, self.order - 1)

    def truncate(self, order: int) -> "Jet":
        order = min(order, self.order)
        return Jet(self.coeffs * self.table.masks[order], self.n, order)

    # arithmetic ----------------------------------------------------------
    def _check(self, other: "Jet"):
        if other.n != self.n:
            raise ValueError(f"jets over {self.n} and {other.n} variables do not mix")

    def __neg__(self):
        return Jet(-self.coeffs, self.n, self.order)

    def __pos__(self):
        return self

    def __add__(self, other):
        if _is_jet(other):
            self._check(other)
            order = min(self.order, other.order)
            out = self.coeffs + other.coeffs
            if self.order != other.order:
                out = out * self.table.masks[order]
            return Jet(out, self.n, order)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        out = np.array(np.broadcast_to(self.coeffs, shape + self.coeffs.shape[-1:]))
        out[..., 0] += other
        return Jet(out, self.n, self.order)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if _is_jet(other):
            self._check(other)
            order = min(self.order, other.order)
            left, right, scatter = self.table.products[order]
            out = (self.coeffs[..., left] * other.coeffs[..., right]) @ scatter
            return Jet(out, self.n, order)
        other = np.asarray(other, dtype=float)
        return Jet(self.coeffs * other[..., None], self.n, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _is_jet(other):
            return _divide(self, other)
        other = np.asarray(other, dtype=float)
        if np.any(np.abs(other) < 1e-300):
            raise DivisionByZeroJet("division of a jet by zero")
        return Jet(self.coeffs / other[..., None], self.n, self.order)

    def __rtruediv__(self, other):
        numerator = Jet.constant(np.broadcast_to(np.asarray(other, float), self.shape), self.n)
        return _divide(numerator, self)

    def __pow__(self, exponent):
        if _is_jet(exponent):
            raise TypeError("jet exponents must be constants")
        return jet_func("pow", self, exponent)


def _compose(arg: Jet, derivs) -> Jet:
    """Taylor composition f(arg) from f and its first three derivatives at arg.value."""
    h = Jet(arg.coeffs.copy(), arg.n, arg.order)
    h.coeffs[..., 0] = 0.0
    out = np.zeros(arg.coeffs.shape)
    out[..., 0] = derivs[0]
    power = h
    for k in range(1, arg.order + 1):
        if k > 1:
            power = power * h
        out = out + (np.asarray(derivs[k]) / math.factorial(k))[..., None] * power.coeffs
    return Jet(out, arg.n, arg.order)


def _divide(num: Jet, den: Jet) -> Jet:
    num._check(den)
    b0 = den.value
    if np.any(np.abs(b0) < 1e-300):
        raise DivisionByZeroJet("division of a jet by zero")
    q0 = num.value / b0
    # q = q0 + (num - q0*den)/den, with the constant of the bracket forced to 0
    rest = num - den * q0
    rest.coeffs[..., 0] = 0.0
    recip = _compose(den, [1.0 / b0, -1.0 / b0**2, 2.0 / b0**3, -6.0 / b0**4])
    out = rest * recip
    out.coeffs[..., 0] = q0
    return out


def _falling(p: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= p - j
    return out


def _pow_derivs(a: np.ndarray, p: float, order: int, pos=None):
    check_pow(a, p, pos)
    derivs = [np.power(a, p)]
    for k in range(1, order + 1):
        c = _falling(p, k)
        if c == 0.0:
            derivs.append(np.zeros_like(a))
            continue
        if np.any(a == 0) and p - k < 0:
            raise EvalError(f"derivative of x^{p!r} is singular at 0", pos)
        derivs.append(c * np.power(a, p - k))
    return derivs


def jet_func(name: str, arg: Jet, exponent: float = None, pos=None) -> Jet:
    """Apply a whitelisted function (or ``pow`` with constant ``exponent``)."""
    a = arg.value
    if name == "pow":
        return _compose(arg, _pow_derivs(a, float(exponent), arg.order, pos))
    if name in ("log", "sqrt") and np.any(a <= 0):
        raise EvalError(f"{name} of a non-positive number", pos)
    f0 = FUNCTIONS[name](a)
    if name == "sin":
        c = np.cos(a)
        derivs = [f0, c, -f0, -c]
    elif name == "cos":
        s = np.sin(a)
        derivs = [f0, -s, -f0, s]
    elif name == "sinh":
        c = np.cosh(a)
        derivs = [f0, c, f0, c]
    elif name == "cosh":
        s = np.sinh(a)
        derivs = [f0, s, f0, s]
    elif name == "exp":
        derivs = [f0, f0, f0, f0]
    elif name == "log":
        derivs = [f0, 1.0 / a, -1.0 / a**2, 2.0 / a**3]
    elif name == "sqrt":
        derivs = [f0, 0.5 / f0, -0.25 / (a * f0), 0.375 / (a * a * f0)]
    else:
        raise KeyError(f"no jet rule for {name!r}")
    return _compose(arg, derivs)


def jet_var(index: int, value: float, n: int) -> Jet:
    """Jet of the coordinate function x^index at a point where it equals ``value``."""
    if not 0 <= index < n:
        raise ValueError(f"variable index {index} outside 0..{n - 1}")
    table = multi_index_table(n)
    coeffs = np.zeros(table.size)
    coeffs[0] = value
    e = [0] * n
    e[index] = 1
    coeffs[table.index[tuple(e)]] = 1.0
    return Jet(coeffs, n)


def jet_const(value, n: int) -> Jet:
    return Jet.constant(value, n)


def jet_arith(op: str, lhs: Jet, rhs) -> Jet:
    if op == "add":
        return lhs + rhs
    if op == "sub":
        return lhs - rhs
    if op == "mul":
        return lhs * rhs
    if op == "div":
        return lhs / rhs
    raise ValueError(f"unknown jet operation {op!r}")


def jet_eval_ast(node, variables: list) -> Jet:
    """Evaluate an expression tree with jets bound to the chart variables."""
    if isinstance(node, Const):
        return Jet.constant(node.value, variables[0].n)
    if isinstance(node, Var):
        return variables[node.index]
    if isinstance(node, Unary):
        arg = jet_eval_ast(node.arg, variables)
        if node.op == "neg":
            return -arg
        return jet_func(node.op, arg, pos=node.pos)
    left = jet_eval_ast(node.left, variables)
    if node.op == "pow":
        return jet_func("pow", left, node.right.value, pos=node.pos)
    right = jet_eval_ast(node.right, variables)
    try:
        return jet_arith(node.op, left, right)
    except DivisionByZeroJet as exc:
        raise DivisionByZeroJet("division by zero", node.pos) from exc


def jet_eval(emb: EmbeddingMap, point) -> Jet:
    """Order-3 jets of every ambient component Y^mu at ``point``; shape ``(D,)``."""
    point = [float(x) for x in point]
    if len(point) != emb.n:
        raise ValueError(f"expected {emb.n} coordinates, got {len(point)}")
    variables = [jet_var(i, x, emb.n) for i, x in enumerate(point)]
    return Jet.stack([jet_eval_ast(c, variables) for c in emb.components])
