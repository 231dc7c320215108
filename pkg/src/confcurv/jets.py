"""Derivative-table calculus for tensor-valued quantities.

A :class:`Jet` of order K stores a quantity's components together with all
partial derivatives up to order K as dense, fully symmetrized tables:
``tables[k]`` has shape ``comp_shape + (n,)*k`` and holds true derivative
values (not Taylor coefficients).  The Leibniz product, matrix inversion,
and scalar composition below are exact, so no finite differencing enters
any quantity derived from a metric jet.
"""

from __future__ import annotations

from itertools import permutations
from math import comb, factorial

import numpy as np

__all__ = [
    "Jet", "jet_einsum", "jet_matinv", "jet_compose_scalar",
    "jet_exp", "jet_log", "jet_power", "jet_from_gradient", "symmetrize_last",
]

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def symmetrize_last(arr: np.ndarray, k: int) -> np.ndarray:
    """Average over all permutations of the last k axes."""
    if k < 2:
        return arr
    lead = arr.ndim - k
    axes0 = tuple(range(lead))
    acc = None
    for perm in permutations(range(lead, arr.ndim)):
        term = arr.transpose(axes0 + perm)
        acc = term.copy() if acc is None else acc + term
    return acc / factorial(k)


class Jet:
    """Components plus symmetric derivative tables up to a fixed order."""

    __slots__ = ("n", "order", "tables")

    def __init__(self, n: int, order: int, tables):
        self.n = n
        self.order = order
        self.tables = [np.asarray(t, dtype=np.float64) for t in tables]

    @classmethod
    def constant(cls, values, n: int, order: int) -> "Jet":
        values = np.asarray(values, dtype=np.float64)
        tables = [values]
        for k in range(1, order + 1):
            tables.append(np.zeros(values.shape + (n,) * k))
        return cls(n, order, tables)

    @property
    def value(self) -> np.ndarray:
        return self.tables[0]

    @property
    def comp_shape(self):
        return self.tables[0].shape

    def truncated(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"jet has order {self.order}, requested {order}")
        return Jet(self.n, order, self.tables[: order + 1])

    def partial(self) -> "Jet":
        """Reinterpret one derivative order as a new (last) component index."""
        if self.order < 1:
            raise ValueError("cannot take the gradient of an order-0 jet")
        return Jet(self.n, self.order - 1, self.tables[1:])

    def __add__(self, other: "Jet") -> "Jet":
        order = min(self.order, other.order)
        return Jet(self.n, order,
                   [self.tables[k] + other.tables[k] for k in range(order + 1)])

    def __sub__(self, other: "Jet") -> "Jet":
        order = min(self.order, other.order)
        return Jet(self.n, order,
                   [self.tables[k] - other.tables[k] for k in range(order + 1)])

    def scale(self, c: float) -> "Jet":
        return Jet(self.n, self.order, [c * t for t in self.tables])

    def contract(self, spec: str) -> "Jet":
        """Apply a one-operand einsum to the component axes of every table."""
        lhs, rhs = spec.split("->")
        free = [c for c in _LETTERS if c not in spec]
        tables = []
        for k, t in enumerate(self.tables):
            d = "".join(free[:k])
            tables.append(np.einsum(f"{lhs}{d}->{rhs}{d}", t))
        return Jet(self.n, self.order, tables)


def jet_einsum(spec: str, A: Jet, B: Jet) -> Jet:
    """Leibniz product of two jets with an einsum over component axes.

    ``spec`` addresses only the component indices, e.g. ``"kl,lab->kab"``;
    derivative axes are appended and re-symmetrized automatically.
    """
    in_spec, out_spec = spec.split("->")
    in_a, in_b = in_spec.split(",")
    free = [c for c in _LETTERS if c not in spec]
    order = min(A.order, B.order)
    tables = []
    for k in range(order + 1):
        acc = None
        for j in range(k + 1):
            da = "".join(free[:j])
            db = "".join(free[j:k])
            term = np.einsum(f"{in_a}{da},{in_b}{db}->{out_spec}{da}{db}",
                             A.tables[j], B.tables[k - j])
            c = comb(k, j)
            if c != 1:
                term = c * term
            acc = term if acc is None else acc + term
        tables.append(symmetrize_last(acc, k))
    return Jet(A.n, order, tables)


def jet_matinv(G: Jet) -> Jet:
    """Inverse of a square-matrix jet by implicit differentiation."""
    inv0 = np.linalg.inv(G.tables[0])
    free = [c for c in _LETTERS if c not in "abc"]
    tables = [inv0]
    for k in range(1, G.order + 1):
        acc = None
        for j in range(1, k + 1):
            da = "".join(free[:j])
            db = "".join(free[j:k])
            term = np.einsum(f"ab{da},bc{db}->ac{da}{db}",
                             G.tables[j], tables[k - j])
            c = comb(k, j)
            if c != 1:
                term = c * term
            acc = term if acc is None else acc + term
        acc = symmetrize_last(acc, k)
        d = "".join(free[:k])
        tables.append(-np.einsum(f"ab,bc{d}->ac{d}", inv0, acc))
    return Jet(G.n, G.order, tables)


def jet_compose_scalar(u: Jet, derivs) -> Jet:
    """f(u) for a scalar jet ``u``, given f's derivatives at u's value."""
    if u.comp_shape != ():
        raise ValueError("scalar composition requires a scalar jet")
    K = u.order
    w = Jet(u.n, K, [np.zeros(())] + u.tables[1:])  # u - u0
    result = Jet.constant(np.asarray(derivs[0], dtype=np.float64), u.n, K)
    power = None
    for m in range(1, K + 1):
        power = w if power is None else jet_einsum(",->", power, w)
        result = result + power.scale(float(derivs[m]) / factorial(m))
    return result


def jet_exp(u: Jet) -> Jet:
    e = float(np.exp(u.value))
    return jet_compose_scalar(u, [e] * (u.order + 1))


def jet_log(u: Jet) -> Jet:
    u0 = float(u.value)
    derivs = [np.log(u0)]
    for m in range(1, u.order + 1):
        derivs.append((-1.0) ** (m - 1) * factorial(m - 1) / u0 ** m)
    return jet_compose_scalar(u, derivs)


def jet_power(u: Jet, p: float) -> Jet:
    """u**p for real exponent p (u must be positive)."""
    u0 = float(u.value)
    derivs = []
    c = 1.0
    for m in range(u.order + 1):
        derivs.append(c * u0 ** (p - m))
        c *= (p - m)
    return jet_compose_scalar(u, derivs)


def jet_from_gradient(value: float, grad: Jet) -> Jet:
    """Rebuild a scalar jet of order K+1 from its value and gradient jet.

    ``grad`` has component shape (n,) holding the first partials; its
    derivative tables supply all higher mixed partials (symmetrized).
    """
    if grad.comp_shape != (grad.n,):
        raise ValueError("gradient jet must have component shape (n,)")
    tables = [np.asarray(float(value))]
    for k in range(grad.order + 1):
        tables.append(symmetrize_last(grad.tables[k], k + 1))
    return Jet(grad.n, grad.order + 1, tables)
