"""Truncated bivariate Taylor arithmetic.

A :class:`Jet` stores the Taylor coefficients ``c[i, j] = d^i_x d^j_y u / (i! j!)``
for ``i + j <= order`` at a batch of base points.  Arithmetic truncates
products at total degree ``order``; elementary functions are composed via
their univariate Taylor series about the base value.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Jet", "variables", "sin", "cos", "atan", "sqrt", "power"]


def _monomials(order):
    return [(i, n - i) for n in range(order + 1) for i in range(n, -1, -1)]


_TABLES = {}


def _table(order):
    if order not in _TABLES:
        mons = _monomials(order)
        index = {m: k for k, m in enumerate(mons)}
        triples = []
        for a, (i1, j1) in enumerate(mons):
            for b, (i2, j2) in enumerate(mons):
                if i1 + i2 + j1 + j2 <= order:
                    triples.append((a, b, index[(i1 + i2, j1 + j2)]))
        _TABLES[order] = (mons, index, np.array(triples, dtype=np.int64))
    return _TABLES[order]


class Jet:
    __array_priority__ = 100

    def __init__(self, coeffs, order):
        self.c = coeffs
        self.order = order

    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        c = np.zeros_like(self.c)
        c[0] = other
        return Jet(c, self.order)

    @property
    def value(self):
        return self.c[0]

    def coeff(self, i, j):
        _, index, _ = _table(self.order)
        return self.c[index[(i, j)]]

    def derivative(self, i, j):
        """Partial derivative ``d^i_x d^j_y`` at the base points."""
        return math.factorial(i) * math.factorial(j) * self.coeff(i, j)

    def __add__(self, other):
        other = self._lift(other)
        return Jet(self.c + other.c, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.order)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other, self.order)
        _, _, triples = _table(self.order)
        out = np.zeros(np.broadcast_shapes(self.c.shape, other.c.shape))
        for a, b, k in triples:
            out[k] += self.c[a] * other.c[b]
        return Jet(out, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other, self.order)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, int) and p >= 0:
            result = self._lift(1.0)
            for _ in range(p):
                result = result * self
            return result
        return power(self, p)

    def compose(self, derivs):
        """``f(self)`` given ``derivs[n] = f^(n)(base value)`` for ``n <= order``."""
        h = Jet(self.c.copy(), self.order)
        h.c[0] = 0.0
        result = self._lift(0.0) + derivs[0]
        term = self._lift(1.0)
        for n in range(1, self.order + 1):
            term = term * h
            result = result + term * (derivs[n] / math.factorial(n))
        return result

    def reciprocal(self):
        x0 = self.c[0]
        return self.compose([(-1) ** n * math.factorial(n) / x0 ** (n + 1) for n in range(self.order + 1)])


def variables(x, y, order=4):
    """Independent jets ``x`` and ``y`` seeded at arrays of base points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape, y.shape)
    mons, index, _ = _table(order)
    cx = np.zeros((len(mons),) + shape)
    cy = np.zeros((len(mons),) + shape)
    cx[0] = x
    cx[index[(1, 0)]] = 1.0
    cy[0] = y
    cy[index[(0, 1)]] = 1.0
    return Jet(cx, order), Jet(cy, order)


def sin(u):
    s, c = np.sin(u.value), np.cos(u.value)
    cycle = [s, c, -s, -c]
    return u.compose([cycle[n % 4] for n in range(u.order + 1)])


def cos(u):
    s, c = np.sin(u.value), np.cos(u.value)
    cycle = [c, -s, -c, s]
    return u.compose([cycle[n % 4] for n in range(u.order + 1)])


def power(u, p):
    """``u ** p`` for real ``p``; requires a positive base value."""
    x0 = u.value
    derivs = []
    coef = 1.0
    for n in range(u.order + 1):
        derivs.append(coef * x0 ** (p - n))
        coef *= p - n
    return u.compose(derivs)


def sqrt(u):
    return power(u, 0.5)


def atan(u):
    """Arctangent; derivatives from ``d/dt atan t = 1 / (1 + t^2)``."""
    t = np.asarray(u.value, dtype=float)
    # d^n/dt^n atan(t) = (n-1)! cos^n(theta) sin(n (theta + pi/2)) with theta = atan(t)
    theta = np.arctan(t)
    derivs = [theta]
    for n in range(1, u.order + 1):
        derivs.append(math.factorial(n - 1) * np.cos(theta) ** n * np.sin(n * (theta + np.pi / 2)))
    return u.compose(derivs)
