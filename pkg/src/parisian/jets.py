"""Truncated Taylor series arithmetic.

A :class:`Jet` holds the Taylor coefficients ``a[0], ..., a[n]`` of a function
of one small increment ``eps`` around an expansion point, so that

    f(p0 + eps) = a[0] + a[1] eps + ... + a[n] eps**n + O(eps**(n+1)).

Coefficients may carry trailing batch dimensions (``a.shape == (n + 1, ...)``)
which broadcast like ordinary numpy arrays. Only the operations needed by the
scale-function and cumulant code are implemented.
"""

from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("coeffs",)
    __array_priority__ = 1000  # make ndarray * Jet defer to Jet.__rmul__

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, value, order: int) -> "Jet":
        """The identity map ``p0 + eps`` truncated at ``order``."""
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1,) + value.shape)
        c[0] = value
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1,) + value.shape)
        c[0] = value
        return cls(c)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def value(self):
        return self.coeffs[0]

    def __getitem__(self, k):
        return self.coeffs[k]

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, value={self.coeffs[0]!r})"

    def _expanded(self, ndim: int):
        """Coefficients with batch dims left-padded to ``ndim`` dimensions."""
        c = self.coeffs
        pad = ndim - (c.ndim - 1)
        if pad <= 0:
            return c
        return c.reshape((c.shape[0],) + (1,) * pad + c.shape[1:])

    # arithmetic -----------------------------------------------------------
    def __neg__(self) -> "Jet":
        return Jet(-self.coeffs)

    def __add__(self, other) -> "Jet":
        if isinstance(other, Jet):
            nd = max(self.coeffs.ndim, other.coeffs.ndim) - 1
            return Jet(self._expanded(nd) + other._expanded(nd))
        other = np.asarray(other, dtype=float)
        c = self._expanded(other.ndim) + np.zeros((1,) + other.shape)
        c[0] = c[0] + other
        return Jet(c)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self._expanded(other.ndim) * other[None, ...])
        nd = max(self.coeffs.ndim, other.coeffs.ndim) - 1
        a, b = self._expanded(nd), other._expanded(nd)
        n = min(a.shape[0], b.shape[0])
        shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
        out = np.zeros((n,) + shape)
        for k in range(n):
            acc = np.zeros(shape)
            for i in range(k + 1):
                acc = acc + a[i] * b[k - i]
            out[k] = acc
        return Jet(out)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        a = self.coeffs
        if np.any(a[0] == 0):
            raise ZeroDivisionError("jet reciprocal at a zero of the base value")
        out = np.zeros_like(a)
        out[0] = 1.0 / a[0]
        for k in range(1, a.shape[0]):
            acc = np.zeros(a.shape[1:])
            for i in range(1, k + 1):
                acc = acc + a[i] * out[k - i]
            out[k] = -acc * out[0]
        return Jet(out)

    def __truediv__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = np.asarray(other, dtype=float)
        return Jet(self._expanded(other.ndim) / other[None, ...])

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    def __pow__(self, n: int) -> "Jet":
        if int(n) != n:
            raise TypeError("only integer powers are supported for jets")
        n = int(n)
        if n < 0:
            return (self ** (-n)).reciprocal()
        result = Jet.constant(np.ones(self.coeffs.shape[1:]), self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # elementary functions -------------------------------------------------
    def exp(self) -> "Jet":
        a = self.coeffs
        out = np.zeros_like(a)
        out[0] = np.exp(a[0])
        for k in range(1, a.shape[0]):
            acc = np.zeros(a.shape[1:])
            for i in range(1, k + 1):
                acc = acc + i * a[i] * out[k - i]
            out[k] = acc / k
        return Jet(out)

    def sqrt(self) -> "Jet":
        a = self.coeffs
        out = np.zeros_like(a)
        out[0] = np.sqrt(a[0])
        for k in range(1, a.shape[0]):
            acc = np.zeros(a.shape[1:])
            for i in range(1, k):
                acc = acc + out[i] * out[k - i]
            out[k] = (a[k] - acc) / (2.0 * out[0])
        return Jet(out)


def jexp(z):
    """``exp`` that accepts floats, arrays and jets."""
    return z.exp() if isinstance(z, Jet) else np.exp(z)


def jsqrt(z):
    return z.sqrt() if isinstance(z, Jet) else np.sqrt(z)


def base_value(z):
    """Expansion-point value of a jet, or the argument itself."""
    return z.value if isinstance(z, Jet) else z
