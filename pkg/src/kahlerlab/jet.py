"""Truncated Taylor (jet) arithmetic up to fourth order.

A :class:`Jet` stores a value together with its derivatives,
``(f, f', ..., f^(order))``.  Internally products and elementary functions
are evaluated on normalized Taylor coefficients ``f^(k)/k!`` with the usual
recurrences, so polynomial inputs of degree <= order are reproduced
exactly.  Coefficients may be floats, numpy arrays or mpmath scalars.
"""
from math import factorial

from . import _backend as B

MAX_ORDER = 4


def _to_taylor(derivs):
    return [d / factorial(k) for k, d in enumerate(derivs)]


def _from_taylor(coeffs):
    return tuple(c * factorial(k) for k, c in enumerate(coeffs))


class Jet:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = tuple(coeffs)
        if not 1 <= len(coeffs) <= MAX_ORDER + 1:
            raise ValueError(f"jet order must be in [0, {MAX_ORDER}]")
        self.coeffs = coeffs

    @classmethod
    def variable(cls, t, order):
        z = B.zeros_like(t)
        one = B.ones_like(t)
        return cls((t, one) + (z,) * (order - 1) if order else (t,))

    @classmethod
    def constant(cls, value, order, like=0.0):
        z = B.zeros_like(like)
        return cls((value + z,) + (z,) * order)

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def value(self):
        return self.coeffs[0]

    def __getitem__(self, k):
        return self.coeffs[k]

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        return f"Jet({self.coeffs!r})"

    def is_finite(self):
        return all(B.all_finite(c) for c in self.coeffs)

    def truncate(self, order):
        return Jet(self.coeffs[: order + 1])

    def shift(self, k=1):
        """Jet of the k-th derivative, losing k orders."""
        if k > self.order:
            raise ValueError("cannot shift past the jet order")
        return Jet(self.coeffs[k:])

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.order != self.order:
                m = min(self.order, other.order)
                return self.truncate(m), other.truncate(m)
            return self, other
        return self, Jet.constant(other, self.order, self.coeffs[0])

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(x + y for x, y in zip(a.coeffs, b.coeffs))

    __radd__ = __add__

    def __neg__(self):
        return Jet(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(c * other for c in self.coeffs)
        a, b = self._coerce(other)
        x, y = _to_taylor(a.coeffs), _to_taylor(b.coeffs)
        out = [sum(x[j] * y[k - j] for j in range(k + 1)) for k in range(len(x))]
        return Jet(_from_taylor(out))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(c / other for c in self.coeffs)
        a, b = self._coerce(other)
        x, y = _to_taylor(a.coeffs), _to_taylor(b.coeffs)
        q = []
        for k in range(len(x)):
            acc = x[k]
            for j in range(1, k + 1):
                acc = acc - y[j] * q[k - j]
            q.append(acc / y[0])
        return Jet(_from_taylor(q))

    def __rtruediv__(self, other):
        return Jet.constant(other, self.order, self.coeffs[0]) / self

    def __pow__(self, p):
        if isinstance(p, Jet):
            raise TypeError("jet exponents must be constants")
        if float(p) == int(p) and 0 <= int(p) <= 8:
            out = Jet.constant(1.0, self.order, self.coeffs[0])
            for _ in range(int(p)):
                out = out * self
            return out
        x = _to_taylor(self.coeffs)
        y = [B.power(x[0], p)]
        for k in range(1, len(x)):
            acc = 0
            for j in range(1, k + 1):
                acc = acc + ((p + 1) * j - k) * x[j] * y[k - j]
            y.append(acc / (k * x[0]))
        return Jet(_from_taylor(y))

    def exp(self):
        x = _to_taylor(self.coeffs)
        e = [B.exp(x[0])]
        for k in range(1, len(x)):
            acc = 0
            for j in range(1, k + 1):
                acc = acc + j * x[j] * e[k - j]
            e.append(acc / k)
        return Jet(_from_taylor(e))

    def log(self):
        x = _to_taylor(self.coeffs)
        out = [B.log(x[0])]
        for k in range(1, len(x)):
            acc = 0
            for j in range(1, k):
                acc = acc + j * out[j] * x[k - j]
            out.append((x[k] - acc / k) / x[0])
        return Jet(_from_taylor(out))

    def sqrt(self):
        return self ** 0.5

    def compose_affine(self, a, b):
        """Jet of s -> f(a*s + b) given the jet of f at a*s + b."""
        return Jet(c * a ** k for k, c in enumerate(self.coeffs))


def exp(j):
    return j.exp()


def log(j):
    return j.log()
