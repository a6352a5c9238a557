"""Elementwise math that works on floats, numpy arrays and mpmath scalars.

Deep tails of improper integrals sit at t ~ -exp(1e12), far outside the
double range, so every built-in formula is written against these helpers
and can be handed an ``mpmath.mpf`` instead of an array.
"""
import mpmath
import numpy as np

mpf = mpmath.mpf

# exp(x) needs an exponent integer of ~mag(x) bits; past this we give up.
_MAX_EXP_MAG = 4096


def is_mp(x):
    return isinstance(x, mpmath.mpf)


def exp(x):
    if is_mp(x):
        if x and mpmath.mag(x) > _MAX_EXP_MAG:
            if x < 0:
                return mpf(0)
            raise OverflowError("exp argument too large")
        return mpmath.exp(x)
    return np.exp(x)


def log(x):
    if is_mp(x):
        return mpmath.log(x) if x >= 0 else mpmath.mpf("nan")
    return np.log(x)


def log1p(x):
    if is_mp(x):
        return mpmath.log1p(x)
    return np.log1p(x)


def sqrt(x):
    if is_mp(x):
        return mpmath.sqrt(x) if x >= 0 else mpmath.mpf("nan")
    return np.sqrt(x)


def expm1(x):
    if is_mp(x):
        return mpmath.expm1(x)
    return np.expm1(x)


def zeros_like(x):
    if is_mp(x):
        return mpf(0)
    if isinstance(x, np.ndarray):
        return np.zeros_like(x, dtype=float)
    return 0.0


def ones_like(x):
    if is_mp(x):
        return mpf(1)
    if isinstance(x, np.ndarray):
        return np.ones_like(x, dtype=float)
    return 1.0


def all_finite(x):
    if is_mp(x):
        return bool(mpmath.isfinite(x))
    return bool(np.all(np.isfinite(x)))


def to_float(x):
    if is_mp(x):
        return float(x)
    return x


def power(x, p):
    if is_mp(x) and x < 0 and p != int(p):
        return mpmath.mpf("nan")
    return x ** p
