"""Orlicz-type integrability tests for radial Monge-Ampère densities.

For v = chi(log|z|^2) the density is f(t) = chi'^(n-1) chi'' e^{-nt} and
the euclidean volume element reduces to e^{nt} dt, so the integral of a
weight W(f) over the ball becomes the one-dimensional integral of
W(f(t)) e^{nt} = chi'^(n-1) chi'' * (W(f)/f).  Every weight is written
through ``log f`` so nothing overflows deep in the tail, where f itself can
be as large as exp(exp(10^12)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import mpmath
import numpy as np

from . import _backend as B
from .errors import GrowthAssumptionViolated, UnsupportedClass
from .geometry import RadialMetric, radial_distance, sqrt_chi2
from .profile import Profile
from .quadrature import DEFAULT_TOL, IntegralVerdict, integrate_improper, mp_safe

# -- weights -----------------------------------------------------------------------------


def _log_f_plus_3(log_f):
    """log(f + 3) from log f without forming f."""
    if B.is_mp(log_f):
        if log_f > 40:
            return log_f + mpmath.log1p(3 * B.exp(-log_f))
        return mpmath.log(mpmath.exp(log_f) + 3)
    log_f = np.asarray(log_f, dtype=float)
    with np.errstate(over="ignore"):
        return np.where(log_f > 40, log_f + np.log1p(3 * np.exp(-np.minimum(log_f, 700))),
                        np.log(np.exp(np.minimum(log_f, 40)) + 3))


@dataclass(frozen=True)
class PowerEps:
    """w(s) = s^(1+eps)."""
    eps: float
    n: int = 1

    def ratio(self, log_f):
        return B.exp(self.eps * log_f)


@dataclass(frozen=True)
class LogPower:
    """w(s) = s (log(s+3))^(n+eps)."""
    n: int
    eps: float

    def ratio(self, log_f):
        return _log_f_plus_3(log_f) ** (self.n + self.eps)


@dataclass(frozen=True)
class LogLogPower:
    """w(s) = s (log(s+3))^n (log log(s+3))^(n+eps)."""
    n: int
    eps: float

    def ratio(self, log_f):
        l3 = _log_f_plus_3(log_f)
        return l3 ** self.n * B.log(l3) ** (self.n + self.eps)


@dataclass(frozen=True)
class TheoremB:
    """W(f) = f |log f|^n (log log(f + 3))^p."""
    n: int
    p: float

    def ratio(self, log_f):
        return abs(log_f) ** self.n * B.log(_log_f_plus_3(log_f)) ** self.p


@dataclass(frozen=True)
class ConditionK:
    """w(s) = s (log s)^n (h(log log(s + 3)))^n with the integral of 1/h finite (asserted by the caller)."""
    h: Callable
    n: int = 1

    def ratio(self, log_f):
        return abs(log_f) ** self.n * self.h(B.log(_log_f_plus_3(log_f))) ** self.n


def power_h(exponent: float = 1.01):
    """h(s) = s^exponent; exponent > 1 keeps the integral of 1/h finite."""

    def h(s):
        return s ** exponent

    h.exponent = exponent
    return h


# -- growth assumption -------------------------------------------------------------------
def check_growth(profile: Profile, kmax: int = 60, limit: float = 1e3):
    """Numerical test that chi', chi'' >= exp(C t) for some C as t -> -inf.

    The ratio log(chi^(k)(t)) / t must stay bounded along t = -2^j; a
    super-exponentially flat profile makes it blow up (or underflow to 0).
    """
    hi = profile.anchor
    worst = 0.0
    for j in range(1, kmax + 1):
        t = -mpmath.mpf(2) ** j
        if t >= hi:
            continue
        jet = profile.eval_jet(t, 2)
        for k in (1, 2):
            v = jet[k]
            if not v > 0:
                raise GrowthAssumptionViolated(f"chi^({k}) vanishes at t=-2^{j}")
            ratio = float(mpmath.log(v) / t) if B.is_mp(v) else math.log(v) / float(t)
            worst = max(worst, ratio)
            if not ratio <= limit:
                raise GrowthAssumptionViolated(f"log chi^({k})(t)/t = {ratio:g} at t=-2^{j}: decays faster than any exp(Ct)")
    return worst


def _log_density(profile, n, t):
    jet = profile.eval_jet(t, 2)
    c1, c2 = jet[1], jet[2]
    log_f = (n - 1) * B.log(c1) + B.log(c2) - n * t
    return c1, c2, log_f


# -- classifiers -------------------------------------------------------------------------
def orlicz_radial(profile: Profile, n: int, W, t0: Optional[float] = None, tol: float = DEFAULT_TOL) -> IntegralVerdict:
    """Classify the integral of W(f(t)) e^{nt} over (-inf, t0].

    ``W`` is one of the weight classes above (anything with a ``ratio(log_f)``
    method giving W(f)/f).
    """
    t0 = profile.anchor if t0 is None else t0

    @mp_safe
    def g(t):
        c1, c2, log_f = _log_density(profile, n, t)
        return c1 ** (n - 1) * c2 * W.ratio(log_f)

    return integrate_improper(g, t0, tol)


def condition_k_radial(profile: Profile, n: int, h: Optional[Callable] = None, t0: Optional[float] = None,
                       tol: float = DEFAULT_TOL, check: bool = True) -> IntegralVerdict:
    """Classify the integral of chi'' chi'^(n-1) |t|^n h(log|t|)^n over (-inf, min(-e, t0)]."""
    h = power_h(1.01) if h is None else h
    if check:
        check_growth(profile)
    t0 = min(-math.e, profile.anchor if t0 is None else t0)

    @mp_safe
    def g(t):
        jet = profile.eval_jet(t, 2)
        s = -t
        return jet[1] ** (n - 1) * jet[2] * s ** n * h(B.log(s)) ** n

    return integrate_improper(g, t0, tol)


# -- modulus lookup ----------------------------------------------------------------------
@dataclass(frozen=True)
class ModulusBound:
    form: str  # "Holder" | "InverseLogPower" | "InverseLogLogPower"
    exponent: float
    strict_sup: bool = False  # True: any exponent strictly below `exponent` works

    def to_dict(self):
        return {"form": self.form, "exponent": self.exponent, "strict_sup": self.strict_sup}


def modulus_from_weight(w, n: Optional[int] = None) -> ModulusBound:
    if isinstance(w, PowerEps):
        dim = w.n if n is None else n
        return ModulusBound("Holder", 2 * w.eps / (dim * (1 + w.eps) + w.eps), True)
    if isinstance(w, LogPower):
        return ModulusBound("InverseLogPower", w.eps / w.n)
    if isinstance(w, LogLogPower):
        return ModulusBound("InverseLogLogPower", w.eps / w.n)
    raise UnsupportedClass(f"no modulus lookup for {type(w).__name__}")


# -- log-log decay fits --------------------------------------------------------------------
@dataclass
class DecayFit:
    verdict: str  # "True" | "False" | "Inconclusive"
    exponent: Optional[float]
    r2: Optional[float]
    delta: Optional[float] = None
    note: str = ""

    def __bool__(self):
        return self.verdict == "True"

    def to_dict(self):
        return {"verdict": self.verdict, "exponent": self.exponent, "r2": self.r2, "delta": self.delta, "note": self.note}


def _eval_at_log(m, log_r):
    if hasattr(m, "at_log"):
        return m.at_log(log_r)
    return m(mpmath.exp(log_r))


def _fit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    A = np.vstack([x, np.ones_like(x)]).T
    (b, a), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float(((y - a - b * x) ** 2).sum())
    return b, (1 - ss_res / ss_tot) if ss_tot > 0 else 1.0


def loglog_decay_exponent(values_at_k, ks):
    """Exponent gamma in value ~ (log(-log r))^(-gamma) at -log r = e^(2^k)."""
    x = [k * math.log(2.0) for k in ks]
    y = [float(mpmath.log(v)) for v in values_at_k]
    b, r2 = _fit(x, y)
    local = [-(y[i + 1] - y[i]) / (x[i + 1] - x[i]) for i in range(len(x) - 1)]
    return -b, r2, local


def theorem_c_sufficient(m, ks=range(3, 13), margin: float = 0.05) -> DecayFit:
    """Is m(r) <= C (log(-log r))^(-(1+delta)) for some delta > 0?

    Regresses log m against log log(-log r) at r = exp(-exp(2^k)).
    """
    ks = list(ks)
    vals = []
    for k in ks:
        v = _eval_at_log(m, -mpmath.exp(mpmath.mpf(2) ** k))
        vals.append(mpmath.mpf(v))
    if any(v <= 0 for v in vals):
        if all(v >= 0 for v in vals) and vals[-1] == 0:
            return DecayFit("True", math.inf, None, math.inf, "modulus underflows: faster than any log-log power")
        return DecayFit("Inconclusive", None, None, None, "modulus is not positive on the sample")
    ys = [mpmath.log(v) for v in vals]
    if any(abs(y) > 1e300 for y in ys):
        # log m itself leaves the double range: judge by local slopes in mp
        xs = [k * mpmath.log(2) for k in ks]
        local = [-(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(ks) - 1)]
        if all(s >= 1 + margin for s in local) and all(b >= a for a, b in zip(local, local[1:])):
            return DecayFit("True", math.inf, None, math.inf, "log m leaves the double range; local exponents keep growing")
        return DecayFit("Inconclusive", None, None, None, "log m leaves the double range")
    gamma, r2, local = loglog_decay_exponent(vals, ks)
    if r2 >= 0.99:
        if gamma >= 1 + margin:
            return DecayFit("True", gamma, r2, gamma - 1)
        if gamma <= 1 - margin:
            return DecayFit("False", gamma, r2)
        return DecayFit("Inconclusive", gamma, r2, note="exponent within the margin of 1")
    if all(s >= 1 + margin for s in local) and all(b >= a * (1 - 1e-9) for a, b in zip(local, local[1:])):
        return DecayFit("True", gamma, r2, gamma - 1, "local exponents exceed 1 and keep growing")
    return DecayFit("Inconclusive", gamma, r2, note="poor log-log fit")


def _distance_to_origin_loglog(profile, v0, tol):
    """Radial distance from 0 to log-radius t = -exp(v0).

    With s = -t = exp(-w) the integrand sqrt(chi''(t)) ds becomes
    sqrt(s^2 chi''(-s)) dw, and s^2 chi'' depends on log s only.
    """

    @mp_safe
    def g(w):
        return B.sqrt(profile.scaled_derivative(2, -w))

    return integrate_improper(g, -v0, tol)


def decay_exponent_check(profile: Profile, n: int, ks=range(3, 13), tol: float = 1e-10):
    """Fit d(0, r) ~ (log(-log r))^(-gamma) for a family-3 profile and set it
    beside the ceiling (p - 2n)/2 at the Orlicz threshold p = n(1+alpha) - 1."""
    if profile.kind != "family3":
        raise ValueError("decay_exponent_check expects a family3 profile")
    alpha = profile.alpha
    if not alpha > 1:
        raise ValueError("decay_exponent_check needs alpha > 1")
    ks = list(ks)
    dists = []
    for k in ks:
        # r = exp(-exp(2^k)): the log-radius is log r^2 = -2 exp(2^k)
        v = _distance_to_origin_loglog(profile, 2.0 ** k + math.log(2.0), tol)
        if not v.convergent:
            raise GrowthAssumptionViolated(f"distance integral is {v.cls} at k={k}")
        dists.append(mpmath.mpf(v.value))
    gamma, r2, _ = loglog_decay_exponent(dists, ks)
    p_star = n * (1 + alpha) - 1
    sup = (p_star - 2 * n) / 2
    return {
        "actual": gamma,
        "expected": (alpha - 1) / 2,
        "r2": r2,
        "theoremB_sup": sup,
        "p_threshold": p_star,
        "consistent_flag": bool(gamma <= sup) if sup >= 0 else None,
    }
