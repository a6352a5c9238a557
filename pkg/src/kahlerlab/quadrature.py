"""Proper and improper quadrature with convergence classification.

Improper integrals over (-inf, T0] are mapped to u in [0, inf) by
``t = T0 - l*(exp(u) - 1)`` with ``l = max(1, |T0|)`` and integrated window
by window on a schedule doubling in u.  The sequence of window increments
drives the verdict:

* Cauchy stop: three consecutive increments below ``tol*(1+|S|)``.
* Ceiling: partial sums grow monotonically past ``ceiling``.
* Otherwise a straight-line fit of ``log|d_k|`` against k over the last
  windows measures the geometric rate ``r = exp(b)`` of the increments.  A
  rate indistinguishable from 1 means divergence (this is how log-type
  divergence is caught), a rate clearly below 1 gives an extrapolated
  value, anything in between is reported as Inconclusive.

Integrands tagged with :func:`mp_safe` are also evaluated at mpmath points
once ``t`` leaves the double range, so the schedule can run to u = 2^40.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from . import _backend as B
from .errors import (
    EvaluationError,
    InvalidTolerance,
    KahlerLabError,
    NonIntegrableHint,
    SameClassAtEndpoints,
)

CONVERGENT = "Convergent"
DIVERGENT = "Divergent"
INCONCLUSIVE = "Inconclusive"

DEFAULT_TOL = 1e-8
DEFAULT_CEILING = 1e12
MAX_WINDOWS = 40

# slope thresholds on log|d_k| per window (natural log units)
_B_DIVERGE = -1e-4
_B_CONVERGE = -0.02 * math.log(2.0)
_R2_MIN = 0.99
_FIT_WINDOWS = 8
# the first windows may ramp up from a near-zero start; do not trust growth there
_CEILING_MIN_WINDOWS = 5
_FLOAT_U_LIMIT = 700.0
# mp-capable integrands leave floats early (|t| ~ 1e60) so powers of t stay normal
_FLOAT_U_LIMIT_MP = 138.0

# Gauss-Kronrod 10/21 abscissae and weights (QUADPACK qk21)
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525452172,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
# full symmetric node set on [-1, 1]
_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
_KW = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
_GW = np.zeros(21)
_GW[1:10:2] = _WG
_GW[19:10:-2] = _WG


def mp_safe(f):
    """Mark ``f`` as accepting ``mpmath.mpf`` arguments."""
    f.mp_safe = True
    return f


@dataclass
class IntegralVerdict:
    cls: str
    value: Optional[float] = None
    error_estimate: float = 0.0
    diagnostics: List[Tuple[float, float]] = field(default_factory=list)
    local_exponent: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    @property
    def convergent(self):
        return self.cls == CONVERGENT

    @property
    def divergent(self):
        return self.cls == DIVERGENT

    def to_dict(self):
        return {
            "class": self.cls,
            "value": self.value,
            "error_estimate": self.error_estimate,
            "diagnostics": [list(p) for p in self.diagnostics],
            "local_exponent": self.local_exponent,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["class"],
            d.get("value"),
            d.get("error_estimate", 0.0),
            [tuple(p) for p in d.get("diagnostics", [])],
            d.get("local_exponent"),
            list(d.get("notes", [])),
        )


@dataclass
class ThresholdEstimate:
    param_name: str
    bracket: Tuple[float, float]
    flip: str  # "converges-above" | "converges-below"
    inconclusive_band: Optional[Tuple[float, float]]
    evaluations: List[Tuple[float, str]] = field(default_factory=list)

    def contains(self, x):
        # bracket ends come out of float bisection; allow rounding at the edges
        slack = 1e-12 * max(1.0, abs(self.bracket[0]), abs(self.bracket[1]))
        return self.bracket[0] - slack <= x <= self.bracket[1] + slack

    def to_dict(self):
        return {
            "param_name": self.param_name,
            "bracket": list(self.bracket),
            "flip": self.flip,
            "inconclusive_band": list(self.inconclusive_band) if self.inconclusive_band else None,
            "evaluations": [list(e) for e in self.evaluations],
        }


def _check_tol(tol):
    if not (isinstance(tol, (int, float)) and 1e-12 <= tol <= 1e-2):
        raise InvalidTolerance(f"tol must lie in [1e-12, 1e-2], got {tol!r}")


# -- Gauss-Kronrod core ---------------------------------------------------------
def _eval_vec(f, x):
    try:
        y = f(x)
        y = np.broadcast_to(np.asarray(y, dtype=float), x.shape)
    except KahlerLabError:
        raise
    except (TypeError, ValueError):
        y = np.array([float(f(float(xi))) for xi in x])
    return y


def _gk21(f, a, b, mp_map=None):
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    x = c + h * _NODES
    try:
        if mp_map is None:
            with np.errstate(all="ignore"):
                y = _eval_vec(f, x)
        else:
            y = np.array([mp_map(xi) for xi in x])
    except KahlerLabError:
        raise
    except (ArithmeticError, ValueError) as exc:
        raise EvaluationError(f"integrand failed on [{a}, {b}]: {exc}") from exc
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise EvaluationError(f"integrand is not finite at {bad!r}")
    k = h * float(np.dot(_KW, y))
    g = h * float(np.dot(_GW, y))
    return k, abs(k - g)


def gauss_kronrod(f, a, b, abs_tol, max_intervals=2000, mp_map=None):
    """Globally adaptive G10K21 on [a, b]; returns (value, error_estimate)."""
    if a == b:
        return 0.0, 0.0
    k, e = _gk21(f, a, b, mp_map)
    heap = [(-e, a, b, k)]
    total, err = k, e
    n = 1
    while err > abs_tol and n < max_intervals:
        neg_e, lo, hi, kv = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            heapq.heappush(heap, (neg_e, lo, hi, kv))
            break
        k1, e1 = _gk21(f, lo, mid, mp_map)
        k2, e2 = _gk21(f, mid, hi, mp_map)
        total += k1 + k2 - kv
        err += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, lo, mid, k1))
        heapq.heappush(heap, (-e2, mid, hi, k2))
        n += 1
    # re-add from scratch to shed accumulated rounding in the running sums
    total = math.fsum(item[3] for item in heap)
    err = math.fsum(-item[0] for item in heap)
    return total, err


# -- proper integrals -------------------------------------------------------------
def _endpoint_map(f, a, b, beta, at_left):
    """Substitution x = a + L w^(1/(1+beta)) removing a (x-a)^beta singularity."""
    if beta <= -1:
        raise NonIntegrableHint(f"endpoint exponent {beta} <= -1 is not integrable")
    gamma = 1.0 / (1.0 + beta)
    length = b - a

    def g(w):
        w = np.asarray(w, dtype=float)
        off = length * w ** gamma
        x = a + off if at_left else b - off
        with np.errstate(all="ignore"):
            jac = np.where(w > 0, length * gamma * w ** (gamma - 1.0), 0.0)
            val = np.where(w > 0, np.asarray(f(x), dtype=float) * jac, 0.0)
        return val

    return g


def _log_endpoint_map(f, a, b, at_left):
    """x = endpoint +- exp(tau); integrand in tau is f(x) exp(tau)."""
    safe = getattr(f, "mp_safe", False)

    def point(tau):
        off = B.exp(tau)
        if off == 0:
            # exp(tau) is below every representable scale; contribution is nil
            return mpmath.mpf(0)
        x = a + off if at_left else b - off
        return f(x) * off

    def g(tau):
        if isinstance(tau, mpmath.mpf):
            return point(tau)
        tau = np.asarray(tau, dtype=float)
        off = np.exp(tau)
        if np.all(off > 0) and (np.all(a + off > a) if at_left else np.all(b - off < b)):
            x = a + off if at_left else b - off
            return np.asarray(f(x), dtype=float) * off
        if not safe:
            raise EvaluationError("endpoint offset underflows; pass an mp_safe integrand")
        return np.array([float(point(mpmath.mpf(float(tv)))) for tv in np.ravel(tau)]).reshape(tau.shape)

    g.mp_safe = safe
    return g


def integrate_proper(f: Callable, a: float, b: float, tol: float = 1e-10, hints=None):
    """Integrate f over [a, b] to absolute accuracy ``tol``.

    ``hints`` maps ``"a"``/``"b"`` to an endpoint behaviour: a real exponent
    beta for f ~ |x - endpoint|^beta (must exceed -1), or ``"log"`` for a
    logarithmically integrable singularity, handled as an improper integral
    in ``log|x - endpoint|``.
    """
    _check_tol(tol)
    if not a < b:
        if a == b:
            return 0.0, 0.0
        raise ValueError("integrate_proper needs a < b")
    hints = dict(hints or {})
    for k, v in hints.items():
        if k not in ("a", "b"):
            raise ValueError(f"unknown endpoint hint {k!r}")
        if v != "log" and float(v) <= -1:
            raise NonIntegrableHint(f"endpoint exponent {v} at {k} is not integrable")
    if "a" in hints and "b" in hints:
        m = 0.5 * (a + b)
        v1, e1 = integrate_proper(f, a, m, tol / 2, {"a": hints["a"]})
        v2, e2 = integrate_proper(f, m, b, tol / 2, {"b": hints["b"]})
        return v1 + v2, e1 + e2
    for side, hint in hints.items():
        left = side == "a"
        if hint == "log":
            verdict = integrate_improper(_log_endpoint_map(f, a, b, left), math.log(b - a), tol=max(tol, 1e-11))
            if not verdict.convergent:
                raise EvaluationError(f"endpoint integral is {verdict.cls}")
            return verdict.value, verdict.error_estimate
        g = _endpoint_map(f, a, b, float(hint), left)
        return gauss_kronrod(g, 0.0, 1.0, tol)
    return gauss_kronrod(f, a, b, tol)


# -- improper integrals -----------------------------------------------------------
def default_schedule(max_windows=MAX_WINDOWS):
    return [0.0] + [2.0 ** k for k in range(max_windows + 1)]


def _window_integrand(f, t0, scale):
    def g(u):
        with np.errstate(all="ignore"):
            t = t0 - scale * np.expm1(u)
            return np.asarray(f(t), dtype=float) * (scale * np.exp(u))

    return g


def _window_integrand_mp(f, t0, scale):
    t0m, lm = mpmath.mpf(t0), mpmath.mpf(scale)

    def g(u):
        um = mpmath.mpf(u)
        t = t0m - lm * mpmath.expm1(um)
        val = f(t) * lm * mpmath.exp(um)
        return float(val)

    return g


def _linfit(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    b = float(((x - xm) * (y - ym)).sum()) / sxx
    a = ym - b * xm
    ss_tot = float(((y - ym) ** 2).sum())
    ss_res = float(((y - a - b * x) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return a, b, r2


def _geometric_tail(ks, d):
    """Fit log|d_k| = a + b k; return (b, r2, tail) with tail = sum_{j>K} d_j."""
    _, b, r2 = _linfit(ks, np.log(np.abs(d)))
    r = math.exp(b)
    tail = d[-1] * r / (1.0 - r) if r < 1 else math.inf
    return b, r2, tail


def _classify_tail(incs, errs, partial, tol, notes):
    """Regression verdict on the last window increments."""
    k_all = np.arange(len(incs))
    m = min(_FIT_WINDOWS, len(incs))
    if m < 5:
        notes.append("too few windows for a tail fit")
        return INCONCLUSIVE, None, None, None
    ks, d = k_all[-m:], np.asarray(incs[-m:])
    if np.any(d == 0) or not (np.all(d > 0) or np.all(d < 0)):
        notes.append("increments change sign or vanish in the fit range")
        return INCONCLUSIVE, None, None, None
    b, r2_log, tail = _geometric_tail(ks, d)
    exponent = b / math.log(2.0)
    if b >= _B_DIVERGE:
        if b <= 0.05:
            s = np.cumsum(incs)[-m:]
            _, _, r2 = _linfit(ks, s)
        else:
            r2 = r2_log
        if r2 >= _R2_MIN:
            notes.append(f"increments do not decay (rate {math.exp(b):.6f} per window, R2 {r2:.4f})")
            return DIVERGENT, None, None, exponent
        notes.append(f"non-decaying increments with poor fit (R2 {r2:.4f})")
        return INCONCLUSIVE, None, None, exponent
    if b > _B_CONVERGE or r2_log < _R2_MIN:
        notes.append(f"increment rate {math.exp(b):.6f} per window with R2 {r2_log:.4f} is too close to 1")
        return INCONCLUSIVE, None, None, exponent
    value = partial + tail
    # spread over shifted / shortened fit ranges
    alts = []
    for lo, hi in ((1, 0), (0, 1), (2, 0)):
        sub = slice(len(incs) - m + lo, len(incs) - hi)
        kk, dd = k_all[sub], np.asarray(incs[sub])
        if len(dd) >= 4:
            _, _, t2 = _geometric_tail(kk, dd)
            alts.append(float(np.sum(incs[: len(incs) - hi])) + t2)
    err = max([abs(v - value) for v in alts] + [0.0]) + math.fsum(errs)
    if err > tol * (1 + abs(value)):
        notes.append(f"extrapolated tail is uncertain (error {err:.3g})")
        return INCONCLUSIVE, None, None, exponent
    notes.append(f"geometric tail extrapolation, rate {math.exp(b):.6f} per window")
    return CONVERGENT, value, err, exponent


def classify_convergence(f: Callable, t0: float, schedule: Optional[Sequence[float]] = None,
                         tol: float = DEFAULT_TOL, ceiling: float = DEFAULT_CEILING) -> IntegralVerdict:
    """Classify the integral of ``f`` over (-inf, t0] on a caller-supplied u-schedule."""
    _check_tol(tol)
    bounds = list(schedule) if schedule is not None else default_schedule()
    if len(bounds) < 2 or any(b <= a for a, b in zip(bounds, bounds[1:])) or bounds[0] < 0:
        raise ValueError("schedule must be increasing and start at u >= 0")
    scale = max(1.0, abs(t0))
    log_scale = math.log(scale)
    g_float = _window_integrand(f, t0, scale)
    g_mp = _window_integrand_mp(f, t0, scale) if getattr(f, "mp_safe", False) else None
    u_limit = _FLOAT_U_LIMIT if g_mp is None else _FLOAT_U_LIMIT_MP

    incs: List[float] = []
    errs: List[float] = []
    diag: List[Tuple[float, float]] = []
    notes: List[str] = []
    partial = 0.0
    small_run = 0
    for lo, hi in zip(bounds, bounds[1:]):
        w_tol = 0.01 * tol * (1.0 + abs(partial))
        try:
            if log_scale + hi < u_limit:
                try:
                    d, e = gauss_kronrod(g_float, lo, hi, w_tol)
                except EvaluationError:
                    # e.g. 0 * inf from factors leaving the double range separately
                    if g_mp is None:
                        raise
                    d, e = gauss_kronrod(None, lo, hi, w_tol, mp_map=g_mp)
            elif g_mp is not None:
                d, e = gauss_kronrod(None, lo, hi, w_tol, mp_map=g_mp)
            else:
                notes.append(f"schedule truncated at u={lo:g}: integrand only accepts floats")
                break
        except (EvaluationError, OverflowError):
            # an integrand leaving the double range after sustained growth is divergence
            if len(incs) >= 3 and abs(partial) > ceiling and _sustained_growth(incs, partial):
                notes.append(f"integrand overflows on [{lo:g}, {hi:g}] after sustained growth")
                return IntegralVerdict(DIVERGENT, None, 0.0, diag, _rate_exponent(incs), notes)
            raise
        incs.append(d)
        errs.append(e)
        partial += d
        diag.append((hi, partial))
        k = len(incs)
        # ceiling test: growth past the ceiling that is not slowing down
        if abs(partial) > ceiling and k >= _CEILING_MIN_WINDOWS and _sustained_growth(incs, partial):
            notes.append(f"partial sums exceed ceiling {ceiling:g}")
            exponent = _rate_exponent(incs)
            return IntegralVerdict(DIVERGENT, None, 0.0, diag, exponent, notes)
        # Cauchy test
        if abs(d) < tol * (1.0 + abs(partial)) and (k < 2 or abs(d) <= abs(incs[-2]) * (1 + 1e-9) + 1e-300):
            small_run += 1
        else:
            small_run = 0
        if small_run >= 3 and k >= 5:
            prev = incs[-2]
            tail = 0.0
            if prev != 0 and 0 < d / prev < 1:
                r = d / prev
                tail = d * r / (1.0 - r)
            value = partial + tail
            err = abs(d) + abs(tail) + math.fsum(errs)
            if err <= tol * (1.0 + abs(value)):
                notes.append(f"Cauchy criterion met after {k} windows")
                return IntegralVerdict(CONVERGENT, value, err, diag, _rate_exponent(incs), notes)
    cls, value, err, exponent = _classify_tail(incs, errs, partial, tol, notes)
    return IntegralVerdict(cls, value, err if err is not None else math.fsum(errs), diag, exponent, notes)


def _sustained_growth(incs, partial):
    """Last three increments share the sign of the sum, grow in size, and
    their log-differences do not shrink (no sign of an approaching peak)."""
    last = incs[-3:]
    if not all(x * partial > 0 for x in last):
        return False
    a, b, c = (math.log(abs(x)) for x in last)
    return b >= a and c - b >= (b - a) * (1 - 1e-2) - 1e-12


def _rate_exponent(incs):
    d = np.abs(np.asarray(incs[-min(_FIT_WINDOWS, len(incs)):]))
    if len(d) < 3 or np.any(d == 0):
        return None
    _, b, _ = _linfit(np.arange(len(d)), np.log(d))
    return b / math.log(2.0)


def integrate_improper(f: Callable, t0: float, tol: float = DEFAULT_TOL,
                       ceiling: float = DEFAULT_CEILING) -> IntegralVerdict:
    """Classify and, when convergent, evaluate the integral of f over (-inf, t0]."""
    return classify_convergence(f, t0, None, tol, ceiling)


# -- threshold search ---------------------------------------------------------------
def find_threshold(family: Callable, bracket: Sequence[float], tol_param: float = 0.01,
                   param_name: str = "alpha", t0: Optional[float] = None,
                   tol: float = DEFAULT_TOL, max_evals: int = 60) -> ThresholdEstimate:
    """Bisect for the parameter at which the convergence class flips.

    ``family(p)`` returns either an :class:`IntegralVerdict` or an integrand,
    which is then classified over (-inf, t0].  Inconclusive outcomes are
    kept as a band; both of its edges are narrowed to ``tol_param``.
    """
    cache = {}

    def cls_at(p):
        if p not in cache:
            out = family(p)
            if not isinstance(out, IntegralVerdict):
                if t0 is None:
                    raise ValueError("t0 is required when family returns integrands")
                out = integrate_improper(out, t0, tol)
            cache[p] = out.cls
        return cache[p]

    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")
    c_lo, c_hi = cls_at(lo), cls_at(hi)
    if INCONCLUSIVE in (c_lo, c_hi) or c_lo == c_hi:
        raise SameClassAtEndpoints(f"classes at the bracket ends are {c_lo} and {c_hi}")
    flip = "converges-above" if c_hi == CONVERGENT else "converges-below"
    band = []

    # plain bisection until an Inconclusive point shows up
    while hi - lo > tol_param and len(cache) < max_evals:
        mid = 0.5 * (lo + hi)
        c = cls_at(mid)
        if c == c_lo:
            lo = mid
        elif c == c_hi:
            hi = mid
        else:
            band.append(mid)
            break
    if band:
        # left edge: definite c_lo versus anything else
        a, b = lo, band[0]
        while b - a > tol_param and len(cache) < max_evals:
            mid = 0.5 * (a + b)
            c = cls_at(mid)
            if c == c_lo:
                a = mid
            else:
                b = mid
                if c == INCONCLUSIVE:
                    band.append(mid)
        lo = a
        a, b = band[0], hi
        while b - a > tol_param and len(cache) < max_evals:
            mid = 0.5 * (a + b)
            c = cls_at(mid)
            if c == c_hi:
                b = mid
            else:
                a = mid
                if c == INCONCLUSIVE:
                    band.append(mid)
        hi = b
    evaluations = sorted(cache.items())
    inc = [p for p, c in evaluations if c == INCONCLUSIVE and lo <= p <= hi]
    band_out = (min(inc), max(inc)) if inc else None
    return ThresholdEstimate(param_name, (lo, hi), flip, band_out, evaluations)
