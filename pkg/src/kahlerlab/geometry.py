"""Metric-level quantities of a radial Kähler potential v = chi(log(|z|^2 + eps^2)).

Length convention: a tangent vector zeta has squared length ``4 zeta* H zeta``
where ``H = (d^2 v / dz_i dzbar_j)``.  With it the radial ray from 0 to r
has length ``int sqrt(chi''(s)) ds`` over s = log|z|^2, the formula used for
every distance below.  Under this convention the flat metric v = |z|^2
measures euclidean lengths times 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np

from . import _backend as B
from .errors import DivergentDistance, DomainError, UnboundedPotential
from .profile import Profile, sample_grid, validate_profile
from .quadrature import DEFAULT_TOL, IntegralVerdict, integrate_improper, integrate_proper, mp_safe


def _convexity_violations(profile, window, points=128):
    """validate_profile, minus exact zeros that are double underflow: zeros
    confined to the far-left tail whose nearest positive neighbour is < 1e-200."""
    bad = validate_profile(profile, window, points)
    if not bad:
        return bad
    grid = sample_grid(window, points)  # increasing t
    jet = profile.eval_jet(grid, 2)
    keep = []
    for k, name in ((1, "chi'"), (2, "chi''")):
        vals = np.broadcast_to(np.asarray(jet[k], dtype=float), grid.shape)
        mine = [v for v in bad if v.quantity == name]
        pos = np.nonzero(vals > 0)[0]
        if mine and len(pos) and all(v.value == 0.0 for v in mine):
            first = pos[0]
            if np.all(vals[first:] > 0) and vals[first] < 1e-200:
                continue  # underflowed tail
        keep += mine
    return keep


@dataclass(frozen=True)
class RadialMetric:
    profile: Profile
    n: int = 1
    eps: float = 0.0
    validate: bool = field(default=True, compare=False, repr=False)  # off only for synthetic oracle inputs

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"complex dimension must be a positive integer, got {self.n!r}")
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be finite and >= 0, got {self.eps!r}")
        if self.validate and self.profile.kind == "custom":
            hi = self.profile.t_max if self.profile.closed else self.profile.t_max - 1e-9
            bad = _convexity_violations(self.profile, (min(-1e8, hi - 1.0), hi))
            if bad:
                v = bad[0]
                raise DomainError(f"profile is not convex increasing: {v.quantity}={v.value:g} at t={v.t:g}")

    def with_eps(self, eps):
        return RadialMetric(self.profile, self.n, eps, self.validate)

    def F(self, t):
        """eps^2 e^{-t}; lies in [0, 1] wherever t = log(|z|^2 + eps^2)."""
        if self.eps == 0:
            return B.zeros_like(t)
        return B.exp(2 * math.log(self.eps) - t)


@dataclass(frozen=True)
class MetricEigenvalues:
    spherical: float
    radial: float
    t: float
    F: float


def _require_flat_eps(m, what):
    if m.eps != 0:
        raise ValueError(f"{what} is defined for eps = 0 only")


def metric_matrix(m: RadialMetric, z) -> np.ndarray:
    """Complex Hessian H[i][j] = d^2 v / dz_i dzbar_j at z (hermitian, n x n)."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.shape != (m.n,):
        raise ValueError(f"point must have {m.n} complex coordinates")
    rho = float(np.vdot(z, z).real) + m.eps ** 2
    if rho <= 0:
        raise DomainError("metric is singular at the origin when eps = 0")
    jet = m.profile.eval_jet(math.log(rho), 2)
    c1, c2 = float(jet[1]), float(jet[2])
    return (c1 * np.eye(m.n) + (c2 - c1) * np.outer(z.conj(), z) / rho) / rho


def metric_eigenvalues(m: RadialMetric, t: float) -> MetricEigenvalues:
    F = float(m.F(t))
    if F > 1 + 1e-12:
        raise DomainError(f"t={t} is below log(eps^2); no point has this log-radius")
    jet = m.profile.eval_jet(t, 2)
    c1, c2 = float(jet[1]), float(jet[2])
    e = math.exp(-t)
    return MetricEigenvalues(c1 * e, (c2 + (c1 - c2) * F) * e, t, F)


def ma_density(m: RadialMetric, t: float) -> float:
    """chi'^(n-1) chi'' e^{-nt}, the Monge-Ampère density with c_n = 1."""
    _require_flat_eps(m, "ma_density")
    jet = m.profile.eval_jet(t, 2)
    c1, c2 = float(jet[1]), float(jet[2])
    if c1 <= 0 or c2 <= 0:
        return 0.0
    return math.exp((m.n - 1) * math.log(c1) + math.log(c2) - m.n * t)


def sqrt_chi2(profile: Profile):
    """sqrt(chi''), the radial length density per unit of log|z|^2."""

    @mp_safe
    def f(t):
        return B.sqrt(profile.eval_jet(t, 2)[2])

    return f


def radial_distance(m: RadialMetric, r1: float, r2: float, tol: float = 1e-10) -> float:
    """Length of the radial segment r1 <= |z| <= r2 (r1 may be 0)."""
    _require_flat_eps(m, "radial_distance")
    r1, r2 = sorted((float(r1), float(r2)))
    if r1 < 0:
        raise ValueError("radii must be >= 0")
    if r1 == r2:
        return 0.0
    f = sqrt_chi2(m.profile)
    s2 = 2 * math.log(r2)
    m.profile.eval_jet(s2, 0)  # domain check at the outer end
    if r1 == 0:
        verdict = integrate_improper(f, s2, tol)
        if not verdict.convergent:
            raise DivergentDistance(verdict)
        return verdict.value
    value, _ = integrate_proper(f, 2 * math.log(r1), s2, tol)
    return value


def _angle_data(x, y):
    """Great-circle angle theta between x/|x| and y/|y| and the Hopf share beta."""
    xh, yh = x / np.linalg.norm(x), y / np.linalg.norm(y)
    inner = np.vdot(xh, yh)  # <x, y> = sum conj(x) y
    # atan2 form keeps full precision near 0 and pi, where acos does not
    theta = 2 * math.atan2(float(np.linalg.norm(xh - yh)), float(np.linalg.norm(xh + yh)))
    s = math.sin(theta)
    beta = 0.0 if s < 1e-15 else max(-1.0, min(1.0, -inner.imag / s))
    return theta, beta


def path_distance_upper(m: RadialMetric, x, y, r_window: float = 1.0, grid: int = 64, tol: float = 1e-10) -> float:
    """Length of the best radial-spherical-radial path from x to y.

    The spherical leg is the great circle through radius R; its speed mixes
    the spherical eigenvalue chi' and, for the part along the complex line of
    the point, chi''.  R ranges over a log grid in [max(|x|, |y|), r_window],
    with r_window capped at the profile's anchor radius exp(T0/2).
    This is an upper bound on the distance, not the distance itself.
    """
    _require_flat_eps(m, "path_distance_upper")
    x = np.asarray(x, dtype=complex).reshape(-1)
    y = np.asarray(y, dtype=complex).reshape(-1)
    rx, ry = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    if rx == 0 or ry == 0:
        raise DomainError("path_distance_upper needs points away from the origin")
    if np.allclose(x, y, rtol=0, atol=1e-300):
        return 0.0
    theta, beta = _angle_data(x, y)
    r_lo = max(rx, ry)
    r_window = min(r_window, math.exp(m.profile.anchor / 2))
    if theta < 1e-12:
        return radial_distance(m, rx, ry, tol)
    radii = [r_lo] if r_window <= r_lo else list(np.geomspace(r_lo, r_window, grid))
    dx = radial_distance(m, rx, r_lo, tol) if rx != r_lo else 0.0
    dy = radial_distance(m, ry, r_lo, tol) if ry != r_lo else 0.0
    best = math.inf
    prev_R, extra = r_lo, 0.0
    for R in radii:
        if R != prev_R:
            extra += radial_distance(m, prev_R, R, tol)
            prev_R = R
        jet = m.profile.eval_jet(2 * math.log(R), 2)
        speed = 2 * math.sqrt(float(jet[1]) * (1 - beta ** 2) + float(jet[2]) * beta ** 2)
        best = min(best, dx + dy + 2 * extra + theta * speed)
    return best


def diameter(m: RadialMetric, t0: Optional[float] = None, tol: float = DEFAULT_TOL) -> IntegralVerdict:
    """Ray length from the singular point out to log-radius t0; finite diameter iff Convergent."""
    _require_flat_eps(m, "diameter")
    t0 = m.profile.anchor if t0 is None else t0
    return integrate_improper(sqrt_chi2(m.profile), t0, tol)


class RadialModulus:
    """m(r) = chi(c log r) - chi(-inf); c = 1 (default) or 2 for the log r^2 convention."""

    def __init__(self, profile: Profile, convention: str = "log"):
        if convention not in ("log", "log2"):
            raise ValueError("convention must be 'log' or 'log2'")
        self.profile = profile
        self.convention = convention
        self.factor = 1 if convention == "log" else 2
        self.offset = profile.limit_at_minus_infinity()  # raises UnboundedPotential

    def at_log(self, log_r):
        """m evaluated at r = exp(log_r); accepts mpmath values for tiny r."""
        return self.profile.eval_jet(self.factor * log_r, 0)[0] - self.offset

    def __call__(self, r):
        if B.is_mp(r):
            return self.at_log(mpmath.log(r))
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0) or np.any(r >= 1):
            raise DomainError("modulus is defined for 0 < r < 1")
        with np.errstate(divide="ignore"):
            out = self.at_log(np.log(r))
        return float(out) if np.ndim(out) == 0 else out

    def __repr__(self):
        return f"RadialModulus({self.profile.describe()}, {self.convention!r})"


def modulus(m: RadialMetric, r, convention: str = "log"):
    _require_flat_eps(m, "modulus")
    if m.profile.unbounded_potential:
        raise UnboundedPotential("the potential is unbounded; no modulus of continuity")
    return RadialModulus(m.profile, convention)(r)


def dini_transform(mod, r: float, tol: float = DEFAULT_TOL) -> IntegralVerdict:
    """Classify m1(r) = int_0^r sqrt(m(s))/s ds, computed as an integral in log s."""
    if not 0 < r < 1:
        raise DomainError("dini_transform needs 0 < r < 1")
    if hasattr(mod, "at_log"):

        @mp_safe
        def g(tau):
            v = mod.at_log(tau)
            return B.sqrt(v) if B.is_mp(v) else np.sqrt(np.maximum(v, 0.0))

    else:

        def g(tau):
            return np.sqrt(np.maximum(np.asarray(mod(np.exp(tau)), dtype=float), 0.0))

    return integrate_improper(g, math.log(r), tol)
