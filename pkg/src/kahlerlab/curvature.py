"""Ricci eigenvalues of the smoothed radial metrics and lower-bound scans.

For v = chi(log(|z|^2 + eps^2)) put F = eps^2 e^{-t} and
psi = chi'' + (chi' - chi'') F.  The Ricci form has eigenvalues lambda
(multiplicity n-1) and mu (multiplicity 1) with respect to the same frame
in which the metric has eigenvalues chi' and psi, so Ric >= -C omega holds
at a point iff lambda + C chi' >= 0 and mu + C psi >= 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _backend as B
from .errors import DegenerateMetric, DomainError, EmptyGrid
from .geometry import RadialMetric
from .jet import Jet
from .profile import Profile

DEFAULT_C_LIST = (0.0, 1.0, 10.0, 100.0, 1000.0)
PROBE_EXPONENTS = (0.75, 1.0, 2.0, 2.5)
WITNESS_MIN_POINTS = 5
# small negative margins (relative to the weight) are rounding, not curvature
MARGIN_SLACK = 1e-9


@dataclass(frozen=True)
class RicciPoint:
    t: float
    F: float
    lambda_: float
    mu: float
    weight_spherical: float
    weight_radial: float

    @property
    def lam(self):
        return self.lambda_


def _F_jet(m, t, order):
    F = m.F(t)
    return Jet(tuple(F if k % 2 == 0 else -F for k in range(order + 1)))


def psi_jet(m: RadialMetric, t, order: int = 2) -> Jet:
    """Jet of psi = chi'' + (chi' - chi'') F; uses chi up to order + 2."""
    if not 0 <= order <= 2:
        raise ValueError("psi_jet order must be 0, 1 or 2")
    chi = m.profile.eval_jet(t, order + 2)
    d1 = chi.shift(1).truncate(order)
    d2 = chi.shift(2)
    if m.eps == 0:
        return d2
    return d2 + (d1 - d2) * _F_jet(m, t, order)


def _check_F(m, t):
    F = m.F(t)
    if F > 1 + 1e-12:
        raise DomainError(f"t={t} lies below log(eps^2)")
    return F


def ricci_point(m: RadialMetric, t) -> RicciPoint:
    F = _check_F(m, t)
    chi = m.profile.eval_jet(t, 4)
    c1, c2, c3 = chi[1], chi[2], chi[3]
    psi = psi_jet(m, t, 2)
    p0, p1, p2 = psi[0], psi[1], psi[2]
    if not (c1 > 0 and p0 > 0):
        raise DegenerateMetric(f"metric degenerates at t={t}: chi'={c1}, psi={p0}")
    n = m.n
    with np.errstate(all="ignore"):
        return _ricci_from(t, F, n, c1, c2, c3, p0, p1, p2)


def _ricci_from(t, F, n, c1, c2, c3, p0, p1, p2):
    # jets are scaled by their leading weight first so products cannot underflow;
    # a2 = (chi''' chi' - chi''^2) / chi'^2 is then a single grouped difference
    a1, s3 = c2 / c1, c3 / c1
    a2 = s3 - a1 * a1
    b1, q2 = p1 / p0, p2 / p0
    b2 = q2 - b1 * b1
    lam = n - ((n - 1) * a1 + b1)
    mu = -((n - 1) * a2 + b2) + F * (n + (n - 1) * (a2 - a1) + (b2 - b1))
    return RicciPoint(t, F, lam, mu, c1, p0)


def ricci_epsilon0(profile: Profile, n: int, t) -> RicciPoint:
    chi = profile.eval_jet(t, 4)
    c1, c2, c3, c4 = chi[1], chi[2], chi[3], chi[4]
    if not (c1 > 0 and c2 > 0):
        raise DegenerateMetric(f"metric degenerates at t={t}: chi'={c1}, chi''={c2}")
    with np.errstate(all="ignore"):
        a1, b1 = c2 / c1, c3 / c2
        lam = n - ((n - 1) * a1 + b1)
        mu = -((n - 1) * (c3 / c1 - a1 * a1) + (c4 / c2 - b1 * b1))
    return RicciPoint(t, 0.0 * c1, lam, mu, c1, c2)


def bound_margins(m: RadialMetric, t, C: float) -> Tuple[float, float]:
    """(lambda + C chi', mu + C psi); both >= 0 iff Ric >= -C omega at t."""
    p = ricci_point(m, t)
    return p.lambda_ + C * p.weight_spherical, p.mu + C * p.weight_radial


def minoration_lhs(m: RadialMetric, t, C: float):
    """F psi^2 + (1-F) psi'^2 - F psi psi' - (1-F) psi psi'' + C psi^3 (n = 1)."""
    if m.n != 1:
        raise ValueError("minoration_lhs is the n = 1 inequality")
    F = _check_F(m, t)
    psi = psi_jet(m, t, 2)
    return minoration_from_jet(psi[0], psi[1], psi[2], F, C)


def minoration_from_jet(p0, p1, p2, F, C):
    if not p0 > 0:
        raise DegenerateMetric(f"psi={p0} is not positive")
    return F * p0 * p0 + (1 - F) * p1 * p1 - F * p0 * p1 - (1 - F) * p0 * p2 + C * p0 ** 3


# -- scans ------------------------------------------------------------------------
@dataclass
class Witness:
    """Points along a probe path where the curvature deficit q = -mu/psi
    (or -lambda/chi') at least doubles from one point to the next."""

    path: str
    quantity: str  # "mu" or "lambda"
    points: List[Tuple[float, float]]  # (t, eps)
    deficits: List[float]

    def to_dict(self):
        return {"path": self.path, "quantity": self.quantity,
                "points": [list(p) for p in self.points], "deficits": list(self.deficits)}


@dataclass
class BoundScanReport:
    C_tested: List[float]
    grid: List[Tuple[float, float]]
    min_margin_lambda: List[float]
    min_margin_mu: List[float]
    verdict: str  # "UniformlyBounded" | "EvidenceUnbounded" | "NoBoundFound"
    bound_C: Optional[float] = None
    witnesses: List[Witness] = field(default_factory=list)
    message: str = ""

    def to_dict(self):
        return {
            "C_tested": list(self.C_tested),
            "grid_size": len(self.grid),
            "min_margin_lambda": list(self.min_margin_lambda),
            "min_margin_mu": list(self.min_margin_mu),
            "verdict": self.verdict,
            "bound_C": self.bound_C,
            "witnesses": [w.to_dict() for w in self.witnesses],
            "message": self.message,
        }


def doubling_chain(values: Sequence[float], factor: float = 2.0):
    """Longest subsequence of positive values with each term >= factor * previous.

    Returns the indices.  A relative slack of 1e-9 absorbs rounding on exactly
    doubling sequences.
    """
    vals = list(values)
    best_len = [0] * len(vals)
    prev = [-1] * len(vals)
    for i, v in enumerate(vals):
        if not v > 0 or not math.isfinite(v):
            continue
        best_len[i] = 1
        for j in range(i):
            if best_len[j] and v >= factor * vals[j] * (1 - 1e-9) and best_len[j] + 1 > best_len[i]:
                best_len[i] = best_len[j] + 1
                prev[i] = j
    if not any(best_len):
        return []
    i = max(range(len(vals)), key=lambda k: (best_len[k], -k))
    chain = []
    while i >= 0:
        chain.append(i)
        i = prev[i]
    return chain[::-1]


def probe_t(eps: float, a: float) -> float:
    """log-radius of the probe curve |z|^2 = eps^2 (-log eps)^a."""
    L = -math.log(eps)
    return 2 * math.log(eps) + math.log1p(L ** a)


def _deficits(points):
    q_mu = [-p.mu / p.weight_radial for p in points]
    q_lam = [-p.lambda_ / p.weight_spherical for p in points]
    return q_lam, q_mu


def _find_witness(path, pts, coords, quantity, q):
    chain = doubling_chain(q)
    # the chain must reach into the deep end of the path to count as a trend
    if len(chain) >= WITNESS_MIN_POINTS and chain[-1] >= (2 * len(q)) // 3:
        return Witness(path, quantity, [coords[i] for i in chain], [q[i] for i in chain])
    return None


def _scan_point(m, t):
    # points outside the window or where chi' underflows to 0 are skipped
    try:
        return ricci_point(m, t)
    except DomainError:
        return None
    except DegenerateMetric:
        jet = m.profile.eval_jet(t, 2)
        if jet[1] == 0 or jet[2] == 0:
            return None
        raise


def default_t_grid(profile: Profile):
    hi = profile.anchor
    return [t for t in (-(2.0 ** j) for j in range(0, 41)) if t < hi]


def scan_uniform_bound(profile: Profile, n: int, eps_grid: Sequence[float], t_grid: Optional[Sequence[float]] = None,
                       C_list: Sequence[float] = DEFAULT_C_LIST, probes: Sequence[float] = PROBE_EXPONENTS) -> BoundScanReport:
    """Test Ric(omega_eps) >= -C omega_eps over a grid and along probe paths.

    Probe paths: for eps > 0 the curves |z|^2 = eps^2(-log eps)^a, traversed
    as eps decreases; for eps = 0 the ray t -> -inf.  A witness is a run of at
    least five points where the normalized deficit -mu/psi (or -lambda/chi')
    keeps at least doubling; then mu + C psi < 0 eventually for every C.
    """
    eps_grid = sorted({float(e) for e in eps_grid}, reverse=True)
    if not eps_grid:
        raise EmptyGrid("eps grid is empty")
    if any(e < 0 for e in eps_grid):
        raise ValueError("eps values must be >= 0")
    t_grid = sorted(default_t_grid(profile) if t_grid is None else [float(t) for t in t_grid], reverse=True)
    C_list = [float(c) for c in C_list]
    if not C_list:
        raise EmptyGrid("C list is empty")

    grid_pts, grid_coords = [], []
    witnesses = []
    for eps in eps_grid:
        m = RadialMetric(profile, n, eps)
        ts = [t for t in t_grid if eps == 0 or t >= 2 * math.log(eps)]
        ray_pts, ray_coords = [], []
        for t in ts:
            p = _scan_point(m, t)
            if p is None:
                continue
            ray_pts.append(p)
            ray_coords.append((t, eps))
        grid_pts += ray_pts
        grid_coords += ray_coords
        if eps == 0 and ray_pts:
            q_lam, q_mu = _deficits(ray_pts)
            for name, q in (("mu", q_mu), ("lambda", q_lam))[: 1 if n == 1 else 2]:
                w = _find_witness("ray t->-inf, eps=0", ray_pts, ray_coords, name, q)
                if w:
                    witnesses.append(w)
    positive = [e for e in eps_grid if e > 0]
    for a in probes:
        pts, coords = [], []
        for eps in positive:
            t = probe_t(eps, a)
            p = _scan_point(RadialMetric(profile, n, eps), t)
            if p is None:
                continue
            pts.append(p)
            coords.append((t, eps))
        grid_pts += pts
        grid_coords += coords
        if pts:
            q_lam, q_mu = _deficits(pts)
            for name, q in (("mu", q_mu), ("lambda", q_lam))[: 1 if n == 1 else 2]:
                w = _find_witness(f"|z|^2=eps^2(-log eps)^{a:g}", pts, coords, name, q)
                if w:
                    witnesses.append(w)
    if not grid_pts:
        raise EmptyGrid("no grid point lies inside the profile window")

    lam = np.array([p.lambda_ for p in grid_pts])
    mu = np.array([p.mu for p in grid_pts])
    w1 = np.array([p.weight_spherical for p in grid_pts])
    w2 = np.array([p.weight_radial for p in grid_pts])
    min_l, min_m, ok = [], [], []
    for C in C_list:
        ml, mm = lam + C * w1, mu + C * w2
        min_l.append(float(ml.min()))
        min_m.append(float(mm.min()))
        lam_ok = n == 1 or bool(np.all(ml / w1 >= -MARGIN_SLACK))  # lambda has multiplicity n-1
        ok.append(lam_ok and bool(np.all(mm / w2 >= -MARGIN_SLACK)))
    if witnesses:
        verdict, bound, msg = "EvidenceUnbounded", None, f"unbounded up to C={max(C_list):g} (numerical evidence, not a proof)"
    elif any(ok):
        bound = C_list[ok.index(True)]
        verdict, msg = "UniformlyBounded", f"Ric >= -{bound:g} omega on the whole grid"
    else:
        verdict, bound, msg = "NoBoundFound", None, "every tested C fails on the grid, but no growing witness was found"
    return BoundScanReport(C_list, grid_coords, min_l, min_m, verdict, bound, witnesses, msg)
