"""Brute-force cross-checks that share no formulas with the main modules.

* ``fd_metric`` / ``fd_ricci``: central differences of the potential
  v(z) = chi(log(|z|^2 + eps^2)) in high precision, using only values of chi.
* ``AnnulusMesh`` / ``graph_geodesic``: Dijkstra on a log-polar grid.
* ``quad_reference``: closed-form values of the integrals the quadrature
  module is asked to compute.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict

import mpmath
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import _backend as B
from .errors import DisconnectedMesh, DomainError, IllConditioned, UnknownCase
from .geometry import RadialMetric
from .quadrature import mp_safe

FD_DPS = 50


# -- finite-difference metric ------------------------------------------------------------
def _potential(m: RadialMetric):
    eps2 = mpmath.mpf(m.eps) ** 2

    def v(x):
        # x: real coordinates (x_1, y_1, ..., x_n, y_n)
        rho = sum(xi * xi for xi in x) + eps2
        if rho <= 0:
            raise DomainError("potential is singular at the origin")
        return m.profile.eval_jet(mpmath.log(rho), 0)[0]

    return v


def _complex_hessian(v, x0, h, dim):
    """(d^2 v / dz_i dzbar_j) from second-order central differences."""
    f0 = v(x0)
    cache = {}

    def at(offsets):
        key = tuple(sorted(offsets.items()))
        if key not in cache:
            x = list(x0)
            for i, k in offsets.items():
                x[i] += k * h
            cache[key] = v(x)
        return cache[key]

    D = [[mpmath.mpf(0)] * (2 * dim) for _ in range(2 * dim)]
    for a in range(2 * dim):
        D[a][a] = (at({a: 1}) - 2 * f0 + at({a: -1})) / h ** 2
        for b in range(a + 1, 2 * dim):
            D[a][b] = D[b][a] = (at({a: 1, b: 1}) - at({a: 1, b: -1}) - at({a: -1, b: 1}) + at({a: -1, b: -1})) / (4 * h ** 2)
    H = mpmath.matrix(dim, dim)
    for i in range(dim):
        xi, yi = 2 * i, 2 * i + 1
        for j in range(dim):
            xj, yj = 2 * j, 2 * j + 1
            re = D[xi][xj] + D[yi][yj]
            im = D[xi][yj] - D[yi][xj]
            H[i, j] = mpmath.mpc(re, im) / 4
    return H


def _real_coords(z):
    out = []
    for c in z:
        out += [mpmath.mpf(float(c.real)), mpmath.mpf(float(c.imag))]
    return out


def _to_numpy(H):
    return np.array([[complex(H[i, j]) for j in range(H.cols)] for i in range(H.rows)])


def fd_metric(m: RadialMetric, z, h: float = 1e-3, richardson: bool = True) -> np.ndarray:
    """Complex Hessian of the potential by central differences (O(h^2), or
    O(h^4) after one Richardson step with h/2)."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.shape != (m.n,):
        raise ValueError(f"point must have {m.n} complex coordinates")
    if m.eps == 0 and float(np.linalg.norm(z)) <= 2 * h:
        raise DomainError("stencil reaches the singular origin")
    with mpmath.workdps(FD_DPS):
        v = _potential(m)
        x0 = _real_coords(z)
        hm = mpmath.mpf(h)
        H1 = _complex_hessian(v, x0, hm, m.n)
        if not richardson:
            return _to_numpy(H1)
        H2 = _complex_hessian(v, x0, hm / 2, m.n)
        return _to_numpy((4 * H2 - H1) / 3)


def _logdet_fd_metric(v, x, h, dim):
    H = _complex_hessian(v, x, h, dim)
    d = mpmath.det(H)
    scale = max(abs(H[i, j]) for i in range(dim) for j in range(dim))
    if scale == 0 or abs(d) <= mpmath.mpf(10) ** -300 or abs(d) / scale ** dim < mpmath.mpf(10) ** -20:
        raise IllConditioned(f"det of the finite-difference metric is {mpmath.nstr(abs(d), 3)} (scale {mpmath.nstr(scale, 3)})")
    return mpmath.log(mpmath.re(d))


def fd_ricci(m: RadialMetric, z, h: float = 1e-3):
    """(lambda_hat, mu_hat) from -ddbar log det of the finite-difference metric.

    By unitary invariance the point is moved to (|z|, 0, ..., 0); the outer
    Hessian is taken in the first two complex directions only (one radial,
    one orthogonal) and multiplied by |z|^2 + eps^2.  Richardson on h, h/2.
    """
    z = np.asarray(z, dtype=complex).reshape(-1)
    r = float(np.linalg.norm(z))
    if m.eps == 0 and r <= 4 * h:
        raise DomainError("stencil reaches the singular origin")
    dim = m.n
    with mpmath.workdps(FD_DPS):
        v = _potential(m)
        hin = mpmath.mpf(h) / 100  # inner metric step, far below the outer one

        def run(hout):
            def logdet(x2):
                # x2: real coords of the 2-dim slice (x1, y1, x2, y2); pad to dim
                x = list(x2[: 2 * dim]) + [mpmath.mpf(0)] * max(0, 2 * dim - len(x2))
                return _logdet_fd_metric(v, x, hin, dim)

            slice_dim = min(dim, 2)
            x0 = [mpmath.mpf(r)] + [mpmath.mpf(0)] * (2 * slice_dim - 1)
            return _complex_hessian(logdet, x0, hout, slice_dim)

        # det H must be resolved at the centre: a value that moves by half
        # when the inner step halves is truncation noise, not a determinant
        xc = [mpmath.mpf(r)] + [mpmath.mpf(0)] * (2 * dim - 1)
        d1 = mpmath.re(mpmath.det(_complex_hessian(v, xc, hin, dim)))
        d2 = mpmath.re(mpmath.det(_complex_hessian(v, xc, hin / 2, dim)))
        if not (d2 > 0 and abs(d1 - d2) < abs(d2) / 2):
            raise IllConditioned(f"det of the metric is not resolved at the point ({mpmath.nstr(d1, 3)} vs {mpmath.nstr(d2, 3)})")
        hm = mpmath.mpf(h)
        R = (4 * run(hm / 2) - run(hm)) / 3
        rho = mpmath.mpf(r) ** 2 + mpmath.mpf(m.eps) ** 2
        mu_hat = float(mpmath.re(-R[0, 0] * rho))
        lam_hat = float(mpmath.re(-R[1, 1] * rho)) if dim >= 2 else math.nan
    return lam_hat, mu_hat


# -- mesh geodesics ----------------------------------------------------------------------
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_PANEL = 0.05  # max panel width in sigma for the composite rule


class AnnulusMesh:
    """Log-polar grid on r_in <= r <= r_out for the 2-dim slice of a radial metric.

    In (sigma, theta) = (log r, angle) the slice metric is
    4 (chi'' dsigma^2 + w dtheta^2) evaluated at t = 2 sigma, with w = chi''
    for n = 1 (the circle lies in the complex line of the point) and w = chi'
    for n >= 2 (the real-plane slice through two coordinate axes).
    Edge weights integrate the metric length of each straight (sigma, theta)
    segment with composite 10-point Gauss-Legendre, accurate to rounding, so
    every graph path is the length of a real curve: graph distances bound the
    true distance from above and can only shrink under refinement.
    """

    def __init__(self, metric: RadialMetric, r_in: float, r_out: float, refinement: int = 0, base: int = 8):
        if metric.eps != 0:
            raise ValueError("AnnulusMesh supports eps = 0")
        if not 0 < r_in < r_out:
            raise ValueError("need 0 < r_in < r_out")
        self.metric = metric
        self.r_in, self.r_out = float(r_in), float(r_out)
        self.refinement = int(refinement)
        self.n_sigma = base * 2 ** self.refinement
        self.n_theta = base * 2 ** self.refinement
        self.sigma = np.linspace(math.log(r_in), math.log(r_out), self.n_sigma + 1)
        self.theta = np.linspace(0.0, 2 * math.pi, self.n_theta, endpoint=False)
        self._build()

    def _weights(self, s):
        jet = self.metric.profile.eval_jet(2 * s, 2)
        c1, c2 = np.asarray(jet[1], float), np.asarray(jet[2], float)
        return c2, (c2 if self.metric.n == 1 else c1)

    def node(self, i_sigma, i_theta):
        return i_sigma * self.n_theta + (i_theta % self.n_theta)

    def _segment_lengths(self, s0, ds, dth):
        # straight segment s0 + tau*ds with theta advancing by dth, tau in [0, 1]
        panels = max(1, math.ceil(abs(ds) / _PANEL), math.ceil(abs(dth) / _PANEL))
        edges = (np.arange(panels) + 0.5 * (_GL_X[:, None] + 1)) / panels  # (nodes, panels)
        tau = edges.reshape(-1)
        w = np.repeat(_GL_W, panels) / (2 * panels)
        a, b = self._weights(s0[:, None] + tau[None, :] * ds)
        speed = 2 * np.sqrt(a * ds ** 2 + b * dth ** 2)
        return (speed * w[None, :]).sum(axis=1)

    def _build(self):
        ns, nt = self.n_sigma + 1, self.n_theta
        dsig = self.sigma[1] - self.sigma[0]
        dth = 2 * math.pi / nt
        rows, cols, vals = [], [], []
        I, J = np.meshgrid(np.arange(ns), np.arange(nt), indexing="ij")
        for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
            ok = I + di < ns
            i0, j0 = I[ok], J[ok]
            i1, j1 = i0 + di, (j0 + dj) % nt
            w = self._segment_lengths(self.sigma[i0], di * dsig, dj * dth)
            if not np.all(w > 0):
                raise DomainError("non-positive edge weight: metric degenerates on the annulus")
            rows.append(i0 * nt + j0)
            cols.append(i1 * nt + j1)
            vals.append(w)
        r, c, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        size = ns * nt
        self.graph = coo_matrix((np.concatenate([w, w]), (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(size, size)).tocsr()

    def locate(self, point):
        """Node index of a (r, theta) pair that lies on the grid."""
        r, th = point
        i = int(round((math.log(r) - self.sigma[0]) / (self.sigma[1] - self.sigma[0])))
        j = int(round((th % (2 * math.pi)) / (2 * math.pi / self.n_theta))) % self.n_theta
        if not 0 <= i <= self.n_sigma or abs(self.sigma[i] - math.log(r)) > 1e-9 * max(1.0, abs(math.log(r))):
            raise ValueError(f"radius {r} is not a mesh node")
        if abs(((th - self.theta[j] + math.pi) % (2 * math.pi)) - math.pi) > 1e-9:
            raise ValueError(f"angle {th} is not a mesh node")
        return self.node(i, j)


def graph_geodesic(mesh: AnnulusMesh, x, y) -> float:
    """Shortest-path length between mesh nodes given as (r, theta) pairs."""
    a, b = mesh.locate(x), mesh.locate(y)
    if a == b:
        return 0.0
    d = dijkstra(mesh.graph, directed=False, indices=a)[b]
    if not math.isfinite(d):
        raise DisconnectedMesh("no path between the two nodes")
    return float(d)


# -- closed-form references --------------------------------------------------------------
@dataclass(frozen=True)
class ReferenceCase:
    description: str
    value: Callable  # params -> mpf, closed form
    integrand: Callable  # params -> dict(kind=..., f=..., bounds)
    defaults: Dict[str, float]


def _family1_ray(alpha):
    @mp_safe
    def f(t):
        return alpha * B.exp(alpha * t / 2)

    return {"kind": "improper", "f": f, "t0": 0.0}


def _dini_of_power(alpha, r):
    @mp_safe
    def f(tau):
        return B.exp(alpha * tau / 2)

    return {"kind": "improper", "f": f, "t0": math.log(r)}


def _family3_tail(alpha, T):
    @mp_safe
    def f(t):
        return 1 / (abs(t) * B.log(-t) ** ((1 + alpha) / 2))

    return {"kind": "improper", "f": f, "t0": T}


def _log_power(q, b):
    @mp_safe
    def f(t):
        return 1 / (t * (-B.log(t)) ** q)

    return {"kind": "proper", "f": f, "a": 0.0, "b": b, "hints": {"a": "log"}}


def _family2_ray(alpha):
    c = math.sqrt(alpha * (alpha + 1))

    @mp_safe
    def f(t):
        return c * (-t) ** (-(alpha + 2) / 2)

    return {"kind": "improper", "f": f, "t0": -1.0}


def _linear(a, b):
    return {"kind": "proper", "f": lambda t: t, "a": a, "b": b, "hints": None}


REGISTRY: Dict[str, ReferenceCase] = {
    "family1_ray": ReferenceCase(
        "int_{-inf}^0 alpha e^{alpha t/2} dt = [2 e^{alpha t/2}] = 2",
        lambda alpha: mpmath.mpf(2), _family1_ray, {"alpha": 3.0}),
    "dini_of_power": ReferenceCase(
        "int_0^r s^{alpha/2 - 1} ds = 2 r^{alpha/2} / alpha",
        lambda alpha, r: 2 * mpmath.mpf(r) ** (mpmath.mpf(alpha) / 2) / alpha, _dini_of_power, {"alpha": 1.0, "r": 1.0 - 1e-16}),
    "family3_tail": ReferenceCase(
        "int_{-inf}^T dt / (|t| log(-t)^{(1+alpha)/2}) = (2/(alpha-1)) log(-T)^{-(alpha-1)/2}",
        lambda alpha, T: 2 / (mpmath.mpf(alpha) - 1) * mpmath.log(-mpmath.mpf(T)) ** (-(mpmath.mpf(alpha) - 1) / 2),
        _family3_tail, {"alpha": 3.0, "T": -math.exp(10)}),
    "log_power": ReferenceCase(
        "int_0^b dt / (t (-log t)^q) = (-log b)^{1-q} / (q-1)",
        lambda q, b: (-mpmath.log(b)) ** (1 - mpmath.mpf(q)) / (mpmath.mpf(q) - 1), _log_power, {"q": 1.5, "b": math.exp(-1)}),
    "family2_ray": ReferenceCase(
        "int_{-inf}^{-1} sqrt(alpha(alpha+1)) (-t)^{-(alpha+2)/2} dt = 2 sqrt(alpha(alpha+1)) / alpha",
        lambda alpha: 2 * mpmath.sqrt(mpmath.mpf(alpha) * (alpha + 1)) / alpha, _family2_ray, {"alpha": 1.0}),
    "linear": ReferenceCase(
        "int_a^b t dt = (b^2 - a^2)/2",
        lambda a, b: (mpmath.mpf(b) ** 2 - mpmath.mpf(a) ** 2) / 2, _linear, {"a": 0.0, "b": 1.0}),
}


def quad_reference(case_id: str, **params) -> float:
    """Closed-form value of a registered integral, evaluated at 50 digits."""
    if case_id not in REGISTRY:
        raise UnknownCase(case_id)
    case = REGISTRY[case_id]
    args = {**case.defaults, **params}
    with mpmath.workdps(50):
        return float(case.value(**args))


def reference_integrand(case_id: str, **params):
    if case_id not in REGISTRY:
        raise UnknownCase(case_id)
    case = REGISTRY[case_id]
    return case.integrand(**{**case.defaults, **params})
