"""Radial potential profiles chi on (-inf, 0] and their jets.

Four parametric families are built in, each with hand-derived k-th
derivatives:

* ``family1``: chi(t) = exp(alpha t)
* ``family2``: chi(t) = (-t)^(-alpha)
* ``family3``: chi(t) = (log(-t))^(-alpha)
* ``family4``: chi(t) = -(log(-t))^alpha

Anything else is a ``custom`` profile built from an expression string and
differentiated with jet arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional

import numpy as np

from . import _backend as B
from . import expr as E
from .errors import DomainError, UnboundedPotential
from .jet import MAX_ORDER, Jet

FAMILIES = ("family1", "family2", "family3", "family4")

# (t_max, closed) validity windows
_WINDOWS = {
    "family1": (0.0, True),
    "family2": (0.0, False),
    "family3": (-1.0, False),
    "family4": (-1.0, False),
}


def _log_power_coeffs(gamma, sign, order):
    """Coefficients c[k][j] with d^k/ds^k [sign*u^gamma] = s^-k sum_j c[k][j] u^(gamma-j), u = log s."""
    c = [[sign]]
    for k in range(order):
        prev = c[-1]
        nxt = [0.0] * (len(prev) + 1)
        for j, cj in enumerate(prev):
            nxt[j] += -k * cj
            nxt[j + 1] += (gamma - j) * cj
        c.append(nxt)
    return c


@dataclass(frozen=True)
class Profile:
    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    source: Optional[str] = None
    tree: Optional[E.Node] = None
    t_max: float = 0.0
    closed: bool = True

    def __post_init__(self):
        if self.kind in FAMILIES:
            alpha = self.params.get("alpha")
            if alpha is None or not alpha > 0 or not math.isfinite(alpha):
                raise ValueError(f"{self.kind} needs a finite alpha > 0, got {alpha!r}")
        elif self.kind != "custom":
            raise ValueError(f"unknown profile kind {self.kind!r}")

    # -- construction -------------------------------------------------------
    @classmethod
    def family(cls, number: int, alpha: float) -> "Profile":
        kind = f"family{number}"
        t_max, closed = _WINDOWS[kind]
        return cls(kind, {"alpha": float(alpha)}, t_max=t_max, closed=closed)

    @property
    def alpha(self):
        return self.params["alpha"]

    @property
    def unbounded_potential(self):
        """True when chi(-inf) = -inf (family 4 and custom profiles that diverge)."""
        if self.kind == "family4":
            return True
        if self.kind == "custom":
            try:
                self.limit_at_minus_infinity()
            except UnboundedPotential:
                return True
        return False

    @property
    def anchor(self):
        """Default outer log-radius T0 for integrals over (-inf, T0]."""
        if self.kind == "family1":
            return 0.0
        if self.kind == "family2":
            return -1.0
        if self.kind == "family3":
            return -math.e
        if self.kind == "family4":
            return -math.exp(max(1.0, self.alpha))
        return self.t_max if self.closed else self.t_max - 1.0

    def describe(self):
        if self.kind == "custom":
            return {"kind": "custom", "expr": self.source, "params": dict(self.params), "t_max": self.t_max}
        return {"kind": self.kind, "params": dict(self.params)}

    # -- evaluation ---------------------------------------------------------
    def _check_domain(self, t):
        if B.is_mp(t):
            bad = t > self.t_max if self.closed else t >= self.t_max
        else:
            arr = np.asarray(t, dtype=float)
            bad = np.any(arr > self.t_max) if self.closed else np.any(arr >= self.t_max)
            bad = bad or np.any(np.isnan(arr))
        if bad:
            op = "<=" if self.closed else "<"
            raise DomainError(f"{self.kind}: t must satisfy t {op} {self.t_max}")

    def eval_jet(self, t, order: int = MAX_ORDER) -> Jet:
        """Return (chi(t), chi'(t), ..., chi^(order)(t))."""
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"order must be in [0, {MAX_ORDER}]")
        self._check_domain(t)
        if isinstance(t, (list, tuple)):
            t = np.asarray(t, dtype=float)
        if self.kind == "custom":
            with np.errstate(all="ignore"):
                jet = E.eval_jet(self.tree, t, order, self.params)
            if not jet.is_finite():
                raise DomainError(f"custom profile {self.source!r} is not finite at t={t!r}")
            return jet
        with np.errstate(all="ignore"):
            return Jet(self._family_derivatives(t, order))

    def _family_derivatives(self, t, order):
        a = self.alpha
        if self.kind == "family1":
            e = B.exp(a * t)
            return tuple(a ** k * e for k in range(order + 1))
        s = -t
        if self.kind == "family2":
            out, c = [], 1.0
            for k in range(order + 1):
                out.append(c * s ** (-a - k))
                c *= a + k
            return tuple(out)
        u = B.log(s)
        gamma, sign = (-a, 1.0) if self.kind == "family3" else (a, -1.0)
        coeffs = _log_power_coeffs(gamma, sign, order)
        out = []
        for k, ck in enumerate(coeffs):
            acc = 0
            for j, cj in enumerate(ck):
                if cj:
                    acc = acc + cj * u ** (gamma - j)
            out.append((-1) ** k * acc * s ** (-k))
        return tuple(out)

    def scaled_derivative(self, k, log_s):
        """s^k chi^(k)(-s) as a function of log s (families 2-4).

        For the log-power families this is a polynomial in u = log s, so it
        stays computable where s itself is beyond any floating range.
        """
        a = self.alpha
        if self.kind == "family2":
            c = 1.0
            for j in range(k):
                c *= a + j
            return c * B.exp(-a * log_s)
        if self.kind not in ("family3", "family4"):
            raise ValueError(f"scaled_derivative is not available for {self.kind}")
        if log_s <= 0:
            raise DomainError("log(-t) must be positive")
        gamma, sign = (-a, 1.0) if self.kind == "family3" else (a, -1.0)
        acc = 0
        for j, cj in enumerate(_log_power_coeffs(gamma, sign, k)[k]):
            if cj:
                acc = acc + cj * log_s ** (gamma - j)
        return (-1) ** k * acc

    def value(self, t):
        return self.eval_jet(t, 0)[0]

    def limit_at_minus_infinity(self):
        """chi(-inf); raises UnboundedPotential when it is -inf."""
        if self.kind in ("family1", "family2", "family3"):
            return 0.0
        if self.kind == "family4":
            raise UnboundedPotential("family4 potential -(log(-t))^alpha is unbounded")
        return _extrapolate_limit(self)


def _extrapolate_limit(profile):
    # chi(-2^k) for growing k; Aitken on the tail, divergence if the tail keeps moving.
    ts = [-(2.0 ** k) for k in range(1, 1021, 4)]
    ts = [t for t in ts if t < profile.t_max]
    vals = []
    for t in ts:
        try:
            v = float(profile.value(t))
        except DomainError:
            continue
        vals.append(v)
    if len(vals) < 4 or not all(math.isfinite(v) for v in vals[-4:]):
        raise UnboundedPotential(f"custom profile {profile.source!r} has no finite limit at -inf")
    x0, x1, x2 = vals[-3:]
    span = max(abs(v) for v in vals[len(vals) // 2:]) + 1.0
    if abs(x2 - x1) > 1e-3 * span and abs(x2 - x1) >= abs(x1 - x0) * 0.999:
        raise UnboundedPotential(f"custom profile {profile.source!r} has no finite limit at -inf")
    denom = x2 - 2 * x1 + x0
    if denom != 0 and abs(x2 - x1) > 1e-15 * span:
        return x2 - (x2 - x1) ** 2 / denom
    return x2


def parse_profile(source: str, params: Optional[Mapping[str, float]] = None, t_max: float = 0.0) -> Profile:
    """Build a custom profile from an expression in t."""
    params = dict(params or {})
    tree = E.parse(source)
    E.check_bound(tree, params)
    return Profile("custom", {k: float(v) for k, v in params.items()}, source=source, tree=tree, t_max=float(t_max))


class Violation(NamedTuple):
    t: float
    quantity: str  # "chi'" or "chi''"
    value: float


def sample_grid(window, points=512):
    """Log-spaced grid in -t over [1, 1e8] intersected with ``window``."""
    t_lo, t_hi = window
    lo, hi = max(1.0, -t_hi), min(1e8, -t_lo)
    if lo > hi:  # window entirely inside (-1, 0): use it as is
        lo, hi = max(-t_hi, 1e-300), -t_lo
    return -np.geomspace(hi, lo, points)


def validate_profile(p: Profile, window, points: int = 512):
    """List every grid point where chi' <= 0 or chi'' <= 0."""
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError("window must satisfy t_lo < t_hi")
    grid = sample_grid(window, points)
    jet = p.eval_jet(grid, 2)
    out = []
    for name, vals in (("chi'", jet[1]), ("chi''", jet[2])):
        vals = np.broadcast_to(vals, grid.shape)
        for t, v in zip(grid, vals):
            if not v > 0:
                out.append(Violation(float(t), name, float(v)))
    out.sort(key=lambda v: (v.t, v.quantity))
    return out
