"""The example-threshold table: each row evaluates one claim about a family
at fixed witness parameters and compares with the stated threshold."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass
from typing import Callable, List

from .curvature import scan_uniform_bound
from .geometry import RadialMetric, RadialModulus, diameter, dini_transform
from .integrability import TheoremB, condition_k_radial, orlicz_radial
from .profile import Profile
from .quadrature import CONVERGENT, DIVERGENT, find_threshold


@dataclass
class Row:
    family: str
    claim: str
    tested: str
    computed: str
    expected: str
    passed: bool
    seconds: float = 0.0


def _cls(v):
    return v.cls


def _diam(k, a, n=1):
    return diameter(RadialMetric(Profile.family(k, a), n)).cls


def _dini(k, a):
    p = Profile.family(k, a)
    return dini_transform(RadialModulus(p), math.exp(min(p.anchor, -1.0))).cls


def family1_ricci():
    # n = 2 so that the spherical eigenvalue n(1 - alpha) is present
    out = {}
    for a in (0.5, 2.0):
        rep = scan_uniform_bound(Profile.family(1, a), 2, [0.0], C_list=[0.0])
        out[a] = rep.verdict == "UniformlyBounded" and rep.bound_C == 0.0
    computed = f"a=0.5: Ric>=0 {out[0.5]}; a=2: Ric>=0 {out[2.0]}"
    return "a in {0.5, 2}, n=2", computed, "True; False", out[0.5] and not out[2.0]


def family1_ray():
    vals = {a: diameter(RadialMetric(Profile.family(1, a))) for a in (0.5, 1.0, 3.0)}
    ok = all(v.cls == CONVERGENT and abs(v.value - 2.0) <= 1e-6 for v in vals.values())
    computed = "; ".join(f"a={a:g}: {v.value:.10f}" for a, v in vals.items())
    return "a in {0.5, 1, 3}", computed, "2 +- 1e-6", ok


def family2_dini():
    c3, c15 = _dini(2, 3.0), _dini(2, 1.5)
    return "a in {1.5, 3}", f"a=3: {c3}; a=1.5: {c15}", "Convergent; Divergent", c3 == CONVERGENT and c15 == DIVERGENT


def family2_diameter():
    cs = {a: _diam(2, a) for a in (0.5, 1.0, 3.0)}
    return "a in {0.5, 1, 3}", "; ".join(f"a={a:g}: {c}" for a, c in cs.items()), "Convergent for all", \
        all(c == CONVERGENT for c in cs.values())


def family3_diameter():
    c05, c2 = _diam(3, 0.5), _diam(3, 2.0)
    return "a in {0.5, 2}", f"a=0.5: {c05}; a=2: {c2}", "Divergent; Convergent", c05 == DIVERGENT and c2 == CONVERGENT


def family3_condition_k():
    c03 = condition_k_radial(Profile.family(3, 0.3), 2).cls
    c1 = condition_k_radial(Profile.family(3, 1.0), 2).cls
    return "n=2, a in {0.3, 1}", f"a=0.3: {c03}; a=1: {c1}", "Divergent; Convergent", c03 == DIVERGENT and c1 == CONVERGENT


def family3_theorem_b():
    n, a = 2, 1.0
    p_star = n * (1 + a) - 1
    prof = Profile.family(3, a)
    est = find_threshold(lambda p: orlicz_radial(prof, n, TheoremB(n, p)), (p_star - 1.3, p_star + 1.9),
                         tol_param=0.05, param_name="p")
    lo, hi = est.bracket
    ok = est.contains(p_star) and hi - lo <= 0.3 and est.flip == "converges-below"
    return "n=2, a=1, p in [1.7, 4.9]", f"bracket [{lo:.4f}, {hi:.4f}], {est.flip}", f"contains {p_star:g}, width <= 0.3", ok


def family4_diameter():
    c = _diam(4, 1.0)
    return "a=1", c, "Divergent", c == DIVERGENT


def family4_condition_k():
    c = condition_k_radial(Profile.family(4, 1.0), 2).cls
    return "a=1, n=2", c, "Divergent", c == DIVERGENT


def family4_theorem_b():
    prof = Profile.family(4, 0.25)
    c0 = orlicz_radial(prof, 2, TheoremB(2, 0.0)).cls
    c1 = orlicz_radial(prof, 2, TheoremB(2, 1.0)).cls
    return "n=2, a=0.25, p in {0, 1}", f"p=0: {c0}; p=1: {c1}", "Convergent; Divergent (threshold 0.5)", \
        c0 == CONVERGENT and c1 == DIVERGENT


CLAIMS: List[tuple] = [
    ("family1", "Ric >= 0 iff a <= 1", family1_ricci),
    ("family1", "ray length = 2", family1_ray),
    ("family2", "Dini transform finite iff a > 2", family2_dini),
    ("family2", "diameter finite for every a", family2_diameter),
    ("family3", "diameter finite iff a > 1", family3_diameter),
    ("family3", "Condition (K) iff a > 1/n", family3_condition_k),
    ("family3", "log-log weight threshold p = n(1+a) - 1", family3_theorem_b),
    ("family4", "diameter infinite", family4_diameter),
    ("family4", "Condition (K) fails", family4_condition_k),
    ("family4", "log-log weight converges iff p < n - 1 - n a", family4_theorem_b),
]


def run_table(claims=None) -> List[Row]:
    rows = []
    for family, claim, fn in claims or CLAIMS:
        t = time.perf_counter()
        try:
            tested, computed, expected, ok = fn()
        except Exception as e:  # a crashing row is a FAIL, not an abort
            tested, computed, expected, ok = "-", f"{type(e).__name__}: {e}", "-", False
        rows.append(Row(family, claim, tested, computed, expected, bool(ok), round(time.perf_counter() - t, 3)))
    return rows


def to_markdown(rows: List[Row]) -> str:
    lines = ["| family | claim | tested | computed | expected | result |", "|---|---|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r.family} | {r.claim} | {r.tested} | {r.computed} | {r.expected} | {'PASS' if r.passed else 'FAIL'} |")
    return "\n".join(lines) + "\n"


def to_json(rows: List[Row]) -> str:
    return json.dumps({"rows": [asdict(r) for r in rows], "all_pass": all(r.passed for r in rows)}, indent=2)
