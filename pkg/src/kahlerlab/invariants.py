"""Property suites run by ``kahlerlab verify``.

Each check is a function that raises AssertionError on failure.  ``fast``
checks run at both levels; ``full`` adds the slow oracle suites (Richardson
order, mesh convergence, threshold brackets, sweep determinism).
"""
from __future__ import annotations

import math
import time
import traceback
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Callable, List

import mpmath
import numpy as np

from . import expr as E
from .curvature import bound_margins, minoration_lhs, psi_jet, ricci_epsilon0, ricci_point
from .geometry import (RadialMetric, RadialModulus, diameter, metric_eigenvalues, metric_matrix,
                       path_distance_upper, radial_distance)
from .integrability import (LogLogPower, LogPower, PowerEps, TheoremB, condition_k_radial, modulus_from_weight,
                            orlicz_radial, power_h, theorem_c_sufficient)
from .errors import DegenerateMetric, UnsupportedClass
from .oracle import REGISTRY, AnnulusMesh, fd_metric, fd_ricci, graph_geodesic, quad_reference, reference_integrand
from .profile import Profile, parse_profile
from .quadrature import CONVERGENT, DIVERGENT, find_threshold, integrate_improper, integrate_proper

SEED = 20240607


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    level: str
    fn: Callable[[], None]

    @property
    def id(self):
        return f"{self.suite}.{self.name}"


@dataclass
class Result:
    check: Check
    passed: bool
    seconds: float
    message: str = ""


CHECKS: List[Check] = []


def invariant(suite, level="fast", name=None):
    def deco(fn):
        CHECKS.append(Check(suite, name or fn.__name__, level, fn))
        return fn

    return deco


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _rng():
    return np.random.default_rng(SEED)


# family profiles written as expressions, with the window they are valid on
CUSTOM_FORMS = {
    1: ("exp(alpha*t)", 0.0),
    2: ("(-t)^(-alpha)", -1e-3),
    3: ("log(-t)^(-alpha)", -1.5),
    4: ("-(log(-t)^alpha)", -1.5),
}


def _random_family_point(rng, families=(1, 2, 3, 4)):
    k = int(rng.choice(families))
    a = float(rng.uniform(0.5, 3.0))
    t = -float(np.exp(rng.uniform(math.log(2.0), math.log(200.0))))
    if k == 1:
        t = -float(rng.uniform(0.1, 5.0))
    return k, a, t


# -- profile -------------------------------------------------------------------------------
@invariant("profile")
def jet_vs_finite_differences():
    rng = _rng()
    for _ in range(20):
        k, a, t = _random_family_point(rng)
        p = Profile.family(k, a)
        jet = p.eval_jet(t, 3)
        with mpmath.workdps(30):
            for order in (1, 2, 3):
                fd = mpmath.diff(lambda s: p.eval_jet(s, 0)[0], mpmath.mpf(t), order)
                assert _rel(float(jet[order]), float(fd)) < 1e-5, f"family{k} a={a} t={t} k={order}"


@invariant("profile")
def custom_matches_families():
    rng = _rng()
    for k, (src, t_max) in CUSTOM_FORMS.items():
        a = float(rng.uniform(0.5, 3.0))
        fam, cus = Profile.family(k, a), parse_profile(src, {"alpha": a}, t_max)
        ts = -np.exp(rng.uniform(math.log(2.0), math.log(1e6), 25)) if k > 1 else -rng.uniform(0.0, 30.0, 25)
        jf, jc = fam.eval_jet(ts, 4), cus.eval_jet(ts, 4)
        for order in range(5):
            err = np.max(np.abs(np.asarray(jf[order]) - np.asarray(jc[order])) / np.abs(np.asarray(jf[order])))
            assert err < 1e-10, f"{src}: order {order} rel err {err:.2e}"


def random_tree(rng, depth=0, t_free=False):
    leaf = depth >= 4 or rng.random() < 0.3
    if leaf:
        r = rng.random()
        if r < 0.4 and not t_free:
            return E.Var()
        if r < 0.7:
            return E.Num(float(rng.choice([0.5, 1.0, 2.0, 3.25, 1e-3, 12.0])))
        return E.Param(str(rng.choice(["a", "b", "alpha"])))
    r = rng.random()
    if r < 0.25:
        return E.Unary(str(rng.choice(["neg", "exp", "log"])), random_tree(rng, depth + 1, t_free))
    if r < 0.4:
        return E.Binary("^", random_tree(rng, depth + 1, t_free), random_tree(rng, depth + 2, True))
    return E.Binary(str(rng.choice(list("+-*/"))), random_tree(rng, depth + 1, t_free), random_tree(rng, depth + 1, t_free))


@invariant("profile")
def parser_round_trip():
    rng = _rng()
    for _ in range(200):
        tree = random_tree(rng)
        assert E.parse(E.to_source(tree)) == tree, E.to_source(tree)


# -- quadrature ----------------------------------------------------------------------------
def _reference_agreement():
    for cid in REGISTRY:
        spec = reference_integrand(cid)
        ref = quad_reference(cid)
        if spec["kind"] == "improper":
            v = integrate_improper(spec["f"], spec["t0"], tol=1e-10)
            assert v.cls == CONVERGENT, f"{cid}: {v.cls}"
            val = v.value
        else:
            val, _ = integrate_proper(spec["f"], spec["a"], spec["b"], 1e-10, spec["hints"])
        assert _rel(val, ref) < 1e-8, f"{cid}: {val!r} vs {ref!r}"


invariant("quadrature", name="reference_agreement")(_reference_agreement)


@invariant("quadrature")
def tol_halving_stability():
    cases = [(RadialMetric(Profile.family(1, 1.0)), None), (RadialMetric(Profile.family(2, 1.0)), None),
             (RadialMetric(Profile.family(3, 2.0)), None)]
    for m, t0 in cases:
        for tol in (1e-6, 1e-8):
            v1, v2 = diameter(m, t0, tol), diameter(m, t0, tol / 2)
            assert v1.cls == v2.cls == CONVERGENT, f"{m.profile.describe()}: {v1.cls}/{v2.cls}"
            # tolerances are absolute-plus-relative: err <= tol (1 + |value|)
            assert abs(v1.value - v2.value) < tol * (1 + abs(v1.value)), f"{m.profile.describe()} tol={tol}"


def _monotone(alphas, classify):
    seen_conv = None
    for a in alphas:
        c = classify(a)
        if c == CONVERGENT and seen_conv is None:
            seen_conv = a
        assert not (c == DIVERGENT and seen_conv is not None), f"Divergent at a={a} above Convergent at a={seen_conv}"


@invariant("quadrature")
def monotone_in_alpha_fast():
    _monotone([0.5, 0.8, 1.5, 2.0, 3.0], lambda a: diameter(RadialMetric(Profile.family(3, a))).cls)


@invariant("quadrature", level="full")
def monotone_in_alpha():
    _monotone(np.linspace(0.5, 3.0, 11), lambda a: diameter(RadialMetric(Profile.family(3, a))).cls)
    _monotone(np.linspace(1.0, 4.0, 7), lambda a: _dini(Profile.family(2, a)))


def _dini(p):
    from .geometry import dini_transform

    return dini_transform(RadialModulus(p), math.exp(min(p.anchor, -1.0))).cls


# -- geometry ------------------------------------------------------------------------------
def _random_metric_sample(rng):
    k, a, _ = _random_family_point(rng)
    n = int(rng.integers(1, 4))
    eps = float(rng.choice([0.0, 0.01, 0.1]))
    p = Profile.family(k, a)
    hi = min(p.anchor, -0.01) if k == 1 else p.anchor
    if eps and 2 * math.log(eps) + 0.1 >= hi:
        eps = 0.0  # the whole window lies inside the eps-ball
    t = float(rng.uniform(max(hi - 8.0, 2 * math.log(eps) + 0.1 if eps else -1e9), hi))
    d = rng.normal(size=n) + 1j * rng.normal(size=n)
    r = math.sqrt(max(math.exp(t) - eps ** 2, 1e-300))
    return RadialMetric(p, n, eps), r * d / np.linalg.norm(d), t


@invariant("geometry")
def spectrum_consistency():
    rng = _rng()
    for _ in range(50):
        m, z, _ = _random_metric_sample(rng)
        t = math.log(float(np.vdot(z, z).real) + m.eps ** 2)
        ev = metric_eigenvalues(m, t)
        got = np.sort(np.linalg.eigvalsh(metric_matrix(m, z)))
        want = np.sort([ev.spherical] * (m.n - 1) + [ev.radial])
        assert np.max(np.abs(got - want) / want) < 1e-9, f"n={m.n} t={t}"


@invariant("geometry")
def determinant_identity():
    rng = _rng()
    for _ in range(50):
        m, z, _ = _random_metric_sample(rng)
        t = math.log(float(np.vdot(z, z).real) + m.eps ** 2)
        ev = metric_eigenvalues(m, t)
        det = float(np.linalg.det(metric_matrix(m, z)).real)
        assert _rel(det, ev.spherical ** (m.n - 1) * ev.radial) < 1e-9


@invariant("geometry")
def radial_distance_additivity():
    rng = _rng()
    for k, a in ((1, 1.0), (2, 1.5), (3, 2.0), (4, 1.0)):
        m = RadialMetric(Profile.family(k, a))
        hi = math.exp(m.profile.anchor / 2)
        r1, r2, r3 = sorted(rng.uniform(1e-4 * hi, hi, 3))
        d12, d23, d13 = radial_distance(m, r1, r2), radial_distance(m, r2, r3), radial_distance(m, r1, r3)
        assert abs(d12 + d23 - d13) < 1e-8 * (1 + d13), f"family{k}"


@invariant("geometry", level="full")
def path_upper_vs_mesh():
    m = RadialMetric(Profile.family(2, 1.0))
    r1, r2 = 0.05, 0.3
    coarse, fine = AnnulusMesh(m, r1, r2, 3), AnnulusMesh(m, r1, r2, 4)
    th = math.pi / 2
    for (x, y) in (((r1, 0.0), (r2, 0.0)), ((r1, 0.0), (r2, th)), ((r2, 0.0), (r2, th))):
        g3, g4 = graph_geodesic(coarse, x, y), graph_geodesic(fine, x, y)
        mesh_err = 2 * abs(g3 - g4) + 1e-9
        up = path_distance_upper(m, [x[0] * np.exp(1j * x[1])], [y[0] * np.exp(1j * y[1])], r_window=r2)
        assert up >= g4 - mesh_err, f"{x}->{y}: upper {up} below mesh {g4}"
        if x[1] == y[1]:
            assert abs(up - g4) <= mesh_err, f"collinear {x}->{y}: {up} vs {g4}"


@invariant("geometry")
def diameter_vs_decay_predicate():
    for a in (0.5, 1.5, 2.0, 3.0):
        p = Profile.family(3, a)
        pred = theorem_c_sufficient(RadialModulus(p))
        d = diameter(RadialMetric(p)).cls
        if pred:
            assert d == CONVERGENT, f"a={a}: predicate True but diameter {d}"
        if a < 1:
            assert not pred and d == DIVERGENT, f"a={a}: predicate {pred.verdict}, diameter {d}"


# -- curvature -----------------------------------------------------------------------------
@invariant("curvature")
def minoration_sign_agreement():
    rng = _rng()
    p = Profile.family(4, 1.0)
    for _ in range(200):
        eps = 10 ** -float(rng.uniform(1.5, 8))
        m = RadialMetric(p, 1, eps)
        lo, hi = 2 * math.log(eps) + 1e-9, p.anchor
        t = float(rng.uniform(lo, min(hi, lo + 3 * math.log(-math.log(eps)) + 5)))
        C = float(rng.uniform(0, 1000))
        psi = float(psi_jet(m, t, 0)[0])
        s_lhs = np.sign(minoration_lhs(m, t, C))
        s_mu = np.sign(bound_margins(m, t, C)[1] * psi ** 2)
        assert s_lhs == s_mu, f"eps={eps} t={t} C={C}"


@invariant("curvature")
def eps_continuity():
    for k, a, n, t in ((2, 1.0, 2, -5.0), (3, 2.0, 2, -5.0), (4, 1.0, 1, -5.0), (1, 0.5, 2, -3.0)):
        p = Profile.family(k, a)
        base = ricci_epsilon0(p, n, t)
        drift = []
        for e in range(2, 9):
            q = ricci_point(RadialMetric(p, n, 10.0 ** -e), t)
            scale = max(abs(base.mu), abs(base.lambda_) if n > 1 else 0.0, base.weight_radial)
            d = abs(q.mu - base.mu)
            if n > 1:
                d = max(d, abs(q.lambda_ - base.lambda_))
            drift.append(d / scale)
        assert all(b <= a_ * (1 + 1e-9) + 1e-15 for a_, b in zip(drift, drift[1:])), f"family{k}: drift not decreasing {drift}"
        assert drift[-1] < 1e-3, f"family{k}: drift {drift[-1]:.2e} at eps=1e-8"


def _oracle_ricci(points):
    rng = _rng()
    done = 0
    while done < points:
        k = int(rng.choice([2, 3, 4]))
        a = float(rng.uniform(0.6, 3.0))
        n = int(rng.choice([2, 3]))
        eps = float(rng.choice([0.0, 0.05]))
        p = Profile.family(k, a)
        t = float(rng.uniform(p.anchor - 3.0, p.anchor))
        m = RadialMetric(p, n, eps)
        if eps and t <= 2 * math.log(eps) + 0.5:
            continue
        try:
            pt = ricci_point(m, t)
        except DegenerateMetric:  # psi < 0: the smoothed form is not a metric there
            continue
        r = math.sqrt(math.exp(t) - eps ** 2)
        lam, mu = fd_ricci(m, [r] + [0.0] * (n - 1))
        scale = max(abs(pt.mu), abs(pt.lambda_))
        assert abs(mu - pt.mu) / scale < 1e-4, f"family{k} a={a:.3f} n={n} eps={eps} t={t:.3f}: mu {pt.mu} vs fd {mu}"
        assert abs(lam - pt.lambda_) / scale < 1e-4, f"family{k} a={a:.3f} n={n} eps={eps} t={t:.3f}: lambda {pt.lambda_} vs fd {lam}"
        done += 1


@invariant("curvature")
def oracle_agreement_fast():
    _oracle_ricci(5)


@invariant("curvature", level="full")
def oracle_agreement():
    _oracle_ricci(20)


@invariant("curvature")
def scale_covariance():
    rng = _rng()
    for k, (src, t_max) in CUSTOM_FORMS.items():
        a, c = float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.1, 10.0))
        if k == 4:
            t_max = -math.exp(max(1.0, a))  # convex only below e^(a-1)
        scaled = parse_profile(f"c*({src})", {"alpha": a, "c": c}, t_max)
        base = parse_profile(src, {"alpha": a}, t_max)
        for n, eps in ((1, 0.0), (2, 1e-3), (3, 1e-6)):
            t = (t_max - 1.0) if k == 1 else t_max - 2.0
            p1 = ricci_point(RadialMetric(base, n, eps), t)
            p2 = ricci_point(RadialMetric(scaled, n, eps), t)
            # lambda and mu are dimensionless; mu = 0 exactly for the exponential profile
            for x, y in ((p2.lambda_, p1.lambda_), (p2.mu, p1.mu)):
                assert abs(x - y) <= 1e-12 * max(1.0, abs(y)), f"{src} c={c} n={n}: {x} vs {y}"


# -- integrability -------------------------------------------------------------------------
@invariant("integrability")
def condition_k_monotone_in_h():
    small, large = power_h(1.01), power_h(1.5)
    for a in (0.3, 0.6, 1.0, 2.0):
        p = Profile.family(3, a)
        c_large = condition_k_radial(p, 2, large).cls
        c_small = condition_k_radial(p, 2, small).cls
        if c_large == CONVERGENT:
            assert c_small == CONVERGENT, f"a={a}: larger h converges but smaller h gives {c_small}"


def _theorem_b_bracket(n, a):
    p_star = n * (1 + a) - 1
    prof = Profile.family(3, a)
    est = find_threshold(lambda p: orlicz_radial(prof, n, TheoremB(n, p)), (p_star - 1.3, p_star + 1.9),
                         tol_param=0.05, param_name="p")
    assert est.contains(p_star), f"(n, a)=({n}, {a}): bracket {est.bracket} misses {p_star}"
    assert est.bracket[1] - est.bracket[0] <= 0.3, f"bracket {est.bracket} wider than 0.3"


@invariant("integrability")
def theorem_b_bracket_fast():
    _theorem_b_bracket(2, 1.0)


@invariant("integrability", level="full")
def theorem_b_brackets():
    for n, a in ((1, 2.0), (2, 1.0), (2, 3.0)):
        _theorem_b_bracket(n, a)


@invariant("integrability")
def family2_all_p_ladder():
    p = Profile.family(2, 1.0)
    for q in (0, 1, 5, 10, 25, 50):
        v = orlicz_radial(p, 2, TheoremB(2, q))
        assert v.cls == CONVERGENT, f"p={q}: {v.cls}"


@invariant("integrability")
def modulus_lookup_total():
    for w, form in ((PowerEps(0.5, 2), "Holder"), (LogPower(2, 1.0), "InverseLogPower"), (LogLogPower(2, 1.0), "InverseLogLogPower")):
        b = modulus_from_weight(w)
        assert b.form == form and b.exponent > 0, f"{w}: {b}"
    try:
        modulus_from_weight(TheoremB(2, 1.0))
    except UnsupportedClass:
        pass
    else:
        raise AssertionError("TheoremB weight should have no modulus lookup")


# -- oracle --------------------------------------------------------------------------------
invariant("oracle", name="reference_agreement")(_reference_agreement)


@invariant("oracle")
def fd_metric_agreement():
    rng = _rng()
    for _ in range(20):
        m, z, _ = _random_metric_sample(rng)
        if m.eps == 0 and np.linalg.norm(z) < 0.01:
            continue
        H, Hf = metric_matrix(m, z), fd_metric(m, z, 1e-3)
        err = np.max(np.abs(H - Hf)) / np.max(np.abs(H))
        assert err < 1e-5, f"n={m.n} eps={m.eps} |z|={np.linalg.norm(z):.3g}: rel err {err:.2e}"


@invariant("oracle", level="full")
def fd_metric_richardson_order():
    for k, a, n in ((2, 1.0, 2), (3, 2.0, 1), (1, 1.5, 2)):
        m = RadialMetric(Profile.family(k, a), n, 0.0)
        z = [0.2] + [0.1j] * (n - 1)
        H = metric_matrix(m, z)
        e1 = np.max(np.abs(fd_metric(m, z, 1e-2, richardson=False) - H))
        e2 = np.max(np.abs(fd_metric(m, z, 5e-3, richardson=False) - H))
        assert 3.5 <= e1 / e2 <= 4.5, f"family{k}: error ratio {e1 / e2:.3f}"


@invariant("oracle", level="full")
def mesh_convergence():
    m = RadialMetric(Profile.family(3, 2.0))
    r1, r2 = math.exp(-20), math.exp(-2)
    prev = math.inf
    for ref in range(5):
        g = graph_geodesic(AnnulusMesh(m, r1, r2, ref), (r1, 0.0), (r2, 0.0))
        assert g <= prev + 1e-12, f"refinement {ref}: {g} > {prev}"
        prev = g
    d = radial_distance(m, r1, r2)
    assert abs(prev - d) <= 0.02 * d, f"refinement 4: {prev} vs {d}"


# -- cli -----------------------------------------------------------------------------------
@invariant("cli")
def report_round_trip():
    from .report import AnalysisReport, build_report, config_hash

    cfg = {"profile": {"kind": "family1", "params": {"alpha": 0.5}}, "n": 2}
    rep = build_report(cfg)
    assert AnalysisReport.from_json(rep.to_json()) == rep
    explicit = dict(cfg, eps=0.0, tol=1e-8, C_list=[1000, 0, 1, 10, 100])
    assert config_hash(explicit) == config_hash(cfg), "hash depends on spelling of defaults"
    other = dict(cfg, profile={"kind": "family1", "params": {"alpha": 0.6}})
    assert config_hash(other) != config_hash(cfg), "hash ignores alpha"


@invariant("cli", level="full")
def sweep_thread_determinism():
    from .cli import run_sweep
    from .report import normalize_config

    cfg = normalize_config({"profile": {"kind": "family3", "params": {"alpha": 1.0}},
                            "sweep": {"param": "alpha", "linspace": [0.5, 3.0, 6], "quantity": "diameter"}})
    outs = {th: run_sweep(cfg, th) for th in (1, 4)}
    assert outs[1] == outs[4], "sweep output differs between 1 and 4 workers"


# -- runner --------------------------------------------------------------------------------
def select(level: str) -> List[Check]:
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    return [c for c in CHECKS if level == "full" or c.level == "fast"]


def run_checks(level: str = "fast", report: Callable[[Result], None] = None) -> List[Result]:
    results = []
    for c in select(level):
        t = time.perf_counter()
        try:
            c.fn()
            res = Result(c, True, time.perf_counter() - t)
        except AssertionError as e:
            res = Result(c, False, time.perf_counter() - t, str(e) or "assertion failed")
        except Exception as e:
            res = Result(c, False, time.perf_counter() - t, f"{type(e).__name__}: {e}\n{traceback.format_exc(limit=3)}")
        results.append(res)
        if report:
            report(res)
    return results


def to_junit(results: List[Result], level: str) -> str:
    root = ET.Element("testsuites", name=f"kahlerlab-verify-{level}", tests=str(len(results)),
                      failures=str(sum(not r.passed for r in results)))
    for suite in dict.fromkeys(r.check.suite for r in results):
        rs = [r for r in results if r.check.suite == suite]
        el = ET.SubElement(root, "testsuite", name=suite, tests=str(len(rs)),
                           failures=str(sum(not r.passed for r in rs)), time=f"{sum(r.seconds for r in rs):.3f}")
        for r in rs:
            tc = ET.SubElement(el, "testcase", classname=suite, name=r.check.name, time=f"{r.seconds:.3f}")
            if not r.passed:
                ET.SubElement(tc, "failure", message=r.message.splitlines()[0][:200]).text = r.message
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=True) + "\n"
