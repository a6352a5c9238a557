import math

import numpy as np
import pytest

from kahlerlab.curvature import (bound_margins, minoration_from_jet, minoration_lhs, probe_t, psi_jet, ricci_epsilon0,
                                 ricci_point, scan_uniform_bound)
from kahlerlab.errors import DegenerateMetric, EmptyGrid
from kahlerlab.geometry import RadialMetric
from kahlerlab.profile import Profile, parse_profile


def _eps_for(F, t):
    # F = eps^2 e^{-t}
    return math.exp(0.5 * (math.log(F) + t))


def test_psi_jet_eps0_is_shifted_chi():
    prof = Profile.family(3, 1.5)
    jet = psi_jet(RadialMetric(prof), -50.0, 2)
    assert np.allclose(jet.coeffs, prof.eval_jet(-50.0, 4).coeffs[2:], rtol=0)


@pytest.mark.parametrize("s,F", [(5.0, 0.3), (40.0, 1e-3), (200.0, 0.9)])
def test_psi_jet_poincare(s, F):
    t = -s
    m = RadialMetric(Profile.family(4, 1.0), 1, _eps_for(F, t))
    jet = psi_jet(m, t, 2)
    assert jet[0] == pytest.approx(1 / s ** 2 + F * (1 / s - 1 / s ** 2), rel=1e-12)
    assert jet[1] == pytest.approx(2 / s ** 3 + F * (-1 / s + 2 / s ** 2 - 2 / s ** 3), rel=1e-11)


@pytest.mark.parametrize("alpha,n", [(0.5, 1), (1.0, 2), (2.0, 3)])
def test_family1_ricci(alpha, n):
    for t in (-0.3, -20.0):
        p = ricci_point(RadialMetric(Profile.family(1, alpha), n), t)
        assert p.lam == n * (1 - alpha)
        assert p.mu == 0.0


@pytest.mark.parametrize("alpha,n", [(1.0, 2), (0.5, 1), (2.5, 3)])
def test_family2_ricci(alpha, n):
    prof = Profile.family(2, alpha)
    for t in (-10.0, -1e3, -1e6):
        p = ricci_point(RadialMetric(prof, n), t)
        assert p.lam == pytest.approx(n - (n * alpha + n + 1) / (-t), rel=1e-10)
        assert p.mu * t * t == pytest.approx(-(n * alpha + n + 1), rel=1e-10)
        c2 = prof.eval_jet(t, 2)[2]
        assert p.mu / c2 == pytest.approx(-(n * (alpha + 1) + 1) / (alpha * (alpha + 1)) * (-t) ** alpha, rel=1e-10)


def test_family3_mu_asymptotics():
    n, alpha, t = 2, 1.0, -math.exp(20)
    prof = Profile.family(3, alpha)
    p = ricci_epsilon0(prof, n, t)
    lead = -((n + 1) / alpha) * math.log(-t) ** (alpha + 1)
    assert p.mu / prof.eval_jet(t, 2)[2] == pytest.approx(lead, rel=0.05)


@pytest.mark.parametrize("t", [-3.0, -50.0, -1e5])
def test_poincare_ratio(t):
    prof = Profile.family(4, 1.0)
    p = ricci_epsilon0(prof, 1, t)
    assert p.mu / prof.eval_jet(t, 2)[2] == pytest.approx(-2.0, rel=1e-12)


def test_eps0_paths_agree():
    rng = np.random.default_rng(5)
    for k in (2, 3, 4):
        for _ in range(10):
            a, n = float(rng.uniform(0.3, 3)), int(rng.integers(1, 4))
            t = -float(np.exp(rng.uniform(1.5, 8)))
            prof = Profile.family(k, a)
            p, q = ricci_point(RadialMetric(prof, n), t), ricci_epsilon0(prof, n, t)
            scale = max(abs(q.mu), abs(q.lam), q.weight_radial)
            assert abs(p.lam - q.lam) <= 1e-12 * max(1, abs(q.lam))
            assert abs(p.mu - q.mu) <= 1e-12 * scale


def test_eps_continuity():
    prof, n, t = Profile.family(3, 2.0), 2, -5.0
    ref = ricci_epsilon0(prof, n, t)
    scale = max(abs(ref.mu), abs(ref.lam), ref.weight_radial)
    drift = []
    for k in range(2, 9):
        p = ricci_point(RadialMetric(prof, n, 10.0 ** -k), t)
        drift.append(max(abs(p.mu - ref.mu), abs(p.lam - ref.lam)) / scale)
    assert all(b < a for a, b in zip(drift, drift[1:]))
    assert drift[-1] < 1e-3


def test_scale_covariance():
    base = Profile.family(2, 2.0)
    scaled = parse_profile("7.5*(-t)^(-2)", {}, t_max=-0.5)
    for eps in (0.0, 1e-3, 1e-8):
        for t in (-2.0, -10.0, -30.0):
            if t < 2 * math.log(eps or 1e-300):
                continue
            p = ricci_point(RadialMetric(base, 2, eps), t)
            q = ricci_point(RadialMetric(scaled, 2, eps), t)
            assert q.lam == pytest.approx(p.lam, rel=1e-12, abs=1e-12)
            assert q.mu == pytest.approx(p.mu, rel=1e-12, abs=1e-12)


def test_degenerate_metric():
    m = RadialMetric(parse_profile("t", {}, t_max=-1.0), 1, validate=False)
    with pytest.raises(DegenerateMetric):
        ricci_point(m, -2.0)


# -- margins and scans -----------------------------------------------------------------
def test_margins_family1():
    for t in (-0.5, -10.0, -300.0):
        ml, mm = bound_margins(RadialMetric(Profile.family(1, 0.5), 2), t, 0.0)
        assert ml >= 0 and mm >= 0
        ml, _ = bound_margins(RadialMetric(Profile.family(1, 2.0), 2), t, 0.0)
        assert ml == 2 * (1 - 2)


def test_margin_family2_eventually_negative():
    m = RadialMetric(Profile.family(2, 1.0), 2)
    for C in (1.0, 1e3, 1e6):
        assert bound_margins(m, -10 * C, C)[1] < 0


def test_scan_poincare_smoothing():
    eps = [2.0 ** -k for k in range(4, 21)]
    rep = scan_uniform_bound(Profile.family(4, 1.0), 1, eps, C_list=[0, 1, 10, 100, 1000])
    assert rep.verdict == "EvidenceUnbounded"
    w = [w for w in rep.witnesses if w.path == "|z|^2=eps^2(-log eps)^1" and w.quantity == "mu"]
    assert w
    w = w[0]
    assert len(w.points) >= 5
    assert all(b >= 2 * a * (1 - 1e-9) for a, b in zip(w.deficits, w.deficits[1:]))
    # the points really lie on the probe curve
    for t, e in w.points:
        assert t == pytest.approx(probe_t(e, 1.0), rel=1e-14)


def test_scan_flat_is_bounded():
    rep = scan_uniform_bound(Profile.family(1, 1.0), 1, [0.0], C_list=[0.0])
    assert rep.verdict == "UniformlyBounded" and rep.bound_C == 0.0


def test_scan_family2_unbounded():
    rep = scan_uniform_bound(Profile.family(2, 1.0), 2, [0.0], C_list=[1, 10, 100])
    assert rep.verdict == "EvidenceUnbounded"
    assert any(w.path.startswith("ray") for w in rep.witnesses)


def test_scan_empty_grid():
    with pytest.raises(EmptyGrid):
        scan_uniform_bound(Profile.family(1, 1.0), 1, [])


# -- minoration inequality -----------------------------------------------------------------
def test_minoration_sign_equivalence():
    rng = np.random.default_rng(20240607)
    prof = Profile.family(4, 1.0)
    for _ in range(200):
        eps = 10 ** -rng.uniform(1, 8)
        t = float(rng.uniform(2 * math.log(eps), -1.5))
        C = float(10 ** rng.uniform(-2, 3)) * rng.integers(0, 2)
        m = RadialMetric(prof, 1, eps)
        lhs = minoration_lhs(m, t, C)
        mm = bound_margins(m, t, C)[1]
        psi = psi_jet(m, t, 0)[0]
        assert np.sign(lhs) == np.sign(mm * psi ** 2)


def test_minoration_near_origin():
    # F bounded away from 0: lhs ~ 2 F^3 / s^2
    for s in (1e2, 1e3):
        F = 0.5
        m = RadialMetric(Profile.family(4, 1.0), 1, _eps_for(F, -s))
        assert minoration_lhs(m, -s, 0.0) / (2 * F ** 3 / s ** 2) == pytest.approx(1.0, rel=10 / s)


def test_minoration_small_F():
    s, F = 1e3, 1e-6
    m = RadialMetric(Profile.family(4, 1.0), 1, _eps_for(F, -s))
    approx = -2 / s ** 6 - F / s ** 3 + 2 * F ** 3 / s ** 2
    assert minoration_lhs(m, -s, 0.0) == pytest.approx(approx, rel=0.05)
    assert minoration_lhs(m, -s, 0.0) < 0


def test_minoration_constant_psi():
    assert minoration_from_jet(2.0, 0.0, 0.0, 0.3, 0.0) == 0.3 * 4.0
    assert minoration_from_jet(2.0, 0.0, 0.0, 0.3, 5.0) == 0.3 * 4.0 + 5.0 * 8.0
