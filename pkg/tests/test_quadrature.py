import math

import numpy as np
import pytest

from kahlerlab import _backend as B, oracle
from kahlerlab.errors import EvaluationError, InvalidTolerance, NonIntegrableHint, SameClassAtEndpoints
from kahlerlab.geometry import RadialModulus, dini_transform, sqrt_chi2
from kahlerlab.integrability import condition_k_radial, power_h
from kahlerlab.profile import Profile
from kahlerlab.quadrature import (CONVERGENT, DIVERGENT, INCONCLUSIVE, IntegralVerdict, classify_convergence,
                                  default_schedule, find_threshold, integrate_improper, integrate_proper,
                                  mp_safe)


def test_family1_ray_closed_form():
    a = 3.0
    v = integrate_improper(lambda t: a * np.exp(a * t / 2), 0.0, tol=1e-10)
    assert v.cls == CONVERGENT
    assert abs(v.value - 2.0) <= 1e-10
    assert v.error_estimate <= 1e-10


def test_zero_integrand():
    v = integrate_improper(lambda t: 0.0 * t, 0.0)
    assert v.cls == CONVERGENT and v.value == 0.0


def test_log_divergence_detected():
    v = integrate_improper(lambda t: 1 / (np.abs(t) * np.log(-t)), -math.e)
    assert v.cls == DIVERGENT
    # partial sums grow like log of the window bound
    parts = [p for _, p in v.diagnostics]
    assert all(b > a for a, b in zip(parts, parts[1:]))


def test_power_divergence_hits_ceiling():
    v = integrate_improper(lambda t: np.abs(t), -1.0)
    assert v.cls == DIVERGENT


def test_invalid_tolerance():
    with pytest.raises(InvalidTolerance):
        integrate_improper(lambda t: 0.0 * t, 0.0, tol=1e-15)
    with pytest.raises(InvalidTolerance):
        integrate_proper(lambda t: t, 0.0, 1.0, tol=0.5)


def test_evaluation_error_bubbles():
    with pytest.raises(EvaluationError):
        integrate_improper(lambda t: np.full_like(t, np.nan), 0.0)


def test_proper_linear():
    v, err = integrate_proper(lambda t: t, 0.0, 1.0)
    assert v == pytest.approx(0.5, abs=1e-14)
    assert err <= 1e-10


def test_proper_log_singularity(frozen):
    @mp_safe
    def f(t):
        return 1 / (t * (-B.log(t)) ** 1.5)

    v, err = integrate_proper(f, 0.0, math.exp(-1), hints={"a": "log"})
    assert v == pytest.approx(frozen["log_power_q1.5"], abs=1e-8)


def test_log_singularity_needs_mp_safe_integrand():
    with pytest.raises(EvaluationError):
        integrate_proper(lambda t: 1 / (t * (-np.log(t)) ** 1.5), 0.0, math.exp(-1), hints={"a": "log"})


def test_proper_power_singularity():
    v, _ = integrate_proper(lambda t: t ** -0.5, 0.0, 1.0, hints={"a": -0.5})
    assert v == pytest.approx(2.0, abs=1e-9)


def test_non_integrable_hint():
    with pytest.raises(NonIntegrableHint):
        integrate_proper(lambda t: 1 / t, 0.0, 1.0, hints={"a": -1})


def test_family3_diameter_classification(frozen):
    conv = classify_convergence(sqrt_chi2(Profile.family(3, 2.0)), -math.e, default_schedule())
    assert conv.cls == CONVERGENT
    assert conv.value == pytest.approx(frozen["family3_diameter_alpha2_T-e"], rel=1e-8)
    div = classify_convergence(sqrt_chi2(Profile.family(3, 0.5)), -math.e, default_schedule())
    assert div.cls == DIVERGENT


def test_near_threshold_never_mislabelled():
    v = classify_convergence(sqrt_chi2(Profile.family(3, 1.02)), -math.e, default_schedule())
    assert v.cls in (CONVERGENT, INCONCLUSIVE)


def test_tol_halving_stability():
    f = sqrt_chi2(Profile.family(3, 3.0))
    for tol in (1e-6, 1e-8):
        a = integrate_improper(f, -math.e, tol)
        b = integrate_improper(f, -math.e, tol / 2)
        assert abs(a.value - b.value) < tol * (1 + abs(a.value))


def test_verdict_dict_round_trip():
    v = integrate_improper(lambda t: np.exp(t), 0.0)
    assert IntegralVerdict.from_dict(v.to_dict()) == v


@pytest.mark.parametrize("case", sorted(oracle.REGISTRY))
def test_registry_agreement(case):
    ref = float(oracle.quad_reference(case))
    spec = oracle.reference_integrand(case)
    if spec["kind"] == "improper":
        v = integrate_improper(spec["f"], spec["t0"], tol=1e-11)
        assert v.cls == CONVERGENT
        got = v.value
    else:
        got, _ = integrate_proper(spec["f"], spec["a"], spec["b"], tol=1e-11, hints=spec.get("hints"))
    assert abs(got - ref) <= 1e-8 * max(1.0, abs(ref))


# -- threshold search ------------------------------------------------------------------
def test_threshold_family2_dini():
    est = find_threshold(lambda a: dini_transform(RadialModulus(Profile.family(2, a)), math.exp(-1)), (1.0, 4.0),
                         tol_param=0.05)
    assert est.contains(2.0)
    assert est.bracket[1] - est.bracket[0] <= 0.2
    assert est.flip == "converges-above"


def test_threshold_family3_diameter():
    est = find_threshold(lambda a: sqrt_chi2(Profile.family(3, a)), (0.5, 2.0), tol_param=0.05, t0=-math.e)
    assert est.contains(1.0)


def test_threshold_family3_condition_k():
    # with h(s) = s^(1+eta) the exact threshold is (1 + n eta)/n, 0.5001 here
    est = find_threshold(lambda a: condition_k_radial(Profile.family(3, a), 2, power_h(1.0001)), (0.1, 2.0),
                         tol_param=0.05)
    assert est.contains(0.5)


def test_same_class_at_endpoints():
    with pytest.raises(SameClassAtEndpoints):
        find_threshold(lambda a: sqrt_chi2(Profile.family(2, a)), (0.5, 3.0), t0=-1.0)
