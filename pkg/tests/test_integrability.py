import pytest

from kahlerlab import oracle
from kahlerlab.errors import GrowthAssumptionViolated, UnsupportedClass
from kahlerlab.geometry import RadialModulus
from kahlerlab.integrability import (ConditionK, LogLogPower, LogPower, PowerEps, TheoremB, check_growth,
                                     condition_k_radial, decay_exponent_check, modulus_from_weight, orlicz_radial,
                                     power_h, theorem_c_sufficient)
from kahlerlab.profile import Profile, parse_profile
from kahlerlab.quadrature import CONVERGENT, DIVERGENT, find_threshold


def test_condition_k_family3():
    assert condition_k_radial(Profile.family(3, 1.0), 2).cls == CONVERGENT
    assert condition_k_radial(Profile.family(3, 0.3), 2).cls == DIVERGENT


@pytest.mark.parametrize("alpha", [0.25, 1.0, 3.0])
def test_condition_k_family4_never(alpha):
    assert condition_k_radial(Profile.family(4, alpha), 2).cls == DIVERGENT


def test_condition_k_monotone_in_h():
    # s^1.01 <= s^1.5 for s >= 1: convergence with the larger h carries over
    for alpha in (1.2, 2.0):
        prof = Profile.family(3, alpha)
        assert condition_k_radial(prof, 2, power_h(1.5)).cls == CONVERGENT
        assert condition_k_radial(prof, 2, power_h(1.01)).cls == CONVERGENT
    # the threshold with h = s^(1+eta) is (1 + n eta)/n, so alpha = 1 sits on it for eta = 0.5
    assert condition_k_radial(Profile.family(3, 1.0), 2, power_h(1.5)).cls != CONVERGENT


def test_growth_assumption():
    assert check_growth(Profile.family(1, 2.0)) <= 2.0 + 1e-12
    flat = parse_profile("exp(-(t^2))", {}, t_max=-1.0)
    with pytest.raises(GrowthAssumptionViolated):
        condition_k_radial(flat, 1)


@pytest.mark.parametrize("n,alpha", [(2, 0.25), (3, 0.1)])
def test_theorem_b_family4(n, alpha):
    prof = Profile.family(4, alpha)
    p_star = n - 1 - n * alpha
    assert orlicz_radial(prof, n, TheoremB(n, p_star - 0.5)).cls == CONVERGENT
    assert orlicz_radial(prof, n, TheoremB(n, p_star + 0.5)).cls == DIVERGENT


@pytest.mark.parametrize("n,alpha", [(2, 1.0), (2, 3.0)])
def test_theorem_b_family3_bracket(n, alpha):
    p_star = n * (1 + alpha) - 1
    prof = Profile.family(3, alpha)
    est = find_threshold(lambda p: orlicz_radial(prof, n, TheoremB(n, p)), (p_star - 1.3, p_star + 1.9),
                         tol_param=0.05, param_name="p")
    assert est.contains(p_star)
    assert est.bracket[1] - est.bracket[0] <= 0.3
    assert est.flip == "converges-below"


def test_family2_converges_for_all_p():
    prof = Profile.family(2, 1.0)
    for p in (0, 5, 20, 50):
        assert orlicz_radial(prof, 2, TheoremB(2, p)).cls == CONVERGENT


def test_power_weight_on_family1():
    # n = 1: f = a^2 e^{(a-1)t}, so f^2 e^t = a^4 e^{(2a-1)t}
    a = 0.8
    v = orlicz_radial(Profile.family(1, a), 1, PowerEps(1.0))
    assert v.cls == CONVERGENT
    assert v.value == pytest.approx(a ** 4 / (2 * a - 1), rel=1e-8)
    # a = 0.5 makes the integrand constant; f overflows while chi'' underflows along the way
    assert orlicz_radial(Profile.family(1, 0.5), 1, PowerEps(1.0)).cls == DIVERGENT


def test_modulus_lookup():
    h = modulus_from_weight(PowerEps(1.0), n=2)
    assert h.form == "Holder" and h.exponent == pytest.approx(0.4) and h.strict_sup
    assert modulus_from_weight(LogPower(2, 0.6)).exponent == pytest.approx(0.3)
    b = modulus_from_weight(LogLogPower(3, 1.5))
    assert b.form == "InverseLogLogPower" and b.exponent == pytest.approx(0.5)
    with pytest.raises(UnsupportedClass):
        modulus_from_weight(TheoremB(2, 1.0))
    with pytest.raises(UnsupportedClass):
        modulus_from_weight(ConditionK(power_h()))


def test_theorem_c_predicate():
    assert theorem_c_sufficient(RadialModulus(Profile.family(3, 2.0))).verdict == "True"
    assert theorem_c_sufficient(RadialModulus(Profile.family(3, 1.0))).verdict in ("False", "Inconclusive")
    assert theorem_c_sufficient(RadialModulus(Profile.family(3, 0.5))).verdict == "False"
    assert theorem_c_sufficient(lambda r: r).verdict == "True"


@pytest.mark.parametrize("alpha,expected", [(3.0, 1.0), (2.0, 0.5)])
def test_decay_exponent(alpha, expected):
    rep = decay_exponent_check(Profile.family(3, alpha), 2)
    assert rep["actual"] == pytest.approx(expected, abs=0.02)
    assert rep["theoremB_sup"] == pytest.approx((2 * (1 + alpha) - 1 - 4) / 2)


def test_decay_exponent_vacuous_bound():
    rep = decay_exponent_check(Profile.family(3, 1.2), 2)
    assert rep["theoremB_sup"] < 0
    assert rep["consistent_flag"] is None


def test_family3_tail_closed_form(frozen):
    assert float(oracle.quad_reference("family3_tail")) == pytest.approx(frozen["family3_tail_alpha3_T-e10"], rel=1e-15)
