import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahlerlab.errors import DomainError, ExpressionSyntaxError, InvalidExponent, UnboundParameter
from kahlerlab.expr import parse, to_source
from kahlerlab.jet import Jet
from kahlerlab.profile import Profile, parse_profile, sample_grid, validate_profile


# -- jets ------------------------------------------------------------------------------
def test_jet_polynomial_exact():
    t = Jet.variable(2.0, 4)
    p = 3 * t * t * t - t * t + 5
    # p = 3t^3 - t^2 + 5, p' = 9t^2 - 2t, p'' = 18t - 2, p''' = 18
    assert list(p.coeffs) == [25.0, 32.0, 34.0, 18.0, 0.0]


def test_jet_exp_log_inverse():
    t = Jet.variable(-1.3, 4)
    back = t.exp().log()
    assert np.allclose(back.coeffs, t.coeffs, rtol=1e-14, atol=1e-14)


def test_jet_division_and_power():
    t = Jet.variable(2.0, 3)
    q = 1 / t
    assert np.allclose(q.coeffs, [0.5, -0.25, 0.25, -0.375])
    r = t ** -1
    assert np.allclose(r.coeffs, q.coeffs)


# -- families ---------------------------------------------------------------------------
def test_family1_unit_jet_at_zero():
    assert list(Profile.family(1, 1.0).eval_jet(0.0, 4).coeffs) == [1.0] * 5


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
@pytest.mark.parametrize("t", [-0.5, -7.0, -1e4])
def test_family2_derivative_product(alpha, t):
    jet = Profile.family(2, alpha).eval_jet(t, 4)
    for k in range(5):
        expected = math.prod(alpha + j for j in range(k)) * (-t) ** (-alpha - k)
        assert jet[k] == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_family3_deep_asymptotics(alpha):
    # corrections are O(1 / log(-t)); the relative gap must shrink with depth
    prof = Profile.family(3, alpha)
    gaps = []
    for t in (-1e10, -1e30, -1e60):
        jet = prof.eval_jet(t, 4)
        L = math.log(-t)
        gaps.append([abs(jet[k] * (-t) ** k * L ** (alpha + 1) / (math.factorial(k - 1) * alpha) - 1)
                     for k in range(1, 5)])
    assert max(g[0] for g in gaps) < 1e-14  # first derivative is exactly the leading term
    for k in range(1, 4):
        assert gaps[0][k] > gaps[1][k] > gaps[2][k]
        assert gaps[2][k] < 0.05


def test_family_windows_enforced():
    with pytest.raises(DomainError):
        Profile.family(3, 1.0).eval_jet(-0.5, 2)
    with pytest.raises(DomainError):
        Profile.family(2, 1.0).eval_jet(0.0, 2)
    with pytest.raises(ValueError):
        Profile.family(1, 0.0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_family_jets_match_mpmath_derivatives(k):
    rng = np.random.default_rng(k)
    chi = {
        1: lambda a, t: mpmath.exp(a * t),
        2: lambda a, t: (-t) ** (-a),
        3: lambda a, t: mpmath.log(-t) ** (-a),
        4: lambda a, t: -mpmath.log(-t) ** a,
    }[k]
    for _ in range(5):
        a = float(rng.uniform(0.2, 3.0))
        t = -float(np.exp(rng.uniform(0.5, 6.0)))
        jet = Profile.family(k, a).eval_jet(t, 3)
        for d in range(4):
            ref = float(mpmath.diff(lambda s: chi(a, s), mpmath.mpf(t), d))
            assert jet[d] == pytest.approx(ref, rel=1e-9)


def test_family4_flagged_unbounded():
    assert Profile.family(4, 1.0).unbounded_potential
    assert not Profile.family(3, 1.0).unbounded_potential


# -- parser ---------------------------------------------------------------------------
def test_custom_matches_family1():
    p = parse_profile("exp(a*t)", {"a": 1.0})
    f = Profile.family(1, 1.0)
    for t in (-0.1, -3.0, -40.0):
        assert np.allclose(p.eval_jet(t, 4).coeffs, f.eval_jet(t, 4).coeffs, rtol=1e-12)


def test_custom_matches_family2():
    p = parse_profile("(-t)^(-a)", {"a": 2.0})
    f = Profile.family(2, 2.0)
    for t in (-0.5, -3.0, -400.0):
        assert np.allclose(p.eval_jet(t, 4).coeffs, f.eval_jet(t, 4).coeffs, rtol=1e-12)


def test_syntax_error_offset():
    with pytest.raises(ExpressionSyntaxError) as exc:
        parse("exp(a*")
    assert exc.value.position == 6
    assert "'t'" in exc.value.expected


def test_unbound_parameter():
    with pytest.raises(UnboundParameter) as exc:
        parse_profile("exp(b*t)", {"a": 1.0})
    assert exc.value.name == "b"


def test_exponent_must_not_depend_on_t():
    with pytest.raises(InvalidExponent):
        parse("t^t")
    with pytest.raises(InvalidExponent):
        parse("(-t)^(2*log(-t))")
    parse("(-t)^(-a)")  # parameter exponents are constants


_leaf = st.one_of(
    st.just("t"),
    st.sampled_from(["a", "b"]),
    st.floats(min_value=0.01, max_value=100, allow_nan=False).map(repr),
)


def _compose(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/"), children).map(lambda x: f"({x[0]} {x[1]} {x[2]})"),
        st.tuples(st.sampled_from(["exp", "log", "-"]), children).map(lambda x: f"{x[0]}({x[1]})"),
        st.tuples(children, st.sampled_from(["2", "0.5", "-1.5"])).map(lambda x: f"({x[0]})^{x[1]}"),
    )


@settings(max_examples=150, deadline=None)
@given(st.recursive(_leaf, _compose, max_leaves=12))
def test_parser_round_trip(src):
    tree = parse(src)
    assert parse(to_source(tree)) == tree


# -- validation -----------------------------------------------------------------------
def test_validate_admissible_families():
    assert validate_profile(Profile.family(1, 2.0), (-50.0, -1.0)) == []
    assert validate_profile(Profile.family(4, 1.0), (-50.0, -2.0)) == []


def test_validate_decreasing_custom():
    p = parse_profile("-exp(t)", {}, t_max=-0.5)
    bad = validate_profile(p, (-50.0, -1.0))
    grid = sample_grid((-50.0, -1.0))
    assert {v.t for v in bad if v.quantity == "chi'"} == {float(t) for t in grid}
