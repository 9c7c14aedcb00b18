import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotmrac.exceptions import GainConditionError
from hotmrac.laws import (
    EXTENDED,
    PROPOSITION,
    GdLaw,
    HotLaw,
    gd_update,
    hot_alpha,
    hot_update,
    make_law,
    nesterov_update,
    validate_gains,
)
from hotmrac.lyapunov import hot_lyapunov
from oracles import hot_step_reference, nesterov_run

SCALAR = dict(theta=np.array([[2.0]]), star=np.array([[1.0]]), phi=np.array([1.0]))


def test_gd_leaves_estimate_when_eps_zero():
    theta = np.array([[0.4, -1.0]])
    np.testing.assert_array_equal(gd_update(GdLaw(1.0), theta, np.array([1.0, 2.0]), np.zeros(1)), theta)


def test_gd_one_step_identification():
    eps = (SCALAR["theta"] - SCALAR["star"]) @ SCALAR["phi"]
    nxt = GdLaw(1.0, 1.0).update(SCALAR["theta"], SCALAR["phi"], eps)
    assert nxt[0, 0] == 1.0
    V0 = np.sum((SCALAR["theta"] - SCALAR["star"]) ** 2)
    V1 = np.sum((nxt - SCALAR["star"]) ** 2)
    assert V0 - V1 == 1.0 * (2 - 1.0) * eps[0] ** 2 / 1.0


def test_hot_fixed_point():
    law = HotLaw(0.5, 0.5)
    theta = np.array([[0.3, 0.7]])
    np.testing.assert_array_equal(law.update(theta, np.array([1.0, -1.0]), np.zeros(1)), theta)
    np.testing.assert_array_equal(law.xi, theta)


def test_hot_worked_trace():
    law = HotLaw(0.5, 0.5, 1.0)
    eps = (SCALAR["theta"] - SCALAR["star"]) @ SCALAR["phi"]
    assert eps[0] == 1.0
    theta1 = law.update(SCALAR["theta"], SCALAR["phi"], eps)
    assert law.theta_bar[0, 0] == 1.75
    assert theta1[0, 0] == 1.875
    assert law.xi[0, 0] == 1.5625
    assert hot_lyapunov(theta1, law.xi, SCALAR["star"]) == 0.4140625


def test_hot_reset_and_explicit_state():
    law = HotLaw(0.5, 0.5)
    law.update(np.ones((1, 1)), np.ones(1), np.ones(1))
    law.reset()
    assert law.xi is None
    t, xi, bar = hot_update(law, np.ones((1, 1)), np.zeros((1, 1)), np.ones(1), np.zeros(1))
    # eps = 0: bar = 1, theta' = 1 - 0.5 (1 - 0) = 0.5, a posteriori gradient -0.5, xi' = 0.25
    assert (t[0, 0], xi[0, 0], bar[0, 0]) == (0.5, 0.25, 1.0)


def test_hot_matches_true_parameter_form(rng):
    for _ in range(50):
        b = rng.uniform(0.2, 1.5)
        q = 3
        theta, xi, star = rng.normal(size=(3, 2, q))
        phi = rng.normal(size=q)
        eps = (theta - star) @ phi
        t1, x1, _ = hot_update(HotLaw(0.1, b), theta, xi, phi, eps)
        t_ref, x_ref = hot_step_reference(theta, xi, phi, star, 0.1, b, 1.0)
        np.testing.assert_allclose(t1, t_ref, atol=1e-13)
        np.testing.assert_allclose(x1, x_ref, atol=1e-13)


def test_a_posteriori_error_identity(rng):
    for _ in range(100):
        g, b = rng.uniform(0.05, 0.8), rng.uniform(0.1, 1.5)
        theta, xi, star = rng.normal(size=(3, 2, 4))
        phi = rng.normal(size=4) * rng.uniform(0.2, 3)
        N = max(1.0, phi @ phi)
        eps = (theta - star) @ phi
        law = HotLaw.__new__(HotLaw)
        law.gamma, law.beta, law.mu = g, b, 1.0
        t1, _, bar = hot_update(law, theta, xi, phi, eps)
        lhs = (t1 - star) @ phi
        rhs = (1 - g * b * (phi @ phi) / N) * eps - b * (bar - xi) @ phi
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_nesterov_fixed_point_and_beta_one():
    star = np.array([[0.5, -1.0]])
    phi = np.array([1.0, 2.0])
    np.testing.assert_allclose(nesterov_update(star, star, phi, star, 0.5, 0.5, 1.0), star, atol=1e-15)
    theta, prev = np.array([[1.0, 1.0]]), np.array([[5.0, -3.0]])
    step = nesterov_update(theta, prev, phi, star, 0.7, 1.0, 1.0)
    eps = (theta - star) @ phi
    np.testing.assert_allclose(step, gd_update(GdLaw(0.7), theta, phi, eps), atol=1e-15)


def test_nesterov_against_independent_recursion(rng):
    star, theta0 = rng.normal(size=(2, 1, 3))
    phi = rng.normal(size=3)
    ref = nesterov_run(theta0, phi, star, 0.6, 0.4, 1.0, 20)
    prev = cur = theta0
    for k in range(1, 21):
        prev, cur = cur, nesterov_update(cur, prev, phi, star, 0.6, 0.4, 1.0)
        np.testing.assert_allclose(cur, ref[k], atol=1e-13)


@pytest.mark.parametrize(
    "law, gamma, beta, mode, ok, violation",
    [
        ("gd", 1.0, None, PROPOSITION, True, None),
        ("gd", 2.0, None, PROPOSITION, False, "0 < gamma < 2"),
        ("gd", 3.0, None, PROPOSITION, False, "0 < gamma < 2"),
        ("hot", 2.0, 1.0, PROPOSITION, False, "gamma < sqrt((2 - beta) / beta)"),
        ("hot", 0.5, 0.5, PROPOSITION, True, None),
        ("hot", 0.5, 2.0, PROPOSITION, False, "0 < beta < 2"),
        ("hot", 0.9, 0.3, PROPOSITION, False, "alpha > 0"),
        ("hot", 2.0, 1.0, EXTENDED, False, "gamma * beta < 1"),
        ("hot", 1.5, 0.6, EXTENDED, True, None),
        ("hot", 1.5, 0.6, PROPOSITION, False, "alpha > 0"),
        ("hot", 0.9, 0.3, EXTENDED, False, "d(gamma, beta) > 0"),
    ],
)
def test_validate_gains(law, gamma, beta, mode, ok, violation):
    rep = validate_gains(law, gamma, beta, 1.0, mode)
    assert rep.ok is ok
    assert rep.violation == violation


def test_validate_alpha_value():
    rep = validate_gains("hot", 0.5, 0.5, 1.0)
    assert rep.alpha == pytest.approx(1 - 0.125 / 0.6875, rel=1e-15)
    assert rep.alpha == pytest.approx(0.8182, abs=5e-5)


def test_validate_mu():
    assert validate_gains("gd", 1.0, mu=0.0).violation == "mu > 0"


def test_laws_reject_bad_gains():
    with pytest.raises(GainConditionError):
        GdLaw(2.5)
    with pytest.raises(GainConditionError):
        HotLaw(0.9, 0.3)
    with pytest.raises(ValueError):
        make_law({"law": "rls", "gamma": 1.0})
    assert make_law({"law": "hot", "gamma": 1.5, "beta": 0.6, "gain_mode": EXTENDED}).d_min > 0


def test_gamma_beta_product_below_one_in_proposition_mode(rng):
    for g, b in rng.uniform([0, 0], [2, 2], size=(5000, 2)):
        if validate_gains("hot", g, b).ok:
            assert g * b < 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["gd", "hot"]))
def test_permutation_equivariance(seed, kind):
    rng = np.random.default_rng(seed)
    n, m, steps = 3, 2, 30
    perm = rng.permutation(n)
    theta = rng.normal(size=(m, n))
    star = rng.normal(size=(m, n))
    law_a = make_law({"law": kind, "gamma": 0.8, "beta": 0.5})
    law_b = make_law({"law": kind, "gamma": 0.8, "beta": 0.5})
    ta, tb = theta, theta[:, perm]
    for _ in range(steps):
        x = rng.normal(size=n)
        ta = law_a.update(ta, x, (ta - star) @ x)
        tb = law_b.update(tb, x[perm], (tb - star[:, perm]) @ x[perm])
        np.testing.assert_allclose(tb, ta[:, perm], rtol=1e-12, atol=1e-13)


def test_proposition_gamma_cap_equivalence(rng):
    # gamma < sqrt((2 - b)/b) is the same as 2 - (1 + g^2) b > 0
    for g, b in rng.uniform([0, 0.01], [3, 1.99], size=(2000, 2)):
        assert (g < math.sqrt((2 - b) / b)) == (2 - (1 + g * g) * b > 0) or abs(g - math.sqrt((2 - b) / b)) < 1e-12
    assert hot_alpha(0.5, 0.5) == pytest.approx(0.8181818181818181, rel=1e-15)
