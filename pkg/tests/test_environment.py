import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqed import covariance as cv
from rqed import environment as env
from rqed import fock
from rqed.errors import NoSignChange, NotCoherent, WeightViolation

R2 = 1 / math.sqrt(2)


def random_pure(rng, cutoff=3):
    z = rng.normal(size=(cutoff + 1, cutoff + 1)) + 1j * rng.normal(size=(cutoff + 1, cutoff + 1))
    return fock.FockState(z / np.linalg.norm(z))


def random_spin_field(rng, cutoff=3):
    th = rng.uniform(0, math.pi / 2)
    lam_u = math.cos(th) * np.exp(1j * rng.uniform(0, 2 * math.pi))
    lam_d = math.sin(th)
    return env.SpinEntangledField(
        lam_u,
        lam_d,
        (random_pure(rng, cutoff), random_pure(rng, cutoff)),
        (random_pure(rng, cutoff), random_pure(rng, cutoff)),
    )


def random_coherent_field(rng, max_abs=1.2):
    th = rng.uniform(0, math.pi / 2)
    alphas = max_abs * (rng.uniform(-1, 1, size=(2, 2)) + 1j * rng.uniform(-1, 1, size=(2, 2))) / math.sqrt(2)
    return env.coherent_spin_field(math.cos(th), math.sin(th), alphas[0], alphas[1])


# --- branch rule ------------------------------------------------------------


def test_weights_must_be_normalized():
    vac = fock.vacuum(2)
    with pytest.raises(WeightViolation):
        env.SpinEntangledField(0.5, 0.5, (vac, vac), (vac, vac))


def test_identity_expectation_is_one():
    s = random_spin_field(np.random.default_rng(0))
    assert env.branch_expectation(s, fock.IDENTITY, fock.IDENTITY) == pytest.approx(1.0, abs=1e-14)


def test_single_branch_reduces_to_product():
    rng = np.random.default_rng(1)
    zk, zkp = random_pure(rng), random_pure(rng)
    s = env.SpinEntangledField(1.0, 0.0, (zk, zkp), (random_pure(rng), random_pure(rng)))
    want = fock.expectation(fock.A_H, zk) * fock.expectation(fock.AD_V, zkp)
    assert env.branch_expectation(s, fock.A_H, fock.AD_V) == pytest.approx(want, abs=1e-14)


def test_branch_rule_matches_tripartite_oracle():
    rng = np.random.default_rng(2)
    ops = [fock.A_H, fock.AD_H * fock.A_V, fock.NUMBER, fock.A_H * fock.A_H]
    for _ in range(10):
        s = env.one_photon_field(env.OnePhotonBranchSpec.random(rng))
        for a in ops:
            for b in ops:
                got = env.branch_expectation(s, a, b)
                assert got == pytest.approx(env.dense_branch_expectation(s, a, b), abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), cutoff=st.integers(1, 6))
def test_covariance_spin_matches_dense_oracle(seed, cutoff):
    s = random_spin_field(np.random.default_rng(seed), cutoff)
    a = env.covariance_spin(s)
    b = env.dense_covariance_spin(s)
    c = env.covariance_spin_entrywise(s)
    assert np.max(np.abs(a.sigma - b.sigma)) < 1e-10
    assert np.max(np.abs(c.sigma - b.sigma)) < 1e-10


# --- coherent branches ------------------------------------------------------


def test_single_branch_is_sigma0():
    s = env.coherent_spin_field(1.0, 0.0, (0.4 + 0.3j, -0.2j), (1.0, 1.0))
    cov = env.covariance_spin_coherent(s)
    assert np.max(np.abs(cov.sigma - cv.SIGMA0)) < 1e-12
    assert env.dgcz_spin_coherent(s) == pytest.approx((0.5, 0.5), abs=1e-12)


def test_equal_y_is_sigma0():
    s = env.coherent_spin_field(R2, R2, (0.4 + 0.3j, -0.2j), (0.4 + 0.3j, -0.2j))
    assert np.max(np.abs(env.covariance_spin_coherent(s).sigma - cv.SIGMA0)) < 1e-12


def test_three_quarter_example():
    # G_up(k) = 1, everything else zero, equal weights
    s = env.coherent_spin_field(R2, R2, (1j, 0.0), (0.0, 0.0))
    dp, dq = env.dgcz_spin_coherent(s)
    assert dp == pytest.approx(0.75, abs=1e-14)
    assert dq == pytest.approx(0.5, abs=1e-14)
    oracle = cv.dgcz_terms(env.covariance_spin(s))
    assert oracle == pytest.approx((0.75, 0.5), abs=1e-12)


def test_equal_g_differences_give_half():
    s = env.coherent_spin_field(0.6, 0.8, (0.3 + 0.9j, -0.5 + 0.4j), (1.1 + 0.7j, 0.2 + 0.2j))
    dp, _ = env.dgcz_spin_coherent(s)
    assert dp == pytest.approx(0.5, abs=1e-12)


def test_not_coherent_rejected():
    one = fock.make_number_state(1, 0, 4)
    s = env.SpinEntangledField(1.0, 0.0, (one, one), (one, one))
    with pytest.raises(NotCoherent):
        env.covariance_spin_coherent(s)


def test_lambda_down_zero_reduces_to_single_field():
    rng = np.random.default_rng(5)
    zk, zkp = random_pure(rng, 4), random_pure(rng, 4)
    s = env.SpinEntangledField(1.0, 0.0, (zk, zkp), (random_pure(rng, 4), random_pure(rng, 4)))
    single = cv.covariance(cv.SeparableEnsemble([(1.0, zk, zkp)]))
    assert np.max(np.abs(env.covariance_spin(s).sigma - single.sigma)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_closed_form_matches_branch_rule(seed):
    s = random_coherent_field(np.random.default_rng(seed))
    a = env.covariance_spin_coherent(s)
    b = env.covariance_spin(s)
    assert np.max(np.abs(a.sigma - b.sigma)) < 1e-10
    dp, dq = env.dgcz_spin_coherent(s)
    assert (dp, dq) == pytest.approx(cv.dgcz_terms(b), abs=1e-10)
    assert dp >= 0.5 - 1e-12 and dq >= 0.5 - 1e-12


def test_convexity_bound_many_draws():
    rng = np.random.default_rng(8)
    worst = 1.0
    for _ in range(2000):
        worst = min(worst, *env.dgcz_spin_coherent(random_coherent_field(rng, 1.9)))
    assert worst >= 0.5 - 1e-12


# --- one photon -------------------------------------------------------------


def test_spec_gamma_identity():
    rng = np.random.default_rng(3)
    for c in env.OnePhotonBranchSpec.random(rng).values():
        assert env.OnePhotonBranchSpec.gamma(c) ** 2 + abs(c) ** 2 == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        env.OnePhotonBranchSpec(1.1, 0, 0, 0)


def test_vacuum_branches_give_equality():
    spec = env.OnePhotonBranchSpec(0, 0, 0, 0)
    assert env.dgcz_one_photon(spec) == (0.0, 0.0, 0.0)
    assert env.dgcz_one_photon_direct(spec) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "family, boundary",
    [("u=v", math.sqrt(1 / 6)), ("v=0", 1 / math.sqrt(3)), ("u=0", 1 / math.sqrt(3))],
)
def test_threshold_scan(family, boundary):
    assert env.threshold_scan(family, 0.05, 0.7) == pytest.approx(boundary, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(-1, 1), v=st.floats(-1, 1))
def test_margin_sign_is_intensity_threshold(u, v):
    r2 = u * u + v * v
    # r = 0 is the vacuum equality case
    if r2 > 1 or r2 < 1e-12 or abs(r2 - 1 / 3) < 1e-9:
        return
    margin = env.dgcz_one_photon(env.OnePhotonBranchSpec.symmetric(u, v))[2]
    assert (margin >= 0) == (r2 >= 1 / 3)


def test_small_intensity_margin_negative():
    lhs, rhs, margin = env.dgcz_one_photon(env.OnePhotonBranchSpec.symmetric(0.3, 0.3))
    assert margin == pytest.approx(lhs - rhs)
    assert margin < 0


def test_direct_vanishes_at_family_boundary():
    b = math.sqrt(1 / 6)
    assert env.dgcz_one_photon_direct(env.OnePhotonBranchSpec.symmetric(b, b)) == pytest.approx(0.0, abs=1e-10)


def test_direct_matches_tripartite_oracle():
    rng = np.random.default_rng(6)
    for _ in range(20):
        spec = env.OnePhotonBranchSpec.random(rng)
        dp, dq = cv.dgcz_terms(env.dense_covariance_spin(env.one_photon_field(spec)))
        assert env.dgcz_one_photon_direct(spec) == pytest.approx(dp + dq - 1, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_direct_margin_identity(seed):
    spec = env.OnePhotonBranchSpec.random(np.random.default_rng(seed))
    direct = env.dgcz_one_photon_direct(spec)
    margin = env.dgcz_one_photon(spec)[2]
    assert 2 * direct == pytest.approx(margin + env.same_branch_cross_term(spec), abs=1e-12)
    # the branch rule describes a separable mixture, so the direct value cannot go negative
    assert direct >= -1e-12


def test_margin_relation_report():
    rng = np.random.default_rng(7)
    rel = env.margin_relation([env.OnePhotonBranchSpec.random(rng) for _ in range(500)])
    assert rel["n"] == 500
    assert rel["identity_residual_max"] < 1e-12
    assert rel["min_direct"] >= -1e-12
    assert 0 < rel["sign_agreement"] <= 1


def test_no_sign_change():
    with pytest.raises(NoSignChange):
        env.threshold_scan("u=v", 0.45, 0.7)
