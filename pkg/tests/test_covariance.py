import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqed import covariance as cv
from rqed import fock
from rqed.errors import NotCoherent, WeightViolation

SQRT2 = math.sqrt(2)


def coherent(alpha, cutoff=24):
    return fock.make_coherent((alpha, 0.0), cutoff)


def random_low_photon(rng, cutoff=6, photons=3):
    amps = np.zeros((cutoff + 1, cutoff + 1), complex)
    z = rng.normal(size=(photons + 1, photons + 1)) + 1j * rng.normal(size=(photons + 1, photons + 1))
    amps[: photons + 1, : photons + 1] = z
    return fock.FockState(amps / np.linalg.norm(amps))


def random_branch_state(rng, cutoff):
    # coherent branches only where the tail rule admits them
    if cutoff >= 12 and rng.uniform() < 0.5:
        r = rng.uniform(0, 1.9 if cutoff >= 24 else 0.5)
        return fock.make_coherent((r * np.exp(1j * rng.uniform(0, 2 * math.pi)), 0.0), cutoff)
    return random_low_photon(rng, cutoff, min(3, cutoff))


def random_ensemble(rng, cutoff=6, max_branches=4):
    n = rng.integers(1, max_branches + 1)
    probs = rng.dirichlet(np.ones(n))
    return cv.SeparableEnsemble(
        [(p, random_branch_state(rng, cutoff), random_branch_state(rng, cutoff)) for p in probs]
    )


# --- quadratures ------------------------------------------------------------


def test_q_mean_on_real_coherent():
    p, q = cv.quadrature_ops()
    s = coherent(0.8)
    assert fock.expectation(q, s) == pytest.approx(SQRT2 * 0.8, abs=1e-12)
    assert fock.expectation(p, s) == pytest.approx(0.0, abs=1e-12)


def test_p_mean_on_imaginary_coherent():
    p, _ = cv.quadrature_ops()
    assert fock.expectation(p, coherent(0.6j)) == pytest.approx(SQRT2 * 0.6, abs=1e-12)


@pytest.mark.parametrize("mode", ["H", "V"])
def test_canonical_commutator(mode):
    p, q = cv.quadrature_ops(mode)
    s = random_low_photon(np.random.default_rng(1), 6, 5)
    assert fock.expectation(p * q - q * p, s) == pytest.approx(-1j, abs=1e-12)


def test_pminus_qplus_commute():
    # [q+, p-] = ([q, p] - [q, p]) / 2 = 0 on the two-point space
    cut = 5
    p1, q1 = cv._single_mode_pq(cut + 2)
    eye = np.eye(cut + 3)
    pm = (np.kron(p1, eye) - np.kron(eye, p1)) / SQRT2
    qp = (np.kron(q1, eye) + np.kron(eye, q1)) / SQRT2
    comm = qp @ pm - pm @ qp
    # restrict to states away from the truncation edge
    keep = [i * (cut + 3) + j for i in range(cut) for j in range(cut)]
    assert np.max(np.abs(comm[np.ix_(keep, keep)])) < 1e-12


# --- covariance -------------------------------------------------------------


def test_single_coherent_branch_gives_sigma0():
    ens = cv.SeparableEnsemble([(1.0, coherent(0.7 - 0.3j), coherent(1.2 + 0.5j))])
    cov = cv.covariance(ens)
    assert np.max(np.abs(cov.sigma - cv.SIGMA0)) < 1e-12
    assert cv.dgcz_terms(cov) == pytest.approx((0.5, 0.5), abs=1e-12)
    assert cv.sigma0_discrepancy(ens) == 0.0


def test_coherent_mixture_closed_form():
    alphas = [(0.3 + 0.2j, -0.4j), (1.1, 0.5 - 0.5j), (-0.6 + 0.9j, 0.2)]
    probs = [0.2, 0.5, 0.3]
    ens = cv.SeparableEnsemble([(p, coherent(a), coherent(b)) for p, (a, b) in zip(probs, alphas)])
    cov = cv.covariance(ens)
    ys = [cv.y_vector(a, b) for a, b in alphas]
    mean, second, sigma, excess = cv.coherent_closed_form(probs, ys)
    assert np.allclose(cov.sigma, sigma, atol=1e-12)
    assert np.allclose(cov.mean, mean, atol=1e-12)
    assert np.allclose(cov.second_moments, second, atol=1e-12)
    assert cv.sigma0_discrepancy(ens) > 1e-3
    assert np.max(np.abs(excess)) == pytest.approx(cv.sigma0_discrepancy(ens))


def test_equal_y_mixture_is_sigma0():
    ens = cv.SeparableEnsemble([(0.4, coherent(0.5), coherent(0.2j)), (0.6, coherent(0.5), coherent(0.2j))])
    assert np.max(np.abs(cv.covariance(ens).sigma - cv.SIGMA0)) < 1e-12


def test_one_photon_mixture_against_dense_oracle():
    one = fock.make_number_state(1, 0, 4)
    vac = fock.vacuum(4)
    ens = cv.SeparableEnsemble([(0.5, one, vac), (0.5, vac, vac)])
    cov = cv.covariance(ens)
    oracle = cv.dense_covariance(ens)
    assert np.allclose(cov.sigma, oracle.sigma, atol=1e-12)
    # by hand: <p^2> = <q^2> = 3/2 on |1>, 1/2 on vacuum
    assert cov.sigma[0, 0] == pytest.approx(1.0)
    assert cov.sigma[2, 2] == pytest.approx(0.5)


def test_weights_validated():
    vac = fock.vacuum(2)
    with pytest.raises(WeightViolation):
        cv.SeparableEnsemble([(0.5, vac, vac)])
    with pytest.raises(WeightViolation):
        cv.SeparableEnsemble([(1.5, vac, vac), (-0.5, vac, vac)])


def test_vacuum_dgcz_is_one():
    vac = fock.vacuum(6)
    assert cv.dgcz_sum(cv.covariance(cv.SeparableEnsemble([(1.0, vac, vac)]))) == pytest.approx(1.0)


def test_symmetrized_view_and_check():
    ens = random_ensemble(np.random.default_rng(4), 12)
    cov = cv.covariance(ens)
    assert cov.check()
    sym = cov.symmetrized()
    assert np.allclose(sym, sym.T)
    assert np.allclose(sym, (cov.sigma + cov.sigma.T).real / 2)


def test_coherent_amplitude_rejects_fock():
    with pytest.raises(NotCoherent):
        cv.coherent_amplitude(fock.make_number_state(1, 0, 4))
    ens = cv.SeparableEnsemble([(1.0, fock.make_number_state(1, 0, 4), fock.vacuum(4))])
    assert cv.sigma0_discrepancy(ens) is None


# --- properties -------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_separable_bound_and_commutator_blocks(seed):
    rng = np.random.default_rng(seed)
    cov = cv.covariance(random_ensemble(rng, 12))
    assert cv.dgcz_sum(cov) >= 1 - 1e-10
    b1, b2 = cov.commutator_blocks()
    assert b1 == pytest.approx(-1j, abs=1e-12)
    assert b2 == pytest.approx(-1j, abs=1e-12)
    assert cov.check(1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), cutoff=st.sampled_from([2, 4, 6, 12]))
def test_dense_oracle_equivalence(seed, cutoff):
    rng = np.random.default_rng(seed)
    ens = random_ensemble(rng, cutoff)
    a = cv.covariance(ens)
    b = cv.dense_covariance(ens)
    assert np.max(np.abs(a.sigma - b.sigma)) < 1e-10
    assert np.max(np.abs(a.mean - b.mean)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), dr=st.floats(-0.4, 0.4), di=st.floats(-0.4, 0.4))
def test_displacement_leaves_sigma(seed, dr, di):
    rng = np.random.default_rng(seed)
    n = 3
    probs = rng.dirichlet(np.ones(n))
    ak = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    akp = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    delta = complex(dr, di)
    base = cv.SeparableEnsemble([(p, coherent(a), coherent(b)) for p, a, b in zip(probs, ak, akp)])
    moved = cv.SeparableEnsemble(
        [(p, coherent(a + delta), coherent(b)) for p, a, b in zip(probs, ak, akp)]
    )
    c0, c1 = cv.covariance(base), cv.covariance(moved)
    assert np.max(np.abs(c0.sigma - c1.sigma)) < 1e-10
    shift = SQRT2 * np.array([delta.imag, delta.real])
    assert np.allclose(c1.mean[:2] - c0.mean[:2], shift, atol=1e-10)


def test_separable_bound_many_draws():
    rng = np.random.default_rng(99)
    worst = min(cv.dgcz_sum(cv.covariance(random_ensemble(rng, 24))) for _ in range(2000))
    assert worst >= 1 - 1e-10
