"""Field entangled with an environmental two-level spin.

The per-k state is lambda_up zeta_up (x) |up> + lambda_down zeta_down (x) |down>.
For observables that do not touch the spin, expectations at a pair of wave
vectors split into a |lambda|^2-weighted sum over the two branches of
products of single-point expectations.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import fock
from .covariance import (
    SIGMA0,
    CovarianceMatrix,
    assemble,
    coherent_amplitude,
    dgcz_terms,
    quadrature_moments,
    quadrature_ops,
)
from .errors import NoSignChange, WeightViolation

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SpinEntangledField:
    """Two spin branches, each a pair of states at (k, k')."""

    lambda_up: complex
    lambda_down: complex
    up: tuple
    down: tuple

    def __post_init__(self):
        w = abs(self.lambda_up) ** 2 + abs(self.lambda_down) ** 2
        if abs(w - 1.0) > 1e-12:
            raise WeightViolation(f"|lambda_up|^2 + |lambda_down|^2 = {w!r}")
        for pair in (self.up, self.down):
            if len(pair) != 2:
                raise ValueError("each branch needs a state at k and at k'")

    @property
    def weights(self):
        return abs(self.lambda_up) ** 2, abs(self.lambda_down) ** 2

    def branches(self):
        w_up, w_down = self.weights
        return ((w_up, self.up), (w_down, self.down))


def branch_expectation(s, a_op, b_op):
    """<A (x) B (x) I> with A acting at k and B at k'."""
    total = 0j
    for w, (zk, zkp) in s.branches():
        if w == 0.0:
            continue
        total += w * fock.expectation(a_op, zk) * fock.expectation(b_op, zkp)
    return complex(total)


def covariance_spin(s, mode="H"):
    """Covariance matrix from the branch rule.

    Each entry is sum_b |lambda_b|^2 <A>_b(k) <B>_b(k'); the single-point
    moments of (p, q) are computed once per branch state.
    """
    weights, mk, mkp = [], [], []
    for w, (zk, zkp) in s.branches():
        if w == 0.0:
            continue
        weights.append(w)
        mk.append(quadrature_moments(zk, mode))
        mkp.append(quadrature_moments(zkp, mode))
    return assemble(weights, mk, mkp)


def covariance_spin_entrywise(s, mode="H"):
    """Same matrix with all sixteen entries taken from :func:`branch_expectation`."""
    p, q = quadrature_ops(mode)
    one = fock.IDENTITY
    local = (p, q)
    mean = np.array(
        [branch_expectation(s, op, one).real for op in local]
        + [branch_expectation(s, one, op).real for op in local]
    )
    second = np.zeros((4, 4), dtype=np.complex128)
    for i, oi in enumerate(local):
        for j, oj in enumerate(local):
            second[i, j] = branch_expectation(s, oi * oj, one)
            second[2 + i, 2 + j] = branch_expectation(s, one, oi * oj)
            second[i, 2 + j] = branch_expectation(s, oi, oj)
            second[2 + j, i] = second[i, 2 + j]
    return CovarianceMatrix(second - np.outer(mean, mean), mean, second)


# --- coherent branches ------------------------------------------------------


def spin_y_vectors(s, mode="H"):
    ys = []
    for _, (zk, zkp) in s.branches():
        ak = coherent_amplitude(zk, mode)
        akp = coherent_amplitude(zkp, mode)
        ys.append(np.array([ak.imag, ak.real, akp.imag, akp.real]))
    return ys


def covariance_spin_coherent(s, mode="H"):
    """Closed-form covariance for coherent branches F + iG.

    Sigma = Sigma0 + 2 w_u (1 - w_u) Y_u Y_u^T + 2 w_d (1 - w_d) Y_d Y_d^T
            - 2 w_u w_d (Y_u Y_d^T + Y_d Y_u^T).

    Raises:
        NotCoherent: if any branch state fails the eigenvalue check.
    """
    w_u, w_d = s.weights
    y_u, y_d = spin_y_vectors(s, mode)
    sigma = (
        SIGMA0
        + 2 * w_u * (1 - w_u) * np.outer(y_u, y_u)
        + 2 * w_d * (1 - w_d) * np.outer(y_d, y_d)
        - 2 * w_u * w_d * (np.outer(y_u, y_d) + np.outer(y_d, y_u))
    )
    mean = SQRT2 * (w_u * y_u + w_d * y_d)
    second = SIGMA0 + 2 * w_u * np.outer(y_u, y_u) + 2 * w_d * np.outer(y_d, y_d)
    return CovarianceMatrix(sigma.astype(np.complex128), mean, second)


def dgcz_spin_coherent(s, mode="H"):
    """(Delta^2 p_-, Delta^2 q_+) in closed form; each is 1/2 plus a weighted variance."""
    w = np.array(s.weights)
    y_u, y_d = spin_y_vectors(s, mode)
    g_diff = np.array([y_u[0] - y_u[2], y_d[0] - y_d[2]])
    f_sum = np.array([y_u[1] + y_u[3], y_d[1] + y_d[3]])
    dp = 0.5 + w @ g_diff**2 - (w @ g_diff) ** 2
    dq = 0.5 + w @ f_sum**2 - (w @ f_sum) ** 2
    return float(dp), float(dq)


def coherent_spin_field(lambda_up, lambda_down, alphas_up, alphas_down, cutoff=fock.DEFAULT_CUTOFF):
    """Spin-entangled field with coherent H-mode branches (alpha_k, alpha_k')."""

    def pair(alphas):
        return tuple(fock.make_coherent(fock.CoherentAmplitudes(a, 0), cutoff) for a in alphas)

    return SpinEntangledField(lambda_up, lambda_down, pair(alphas_up), pair(alphas_down))


# --- one-photon branches ----------------------------------------------------


@dataclass(frozen=True)
class OnePhotonBranchSpec:
    """Amplitudes c of c|1> + gamma|0> for (up, k), (down, k), (up, k'), (down, k')."""

    c_up_k: complex
    c_down_k: complex
    c_up_kp: complex
    c_down_kp: complex

    def __post_init__(self):
        for c in self.values():
            if abs(c) > 1.0 + 1e-15:
                raise ValueError(f"|c| = {abs(c)!r} exceeds 1")

    def values(self):
        return (self.c_up_k, self.c_down_k, self.c_up_kp, self.c_down_kp)

    @staticmethod
    def gamma(c):
        return math.sqrt(max(0.0, 1.0 - abs(c) ** 2))

    @classmethod
    def symmetric(cls, u, v):
        """Re c = u everywhere, Im c = v at k and -v at k', same in both branches."""
        return cls(complex(u, v), complex(u, v), complex(u, -v), complex(u, -v))

    @classmethod
    def random(cls, rng, max_abs=1.0):
        r = max_abs * np.sqrt(rng.uniform(size=4))
        th = rng.uniform(0, 2 * np.pi, size=4)
        return cls(*(r * np.exp(1j * th)))


def one_photon_state(c, cutoff=2):
    """c|1> + gamma|0> in the H mode with gamma = sqrt(1 - |c|^2) >= 0."""
    return fock.from_coefficients({(0, 0): OnePhotonBranchSpec.gamma(c), (1, 0): c}, cutoff)


def one_photon_field(spec, cutoff=2):
    lam = 1 / SQRT2
    up = (one_photon_state(spec.c_up_k, cutoff), one_photon_state(spec.c_up_kp, cutoff))
    down = (one_photon_state(spec.c_down_k, cutoff), one_photon_state(spec.c_down_kp, cutoff))
    return SpinEntangledField(lam, lam, up, down)


def dgcz_one_photon(spec):
    """Closed-form one-photon DGCZ inequality as (lhs, rhs, lhs - rhs).

    The inequality is declared satisfied when the margin is non-negative.
    """
    cuk, cdk, cukp, cdkp = spec.values()
    g = OnePhotonBranchSpec.gamma
    lhs = sum(0.5 * abs(c) ** 2 + 0.5 * abs(c) ** 4 for c in spec.values())

    def same(a, b):
        return a.real * b.real + a.imag * b.imag

    def cross(a, b):
        return a.real * b.real - a.imag * b.imag

    rhs = (
        g(cuk) * g(cdk) * same(cuk, cdk)
        + g(cukp) * g(cdkp) * same(cukp, cdkp)
        + g(cuk) * g(cdkp) * cross(cuk, cdkp)
        + g(cdk) * g(cukp) * cross(cdk, cukp)
    )
    return lhs, rhs, lhs - rhs


def dgcz_one_photon_direct(spec, cutoff=2):
    """Delta^2 p_- + Delta^2 q_+ - 1 evaluated from branch expectations."""
    dp, dq = dgcz_terms(covariance_spin(one_photon_field(spec, cutoff)))
    return dp + dq - 1.0


def same_branch_cross_term(spec):
    """sum_b gamma_b(k) gamma_b(k') (Re c_b(k) Re c_b(k') - Im c_b(k) Im c_b(k')).

    The direct and closed-form quantities obey
    2 * direct == margin + same_branch_cross_term.
    """
    g = OnePhotonBranchSpec.gamma
    total = 0.0
    for a, b in ((spec.c_up_k, spec.c_up_kp), (spec.c_down_k, spec.c_down_kp)):
        total += g(a) * g(b) * (a.real * b.real - a.imag * b.imag)
    return total


def margin_relation(specs):
    """Measure how the closed-form margin relates to the direct value.

    Returns a dict with the least-squares slope of direct against margin,
    the largest residual of that linear fit, the sign agreement rate, and the
    largest deviation from ``2 direct = margin + cross term``.
    """
    margins = np.array([dgcz_one_photon(s)[2] for s in specs])
    direct = np.array([dgcz_one_photon_direct(s) for s in specs])
    cross = np.array([same_branch_cross_term(s) for s in specs])
    slope = float(margins @ direct / (margins @ margins)) if np.any(margins) else float("nan")
    return {
        "n": len(specs),
        "slope": slope,
        "fit_residual_max": float(np.max(np.abs(direct - slope * margins))),
        "sign_agreement": float(np.mean(np.sign(margins) == np.sign(direct))),
        "identity_residual_max": float(np.max(np.abs(2 * direct - margins - cross))),
        "min_direct": float(np.min(direct)),
        "min_margin": float(np.min(margins)),
    }


# --- families and threshold search -----------------------------------------

FAMILIES = {
    "u=v": lambda t: OnePhotonBranchSpec.symmetric(t, t),
    "v=0": lambda t: OnePhotonBranchSpec.symmetric(t, 0.0),
    "u=0": lambda t: OnePhotonBranchSpec.symmetric(0.0, t),
}


def family_spec(family, t):
    if callable(family):
        return family(t)
    return FAMILIES[family](t)


def threshold_scan(family, lo, hi, tol=1e-9, fn=None, max_iter=200):
    """Bisection for the parameter where the DGCZ margin changes sign.

    ``fn`` maps a spec to the quantity whose zero is sought; the default is
    the closed-form margin.
    """
    fn = fn or (lambda spec: dgcz_one_photon(spec)[2])
    f_lo = fn(family_spec(family, lo))
    f_hi = fn(family_spec(family, hi))
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoSignChange(f"no sign change on [{lo}, {hi}] ({f_lo:.3e}, {f_hi:.3e})")
    a, b = lo, hi
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        f_mid = fn(family_spec(family, mid))
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            a, f_lo = mid, f_mid
        else:
            b = mid
        if b - a < tol * 1e-3:
            break
    return 0.5 * (a + b)


# --- dense tri-partite oracle -----------------------------------------------


def dense_branch_expectation(s, a_op, b_op, pad=None):
    """<A (x) B (x) I> in the pure state on Fock(k) (x) Fock(k') (x) spin.

    Operators are expanded to explicit (sparse) matrices on a space padded by
    their degree; the spin is an explicit two-level factor.
    """
    a_op, b_op = fock._as_operator(a_op), fock._as_operator(b_op)
    cut = max(z.cutoff for _, pair in s.branches() for z in pair)
    cut += pad if pad is not None else max(a_op.degree, b_op.degree)
    spin = np.eye(2)
    dense_a = sparse.csr_matrix(fock.dense_operator(a_op, cut))
    dense_b = sparse.csr_matrix(fock.dense_operator(b_op, cut))
    psi = 0
    for lam, (zk, zkp), e in (
        (s.lambda_up, s.up, spin[0]),
        (s.lambda_down, s.down, spin[1]),
    ):
        psi = psi + lam * np.kron(np.kron(zk.padded(cut).flat(), zkp.padded(cut).flat()), e)
    big = sparse.kron(sparse.kron(dense_a, dense_b), sparse.identity(2), format="csr")
    return complex(np.vdot(psi, big @ psi))


def dense_covariance_spin(s, mode="H"):
    p, q = quadrature_ops(mode)
    one = fock.IDENTITY
    local = (p, q)
    mean = np.array(
        [dense_branch_expectation(s, op, one).real for op in local]
        + [dense_branch_expectation(s, one, op).real for op in local]
    )
    second = np.zeros((4, 4), dtype=np.complex128)
    for i, oi in enumerate(local):
        for j, oj in enumerate(local):
            second[i, j] = dense_branch_expectation(s, oi * oj, one)
            second[2 + i, 2 + j] = dense_branch_expectation(s, one, oi * oj)
            second[i, 2 + j] = dense_branch_expectation(s, oi, oj)
            second[2 + j, i] = dense_branch_expectation(s, oi, oj)
    return CovarianceMatrix(second - np.outer(mean, mean), mean, second)
