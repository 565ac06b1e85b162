"""Covariance matrix of quadratures at two wave vectors and the DGCZ sum.

The quadrature vector is X = (p (x) I, q (x) I, I (x) p, I (x) q) with
q = (a + a^+)/sqrt2 and p = i (a^+ - a)/sqrt2, so [p, q] = -i.  The matrix
Sigma_ij = <X_i X_j> - <X_i><X_j> is kept unsymmetrized and therefore complex
Hermitian.  A polarized beam is modelled by picking one polarization mode of
the two-mode states (``mode="H"`` by default).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import fock
from .errors import NotCoherent, WeightViolation

SQRT2 = math.sqrt(2.0)

SIGMA0 = 0.5 * np.array(
    [
        [1, -1j, 0, 0],
        [1j, 1, 0, 0],
        [0, 0, 1, -1j],
        [0, 0, 1j, 1],
    ],
    dtype=np.complex128,
)

_LADDERS = {"H": (fock.A_H, fock.AD_H), "V": (fock.A_V, fock.AD_V)}


def quadrature_ops(mode="H"):
    """(p, q) for one polarization mode."""
    a, ad = _LADDERS[mode]
    q = (a + ad) / SQRT2
    p = 1j * (ad - a) / SQRT2
    return p, q


@dataclass(frozen=True)
class Branch:
    prob: float
    sigma: fock.FockState
    tau: fock.FockState


class SeparableEnsemble:
    """Classical mixture sum_n p_n sigma_n (x) tau_n of pure per-k states."""

    def __init__(self, branches, tol=1e-12):
        self.branches = tuple(b if isinstance(b, Branch) else Branch(*b) for b in branches)
        if not self.branches:
            raise ValueError("ensemble needs at least one branch")
        probs = np.array([b.prob for b in self.branches])
        if np.any(probs < 0):
            raise WeightViolation("branch probabilities must be non-negative")
        if abs(math.fsum(probs) - 1.0) > tol:
            raise WeightViolation(f"branch probabilities sum to {math.fsum(probs)!r}")

    def __len__(self):
        return len(self.branches)


@dataclass(frozen=True)
class QuadratureMoments:
    """First and second moments of (p, q) in one pure state, in that order."""

    mean: np.ndarray  # (<p>, <q>), real
    second: np.ndarray  # [[<pp>, <pq>], [<qp>, <qq>]]


def quadrature_moments(s, mode="H"):
    """Moments of (p, q) from two operator applications and inner products."""
    p, q = quadrature_ops(mode)
    big = s.padded(s.cutoff + 1)
    vecs = [fock.apply(p, big).flat(), fock.apply(q, big).flat()]
    psi = big.flat()
    mean = np.array([np.vdot(psi, v).real for v in vecs])
    second = np.array([[np.vdot(u, v) for v in vecs] for u in vecs])
    return QuadratureMoments(mean, second)


@dataclass(frozen=True)
class CovarianceMatrix:
    sigma: np.ndarray
    mean: np.ndarray
    second_moments: np.ndarray

    def symmetrized(self):
        """Real symmetric view (Sigma + Sigma^T)/2."""
        return (0.5 * (self.sigma + self.sigma.T)).real

    def check(self, tol=1e-12):
        s = self.sigma
        if np.max(np.abs(s - s.conj().T)) > tol:
            raise ValueError("covariance matrix is not Hermitian")
        if np.any(np.diag(s).real < -tol):
            raise ValueError("negative variance on the diagonal")
        return True

    def commutator_blocks(self):
        """(Sigma_12 - Sigma_21, Sigma_34 - Sigma_43); both equal -i."""
        s = self.sigma
        return s[0, 1] - s[1, 0], s[2, 3] - s[3, 2]


def assemble(weights, moments_k, moments_kp):
    """Covariance from per-branch moments and mixture weights."""
    m = np.zeros((4, 4), dtype=np.complex128)
    mean = np.zeros(4)
    for w, mk, mkp in zip(weights, moments_k, moments_kp):
        m[:2, :2] += w * mk.second
        m[2:, 2:] += w * mkp.second
        cross = w * np.outer(mk.mean, mkp.mean)
        m[:2, 2:] += cross
        m[2:, :2] += cross.T
        mean[:2] += w * mk.mean
        mean[2:] += w * mkp.mean
    return CovarianceMatrix(m - np.outer(mean, mean), mean, m)


def covariance(ensemble, mode="H"):
    weights = [b.prob for b in ensemble.branches]
    mk = [quadrature_moments(b.sigma, mode) for b in ensemble.branches]
    mkp = [quadrature_moments(b.tau, mode) for b in ensemble.branches]
    return assemble(weights, mk, mkp)


def dgcz_terms(cov):
    """(Delta^2 p_-, Delta^2 q_+) from the covariance matrix."""
    s = cov.sigma if isinstance(cov, CovarianceMatrix) else np.asarray(cov)
    dp = 0.5 * s[0, 0] + 0.5 * s[2, 2] - 0.5 * (s[0, 2] + s[2, 0])
    dq = 0.5 * s[1, 1] + 0.5 * s[3, 3] + 0.5 * (s[1, 3] + s[3, 1])
    return float(dp.real), float(dq.real)


def dgcz_sum(cov):
    dp, dq = dgcz_terms(cov)
    return dp + dq


# --- coherent branches ------------------------------------------------------


def y_vector(alpha_k, alpha_kp):
    """Y = (G(k), F(k), G(k'), F(k')) for amplitudes F + iG."""
    return np.array([alpha_k.imag, alpha_k.real, alpha_kp.imag, alpha_kp.real])


def coherent_closed_form(probs, ys):
    """Closed forms for a mixture of coherent branches.

    Returns ``(mean, second_moments, sigma, excess)`` where the second
    moments are Sigma0 + 2 sum p Y Y^T, the mean sqrt2 sum p Y and ``excess``
    the part of Sigma beyond Sigma0, 2 (sum p Y Y^T - (sum p Y)(sum p Y)^T).
    """
    probs = np.asarray(probs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64).reshape(len(probs), 4)
    ybar = probs @ ys
    yy = np.einsum("n,ni,nj->ij", probs, ys, ys)
    second = SIGMA0 + 2 * yy
    mean = SQRT2 * ybar
    excess = 2 * (yy - np.outer(ybar, ybar))
    return mean, second, SIGMA0 + excess, excess


def coherent_amplitude(s, mode="H", tol=1e-8):
    """Amplitude of a coherent state, verified via the eigenvalue residual."""
    (ah, av), (rh, rv) = fock.coherent_residual(s)
    if rh >= tol or rv >= tol:
        raise NotCoherent(f"eigen-residuals ({rh:.3e}, {rv:.3e})")
    return ah if mode == "H" else av


def sigma0_discrepancy(ensemble, mode="H"):
    """Size of the Sigma - Sigma0 term for an all-coherent ensemble, else None."""
    try:
        ys = [
            y_vector(coherent_amplitude(b.sigma, mode), coherent_amplitude(b.tau, mode))
            for b in ensemble.branches
        ]
    except NotCoherent:
        return None
    _, _, _, excess = coherent_closed_form([b.prob for b in ensemble.branches], ys)
    return float(np.max(np.abs(excess)))


# --- dense oracle -----------------------------------------------------------


def _single_mode_pq(cutoff):
    a = fock.single_mode_annihilator(cutoff)
    ad = a.conj().T
    return 1j * (ad - a) / SQRT2, (a + ad) / SQRT2


def reduced_density(s, mode="H", cutoff=None):
    """Single-mode density matrix of one polarization (partial trace of the other)."""
    cutoff = s.cutoff if cutoff is None else cutoff
    amps = s.padded(cutoff).amplitudes
    if mode == "V":
        amps = amps.T
    return amps @ amps.conj().T


def dense_covariance(ensemble, mode="H", pad=2):
    """Oracle: trace against the two-point density matrix sum_n p_n rho_n (x) rho'_n.

    The per-point states are reduced to the chosen polarization by partial
    trace, and every quadrature is an explicit matrix on the padded space,
    so nothing here shares code with the ladder-word path.
    """
    cutoff = max(max(b.sigma.cutoff, b.tau.cutoff) for b in ensemble.branches) + pad
    p1, q1 = _single_mode_pq(cutoff)
    eye = np.eye(cutoff + 1)
    xs = [np.kron(p1, eye), np.kron(q1, eye), np.kron(eye, p1), np.kron(eye, q1)]
    rho = sum(
        b.prob * np.kron(reduced_density(b.sigma, mode, cutoff), reduced_density(b.tau, mode, cutoff))
        for b in ensemble.branches
    )
    mean = np.array([np.trace(rho @ x).real for x in xs])
    second = np.array([[np.trace(rho @ xi @ xj) for xj in xs] for xi in xs])
    return CovarianceMatrix(second - np.outer(mean, mean), mean, second)
