"""Truncated two-mode harmonic oscillator.

States live on the number basis |m, n> with ``0 <= m, n <= cutoff`` where
``m`` counts horizontally and ``n`` vertically polarized photons.  The fast
path acts with ladder operators by shifting and scaling the amplitude tensor;
:func:`dense_operator` builds the same operators as explicit matrices and is
kept around as an independent oracle.
"""

from dataclasses import dataclass
from numbers import Number

import numpy as np
from scipy.special import gammainc

from .errors import CutoffExceeded, CutoffTooSmall, NotNormalized

DEFAULT_CUTOFF = 24
TOL_NORM = 1e-12
TAIL_TOL = 1e-12

LADDER_KINDS = ("create_H", "create_V", "annihilate_H", "annihilate_V")
_ADJOINT = {
    "create_H": "annihilate_H",
    "annihilate_H": "create_H",
    "create_V": "annihilate_V",
    "annihilate_V": "create_V",
}


class FockState:
    """Immutable amplitude tensor over the truncated basis |m, n>.

    Args:
        amplitudes: complex array of shape ``(cutoff + 1, cutoff + 1)``.
        dropped_mass: squared norm discarded by truncation while this state
            was produced (0 for states built directly).
    """

    __slots__ = ("_amps", "dropped_mass")

    def __init__(self, amplitudes, dropped_mass=0.0):
        amps = np.array(amplitudes, dtype=np.complex128)
        if amps.ndim != 2 or amps.shape[0] != amps.shape[1] or amps.shape[0] < 1:
            raise ValueError(f"amplitudes must be a square 2-d array, got shape {amps.shape}")
        amps.flags.writeable = False
        self._amps = amps
        self.dropped_mass = float(dropped_mass)

    @property
    def amplitudes(self):
        return self._amps

    @property
    def cutoff(self):
        return self._amps.shape[0] - 1

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self._amps) ** 2)))

    def is_normalized(self, tol=TOL_NORM):
        return abs(self.norm() ** 2 - 1.0) <= tol

    def normalized(self):
        nrm = self.norm()
        if nrm == 0.0:
            raise NotNormalized("cannot normalize the zero vector")
        return FockState(self._amps / nrm, self.dropped_mass)

    def inner(self, other):
        """Return <self|other>."""
        _check_same_cutoff(self, other)
        return complex(np.vdot(self._amps, other._amps))

    def amplitude(self, m, n):
        if m > self.cutoff or n > self.cutoff:
            return 0j
        return complex(self._amps[m, n])

    def padded(self, cutoff):
        """Embed into a larger truncated space."""
        if cutoff < self.cutoff:
            raise CutoffExceeded(f"cannot shrink cutoff {self.cutoff} to {cutoff}")
        out = np.zeros((cutoff + 1, cutoff + 1), dtype=np.complex128)
        out[: self.cutoff + 1, : self.cutoff + 1] = self._amps
        return FockState(out, self.dropped_mass)

    def flat(self):
        return self._amps.reshape(-1)

    def __add__(self, other):
        _check_same_cutoff(self, other)
        return FockState(self._amps + other._amps, self.dropped_mass + other.dropped_mass)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return FockState(scalar * self._amps, abs(scalar) ** 2 * self.dropped_mass)

    __rmul__ = __mul__

    def __repr__(self):
        nz = np.argwhere(np.abs(self._amps) > 1e-12)
        terms = ", ".join(f"|{m},{n}>: {self._amps[m, n]:.6g}" for m, n in nz[:6])
        more = " ..." if len(nz) > 6 else ""
        return f"FockState(cutoff={self.cutoff}, {{{terms}{more}}})"


def _check_same_cutoff(a, b):
    if a.cutoff != b.cutoff:
        raise ValueError(f"cutoff mismatch: {a.cutoff} vs {b.cutoff}")


@dataclass(frozen=True)
class LadderOp:
    kind: str

    def __post_init__(self):
        if self.kind not in LADDER_KINDS:
            raise ValueError(f"unknown ladder operator {self.kind!r}")

    def dag(self):
        return LadderOp(_ADJOINT[self.kind])


class Operator:
    """Finite linear combination of products of ladder operators.

    Each term is a word, a tuple of ladder kinds written in ordinary operator
    order: ``("annihilate_H", "create_H")`` is a_H a_H^dagger, so the
    rightmost letter acts first.  The empty word is the identity.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for word, coeff in (terms or {}).items():
            word = tuple(word)
            for k in word:
                if k not in LADDER_KINDS:
                    raise ValueError(f"unknown ladder operator {k!r}")
            clean[word] = clean.get(word, 0) + complex(coeff)
        self.terms = {w: c for w, c in clean.items() if c != 0}

    @classmethod
    def ladder(cls, kind):
        return cls({(kind,): 1.0})

    @classmethod
    def identity(cls):
        return cls({(): 1.0})

    @property
    def degree(self):
        return max((len(w) for w in self.terms), default=0)

    def dag(self):
        return Operator(
            {tuple(_ADJOINT[k] for k in reversed(w)): np.conj(c) for w, c in self.terms.items()}
        )

    def __add__(self, other):
        other = _as_operator(other)
        merged = dict(self.terms)
        for w, c in other.terms.items():
            merged[w] = merged.get(w, 0) + c
        return Operator(merged)

    __radd__ = __add__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-1.0) * _as_operator(other)

    def __rsub__(self, other):
        return _as_operator(other) - self

    def __mul__(self, other):
        if isinstance(other, Number):
            return Operator({w: other * c for w, c in self.terms.items()})
        if isinstance(other, Operator):
            out = {}
            for w1, c1 in self.terms.items():
                for w2, c2 in other.terms.items():
                    out[w1 + w2] = out.get(w1 + w2, 0) + c1 * c2
            return Operator(out)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, Number):
            return self * other
        return NotImplemented

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __pow__(self, n):
        out = Operator.identity()
        for _ in range(n):
            out = out * self
        return out

    def __repr__(self):
        return f"Operator({self.terms!r})"


def _as_operator(x):
    if isinstance(x, Operator):
        return x
    if isinstance(x, LadderOp):
        return Operator.ladder(x.kind)
    if isinstance(x, Number):
        return x * Operator.identity()
    raise TypeError(f"cannot interpret {type(x).__name__} as an operator")


IDENTITY = Operator.identity()
A_H = Operator.ladder("annihilate_H")
A_V = Operator.ladder("annihilate_V")
AD_H = Operator.ladder("create_H")
AD_V = Operator.ladder("create_V")
NUMBER = AD_H * A_H + AD_V * A_V


def make_number_state(m, n, cutoff=DEFAULT_CUTOFF):
    if m < 0 or n < 0:
        raise ValueError("photon numbers must be non-negative")
    if m > cutoff or n > cutoff:
        raise CutoffExceeded(f"|{m},{n}> does not fit below cutoff {cutoff}")
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=np.complex128)
    amps[m, n] = 1.0
    return FockState(amps)


def vacuum(cutoff=DEFAULT_CUTOFF):
    return make_number_state(0, 0, cutoff)


def from_coefficients(coeffs, cutoff=DEFAULT_CUTOFF):
    """Build a state from a mapping ``{(m, n): amplitude}``."""
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=np.complex128)
    for (m, n), c in coeffs.items():
        if m > cutoff or n > cutoff:
            raise CutoffExceeded(f"|{m},{n}> does not fit below cutoff {cutoff}")
        amps[m, n] += c
    return FockState(amps)


@dataclass(frozen=True)
class CoherentAmplitudes:
    alpha_H: complex = 0j
    alpha_V: complex = 0j


def coherent_tail_mass(alpha, cutoff):
    """Poisson weight of photon numbers above ``cutoff`` for amplitude alpha."""
    mean = abs(alpha) ** 2
    if mean == 0.0:
        return 0.0
    return float(gammainc(cutoff + 1, mean))


def single_mode_coherent(alpha, cutoff):
    """Untruncated coherent coefficients e^{-|a|^2/2} a^n / sqrt(n!) for n <= cutoff."""
    alpha = complex(alpha)
    coeffs = np.empty(cutoff + 1, dtype=np.complex128)
    coeffs[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, cutoff + 1):
        coeffs[n] = coeffs[n - 1] * alpha / np.sqrt(n)
    return coeffs


def make_coherent(spec, cutoff=DEFAULT_CUTOFF, tail_tol=TAIL_TOL):
    """Normalized truncated coherent state |alpha_H, alpha_V>.

    Raises:
        CutoffTooSmall: if the Poisson tail beyond ``cutoff`` is not below
            ``tail_tol`` for the joint distribution.
    """
    if not isinstance(spec, CoherentAmplitudes):
        spec = CoherentAmplitudes(*spec)
    t_h = coherent_tail_mass(spec.alpha_H, cutoff)
    t_v = coherent_tail_mass(spec.alpha_V, cutoff)
    tail = t_h + t_v - t_h * t_v
    if tail >= tail_tol:
        raise CutoffTooSmall(
            f"coherent tail mass {tail:.3e} >= {tail_tol:.0e} at cutoff {cutoff}; "
            "raise the cutoff or reduce the amplitude"
        )
    amps = np.outer(
        single_mode_coherent(spec.alpha_H, cutoff), single_mode_coherent(spec.alpha_V, cutoff)
    )
    amps /= np.linalg.norm(amps)
    return FockState(amps)


def _apply_letter(kind, amps):
    """Act with one ladder operator on a raw tensor; returns (new, dropped)."""
    n = amps.shape[0]
    out = np.zeros_like(amps)
    sq = np.sqrt(np.arange(n, dtype=np.float64))
    dropped = 0.0
    if kind == "create_H":
        out[1:, :] = sq[1:, None] * amps[:-1, :]
        dropped = float(n * np.sum(np.abs(amps[-1, :]) ** 2))
    elif kind == "create_V":
        out[:, 1:] = sq[None, 1:] * amps[:, :-1]
        dropped = float(n * np.sum(np.abs(amps[:, -1]) ** 2))
    elif kind == "annihilate_H":
        out[:-1, :] = sq[1:, None] * amps[1:, :]
    elif kind == "annihilate_V":
        out[:, :-1] = sq[None, 1:] * amps[:, 1:]
    else:
        raise ValueError(f"unknown ladder operator {kind!r}")
    return out, dropped


def _apply_word(word, amps):
    dropped = 0.0
    for kind in reversed(word):
        amps, d = _apply_letter(kind, amps)
        dropped += d
    return amps, dropped


def apply(op, s):
    """Act with a ladder operator or operator expression on ``s``.

    The result keeps the cutoff of ``s``; amplitude pushed above the cutoff
    is discarded and its squared norm accumulated in ``dropped_mass``.
    The result is in general not normalized.
    """
    if isinstance(op, LadderOp):
        out, dropped = _apply_letter(op.kind, s.amplitudes)
        return FockState(out, dropped)
    op = _as_operator(op)
    total = np.zeros_like(s.amplitudes)
    dropped = 0.0
    for word, coeff in op.terms.items():
        out, d = _apply_word(word, s.amplitudes)
        total += coeff * out
        dropped += abs(coeff) ** 2 * d
    return FockState(total, dropped)


def expectation(obs, s, check_norm=True):
    """<s|obs|s> for an operator expression.

    The state is zero-padded by the degree of ``obs`` before acting, so the
    value is exact for the given truncated state; nothing is dropped.
    """
    if check_norm and not s.is_normalized(1e-10):
        raise NotNormalized(f"state has squared norm {s.norm() ** 2:.15g}")
    obs = _as_operator(obs)
    amps = s.padded(s.cutoff + obs.degree).amplitudes if obs.degree else s.amplitudes
    total = 0j
    for word, coeff in obs.terms.items():
        out, _ = _apply_word(word, amps)
        total += coeff * np.vdot(amps, out)
    return complex(total)


def variance(obs, s):
    """<obs^2> - <obs>^2 for a Hermitian ``obs``; returned as a real number."""
    obs = _as_operator(obs)
    mean = expectation(obs, s)
    return float((expectation(obs * obs, s) - mean * mean).real)


def coherent_residual(s, exclude_edge=True):
    """Norms ||(a_H - <a_H>) s|| and ||(a_V - <a_V>) s|| with the estimated alphas.

    With ``exclude_edge`` the component at photon number ``cutoff`` of the
    mode in question is left out.  Truncation alone puts -alpha c_N there, so
    the remaining residual vanishes exactly for a truncated coherent state
    and for nothing else.
    """
    alpha_h = expectation(A_H, s)
    alpha_v = expectation(A_V, s)
    vh = np.array(apply(A_H - alpha_h * IDENTITY, s).amplitudes)
    vv = np.array(apply(A_V - alpha_v * IDENTITY, s).amplitudes)
    if exclude_edge:
        vh[-1, :] = 0.0
        vv[:, -1] = 0.0
    return (alpha_h, alpha_v), (float(np.linalg.norm(vh)), float(np.linalg.norm(vv)))


# --- dense oracle -----------------------------------------------------------


def single_mode_annihilator(cutoff):
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=np.float64)), k=1).astype(np.complex128)


def dense_ladder(kind, cutoff):
    a = single_mode_annihilator(cutoff)
    eye = np.eye(cutoff + 1, dtype=np.complex128)
    mats = {
        "annihilate_H": np.kron(a, eye),
        "annihilate_V": np.kron(eye, a),
        "create_H": np.kron(a.conj().T, eye),
        "create_V": np.kron(eye, a.conj().T),
    }
    return mats[kind]


def dense_operator(op, cutoff):
    """Matrix of ``op`` on the flattened (cutoff + 1)**2 space, built by matmul."""
    op = _as_operator(op)
    dim = (cutoff + 1) ** 2
    letters = {k: dense_ladder(k, cutoff) for k in LADDER_KINDS}
    total = np.zeros((dim, dim), dtype=np.complex128)
    for word, coeff in op.terms.items():
        m = np.eye(dim, dtype=np.complex128)
        for kind in word:
            m = m @ letters[kind]
        total += coeff * m
    return total


def dense_expectation(obs, s):
    """Oracle for :func:`expectation` using explicit matrices on a padded space."""
    obs = _as_operator(obs)
    big = s.padded(s.cutoff + obs.degree)
    vec = big.flat()
    return complex(np.vdot(vec, dense_operator(obs, big.cutoff) @ vec))
