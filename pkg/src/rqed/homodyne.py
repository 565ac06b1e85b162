"""Photon current of a field on a wave-vector grid, its spectrum, and the
recovery of signal overlaps by mixing with a coherent local oscillator.

The positive-frequency field applied to the field state gives one vector per
polarization component in the (shared) two-mode oscillator space::

    theta_alpha(x) = sum_i c_i(x) [eps_H,alpha a_H + eps_V,alpha a_V] zeta_i
    c_i(x)         = ell^{3/2} w_i (c |k_i| lambda / (2 N0(k_i))) exp(-i k_i.x)

with N0(k) = sqrt((2 pi)^3 2 ell |k|).  The current is
I(x) = sum_alpha ||theta_alpha(x)||^2 = c(x)^+ G c(x), where G is the Gram
matrix of the annihilated per-point states.  Vectors from different grid
points add inside the same oscillator space, which is what produces beat
notes between wave vectors.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import fock
from .errors import (
    AmbiguousMatch,
    BeatCollision,
    GridMismatch,
    NoMatchedPair,
    Undersampled,
)
from .grid import Constants, FieldConfiguration, PolarizationFrame

MIN_PERIODS = 4


def mode_amplitude(k, constants):
    """c |k| lambda / (2 N0(k))."""
    kn = float(np.linalg.norm(k))
    n0 = math.sqrt((2 * math.pi) ** 3 * 2 * constants.ell * kn)
    return constants.c * kn * constants.lambda_unit / (2 * n0)


def point_weights(f):
    """ell^{3/2} w_i c|k_i| lambda / (2 N0(k_i)) for every grid point."""
    k = f.constants
    return np.array(
        [k.ell**1.5 * w * mode_amplitude(p, k) for p, w in zip(f.grid.points, f.grid.weights)]
    )


def annihilated_vectors(f):
    """Array (n_points, 3, dim) of sum_pol eps_pol,alpha a_pol zeta_i."""
    out = []
    for p, s in zip(f.grid.points, f.states):
        frame = PolarizationFrame.for_k(p)
        ah = fock.apply(fock.A_H, s).flat()
        av = fock.apply(fock.A_V, s).flat()
        out.append(np.outer(frame.eps_H, ah) + np.outer(frame.eps_V, av))
    return np.array(out)


def current_gram(f):
    """G_ij = sum_alpha <v_i,alpha | v_j,alpha>, Hermitian (n, n)."""
    v = annihilated_vectors(f)
    return np.einsum("iad,jad->ij", v.conj(), v)


@dataclass(frozen=True)
class CurrentModel:
    """Precomputed pieces for evaluating I(x) at many space-time points."""

    gram: np.ndarray
    amplitudes: np.ndarray
    points: np.ndarray

    @classmethod
    def from_field(cls, f):
        return cls(current_gram(f), point_weights(f), np.array(f.grid.points))

    def coefficients(self, x0, xvec=(0.0, 0.0, 0.0)):
        x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
        kn = np.linalg.norm(self.points, axis=1)
        spatial = self.points @ np.asarray(xvec, dtype=np.float64)
        ph = np.outer(x0, kn) - spatial[None, :]
        return self.amplitudes[None, :] * np.exp(-1j * ph)

    def current(self, x0, xvec=(0.0, 0.0, 0.0)):
        c = self.coefficients(x0, xvec)
        return np.einsum("ti,ij,tj->t", c.conj(), self.gram, c).real


def photon_current(f, x):
    """I(x) for a single space-time point; always >= 0."""
    model = CurrentModel.from_field(f)
    return float(model.current(x.x0, x.x)[0])


def photon_current_series(f, x0s, xvec=(0.0, 0.0, 0.0), workers=1):
    """I(x0, xvec) on many times.  Chunks are evaluated independently and
    concatenated in order, so the result does not depend on ``workers``."""
    model = CurrentModel.from_field(f)
    x0s = np.asarray(x0s, dtype=np.float64)
    if workers <= 1 or x0s.size < 2 * workers:
        return model.current(x0s, xvec)
    chunks = np.array_split(x0s, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda ch: model.current(ch, xvec), chunks))
    return np.concatenate(parts)


# --- spectrum ---------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumSample:
    omega: float
    value: complex


@dataclass(frozen=True)
class Spectrum:
    samples: list
    resolution: float
    window_length: float

    @property
    def omegas(self):
        return np.array([s.omega for s in self.samples])

    @property
    def values(self):
        return np.array([s.value for s in self.samples])

    def at(self, omega):
        i = int(np.argmin(np.abs(self.omegas - omega)))
        return self.samples[i]

    def hermitian_defect(self):
        """max |I(-w) - conj I(w)| over the symmetric part of the grid."""
        lookup = {round(s.omega / self.resolution): s.value for s in self.samples}
        return max(
            (abs(v - np.conj(lookup[-m])) for m, v in lookup.items() if -m in lookup),
            default=0.0,
        )


def _window(name, n):
    if name in (None, "rect"):
        return np.ones(n)
    if name == "hann":
        w = np.hanning(n + 1)[:-1]
        return w / w.mean()
    raise ValueError(f"unknown window {name!r}")


def _uniform_spacing(x0s):
    x0s = np.asarray(x0s, dtype=np.float64)
    if x0s.size < 2:
        raise Undersampled("need at least two time samples")
    d = np.diff(x0s)
    if np.max(np.abs(d - d[0])) > 1e-9 * abs(d[0]):
        raise ValueError("time samples must be uniformly spaced")
    return float(d[0])


def beat_frequencies(f, support_tol=0.0):
    """Distinct |k_i| - |k_j| (i != j) between points whose annihilated state is nonzero."""
    gram = current_gram(f)
    active = np.flatnonzero(np.real(np.diag(gram)) > support_tol)
    kn = f.grid.norms[active]
    diffs = np.abs(kn[:, None] - kn[None, :])
    return np.unique(diffs[diffs > 0])


def check_sampling(f, x0s):
    dx = _uniform_spacing(x0s)
    beats = beat_frequencies(f)
    if beats.size:
        if beats.max() * dx >= math.pi:
            raise Undersampled(
                f"spacing {dx:.4g} violates Nyquist for beat {beats.max():.4g} (need < {math.pi / beats.max():.4g})"
            )
        span = dx * len(x0s)
        if span * beats.min() < MIN_PERIODS * 2 * math.pi * (1 - 1e-12):
            raise Undersampled(
                f"window {span:.4g} covers fewer than {MIN_PERIODS} periods of beat {beats.min():.4g}"
            )
    return dx


def dft_at(x0s, values, omega, c=1.0, window="rect"):
    """(dx / (2 pi c)) sum_j win_j exp(i omega x0_j / c) I_j."""
    dx = _uniform_spacing(x0s)
    x0s = np.asarray(x0s, dtype=np.float64)
    w = _window(window, x0s.size)
    return complex(dx / (2 * math.pi * c) * np.sum(w * np.exp(1j * omega * x0s / c) * values))


def spectrum_of_series(x0s, values, c=1.0, window="rect"):
    x0s = np.asarray(x0s, dtype=np.float64)
    n = x0s.size
    dx = _uniform_spacing(x0s)
    w = _window(window, n)
    # sum_j e^{+2 pi i m j / n} y_j = n * ifft(y)[m]
    raw = n * np.fft.ifft(w * np.asarray(values, dtype=np.complex128))
    omegas = 2 * math.pi * c * np.fft.fftfreq(n, d=dx)
    vals = dx / (2 * math.pi * c) * np.exp(1j * omegas * x0s[0] / c) * raw
    order = np.argsort(omegas, kind="stable")
    samples = [SpectrumSample(float(omegas[i]), complex(vals[i])) for i in order]
    return Spectrum(samples, 2 * math.pi * c / (n * dx), n * dx)


def spectrum(f, x_positions, window="rect", xvec=(0.0, 0.0, 0.0), workers=1):
    """Discrete Fourier transform of I(x0) normalized to (1/2 pi c) int dx0 e^{i w x0/c} I.

    Raises:
        Undersampled: if the sampling violates Nyquist for the largest beat or
            spans fewer than four periods of the smallest.
    """
    check_sampling(f, x_positions)
    values = photon_current_series(f, x_positions, xvec, workers)
    return spectrum_of_series(x_positions, values, f.constants.c, window)


def commensurate_sampling(kmags, periods=MIN_PERIODS, oversample=4, max_denominator=10**6):
    """Uniform x0 samples over which every beat among ``kmags`` is exactly periodic.

    All |k| differences must be integer multiples of a common spacing; the
    window then spans ``periods`` periods of that spacing.
    """
    fr = [Fraction(float(k)).limit_denominator(max_denominator) for k in kmags]
    diffs = sorted({abs(a - b) for a in fr for b in fr if a != b})
    if not diffs:
        raise ValueError("need at least two distinct |k| values")
    base = diffs[0]
    for d in diffs[1:]:
        base = Fraction(math.gcd(base.numerator * d.denominator, d.numerator * base.denominator),
                        base.denominator * d.denominator)
    base = float(base)
    span = periods * 2 * math.pi / base
    n = oversample * int(math.ceil(span * float(diffs[-1]) / math.pi)) + 1
    return np.arange(n) * (span / n)


# --- mixed field and reconstruction ----------------------------------------


class MixedField:
    """Coherent local oscillator on region A mixed with a weak signal on region B.

    Per point: sqrt(1 - eps^2) |F_H, F_V>^c + eps |zeta^s>, with F = 0 off A
    and zeta^s = 0 off B.

    Args:
        grid: a :class:`WaveGrid` carrying regions ``lo_region`` and ``signal_region``.
        lo: mapping point index -> (F_H, F_V).
        signal: mapping point index -> FockState.
    """

    def __init__(self, grid, lo, signal, epsilon, cutoff=fock.DEFAULT_CUTOFF, constants=None,
                 lo_region="A", signal_region="B"):
        self.grid = grid
        self.lo = {int(i): (complex(h), complex(v)) for i, (h, v) in lo.items()}
        self.signal = {int(i): s for i, s in signal.items()}
        self.epsilon = float(epsilon)
        self.cutoff = cutoff
        self.constants = constants or Constants()
        if lo_region in grid.regions and signal_region in grid.regions:
            grid.check_disjoint(lo_region, signal_region)
            if not set(self.lo) <= set(grid.regions[lo_region]):
                raise GridMismatch("local oscillator extends outside its region")
            if not set(self.signal) <= set(grid.regions[signal_region]):
                raise GridMismatch("signal extends outside its region")
        if set(self.lo) & set(self.signal):
            raise GridMismatch("local-oscillator and signal supports overlap")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        for s in self.signal.values():
            if s.cutoff != cutoff:
                raise ValueError("signal states must use the field cutoff")

    def with_lo_factor(self, factor):
        lo = {i: (factor * h, factor * v) for i, (h, v) in self.lo.items()}
        return MixedField(self.grid, lo, self.signal, self.epsilon, self.cutoff, self.constants,
                          lo_region=None, signal_region=None)

    def with_epsilon(self, epsilon):
        return MixedField(self.grid, self.lo, self.signal, epsilon, self.cutoff, self.constants,
                          lo_region=None, signal_region=None)

    def lo_state(self, i):
        h, v = self.lo.get(i, (0j, 0j))
        return fock.make_coherent(fock.CoherentAmplitudes(h, v), self.cutoff)

    def field(self):
        root = math.sqrt(1 - self.epsilon**2)
        zero = fock.FockState(np.zeros((self.cutoff + 1,) * 2))
        states = []
        for i in range(len(self.grid)):
            s = root * self.lo_state(i) + self.epsilon * self.signal.get(i, zero)
            states.append(s)
        return FieldConfiguration(self.grid, states, self.constants)


def contracted_overlap(lo_amps, lo_state, signal_state):
    """sum_pol conj(F_pol) <F|a_pol zeta^s>; the quantity a single beat note carries."""
    h, v = lo_amps
    oh = lo_state.inner(fock.apply(fock.A_H, signal_state))
    ov = lo_state.inner(fock.apply(fock.A_V, signal_state))
    return np.conj(h) * oh + np.conj(v) * ov


def direct_overlaps(mixed, i_lo, j_sig):
    """(<F|a_H zeta^s>, <F|a_V zeta^s>, contracted) evaluated in the Fock space."""
    lo_state = mixed.lo_state(i_lo)
    s = mixed.signal[j_sig]
    oh = lo_state.inner(fock.apply(fock.A_H, s))
    ov = lo_state.inner(fock.apply(fock.A_V, s))
    return oh, ov, contracted_overlap(mixed.lo[i_lo], lo_state, s)


def default_bin_width(grid):
    """Half the smallest gap between distinct beat frequencies on the grid."""
    kn = grid.norms
    beats = np.unique(np.round((kn[:, None] - kn[None, :]).ravel(), 12))
    gaps = np.diff(beats)
    gaps = gaps[gaps > 0]
    return 0.5 * float(gaps.min()) if gaps.size else math.inf


@dataclass(frozen=True)
class MatchedPair:
    i_lo: int
    j_sig: int
    beat: float


def matched_pairs(mixed, omega, bin_width=None):
    """Pairs (k in A, k' in B) whose beat c(|k'| - |k|) falls into the bin of omega.

    Raises:
        BeatCollision: a beat between two local-oscillator points falls into the bin.
        NoMatchedPair, AmbiguousMatch
    """
    c = mixed.constants.c
    kn = mixed.grid.norms
    bw = default_bin_width(mixed.grid) if bin_width is None else bin_width
    lo_idx = sorted(mixed.lo)
    sig_idx = sorted(mixed.signal)
    for a in lo_idx:
        for b in lo_idx:
            if abs(omega + c * kn[a] - c * kn[b]) < bw:
                raise BeatCollision(
                    f"omega={omega} coincides with local-oscillator beat between points {a} and {b}"
                )
    for a in sig_idx:
        for b in sig_idx:
            if a != b and abs(omega + c * kn[a] - c * kn[b]) < bw:
                warnings.warn(
                    f"omega={omega} hits an O(eps^2) signal beat between points {a} and {b}",
                    stacklevel=2,
                )
    found = [
        MatchedPair(a, b, c * (kn[b] - kn[a]))
        for a in lo_idx
        for b in sig_idx
        if abs(omega + c * kn[a] - c * kn[b]) < bw
    ]
    if not found:
        raise NoMatchedPair(f"no (LO, signal) pair beats at omega={omega}")
    if len(found) > 1:
        raise AmbiguousMatch(f"{len(found)} pairs share the bin of omega={omega}")
    return found


@dataclass
class Recovery:
    """Estimate of one real component of the contracted overlap for a matched pair."""

    pair: MatchedPair
    component: str  # "re" or "im"
    value: float
    target: float
    spectral_value: complex
    meta: dict = field(default_factory=dict)

    @property
    def error(self):
        return abs(self.value - self.target)


def pair_prefactor(mixed, pair, xvec=(0.0, 0.0, 0.0)):
    """eps sqrt(1-eps^2) ell^3 w_k w_k' A_k A_k' exp(-i (k - k').x) for a matched pair."""
    k = mixed.constants
    g = mixed.grid
    ka, kb = g.points[pair.i_lo], g.points[pair.j_sig]
    amp = (
        k.ell**3
        * g.weights[pair.i_lo]
        * g.weights[pair.j_sig]
        * mode_amplitude(ka, k)
        * mode_amplitude(kb, k)
    )
    spatial = np.exp(-1j * float((ka - kb) @ np.asarray(xvec, dtype=np.float64)))
    eps = mixed.epsilon
    return eps * math.sqrt(1 - eps**2) * amp * spatial


def measured_beat(mixed, omega, x0s=None, xvec=(0.0, 0.0, 0.0), window="rect", workers=1):
    """Complex beat amplitude z with I(x0) containing z exp(-i omega x0 / c).

    Obtained from the normalized spectrum as 2 pi c I~(omega) / window length.
    """
    f = mixed.field()
    c = f.constants.c
    if x0s is None:
        x0s = commensurate_sampling(f.grid.norms)
    dx = check_sampling(f, x0s)
    values = photon_current_series(f, x0s, xvec, workers)
    spec = dft_at(x0s, values, omega, c, window)
    return 2 * math.pi * c * spec / (dx * len(x0s)), spec


def reconstruct_overlaps(mixed, omega, phase_toggle=False, x0s=None, bin_width=None,
                         xvec=(0.0, 0.0, 0.0), window="rect", workers=1):
    """Recover one real component of the overlap driving the beat at ``omega``.

    With ``phase_toggle=False`` the real part of the prefactor-divided
    spectrum gives Re sum_pol conj(F_pol) <F|a_pol zeta^s>.  With
    ``phase_toggle=True`` the local oscillator is replaced by iF and the same
    real part yields the imaginary component.  The second run probes
    <iF|a zeta^s>, which equals <F|a zeta^s> whenever a zeta^s is a multiple
    of the vacuum (signals with at most one photon); ``meta["target_shift"]``
    records the difference otherwise.

    Returns:
        dict mapping the signal point index to a :class:`Recovery`.
    """
    pairs = matched_pairs(mixed, omega, bin_width)
    run = mixed.with_lo_factor(1j) if phase_toggle else mixed
    z, spec = measured_beat(run, omega, x0s, xvec, window, workers)
    out = {}
    for pair in pairs:
        pref = pair_prefactor(mixed, pair, xvec)
        est = z / pref
        _, _, target = direct_overlaps(mixed, pair.i_lo, pair.j_sig)
        if phase_toggle:
            # probed = sum conj(iF) <iF|a s>; Re(probed) = Im(target) when <iF|a s> = <F|a s>
            _, _, probed = direct_overlaps(run, pair.i_lo, pair.j_sig)
            value = float(est.real)
            tgt = float(np.imag(target))
            meta = {"target_shift": float(abs(np.real(probed) - tgt))}
        else:
            value = float(est.real)
            tgt = float(np.real(target))
            meta = {}
        meta.update({"omega": omega, "beat": pair.beat, "epsilon": mixed.epsilon})
        out[pair.j_sig] = Recovery(pair, "im" if phase_toggle else "re", value, tgt, spec, meta)
    return out


def reconstruct_complex(mixed, omega, **kw):
    """Both runs combined into the complex contracted overlap estimate."""
    re = reconstruct_overlaps(mixed, omega, False, **kw)
    im = reconstruct_overlaps(mixed, omega, True, **kw)
    return {j: complex(re[j].value, im[j].value) for j in re}


def epsilon_linearity(mixed, omega, eps_values=(1e-3, 2e-3, 4e-3), **kw):
    """Fit the raw beat amplitude against eps through the origin.

    Returns the fitted slope and the largest relative deviation from the
    linear fit over ``eps_values``.
    """
    pairs = matched_pairs(mixed, omega, kw.get("bin_width"))
    pair = pairs[0]
    eps = np.asarray(eps_values, dtype=np.float64)
    raw = []
    for e in eps:
        m = mixed.with_epsilon(e)
        z, _ = measured_beat(m, omega, kw.get("x0s"), kw.get("xvec", (0.0, 0.0, 0.0)))
        raw.append(z / (pair_prefactor(m, pair) / (e * math.sqrt(1 - e**2))))
    raw = np.array(raw)
    slope = np.vdot(eps, raw) / np.vdot(eps, eps)
    resid = np.max(np.abs(raw - slope * eps) / np.abs(raw))
    return complex(slope), float(resid)
