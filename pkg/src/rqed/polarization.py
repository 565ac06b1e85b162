"""Two-photon polarization state, rotated detection and collapse.

The two-photon state c00|0,0> + c20|2,0> + c11|1,1> + c02|0,2> is re-expanded
on the creation operators of a detector rotated by ``phi``::

    a^x_H =  cos(phi) a_H + sin(phi) a_V
    a^x_V = -sin(phi) a_H + cos(phi) a_V

Detecting an H photon applies a^x_H.  Acting on (1/sqrt 2) d20 (a^x_H^+)^2|0>
produces sqrt(2) d20 a^x_H^+|0>, so the exact one-photon remainder carries a
factor sqrt(2) on d20.  ``literal=True`` drops that factor and reproduces the
remainder (-sin d11 + cos d20)|1,0> + (cos d11 + sin d20)|0,1> verbatim; it
only agrees with the annihilation oracle when d11 = 0 or d20 = 0.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import fock
from .errors import NotNormalized, ZeroRemainder

ZERO_TOL = 1e-14
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PairCoefficients:
    c00: complex = 0j
    c20: complex = 0j
    c11: complex = 0j
    c02: complex = 0j

    def __post_init__(self):
        if abs(self.norm2() - 1.0) > 1e-12:
            raise NotNormalized(f"sum |c|^2 = {self.norm2()!r}")

    def norm2(self):
        return sum(abs(z) ** 2 for z in self.as_array())

    def as_array(self):
        return np.array([self.c00, self.c20, self.c11, self.c02], dtype=np.complex128)

    @classmethod
    def random(cls, rng):
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        z /= np.linalg.norm(z)
        return cls(*z)

    def state(self, cutoff=4):
        return fock.from_coefficients(
            {(0, 0): self.c00, (2, 0): self.c20, (1, 1): self.c11, (0, 2): self.c02}, cutoff
        )


@dataclass(frozen=True)
class RotatedCoefficients:
    d00: complex
    d20: complex
    d11: complex
    d02: complex
    phi: float

    def as_array(self):
        return np.array([self.d00, self.d20, self.d11, self.d02], dtype=np.complex128)


def rotate_coefficients(c, phi):
    co, si = math.cos(phi), math.sin(phi)
    s2, c2 = math.sin(2 * phi), math.cos(2 * phi)
    return RotatedCoefficients(
        d00=c.c00,
        d20=c.c20 * co**2 + c.c11 * s2 / SQRT2 + c.c02 * si**2,
        d11=c.c11 * c2 - (c.c20 - c.c02) * s2 / SQRT2,
        d02=c.c02 * co**2 - c.c11 * s2 / SQRT2 + c.c20 * si**2,
        phi=phi,
    )


def rotated_state(d, phi=None, cutoff=4):
    """Rebuild the state in the original basis from rotated coefficients.

    Expands {d00 + d20 (A^+)^2/sqrt2 + d11 A^+ B^+ + d02 (B^+)^2/sqrt2}|0,0>
    with A^+ = cos a_H^+ + sin a_V^+ and B^+ = -sin a_H^+ + cos a_V^+.
    """
    phi = d.phi if phi is None else phi
    co, si = math.cos(phi), math.sin(phi)
    a_x = co * fock.AD_H + si * fock.AD_V
    b_x = -si * fock.AD_H + co * fock.AD_V
    gen = (
        d.d00 * fock.IDENTITY
        + (d.d20 / SQRT2) * a_x * a_x
        + d.d11 * a_x * b_x
        + (d.d02 / SQRT2) * b_x * b_x
    )
    return fock.apply(gen, fock.vacuum(cutoff))


def detector_annihilators(phi):
    co, si = math.cos(phi), math.sin(phi)
    return co * fock.A_H + si * fock.A_V, -si * fock.A_H + co * fock.A_V


@dataclass(frozen=True)
class Collapse:
    state: fock.FockState
    weight: float
    vacuum_scalar: complex
    amplitudes: tuple


def collapse_on_detection(c, phi, outcome="H", literal=False, cutoff=4):
    """Normalized one-photon field left after detecting ``outcome`` at angle ``phi``.

    ``weight`` is the squared norm of the remainder before renormalization.
    ``vacuum_scalar`` is the |0,0> amplitude of the post-click vector; for the
    two-photon family it is identically zero because a^x|0,0> = 0, and it is
    reported for completeness.
    """
    amp10, amp01 = remainder_amplitudes(c, phi, outcome, literal)
    weight = abs(amp10) ** 2 + abs(amp01) ** 2
    if math.sqrt(weight) < ZERO_TOL:
        raise ZeroRemainder(f"no one-photon remainder for outcome {outcome} at phi={phi}")
    nrm = math.sqrt(weight)
    state = fock.from_coefficients({(1, 0): amp10 / nrm, (0, 1): amp01 / nrm}, cutoff)
    return Collapse(state, weight, 0j, (amp10, amp01))


def remainder_amplitudes(c, phi, outcome="H", literal=False):
    """One-photon amplitudes (|1,0>, |0,1>) left after the first click, unnormalized."""
    d = rotate_coefficients(c, phi)
    co, si = math.cos(phi), math.sin(phi)
    f = 1.0 if literal else SQRT2
    if outcome == "H":
        # d11 B^+ + f d20 A^+ in the original basis
        return -si * d.d11 + co * f * d.d20, co * d.d11 + si * f * d.d20
    if outcome == "V":
        # d11 A^+ + f d02 B^+
        return co * d.d11 - si * f * d.d02, si * d.d11 + co * f * d.d02
    raise ValueError(f"outcome must be 'H' or 'V', got {outcome!r}")


def joint_probabilities(c, phi, literal=False):
    """(P(H,H), P(H,V)) given a first H click at angle phi and a second detector at 0.

    Conditional on both clicks; normalized to sum to one.
    """
    amp10, amp01 = remainder_amplitudes(c, phi, "H", literal)
    w_h, w_v = abs(amp10) ** 2, abs(amp01) ** 2
    total = w_h + w_v
    if math.sqrt(total) < ZERO_TOL:
        raise ZeroRemainder(f"no one-photon remainder at phi={phi}")
    return w_h / total, w_v / total


def first_click_weights(c, phi, cutoff=4):
    """Unnormalized ||a^x_H psi||^2 and ||a^x_V psi||^2 for the first detector."""
    psi = c.state(cutoff)
    a_h, a_v = detector_annihilators(phi)
    return fock.apply(a_h, psi).norm() ** 2, fock.apply(a_v, psi).norm() ** 2


def sequential_oracle(c, phi, cutoff=4):
    """Two-step annihilation oracle for (P(H,H), P(H,V))."""
    psi = c.state(cutoff)
    a_h, _ = detector_annihilators(phi)
    after = fock.apply(a_h, psi)
    w_hh = fock.apply(fock.A_H, after).norm() ** 2
    w_hv = fock.apply(fock.A_V, after).norm() ** 2
    return w_hh / (w_hh + w_hv), w_hv / (w_hh + w_hv)


def collapse_oracle(c, phi, outcome="H", cutoff=4):
    """Apply the rotated annihilator, project out |0,0>, renormalize."""
    psi = c.state(cutoff)
    a_h, a_v = detector_annihilators(phi)
    after = fock.apply(a_h if outcome == "H" else a_v, psi)
    amps = np.array(after.amplitudes)
    amps[0, 0] = 0.0
    return fock.FockState(amps).normalized()
