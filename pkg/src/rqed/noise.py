"""Electric-field quadratures at a space-time point and their per-k noise."""

import math
from dataclasses import dataclass

import numpy as np

from . import fock
from .grid import Constants

# (a^dagger - a) / 2i and (a + a^dagger) / 2 for each polarization
COS_QUAD_H = (fock.AD_H - fock.A_H) / 2j
COS_QUAD_V = (fock.AD_V - fock.A_V) / 2j
SIN_QUAD_H = (fock.A_H + fock.AD_H) / 2
SIN_QUAD_V = (fock.A_V + fock.AD_V) / 2

COHERENT_BLOCK = 0.25


@dataclass(frozen=True)
class SpaceTimePoint:
    x0: float = 0.0
    x: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class QuadratureVariances:
    var_cos: float
    var_sin: float

    def __post_init__(self):
        for name in ("var_cos", "var_sin"):
            v = getattr(self, name)
            if v < -1e-12:
                raise ValueError(f"{name} = {v!r} is negative beyond tolerance")
            if v < 0.0:
                object.__setattr__(self, name, 0.0)


def phase(k, x):
    """k_mu x^mu = |k| x0 - k.x with metric signature (+, -, -, -)."""
    k = np.asarray(k, dtype=np.float64)
    return float(np.linalg.norm(k) * x.x0 - k @ np.asarray(x.x, dtype=np.float64))


def prefactor(k, constants=None):
    """c^2 |k| lambda^2 / ((2 pi)^3 2 ell), the squared field scale per mode."""
    c = constants or Constants()
    kn = float(np.linalg.norm(k))
    return c.c**2 * kn * c.lambda_unit**2 / ((2 * math.pi) ** 3 * 2 * c.ell)


def quadrature_blocks(s):
    """Per-state variance sums entering the cos and sin quadratures.

    Returns ``(cos_block, sin_block)`` where ``cos_block`` is
    Var[(a_H^+ - a_H)/2i] + Var[(a_V^+ - a_V)/2i] and ``sin_block`` the same
    with (a + a^+)/2.  For a coherent state both equal 1/2.
    """
    cos_block = fock.variance(COS_QUAD_H, s) + fock.variance(COS_QUAD_V, s)
    sin_block = fock.variance(SIN_QUAD_H, s) + fock.variance(SIN_QUAD_V, s)
    return cos_block, sin_block


def variances_for_state(s, k, x, constants=None):
    theta = phase(k, x)
    pref = prefactor(k, constants)
    cos_block, sin_block = quadrature_blocks(s)
    return QuadratureVariances(
        pref * math.cos(theta) ** 2 * cos_block, pref * math.sin(theta) ** 2 * sin_block
    )


def quadrature_variances(f, i, x):
    """Quantum uncertainties of the cos/sin field quadratures at grid point ``i``."""
    return variances_for_state(f.states[i], f.grid.points[i], x, f.constants)


def shot_noise_level(k, x, constants=None):
    """Coherent-state (quantum noise level) variances at wave vector ``k``."""
    theta = phase(k, x)
    pref = prefactor(k, constants)
    block = 2 * COHERENT_BLOCK
    return QuadratureVariances(pref * math.cos(theta) ** 2 * block, pref * math.sin(theta) ** 2 * block)


def squeezed_pair_state(r, cutoff=fock.DEFAULT_CUTOFF):
    """cos(r)|0,0> + sin(r)|2,0>, a simple state with one quadrature below shot noise."""
    return fock.from_coefficients({(0, 0): math.cos(r), (2, 0): math.sin(r)}, cutoff)
