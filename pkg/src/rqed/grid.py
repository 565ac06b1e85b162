"""Wave-vector grids and per-k field configurations.

A field is a family of two-mode oscillator states indexed by wave vector.
States only ever combine at the same grid point; integrals over k become
midpoint sums with per-point cell volumes as weights.
"""

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import fock
from .errors import GridMismatch, NotCoherent, WeightViolation

COHERENT_TOL = 1e-8


@dataclass(frozen=True)
class Constants:
    hbar: float = 1.0
    c: float = 1.0
    ell: float = 1.0
    lambda_unit: float = 1.0

    def to_dict(self):
        return {"hbar": self.hbar, "c": self.c, "ell": self.ell, "lambda_unit": self.lambda_unit}


class WaveGrid:
    """Discrete set of non-zero wave vectors with quadrature weights.

    Args:
        points: array of shape ``(n, 3)``.
        weights: positive cell volumes, shape ``(n,)``.
        regions: optional mapping name -> sequence of point indices.
    """

    def __init__(self, points, weights, regions=None):
        pts = np.array(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 3)
        w = np.array(weights, dtype=np.float64).reshape(-1)
        if pts.shape[1] != 3 or pts.shape[0] != w.shape[0]:
            raise ValueError("points must be (n, 3) and match the number of weights")
        if np.any(np.linalg.norm(pts, axis=1) <= 0.0):
            raise ValueError("wave vectors must be non-vanishing")
        if np.any(w <= 0.0):
            raise ValueError("quadrature weights must be positive")
        pts.flags.writeable = False
        w.flags.writeable = False
        self.points = pts
        self.weights = w
        self.regions = {}
        for name, idx in (regions or {}).items():
            idx = tuple(int(i) for i in idx)
            if any(i < 0 or i >= len(w) for i in idx) or len(set(idx)) != len(idx):
                raise ValueError(f"region {name!r} has invalid indices")
            self.regions[name] = idx

    def __len__(self):
        return self.points.shape[0]

    @property
    def norms(self):
        return np.linalg.norm(self.points, axis=1)

    def region(self, name):
        return self.regions[name]

    def check_disjoint(self, *names):
        seen = set()
        for name in names:
            idx = set(self.regions[name])
            if seen & idx:
                raise GridMismatch(f"regions {names} overlap")
            seen |= idx

    def same_as(self, other):
        return (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    @classmethod
    def beam(cls, kmin, kmax, n, regions=None):
        """Collinear grid along +z with midpoint cells on [kmin, kmax]."""
        edges = np.linspace(kmin, kmax, n + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        pts = np.zeros((n, 3))
        pts[:, 2] = mids
        return cls(pts, np.diff(edges), regions)

    @classmethod
    def collinear(cls, magnitudes, weights, regions=None):
        mags = np.asarray(magnitudes, dtype=np.float64)
        pts = np.zeros((mags.size, 3))
        pts[:, 2] = mags
        return cls(pts, weights, regions)


@dataclass(frozen=True)
class PolarizationFrame:
    eps_H: np.ndarray
    eps_V: np.ndarray

    @classmethod
    def for_k(cls, k):
        """Right-handed transverse frame; for k along +z this is (x, y)."""
        k = np.asarray(k, dtype=np.float64)
        khat = k / np.linalg.norm(k)
        if khat[0] == 0.0 and khat[1] == 0.0:
            sign = 1.0 if khat[2] > 0 else -1.0
            return cls(np.array([1.0, 0.0, 0.0]), np.array([0.0, sign, 0.0]))
        helper = np.array([1.0, 0.0, 0.0])
        if abs(khat @ helper) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        e_v = np.cross(khat, helper)
        e_v /= np.linalg.norm(e_v)
        e_h = np.cross(e_v, khat)
        e_h /= np.linalg.norm(e_h)
        return cls(e_h, e_v)

    def matrix(self):
        """Rows are eps_H and eps_V."""
        return np.vstack([self.eps_H, self.eps_V])


@dataclass(frozen=True)
class Superposition:
    field: "FieldConfiguration"
    norms: np.ndarray

    @property
    def unnormalized(self):
        return np.flatnonzero(np.abs(self.norms**2 - 1.0) > fock.TOL_NORM)


class FieldConfiguration:
    """Per-grid-point two-mode states plus the unit bookkeeping constants."""

    def __init__(self, grid, states, constants=None, decay_tol=None):
        states = tuple(states)
        if len(states) != len(grid):
            raise GridMismatch(f"{len(states)} states for {len(grid)} grid points")
        cutoffs = {s.cutoff for s in states}
        if len(cutoffs) > 1:
            raise ValueError("all states must share one cutoff")
        self.grid = grid
        self.states = states
        self.constants = constants or Constants()
        if decay_tol is not None:
            self.check_decay(decay_tol)

    @property
    def cutoff(self):
        return self.states[0].cutoff

    def state_at(self, i):
        return self.states[i]

    def check_decay(self, tol, fraction=0.1):
        """Warn when the states at the largest |k| are not close to the vacuum."""
        order = np.argsort(self.grid.norms)
        n_top = max(1, int(math.ceil(fraction * len(order))))
        for i in order[-n_top:]:
            s = self.states[i]
            excess = 1.0 - abs(s.amplitudes[0, 0]) ** 2 / max(s.norm() ** 2, 1e-300)
            if excess > tol:
                warnings.warn(
                    f"state at |k|={self.grid.norms[i]:.6g} is {excess:.3e} away from vacuum",
                    stacklevel=2,
                )
                return False
        return True

    @classmethod
    def vacuum(cls, grid, cutoff=fock.DEFAULT_CUTOFF, constants=None):
        vac = fock.vacuum(cutoff)
        return cls(grid, [vac] * len(grid), constants)

    @classmethod
    def coherent(cls, grid, F_H, F_V, cutoff=fock.DEFAULT_CUTOFF, constants=None):
        F_H = np.broadcast_to(np.asarray(F_H, dtype=np.complex128), (len(grid),))
        F_V = np.broadcast_to(np.asarray(F_V, dtype=np.complex128), (len(grid),))
        states = [
            fock.make_coherent(fock.CoherentAmplitudes(h, v), cutoff) for h, v in zip(F_H, F_V)
        ]
        return cls(grid, states, constants)

    def replace(self, states):
        return FieldConfiguration(self.grid, states, self.constants)

    # --- serialization -------------------------------------------------------

    def to_dict(self):
        return {
            "grid": {
                "points": self.grid.points.tolist(),
                "weights": self.grid.weights.tolist(),
                "regions": {k: list(v) for k, v in self.grid.regions.items()},
            },
            "cutoff": self.cutoff,
            "constants": self.constants.to_dict(),
            "states": [
                [[float(z.real), float(z.imag)] for z in s.flat()] for s in self.states
            ],
        }

    @classmethod
    def from_dict(cls, d):
        g = d["grid"]
        grid = WaveGrid(g["points"], g["weights"], g.get("regions"))
        n = d["cutoff"] + 1
        states = []
        for amps in d["states"]:
            arr = np.array([complex(re, im) for re, im in amps], dtype=np.complex128)
            states.append(fock.FockState(arr.reshape(n, n)))
        return cls(grid, states, Constants(**d.get("constants", {})))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def superpose(f, g, lam, mu, tol=1e-12):
    """Pointwise lam * f_k + mu * g_k.

    The result is kept unnormalized where the pointwise sum is not a unit
    vector; ``Superposition.norms`` reports the per-point norms.
    """
    if not f.grid.same_as(g.grid):
        raise GridMismatch("superposition requires identical grids")
    if abs(abs(lam) ** 2 + abs(mu) ** 2 - 1.0) > tol:
        raise WeightViolation(f"|lambda|^2 + |mu|^2 = {abs(lam) ** 2 + abs(mu) ** 2!r} != 1")
    states = [lam * a + mu * b for a, b in zip(f.states, g.states)]
    out = FieldConfiguration(f.grid, states, f.constants)
    return Superposition(out, np.array([s.norm() for s in states]))


def energy_terms(f):
    """Per-point contributions ell^3 w hbar c |k| <N>."""
    k = f.constants
    norms = f.grid.norms
    return [
        k.ell**3 * w * k.hbar * k.c * kn * fock.expectation(fock.NUMBER, s).real
        for w, kn, s in zip(f.grid.weights, norms, f.states)
    ]


def total_energy(f, indices=None):
    terms = energy_terms(f)
    if indices is not None:
        terms = [terms[i] for i in indices]
    return math.fsum(terms)


def coherent_energy(grid, F_H, F_V, constants=None):
    """Closed-form energy of a coherent field with amplitudes F_H, F_V."""
    k = constants or Constants()
    dens = np.abs(np.asarray(F_H)) ** 2 + np.abs(np.asarray(F_V)) ** 2
    return math.fsum(k.ell**3 * grid.weights * k.hbar * k.c * grid.norms * dens)


def photon_density(f, i, tol=COHERENT_TOL):
    """(ell^3 |F_H|^2, ell^3 |F_V|^2) at grid point ``i``.

    Raises:
        NotCoherent: if the state at ``i`` is not an eigenvector of both
            annihilators to within ``tol``.
    """
    s = f.states[i]
    (alpha_h, alpha_v), (rh, rv) = fock.coherent_residual(s)
    if rh >= tol or rv >= tol:
        raise NotCoherent(f"state at point {i} has eigen-residuals ({rh:.3e}, {rv:.3e})")
    ell3 = f.constants.ell**3
    return ell3 * abs(alpha_h) ** 2, ell3 * abs(alpha_v) ** 2
