"""Two-mode oscillator field model: per-wave-vector Fock states, field quadratures,
photon-current spectra, polarization collapse and DGCZ covariance checks."""

__version__ = "0.1.0"
