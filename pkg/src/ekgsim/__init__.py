"""Pseudospectral simulator and verification toolkit for the coupled
wave/Klein-Gordon system of harmonic-gauge gravity on a periodic box."""

from ekgsim.params import DEFAULT_PARAMS, NormParameters
from ekgsim.spectral import Grid, SpectralScalar

__all__ = ["DEFAULT_PARAMS", "NormParameters", "Grid", "SpectralScalar"]

__version__ = "0.1.0"
