"""Fit exterior source densities whose power-kernel potentials approximate
a target in a discrete C^k norm, and check the identities behind it."""

__version__ = "0.1.0"
