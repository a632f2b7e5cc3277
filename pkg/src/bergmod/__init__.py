"""Truncated Bergman-space models, Berezin symbols, Toeplitz operators and
modular cusp forms for the modular group acting on the upper half-plane."""

__version__ = "0.1.0"
