"""Fractional variational integrators based on BDF convolution quadrature."""

__version__ = "0.1.0"
