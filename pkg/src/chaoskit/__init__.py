"""Numerical toolkit for sums of two Wiener (and Poisson) chaoses on finite atomic spaces."""

__version__ = "0.1.0"
