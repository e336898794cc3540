"""Numerical Wiener criterion at infinity for div(|x|^gamma grad u) = 0."""

__version__ = "0.1.0"
