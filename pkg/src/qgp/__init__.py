"""Numerical toolkit for quantum channels with side information at the transmitter."""

__version__ = "0.1.0"
