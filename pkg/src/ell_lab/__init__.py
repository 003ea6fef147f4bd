"""Numerical laboratory for noncooperative two-component elliptic systems with a proportionality structure."""

__version__ = "0.1.0"
