"""Simulation toolkit for two-sided matching markets with interview signaling."""

__version__ = "0.1.0"
