"""Simulation and signal-processing toolkit for a composite LFM + single-tone photonic radar."""

__version__ = "0.1.0"
