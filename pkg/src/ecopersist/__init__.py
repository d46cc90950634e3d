"""Simulation and persistence certification for ecological stochastic models."""

__version__ = "0.1.0"
