"""Spatio-temporal multi-step wind speed forecasting on station graphs."""

__version__ = "0.1.0"
