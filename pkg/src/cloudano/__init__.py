"""Neuro-symbolic anomaly detection over paired cloud metrics and logs."""

__version__ = "0.1.0"
