"""Proximity networks of WiFi routers and a stochastic model of malware
spreading router-to-router over them."""

from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
