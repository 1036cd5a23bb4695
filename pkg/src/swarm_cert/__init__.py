"""Certifiable bearing-based mutual localization and certificate-aware swarm planning."""
from .linalg import BACKEND

__version__ = "0.1.0"
