"""Deterministic federated-learning simulator with clustering-informed client
selection and per-round energy accounting."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
