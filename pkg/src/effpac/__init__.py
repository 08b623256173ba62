"""Effective concept classes over Cantor space: trees, VC dimension, PAC experiments."""
from . import cantor, concepts, construction, pac, pi01, vc  # noqa: F401  (registers catalog kinds)

__version__ = "0.1.0"
