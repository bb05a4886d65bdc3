"""Renormalization Hopf algebras of Feynman graphs and quantum gauge symmetries."""

__version__ = "0.1.0"
