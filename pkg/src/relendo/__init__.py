"""Exact computations with relative endomorphism algebras over finite fields."""

__version__ = "0.1.0"
