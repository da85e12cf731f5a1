"""Discrete Lagrangians for scalar recurrences via annihilation operators."""

from .expr import X, N, ALT, F_AS, canonicalize, diff, substitute, is_zero, numer_denom, freeze_registry
from .grammar import parse, render, ParseError

# defined functions are registered at import time only
freeze_registry()

__all__ = [
    "X", "N", "ALT", "F_AS", "canonicalize", "diff", "substitute", "is_zero",
    "numer_denom", "parse", "render", "ParseError",
]
