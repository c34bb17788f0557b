"""Initial data used by the numerical experiments."""
from __future__ import annotations

import numpy as np

__all__ = ["initial_condition", "circle_tanh", "radial_tanh", "cross_tanh", "cosine_mode", "INITIAL_KINDS"]

INITIAL_KINDS = ("test1", "test2", "test3", "cosine", "constant")
_S2 = np.sqrt(2.0)


def circle_tanh(eps: float):
    """``tanh((x^2 + y^2 - 0.6^2) / (sqrt(2) eps))``."""
    return lambda x, y: np.tanh((x * x + y * y - 0.36) / (_S2 * eps))


def radial_tanh(eps: float, radius: float = 0.6):
    """``tanh((r - radius) / (sqrt(2) eps))``: zero level set is the circle ``r = radius``."""
    return lambda x, y: np.tanh((np.sqrt(x * x + y * y) - radius) / (_S2 * eps))


def cross_tanh(eps: float):
    """Two crossed ellipses (semi-axes 0.2 and 0.6)."""

    def f(x, y):
        a = np.sqrt(x * x / 0.04 + y * y / 0.36) - 1.0
        b = np.sqrt(x * x / 0.36 + y * y / 0.04) - 1.0
        return np.tanh(a * b / (_S2 * eps))

    return f


def cosine_mode(x, y):
    """``cos(pi x) cos(pi y)``: a Neumann eigenfunction on ``[-1, 1]^2`` with eigenvalue ``2 pi^2``."""
    return np.cos(np.pi * x) * np.cos(np.pi * y)


def initial_condition(kind: str, eps: float = 0.1, value: float | None = None):
    """Resolve a selector such as ``"test2"`` or ``"constant:0.5"`` to ``u0(x, y)``."""
    if kind.startswith("constant"):
        if ":" in kind:
            value = float(kind.split(":", 1)[1])
        c = 0.0 if value is None else float(value)
        return lambda x, y: np.full(np.broadcast(x, y).shape, c)
    if kind == "test1":
        return circle_tanh(eps)
    if kind == "test2":
        return radial_tanh(eps)
    if kind == "test3":
        return cross_tanh(eps)
    if kind == "cosine":
        return cosine_mode
    raise ValueError(f"unknown initial condition {kind!r}; expected one of {INITIAL_KINDS}")
