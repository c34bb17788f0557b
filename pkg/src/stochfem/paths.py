"""Seeded scalar Wiener increments.

Draws come from numpy's Philox-4x64 counter-based bit generator keyed
by a 64-bit seed, turned into normals by ``Generator.standard_normal``
(ziggurat).  Per-sample keys are derived from a master seed with the
splitmix64 finalizer, so sample ``i`` is the same no matter which worker
produces it or in what order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["WienerPath", "splitmix64", "sample_seed", "sample_path", "coarsen_path"]

_MASK = (1 << 64) - 1
GENERATOR_ID = "philox4x64-ziggurat"


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def sample_seed(master_seed: int, index: int) -> int:
    """Key for sample ``index`` of an ensemble."""
    return splitmix64(splitmix64(int(master_seed) & _MASK) ^ (int(index) & _MASK))


@dataclass(frozen=True, eq=False)
class WienerPath:
    """Increments of ``W`` on a uniform grid of step ``tau``.

    ``w`` holds ``W(t_n)`` for ``n = 0..N``.  Coarsened paths subsample
    ``w`` of the path they came from, so nested coarsenings agree bit for
    bit with a single coarsening by the product factor.
    """

    tau: float
    increments: np.ndarray
    seed: int
    factor: int = 1  # fine steps summed into each increment
    w: np.ndarray | None = None

    def __post_init__(self):
        if self.w is None:
            w = np.concatenate([[0.0], np.cumsum(self.increments)])
            w.setflags(write=False)
            object.__setattr__(self, "w", w)

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    @property
    def displacement(self) -> float:
        return float(self.w[-1])

    def values(self) -> np.ndarray:
        """``W(t_n)`` for ``n = 0..N`` with ``W(0) = 0``."""
        return self.w


def sample_path(n_steps: int, tau: float, seed: int) -> WienerPath:
    """``n_steps`` independent N(0, tau) increments keyed by ``seed``."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    rng = np.random.Generator(np.random.Philox(key=int(seed) & _MASK))
    inc = np.sqrt(tau) * rng.standard_normal(int(n_steps))
    inc.setflags(write=False)
    return WienerPath(float(tau), inc, int(seed))


def coarsen_path(path: WienerPath, factor: int) -> WienerPath:
    """Merge consecutive blocks of ``factor`` increments into one."""
    factor = int(factor)
    if factor < 1 or path.n_steps % factor:
        raise ValueError(f"factor {factor} does not divide {path.n_steps} steps")
    if factor == 1:
        return path
    w = path.w[::factor].copy()
    inc = np.diff(w)
    inc.setflags(write=False)
    w.setflags(write=False)
    return WienerPath(path.tau * factor, inc, path.seed, path.factor * factor, w)
