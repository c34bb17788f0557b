"""Drift and diffusion terms of ``du = [Lap u + f(u)] dt + g(u) dW``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DriftSpec",
    "DiffusionSpec",
    "ModelSpec",
    "LipschitzCheck",
    "ModelValidationError",
    "drift_eval",
    "drift_deriv",
    "diffusion_eval",
    "validate_one_sided_lipschitz",
]


class ModelValidationError(ValueError):
    def __init__(self, message: str, rule: str | None = None):
        super().__init__(message)
        self.rule = rule


def _trim(coeffs) -> tuple[float, ...]:
    c = [float(v) for v in coeffs]
    while c and c[-1] == 0.0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class DriftSpec:
    """Polynomial drift ``f(u) = scale * sum_k poly[k] u**k``.

    Use :meth:`template` for the odd form ``c0 u - c1 u^3 - c2 u^5 - ...``;
    the raw monomial form exists so that inadmissible drifts can be
    represented and rejected by :func:`validate_one_sided_lipschitz`.
    """

    poly: tuple[float, ...]
    scale: float = 1.0
    _odd: bool = field(init=False, repr=False, compare=False)
    _half: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "poly", _trim(self.poly))
        odd = all(c == 0.0 for c in self.poly[0::2])
        object.__setattr__(self, "_odd", odd)
        # odd part in powers of u^2: f(u) = u * sum_k a_k (u^2)^k
        object.__setattr__(self, "_half", np.array(self.poly[1::2], dtype=float) * self.scale)

    @classmethod
    def template(cls, *c, scale: float = 1.0) -> "DriftSpec":
        if any(v < 0 for v in c):
            raise ModelValidationError("template coefficients c_i must be nonnegative", "template")
        poly = [0.0] * (2 * len(c))
        for i, ci in enumerate(c):
            poly[2 * i + 1] = ci if i == 0 else -ci
        return cls(tuple(poly), scale)

    @classmethod
    def u_minus_uq(cls, q: int, scale: float = 1.0) -> "DriftSpec":
        """``f(u) = scale * (u - u^q)``; ``scale = 1/eps^2`` gives Allen-Cahn."""
        if q < 3 or q % 2 == 0:
            raise ModelValidationError(f"q must be an odd integer >= 3, got {q}", "parity")
        poly = [0.0] * (q + 1)
        poly[1] = 1.0
        poly[q] = -1.0
        return cls(tuple(poly), scale)

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls(())

    @property
    def degree(self) -> int:
        return len(self.poly) - 1

    @property
    def q(self) -> int:
        """Degree of the leading term (1 for linear drift, 0 for no drift)."""
        return max(self.degree, 0)

    @property
    def linear_coefficient(self) -> float:
        return self.scale * (self.poly[1] if len(self.poly) > 1 else 0.0)

    @property
    def is_linear(self) -> bool:
        return self.degree <= 1

    def __call__(self, u):
        return drift_eval(self, u)

    def derivative(self, u):
        return drift_deriv(self, u)


def drift_eval(spec: DriftSpec, u):
    u = np.asarray(u, dtype=float)
    if not spec.poly or spec.scale == 0.0:
        return np.zeros_like(u)
    if spec._odd:
        u2 = u * u
        acc = np.full_like(u, spec._half[-1])
        for a in spec._half[-2::-1]:
            acc = acc * u2 + a
        return u * acc
    return spec.scale * np.polynomial.polynomial.polyval(u, spec.poly)


def drift_deriv(spec: DriftSpec, u):
    u = np.asarray(u, dtype=float)
    if not spec.poly or spec.scale == 0.0:
        return np.zeros_like(u)
    if spec._odd:
        u2 = u * u
        k = len(spec._half) - 1
        acc = np.full_like(u, (2 * k + 1) * spec._half[-1])
        for j in range(k - 1, -1, -1):
            acc = acc * u2 + (2 * j + 1) * spec._half[j]
        return acc
    d = np.polynomial.polynomial.polyder(spec.poly)
    return spec.scale * np.polynomial.polynomial.polyval(u, d)


@dataclass(frozen=True)
class DiffusionSpec:
    """``g(u) = delta * u`` (linear) or ``delta * sqrt(u^2 + 1)`` (sqrt_shift)."""

    kind: str = "linear"
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "sqrt_shift"):
            raise ModelValidationError(f"unknown diffusion kind {self.kind!r}", "kind")
        if not self.delta >= 0:
            raise ModelValidationError(f"noise intensity must be >= 0, got {self.delta}", "delta")

    @property
    def lipschitz_constant(self) -> float:
        return self.delta

    def __call__(self, u):
        return diffusion_eval(self, u)


def diffusion_eval(spec: DiffusionSpec, u):
    u = np.asarray(u, dtype=float)
    if spec.kind == "linear":
        return spec.delta * u
    return spec.delta * np.sqrt(u * u + 1.0)


@dataclass(frozen=True)
class LipschitzCheck:
    ok: bool
    mu: float
    rule: str | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def validate_one_sided_lipschitz(
    spec: DriftSpec, n_samples: int = 10_000, bound: float = 10.0, seed: int = 0
) -> LipschitzCheck:
    """Check that ``(a-b)(f(a)-f(b)) <= mu (a-b)^2`` with ``mu = c0 + 1``.

    The structural rules come first: the leading power must be odd and
    its coefficient negative.  Then the inequality is sampled on pairs
    drawn uniformly from ``[-bound, bound]^2``.
    """
    mu = spec.linear_coefficient + 1.0
    if spec.scale < 0:
        return LipschitzCheck(False, mu, "sign", "drift scale must be nonnegative")
    if not spec.is_linear and spec.scale > 0:
        lead = spec.poly[-1]
        if spec.degree % 2 == 0:
            return LipschitzCheck(False, mu, "parity", f"leading power {spec.degree} is even")
        if lead > 0:
            return LipschitzCheck(False, mu, "sign", f"leading coefficient of u^{spec.degree} is positive")
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-bound, bound, size=(2, n_samples))
    lhs = (a - b) * (drift_eval(spec, a) - drift_eval(spec, b))
    rhs = mu * (a - b) ** 2
    slack = 1e-12 * np.maximum(np.abs(lhs), np.abs(rhs))
    bad = np.flatnonzero(lhs > rhs + slack)
    if bad.size:
        i = bad[0]
        return LipschitzCheck(
            False, mu, "sampled", f"inequality fails at a={a[i]:.6g}, b={b[i]:.6g} with mu={mu:.6g}"
        )
    return LipschitzCheck(True, mu)


@dataclass(frozen=True)
class ModelSpec:
    drift: DriftSpec
    diffusion: DiffusionSpec

    def __post_init__(self):
        chk = validate_one_sided_lipschitz(self.drift)
        if not chk.ok:
            raise ModelValidationError(f"drift rejected ({chk.rule}): {chk.reason}", chk.rule)

    @property
    def q(self) -> int:
        return self.drift.q

    def f(self, u):
        return drift_eval(self.drift, u)

    def df(self, u):
        return drift_deriv(self.drift, u)

    def g(self, u):
        return diffusion_eval(self.diffusion, u)
