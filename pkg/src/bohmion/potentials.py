"""Classical potential families: zero, harmonic, quartic double well, polynomial."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Potential:
    name: str
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    @classmethod
    def zero(cls) -> "Potential":
        return cls(
            name="free",
            value=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            grad=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        )

    @classmethod
    def harmonic(cls, omega: float = 1.0, mass: float = 1.0) -> "Potential":
        """V(x) = (1/2) M omega^2 x^2."""
        if omega <= 0 or mass <= 0:
            raise ConfigurationError("harmonic potential needs omega > 0 and mass > 0")
        k = mass * omega**2
        return cls(
            name="harmonic",
            value=lambda x: 0.5 * k * np.asarray(x, dtype=float) ** 2,
            grad=lambda x: k * np.asarray(x, dtype=float),
            params={"omega": omega, "mass": mass},
        )

    @classmethod
    def double_well(cls, height: float = 1.0, half_separation: float = 1.0) -> "Potential":
        """V(x) = h (x^2 - a^2)^2 with minima at x = +-a."""
        if height <= 0 or half_separation <= 0:
            raise ConfigurationError("double well needs positive height and separation")
        a2 = half_separation**2

        def value(x):
            x = np.asarray(x, dtype=float)
            return height * (x**2 - a2) ** 2

        def grad(x):
            x = np.asarray(x, dtype=float)
            return 4.0 * height * x * (x**2 - a2)

        return cls(
            name="double_well",
            value=value,
            grad=grad,
            params={"height": height, "half_separation": half_separation},
        )

    @classmethod
    def polynomial(cls, coeffs) -> "Potential":
        """V(x) = sum_k c_k x^k with ascending coefficients."""
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ConfigurationError("polynomial potential needs a 1D coefficient list")
        poly = np.polynomial.Polynomial(c)
        dpoly = poly.deriv()
        return cls(
            name="polynomial",
            value=lambda x: poly(np.asarray(x, dtype=float)),
            grad=lambda x: dpoly(np.asarray(x, dtype=float)),
            params={"coeffs": list(map(float, c))},
        )
