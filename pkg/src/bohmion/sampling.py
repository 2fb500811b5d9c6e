"""Seeded generators of random smooth states for the randomized suites.

States are built from a handful of low-frequency Fourier modes on top of
a constant background, so densities stay bounded away from zero (the
hydrodynamic quotients mu^2/D need that) and products like |psi|^2 stay
band-limited below Nyquist, which keeps the spectral identities exact up
to round-off.
"""

from __future__ import annotations

import math

import numpy as np

from .integrators import PhysicalConstants
from .potentials import Potential
from .qhd_reference import WavefunctionGrid


def random_smooth_wavefunction(
    n: int,
    length: float,
    consts: PhysicalConstants,
    rng: np.random.Generator,
    potential: Potential | None = None,
    n_modes: int = 12,
    relative_strength: float = 0.45,
) -> WavefunctionGrid:
    """Normalized psi = background + low-k modes on a periodic grid."""
    h = length / n
    x = -0.5 * length + h * np.arange(n)
    psi = np.full(n, 1.0, dtype=complex)
    pert = np.zeros(n, dtype=complex)
    for mode in range(1, n_modes + 1):
        k = 2.0 * math.pi * mode / length
        amp = math.exp(-((mode / (0.5 * n_modes)) ** 2))
        c_plus = (rng.standard_normal() + 1j * rng.standard_normal()) * amp
        c_minus = (rng.standard_normal() + 1j * rng.standard_normal()) * amp
        pert += c_plus * np.exp(1j * k * x) + c_minus * np.exp(-1j * k * x)
    peak = np.max(np.abs(pert))
    if peak > 0:
        pert *= relative_strength / peak
    psi = psi + pert
    psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2) * h))
    v = (potential or Potential.zero()).value(x)
    return WavefunctionGrid(x=x, psi=psi, constants=consts, potential=v)


def random_electronic_field(
    n: int,
    length: float,
    dim: int,
    rng: np.random.Generator,
    n_modes: int = 3,
):
    """Pointwise-normalized random smooth d-vector field on a periodic grid."""
    from .nonadiabatic import ElectronicField

    h = length / n
    r = h * np.arange(n)
    comps = np.zeros((n, dim), dtype=complex)
    for j in range(dim):
        # constant offset keeps the pointwise norm bounded away from zero
        comps[:, j] = rng.standard_normal() + 1j * rng.standard_normal() + 2.0 * (j == 0)
        for mode in range(1, n_modes + 1):
            k = 2.0 * math.pi * mode / length
            amp = 0.5 / mode
            c = (rng.standard_normal() + 1j * rng.standard_normal()) * amp
            d = (rng.standard_normal() + 1j * rng.standard_normal()) * amp
            comps[:, j] += c * np.exp(1j * k * r) + d * np.exp(-1j * k * r)
    return ElectronicField.from_components(r, comps, periodic=True)


def random_pure_density_vectors(n: int, dim: int, rng: np.random.Generator):
    """n random unit vectors in C^dim, for pure per-particle matrices."""
    vecs = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return [v / np.linalg.norm(v) for v in vecs]
