"""Grid Schrodinger propagator and the Madelung momentum-map layer.

The hydrodynamic variables are extracted from a wavefunction on a uniform
periodic grid as

    D = |psi|^2,    mu = hbar Im(psi* dpsi/dx),    u = mu / (m D),

and the collective energy

    h(mu, D) = int ( |mu|^2 / 2mD  +  hbar^2 |dD/dx|^2 / 8mD  +  D V ) dx

equals the Dirac energy <psi|H psi> identically, which is the main
cross-check this module exists to provide.  All spatial derivatives here
are spectral (FFT), so both sides of the identity carry the same
discretization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, NormalizationError, StructureError
from .integrators import PhysicalConstants, rk4_step
from .potentials import Potential

DENSITY_MASK_FLOOR = 1e-14     # u = mu/(m D) is undefined below this (relative)
TRAJECTORY_SUPPORT_FLOOR = 1e-12


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass
class WavefunctionGrid:
    """Complex psi on a uniform periodic grid, with sampled potential."""

    x: np.ndarray
    psi: np.ndarray
    constants: PhysicalConstants
    potential: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.psi = np.asarray(self.psi, dtype=complex)
        self.potential = np.asarray(self.potential, dtype=float)
        n = self.x.size
        if not _is_power_of_two(n):
            raise ConfigurationError(f"grid size must be a power of two, got {n}")
        if self.psi.shape != (n,) or self.potential.shape != (n,):
            raise ConfigurationError("psi and potential must match the grid")
        norm = self.norm_squared()
        if abs(norm - 1.0) > 1e-10:
            raise NormalizationError(
                f"wavefunction norm^2 = {norm:.12g}, expected 1 within 1e-10"
            )

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def length(self) -> float:
        return self.n * self.spacing

    @property
    def k(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftfreq(self.n, d=self.spacing)

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.spacing)

    @classmethod
    def from_callable(
        cls,
        psi_fn,
        n: int,
        length: float,
        constants: PhysicalConstants,
        potential: Potential | None = None,
        center: float = 0.0,
        normalize: bool = True,
    ) -> "WavefunctionGrid":
        h = length / n
        x = center - 0.5 * length + h * np.arange(n)
        psi = np.asarray(psi_fn(x), dtype=complex)
        if normalize:
            psi = psi / math.sqrt(float(np.sum(np.abs(psi) ** 2) * h))
        v = (potential or Potential.zero()).value(x)
        return cls(x=x, psi=psi, constants=constants, potential=v)

    def with_psi(self, psi: np.ndarray) -> "WavefunctionGrid":
        return WavefunctionGrid(
            x=self.x, psi=psi, constants=self.constants, potential=self.potential
        )


def spectral_derivative(values: np.ndarray, k: np.ndarray, order: int = 1) -> np.ndarray:
    out = np.fft.ifft((1j * k) ** order * np.fft.fft(values))
    if np.isrealobj(values):
        return out.real
    return out


@dataclass
class SchrodingerHistory:
    times: np.ndarray
    psis: np.ndarray            # (frames, n)
    grid: WavefunctionGrid      # carries x, constants, potential

    def frame(self, i: int) -> WavefunctionGrid:
        return self.grid.with_psi(self.psis[i])


def split_step_propagate(
    wf: WavefunctionGrid, dt: float, steps: int, stride: int = 1
) -> SchrodingerHistory:
    """Strang-split spectral propagation of i hbar dpsi/dt = H psi.

    Half potential phase, full kinetic phase in Fourier space, half
    potential phase; unitary to round-off.
    """
    consts = wf.constants
    hbar, m = consts.hbar, consts.electron_mass
    vmax = float(np.max(np.abs(wf.potential)))
    if dt * vmax / hbar > 0.5:
        warnings.warn(
            f"dt * max|V| / hbar = {dt * vmax / hbar:.3g} > 0.5; "
            "the potential phase rotates too fast for this step",
            stacklevel=2,
        )
    half_v = np.exp(-0.5j * wf.potential * dt / hbar)
    kinetic = np.exp(-0.5j * hbar * wf.k**2 * dt / m)

    psi = wf.psi.copy()
    frames = [psi.copy()]
    times = [0.0]
    for step in range(1, steps + 1):
        psi = half_v * psi
        psi = np.fft.ifft(kinetic * np.fft.fft(psi))
        psi = half_v * psi
        if step % stride == 0 or step == steps:
            frames.append(psi.copy())
            times.append(step * dt)
    return SchrodingerHistory(times=np.asarray(times), psis=np.asarray(frames), grid=wf)


@dataclass
class HydroFields:
    """Density D, momentum density mu, velocity u (masked in vacuum)."""

    x: np.ndarray
    spacing: float
    density: np.ndarray
    momentum: np.ndarray
    velocity: np.ndarray
    valid: np.ndarray = field(repr=False)


def madelung_fields(wf: WavefunctionGrid) -> HydroFields:
    """Extract (D, mu, u) from psi with spectral derivatives.

    u = mu / (m D) is NaN-masked where D < 1e-14 * max D; the quotient is
    meaningless in vacuum regions.
    """
    psi = wf.psi
    density = np.abs(psi) ** 2
    dpsi = spectral_derivative(psi, wf.k)
    mu = wf.constants.hbar * np.imag(np.conj(psi) * dpsi)
    valid = density >= DENSITY_MASK_FLOOR * density.max()
    velocity = np.full_like(density, np.nan)
    np.divide(mu, wf.constants.electron_mass * density, out=velocity, where=valid)
    return HydroFields(
        x=wf.x, spacing=wf.spacing, density=density, momentum=mu,
        velocity=velocity, valid=valid,
    )


def collective_energy(
    fields: HydroFields, potential: np.ndarray, consts: PhysicalConstants
) -> float:
    """h(mu, D) = int (|mu|^2/2mD + hbar^2 |D'|^2/8mD + D V) dx.

    Contributions from points below the density floor are dropped.
    """
    d = fields.density
    if np.any(d < 0.0):
        raise StructureError("density must be nonnegative")
    k = 2.0 * math.pi * np.fft.fftfreq(d.size, d=fields.spacing)
    dd = spectral_derivative(d, k)
    keep = fields.valid
    m, hbar = consts.electron_mass, consts.hbar
    kinetic = np.where(keep, fields.momentum**2 / (2.0 * m * np.where(keep, d, 1.0)), 0.0)
    fisher = np.where(keep, hbar**2 * dd**2 / (8.0 * m * np.where(keep, d, 1.0)), 0.0)
    return float(np.sum(kinetic + fisher + d * np.asarray(potential)) * fields.spacing)


def dirac_energy(wf: WavefunctionGrid) -> float:
    """<psi|H psi> with spectral kinetic term; oracle side of the identity."""
    consts = wf.constants
    lap = spectral_derivative(wf.psi, wf.k, order=2)
    hpsi = -consts.hbar**2 / (2.0 * consts.electron_mass) * lap + wf.potential * wf.psi
    return float(np.real(np.sum(np.conj(wf.psi) * hpsi)) * wf.spacing)


def quantum_potential(
    density: np.ndarray, spacing: float, consts: PhysicalConstants
) -> np.ndarray:
    """V_Q = -(hbar^2/2m) (sqrt D)'' / sqrt D, NaN where D is below floor."""
    d = np.asarray(density, dtype=float)
    k = 2.0 * math.pi * np.fft.fftfreq(d.size, d=spacing)
    valid = d >= DENSITY_MASK_FLOOR * d.max()
    root = np.sqrt(np.where(valid, d, 1.0))
    lap = spectral_derivative(np.sqrt(np.abs(d)), k, order=2)
    out = np.full_like(d, np.nan)
    factor = -consts.hbar**2 / (2.0 * consts.electron_mass)
    np.divide(factor * lap, root, out=out, where=valid)
    return out


@dataclass
class TrajectorySet:
    """Lagrangian paths q(x0, t) traced through a stored velocity history."""

    seeds: np.ndarray
    times: np.ndarray
    positions: np.ndarray       # (n_seeds, n_times)
    truncated: np.ndarray       # seeds whose path left the supported region

    def order_preserved(self) -> bool:
        return bool(np.all(np.diff(self.positions, axis=0) >= 0.0))


def _support_bounds(fields: HydroFields) -> tuple[float, float]:
    d = fields.density
    idx = np.nonzero(d >= TRAJECTORY_SUPPORT_FLOOR * d.max())[0]
    return float(fields.x[idx[0]]), float(fields.x[idx[-1]])


def _velocity_spline(fields: HydroFields) -> CubicSpline:
    u = np.where(fields.valid, fields.velocity, 0.0)
    return CubicSpline(fields.x, u)


def trace_bohmian(
    history: list[HydroFields], times: np.ndarray, seeds
) -> TrajectorySet:
    """Integrate dq/dt = u(q, t) with RK4 in time, cubic interpolation in x.

    Seeds must be sorted; trajectories leaving the D >= 1e-12 * max D
    region are frozen and flagged truncated.
    """
    seeds = np.atleast_1d(np.asarray(seeds, dtype=float))
    if np.any(np.diff(seeds) < 0.0):
        raise ConfigurationError("seeds must be sorted ascending")
    times = np.asarray(times, dtype=float)
    if len(history) != times.size:
        raise ConfigurationError("history and times must have equal length")

    n_seeds, n_times = seeds.size, times.size
    positions = np.empty((n_seeds, n_times))
    positions[:, 0] = seeds
    truncated = np.zeros(n_seeds, dtype=bool)

    splines = [_velocity_spline(f) for f in history]
    bounds = [_support_bounds(f) for f in history]

    q = seeds.copy()
    for i in range(n_times - 1):
        dt = times[i + 1] - times[i]
        s0, s1 = splines[i], splines[i + 1]
        mid = lambda xx: 0.5 * (s0(xx) + s1(xx))  # noqa: E731

        k1 = s0(q)
        k2 = mid(q + 0.5 * dt * k1)
        k3 = mid(q + 0.5 * dt * k2)
        k4 = s1(q + dt * k3)
        q_new = q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        lo, hi = bounds[i + 1]
        escaped = (q_new < lo) | (q_new > hi)
        q_new = np.where(escaped | truncated, q, q_new)
        truncated |= escaped
        q = q_new
        positions[:, i + 1] = q
    return TrajectorySet(seeds=seeds, times=times, positions=positions, truncated=truncated)


def madelung_history(history: SchrodingerHistory) -> list[HydroFields]:
    return [madelung_fields(history.frame(i)) for i in range(history.times.size)]


def newtonian_limit_check(
    potential: Potential,
    q0: float,
    p0: float,
    t_final: float,
    dt: float,
    consts: PhysicalConstants,
):
    """Integrate M qdd = -V'(q); the hbar^2 -> 0 comparison target."""
    steps = int(round(t_final / dt))
    mass = consts.mass

    def rhs(y):
        return np.array([y[1] / mass, -float(potential.grad(y[0]))])

    y = np.array([float(q0), float(p0)])
    times = np.empty(steps + 1)
    qs = np.empty(steps + 1)
    ps = np.empty(steps + 1)
    times[0], qs[0], ps[0] = 0.0, y[0], y[1]
    for i in range(1, steps + 1):
        y = rk4_step(rhs, y, dt)
        times[i], qs[i], ps[i] = i * dt, y[0], y[1]
    return times, qs, ps
