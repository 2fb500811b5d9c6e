"""Regularized quantum hydrodynamics as finite particle systems.

Three evolution modes for an ensemble of weighted particles:

  * hamiltonian -- all fluid variables smoothed.  The particles obey the
    canonical equations of

        h = 1/2M sum_ab p_a p_b I^{KK}_ab
          + hbar^2/8M sum_ab w_a w_b I^{dKdK}_ab
          + sum_a w_a (K*V)(q_a)

    integrated with the symplectic implicit midpoint rule.  Note the
    nonlocal kinetic term: these are peakon-like equations, not Newton.

  * lagrangian -- only the O(hbar^2) term smoothed.  Plain Newtonian
    kinetic energy, bare potential, and a quantum inter-particle force
    from the gradient of

        Q = hbar^2/8M sum_ab w_a w_b I^{dKdK}_ab ,

    i.e. M qdd_a = -V'(q_a) - (1/w_a) dQ/dq_a, integrated with RK4.

  * classical -- the cold-fluid closure: N independent Newtonian flows
    M qdd = -V'(q), no coupling of any kind.

The hbar^2 -> 0 limit of both regularized modes is regular and lands on
the classical mode.  In the lagrangian and classical modes the stored
momenta are velocity momenta p_a = M qdot_a (the path-weighted canonical
momenta M w_a qdot_a only matter for bookkeeping, which the reports do
via the weighted momentum sum).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensembles import BohmionEnsemble
from .errors import DomainError
from .integrators import CanonicalState, PhysicalConstants, implicit_midpoint_step, rk4_step
from .kernels import QuadratureGrid, SmoothingKernel, pair_integral_bundle
from .potentials import Potential

HAMILTONIAN = "hamiltonian"
LAGRANGIAN = "lagrangian"
CLASSICAL = "classical"
MODES = (HAMILTONIAN, LAGRANGIAN, CLASSICAL)


class _SampledPotential:
    """Potential sampled once on the quadrature grid, for smoothing."""

    def __init__(self, potential: Potential, grid: QuadratureGrid):
        self.values = potential.value(grid.points)
        self.weighted = self.values * grid.weights
        self.grid = grid

    def smoothed(self, kernel: SmoothingKernel, q) -> np.ndarray:
        """(K*V)(q_a) by the trapezoid sum."""
        u = self.grid.points[None, :] - np.atleast_1d(q)[:, None]
        return kernel.value(u) @ self.weighted

    def smoothed_grad(self, kernel: SmoothingKernel, q) -> np.ndarray:
        """d(K*V)/dq, differentiating the trapezoid sum term by term."""
        u = self.grid.points[None, :] - np.atleast_1d(q)[:, None]
        return -(kernel.derivative(u) @ self.weighted)


def rqhd_hamiltonian(
    ens: BohmionEnsemble,
    potential: Potential,
    kernel: SmoothingKernel,
    grid: QuadratureGrid,
    consts: PhysicalConstants,
) -> float:
    """Energy of the fully smoothed (hamiltonian-mode) particle system."""
    bundle = pair_integral_bundle(ens, kernel, grid, with_grads=False)
    sampled = _SampledPotential(potential, grid)
    return _rqhd_energy(ens, bundle, sampled, kernel, consts)


def _rqhd_energy(ens, bundle, sampled, kernel, consts) -> float:
    m, hbar = consts.mass, consts.hbar
    kinetic = 0.5 / m * ens.p @ bundle.kk @ ens.p
    quantum = hbar**2 / (8.0 * m) * ens.w @ bundle.dkdk @ ens.w
    ext = float(ens.w @ sampled.smoothed(kernel, ens.q))
    return float(kinetic + quantum + ext)


def rqhd_grad(
    ens: BohmionEnsemble,
    potential: Potential,
    kernel: SmoothingKernel,
    grid: QuadratureGrid,
    consts: PhysicalConstants,
):
    """(dh/dq_a, dh/dp_a) of the hamiltonian-mode energy."""
    bundle = pair_integral_bundle(ens, kernel, grid, with_grads=True)
    sampled = _SampledPotential(potential, grid)
    return _rqhd_grad(ens, bundle, sampled, kernel, consts)


def _rqhd_grad(ens, bundle, sampled, kernel, consts):
    m, hbar = consts.mass, consts.hbar
    dq = (
        0.5 / m * np.einsum("a,b,abc->c", ens.p, ens.p, bundle.kk_grad)
        + hbar**2 / (8.0 * m) * np.einsum("a,b,abc->c", ens.w, ens.w, bundle.dkdk_grad)
        + ens.w * sampled.smoothed_grad(kernel, ens.q)
    )
    dp = bundle.kk @ ens.p / m
    return dq, dp


def lagrangian_reg_accel(
    ens: BohmionEnsemble,
    potential: Potential,
    kernel: SmoothingKernel,
    grid: QuadratureGrid,
    consts: PhysicalConstants,
) -> np.ndarray:
    """Accelerations of the lagrangian-mode particles.

    M qdd_a = -V'(q_a) - (hbar^2/8M) (1/w_a) d/dq_a sum_bc w_b w_c I^{dKdK}_bc.
    The potential is NOT smoothed here and the kinetic weights are plain
    w_a; this mode differs from the hamiltonian regularization by design.
    """
    m, hbar = consts.mass, consts.hbar
    force = -potential.grad(ens.q)
    if hbar != 0.0:
        bundle = pair_integral_bundle(ens, kernel, grid, with_grads=True)
        quantum = np.einsum("b,c,bca->a", ens.w, ens.w, bundle.dkdk_grad)
        force = force - hbar**2 / (8.0 * m) * quantum / ens.w
    return force / m


def lagrangian_energy(
    ens_q, velocities, w, potential, kernel, grid, consts
) -> float:
    """Conserved energy of the lagrangian mode (weighted kinetic + V + Q)."""
    m, hbar = consts.mass, consts.hbar
    e = 0.5 * m * float(w @ np.asarray(velocities) ** 2)
    e += float(w @ potential.value(ens_q))
    if hbar != 0.0:
        bundle = pair_integral_bundle(
            BohmionEnsemble(q=ens_q, p=np.zeros_like(w), w=w), kernel, grid, with_grads=False
        )
        e += hbar**2 / (8.0 * m) * float(w @ bundle.dkdk @ w)
    return e


@dataclass
class ParticleTrajectory:
    """Strided time series of an ensemble evolution."""

    mode: str
    times: np.ndarray
    q: np.ndarray               # (frames, N)
    p: np.ndarray               # (frames, N)
    w: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray        # mode-appropriate conserved momentum

    @property
    def final(self) -> BohmionEnsemble:
        return BohmionEnsemble(q=self.q[-1], p=self.p[-1], w=self.w)

    def energy_drift(self) -> float:
        e0 = self.energy[0]
        scale = abs(e0) if e0 != 0.0 else 1.0
        return float(np.max(np.abs(self.energy - e0)) / scale)

    def momentum_drift(self) -> float:
        return float(np.max(np.abs(self.momentum - self.momentum[0])))


def _default_grid(
    ens: BohmionEnsemble, kernel: SmoothingKernel, consts, dt, steps
) -> QuadratureGrid:
    # worst-case drift speed of the nonlocal kinetic term is
    # max|p| / (M min w); pad the covered interval by that travel
    speed = float(np.max(np.abs(ens.p))) / (consts.mass * float(np.min(ens.w)))
    travel = speed * dt * steps + 2.0 * kernel.alpha
    return QuadratureGrid.covering(kernel, ens.q, travel=travel)


def _check_coverage(q, kernel: SmoothingKernel, grid: QuadratureGrid) -> None:
    if q.min() - grid.lo < kernel.pad or grid.hi - q.max() < kernel.pad:
        raise DomainError(
            f"particles at [{q.min():.3g}, {q.max():.3g}] left the region covered "
            f"by the quadrature grid [{grid.lo:.3g}, {grid.hi:.3g}]"
        )


def evolve_rqhd(
    ens0: BohmionEnsemble,
    potential: Potential,
    kernel: SmoothingKernel,
    dt: float,
    steps: int,
    consts: PhysicalConstants,
    grid: QuadratureGrid | None = None,
    stride: int = 1,
) -> ParticleTrajectory:
    """Implicit-midpoint flow of the hamiltonian-mode canonical equations."""
    if grid is None:
        grid = _default_grid(ens0, kernel, consts, dt, steps)
    sampled = _SampledPotential(potential, grid)
    w = ens0.w

    def grad(q, p):
        _check_coverage(q, kernel, grid)
        ens = BohmionEnsemble(q=q, p=p, w=w)
        bundle = pair_integral_bundle(ens, kernel, grid, with_grads=True)
        return _rqhd_grad(ens, bundle, sampled, kernel, consts)

    def energy(q, p):
        ens = BohmionEnsemble(q=q, p=p, w=w)
        bundle = pair_integral_bundle(ens, kernel, grid, with_grads=False)
        return _rqhd_energy(ens, bundle, sampled, kernel, consts)

    state = CanonicalState(q=ens0.q.copy(), p=ens0.p.copy())
    frames_t, frames_q, frames_p, frames_e = [0.0], [state.q.copy()], [state.p.copy()], [
        energy(state.q, state.p)
    ]
    for step in range(1, steps + 1):
        state = implicit_midpoint_step(grad, state, dt)
        if step % stride == 0 or step == steps:
            frames_t.append(step * dt)
            frames_q.append(state.q.copy())
            frames_p.append(state.p.copy())
            frames_e.append(energy(state.q, state.p))
    p_arr = np.asarray(frames_p)
    return ParticleTrajectory(
        mode=HAMILTONIAN,
        times=np.asarray(frames_t),
        q=np.asarray(frames_q),
        p=p_arr,
        w=w.copy(),
        energy=np.asarray(frames_e),
        momentum=p_arr.sum(axis=1),
    )


def _evolve_second_order(
    mode, ens0, dt, steps, consts, stride, accel, energy
) -> ParticleTrajectory:
    """Shared RK4 loop for the Newtonian-form modes; state y = (q, v)."""
    mass = consts.mass
    y = np.stack([ens0.q, ens0.p / mass])

    def rhs(y):
        return np.stack([y[1], accel(y[0], y[1])])

    frames_t, frames_q, frames_v, frames_e = [0.0], [y[0].copy()], [y[1].copy()], [
        energy(y[0], y[1])
    ]
    for step in range(1, steps + 1):
        y = rk4_step(rhs, y, dt)
        if step % stride == 0 or step == steps:
            frames_t.append(step * dt)
            frames_q.append(y[0].copy())
            frames_v.append(y[1].copy())
            frames_e.append(energy(y[0], y[1]))
    v_arr = np.asarray(frames_v)
    weight = ens0.w if mode == LAGRANGIAN else np.ones_like(ens0.w)
    return ParticleTrajectory(
        mode=mode,
        times=np.asarray(frames_t),
        q=np.asarray(frames_q),
        p=mass * v_arr,
        w=ens0.w.copy(),
        energy=np.asarray(frames_e),
        momentum=mass * v_arr @ weight,
    )


def evolve_lagrangian(
    ens0: BohmionEnsemble,
    potential: Potential,
    kernel: SmoothingKernel,
    dt: float,
    steps: int,
    consts: PhysicalConstants,
    grid: QuadratureGrid | None = None,
    stride: int = 1,
) -> ParticleTrajectory:
    """RK4 flow of the lagrangian-mode second-order equations."""
    if grid is None:
        travel = float(np.max(np.abs(ens0.p))) / consts.mass * dt * steps + 2.0 * kernel.alpha
        grid = QuadratureGrid.covering(kernel, ens0.q, travel=travel)
    w = ens0.w

    def accel(q, v):
        if consts.hbar != 0.0:
            _check_coverage(q, kernel, grid)
        return lagrangian_reg_accel(
            BohmionEnsemble(q=q, p=consts.mass * v, w=w), potential, kernel, grid, consts
        )

    def energy(q, v):
        return lagrangian_energy(q, v, w, potential, kernel, grid, consts)

    return _evolve_second_order(LAGRANGIAN, ens0, dt, steps, consts, stride, accel, energy)


def classical_closure_evolve(
    ens0: BohmionEnsemble,
    potential: Potential,
    dt: float,
    steps: int,
    consts: PhysicalConstants,
    stride: int = 1,
) -> ParticleTrajectory:
    """Cold-fluid closure: N independent Newtonian flows M qdd = -V'(q)."""
    mass = consts.mass

    def accel(q, v):
        return -potential.grad(q) / mass

    def energy(q, v):
        return float(ens0.w @ (0.5 * mass * np.asarray(v) ** 2 + potential.value(q)))

    return _evolve_second_order(CLASSICAL, ens0, dt, steps, consts, stride, accel, energy)


def reconstruct_fields(
    ens: BohmionEnsemble, kernel: SmoothingKernel, grid: QuadratureGrid
):
    """Smoothed fields mubar(x) = sum_a p_a K(x - q_a), Dbar(x) = sum_a w_a K(x - q_a)."""
    kmat = kernel.value(grid.points[None, :] - ens.q[:, None])
    return ens.p @ kmat, ens.w @ kmat
