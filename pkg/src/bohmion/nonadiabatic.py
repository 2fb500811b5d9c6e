"""Coupled classical-quantum dynamics and quantum-geometry diagnostics.

Three layers:

  * the classical restriction of the mean-field model: a nuclear phase
    point (q, p) coupled to a finite-dimensional electronic state psi_e,

        M qdd = -V_n'(q) - <psi|dH_e/dq psi>,   i hbar psidot = H_e(q) psi;

  * exact-factorization Bohmions: weighted particles (q_a, p_a, w_a)
    carrying electronic density matrices rho_a with Tr rho_a = w_a.  The
    hamiltonian variant smooths everything,

        h = 1/2M sum p_a p_b I^{KK}_ab
          + hbar^2/4M sum (<rho_a|rho_b> - w_a w_b) I^{dKdK}_ab
          + sum_a <rho_a | Hbar_e(q_a)>,

        i hbar rhodot_a = [Hbar_e(q_a), rho_a]
                          + hbar^2/2M sum_b [rho_b, rho_a] I^{dKdK}_ab,

    with Hbar_e(q) = int H_e(r) K(r - q) dr.  The lagrangian variant
    smooths only the O(hbar^2) coupling: plain kinetic energy p_a^2/2Mw_a
    and the unfiltered H_e(q_a) in both the force and the rho equation.

  * diagnostics of the electronic geometry over a nuclear coordinate:
    Berry connection A = <psi|-i hbar dpsi/dr>, quantum geometric tensor
    Q = <dpsi|(1 - psi psi^dag)|dpsi>, its real part T, the effective
    electronic potential epsilon evaluated by two independent routes, and
    discrete Berry loop phases.

The wavefunction-side derivatives use 4th-order central differences; the
density-matrix route of the epsilon/`|grad rho|^2 = 2 Tr T` identities
deliberately uses 2nd-order stencils so the two routes stay independent
discretizations of the same continuum objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ensembles import BohmionEnsemble
from .errors import (
    ConfigurationError,
    DiagnosticError,
    DomainError,
    StructureError,
)
from .integrators import (
    CanonicalState,
    PhysicalConstants,
    implicit_midpoint_step,
    unitary_propagate_vector,
    unitary_step,
    validate_density_matrix,
)
from .kernels import QuadratureGrid, SmoothingKernel, pair_integral_bundle, pair_integral_dKdK
from .potentials import Potential

HAMILTONIAN = "hamiltonian"
LAGRANGIAN = "lagrangian"
VARIANTS = (HAMILTONIAN, LAGRANGIAN)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


# ---------------------------------------------------------------------------
# electronic models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ElectronicModel:
    """Hermitian H_e(q) on a finite electronic space, with its q-derivative."""

    dim: int
    h: Callable[[float], np.ndarray]
    dh: Callable[[float], np.ndarray]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (2 <= self.dim <= 16):
            raise ConfigurationError(f"electronic dimension must be in [2, 16], got {self.dim}")

    @classmethod
    def constant(cls, matrix) -> "ElectronicModel":
        m = np.asarray(matrix, dtype=complex)
        zero = np.zeros_like(m)
        return cls(dim=m.shape[0], h=lambda q: m, dh=lambda q: zero, name="constant")

    @classmethod
    def linear_vibronic(cls, kappa: float = 1.0, delta: float = 1.0) -> "ElectronicModel":
        """H_e(q) = kappa q sigma_z + delta sigma_x."""
        slope = kappa * SIGMA_Z

        def h(q):
            return kappa * q * SIGMA_Z + delta * SIGMA_X

        return cls(
            dim=2, h=h, dh=lambda q: slope, name="linear_vibronic",
            params={"kappa": kappa, "delta": delta},
        )

    @classmethod
    def polynomial(cls, matrices) -> "ElectronicModel":
        """H_e(q) = sum_k C_k q^k for Hermitian coefficient matrices C_k."""
        mats = [np.asarray(m, dtype=complex) for m in matrices]
        dim = mats[0].shape[0]

        def h(q):
            out = np.zeros((dim, dim), dtype=complex)
            for k, m in enumerate(mats):
                out += m * q**k
            return out

        def dh(q):
            out = np.zeros((dim, dim), dtype=complex)
            for k, m in enumerate(mats[1:], start=1):
                out += k * m * q ** (k - 1)
            return out

        return cls(dim=dim, h=h, dh=dh, name="polynomial")

    def validate(self, q_samples, herm_tol: float = 1e-12, fd_tol: float = 1e-7) -> None:
        step = 1e-6
        for q in np.atleast_1d(q_samples):
            hq = self.h(float(q))
            scale = max(1.0, float(np.max(np.abs(hq))))
            if np.max(np.abs(hq - hq.conj().T)) > herm_tol * scale:
                raise StructureError(f"H_e({q}) is not Hermitian")
            fd = (self.h(float(q) + step) - self.h(float(q) - step)) / (2.0 * step)
            if np.max(np.abs(fd - self.dh(float(q)))) > fd_tol * max(1.0, np.max(np.abs(fd))):
                raise StructureError(f"dH_e/dq at {q} disagrees with finite differences")


class SmoothedElectronicModel:
    """H_e and dH_e/dq sampled on a grid, for kernel smoothing.

    Hbar_e(q) = sum_i wt_i K(x_i - q) H_e(x_i); its q-derivative is the
    term-by-term derivative of the same sum, so gradients and values stay
    mutually consistent.
    """

    def __init__(self, model: ElectronicModel, grid: QuadratureGrid):
        self.model = model
        self.grid = grid
        pts = grid.points
        wts = grid.weights
        self._h_flat = np.stack([model.h(float(x)) for x in pts]).reshape(grid.n, -1)
        self._h_flat *= wts[:, None]
        self._dim = model.dim

    def smoothed_h(self, kernel: SmoothingKernel, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        kmat = kernel.value(self.grid.points[None, :] - q[:, None])
        out = kmat @ self._h_flat
        return out.reshape(q.size, self._dim, self._dim)

    def smoothed_dh(self, kernel: SmoothingKernel, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        kmat = -kernel.derivative(self.grid.points[None, :] - q[:, None])
        out = kmat @ self._h_flat
        return out.reshape(q.size, self._dim, self._dim)


def smoothed_He(
    model: ElectronicModel,
    kernel: SmoothingKernel,
    grid: QuadratureGrid,
    q: float,
) -> np.ndarray:
    """Entrywise smoothed electronic Hamiltonian Hbar_e(q); Hermitian exactly."""
    out = SmoothedElectronicModel(model, grid).smoothed_h(kernel, q)[0]
    return 0.5 * (out + out.conj().T)


# ---------------------------------------------------------------------------
# mean-field classical restriction
# ---------------------------------------------------------------------------

@dataclass
class MeanFieldState:
    q: float
    p: float
    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        norm = float(np.linalg.norm(self.psi))
        if abs(norm - 1.0) > 1e-10:
            raise StructureError(f"electronic state norm {norm:.12g} != 1")


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    psi: np.ndarray              # (frames, d)
    energy: np.ndarray
    norm: np.ndarray

    def energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / (abs(e0) if e0 else 1.0))

    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - 1.0)))


def meanfield_evolve(
    state0: MeanFieldState,
    v_n: Potential,
    model: ElectronicModel,
    consts: PhysicalConstants,
    dt: float,
    steps: int,
    stride: int = 1,
) -> MeanFieldTrajectory:
    """Strang-split mean-field flow: half unitary / midpoint / half unitary.

    The classical-quantum coupling runs entirely through <psi|dH_e/dq psi>.
    """
    hbar, mass = consts.hbar, consts.mass
    q, p, psi = float(state0.q), float(state0.p), state0.psi.copy()

    def energy(q, p, psi):
        return (
            p**2 / (2.0 * mass)
            + float(v_n.value(q))
            + float(np.real(np.conj(psi) @ (model.h(q) @ psi)))
        )

    def grad(qa, pa):
        force = float(v_n.grad(qa[0])) + float(
            np.real(np.conj(psi) @ (model.dh(qa[0]) @ psi))
        )
        return np.array([force]), np.array([pa[0] / mass])

    times, qs, ps, psis, energies, norms = [0.0], [q], [p], [psi.copy()], [
        energy(q, p, psi)
    ], [float(np.linalg.norm(psi))]
    for step in range(1, steps + 1):
        psi = unitary_propagate_vector(psi, model.h(q), 0.5 * dt, hbar)
        state = implicit_midpoint_step(grad, CanonicalState(q=[q], p=[p]), dt)
        q, p = float(state.q[0]), float(state.p[0])
        psi = unitary_propagate_vector(psi, model.h(q), 0.5 * dt, hbar)
        if step % stride == 0 or step == steps:
            times.append(step * dt)
            qs.append(q)
            ps.append(p)
            psis.append(psi.copy())
            energies.append(energy(q, p, psi))
            norms.append(float(np.linalg.norm(psi)))
    return MeanFieldTrajectory(
        times=np.asarray(times), q=np.asarray(qs), p=np.asarray(ps),
        psi=np.asarray(psis), energy=np.asarray(energies), norm=np.asarray(norms),
    )


# ---------------------------------------------------------------------------
# exact-factorization Bohmions
# ---------------------------------------------------------------------------

@dataclass
class EFBohmionState:
    """Bohmion ensemble carrying one electronic density matrix per particle.

    Trace convention: Tr rho_a = w_a, so the total electronic trace is 1
    and pure particles keep Tr rho_a^2 = w_a^2.
    """

    ensemble: BohmionEnsemble
    rhos: np.ndarray             # (N, d, d) complex

    def __post_init__(self):
        self.rhos = np.asarray(self.rhos, dtype=complex)
        n = self.ensemble.n
        if self.rhos.ndim != 3 or self.rhos.shape[0] != n:
            raise StructureError(
                f"need one density matrix per particle, got shape {self.rhos.shape}"
            )
        for a in range(n):
            validate_density_matrix(self.rhos[a], weight=float(self.ensemble.w[a]))

    @property
    def dim(self) -> int:
        return self.rhos.shape[1]

    @classmethod
    def from_pure(cls, q, p, w, vectors) -> "EFBohmionState":
        """Build rho_a = w_a v_a v_a^dag from per-particle state vectors."""
        ens = BohmionEnsemble(q=q, p=p, w=w)
        rhos = []
        for a, vec in enumerate(vectors):
            v = np.asarray(vec, dtype=complex)
            v = v / np.linalg.norm(v)
            rhos.append(ens.w[a] * np.outer(v, v.conj()))
        return cls(ensemble=ens, rhos=np.asarray(rhos))

    def purities(self) -> np.ndarray:
        return np.array([float(np.real(np.trace(r @ r))) for r in self.rhos])

    def traces(self) -> np.ndarray:
        return np.array([float(np.real(np.trace(r))) for r in self.rhos])


def _rho_overlaps(rhos: np.ndarray) -> np.ndarray:
    """Real symmetric matrix <rho_a|rho_b> = Tr(rho_a rho_b)."""
    flat = rhos.reshape(rhos.shape[0], -1)
    return np.real(flat.conj() @ flat.T)


def _check_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ConfigurationError(f"variant must be one of {VARIANTS}, got {variant!r}")


def ef_reg_hamiltonian(
    state: EFBohmionState,
    model: ElectronicModel,
    kernel: SmoothingKernel,
    grid: QuadratureGrid,
    consts: PhysicalConstants,
    variant: str = HAMILTONIAN,
    _smoothed: SmoothedElectronicModel | None = None,
) -> float:
    """Energy of the EF Bohmion system.

    For a single pure particle the hbar^2 term vanishes identically
    (<rho|rho> = w^2) and only the electronic term drives the motion.
    """
    _check_variant(variant)
    ens = state.ensemble
    m, hbar = consts.mass, consts.hbar
    bundle = pair_integral_bundle(ens, kernel, grid, with_grads=False)
    overlaps = _rho_overlaps(state.rhos)
    coupling = overlaps - np.outer(ens.w, ens.w)
    quantum = hbar**2 / (4.0 * m) * float(np.sum(coupling * bundle.dkdk))

    if variant == HAMILTONIAN:
        sm = _smoothed or SmoothedElectronicModel(model, grid)
        h_at = sm.smoothed_h(kernel, ens.q)
        kinetic = 0.5 / m * ens.p @ bundle.kk @ ens.p
    else:
        h_at = np.stack([model.h(float(q)) for q in ens.q])
        kinetic = float(np.sum(ens.p**2 / (2.0 * m * ens.w)))
    electronic = float(np.real(np.einsum("aij,aji->", state.rhos, h_at)))
    return float(kinetic + quantum + electronic)


def ef_grad(
    state: EFBohmionState,
    model: ElectronicModel,
    kernel: SmoothingKernel,
    grid: QuadratureGrid,
    consts: PhysicalConstants,
    variant: str = HAMILTONIAN,
    _smoothed: SmoothedElectronicModel | None = None,
):
    """(dh/dq_a, dh/dp_a) for the chosen EF variant."""
    _check_variant(variant)
    ens = state.ensemble
    m, hbar = consts.mass, consts.hbar
    bundle = pair_integral_bundle(ens, kernel, grid, with_grads=True)
    coupling = _rho_overlaps(state.rhos) - np.outer(ens.w, ens.w)
    dq = hbar**2 / (4.0 * m) * np.einsum("ab,abc->c", coupling, bundle.dkdk_grad)

    if variant == HAMILTONIAN:
        sm = _smoothed or SmoothedElectronicModel(model, grid)
        dh_at = sm.smoothed_dh(kernel, ens.q)
        dq = dq + 0.5 / m * np.einsum("a,b,abc->c", ens.p, ens.p, bundle.kk_grad)
        dp = bundle.kk @ ens.p / m
    else:
        dh_at = np.stack([model.dh(float(q)) for q in ens.q])
        dp = ens.p / (m * ens.w)
    dq = dq + np.real(np.einsum("aij,aji->a", state.rhos, dh_at))
    return dq, dp


def ef_effective_He(
    state: EFBohmionState,
    a: int,
    model: ElectronicModel,
    kernel: SmoothingKernel,
    grid: QuadratureGrid,
    consts: PhysicalConstants,
    variant: str = HAMILTONIAN,
    _smoothed: SmoothedElectronicModel | None = None,
    _dkdk: np.ndarray | None = None,
) -> np.ndarray:
    """Generator of particle a's electronic motion.

    Heff_a = Hbar_e(q_a) + (hbar^2/2M) sum_b I^{dKdK}_ab rho_b, with the
    unfiltered H_e(q_a) in the lagrangian variant.  Hermitian by
    construction (real integrals, Hermitian rho_b).
    """
    _check_variant(variant)
    ens = state.ensemble
    if _dkdk is None:
        _dkdk = pair_integral_dKdK(ens, kernel, grid)
    if variant == HAMILTONIAN:
        sm = _smoothed or SmoothedElectronicModel(model, grid)
        base = sm.smoothed_h(kernel, [ens.q[a]])[0]
    else:
        base = model.h(float(ens.q[a]))
    coupling = np.einsum("b,bij->ij", _dkdk[a], state.rhos)
    heff = base + consts.hbar**2 / (2.0 * consts.mass) * coupling
    return 0.5 * (heff + heff.conj().T)


@dataclass
class EFTrajectory:
    variant: str
    times: np.ndarray
    q: np.ndarray                # (frames, N)
    p: np.ndarray
    w: np.ndarray
    rhos: np.ndarray             # (frames, N, d, d)
    energy: np.ndarray
    traces: np.ndarray           # (frames, N)
    purities: np.ndarray         # (frames, N)
    eigenvalues: np.ndarray      # (frames, N, d)

    def energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / (abs(e0) if e0 else 1.0))

    def trace_drift(self) -> float:
        return float(np.max(np.abs(self.traces - self.traces[0])))

    def purity_drift(self) -> float:
        return float(np.max(np.abs(self.purities - self.purities[0])))

    def eigenvalue_drift(self) -> float:
        return float(np.max(np.abs(self.eigenvalues - self.eigenvalues[0])))

    def momentum(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def final(self) -> EFBohmionState:
        return EFBohmionState(
            ensemble=BohmionEnsemble(q=self.q[-1], p=self.p[-1], w=self.w),
            rhos=self.rhos[-1],
        )


def _electronic_substep(rhos, ens, model_sm, model, kernel, grid, consts, variant, tau):
    """Exponential-midpoint rotation of every rho_a over tau, q frozen.

    The generators drop the self-term (hbar^2/2M) I_aa rho_a: it commutes
    with rho_a, so the flow is unchanged, while keeping it inside the
    exponential would inject spurious higher-order rotation.  A single
    particle therefore precesses exactly.  For coupled particles a frozen
    generator is only first order in the rho_b motion, so half a step is
    probed and the full rotation uses the midpoint generator; every
    update stays one exact unitary conjugation (spectra to round-off).
    """
    hbar, mass = consts.hbar, consts.mass
    n = ens.n
    if variant == HAMILTONIAN:
        bases = model_sm.smoothed_h(kernel, ens.q)
        bases = 0.5 * (bases + np.conj(np.swapaxes(bases, 1, 2)))
    else:
        bases = np.stack([model.h(float(q)) for q in ens.q])
    if n == 1:
        return np.stack(
            [unitary_step(rhos[a], bases[a], tau, hbar) for a in range(n)]
        )

    dkdk = pair_integral_dKdK(ens, kernel, grid)
    couple = hbar**2 / (2.0 * mass)

    def generators(current):
        out = []
        for a in range(n):
            cross = np.einsum("b,bij->ij", dkdk[a], current) - dkdk[a, a] * current[a]
            heff = bases[a] + couple * cross
            out.append(0.5 * (heff + heff.conj().T))
        return out

    probes = generators(rhos)
    half = np.stack(
        [unitary_step(rhos[a], probes[a], 0.5 * tau, hbar) for a in range(n)]
    )
    mids = generators(half)
    return np.stack([unitary_step(rhos[a], mids[a], tau, hbar) for a in range(n)])


class _BareEF:
    """Duck-typed EFBohmionState view without validation (hot loop)."""

    def __init__(self, ensemble, rhos):
        self.ensemble = ensemble
        self.rhos = rhos


def ef_evolve(
    state0: EFBohmionState,
    model: ElectronicModel,
    kernel: SmoothingKernel,
    grid: QuadratureGrid | None,
    consts: PhysicalConstants,
    dt: float,
    steps: int,
    variant: str = HAMILTONIAN,
    stride: int = 1,
) -> EFTrajectory:
    """Strang composite: half electronic rotation / (q,p) midpoint / half rotation."""
    _check_variant(variant)
    consts.require_quantum()
    ens0 = state0.ensemble
    if grid is None:
        speed = float(np.max(np.abs(ens0.p))) / (consts.mass * float(np.min(ens0.w)))
        travel = speed * dt * steps + 2.0 * kernel.alpha
        grid = QuadratureGrid.covering(kernel, ens0.q, travel=travel)
    model_sm = SmoothedElectronicModel(model, grid) if variant == HAMILTONIAN else None
    w = ens0.w.copy()

    q, p = ens0.q.copy(), ens0.p.copy()
    rhos = state0.rhos.copy()

    def energy(q, p, rhos):
        return ef_reg_hamiltonian(
            _BareEF(BohmionEnsemble(q=q, p=p, w=w), rhos),
            model, kernel, grid, consts, variant, _smoothed=model_sm,
        )

    def record(t):
        times.append(t)
        qs.append(q.copy())
        ps.append(p.copy())
        rho_frames.append(rhos.copy())
        energies.append(energy(q, p, rhos))
        traces.append([float(np.real(np.trace(r))) for r in rhos])
        purities.append([float(np.real(np.trace(r @ r))) for r in rhos])
        eigenvalues.append([np.linalg.eigvalsh(r) for r in rhos])

    times, qs, ps, rho_frames, energies, traces, purities, eigenvalues = (
        [], [], [], [], [], [], [], []
    )
    record(0.0)

    for step in range(1, steps + 1):
        _check_ef_coverage(q, kernel, grid)
        ens = BohmionEnsemble(q=q, p=p, w=w)
        rhos = _electronic_substep(
            rhos, ens, model_sm, model, kernel, grid, consts, variant, 0.5 * dt
        )

        frozen = rhos

        def grad(qq, pp):
            return ef_grad(
                _BareEF(BohmionEnsemble(q=qq, p=pp, w=w), frozen),
                model, kernel, grid, consts, variant, _smoothed=model_sm,
            )

        nxt = implicit_midpoint_step(grad, CanonicalState(q=q, p=p), dt)
        q, p = nxt.q, nxt.p

        ens = BohmionEnsemble(q=q, p=p, w=w)
        rhos = _electronic_substep(
            rhos, ens, model_sm, model, kernel, grid, consts, variant, 0.5 * dt
        )
        if step % stride == 0 or step == steps:
            record(step * dt)

    return EFTrajectory(
        variant=variant,
        times=np.asarray(times),
        q=np.asarray(qs),
        p=np.asarray(ps),
        w=w,
        rhos=np.asarray(rho_frames),
        energy=np.asarray(energies),
        traces=np.asarray(traces),
        purities=np.asarray(purities),
        eigenvalues=np.asarray(eigenvalues),
    )


def _check_ef_coverage(q, kernel, grid):
    if q.min() - grid.lo < kernel.pad or grid.hi - q.max() < kernel.pad:
        raise DomainError(
            f"EF particles at [{q.min():.3g}, {q.max():.3g}] left the quadrature "
            f"grid [{grid.lo:.3g}, {grid.hi:.3g}]"
        )


# ---------------------------------------------------------------------------
# electronic fields over a nuclear coordinate and geometry diagnostics
# ---------------------------------------------------------------------------

@dataclass
class ElectronicField:
    """Normalized d-vector psi(r_i) on a uniform grid of nuclear positions."""

    r: np.ndarray
    psi: np.ndarray              # (n, d) complex
    periodic: bool = True

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.ndim != 2 or self.psi.shape[0] != self.r.size:
            raise StructureError(
                f"psi of shape {self.psi.shape} does not match {self.r.size} grid points"
            )
        norms = np.linalg.norm(self.psi, axis=1)
        worst = float(np.max(np.abs(norms - 1.0)))
        if worst > 1e-10:
            raise StructureError(
                f"per-point normalization violated by {worst:.3e} (limit 1e-10)"
            )
        spacings = np.diff(self.r)
        if np.max(np.abs(spacings - spacings[0])) > 1e-12 * abs(spacings[0]):
            raise StructureError("field grid must be uniform")

    @property
    def spacing(self) -> float:
        return float(self.r[1] - self.r[0])

    @classmethod
    def from_components(cls, r, components, periodic: bool = True) -> "ElectronicField":
        """Normalize raw component samples (n, d) pointwise."""
        raw = np.asarray(components, dtype=complex)
        psi = raw / np.linalg.norm(raw, axis=1)[:, None]
        return cls(r=np.asarray(r, dtype=float), psi=psi, periodic=periodic)


def _derivative4(values: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    """4th-order central differences along axis 0 (one-sided 2nd at open ends)."""
    f = np.asarray(values)
    if periodic:
        fp1, fm1 = np.roll(f, -1, axis=0), np.roll(f, 1, axis=0)
        fp2, fm2 = np.roll(f, -2, axis=0), np.roll(f, 2, axis=0)
        return (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h)
    out = np.empty_like(f)
    out[2:-2] = (8.0 * (f[3:-1] - f[1:-3]) - (f[4:] - f[:-4])) / (12.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[1] = (f[2] - f[0]) / (2.0 * h)
    out[-2] = (f[-1] - f[-3]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return out


def _derivative2(values: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    """2nd-order central differences along axis 0; the independent route."""
    f = np.asarray(values)
    if periodic:
        return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * h)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return out


def berry_connection(
    f: ElectronicField, consts: PhysicalConstants, residue_tol: float = 1e-10
) -> np.ndarray:
    """A(r) = <psi | -i hbar dpsi/dr>, real for normalized fields.

    The imaginary residue is -hbar Re<psi|dpsi>, identically zero in the
    continuum but O(spacing^4) for a discrete stencil (finite differences
    do not commute with the product rule).  To separate truncation noise
    from a genuine normalization defect, the residue is also measured
    with the 2nd-order stencil: a normalized field gives a 4th-order
    residue far below the 2nd-order one, while an un-normalized field
    gives hbar |d||psi||^2/dr| / 2 on both.
    """
    dpsi = _derivative4(f.psi, f.spacing, f.periodic)
    inner = -1j * consts.hbar * np.sum(np.conj(f.psi) * dpsi, axis=1)
    residue = float(np.max(np.abs(inner.imag)))
    dpsi2 = _derivative2(f.psi, f.spacing, f.periodic)
    residue2 = consts.hbar * float(
        np.max(np.abs(np.real(np.sum(np.conj(f.psi) * dpsi2, axis=1))))
    )
    if residue > max(residue_tol, 0.5 * residue2):
        raise DiagnosticError(
            f"Berry connection has imaginary residue {residue:.3e} "
            f"(2nd-order reference {residue2:.3e}); "
            "the field is not consistently normalized"
        )
    return inner.real


@dataclass
class QgtResult:
    """Quantum geometric tensor Q, its real part T, and the connection A."""

    q: np.ndarray
    t: np.ndarray
    connection: np.ndarray


def qgt(f: ElectronicField, consts: PhysicalConstants) -> QgtResult:
    """Q(r) = <dpsi|(1 - psi psi^dag)|dpsi> per grid point (scalar in 1D).

    T = Re Q >= 0 is the Gram form of the projected derivative; Im Q must
    vanish identically in one dimension.
    """
    dpsi = _derivative4(f.psi, f.spacing, f.periodic)
    full = np.sum(np.conj(dpsi) * dpsi, axis=1)
    mixed = np.sum(np.conj(f.psi) * dpsi, axis=1)
    q = full - np.abs(mixed) ** 2
    im = float(np.max(np.abs(q.imag)))
    if im > 1e-10 * max(1.0, float(np.max(np.abs(q.real)))):
        raise DiagnosticError(f"QGT has imaginary part {im:.3e} on a 1D grid")
    a = berry_connection(f, consts)
    return QgtResult(q=q, t=q.real, connection=a)


@dataclass
class EpsilonReport:
    """Two routes to the effective electronic potential and their mismatch."""

    epsilon: np.ndarray          # <psi|H_e psi> + (hbar^2/2M) T
    epsilon_rho: np.ndarray      # <rho|H_e> + (hbar^2/4M) |grad rho|^2
    grad_rho_sq: np.ndarray
    two_tr_t: np.ndarray
    identity_mismatch: float
    route_mismatch: float


def epsilon_field(
    f: ElectronicField,
    model: ElectronicModel,
    consts: PhysicalConstants,
    tol: float | None = None,
) -> EpsilonReport:
    """Evaluate epsilon two ways and assert |grad rho|^2 = 2 Tr T.

    Route one differentiates the wavefunction (4th-order stencils); route
    two differentiates the projector rho = psi psi^dag (2nd-order
    stencils).  Both converge to the same continuum fields at the rate of
    the coarser stencil; `tol` bounds their pointwise disagreement and
    defaults to a multiple of spacing^2.
    """
    hbar, mass = consts.hbar, consts.mass
    geom = qgt(f, consts)
    h_at = np.stack([model.h(float(r)) for r in f.r])
    e_h = np.real(np.einsum("ni,nij,nj->n", np.conj(f.psi), h_at, f.psi))
    eps1 = e_h + hbar**2 / (2.0 * mass) * geom.t

    rho = np.einsum("ni,nj->nij", f.psi, np.conj(f.psi))
    drho = _derivative2(rho, f.spacing, f.periodic)
    grad_rho_sq = np.real(np.einsum("nij,nij->n", np.conj(drho), drho))
    eps2 = e_h + hbar**2 / (4.0 * mass) * grad_rho_sq

    two_t = 2.0 * geom.t
    interior = slice(None) if f.periodic else slice(2, -2)
    identity_mismatch = float(np.max(np.abs(grad_rho_sq[interior] - two_t[interior])))
    route_mismatch = float(np.max(np.abs(eps1[interior] - eps2[interior])))

    if tol is None:
        # leading 2nd-order defect of |grad rho|^2 is (h^2/3) Re<rho', rho'''>;
        # a mismatch well beyond that estimate signals real inconsistency,
        # not truncation
        d3 = _derivative2(
            _derivative2(drho, f.spacing, f.periodic), f.spacing, f.periodic
        )
        defect = np.abs(np.real(np.einsum("nij,nij->n", np.conj(drho), d3)))
        estimate = f.spacing**2 / 3.0 * float(np.max(defect[interior]))
        tol = max(4.0 * estimate, 1e-10 * max(1.0, float(np.max(np.abs(two_t)))))
    if identity_mismatch > tol:
        raise DiagnosticError(
            f"|grad rho|^2 vs 2 Tr T disagree by {identity_mismatch:.3e} "
            f"(tolerance {tol:.3e})"
        )
    return EpsilonReport(
        epsilon=eps1,
        epsilon_rho=eps2,
        grad_rho_sq=grad_rho_sq,
        two_tr_t=two_t,
        identity_mismatch=identity_mismatch,
        route_mismatch=route_mismatch,
    )


def berry_loop_phase(f: ElectronicField, consts: PhysicalConstants) -> float:
    """Loop integral of the Berry connection over the periodic grid."""
    if not f.periodic:
        raise ConfigurationError("loop phase requires a periodic field")
    a = berry_connection(f, consts)
    return float(np.sum(a) * f.spacing)
