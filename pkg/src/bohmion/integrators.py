"""Structure-preserving time steppers.

Three steppers, one per flow type:

  * implicit midpoint for canonical (q, p) dynamics -- symplectic, second
    order, time-reversible, conserves quadratic invariants exactly;
  * classical RK4 as a cross-check and for second-order Newtonian ODEs;
  * exactly-unitary conjugation steps for density matrices, computed by
    eigendecomposition so the spectrum is preserved to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StepFailureError, StructureError


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar, nuclear mass M and electronic mass m (reference layer only).

    Masses must be positive; hbar may be zero for the classical limits of
    the particle modes (wave and density-matrix propagators, which divide
    by hbar, reject that themselves).
    """

    hbar: float = 1.0
    mass: float = 1.0
    electron_mass: float = 1.0

    def __post_init__(self):
        for name in ("mass", "electron_mass"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ConfigurationError(f"{name} must be positive, got {v}")
        if not (np.isfinite(self.hbar) and self.hbar >= 0.0):
            raise ConfigurationError(f"hbar must be nonnegative, got {self.hbar}")

    def require_quantum(self) -> None:
        if self.hbar == 0.0:
            raise ConfigurationError("this operation needs hbar > 0")


@dataclass
class CanonicalState:
    """Positions and momenta of equal length."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if self.q.shape != self.p.shape:
            raise StructureError(
                f"q and p must have equal shapes, got {self.q.shape} vs {self.p.shape}"
            )
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise StructureError("canonical state contains non-finite entries")


def implicit_midpoint_step(
    grad_h,
    state: CanonicalState,
    dt: float,
    tol: float = 1e-13,
    max_iter: int = 100,
) -> CanonicalState:
    """One implicit-midpoint step of dq/dt = dH/dp, dp/dt = -dH/dq.

    grad_h(q, p) must return (dH/dq, dH/dp).  The implicit stage is solved
    by fixed-point iteration to `tol` in the max norm (scaled by the state
    magnitude); non-convergence raises StepFailureError with the residual.
    """
    q0, p0 = state.q, state.p
    scale = 1.0 + max(np.max(np.abs(q0)), np.max(np.abs(p0)))

    gq, gp = grad_h(q0, p0)
    q1 = q0 + dt * np.asarray(gp, dtype=float)
    p1 = p0 - dt * np.asarray(gq, dtype=float)

    # once within tol, keep iterating to stagnation: the extra residual
    # would otherwise accumulate coherently into the conserved quantities
    residual, converged = np.inf, False
    for _ in range(max_iter):
        gq, gp = grad_h(0.5 * (q0 + q1), 0.5 * (p0 + p1))
        q_new = q0 + dt * np.asarray(gp, dtype=float)
        p_new = p0 - dt * np.asarray(gq, dtype=float)
        if not (np.all(np.isfinite(q_new)) and np.all(np.isfinite(p_new))):
            raise StepFailureError(
                "implicit midpoint iteration diverged to non-finite values",
                residual=float("inf"),
            )
        change = max(np.max(np.abs(q_new - q1)), np.max(np.abs(p_new - p1)))
        q1, p1 = q_new, p_new
        if change <= tol * scale:
            converged = True
            if change <= 8.0 * np.finfo(float).eps * scale or change >= residual:
                return CanonicalState(q=q1, p=p1)
        residual = change
    if converged:
        return CanonicalState(q=q1, p=p1)
    raise StepFailureError(
        f"implicit midpoint failed to converge after {max_iter} iterations "
        f"(residual {residual:.3e})",
        residual=residual,
    )


def rk4_step(rhs, y: np.ndarray, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step for dy/dt = rhs(y)."""
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def hermiticity_defect(a: np.ndarray) -> float:
    """Max-norm distance from a to its Hermitian part."""
    return float(np.max(np.abs(a - a.conj().T)))


def validate_density_matrix(
    rho: np.ndarray,
    weight: float | None = None,
    herm_tol: float = 1e-12,
    trace_tol: float = 1e-10,
) -> None:
    """Check Hermiticity, positive semidefiniteness and the declared trace."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise StructureError(f"density matrix must be square, got shape {rho.shape}")
    scale = max(1.0, float(np.max(np.abs(rho))))
    if hermiticity_defect(rho) > herm_tol * scale:
        raise StructureError("density matrix is not Hermitian")
    eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if eigs.min() < -1e-12 * scale:
        raise StructureError(f"density matrix has negative eigenvalue {eigs.min():.3e}")
    if weight is not None:
        tr = float(np.real(np.trace(rho)))
        if abs(tr - weight) > trace_tol * max(1.0, abs(weight)):
            raise StructureError(
                f"density matrix trace {tr:.12g} does not match declared weight {weight:.12g}"
            )


def _propagator(heff: np.ndarray, dt: float, hbar: float, herm_tol: float) -> np.ndarray:
    heff = np.asarray(heff, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(heff))))
    if hermiticity_defect(heff) > herm_tol * scale:
        raise StructureError("effective Hamiltonian is not Hermitian")
    evals, vecs = np.linalg.eigh(heff)
    phase = np.exp(-1j * evals * dt / hbar)
    return (vecs * phase) @ vecs.conj().T


def unitary_step(
    rho: np.ndarray,
    heff: np.ndarray,
    dt: float,
    hbar: float = 1.0,
    herm_tol: float = 1e-10,
) -> np.ndarray:
    """U rho U^dagger with U = exp(-i Heff dt / hbar) by eigendecomposition.

    Trace, spectrum and purity are preserved to round-off; the output is
    re-Hermitized to stop round-off from accumulating over long runs.
    """
    u = _propagator(heff, dt, hbar, herm_tol)
    out = u @ np.asarray(rho, dtype=complex) @ u.conj().T
    return 0.5 * (out + out.conj().T)


def unitary_propagate_vector(
    psi: np.ndarray,
    heff: np.ndarray,
    dt: float,
    hbar: float = 1.0,
    herm_tol: float = 1e-10,
) -> np.ndarray:
    """exp(-i Heff dt / hbar) psi for a state vector."""
    return _propagator(heff, dt, hbar, herm_tol) @ np.asarray(psi, dtype=complex)
