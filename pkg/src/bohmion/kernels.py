"""Smoothing kernels, quadrature grids and pairwise kernel integrals.

Every regularized particle Hamiltonian in this package is built from 1D
integrals of the form

    I^{KK}_ab   = int K(s - q_a) K(s - q_b)   / Dbar(s) ds
    I^{dKdK}_ab = int K'(s - q_a) K'(s - q_b) / Dbar(s) ds

with the smoothed density Dbar(s) = sum_c w_c K(s - q_c).  Two kernel
families are supported:

    gaussian :  K(x) = exp(-x^2 / 2 alpha^2) / (alpha sqrt(2 pi))
    helmholtz:  K(x) = exp(-|x| / alpha) / (2 alpha)
                (Green's function of (1 - alpha^2 d^2/dx^2) on the line)

Both are positive, symmetric and normalized to unit mass.  The quotient
integrands are evaluated in log space, exp(log K_a + log K_b - log Dbar),
so the tails never underflow to 0/0, and the domain is truncated where
Dbar < 1e-12 * max Dbar.  Quadrature is composite trapezoid; for the
gaussian kernel this is effectively exact (smooth decaying integrand),
for the exponential kernel the kink at each particle position makes it
genuinely second order in the grid spacing.

Gradients with respect to the particle positions are assembled by
differentiating the trapezoid sum term by term (gaussian) or by central
finite differences of the integrals (helmholtz, whose second derivative
contains a delta at the origin).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, DegenerateEnsembleError, DimensionError

GAUSSIAN = "gaussian"
HELMHOLTZ = "helmholtz"
FAMILIES = (GAUSSIAN, HELMHOLTZ)

# Relative floor on Dbar inside quotient integrands; beyond this the
# integrands of equal-width kernels decay at least exponentially.
DENSITY_FLOOR = 1e-12

# Central finite-difference step for helmholtz gradients, in units of alpha.
FD_STEP_FACTOR = 1e-5

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SmoothingKernel:
    """Positive symmetric mollifier with length scale alpha."""

    family: str = GAUSSIAN
    alpha: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}"
            )
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ConfigurationError("kernel alpha must be a positive length scale")

    @property
    def pad(self) -> float:
        """Half-width beyond which the kernel mass is negligible (< 1e-13).

        exp(-x^2/2a^2) reaches 1e-13 before 8a; the exponential kernel
        only at 30a, so it needs the wider margin.
        """
        return 12.0 * self.alpha if self.family == GAUSSIAN else 30.0 * self.alpha

    def value(self, x):
        x = np.asarray(x, dtype=float)
        a = self.alpha
        if self.family == GAUSSIAN:
            return np.exp(-0.5 * (x / a) ** 2) / (a * math.sqrt(2.0 * math.pi))
        return np.exp(-np.abs(x) / a) / (2.0 * a)

    def derivative(self, x):
        """K'(x); for the exponential kernel K'(0) = 0 (symmetric limit)."""
        x = np.asarray(x, dtype=float)
        a = self.alpha
        if self.family == GAUSSIAN:
            return -(x / a**2) * self.value(x)
        return -np.sign(x) / a * self.value(x)

    def log_value(self, x):
        x = np.asarray(x, dtype=float)
        a = self.alpha
        if self.family == GAUSSIAN:
            return -0.5 * (x / a) ** 2 - math.log(a) - _LOG_SQRT_2PI
        return -np.abs(x) / a - math.log(2.0 * a)

    def slope(self, x):
        """Logarithmic slope K'(x)/K(x)."""
        x = np.asarray(x, dtype=float)
        a = self.alpha
        if self.family == GAUSSIAN:
            return -x / a**2
        return -np.sign(x) / a

    def curvature(self, x):
        """K''(x)/K(x).  Only smooth for the gaussian family."""
        if self.family != GAUSSIAN:
            raise ConfigurationError(
                "K'' of the exponential kernel is distributional; "
                "use finite differences instead"
            )
        x = np.asarray(x, dtype=float)
        a = self.alpha
        return (x / a**2) ** 2 - 1.0 / a**2


def kernel_eval(kernel: SmoothingKernel, x):
    """Evaluate (K(x), K'(x)) for scalar or array x."""
    return kernel.value(x), kernel.derivative(x)


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform grid with composite-trapezoid weights on [lo, hi]."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ConfigurationError(f"quadrature grid needs n >= 16, got {self.n}")
        if not self.hi > self.lo:
            raise ConfigurationError("quadrature grid needs hi > lo")

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def points(self) -> np.ndarray:
        return self.lo + self.spacing * np.arange(self.n)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def assert_serves(self, kernel: SmoothingKernel) -> None:
        """A grid serving a kernel must resolve it: spacing <= alpha/8."""
        if self.spacing > kernel.alpha / 8.0 + 1e-15:
            raise ConfigurationError(
                f"grid spacing {self.spacing:.3g} too coarse for kernel "
                f"alpha {kernel.alpha:.3g} (need <= alpha/8)"
            )

    @classmethod
    def for_kernel(
        cls,
        kernel: SmoothingKernel,
        lo: float,
        hi: float,
        spacing: float | None = None,
    ) -> "QuadratureGrid":
        if spacing is None:
            spacing = kernel.alpha / 16.0
        n = max(16, int(math.ceil((hi - lo) / spacing)))
        return cls(lo=lo, hi=hi, n=n)

    @classmethod
    def covering(
        cls,
        kernel: SmoothingKernel,
        positions,
        travel: float = 0.0,
        spacing: float | None = None,
    ) -> "QuadratureGrid":
        """Grid covering the given positions plus kernel pad and travel margin.

        The origin is shifted by an irregular fraction of the spacing so
        grid nodes do not land exactly on particle positions; sampling the
        exponential kernel's K'(0) = 0 convention at a node would punch a
        hole into the kinked integrands.
        """
        q = np.atleast_1d(np.asarray(positions, dtype=float))
        pad = kernel.pad + abs(travel)
        h = kernel.alpha / 16.0 if spacing is None else spacing
        lo = float(q.min()) - pad - 0.4531 * h
        return cls.for_kernel(kernel, lo, float(q.max()) + pad, spacing)


def convolve(kernel: SmoothingKernel, values, grid: QuadratureGrid) -> np.ndarray:
    """(K*f)(x_i) = sum_j K(x_i - x_j) f(x_j) w_j on the grid."""
    f = np.asarray(values, dtype=float)
    if f.shape != (grid.n,):
        raise DimensionError(
            f"field of shape {f.shape} does not live on a grid of {grid.n} points"
        )
    x = grid.points
    kmat = kernel.value(x[:, None] - x[None, :])
    return kmat @ (f * grid.weights)


def _validated_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.size == 0 or np.all(w == 0.0):
        raise DegenerateEnsembleError("ensemble has no weights")
    if np.any(w <= 0.0):
        raise DegenerateEnsembleError("ensemble weights must all be positive")
    return w


def _quotient_factors(q, w, kernel: SmoothingKernel, grid: QuadratureGrid):
    """Shared factors of the quotient integrands on the grid.

    Returns (P, slope, log_ratio, wts) where P_a(s) = exp(log K_a - log Dbar / 2)
    so that P_a P_b = K_a K_b / Dbar, slope_a = K'_a/K_a, log_ratio_a =
    log(K_a/Dbar), and wts are trapezoid weights zeroed where
    Dbar < DENSITY_FLOOR * max Dbar.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    u = grid.points[None, :] - q[:, None]
    log_k = kernel.log_value(u)
    log_dbar = logsumexp(log_k + np.log(w)[:, None], axis=0)
    keep = log_dbar >= log_dbar.max() + math.log(DENSITY_FLOOR)
    wts = np.where(keep, grid.weights, 0.0)
    p = np.exp(log_k - 0.5 * log_dbar[None, :])
    return p, kernel.slope(u), log_k - log_dbar[None, :], u, wts


@dataclass(frozen=True)
class PairIntegrals:
    """Pair integrals and, optionally, their position gradients.

    kk[a, b]        = int K_a K_b / Dbar
    dkdk[a, b]      = int K'_a K'_b / Dbar
    kk_grad[a,b,c]  = d kk[a,b] / d q_c      (None unless requested)
    dkdk_grad       = d dkdk[a,b] / d q_c
    """

    kk: np.ndarray
    dkdk: np.ndarray
    kk_grad: np.ndarray | None = None
    dkdk_grad: np.ndarray | None = None


def pair_integral_KK(ens, kernel: SmoothingKernel, grid: QuadratureGrid) -> np.ndarray:
    """Matrix of int K_a K_b / Dbar; symmetric, entries in (0, 1/min_c w_c]."""
    grid.assert_serves(kernel)
    w = _validated_weights(ens.w)
    p, _, _, _, wts = _quotient_factors(ens.q, w, kernel, grid)
    return (p * wts) @ p.T


def pair_integral_dKdK(ens, kernel: SmoothingKernel, grid: QuadratureGrid) -> np.ndarray:
    """Matrix of int K'_a K'_b / Dbar; symmetric with positive diagonal."""
    grid.assert_serves(kernel)
    w = _validated_weights(ens.w)
    p, slope, _, _, wts = _quotient_factors(ens.q, w, kernel, grid)
    g = slope * p
    return (g * wts) @ g.T


def _pair_bundle(q, w, kernel, grid, with_grads):
    """Integral values (both families) and term-by-term trapezoid derivatives.

    The gradient branch needs the smooth K''/K of the gaussian kernel.
    d I_ab / d q_c carries a delta-term from the numerator (c in {a, b})
    and a Dbar-term from the denominator, for every c.
    """
    p, slope, log_ratio, u, wts = _quotient_factors(q, w, kernel, grid)
    n = len(q)
    g = slope * p                                      # K'_a / sqrt(Dbar) scaled
    pw = p * wts
    gw = g * wts
    kk = pw @ p.T
    dd = gw @ g.T
    if not with_grads:
        return PairIntegrals(kk=kk, dkdk=dd)

    ratio = np.exp(log_ratio)                          # K_c / Dbar  (<= 1/w_c)
    denom = w[:, None] * slope * ratio                 # w_c K'_c / Dbar  per point
    curv = kernel.curvature(u)                         # K''/K

    # dI^{KK}: -delta_ca int K'_a K_b/Dbar - delta_cb int K_a K'_b/Dbar
    #          + int K_a K_b w_c K'_c / Dbar^2
    r = gw @ p.T                                       # r[a,b] = int K'_a K_b / Dbar
    d_kk = np.einsum("as,bs,cs->abc", pw, p, denom)
    for a in range(n):
        d_kk[a, :, a] -= r[a, :]
        d_kk[:, a, a] -= r[a, :]

    # dI^{dKdK}: -delta_ca int K''_a K'_b/Dbar - delta_cb int K'_a K''_b/Dbar
    #            + int K'_a K'_b w_c K'_c / Dbar^2
    s = (curv * pw) @ g.T                              # s[a,b] = int K''_a K'_b / Dbar
    d_dd = np.einsum("as,bs,cs->abc", gw, g, denom)
    for a in range(n):
        d_dd[a, :, a] -= s[a, :]
        d_dd[:, a, a] -= s[a, :]
    return PairIntegrals(
        kk=kk, dkdk=dd, kk_grad=_project_translation(d_kk),
        dkdk_grad=_project_translation(d_dd),
    )


def _project_translation(grad: np.ndarray) -> np.ndarray:
    """Enforce sum_c dI_ab/dq_c = 0 exactly.

    The pair integrals are invariant under a uniform shift of all
    particles, so the gradient rows sum to zero analytically; subtracting
    the quadrature residue (mask-boundary noise ~1e-10) makes uniform
    translations force-free to round-off, which single-particle exactness
    and total-momentum conservation both lean on.
    """
    return grad - grad.mean(axis=2, keepdims=True)


def _pair_integral_grads_fd(ens, kernel, grid):
    q0 = np.asarray(ens.q, dtype=float)
    n = len(q0)
    step = FD_STEP_FACTOR * kernel.alpha
    d_kk = np.zeros((n, n, n))
    d_dd = np.zeros((n, n, n))
    shifted = _BareEnsemble(q0.copy(), np.asarray(ens.w, dtype=float))
    for c in range(n):
        for sign, target in ((1.0, +1), (-1.0, -1)):
            shifted.q[c] = q0[c] + sign * step
            kk = pair_integral_KK(shifted, kernel, grid)
            dd = pair_integral_dKdK(shifted, kernel, grid)
            d_kk[:, :, c] += target * kk
            d_dd[:, :, c] += target * dd
        shifted.q[c] = q0[c]
    return (
        _project_translation(d_kk / (2.0 * step)),
        _project_translation(d_dd / (2.0 * step)),
    )


class _BareEnsemble:
    """Minimal (q, w) holder for internal finite differencing."""

    def __init__(self, q, w):
        self.q = q
        self.w = w


def pair_integral_bundle(
    ens, kernel: SmoothingKernel, grid: QuadratureGrid, with_grads: bool = True
) -> PairIntegrals:
    """Pair integrals plus gradients in one pass over the grid.

    Gaussian gradients are analytic (the integrand is differentiated under
    the fixed trapezoid sum, so they agree with finite differences of the
    integrals to solver precision).  The exponential kernel falls back to
    central differences with step 1e-5 * alpha.
    """
    grid.assert_serves(kernel)
    w = _validated_weights(ens.w)
    q = np.atleast_1d(np.asarray(ens.q, dtype=float))
    if kernel.family == GAUSSIAN or not with_grads:
        return _pair_bundle(q, w, kernel, grid, with_grads)
    bundle = _pair_bundle(q, w, kernel, grid, with_grads=False)
    d_kk, d_dd = _pair_integral_grads_fd(ens, kernel, grid)
    return PairIntegrals(kk=bundle.kk, dkdk=bundle.dkdk, kk_grad=d_kk, dkdk_grad=d_dd)


def pair_integral_grads(ens, kernel: SmoothingKernel, grid: QuadratureGrid):
    """Gradients (dI^{KK}_ab/dq_c, dI^{dKdK}_ab/dq_c) as (N, N, N) arrays."""
    bundle = pair_integral_bundle(ens, kernel, grid, with_grads=True)
    return bundle.kk_grad, bundle.dkdk_grad
