"""Bohmion ensembles: weighted canonical particles (q_a, p_a, w_a).

The weights are the coefficients of the singular momentum map

    mu(x) = sum_a p_a delta(x - q_a),   D(x) = sum_a w_a delta(x - q_a),

they sum to one and stay constant in time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEnsembleError, StructureError

WEIGHT_SUM_TOL = 1e-9


@dataclass
class BohmionEnsemble:
    q: np.ndarray
    p: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        self.w = np.atleast_1d(np.asarray(self.w, dtype=float))
        if not (self.q.shape == self.p.shape == self.w.shape):
            raise StructureError(
                f"q, p, w must have equal shapes, got {self.q.shape}, "
                f"{self.p.shape}, {self.w.shape}"
            )
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise StructureError("ensemble has non-finite positions or momenta")
        if self.w.size == 0 or np.all(self.w == 0.0):
            raise DegenerateEnsembleError("ensemble has all-zero weights")
        if np.any(self.w <= 0.0):
            raise DegenerateEnsembleError("ensemble weights must all be positive")
        if abs(self.w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise StructureError(
                f"ensemble weights must sum to 1, got {self.w.sum():.12g} "
                "(use from_raw_weights to normalize)"
            )

    @property
    def n(self) -> int:
        return self.q.size

    @classmethod
    def uniform(cls, q, p) -> "BohmionEnsemble":
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return cls(q=q, p=p, w=np.full(q.size, 1.0 / q.size))

    @classmethod
    def from_raw_weights(cls, q, p, w) -> "BohmionEnsemble":
        """Build an ensemble, normalizing the weights with a warning if needed."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if w.size and np.any(w > 0.0):
            total = w.sum()
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                warnings.warn(
                    f"ensemble weights sum to {total:.6g}; normalizing to 1",
                    stacklevel=2,
                )
                w = w / total
        return cls(q=q, p=p, w=w)

    def replace(self, q=None, p=None) -> "BohmionEnsemble":
        return BohmionEnsemble(
            q=self.q if q is None else q,
            p=self.p if p is None else p,
            w=self.w,
        )
