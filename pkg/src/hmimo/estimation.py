"""
Pilot-based SIMO channel estimators and their closed-form NMSE.

Observations follow ``y = sqrt(gamma) h + n`` with ``n ~ CN(0, I)``. Every
estimator accepts a single vector or an ``(N, trials)`` column batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg

from .channel import sample_cscg
from .correlation import CorrelationMatrix, Subspace, real_times_complex


class EstimatorKind(str, Enum):
    LS = "ls"
    MMSE = "mmse"
    RS_LS = "rsls"
    RS_LS_CONSERVATIVE = "rsls-iso"


@dataclass(frozen=True)
class PilotObservation:
    y: np.ndarray
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("pilot SNR must be positive")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("observation has non-finite entries")


@dataclass(frozen=True)
class EstimatorSpec:
    kind: EstimatorKind
    correlation: CorrelationMatrix | None = None
    subspace: Subspace | None = None

    def __post_init__(self):
        kind = EstimatorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is EstimatorKind.MMSE and self.correlation is None:
            raise ValueError("MMSE needs a correlation matrix")
        if kind in (EstimatorKind.RS_LS, EstimatorKind.RS_LS_CONSERVATIVE) and self.subspace is None:
            raise ValueError(f"{kind.value} needs a subspace")

    def estimate(self, obs: PilotObservation) -> np.ndarray:
        if self.kind is EstimatorKind.LS:
            return ls_estimate(obs)
        if self.kind is EstimatorKind.MMSE:
            return mmse_estimate(obs, self.correlation)
        return rs_ls_estimate(obs, self.subspace)


def observe_pilot(h: np.ndarray, gamma: float, rng: np.random.Generator | None) -> PilotObservation:
    """Noisy pilot observation; ``rng=None`` gives the noise-free limit."""
    h = np.asarray(h)
    y = np.sqrt(gamma) * h
    if rng is not None:
        y = y + sample_cscg(h.shape, rng)
    return PilotObservation(y, gamma)


def ls_estimate(obs: PilotObservation) -> np.ndarray:
    return obs.y / np.sqrt(obs.gamma)


class MMSEFilter:
    """Cholesky factor of ``gamma R + I`` reused across many observations."""

    def __init__(self, R: CorrelationMatrix, gamma: float):
        if R.entries.shape[0] == 0:
            raise ValueError("empty correlation matrix")
        self.R = R.entries
        self.gamma = gamma
        A = gamma * self.R + np.eye(R.size)
        try:
            self._factor = linalg.cho_factor(A, lower=True, check_finite=True)
        except linalg.LinAlgError as exc:
            raise linalg.LinAlgError(f"gamma R + I is not positive definite: {exc}") from exc

    def solve(self, y: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self._factor, y, check_finite=False)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.sqrt(self.gamma) * (self.R @ self.solve(y))

    def gain(self) -> np.ndarray:
        """Filter matrix ``sqrt(gamma) (gamma R + I)^{-1} R``; ``R`` commutes with the factor."""
        return np.sqrt(self.gamma) * self.solve(self.R)


def apply_matrix(M: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``M @ Y`` that keeps real ``M`` real (half the flops on complex ``Y``)."""
    return real_times_complex(M, Y)


def mmse_estimate(obs: PilotObservation, R: CorrelationMatrix) -> np.ndarray:
    """``sqrt(gamma) R (gamma R + I)^{-1} y`` via a Cholesky solve."""
    return MMSEFilter(R, obs.gamma)(obs.y)


def rs_ls_estimate(obs: PilotObservation, subspace: Subspace) -> np.ndarray:
    """LS estimate projected onto ``span(U)``."""
    return subspace.project(obs.y) / np.sqrt(obs.gamma)


def analytic_nmse(spec: EstimatorSpec, gamma: float, R_true: CorrelationMatrix) -> float:
    """Closed-form NMSE ``E||h_hat - h||^2 / tr(R)`` under the true correlation.

    For the subspace estimators the leakage of ``R_true`` outside the
    subspace is included as a bias term.
    """
    R = R_true.entries
    tr = R_true.trace
    N = R_true.size
    if spec.kind is EstimatorKind.LS:
        return N / (gamma * tr)
    if spec.kind is EstimatorKind.MMSE:
        C = spec.correlation.entries
        if C.shape != R.shape:
            raise ValueError("dimension mismatch")
        if C is R or np.array_equal(C, R):
            # tr(R - g R (gR + I)^-1 R) = sum lam / (1 + g lam)
            lam = np.clip(linalg.eigvalsh(R), 0.0, None)
            return float(np.sum(lam / (1.0 + gamma * lam)) / tr)
        # error covariance with a possibly mismatched filter C:
        # W = sqrt(g) C (gC + I)^-1, e = (W sqrt(g) - I) h + W n
        filt = MMSEFilter(spec.correlation, gamma)
        W = np.sqrt(gamma) * (C @ filt.solve(np.eye(N)))
        B = np.sqrt(gamma) * W - np.eye(N)
        err = np.real(np.trace(B @ R @ B.conj().T)) + np.real(np.trace(W @ W.conj().T))
        return float(err / tr)
    U = spec.subspace.basis
    if U.shape[0] != N:
        raise ValueError("dimension mismatch")
    r = U.shape[1]
    # (I - UU^H) R (I - UU^H) trace = tr(R) - tr(U^H R U)
    captured = np.real(np.trace(U.conj().T @ R @ U))
    bias = max(tr - captured, 0.0)
    return float((r / gamma + bias) / tr)
