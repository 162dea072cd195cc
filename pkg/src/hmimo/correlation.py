"""
Spatial correlation matrices of uniform arrays and their eigen-subspaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import linalg

from .spectral import bessel_acf, sinc_acf

FieldModel = Literal["iso3d", "iso2d"]


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear (``n_y == 1``) or planar array.

    Spacings and the plane offset are in wavelengths. Elements are indexed
    row-major over ``(i, j)`` with ``i`` along x, and centred on the origin.
    """

    n_x: int
    n_y: int = 1
    spacing_x: float = 0.5
    spacing_y: float | None = None
    offset_z: float = 0.0

    def __post_init__(self):
        if self.spacing_y is None:
            object.__setattr__(self, "spacing_y", self.spacing_x)
        if int(self.n_x) != self.n_x or int(self.n_y) != self.n_y or self.n_x < 1 or self.n_y < 1:
            raise ValueError(f"element counts must be positive integers, got {self.n_x}x{self.n_y}")
        if not (self.spacing_x > 0 and self.spacing_y > 0):
            raise ValueError("spacings must be positive")
        if not math.isfinite(self.offset_z):
            raise ValueError("offset_z must be finite")

    @property
    def size(self) -> int:
        return self.n_x * self.n_y

    @property
    def is_linear(self) -> bool:
        return self.n_y == 1

    @property
    def aperture(self) -> tuple[float, float]:
        """Aperture lengths ``(L_x, L_y)`` in wavelengths."""
        return self.n_x * self.spacing_x, self.n_y * self.spacing_y

    def positions(self) -> np.ndarray:
        """Element coordinates, shape ``(N, 3)``."""
        xs = (np.arange(self.n_x) - (self.n_x - 1) / 2) * self.spacing_x
        ys = (np.arange(self.n_y) - (self.n_y - 1) / 2) * self.spacing_y
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), np.full(self.size, self.offset_z)], axis=1)

    def describe(self) -> str:
        return f"{self.n_x}x{self.n_y}@{self.spacing_x:g}x{self.spacing_y:g}"


@dataclass(frozen=True)
class CorrelationMatrix:
    entries: np.ndarray = field(repr=False)
    beta: float = 1.0

    def __post_init__(self):
        R = np.asarray(self.entries)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("correlation matrix must be square")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        R.setflags(write=False)
        object.__setattr__(self, "entries", R)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (descending) and eigenvectors."""
        try:
            w, V = linalg.eigh(self.entries)
        except linalg.LinAlgError as exc:
            raise linalg.LinAlgError(f"eigendecomposition failed: {exc}") from exc
        return w[::-1].copy(), np.ascontiguousarray(V[:, ::-1])

    def check(self, tol: float = 1e-9) -> None:
        """Raise ``ValueError`` if any structural invariant is broken."""
        R = self.entries
        scale = max(np.abs(R).max(), 1e-300)
        if np.abs(R - R.conj().T).max() > 1e-12 * scale:
            raise ValueError("matrix is not Hermitian")
        w = linalg.eigvalsh(R)
        if w[0] < -1e-10 * w[-1]:
            raise ValueError(f"matrix is not PSD (min eigenvalue {w[0]:.3g})")
        if abs(self.trace - self.size * self.beta) > tol * self.size * self.beta:
            raise ValueError(f"trace {self.trace} != N*beta = {self.size * self.beta}")


def real_times_complex(M: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``M @ Y``; a real ``M`` hits a complex ``Y`` as one real GEMM over the
    interleaved re/im layout."""
    if np.isrealobj(M) and np.iscomplexobj(Y) and Y.dtype == np.complex128:
        Yc = np.ascontiguousarray(Y)
        if Yc.ndim == 1:
            return (M @ Yc.view(np.float64).reshape(-1, 2)).ravel().view(np.complex128)
        return np.ascontiguousarray(M @ Yc.view(np.float64)).view(np.complex128)
    return M @ Y


@dataclass(frozen=True)
class Subspace:
    basis: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def projector(self) -> np.ndarray:
        U = self.basis
        return U @ U.conj().T

    def project(self, y: np.ndarray) -> np.ndarray:
        """Orthogonal projection of ``y`` (vector or column batch) onto the span."""
        U = self.basis
        return real_times_complex(U, real_times_complex(U.conj().T, y))

    def reconstruct(self) -> np.ndarray:
        U = self.basis
        return (U * self.eigenvalues) @ U.conj().T


@dataclass(frozen=True)
class Retention:
    """Eigenvalue retention policy.

    ``kind`` is one of ``"relative"`` (keep eigenvalues above
    ``value * lambda_max``), ``"power"`` (smallest leading set capturing a
    ``value`` fraction of the trace) or ``"rank"`` (keep exactly ``value``).
    """

    kind: Literal["relative", "power", "rank"] = "relative"
    value: float = 1e-5

    def __post_init__(self):
        if self.kind == "relative" and not 0 <= self.value < 1:
            raise ValueError("relative threshold must lie in [0, 1)")
        if self.kind == "power" and not 0 < self.value <= 1:
            raise ValueError("power fraction must lie in (0, 1]")
        if self.kind == "rank" and (self.value < 1 or int(self.value) != self.value):
            raise ValueError("fixed rank must be a positive integer")
        if self.kind not in ("relative", "power", "rank"):
            raise ValueError(f"unknown retention kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Retention":
        """Parse ``relative:1e-5``, ``power:0.999`` or ``rank:50``."""
        kind, _, value = text.partition(":")
        if not value:
            raise ValueError(f"retention must look like KIND:VALUE, got {text!r}")
        return cls(kind.strip(), float(value))

    def __str__(self) -> str:
        v = int(self.value) if self.kind == "rank" else self.value
        return f"{self.kind}:{v:g}"

    def count(self, eigenvalues: np.ndarray) -> int:
        """Number of leading eigenvalues kept from a descending array."""
        w = np.asarray(eigenvalues)
        if self.kind == "rank":
            r = int(self.value)
            if r > len(w):
                raise ValueError(f"fixed rank {r} exceeds dimension {len(w)}")
            return r
        if self.kind == "relative":
            return int(np.count_nonzero(w > self.value * w[0]))
        total = w.sum()
        # floor at machine level so p = 1 never keeps roundoff noise
        floor = len(w) * np.finfo(float).eps * abs(w[0])
        useful = int(np.count_nonzero(w > floor))
        csum = np.cumsum(w[:useful])
        r = int(np.searchsorted(csum, self.value * total * (1 - 1e-12))) + 1
        return min(r, useful)


DEFAULT_RETENTION = Retention("relative", 1e-5)


def clarke_correlation_matrix(geometry: ArrayGeometry, model: FieldModel = "iso3d", beta: float = 1.0) -> CorrelationMatrix:
    """Sample Clarke's ACF at all element separations.

    ``iso3d`` uses the sinc ACF; ``iso2d`` uses ``J0`` and is only defined
    for linear arrays.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if model == "iso2d":
        if not geometry.is_linear:
            raise ValueError("the 2D isotropic model applies to linear arrays only")
        acf = bessel_acf
    elif model == "iso3d":
        acf = sinc_acf
    else:
        raise ValueError(f"unknown field model {model!r}")
    if geometry.is_linear:
        # symmetric Toeplitz: sample the first row only
        first = acf(np.arange(geometry.n_x) * geometry.spacing_x)
        R = linalg.toeplitz(np.atleast_1d(first))
    else:
        p = geometry.positions()[:, :2]
        d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
        R = acf(d)
    return CorrelationMatrix(beta * np.asarray(R, dtype=float), beta)


def eigen_subspace(R: CorrelationMatrix, retention: Retention = DEFAULT_RETENTION) -> Subspace:
    w, V = R.eigh()
    r = retention.count(w)
    return Subspace(np.ascontiguousarray(V[:, :r]), w[:r].copy())


def effective_rank(R: CorrelationMatrix, retention: Retention = DEFAULT_RETENTION) -> int:
    w, _ = R.eigh()
    return retention.count(w)


def asymptotic_rank(geometry: ArrayGeometry) -> float:
    """Large-array rank estimate ``pi * N * spacing**2`` for square spacing."""
    if not math.isclose(geometry.spacing_x, geometry.spacing_y):
        raise ValueError("asymptotic rank formula needs equal spacing on both axes")
    return math.pi * geometry.size * geometry.spacing_x**2


def truncated_correlation(R_iso: CorrelationMatrix, keep_count: int, renormalize: bool = True) -> CorrelationMatrix:
    """Rebuild ``R_iso`` from its ``keep_count`` largest eigenpairs."""
    w, V = R_iso.eigh()
    floor = R_iso.size * np.finfo(float).eps * abs(w[0])
    available = int(np.count_nonzero(w > floor))
    if keep_count < 1 or keep_count > available:
        raise ValueError(f"keep_count must lie in [1, {available}], got {keep_count}")
    U, lam = V[:, :keep_count], w[:keep_count]
    R = (U * lam) @ U.conj().T
    R = 0.5 * (R + R.conj().T)
    if renormalize:
        R *= R_iso.size * R_iso.beta / np.real(np.trace(R))
        return CorrelationMatrix(R, R_iso.beta)
    return CorrelationMatrix(R, float(np.real(np.trace(R))) / R_iso.size)
