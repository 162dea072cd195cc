"""
Closed-form spatial ACFs and wavenumber-domain geometry.

All lengths are in wavelengths and all wavenumbers are normalized so that
the propagation disk has radius ``kappa = 2*pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

KAPPA = 2.0 * math.pi

# switchover between the power series and the Hankel asymptotic expansion
_J0_SERIES_LIMIT = 12.0


class QuadratureError(RuntimeError):
    """Raised when a patch integral fails to reach its tolerance."""


@dataclass(frozen=True)
class LagVector:
    """Coordinate difference between two spatial samples, in wavelengths."""

    dx: float
    dy: float = 0.0
    dz: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.norm):
            raise ValueError("lag components must be finite")

    @property
    def norm(self) -> float:
        return math.sqrt(self.dx**2 + self.dy**2 + self.dz**2)


def sinc_acf(distance):
    """ACF of the 3D isotropic field, ``sin(2*pi*d) / (2*pi*d)``.

    Accepts scalars or arrays of non-negative distances (in wavelengths).
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    # np.sinc(x) = sin(pi x)/(pi x) with sinc(0) = 1 exactly
    out = np.sinc(2.0 * d)
    return float(out) if out.ndim == 0 else out


def _j0_series(x: np.ndarray) -> np.ndarray:
    # sum_k (-1)^k (x/2)^(2k) / (k!)^2
    q = -0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 80):
        term = term * q / (k * k)
        total = total + term
        if np.all(np.abs(term) <= 1e-18 * np.maximum(np.abs(total), 1.0)):
            break
    return total


def _j0_asymptotic(x: np.ndarray) -> np.ndarray:
    # J0(x) ~ sqrt(2/(pi x)) [P cos(x - pi/4) - Q sin(x - pi/4)]
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    a = np.ones_like(x)  # a_k / x^k, with a_0 = 1
    last = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(0, 60):
        if k > 0:
            a = a * (2 * k - 1) ** 2 / (k * 8.0 * x)
        mag = np.abs(a)
        # stop each lane at its smallest term (optimal truncation)
        active &= mag < last
        if not active.any():
            break
        sign = -1.0 if (k // 2 + k) % 2 else 1.0
        contrib = np.where(active, sign * a, 0.0)
        if k % 2 == 0:
            p += contrib
        else:
            q += contrib
        last = np.where(active, mag, last)
        if np.all(mag[active] < 1e-17):
            break
    phase = x - 0.25 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(phase) - q * np.sin(phase))


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Power series for ``|x| <= 12``, Hankel asymptotic expansion beyond.
    Absolute error stays below 1e-10 on ``[0, 2*pi*64]``.
    """
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x <= _J0_SERIES_LIMIT
    if small.any():
        out[small] = _j0_series(x[small])
    if (~small).any():
        out[~small] = _j0_asymptotic(x[~small])
    return float(out) if out.ndim == 0 else out


def bessel_acf(distance):
    """ACF of the 2D isotropic field, ``J0(2*pi*d)``."""
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    return bessel_j0(KAPPA * d)


@dataclass(frozen=True)
class WavenumberLattice:
    """Integer harmonics ``(n_x, n_y)`` inside the ellipse of an aperture.

    ``points`` has shape ``(K, 2)``, sorted by ``n_y`` then ``n_x``.
    """

    half_lengths: tuple[float, float]
    points: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def normalized(self) -> np.ndarray:
        """Harmonics scaled to direction cosines ``(n_x/L_x, n_y/L_y)``."""
        return self.points / np.asarray(self.half_lengths, dtype=float)

    def index(self) -> dict[tuple[int, int], int]:
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.points)}


def _ellipse_mask(nx: np.ndarray, ny: np.ndarray, lx: float, ly: float) -> np.ndarray:
    # tiny slack so that points exactly on the rim survive rounding in n/L
    return (nx / lx) ** 2 + (ny / ly) ** 2 <= 1.0 + 1e-12


def build_lattice_ellipse(lx: float, ly: float) -> WavenumberLattice:
    """Enumerate the propagating harmonics of an ``lx`` by ``ly`` aperture."""
    if not (lx > 0 and ly > 0):
        raise ValueError(f"aperture lengths must be positive, got {lx}, {ly}")
    mx, my = int(math.floor(lx)), int(math.floor(ly))
    ny, nx = np.meshgrid(np.arange(-my, my + 1), np.arange(-mx, mx + 1), indexing="ij")
    nx, ny = nx.ravel(), ny.ravel()
    keep = _ellipse_mask(nx, ny, lx, ly)
    pts = np.stack([nx[keep], ny[keep]], axis=1).astype(np.int64)
    return WavenumberLattice((float(lx), float(ly)), pts)


def evanescent_harmonics(lx: float, ly: float, margin: int = 2) -> np.ndarray:
    """Integer harmonics just outside the ellipse (reporting only)."""
    mx, my = int(math.floor(lx)) + margin, int(math.floor(ly)) + margin
    ny, nx = np.meshgrid(np.arange(-my, my + 1), np.arange(-mx, mx + 1), indexing="ij")
    nx, ny = nx.ravel(), ny.ravel()
    out = ~_ellipse_mask(nx, ny, lx, ly)
    return np.stack([nx[out], ny[out]], axis=1)


@dataclass(frozen=True)
class WavenumberPatch:
    """Axis-aligned rectangle in the ``(k_x, k_y)`` plane."""

    kx_lo: float
    kx_hi: float
    ky_lo: float
    ky_hi: float
    kappa: float = KAPPA

    def __post_init__(self):
        if not (self.kx_lo < self.kx_hi and self.ky_lo < self.ky_hi):
            raise ValueError("patch bounds must satisfy lo < hi on both axes")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


def harmonic_patch(nx: int, ny: int, lx: float, ly: float, kappa: float = KAPPA) -> WavenumberPatch:
    """Cell of width ``kappa/L`` per axis centred on harmonic ``(nx, ny)``."""
    wx, wy = kappa / lx, kappa / ly
    return WavenumberPatch((nx - 0.5) * wx, (nx + 0.5) * wx, (ny - 0.5) * wy, (ny + 0.5) * wy, kappa)


_QUAD_TOL = 1e-10
_QUAD_LIMIT = 200


def isotropic_patch_integral(patch: WavenumberPatch) -> float:
    """Mass of one hemisphere of the isotropic spectrum inside ``patch``.

    The measure is ``dk_x dk_y / (4 pi kappa sqrt(kappa^2 - k_x^2 - k_y^2))``
    on the propagation disk, so the full disk carries 1/2. The inner
    ``k_y`` integral is done in closed form (an arcsine), which removes the
    rim singularity; the outer integral is adaptive with absolute tolerance
    1e-10.
    """
    kappa = patch.kappa
    u_lo = max(patch.kx_lo / kappa, -1.0)
    u_hi = min(patch.kx_hi / kappa, 1.0)
    v_lo = max(patch.ky_lo / kappa, -1.0)
    v_hi = min(patch.ky_hi / kappa, 1.0)
    if u_lo >= u_hi or v_lo >= v_hi:
        return 0.0

    def inner(u):
        a = math.sqrt(max(1.0 - u * u, 0.0))
        if a == 0.0:
            return 0.0
        hi = min(max(v_hi / a, -1.0), 1.0)
        lo = min(max(v_lo / a, -1.0), 1.0)
        return math.asin(hi) - math.asin(lo)

    # kinks where the clipping in `inner` switches on
    breaks = sorted(
        s * math.sqrt(1.0 - v * v)
        for v in (v_lo, v_hi)
        if abs(v) < 1.0
        for s in (-1.0, 1.0)
    )
    breaks = [b for b in breaks if u_lo < b < u_hi]
    val, err = integrate.quad(
        inner, u_lo, u_hi, points=breaks or None, epsabs=_QUAD_TOL, epsrel=1e-12, limit=_QUAD_LIMIT
    )
    if not np.isfinite(val) or err > 1e-8:
        raise QuadratureError(f"patch integral did not converge (error estimate {err:.3g})")
    return val / (4.0 * math.pi)


def line_patch_integral(k_lo: float, k_hi: float, kappa: float = KAPPA) -> float:
    """Mass of the 2D isotropic (cylindrical) spectrum on ``[k_lo, k_hi]``.

    The measure along the array axis is ``dk / (pi sqrt(kappa^2 - k^2))``,
    whose inverse transform is ``J0(kappa x)``; the full segment carries 1.
    """
    if not k_lo < k_hi:
        raise ValueError("need k_lo < k_hi")
    lo = min(max(k_lo / kappa, -1.0), 1.0)
    hi = min(max(k_hi / kappa, -1.0), 1.0)
    return (math.asin(hi) - math.asin(lo)) / math.pi
