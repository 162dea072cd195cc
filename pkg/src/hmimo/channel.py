"""
Channel generators: correlated Gaussian (``h = U Lambda^{1/2} e``) and the
Fourier plane-wave series expansion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correlation import ArrayGeometry, FieldModel, Subspace
from .spectral import (
    KAPPA,
    WavenumberLattice,
    WavenumberPatch,
    build_lattice_ellipse,
    harmonic_patch,
    isotropic_patch_integral,
    line_patch_integral,
)


def make_rng(seed, *stream) -> np.random.Generator:
    """Generator for ``(seed, *stream)``; distinct streams are independent."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream)))


def sample_cscg(size, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance circularly symmetric complex Gaussian samples."""
    z = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
    return (z[0] + 1j * z[1]) * np.sqrt(0.5)


@dataclass(frozen=True)
class ChannelRealization:
    matrix: np.ndarray
    seed: int | None = None
    model_tag: str = ""

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("channel realization has non-finite entries")

    @property
    def vector(self) -> np.ndarray:
        """SIMO channel as a flat vector."""
        if self.matrix.ndim == 2 and self.matrix.shape[1] != 1:
            raise ValueError("not a SIMO realization")
        return self.matrix.reshape(-1)


def generate_correlated(subspace: Subspace, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    """Draw ``h = U Lambda^{1/2} e``.

    Returns a vector, or an ``(N, count)`` array of independent columns.
    """
    U, lam = subspace.basis, np.sqrt(np.clip(subspace.eigenvalues, 0.0, None))
    n = 1 if count is None else count
    if subspace.rank == 0:
        out = np.zeros((subspace.dim, n), dtype=complex)
    else:
        e = sample_cscg((subspace.rank, n), rng)
        out = U @ (lam[:, None] * e)
    return out[:, 0] if count is None else out


def _response(geometry: ArrayGeometry, lattice: WavenumberLattice, sign: float) -> np.ndarray:
    p = geometry.positions()
    u = lattice.normalized
    radial = 1.0 - (u**2).sum(axis=1)
    if np.any(radial < -1e-12):
        raise ValueError("harmonic lies outside the lattice ellipse")
    kz = np.sqrt(np.clip(radial, 0.0, None))
    phase = KAPPA * (p[:, :1] * u[:, 0] + p[:, 1:2] * u[:, 1] + p[:, 2:3] * kz)
    return np.exp(sign * 1j * phase) / np.sqrt(geometry.size)


def _single(nx: int, ny: int, geometry: ArrayGeometry) -> WavenumberLattice:
    lat = WavenumberLattice(geometry.aperture, np.array([[nx, ny]], dtype=np.int64))
    u = lat.normalized[0]
    if u @ u > 1.0 + 1e-12:
        raise ValueError(f"harmonic ({nx}, {ny}) is evanescent for aperture {geometry.aperture}")
    return lat


def transmit_response(nx: int, ny: int, geometry: ArrayGeometry) -> np.ndarray:
    """Unit-norm transmit response of harmonic ``(nx, ny)``."""
    return _response(geometry, _single(nx, ny, geometry), -1.0)[:, 0]


def receive_response(lx: int, ly: int, geometry: ArrayGeometry) -> np.ndarray:
    """Unit-norm receive response of harmonic ``(lx, ly)``."""
    return _response(geometry, _single(lx, ly, geometry), 1.0)[:, 0]


def lattice_for(geometry: ArrayGeometry) -> WavenumberLattice:
    """Propagating harmonics of an array; linear arrays only index ``n_x``."""
    lat = build_lattice_ellipse(*geometry.aperture)
    if geometry.is_linear:
        pts = lat.points[lat.points[:, 1] == 0]
        lat = WavenumberLattice(lat.half_lengths, pts)
    return lat


def _harmonic_masses(geometry: ArrayGeometry, lattice: WavenumberLattice, field_model: FieldModel) -> np.ndarray:
    """Spectral mass of each harmonic's wavenumber cell.

    Cells are centred on the harmonics. Parts of the propagation disk whose
    cell centre is evanescent are folded onto the nearest propagating
    harmonic, so the lattice carries the whole spectrum.
    """
    lx, ly = lattice.half_lengths
    pts = lattice.points
    if field_model not in ("iso2d", "iso3d"):
        raise ValueError(f"unknown field model {field_model!r}")
    if field_model == "iso2d" and not geometry.is_linear:
        raise ValueError("the 2D isotropic model applies to linear arrays only")

    if geometry.is_linear:
        if field_model == "iso2d":
            segment = line_patch_integral
        else:
            def segment(lo, hi):
                return isotropic_patch_integral(WavenumberPatch(lo, hi, -KAPPA, KAPPA))
        edges = (pts[:, 0] - 0.5) * KAPPA / lx, (pts[:, 0] + 0.5) * KAPPA / lx
        mass = np.array([segment(lo, hi) for lo, hi in zip(*edges)])
        # rim slivers beyond the outermost cells
        top = edges[1].max()
        if top < KAPPA:
            mass[np.argmax(pts[:, 0])] += segment(top, KAPPA)
            mass[np.argmin(pts[:, 0])] += segment(-KAPPA, -top)
        return mass

    mass = np.array([isotropic_patch_integral(harmonic_patch(a, b, lx, ly)) for a, b in pts])
    index = lattice.index()
    mx, my = int(np.floor(lx + 0.5)) + 1, int(np.floor(ly + 0.5)) + 1
    for a in range(-mx, mx + 1):
        for b in range(-my, my + 1):
            if (a, b) in index:
                continue
            # skip cells that miss the disk
            ca = max(abs(a) - 0.5, 0.0) / lx
            cb = max(abs(b) - 0.5, 0.0) / ly
            if ca * ca + cb * cb >= 1.0:
                continue
            m = isotropic_patch_integral(harmonic_patch(a, b, lx, ly))
            if m == 0.0:
                continue
            # nearest in direction-cosine space; ties share the mass evenly
            d = ((lattice.normalized - (a / lx, b / ly)) ** 2).sum(axis=1)
            near = np.flatnonzero(d <= d.min() * (1 + 1e-9))
            mass[near] += m / len(near)
    return mass


@dataclass(frozen=True)
class PlaneWaveModel:
    """Precomputed plane-wave expansion for a receive array and optional transmitter.

    ``variances`` has shape ``(len(rx_lattice), len(tx_lattice))`` and sums to 1.
    ``tx_geometry`` is ``None`` for SIMO channels.
    """

    rx_geometry: ArrayGeometry
    tx_geometry: ArrayGeometry | None
    rx_lattice: WavenumberLattice
    tx_lattice: WavenumberLattice
    variances: np.ndarray = field(repr=False)
    normalization: float
    field_model: FieldModel
    rx_matrix: np.ndarray = field(repr=False)
    tx_matrix: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rx_matrix.shape[0], self.tx_matrix.shape[0]

    @property
    def is_simo(self) -> bool:
        return self.tx_geometry is None

    def variance_map(self) -> dict[tuple[int, int, int, int], float]:
        """``(l_x, l_y, n_x, n_y) -> sigma^2``."""
        out = {}
        for i, (a, b) in enumerate(self.rx_lattice.points):
            for j, (c, d) in enumerate(self.tx_lattice.points):
                out[(int(a), int(b), int(c), int(d))] = float(self.variances[i, j])
        return out

    @property
    def tag(self) -> str:
        tx = "simo" if self.is_simo else self.tx_geometry.describe()
        return f"planewave[{self.field_model}] rx={self.rx_geometry.describe()} tx={tx}"


def build_plane_wave_model(
    rx: ArrayGeometry,
    tx: ArrayGeometry | None = None,
    field_model: FieldModel = "iso3d",
) -> PlaneWaveModel:
    """Isotropic plane-wave model; ``sigma^2`` is the product of receive and
    transmit cell masses, normalized to unit total variance."""
    rx_lat = lattice_for(rx)
    rx_mass = _harmonic_masses(rx, rx_lat, field_model)
    if tx is None:
        tx_lat = WavenumberLattice((1.0, 1.0), np.zeros((1, 2), dtype=np.int64))
        tx_mass = np.ones(1)
        tx_matrix = np.ones((1, 1), dtype=complex)
    else:
        tx_lat = lattice_for(tx)
        tx_mass = _harmonic_masses(tx, tx_lat, field_model)
        tx_matrix = _response(tx, tx_lat, -1.0)
    var = np.outer(rx_mass, tx_mass)
    total = var.sum()
    if total <= 0:
        raise ValueError("spectrum carries no power on this lattice")
    var = var / total
    var.setflags(write=False)
    return PlaneWaveModel(rx, tx, rx_lat, tx_lat, var, float(total), field_model, _response(rx, rx_lat, 1.0), tx_matrix)


def generate_planewave(model: PlaneWaveModel, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
    """Draw ``H = sqrt(Nr Nt) A_r (H_a) A_t^H``.

    Returns an ``(Nr, Nt)`` matrix, or ``(count, Nr, Nt)`` for a batch.
    SIMO batches are returned as ``(Nr, count)`` columns instead, which is
    the layout the estimators and ACF code consume.
    """
    nr, nt = model.shape
    scale = np.sqrt(nr * nt)
    sd = np.sqrt(model.variances)
    n = 1 if count is None else count
    coeffs = sample_cscg((n,) + sd.shape, rng) * sd
    if model.is_simo:
        H = scale * (model.rx_matrix @ coeffs[:, :, 0].T)
        return H if count is not None else H[:, :1]
    H = scale * np.einsum("ik,nkl,jl->nij", model.rx_matrix, coeffs, model.tx_matrix.conj(), optimize=True)
    return H if count is not None else H[0]
