"""
Monte Carlo harness: empirical ACF validation and NMSE-versus-SNR sweeps.

Randomness is derived per work unit from ``(master_seed, unit index)`` and
partial results are reduced in ascending unit order, so outputs do not
depend on the number of worker threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .channel import (
    ChannelRealization,
    build_plane_wave_model,
    generate_correlated,
    generate_planewave,
    make_rng,
    sample_cscg,
)
from .correlation import (
    DEFAULT_RETENTION,
    ArrayGeometry,
    CorrelationMatrix,
    FieldModel,
    Retention,
    Subspace,
    clarke_correlation_matrix,
    effective_rank,
    eigen_subspace,
    truncated_correlation,
)
from .estimation import EstimatorKind, EstimatorSpec, MMSEFilter, analytic_nmse, apply_matrix
from .spectral import bessel_acf, sinc_acf

log = logging.getLogger(__name__)

Generator = Literal["planewave", "toeplitz"]


def _map_ordered(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# ACF validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ACFRecord:
    lag_x: float
    lag_y: float
    empirical: float
    closed_form: float
    realizations: int
    imag: float = 0.0

    @property
    def abs_error(self) -> float:
        return abs(self.empirical - self.closed_form)


def closed_form_acf(distance, field_model: FieldModel):
    return bessel_acf(distance) if field_model == "iso2d" else sinc_acf(distance)


class ACFAccumulator:
    """Running lag-class sums of ``h_{p+d} conj(h_p)`` on the element grid."""

    def __init__(self, geometry: ArrayGeometry, max_lag: tuple[int, int]):
        self.geometry = geometry
        self.max_lag = max_lag
        self.sums = np.zeros((max_lag[0] + 1, max_lag[1] + 1), dtype=complex)
        self.count = 0

    def partial(self, H: np.ndarray) -> np.ndarray:
        """Lag sums for an ``(N, M)`` block of realizations."""
        g = self.geometry
        grid = H.T.reshape(-1, g.n_x, g.n_y)
        F = np.fft.fft2(grid, s=(2 * g.n_x, 2 * g.n_y))
        ac = np.fft.ifft2(np.abs(F) ** 2).sum(axis=0)
        mx, my = self.max_lag
        return ac[: mx + 1, : my + 1]

    def add(self, block_sum: np.ndarray, m: int) -> None:
        self.sums += block_sum
        self.count += m

    def records(self, field_model: FieldModel) -> list[ACFRecord]:
        g = self.geometry
        mx, my = self.max_lag
        dx = np.arange(mx + 1)
        dy = np.arange(my + 1)
        pairs = np.outer(g.n_x - dx, g.n_y - dy) * self.count
        est = self.sums / pairs
        out = []
        for j in range(my + 1):
            for i in range(mx + 1):
                x, y = i * g.spacing_x, j * g.spacing_y
                out.append(
                    ACFRecord(
                        lag_x=x,
                        lag_y=y,
                        empirical=float(est[i, j].real),
                        closed_form=float(closed_form_acf(math.hypot(x, y), field_model)),
                        realizations=self.count,
                        imag=float(est[i, j].imag),
                    )
                )
        return out


def default_max_lag(geometry: ArrayGeometry) -> tuple[int, int]:
    """Lags covering a quarter of the aperture on each axis."""
    lx, ly = geometry.aperture
    mx = min(int(round(lx / 4 / geometry.spacing_x)), geometry.n_x - 1)
    my = 0 if geometry.is_linear else min(int(round(ly / 4 / geometry.spacing_y)), geometry.n_y - 1)
    return mx, my


def empirical_acf(
    realizations: Sequence[ChannelRealization] | np.ndarray,
    geometry: ArrayGeometry,
    field_model: FieldModel = "iso3d",
    max_lag: tuple[int, int] | None = None,
) -> list[ACFRecord]:
    """Lag-class averaged ACF of SIMO realizations.

    ``realizations`` is a list of :class:`ChannelRealization` or an
    ``(N, M)`` array with one realization per column.
    """
    if isinstance(realizations, np.ndarray):
        H = realizations.reshape(realizations.shape[0], -1)
    else:
        H = np.stack([r.vector for r in realizations], axis=1)
    if H.shape[0] != geometry.size:
        raise ValueError(f"realizations have {H.shape[0]} entries, geometry has {geometry.size} elements")
    acc = ACFAccumulator(geometry, max_lag or default_max_lag(geometry))
    acc.add(acc.partial(H), H.shape[1])
    return acc.records(field_model)


def run_acf_experiment(
    geometry: ArrayGeometry,
    field_model: FieldModel = "iso2d",
    generator: Generator = "planewave",
    realizations: int = 10_000,
    seed: int = 0,
    threads: int = 1,
    chunk: int = 500,
    max_lag: tuple[int, int] | None = None,
) -> list[ACFRecord]:
    """Generate ``realizations`` channels and estimate their ACF."""
    if realizations < 1:
        raise ValueError("need at least one realization")
    if generator == "planewave":
        model = build_plane_wave_model(geometry, None, field_model)

        def draw(rng, m):
            return generate_planewave(model, rng, m)

    elif generator == "toeplitz":
        R = clarke_correlation_matrix(geometry, field_model)
        sub = eigen_subspace(R, Retention("power", 1.0))

        def draw(rng, m):
            return generate_correlated(sub, rng, m)

    else:
        raise ValueError(f"unknown generator {generator!r}")

    acc = ACFAccumulator(geometry, max_lag or default_max_lag(geometry))
    starts = list(range(0, realizations, chunk))

    def work(k):
        m = min(chunk, realizations - starts[k])
        return acc.partial(draw(make_rng(seed, k), m)), m

    for part, m in _map_ordered(work, list(range(len(starts))), threads):
        acc.add(part, m)
    return acc.records(field_model)


# --------------------------------------------------------------------------
# NMSE sweeps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    n_x: int = 32
    n_y: int = 32
    spacing: float = 0.25
    field_model: FieldModel = "iso3d"
    estimators: tuple[str, ...] = ("ls", "mmse", "rsls", "rsls-iso")
    snr_grid_db: tuple[float, ...] = tuple(float(s) for s in range(-10, 31, 5))
    trials: int = 1000
    master_seed: int = 0
    retention: Retention = DEFAULT_RETENTION
    truncate_fraction: float = 0.25
    renormalize: bool = True
    beta: float = 1.0
    threads: int = 1
    chunk: int = 100

    def __post_init__(self):
        if not self.snr_grid_db:
            raise ValueError("SNR grid must be non-empty")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise ValueError("SNR grid must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 < self.truncate_fraction <= 1:
            raise ValueError("truncate_fraction must lie in (0, 1]")
        for e in self.estimators:
            EstimatorKind(e)

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.n_x, self.n_y, self.spacing)


@dataclass(frozen=True)
class NMSERecord:
    estimator: str
    snr_db: float
    empirical_nmse: float
    analytic_nmse: float | None
    trials: int
    stderr: float

    @property
    def nmse_db(self) -> float:
        return 10 * math.log10(self.empirical_nmse)

    @property
    def analytic_db(self) -> float | None:
        return None if self.analytic_nmse is None else 10 * math.log10(self.analytic_nmse)


@dataclass
class SweepSetup:
    """Correlation matrices and estimator specs shared by every trial."""

    config: ExperimentConfig
    R_iso: CorrelationMatrix
    R_true: CorrelationMatrix
    rank_iso: int
    keep: int
    true_subspace: Subspace
    specs: dict[str, EstimatorSpec] = field(default_factory=dict)


def prepare_sweep(config: ExperimentConfig) -> SweepSetup:
    """Build ``R_iso``, the truncated ``R`` and the estimator specs."""
    geom = config.geometry
    R_iso = clarke_correlation_matrix(geom, config.field_model, config.beta)
    rank_iso = effective_rank(R_iso, config.retention)
    keep = max(1, int(round(config.truncate_fraction * rank_iso)))
    R_true = truncated_correlation(R_iso, keep, config.renormalize)
    true_sub = eigen_subspace(R_true, Retention("rank", keep))
    setup = SweepSetup(config, R_iso, R_true, rank_iso, keep, true_sub)
    for name in config.estimators:
        kind = EstimatorKind(name)
        if kind is EstimatorKind.LS:
            spec = EstimatorSpec(kind)
        elif kind is EstimatorKind.MMSE:
            spec = EstimatorSpec(kind, correlation=R_true)
        elif kind is EstimatorKind.RS_LS:
            spec = EstimatorSpec(kind, subspace=true_sub)
        else:
            spec = EstimatorSpec(kind, subspace=eigen_subspace(R_iso, config.retention))
        setup.specs[name] = spec
    log.info("sweep %s: rank_iso=%d keep=%d", geom.describe(), rank_iso, keep)
    return setup


def _trial_errors(setup: SweepSetup, gains, trials: range) -> np.ndarray:
    """Squared errors, shape ``(n_estimators, n_snr, len(trials))``."""
    cfg = setup.config
    true_sub = setup.true_subspace
    N = setup.R_true.size
    E = np.empty((true_sub.rank, len(trials)), dtype=complex)
    W = np.empty((N, len(trials)), dtype=complex)
    for c, t in enumerate(trials):
        rng = make_rng(cfg.master_seed, t)
        E[:, c] = sample_cscg(true_sub.rank, rng)
        W[:, c] = sample_cscg(N, rng)
    H = apply_matrix(true_sub.basis, np.sqrt(np.clip(true_sub.eigenvalues, 0, None))[:, None] * E)
    out = np.empty((len(cfg.estimators), len(cfg.snr_grid_db), len(trials)))
    for s, snr in enumerate(cfg.snr_grid_db):
        g = 10 ** (snr / 10)
        Y = np.sqrt(g) * H + W
        for e, name in enumerate(cfg.estimators):
            spec = setup.specs[name]
            if spec.kind is EstimatorKind.LS:
                Hh = Y / np.sqrt(g)
            elif spec.kind is EstimatorKind.MMSE:
                Hh = apply_matrix(gains[s], Y)
            else:
                Hh = spec.subspace.project(Y) / np.sqrt(g)
            out[e, s] = np.sum(np.abs(Hh - H) ** 2, axis=0)
    return out


def run_nmse_sweep(config: ExperimentConfig, setup: SweepSetup | None = None) -> list[NMSERecord]:
    """Empirical and analytic NMSE for every (estimator, SNR) pair.

    Trial ``t`` draws its channel and unit noise from stream
    ``(master_seed, t)``; the same draws are reused at every SNR.
    """
    setup = setup or prepare_sweep(config)
    gains = []
    if any(EstimatorKind(e) is EstimatorKind.MMSE for e in config.estimators):
        gains = [MMSEFilter(setup.R_true, 10 ** (s / 10)).gain() for s in config.snr_grid_db]
    chunks = [range(a, min(a + config.chunk, config.trials)) for a in range(0, config.trials, config.chunk)]
    parts = _map_ordered(lambda r: _trial_errors(setup, gains, r), chunks, config.threads)
    err = np.concatenate(parts, axis=2)
    tr = setup.R_true.trace
    T = config.trials
    records = []
    for e, name in enumerate(config.estimators):
        spec = setup.specs[name]
        for s, snr in enumerate(config.snr_grid_db):
            x = err[e, s]
            sd = float(np.std(x, ddof=1)) if T > 1 else 0.0
            records.append(
                NMSERecord(
                    estimator=name,
                    snr_db=float(snr),
                    empirical_nmse=float(np.mean(x) / tr),
                    analytic_nmse=analytic_nmse(spec, 10 ** (snr / 10), setup.R_true),
                    trials=T,
                    stderr=sd / math.sqrt(T) / tr,
                )
            )
    return records


def nmse_table(records: Sequence[NMSERecord]) -> dict[tuple[str, float], NMSERecord]:
    return {(r.estimator, r.snr_db): r for r in records}


def gaps_at(records: Sequence[NMSERecord], snr_db: float = 10.0, analytic: bool = False) -> dict[str, float]:
    """LS minus each other estimator, in dB, at one SNR point."""
    tab = nmse_table(records)
    if ("ls", snr_db) not in tab:
        raise KeyError(f"no LS record at {snr_db} dB")

    def db(r):
        return r.analytic_db if analytic else r.nmse_db

    ls = db(tab[("ls", snr_db)])
    return {name: ls - db(r) for (name, s), r in tab.items() if s == snr_db and name != "ls"}


@dataclass(frozen=True)
class CalibrationRow:
    spacing: float
    retention: str
    rank_iso: int
    keep: int
    ls_minus_mmse_db: float
    ls_minus_rsls_iso_db: float


def calibration_table(
    retentions: Sequence[Retention],
    spacings: Sequence[float] = (0.25, 1 / 16),
    snr_db: float = 10.0,
    n: int = 32,
    truncate_fraction: float = 0.25,
) -> list[CalibrationRow]:
    """Analytic dB gaps at ``snr_db`` for each retention policy and spacing."""
    rows = []
    g = 10 ** (snr_db / 10)
    for spacing in spacings:
        R_iso = clarke_correlation_matrix(ArrayGeometry(n, n, spacing), "iso3d")
        w, V = R_iso.eigh()
        for ret in retentions:
            rank_iso = ret.count(w)
            keep = max(1, int(round(truncate_fraction * rank_iso)))
            R_true = truncated_correlation(R_iso, keep)
            ls = 10 * math.log10(analytic_nmse(EstimatorSpec("ls"), g, R_true))
            mmse = 10 * math.log10(analytic_nmse(EstimatorSpec("mmse", correlation=R_true), g, R_true))
            iso_spec = EstimatorSpec("rsls-iso", subspace=eigen_subspace(R_iso, ret))
            iso = 10 * math.log10(analytic_nmse(iso_spec, g, R_true))
            rows.append(CalibrationRow(spacing, str(ret), rank_iso, keep, ls - mmse, ls - iso))
    return rows
