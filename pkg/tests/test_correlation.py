import math

import numpy as np
import pytest
from scipy import linalg

from hmimo.correlation import (
    ArrayGeometry,
    CorrelationMatrix,
    Retention,
    asymptotic_rank,
    clarke_correlation_matrix,
    effective_rank,
    eigen_subspace,
    real_times_complex,
    truncated_correlation,
)
from hmimo.spectral import bessel_j0


class TestGeometry:
    def test_defaults(self):
        g = ArrayGeometry(4)
        assert g.is_linear and g.size == 4 and g.spacing_y == 0.5

    def test_positions_centred_row_major(self):
        p = ArrayGeometry(3, 2, 0.5).positions()
        assert p.shape == (6, 3)
        assert np.allclose(p.mean(axis=0), 0)
        # index i * n_y + j
        assert np.allclose(p[1, :2], [-0.5, 0.25])
        assert np.allclose(p[2, :2], [0.0, -0.25])

    def test_aperture_and_describe(self):
        g = ArrayGeometry(32, 16, 0.25, 0.125)
        assert g.aperture == (8.0, 2.0)
        assert g.describe() == "32x16@0.25x0.125"

    @pytest.mark.parametrize("kw", [dict(n_x=0), dict(n_x=2, n_y=0), dict(n_x=2, spacing_x=0), dict(n_x=1.5)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ArrayGeometry(**kw)


class TestClarke:
    def test_ula_sinc_entries(self):
        R = clarke_correlation_matrix(ArrayGeometry(6, 1, 0.25)).entries
        d = np.abs(np.subtract.outer(np.arange(6), np.arange(6))) * 0.25
        assert np.allclose(R, np.sinc(2 * d), atol=1e-15)

    def test_ula_bessel_entries(self):
        R = clarke_correlation_matrix(ArrayGeometry(5, 1, 1 / 16), "iso2d").entries
        assert R[0, 3] == pytest.approx(bessel_j0(2 * math.pi * 3 / 16))
        assert np.allclose(R, linalg.toeplitz(R[0]))

    def test_upa_matches_brute_force(self):
        g = ArrayGeometry(3, 4, 0.3)
        R = clarke_correlation_matrix(g, beta=2.0).entries
        p = g.positions()
        for a in range(g.size):
            for b in range(g.size):
                d = np.linalg.norm(p[a] - p[b])
                assert R[a, b] == pytest.approx(2.0 * np.sinc(2 * d), abs=1e-14)

    @pytest.mark.parametrize(
        "geom,model",
        [(ArrayGeometry(64, 1, 0.5), "iso3d"), (ArrayGeometry(64, 1, 1 / 16), "iso2d"), (ArrayGeometry(16, 16, 0.25), "iso3d")],
    )
    @pytest.mark.parametrize("beta", [1.0, 0.3])
    def test_invariants(self, geom, model, beta):
        R = clarke_correlation_matrix(geom, model, beta)
        R.check()
        assert R.trace == pytest.approx(geom.size * beta)

    def test_readonly(self, R_small):
        with pytest.raises(ValueError):
            R_small.entries[0, 0] = 2

    def test_iso2d_needs_linear(self):
        with pytest.raises(ValueError):
            clarke_correlation_matrix(ArrayGeometry(4, 4), "iso2d")

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            clarke_correlation_matrix(ArrayGeometry(4), "foo")

    def test_check_flags_bad_matrices(self):
        with pytest.raises(ValueError, match="Hermitian"):
            CorrelationMatrix(np.array([[1.0, 0.5], [0.2, 1.0]])).check()
        with pytest.raises(ValueError, match="PSD"):
            CorrelationMatrix(np.array([[1.0, 2.0], [2.0, 1.0]])).check()
        with pytest.raises(ValueError, match="trace"):
            CorrelationMatrix(np.eye(2) * 3).check()


class TestRetention:
    w = np.array([10.0, 5.0, 1.0, 1e-3, 1e-9])

    @pytest.mark.parametrize(
        "text,expected",
        [("relative:1e-5", 4), ("relative:0.05", 3), ("relative:0", 5), ("power:0.5", 1), ("power:0.9", 2), ("power:1", 5), ("rank:2", 2)],
    )
    def test_count(self, text, expected):
        assert Retention.parse(text).count(self.w) == expected

    def test_roundtrip(self):
        for text in ("relative:1e-05", "power:0.999", "rank:50"):
            assert str(Retention.parse(text)) == text

    @pytest.mark.parametrize("text", ["relative", "relative:2", "power:0", "rank:0", "rank:2.5", "bogus:1"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            Retention.parse(text)

    def test_rank_too_large(self):
        with pytest.raises(ValueError):
            Retention("rank", 9).count(self.w)

    def test_power_ignores_roundoff_tail(self):
        w = np.array([1.0, 0.5, 1e-17, -1e-17])
        assert Retention("power", 1.0).count(w) == 2


class TestSubspace:
    def test_orthonormal_and_sorted(self, R_small):
        S = eigen_subspace(R_small)
        U = S.basis
        assert np.allclose(U.conj().T @ U, np.eye(S.rank), atol=1e-12)
        assert np.all(np.diff(S.eigenvalues) <= 0)
        assert U.flags.c_contiguous

    def test_reconstruction_error_bounded_by_discarded(self, R_small):
        S = eigen_subspace(R_small, Retention("rank", 20))
        w = linalg.eigvalsh(R_small.entries)[::-1]
        err = np.linalg.norm(R_small.entries - S.reconstruct(), 2)
        assert err == pytest.approx(w[20], rel=1e-8)

    def test_projector_idempotent(self, R_small, rng):
        S = eigen_subspace(R_small)
        P = S.projector()
        assert np.allclose(P @ P, P, atol=1e-12)
        y = rng.standard_normal((64, 3)) + 1j * rng.standard_normal((64, 3))
        assert np.allclose(S.project(y), P @ y)
        assert np.allclose(S.project(y[:, 0]), P @ y[:, 0])

    def test_rank_between_asymptote_and_size(self):
        g = ArrayGeometry(32, 32, 0.25)
        R = clarke_correlation_matrix(g)
        r = effective_rank(R)
        # value measured for this configuration under the default policy
        assert r == 359
        assert asymptotic_rank(g) < r < g.size
        assert asymptotic_rank(g) == pytest.approx(201.06, abs=0.01)

    def test_rank_grows_with_aperture(self):
        ranks = [effective_rank(clarke_correlation_matrix(ArrayGeometry(n, n, 0.25))) for n in (8, 12, 16)]
        assert ranks == sorted(ranks) and ranks[0] < ranks[-1]


class TestTruncated:
    def test_rank_and_trace(self, R_small):
        T = truncated_correlation(R_small, 10)
        assert np.linalg.matrix_rank(T.entries, tol=1e-9) == 10
        T.check()

    def test_without_renormalize(self, R_small):
        T = truncated_correlation(R_small, 10, renormalize=False)
        w = linalg.eigvalsh(R_small.entries)[::-1]
        assert T.trace == pytest.approx(w[:10].sum())

    @pytest.mark.parametrize("k", [0, 10_000])
    def test_bad_keep(self, R_small, k):
        with pytest.raises(ValueError):
            truncated_correlation(R_small, k)


@pytest.mark.parametrize("shape", [(7,), (7, 1), (7, 5)])
def test_real_times_complex(rng, shape):
    M = rng.standard_normal((4, 7))
    Y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    assert np.allclose(real_times_complex(M, Y), M @ Y, atol=1e-13)
    assert np.allclose(real_times_complex(M, Y[::-1]), M @ Y[::-1], atol=1e-13)
