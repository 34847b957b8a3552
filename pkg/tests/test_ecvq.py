import numpy as np
import pytest

from twostage.distances import variational_mc
from twostage.ecvq import (Codebook, DistortionSpec, LagrangianReport,
                           canonical_code, ecvq_design, ecvq_encode,
                           lagrangian_eval, pairwise_distortion, rho_n)
from twostage.models import GaussianIID
from twostage.rand import rng_for

SPEC = DistortionSpec(rho_max=1.0)
GAUSS = GaussianIID()


class TestRho:
    def test_identity(self):
        x = np.array([0.3, -0.7, 2.0])
        assert rho_n(SPEC, x, x) == 0.0

    def test_cap_active(self):
        assert rho_n(SPEC, np.array([0.0]), np.array([10.0])) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            rho_n(SPEC, np.zeros(3), np.zeros(4))

    def test_symmetry_and_triangle_random(self):
        rng = rng_for(41, 0)
        for _ in range(10_000):
            a, b, c = rng.normal(scale=1.5, size=(3, 4))
            assert rho_n(SPEC, a, b) == rho_n(SPEC, b, a)
            assert rho_n(SPEC, a, b) <= rho_n(SPEC, a, c) + rho_n(SPEC, c, b) + 1e-12

    def test_range(self):
        rng = rng_for(42, 0)
        for _ in range(100):
            a, b = rng.normal(scale=5.0, size=(2, 8))
            assert 0.0 <= rho_n(SPEC, a, b) <= SPEC.rho_max


class TestDesign:
    def test_point_mass(self):
        x0 = np.array([0.5, -1.0, 0.25])
        training = np.tile(x0, (40, 1))
        book = ecvq_design(training, lam=0.3, initial_size=8, spec=SPEC, seed=1)
        assert book.size == 1
        assert rho_n(SPEC, book.codevectors[0], x0) == pytest.approx(0.0)
        assert book.lengths[0] == 0

    def test_huge_lambda_collapses(self):
        X = GAUSS.sample_paths((0.0, 1.0), 4, 200, rng_for(2, 0))
        book = ecvq_design(X, lam=2 * 4 * SPEC.rho_max, initial_size=16,
                           spec=SPEC, seed=2)
        assert book.size <= 2

    def test_lambda_zero_perfect_fit(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [1.0, 1.0]])
        book = ecvq_design(X, lam=0.0, initial_size=3, spec=SPEC, seed=3,
                           tolerance=1e-12)
        idx = book.encode_many(X)
        d = pairwise_distortion(X, book.codevectors, SPEC)
        assert np.allclose(d[np.arange(4), idx], 0.0)

    def test_kraft_and_cap_many_seeds(self):
        for s in range(50):
            X = GAUSS.sample_paths((0.0, 1.0), 6, 256, rng_for(100 + s, 0))
            lam = [0.2, 0.5, 1.0][s % 3]
            book = ecvq_design(X, lam=lam, initial_size=32, spec=SPEC, seed=s)
            assert book.kraft_sum() <= 1.0 + 1e-12
            assert book.max_normalized_length() <= 2 * SPEC.rho_max / lam + 1e-12

    def test_lloyd_descent_monotone(self):
        for s in range(50):
            X = GAUSS.sample_paths((0.0, 1.0), 8, 300, rng_for(200 + s, 0))
            book = ecvq_design(X, lam=0.4, initial_size=16, spec=SPEC, seed=s)
            hist = np.array(book.training_lagrangians)
            assert np.all(np.diff(hist) <= 1e-9)

    def test_empty_training_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            ecvq_design(np.empty((0, 4)), lam=0.5, initial_size=4, spec=SPEC, seed=0)

    def test_nonfinite_training_rejected(self):
        X = np.full((5, 3), np.nan)
        with pytest.raises(ValueError, match="non-finite"):
            ecvq_design(X, lam=0.5, initial_size=4, spec=SPEC, seed=0)


class TestEncode:
    def _toy_book(self):
        lengths = [1, 1]
        return Codebook(n=1, codevectors=np.array([[0.0], [1.0]]),
                        lengths=np.array(lengths),
                        codes=tuple(canonical_code(lengths)), lam=0.5,
                        spec=SPEC)

    def test_nearest(self):
        book = self._toy_book()
        idx, bits = ecvq_encode(book, np.array([0.2]))
        assert idx == 0 and len(bits) == 1

    def test_codevector_maps_to_itself_lambda_zero(self):
        X = GAUSS.sample_paths((0.0, 1.0), 3, 64, rng_for(7, 0))
        book = ecvq_design(X, lam=0.0, initial_size=8, spec=SPEC, seed=7)
        for j in range(book.size):
            idx, _ = ecvq_encode(book, book.codevectors[j], lam=0.0)
            cost_j = rho_n(SPEC, book.codevectors[j], book.codevectors[idx])
            assert cost_j == pytest.approx(0.0) and idx <= j

    def test_matches_exhaustive_scan(self):
        X = GAUSS.sample_paths((0.0, 1.0), 5, 128, rng_for(8, 0))
        book = ecvq_design(X, lam=0.6, initial_size=16, spec=SPEC, seed=8)
        probe = GAUSS.sample_paths((0.0, 1.0), 5, 50, rng_for(9, 0))
        for x in probe:
            idx, bits = ecvq_encode(book, x)
            costs = [rho_n(SPEC, x, c) + 0.6 * L / 5
                     for c, L in zip(book.codevectors, book.lengths)]
            best = min(range(len(costs)), key=lambda j: (costs[j], j))
            assert idx == best
            assert bits == book.codes[idx]


class TestLagrangianEval:
    def test_report_identity(self):
        rep = LagrangianReport.build(0.1, 0.5, 0.3)
        assert rep.lagrangian == pytest.approx(0.25)
        with pytest.raises(ValueError):
            LagrangianReport(distortion=0.1, rate=0.5, lagrangian=0.9, lam=0.3)

    def test_single_codeword_rate_zero(self):
        book = Codebook(n=2, codevectors=np.array([[0.0, 0.0]]),
                        lengths=np.array([0]),
                        codes=tuple(canonical_code([0])), lam=0.5, spec=SPEC)
        rep = lagrangian_eval(book, GAUSS, (0.0, 1.0), 0.5, SPEC, 500, seed=10)
        assert rep.rate == 0.0 and rep.rate_se == 0.0
        assert rep.lagrangian == rep.distortion

    def test_mc_error_scaling(self):
        X = GAUSS.sample_paths((0.0, 1.0), 4, 256, rng_for(11, 0))
        book = ecvq_design(X, lam=0.5, initial_size=16, spec=SPEC, seed=11)
        r1 = lagrangian_eval(book, GAUSS, (0.0, 1.0), 0.5, SPEC, 2000, seed=12)
        r2 = lagrangian_eval(book, GAUSS, (0.0, 1.0), 0.5, SPEC, 4000, seed=12)
        assert r2.distortion_se == pytest.approx(r1.distortion_se / np.sqrt(2),
                                                 rel=0.25)

    def test_lagrangian_mismatch_bound(self):
        # codebooks designed for nearby parameters: performance degrades by
        # at most 4 rho_max d_n plus statistical slack
        lam = 0.5
        n = 4
        theta = (0.0, 1.0)
        for shift in (0.1, 0.3, 0.6):
            theta_p = (shift, 1.0)
            Xa = GAUSS.sample_paths(theta, n, 512, rng_for(13, 0))
            Xb = GAUSS.sample_paths(theta_p, n, 512, rng_for(13, 1))
            book_a = ecvq_design(Xa, lam=lam, initial_size=16, spec=SPEC, seed=13)
            book_b = ecvq_design(Xb, lam=lam, initial_size=16, spec=SPEC, seed=14)
            rep_aa = lagrangian_eval(book_a, GAUSS, theta, lam, SPEC, 4000, seed=15)
            rep_ab = lagrangian_eval(book_b, GAUSS, theta, lam, SPEC, 4000, seed=15)
            d = variational_mc(GAUSS, theta, theta_p, n, 40_000, seed=16)
            ses = (rep_aa.distortion_se + lam * rep_aa.rate_se
                   + rep_ab.distortion_se + lam * rep_ab.rate_se
                   + 4 * SPEC.rho_max * d.standard_error)
            assert rep_ab.lagrangian <= (rep_aa.lagrangian
                                         + 4 * SPEC.rho_max * d.value + 3 * ses)


class TestSerialization:
    def test_round_trip(self):
        X = GAUSS.sample_paths((0.0, 1.0), 4, 128, rng_for(17, 0))
        book = ecvq_design(X, lam=0.5, initial_size=16, spec=SPEC, seed=17)
        blob = book.to_bytes()
        back = Codebook.from_bytes(blob)
        assert back.n == book.n
        assert np.allclose(back.codevectors, book.codevectors)
        assert np.array_equal(back.lengths, book.lengths)
        assert back.codes == book.codes

    def test_bad_magic(self):
        with pytest.raises(ValueError, match="version-1"):
            Codebook.from_bytes(b"JUNKxxxxxxxxxxxxxxxxxxxxxxxxxxxx")
