import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from mocsim.adversary import (
    best_permutation_correlation,
    cumulant_classify,
    derotate_fourth_power,
    estimate_cumulants,
    fastica_separate,
    ks_classify,
    ks_distance,
    separated_noise_variance,
    theoretical_c42,
    verdicts_to_csv,
)
from mocsim.channel import complex_awgn, snr_db_to_sigma2
from mocsim.constellation import Constellation, by_name
from mocsim.errors import SampleSizeError, ShapeError

QPSK = by_name("qpsk")
QAM16 = by_name("16qam")
CANDIDATES = [QPSK, QAM16]


def _stream(c, n, rng):
    return c.points[rng.integers(0, c.order, n)]


class TestCumulants:
    # Textbook values of the normalised fourth-order cumulant C42 for unit-power alphabets.
    @pytest.mark.parametrize("name,value", [("qpsk", -1.0), ("8psk", -1.0), ("16qam", -0.68),
                                            ("64qam", -13 / 21)])
    def test_theoretical_values(self, name, value):
        assert theoretical_c42(by_name(name)) == pytest.approx(value, abs=1e-12)

    def test_qpsk_c40(self):
        f = estimate_cumulants(np.tile(QPSK.points, 32))
        assert f.C40 == pytest.approx(-1.0, abs=1e-12)
        assert abs(f.C20) < 1e-12

    def test_gaussian_near_zero(self):
        g = np.random.default_rng(0)
        z = complex_awgn(200_000, 1.0, g)
        assert abs(estimate_cumulants(z).normalized_c42()) < 0.03

    def test_noise_leaves_c42_alone(self):
        g = np.random.default_rng(1)
        x = _stream(QAM16, 400_000, g)
        y = x + complex_awgn(x.size, 0.5, g)
        assert estimate_cumulants(y).C42 == pytest.approx(-0.68, abs=0.03)
        assert estimate_cumulants(y).normalized_c42(0.5) == pytest.approx(-0.68, abs=0.05)

    def test_too_few_samples(self):
        with pytest.raises(SampleSizeError):
            estimate_cumulants(np.ones(10))

    @settings(max_examples=30)
    @given(st.floats(0, 2 * np.pi), st.floats(0.1, 10))
    def test_rotation_and_scale_invariance(self, phi, scale):
        x = np.tile(QAM16.points, 8)
        base = estimate_cumulants(x).normalized_c42()
        moved = estimate_cumulants(scale * np.exp(1j * phi) * x).normalized_c42()
        assert moved == pytest.approx(base, abs=1e-9)

    def test_antipodal_pair(self):
        pair = Constellation("pair", [1, -1], ["0", "1"])
        assert theoretical_c42(pair) == pytest.approx(-2.0)

    def test_fallback_when_noise_exceeds_power(self):
        f = estimate_cumulants(np.tile(QPSK.points, 32))
        assert f.normalized_c42(5.0) == f.normalized_c42()


class TestClassifiers:
    @pytest.mark.parametrize("truth", [0, 1])
    def test_cumulant_at_10db(self, truth):
        g = np.random.default_rng(2 + truth)
        sigma2 = snr_db_to_sigma2(10.0)
        hits = 0
        for _ in range(50):
            y = _stream(CANDIDATES[truth], 1000, g)
            y = y + complex_awgn(y.size, sigma2, g)
            hits += cumulant_classify(y, CANDIDATES, sigma2).chosen == truth
        assert hits >= 48

    @pytest.mark.parametrize("mode", ["magnitude", "quadrature"])
    @pytest.mark.parametrize("truth", [0, 1])
    def test_ks_at_10db(self, mode, truth):
        g = np.random.default_rng(10 + truth)
        hits = 0
        for _ in range(30):
            y = _stream(CANDIDATES[truth], 1000, g) * np.exp(1j * g.uniform(0, 2 * np.pi))
            y = y + complex_awgn(y.size, snr_db_to_sigma2(10.0), g)
            v = ks_classify(y, CANDIDATES, mode=mode, snr_db=10.0, reference_size=10**5)
            hits += v.chosen == truth
            assert v.label == CANDIDATES[v.chosen].name
        assert hits >= 28

    @pytest.mark.parametrize("truth", [0, 1])
    def test_noiseless_against_noiseless_reference(self, truth):
        y = np.tile(CANDIDATES[truth].points, 64)
        v = ks_classify(y, CANDIDATES, snr_db=np.inf, reference_size=10**4)
        assert v.chosen == truth
        assert v.scores[truth] < 0.02

    def test_tie_goes_to_first_candidate(self):
        y = np.tile(QAM16.points, 8)
        assert cumulant_classify(y, [QAM16, QAM16]).chosen == 0

    def test_verdict_csv(self):
        g = np.random.default_rng(0)
        y = _stream(QPSK, 500, g)
        v = cumulant_classify(y, CANDIDATES)
        text = verdicts_to_csv([(0, 10.0, "qpsk", v), (1, 12.5, "qpsk", v)])
        lines = text.splitlines()
        assert lines[0] == "trial,snr_db,true_label,chosen_label,scores"
        trial, snr, true, chosen, scores = lines[2].split(",")
        assert (trial, snr, true, chosen) == ("1", "12.5", "qpsk", v.label)
        assert tuple(float(x) for x in scores.split(";")) == v.scores

    def test_ks_distance_identical(self):
        x = np.sort(np.random.default_rng(0).random(500))
        assert ks_distance(x, x) == pytest.approx(0.0, abs=1e-12)
        assert ks_distance(x + 10, x) == pytest.approx(1.0)

    def test_ks_distance_matches_scipy(self):
        g = np.random.default_rng(1)
        for _ in range(20):
            a = np.round(g.normal(size=g.integers(5, 200)), 1)
            b = np.sort(np.round(g.normal(0.2, size=g.integers(5, 300)), 1))
            assert ks_distance(a, b) == pytest.approx(ks_2samp(a, b).statistic, abs=1e-12)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            ks_classify(np.ones(100), CANDIDATES, mode="phase")

    def test_derotation_restores_axes(self):
        z = np.tile(QAM16.points, 4) * np.exp(0.3j)
        back = derotate_fourth_power(z)
        k = np.round(np.angle(back[0] / QAM16.points[0]) / (np.pi / 2))
        assert np.allclose(back * np.exp(-1j * np.pi / 2 * k), np.tile(QAM16.points, 4), atol=1e-9)


def _unitary(k, g):
    m = g.standard_normal((k, k)) + 1j * g.standard_normal((k, k))
    q, _ = np.linalg.qr(m)
    return q


class TestFastIca:
    def test_identity_mixing(self):
        g = np.random.default_rng(0)
        S = np.stack([_stream(QPSK, 4000, g) for _ in range(3)])
        res = fastica_separate(S, 3, rng=1)
        assert res.converged
        assert best_permutation_correlation(res.separated, S).min() > 0.99

    @pytest.mark.parametrize("contrast", ["log", "kurtosis"])
    def test_unitary_mixing(self, contrast):
        g = np.random.default_rng(4)
        for seed in range(10):
            S = np.stack([_stream(QPSK, 5000, g) for _ in range(3)])
            res = fastica_separate(_unitary(3, g) @ S, 3, rng=seed, contrast=contrast)
            assert best_permutation_correlation(res.separated, S).min() >= 0.95

    def test_whitened_output(self):
        g = np.random.default_rng(5)
        S = np.stack([_stream(QAM16, 5000, g) for _ in range(3)])
        A = g.standard_normal((3, 3)) + 1j * g.standard_normal((3, 3))
        res = fastica_separate(A @ S, 3, rng=0)
        cov = res.separated @ res.separated.conj().T / S.shape[1]
        assert np.allclose(cov, np.eye(3), atol=1e-6)

    def test_gaussian_sources_do_not_crash(self):
        g = np.random.default_rng(6)
        res = fastica_separate(complex_awgn((2, 2000), 1.0, g), 2, rng=0, max_iter=20)
        assert res.separated.shape == (2, 2000)

    def test_errors(self):
        with pytest.raises(ShapeError):
            fastica_separate(np.ones((2, 500)), 3)
        with pytest.raises(SampleSizeError):
            fastica_separate(np.ones((3, 100)), 3)
        with pytest.raises(ValueError):
            g = np.random.default_rng(0)
            fastica_separate(complex_awgn((2, 500), 1.0, g), 2, contrast="tanh")

    def test_rank_deficient(self):
        g = np.random.default_rng(7)
        s = _stream(QPSK, 1000, g)
        with pytest.raises(ShapeError):
            fastica_separate(np.stack([s, 2 * s]), 2)

    def test_noise_variance_per_row(self):
        g = np.random.default_rng(8)
        S = np.stack([_stream(QPSK, 4000, g) for _ in range(2)])
        res = fastica_separate(S, 2, rng=0)
        nv = separated_noise_variance(res, 0.1)
        assert np.allclose(nv, 0.1 * np.sum(np.abs(res.demixing) ** 2, axis=1))


class TestPermutationCorrelation:
    def test_swapped_and_scaled(self):
        g = np.random.default_rng(0)
        S = complex_awgn((3, 1000), 1.0, g)
        E = np.stack([2j * S[2], -S[0], 0.5 * S[1]])
        assert np.allclose(best_permutation_correlation(E, S), 1.0)

