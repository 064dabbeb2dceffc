import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from basinuq.stats import cdf_distance, kde_pdf


class TestCdfDistance:
    def test_identical_samples(self):
        a = np.array([0.3, 1.2, 5.0, -2.0])
        assert cdf_distance(a, a) == 0.0

    def test_disjoint_supports(self):
        assert cdf_distance([1, 2, 3], [10, 11]) == 1.0

    def test_hand_example(self):
        assert cdf_distance([1, 2, 3], [2, 3, 4]) == pytest.approx(1.0 / 3.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            cdf_distance([], [1.0])

    @given(
        st.lists(st.floats(-50, 50), min_size=2, max_size=60),
        st.lists(st.floats(-50, 50), min_size=2, max_size=60),
    )
    def test_matches_scipy(self, a, b):
        ours = cdf_distance(a, b)
        ref = sps.ks_2samp(a, b, method="asymp").statistic
        assert ours == pytest.approx(ref, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=40), rng.normal(1.0, 2.0, size=25)
        assert cdf_distance(a, b) == pytest.approx(cdf_distance(b, a))


class TestKde:
    def test_single_sample_is_gaussian_bump(self):
        d = kde_pdf([0.4], bandwidth=0.05)
        peak = d.grid[np.argmax(d.pdf)]
        assert peak == pytest.approx(0.4, abs=1e-3)
        assert d.pdf.max() == pytest.approx(
            1.0 / (0.05 * np.sqrt(2 * np.pi)), rel=1e-3
        )

    def test_pdf_integrates_to_one(self):
        rng = np.random.default_rng(1)
        d = kde_pdf(rng.normal(0.5, 0.1, 400), bandwidth=0.02)
        assert d.integral() == pytest.approx(1.0, abs=1e-3)

    def test_bandwidth_must_be_positive(self):
        with pytest.raises(ValueError):
            kde_pdf([1.0], bandwidth=0.0)

    def test_trimodal_sample_detected(self):
        rng = np.random.default_rng(2)
        s = np.concatenate([
            rng.normal(0.3, 0.01, 300),
            rng.normal(0.6, 0.01, 200),
            rng.normal(0.75, 0.01, 250),
        ])
        d = kde_pdf(s, bandwidth=0.02)
        peaks = d.local_maxima()
        assert len(peaks) >= 3
        for target in (0.3, 0.6, 0.75):
            assert np.min(np.abs(peaks - target)) < 0.05

    def test_ecdf_limits(self):
        d = kde_pdf([1.0, 2.0, 3.0], bandwidth=0.1)
        assert d.ecdf(0.0) == 0.0
        assert d.ecdf(5.0) == 1.0
        assert np.all(np.diff(d.ecdf(np.linspace(0, 5, 50))) >= 0)
