import numpy as np
import pytest

from rwsre.stats import (
    cvm_test,
    ecdf,
    hill_tail_exponent,
    ks_critical,
    ks_distance,
    ks_test,
    mean_ci,
    variance_ci,
    wilson_ci,
)


class TestKS:
    def test_identical_samples(self):
        a = np.arange(100.0)
        assert ks_distance(a, a.copy()) == 0.0

    def test_disjoint_samples(self):
        a = np.arange(100.0)
        assert ks_distance(a, a + 1000.0) == 1.0

    def test_matches_scipy(self):
        from scipy import stats as sps

        rng = np.random.default_rng(1)
        a, b = rng.normal(size=300), rng.normal(0.2, size=400)
        stat, p = ks_test(a, b)
        ref = sps.ks_2samp(a, b, method="asymp")
        assert stat == pytest.approx(ref.statistic, abs=1e-12)
        assert p == pytest.approx(ref.pvalue, rel=1e-6)

    def test_critical_value(self):
        # large-sample two-sided critical value c(alpha) sqrt((n+m)/(n m))
        crit = ks_critical(1000, 1000, 0.05)
        assert crit == pytest.approx(1.358 * np.sqrt(2 / 1000), rel=0.01)
        assert ks_critical(1000, 1000, 0.01) > crit

    def test_pvalue_calibration(self):
        # under the null, p < 0.05 should occur about 5% of the time
        rng = np.random.default_rng(2)
        hits = 0
        reps = 400
        for _ in range(reps):
            a, b = rng.random(200), rng.random(200)
            _, p = ks_test(a, b)
            hits += p < 0.05
        lo, hi = wilson_ci(hits, reps, conf=0.999)
        assert lo <= 0.05 <= hi


class TestHelpers:
    def test_ecdf(self):
        vals = ecdf(np.array([1.0, 2.0, 3.0, 4.0]), np.array([0.0, 2.5, 10.0]))
        assert np.allclose(vals, [0.0, 0.5, 1.0])

    def test_cvm_null(self):
        rng = np.random.default_rng(3)
        _, p = cvm_test(rng.random(500), rng.random(500))
        assert p > 0.001

    def test_wilson_ci(self):
        lo, hi = wilson_ci(50, 100, conf=0.95)
        assert lo < 0.5 < hi
        assert hi - lo < 0.25
        lo0, hi0 = wilson_ci(0, 100, conf=0.95)
        assert lo0 == pytest.approx(0.0, abs=1e-12) and hi0 < 0.1

    def test_mean_variance_ci_cover(self):
        rng = np.random.default_rng(4)
        x = rng.normal(3.0, 2.0, size=5_000)
        m, lo, hi = mean_ci(x)
        assert lo < 3.0 < hi
        v, vlo, vhi = variance_ci(x)
        assert vlo < 4.0 < vhi

    def test_hill_on_pareto(self):
        rng = np.random.default_rng(5)
        alpha = 1.4
        x = rng.pareto(alpha, size=200_000) + 1.0
        est = hill_tail_exponent(x)
        assert est == pytest.approx(alpha, rel=0.05)
