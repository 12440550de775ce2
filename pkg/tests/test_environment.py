import json

import numpy as np
import pytest
from scipy.special import zeta

from rwsre.environment import (
    DriftLaw,
    Environment,
    EnvironmentSpec,
    GapLaw,
    ScalingSequences,
    kesten_alpha,
    sample_environment,
    speed_v,
    validate_regime,
)
from rwsre.rng import substream


class TestGapLaw:
    def test_tail_and_pmf_consistency(self):
        gl = GapLaw(beta=1.5)
        ks = np.arange(1, 200)
        pmf = np.array([gl.pmf(k) for k in ks])
        tails = np.array([gl.tail(k) for k in ks])
        assert np.allclose(pmf, tails[:-1] - tails[1:] if False else
                           np.array([gl.tail(k - 1) - gl.tail(k) for k in ks]))
        assert gl.tail(0) == 1.0
        assert abs(sum(gl.pmf(k) for k in range(1, 200000)) - 1.0) < 1e-3

    def test_sample_range_and_tail(self):
        gl = GapLaw(beta=1.2)
        rng = substream(1, "gap")
        x = gl.sample(rng, 200_000)
        assert x.min() >= gl.support_min()
        # empirical tail at a moderate level matches the law
        lvl = 50
        emp = np.mean(x > lvl)
        assert abs(emp - gl.tail(lvl)) < 5e-4

    def test_mean_is_one_plus_zeta(self):
        # E xi = sum_k P[xi > k] = 1 + zeta(beta) for unit scale, beta > 1
        for beta in (1.2, 1.5, 2.5):
            gl = GapLaw(beta=beta)
            assert gl.moment(1.0) == pytest.approx(1.0 + zeta(beta), rel=1e-6)

    def test_moment_against_brute_sum(self):
        gl = GapLaw(beta=2.5)
        ks = np.arange(1, 4_000_000)
        pk = np.array([1.0, *(ks[:-1] ** -2.5)]) - ks**-2.5
        brute = float(np.sum(ks**0.7 * pk))
        assert gl.moment(0.7) == pytest.approx(brute, rel=1e-4)

    def test_moment_diverges_above_beta(self):
        gl = GapLaw(beta=1.5)
        assert gl.moment(1.5) == np.inf
        assert gl.moment(2.0) == np.inf

    def test_truncated_mean_monotone(self):
        gl = GapLaw(beta=0.8)
        vals = [gl.truncated_mean(a) for a in (10, 100, 1000)]
        assert vals[0] < vals[1] < vals[2]

    def test_serialization_roundtrip(self):
        gl = GapLaw(beta=0.8, scale=2.0)
        assert GapLaw.from_dict(gl.to_dict()) == gl


class TestDriftLaw:
    def test_probabilities_validated(self):
        with pytest.raises(ValueError):
            DriftLaw(atoms=[(0.5, 0.7), (0.75, 0.7)])
        with pytest.raises(ValueError):
            DriftLaw(atoms=[(1.2, 1.0)])

    def test_e_rho(self, drift_a):
        # rho = 2 w.p. 1/3, 1/3 w.p. 2/3
        assert drift_a.e_rho(1.0) == pytest.approx(2 / 3 + 2 / 9)
        assert drift_a.e_log_rho() < 0

    def test_kesten_alpha_canonical(self, drift_a, drift_b):
        a1 = kesten_alpha(drift_a)
        a2 = kesten_alpha(drift_b)
        assert a1 == pytest.approx(1.3477, abs=2e-3)
        assert a2 == pytest.approx(1.8509, abs=2e-3)
        # defining property E rho^alpha = 1
        assert drift_a.e_rho(a1) == pytest.approx(1.0, abs=1e-9)

    def test_kesten_alpha_none_when_recurrent(self):
        dl = DriftLaw(atoms=[(1 / 3, 0.9), (3 / 4, 0.1)])  # E log rho > 0
        assert kesten_alpha(dl) is None


class TestScaling:
    def test_a_closed_form(self):
        ss = ScalingSequences(GapLaw(beta=0.8))
        assert ss.a(16) == pytest.approx(32.0)

    def test_d_is_inverse_tail(self):
        gl = GapLaw(beta=0.8)
        ss = ScalingSequences(gl)
        assert ss.d(16) == pytest.approx(1.0 / gl.tail_real(16))

    def test_c_inverts_m(self):
        ss = ScalingSequences(GapLaw(beta=1.0))
        n = 10_000
        c = ss.c(n)
        assert ss.m(c) == pytest.approx(n, rel=1e-6)


class TestRegime:
    def test_speed_reduction(self, drift_a, spec15):
        # ballistic only when E xi^2 < inf; sparsity slows the walk
        assert speed_v(spec15) == 0.0
        spec = EnvironmentSpec(gap_law=GapLaw(beta=2.5), drift_law=drift_a)
        v = speed_v(spec)
        assert 0.0 < v < 1.0
        # denser marked sites (no gaps at all) would be slower than gap-free
        dense = EnvironmentSpec(gap_law=GapLaw(beta=3.5), drift_law=drift_a)
        assert 0.0 < speed_v(dense) < 1.0

    def test_validate_regime_canonical(self, spec15, spec08):
        for spec in (spec15, spec08):
            rep = validate_regime(spec)
            assert rep.transient_right
            assert rep.moment_condition_holds
            assert rep.gamma_star is not None
            b = spec.gap_law.beta
            assert b / 4 < rep.gamma_star < min(1.0, b)

    def test_spec_roundtrip(self, spec15):
        d = json.loads(json.dumps(spec15.to_dict()))
        assert EnvironmentSpec.from_dict(d) == spec15


class TestEnvironment:
    def test_from_arrays_anchor(self, spec15):
        env = Environment.from_arrays(
            spec15, k_min=-2, xi=np.array([5, 4, 3, 2, 1]), lam=np.full(5, 0.75))
        assert env.site(0) == 0
        assert env.site(1) == 2
        assert env.site(-1) == -3
        assert env.xi_at(1) == 2

    def test_nu_definition(self, spec15):
        env = Environment.from_arrays(
            spec15, k_min=0, xi=np.array([3, 4, 5]), lam=np.full(3, 0.75))
        # sites at 0, 4, 9
        for n in (1, 4, 8):
            nu = env.nu(n)
            assert env.site(nu - 1) <= n < env.site(nu)

    def test_serialization_roundtrip(self, spec15, tmp_path):
        env = sample_environment(spec15, 50, master_seed=3)
        p = tmp_path / "env.json"
        env.save(p)
        env2 = Environment.load(p)
        assert np.array_equal(env.xi, env2.xi)
        assert np.array_equal(env.S, env2.S)
        assert env.seed_meta == env2.seed_meta

    def test_sampling_deterministic(self, spec15):
        e1 = sample_environment(spec15, 100, master_seed=7, stream=("env", 3))
        e2 = sample_environment(spec15, 100, master_seed=7, stream=("env", 3))
        assert np.array_equal(e1.xi, e2.xi)
        assert np.array_equal(e1.lam, e2.lam)
        e3 = sample_environment(spec15, 100, master_seed=8, stream=("env", 3))
        assert not np.array_equal(e1.xi, e3.xi)

    def test_left_extension_certifies_w_tol(self, spec15):
        env = sample_environment(spec15, 50, master_seed=1, w_tol=1e-8)
        log_prod = float(np.sum(np.log(env.rho[: -env.k_min + 1])))
        assert log_prod < np.log(1e-8)

    def test_rejects_recurrent_spec(self):
        spec = EnvironmentSpec(
            gap_law=GapLaw(beta=1.5),
            drift_law=DriftLaw(atoms=[(1 / 3, 0.9), (3 / 4, 0.1)]))
        with pytest.raises(ValueError):
            sample_environment(spec, 10, master_seed=1)
