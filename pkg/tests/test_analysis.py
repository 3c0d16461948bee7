import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afdeconv import analysis as an
from afdeconv import estimator as es
from afdeconv import model as md
from afdeconv import wavelets as wv

WSPEC = wv.WaveletSpec()
UNIFORM = md.DesignDensity(beta=0.0, x0=0.5)


class TestBesovParams:

    def test_derived_indices(self):
        bp = an.BesovParams(s1=1.0, s2=2.0, p=1.0)
        assert bp.p_prime == 1.0
        assert bp.s1_star == pytest.approx(0.5)
        assert bp.s1_prime == pytest.approx(0.5)
        assert bp.s_dprime(0.0) == pytest.approx(0.5)
        assert bp.s_dprime(0.5) == pytest.approx(1.0)

    def test_p_at_least_two_makes_prime_equal_plain(self):
        bp = an.BesovParams(s1=1.3, s2=0.9, p=3.0)
        assert bp.s1_prime == pytest.approx(bp.s1)
        assert bp.s2_prime == pytest.approx(bp.s2)

    def test_hypothesis_violation_rejected(self):
        with pytest.raises(md.ParameterError):
            an.BesovParams(s1=0.3, s2=1.0, p=2.0)
        with pytest.raises(md.ParameterError):
            an.BesovParams(s1=0.8, s2=0.8, p=1.0)  # 1/p = 1 > s


class TestMise:

    def test_identical_surfaces(self):
        g = np.random.default_rng(0).standard_normal((64, 64))
        assert an.mise(g, g) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset(self):
        g = np.zeros((64, 64))
        assert an.mise(g + 0.1, g) == pytest.approx(0.01, abs=1e-6)

    def test_parseval_oracle(self):
        """Perturbing coefficients by delta changes MISE by sum delta^2."""
        f = md.tensor_sinusoid(2.0, 2.0, max_freq=64)
        ker = md.identity_kernel()
        silent = md.NoiseSpec(alpha=1.0, sigma=0.0)
        obs = md.simulate_observations(f, ker, UNIFORM, UNIFORM, silent,
                                       N=128, M=128, seed=1)
        cfg = es.EstimatorConfig.from_specs(ker, UNIFORM, UNIFORM, silent,
                                            J1=5, J2=5)
        field = es.estimate_field(obs, UNIFORM, UNIFORM, ker, WSPEC, cfg)
        base = es.reconstruct(field, WSPEC, grid=512, which="all")
        rng = np.random.default_rng(7)
        total = 0.0
        for blk in field.blocks.values():
            delta = 0.01 * rng.standard_normal(blk.beta_hat.shape)
            blk.beta_hat = blk.beta_hat + delta
            total += np.sum(delta ** 2)
        pert = es.reconstruct(field, WSPEC, grid=512, which="all")
        assert an.mise(pert, base.values) == pytest.approx(total, abs=1e-6)

    def test_dimension_error(self):
        with pytest.raises(md.ParameterError):
            an.mise(np.zeros((8, 8)), np.zeros((16, 16)))


class TestTheoreticalExponent:

    def test_worked_examples(self):
        r1 = an.theoretical_exponent(an.BesovParams(s1=4, s2=1, p=2), 1, 0, 0)
        assert (r1.regime, r1.d) == (1, pytest.approx(2 / 3))
        r2 = an.theoretical_exponent(an.BesovParams(s1=1, s2=1, p=2), 1, 0, 0)
        assert (r2.regime, r2.d) == (2, pytest.approx(0.4))
        r3 = an.theoretical_exponent(an.BesovParams(s1=1, s2=2, p=1), 1, 0, 0)
        assert (r3.regime, r3.d) == (3, pytest.approx(1 / 3))

    def test_xi_indicators(self):
        # s1 = s2 (2 nu + 1) boundary with p >= 2 sets xi1 = 1
        r = an.theoretical_exponent(an.BesovParams(s1=3, s2=1, p=2), 1, 0, 0)
        assert r.xi1 == 1

    def test_beta2_zero_limit_flagged(self):
        r = an.theoretical_exponent(an.BesovParams(s1=1, s2=1, p=2), 1, 0, 0)
        assert any("beta2 = 0" in note for note in r.notes)

    @given(s1=st.floats(0.6, 4.0), s2=st.floats(0.6, 4.0),
           nu=st.sampled_from([0.5, 1.0, 2.0]),
           beta=st.sampled_from([0.0, 0.3, 0.6]))
    @settings(max_examples=120, deadline=None)
    def test_min_formula_agreement_p2(self, s1, s2, nu, beta):
        """For p >= 2 the regime exponent equals the closed-form minimum."""
        r = an.theoretical_exponent(an.BesovParams(s1=s1, s2=s2, p=2.0),
                                    nu, beta, beta)
        assert r.agrees
        assert 0 < r.d < 1

    def test_exponent_in_unit_interval(self):
        for s1, s2, p in [(0.6, 4, 2), (4, 0.6, 2), (1.1, 1.1, 1.2)]:
            r = an.theoretical_exponent(an.BesovParams(s1=s1, s2=s2, p=p),
                                        1.0, 0.3, 0.3)
            assert 0 < r.d < 1


class TestFitRate:

    def test_exact_power_law(self):
        n = [100, 200, 400, 800]
        slope, se = an.fit_rate([(x, x ** -0.5) for x in n])
        assert slope == pytest.approx(-0.5, abs=1e-10)
        assert se == pytest.approx(0.0, abs=1e-10)

    def test_duplicate_n_rejected(self):
        with pytest.raises(md.ParameterError):
            an.fit_rate([(100, 1.0), (100, 0.9), (200, 0.8)])

    def test_too_few_points(self):
        with pytest.raises(md.ParameterError):
            an.fit_rate([(100, 1.0), (200, 0.5)])

    def test_noisy_power_law(self):
        rng = np.random.default_rng(42)
        n = np.logspace(2, 5, 12)
        v = 3.0 * n ** -0.7 * np.exp(0.02 * rng.standard_normal(12))
        slope, se = an.fit_rate(zip(n, v))
        assert slope == pytest.approx(-0.7, abs=0.05)


class TestLemmaSuites:

    def test_lemma1_constant_ratio_identity_kernel(self):
        """g = 1 and uniform design: the U^2 ratio is constant in k."""
        rep = an.verify_lemma1(md.identity_kernel(), WSPEC, UNIFORM, UNIFORM,
                               levels1=[4], grid=4096)
        r2 = [e["ratio2"] for e in rep.entries]
        assert max(r2) / min(r2) == pytest.approx(1.0, abs=1e-8)

    def test_lemma1_uniform_spread(self):
        rep = an.verify_lemma1(md.power_kernel(1.0), WSPEC, UNIFORM, UNIFORM,
                               levels1=[3, 4, 5, 6])
        assert rep.spread2 <= 4.0

    def test_lemma2_gaussian_kurtosis(self):
        noise = md.NoiseSpec(alpha=0.8, sigma=1.0)
        rep = an.verify_lemma2(es.Index(3, 2, 2, 1), md.power_kernel(1.0),
                               WSPEC, UNIFORM, UNIFORM, noise, M=64,
                               N_ladder=[64, 128, 256], replicates=2000,
                               seed=1)
        assert rep.kurtosis == pytest.approx(3.0, abs=0.3)

    def test_lemma3_threshold_doubling_non_increasing(self):
        f = md.tensor_sinusoid(2.0, 2.0, max_freq=128)
        ker = md.power_kernel(1.0)
        noise = md.NoiseSpec(alpha=0.8, sigma=1.0)
        idx = [es.Index(3, 2, 2, 1)]
        freqs = []
        for gamma in (0.5, 1.0):
            cfg = es.EstimatorConfig.from_specs(ker, UNIFORM, UNIFORM, noise,
                                                gamma=gamma)
            rep = an.verify_lemma3(f, ker, WSPEC, UNIFORM, UNIFORM, noise,
                                   cfg, idx, M=64, N=64, replicates=400,
                                   seed=3)
            freqs.append(rep.max_frequency)
        assert freqs[1] <= freqs[0]


class TestRateExperiment:

    def test_sigma_zero_flat_and_deterministic(self):
        f = md.tensor_sinusoid(2.0, 2.0, max_freq=256)
        ker = md.identity_kernel()
        silent = md.NoiseSpec(alpha=1.0, sigma=0.0)
        cfg = es.EstimatorConfig.from_specs(ker, UNIFORM, UNIFORM, silent)
        rep = an.rate_experiment(f, ker, UNIFORM, UNIFORM, silent, WSPEC, cfg,
                                 [(64, 64), (128, 128), (256, 256)],
                                 replicates=2, seed=0, grid=256)
        for p in rep.points:
            assert p["mise_se"] == pytest.approx(0.0, abs=1e-15)

    def test_threaded_equals_serial(self):
        f = md.tensor_sinusoid(1.5, 1.5, max_freq=256)
        ker = md.power_kernel(1.0)
        noise = md.NoiseSpec(alpha=1.0, sigma=0.2)
        cfg = es.EstimatorConfig.from_specs(ker, UNIFORM, UNIFORM, noise)
        kw = dict(ladder=[(64, 64), (128, 128), (256, 256)], replicates=2,
                  seed=5, grid=256)
        serial = an.rate_experiment(f, ker, UNIFORM, UNIFORM, noise, WSPEC,
                                    cfg, threads=1, **kw)
        threaded = an.rate_experiment(f, ker, UNIFORM, UNIFORM, noise, WSPEC,
                                      cfg, threads=3, **kw)
        assert [p["mise_mean"] for p in serial.points] == \
               [p["mise_mean"] for p in threaded.points]

    def test_empty_ladder_rejected(self):
        f = md.tensor_sinusoid(1.0, 1.0, max_freq=64)
        ker = md.identity_kernel()
        silent = md.NoiseSpec(alpha=1.0, sigma=0.0)
        cfg = es.EstimatorConfig.from_specs(ker, UNIFORM, UNIFORM, silent)
        with pytest.raises(md.ParameterError):
            an.rate_experiment(f, ker, UNIFORM, UNIFORM, silent, WSPEC, cfg,
                               ladder=[])
