import numpy as np
import pytest

from tardos_nns.codegen import (ArcsineTruncated, Discrete, arcsine_cdf, arcsine_inverse,
                                default_cutoff, generate_codebook, nuida_c3,
                                parse_distribution, sample_bias, uniform_half)
from tardos_nns.core import BiasVector, CapacityError, DomainError


def arcsine_law(p):
    # written out independently of the sampler
    return 2.0 / np.pi * np.arcsin(np.sqrt(p))


class TestArcsine:
    def test_median(self):
        assert arcsine_inverse(0.5, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_ks_against_cdf(self):
        p = np.sort(sample_bias(ArcsineTruncated(0.0), 100_000, seed=11).probs)
        n = p.size
        f = arcsine_law(p)
        ks = max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n))
        assert ks < 0.01

    @pytest.mark.parametrize("delta", [0.0, 0.01, 0.2])
    def test_inverse_round_trip(self, delta):
        u = np.linspace(0, 1, 1001)
        p = arcsine_inverse(u, delta)
        lo, hi = arcsine_law(delta), arcsine_law(1 - delta)
        np.testing.assert_allclose(arcsine_cdf(p), lo + u * (hi - lo), atol=1e-9)

    def test_cutoff_respected(self):
        b = sample_bias(ArcsineTruncated(0.05), 20_000, seed=2)
        assert b.probs.min() >= 0.05 and b.probs.max() <= 0.95

    def test_invalid_cutoff(self):
        with pytest.raises(DomainError):
            ArcsineTruncated(0.5)


class TestDiscrete:
    def test_nuida(self):
        d = nuida_c3()
        assert d.support == ((0.211, 0.5), (0.789, 0.5))
        assert float(np.dot(d.points, d.weights)) == pytest.approx(0.5)
        ew = float(np.dot(d.weights, 1 / np.sqrt(d.points * (1 - d.points))))
        assert ew == pytest.approx(2.4505, abs=1e-3)

    def test_nuida_sampling_frequencies(self):
        p = sample_bias(nuida_c3(), 100_000, seed=4).probs
        assert set(np.unique(p)) == {0.211, 0.789}
        assert np.mean(p == 0.211) == pytest.approx(0.5, abs=0.01)

    def test_uniform_half(self):
        assert uniform_half().support == ((0.5, 1.0),)
        b = sample_bias(uniform_half(), 1000, seed=0)
        assert np.all(b.probs == 0.5)
        assert np.sqrt(np.mean(b.weights**2)) == pytest.approx(2.0)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(DomainError):
            Discrete(((0.3, 0.5), (0.7, 0.4)))
        with pytest.raises(DomainError):
            Discrete(((1.0, 1.0),))


class TestCutoff:
    def test_examples(self):
        assert default_cutoff(1, kappa=0.1) == pytest.approx(0.1)
        assert default_cutoff(8, kappa=0.1) == pytest.approx(0.00625)
        assert default_cutoff(5, kappa=0.0) == 0.0

    def test_default_kappa_and_clamp(self):
        assert default_cutoff(2) == pytest.approx(0.5 * 2 ** (-4 / 3))
        assert default_cutoff(1, kappa=10) == 0.49


class TestParse:
    def test_alias(self):
        assert parse_distribution("discrete:0.211:0.5,0.789:0.5") == nuida_c3()
        assert parse_distribution("half") == uniform_half()
        assert parse_distribution("arcsine:0.01") == ArcsineTruncated(0.01)
        assert parse_distribution("arcsine:auto", 4) == ArcsineTruncated(default_cutoff(4))

    def test_unknown(self):
        with pytest.raises(DomainError):
            parse_distribution("gaussian")


class TestSampling:
    def test_deterministic(self):
        a = sample_bias(ArcsineTruncated(0.01), 500, seed=3).probs
        b = sample_bias(ArcsineTruncated(0.01), 500, seed=3).probs
        np.testing.assert_array_equal(a, b)
        c = sample_bias(ArcsineTruncated(0.01), 500, seed=4).probs
        assert not np.array_equal(a, c)


class TestCodebook:
    def test_half_column_means(self):
        bias = BiasVector(np.full(64, 0.5))
        bits = generate_codebook(10_000, bias, seed=1).to_bits()
        np.testing.assert_allclose(bits.mean(axis=0), 0.5, atol=0.02)

    def test_biased_column_mean(self):
        bias = BiasVector(np.array([0.789, 0.211, 0.789]))
        bits = generate_codebook(10_000, bias, seed=2).to_bits()
        assert bits[:, 0].mean() == pytest.approx(0.789, abs=0.02)
        assert bits[:, 1].mean() == pytest.approx(0.211, abs=0.02)

    def test_deterministic_and_prefix_stable(self):
        bias = sample_bias(nuida_c3(), 300, seed=9)
        a = generate_codebook(3000, bias, seed=5)
        b = generate_codebook(3000, bias, seed=5)
        np.testing.assert_array_equal(a.words, b.words)
        # rows come from per-block streams, so a larger n keeps the earlier rows
        c = generate_codebook(5000, bias, seed=5)
        np.testing.assert_array_equal(c.words[:3000], a.words)

    def test_bias_independent_of_n(self):
        # the bias stream is separate from the codebook stream
        b1 = sample_bias(nuida_c3(), 100, seed=1)
        generate_codebook(10, b1, seed=1)
        b2 = sample_bias(nuida_c3(), 100, seed=1)
        np.testing.assert_array_equal(b1.probs, b2.probs)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            generate_codebook(10_000, BiasVector(np.full(6400, 0.5)), seed=0, memory_budget=1000)

    def test_invalid_n(self):
        with pytest.raises(DomainError):
            generate_codebook(0, BiasVector([0.5]), seed=0)
