"""Gamma transforms and the gamma-parameter samplers."""

import numpy as np
import pytest

from helpers import empty_mask, random_dims, random_mask, random_volume
from reference import ref_gamma_global, ref_gamma_local
from lesionforge import (
    DEFAULT_GAMMA_SPEC,
    GAMMA_COMPRESSION,
    GAMMA_EXPANSION,
    GAMMA_IDENTITY,
    BetaIntervalSpec,
    EmptyForegroundError,
    InvalidParameterError,
    LogNormalSpec,
    Mask3D,
    MixtureUniformSpec,
    Volume3D,
    classify_gamma,
    gamma_foreground_normalized,
    gamma_global,
    gamma_local,
    make_sampler,
    make_stream,
    minmax,
    minmax_masked,
    sample_gamma,
    spec_from_dict,
    spec_to_dict,
)


def vol1d(values):
    return Volume3D.from_flat([float(v) for v in values], (len(values), 1, 1))


def mask1d(values):
    return Mask3D(np.array(values, dtype=np.uint8).reshape(len(values), 1, 1))


class TestGammaGlobal:
    def test_hand_example_unit_range(self):
        out = gamma_global(vol1d([0.0, 0.25, 1.0]), 2.0)
        assert np.allclose(out.flat(), [0.0, 0.0625, 1.0], rtol=0, atol=1e-15)

    def test_hand_example_general_range(self):
        out = gamma_global(vol1d([2.0, 4.0, 6.0]), 0.5)
        expected = [2.0, 4.0 * np.sqrt(0.5) + 2.0, 6.0]  # 4.8284271...
        assert np.allclose(out.flat(), expected, rtol=0, atol=1e-12)
        assert abs(out.flat()[1] - 4.82842712474619) < 1e-12

    def test_identity_returns_same_object(self):
        v = vol1d([1.0, 2.0, 3.0])
        assert gamma_global(v, 1.0) is v

    def test_constant_volume_unchanged(self):
        v = vol1d([5.0, 5.0, 5.0])
        out = gamma_global(v, 2.0)
        assert np.array_equal(out.data, v.data)

    def test_rejects_nonpositive_gamma(self):
        v = vol1d([1.0, 2.0])
        for g in (0.0, -1.0, np.nan, np.inf):
            with pytest.raises(InvalidParameterError):
                gamma_global(v, g)

    def test_preserves_extrema(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            v = random_volume(rng, random_dims(rng), lo=-5.0, hi=11.0)
            g = float(rng.uniform(0.3, 3.0))
            out = gamma_global(v, g)
            m1, m2 = minmax(v)
            o1, o2 = minmax(out)
            assert abs(o1 - m1) <= 1e-9 * max(1.0, abs(m1))
            assert abs(o2 - m2) <= 1e-9 * max(1.0, abs(m2))

    def test_range_containment(self):
        rng = np.random.default_rng(22)
        for _ in range(30):
            v = random_volume(rng, random_dims(rng), lo=-2.0, hi=7.0)
            g = float(rng.uniform(0.3, 3.0))
            out = gamma_global(v, g)
            m1, m2 = minmax(v)
            assert out.data.min() >= m1
            assert out.data.max() <= m2

    def test_monotone_ordering(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            v = random_volume(rng, (4, 4, 4), lo=0.0, hi=10.0)
            g = float(rng.uniform(0.3, 3.0))
            order_in = np.argsort(v.flat(), kind="stable")
            order_out = np.argsort(gamma_global(v, g).flat(), kind="stable")
            assert np.array_equal(order_in, order_out)

    def test_matches_reference(self):
        rng = np.random.default_rng(24)
        for _ in range(50):
            dims = random_dims(rng, 2, 5)
            v = random_volume(rng, dims, lo=-1.0, hi=3.0)
            g = float(rng.uniform(0.3, 3.0))
            expected = ref_gamma_global(v.flat(), g)
            assert np.allclose(gamma_global(v, g).flat(), expected, rtol=0, atol=1e-12)


class TestGammaForegroundNormalized:
    def test_hand_example(self):
        out = gamma_foreground_normalized(
            vol1d([1.0, 2.0, 3.0, 5.0]), mask1d([0, 1, 1, 1]), 2.0
        )
        # foreground extrema (2, 5): 3 * ((3-2)/3)^2 + 2 = 2.3333...
        assert out.flat()[0] == 1.0
        assert out.flat()[1] == 2.0
        assert abs(out.flat()[2] - (2.0 + 1.0 / 3.0)) < 1e-12
        assert out.flat()[3] == 5.0

    def test_identity_gamma_returns_same_object(self):
        v = vol1d([1.0, 2.0, 3.0])
        m = mask1d([0, 1, 1])
        assert gamma_foreground_normalized(v, m, 1.0) is v

    def test_empty_foreground_raises_even_for_identity(self):
        v = vol1d([1.0, 2.0])
        with pytest.raises(EmptyForegroundError):
            gamma_foreground_normalized(v, mask1d([0, 0]), 1.0)

    def test_all_ones_mask_equals_global_exactly(self):
        rng = np.random.default_rng(25)
        for _ in range(20):
            dims = random_dims(rng)
            v = random_volume(rng, dims, lo=0.0, hi=4.0)
            ones = Mask3D(np.ones(dims, dtype=np.uint8))
            g = float(rng.uniform(0.4, 2.5))
            assert np.array_equal(
                gamma_foreground_normalized(v, ones, g).data, gamma_global(v, g).data
            )

    def test_background_bit_identical(self):
        rng = np.random.default_rng(26)
        for _ in range(20):
            dims = random_dims(rng, 3, 7)
            v = random_volume(rng, dims, lo=-1.0, hi=6.0)
            m = random_mask(rng, dims)
            out = gamma_foreground_normalized(v, m, 1.7)
            bg = m.data == 0
            assert np.array_equal(out.data[bg], v.data[bg])

    def test_degenerate_foreground_range_unchanged(self):
        v = vol1d([0.0, 3.0, 3.0, 9.0])
        m = mask1d([0, 1, 1, 0])
        out = gamma_foreground_normalized(v, m, 2.0)
        assert np.array_equal(out.data, v.data)


class TestGammaLocal:
    def test_hand_example(self):
        out = gamma_local(vol1d([1.0, 2.0, 3.0, 5.0]), mask1d([0, 1, 1, 1]), 2.0)
        assert out.flat()[0] == 1.0
        assert abs(out.flat()[2] - (2.0 + 1.0 / 3.0)) < 1e-12

    def test_identity(self):
        v = vol1d([3.0, 1.0, 4.0])
        assert gamma_local(v, mask1d([0, 1, 1]), 1.0) is v

    def test_empty_mask_treated_as_global(self):
        rng = np.random.default_rng(27)
        for _ in range(10):
            dims = random_dims(rng)
            v = random_volume(rng, dims, lo=0.5, hi=2.5)
            g = float(rng.uniform(0.4, 2.5))
            out = gamma_local(v, empty_mask(dims), g)
            assert np.array_equal(out.data, gamma_global(v, g).data)

    def test_empty_mask_error_policy(self):
        v = vol1d([1.0, 2.0])
        with pytest.raises(EmptyForegroundError):
            gamma_local(v, mask1d([0, 0]), 0.8, empty_mask="error")

    def test_empty_mask_policy_name_checked(self):
        v = vol1d([1.0, 2.0])
        with pytest.raises(InvalidParameterError):
            gamma_local(v, mask1d([0, 1]), 0.8, empty_mask="nonsense")

    def test_dim_mismatch(self):
        from lesionforge import InvalidInputError

        with pytest.raises(InvalidInputError):
            gamma_local(vol1d([1.0, 2.0]), mask1d([0, 1, 1]), 0.8)

    def test_matches_reference(self):
        rng = np.random.default_rng(28)
        for _ in range(50):
            dims = random_dims(rng, 2, 5)
            v = random_volume(rng, dims, lo=-1.0, hi=3.0)
            m = random_mask(rng, dims, nonempty=False)
            g = float(rng.uniform(0.3, 3.0))
            expected = np.array(ref_gamma_local(v.flat(), m.flat(), g)).reshape(
                dims, order="F"
            )
            assert np.allclose(gamma_local(v, m, g).data, expected, rtol=0, atol=1e-12)

    def test_direction_on_interior_foreground(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            dims = random_dims(rng, 4, 7)
            v = random_volume(rng, dims, lo=0.0, hi=1.0)
            m = random_mask(rng, dims, p=0.5)
            m1, m2 = minmax_masked(v, m)
            interior = (m.data == 1) & (v.data > m1) & (v.data < m2)
            if not interior.any():
                continue
            up = gamma_local(v, m, 0.7)
            down = gamma_local(v, m, 1.5)
            assert np.all(up.data[interior] > v.data[interior])
            assert np.all(down.data[interior] < v.data[interior])

    def test_composition_with_fixed_mask(self):
        rng = np.random.default_rng(30)
        for _ in range(20):
            dims = random_dims(rng, 3, 6)
            v = random_volume(rng, dims, lo=1.0, hi=3.0)
            m = random_mask(rng, dims)
            g1, g2 = float(rng.uniform(0.5, 1.6)), float(rng.uniform(0.5, 1.6))
            two_step = gamma_local(gamma_local(v, m, g1), m, g2)
            one_step = gamma_local(v, m, g1 * g2)
            assert np.allclose(two_step.data, one_step.data, rtol=1e-9, atol=0)


class TestClassifyGamma:
    def test_classes(self):
        assert classify_gamma(0.7) == GAMMA_COMPRESSION
        assert classify_gamma(1.0) == GAMMA_IDENTITY
        assert classify_gamma(1.5) == GAMMA_EXPANSION

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidParameterError):
            classify_gamma(0.0)
        with pytest.raises(InvalidParameterError):
            classify_gamma(-0.5)


class TestMixtureUniformSpec:
    def test_draw_consumes_exactly_two_draws(self):
        spec = MixtureUniformSpec()
        for seed in range(40):
            stream = make_stream(seed)
            got = spec.draw(stream)
            ref_stream = make_stream(seed)
            u_choice = ref_stream.random()
            u_value = ref_stream.random()
            lo, hi = (0.7, 1.0) if u_choice < 0.5 else (1.0, 1.5)
            assert got == lo + u_value * (hi - lo)
            # streams are now aligned: next draws agree
            assert stream.random() == ref_stream.random()

    def test_support(self):
        assert MixtureUniformSpec().support() == (0.7, 1.5)

    def test_degenerate_mixture_p1(self):
        spec = MixtureUniformSpec(p=1.0)
        sampler = make_sampler(spec, 3)
        draws = sampler.sample_many(500)
        assert np.all((draws >= 0.7) & (draws < 1.0))

    def test_validation_names_field(self):
        with pytest.raises(InvalidParameterError, match="lo1"):
            make_sampler(MixtureUniformSpec(lo1=1.0, hi1=0.9), 0)
        with pytest.raises(InvalidParameterError, match="p"):
            make_sampler(MixtureUniformSpec(p=1.5), 0)
        with pytest.raises(InvalidParameterError, match="lo1"):
            make_sampler(MixtureUniformSpec(lo1=-0.1, hi1=0.5), 0)


class TestOtherSpecs:
    def test_log_normal_formula(self):
        spec = LogNormalSpec(mu=0.1, sigma=0.3)
        stream = make_stream(77)
        got = spec.draw(stream)
        z = make_stream(77).standard_normal()
        assert got == float(np.exp(0.1 + 0.3 * z))

    def test_log_normal_positive(self):
        draws = make_sampler(LogNormalSpec(mu=0.0, sigma=0.1), 5).sample_many(500)
        assert np.all(draws > 0)

    def test_log_normal_validation(self):
        with pytest.raises(InvalidParameterError, match="sigma"):
            make_sampler(LogNormalSpec(sigma=0.0), 0)

    def test_beta_interval_support_and_formula(self):
        spec = BetaIntervalSpec(alpha=2.0, beta=3.0, lo=0.8, hi=1.2)
        draws = make_sampler(spec, 9).sample_many(500)
        assert np.all((draws >= 0.8) & (draws <= 1.2))
        got = spec.draw(make_stream(4))
        b = make_stream(4).beta(2.0, 3.0)
        assert got == 0.8 + 0.4 * float(b)

    def test_beta_validation(self):
        with pytest.raises(InvalidParameterError, match="alpha"):
            make_sampler(BetaIntervalSpec(alpha=0.0), 0)
        with pytest.raises(InvalidParameterError, match="lo"):
            make_sampler(BetaIntervalSpec(lo=1.5, hi=1.2), 0)


class TestSpecSerialization:
    def test_round_trip_all_variants(self):
        for spec in (
            MixtureUniformSpec(),
            MixtureUniformSpec(0.6, 0.9, 1.1, 1.4, 0.3),
            LogNormalSpec(0.05, 0.2),
            BetaIntervalSpec(1.5, 2.5, 0.75, 1.25),
        ):
            doc = spec_to_dict(spec)
            assert spec_from_dict(doc) == spec

    def test_missing_variant_defaults_to_mixture(self):
        assert spec_from_dict({}) == MixtureUniformSpec()

    def test_unknown_variant(self):
        with pytest.raises(InvalidParameterError, match="variant"):
            spec_from_dict({"variant": "cauchy"})

    def test_unknown_field(self):
        with pytest.raises(InvalidParameterError):
            spec_from_dict({"variant": "log-normal", "mu": 0.0, "sd": 1.0})

    def test_invalid_values_rejected(self):
        with pytest.raises(InvalidParameterError):
            spec_from_dict({"variant": "mixture-uniform", "p": 2.0})


class TestGammaSampler:
    def test_determinism(self):
        a = make_sampler(DEFAULT_GAMMA_SPEC, 123).sample_many(50)
        b = make_sampler(DEFAULT_GAMMA_SPEC, 123).sample_many(50)
        assert np.array_equal(a, b)

    def test_default_support(self):
        draws = make_sampler(DEFAULT_GAMMA_SPEC, 1).sample_many(2000)
        assert np.all((draws >= 0.7) & (draws <= 1.5))

    def test_sample_gamma_advances_stream(self):
        sampler = make_sampler(DEFAULT_GAMMA_SPEC, 55)
        first = sample_gamma(sampler)
        second = sample_gamma(sampler)
        assert first != second
        fresh = make_sampler(DEFAULT_GAMMA_SPEC, 55)
        assert sample_gamma(fresh) == first

    def test_rejects_non_spec(self):
        with pytest.raises(InvalidParameterError):
            make_sampler({"variant": "mixture-uniform"}, 0)

    def test_coarse_statistics(self):
        # tight bounds live in the acceptance suite; this is a tripwire
        draws = make_sampler(DEFAULT_GAMMA_SPEC, 2024).sample_many(20000)
        assert abs(float(draws.mean()) - 1.05) < 0.01
        assert abs(float((draws < 1.0).mean()) - 0.5) < 0.02
