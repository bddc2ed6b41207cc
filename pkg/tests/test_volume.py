"""Volume, mask, and study containers plus the pointwise primitives."""

import numpy as np
import pytest

from helpers import empty_mask, random_dims, random_mask, random_volume
from lesionforge import (
    EmptyForegroundError,
    InvalidInputError,
    Mask3D,
    NonBinaryMaskError,
    Study,
    Volume3D,
    extract_patch,
    minmax,
    minmax_masked,
    pointwise_mix,
    validate_mask,
)


class TestVolume3D:
    def test_basic_construction(self):
        vol = Volume3D(np.arange(24.0).reshape(2, 3, 4), spacing=(1.0, 2.0, 3.0))
        assert vol.dims == (2, 3, 4)
        assert vol.nvox == 24
        assert vol.spacing == (1.0, 2.0, 3.0)
        assert vol.data.dtype == np.float64
        assert vol.data.flags.f_contiguous

    def test_data_is_snapshot_and_immutable(self):
        src = np.ones((2, 2, 2))
        vol = Volume3D(src)
        src[0, 0, 0] = 99.0
        assert vol.data[0, 0, 0] == 1.0
        with pytest.raises(ValueError):
            vol.data[0, 0, 0] = 5.0

    def test_from_flat_is_x_fastest(self):
        vol = Volume3D.from_flat([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], (3, 2, 1))
        assert vol.data[0, 0, 0] == 1.0
        assert vol.data[2, 0, 0] == 3.0
        assert vol.data[0, 1, 0] == 4.0
        assert list(vol.flat()) == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]

    def test_rejects_nonfinite(self):
        bad = np.ones((2, 2, 2))
        bad[1, 1, 1] = np.nan
        with pytest.raises(InvalidInputError):
            Volume3D(bad)
        bad[1, 1, 1] = np.inf
        with pytest.raises(InvalidInputError):
            Volume3D(bad)

    def test_rejects_bad_shape_and_spacing(self):
        with pytest.raises(InvalidInputError):
            Volume3D(np.ones((2, 2)))
        with pytest.raises(InvalidInputError):
            Volume3D(np.ones((2, 2, 2)), spacing=(1.0, 0.0, 1.0))
        with pytest.raises(InvalidInputError):
            Volume3D(np.ones((2, 2, 2)), spacing=(1.0, -2.0, 1.0))
        with pytest.raises(InvalidInputError):
            Volume3D.from_flat([1.0, 2.0], (3, 1, 1))


class TestMask3D:
    def test_accepts_binary(self):
        m = Mask3D(np.array([[[0, 1], [1, 0]]], dtype=np.uint8))
        assert m.foreground_count == 2
        assert m.dims == (1, 2, 2)

    def test_rejects_non_binary_with_location(self):
        with pytest.raises(NonBinaryMaskError) as exc:
            Mask3D(np.array([0, 2, 0, 0]).reshape(4, 1, 1))
        assert exc.value.index == 1
        assert exc.value.value == 2
        with pytest.raises(NonBinaryMaskError):
            Mask3D(np.array([0.0, 0.5]).reshape(2, 1, 1))

    def test_first_offender_is_x_fastest_order(self):
        data = np.zeros((2, 2, 1))
        data[0, 1, 0] = 7.0  # linear index 2 in x-fastest order
        data[1, 1, 0] = 9.0
        with pytest.raises(NonBinaryMaskError) as exc:
            Mask3D(data)
        assert exc.value.index == 2
        assert exc.value.value == 7


class TestValidateMask:
    def test_valid(self):
        m = validate_mask(Volume3D.from_flat([0.0, 1.0, 1.0, 0.0], (4, 1, 1)))
        assert isinstance(m, Mask3D)
        assert m.foreground_count == 2

    def test_invalid_reports_index_and_value(self):
        with pytest.raises(NonBinaryMaskError) as exc:
            validate_mask(Volume3D.from_flat([0.0, 2.0], (2, 1, 1)))
        assert "index 1" in str(exc.value)
        assert "2" in str(exc.value)

    def test_idempotent(self):
        m1 = validate_mask(Volume3D.from_flat([0.0, 1.0, 1.0, 0.0], (4, 1, 1)))
        m2 = validate_mask(Volume3D(m1.data.astype(np.float64)))
        assert np.array_equal(m1.data, m2.data)


class TestMinmax:
    def test_examples(self):
        assert minmax(Volume3D.from_flat([2.0, 4.0, 6.0], (3, 1, 1))) == (2.0, 6.0)
        assert minmax(Volume3D.from_flat([5.0, 5.0, 5.0], (3, 1, 1))) == (5.0, 5.0)
        assert minmax(Volume3D.from_flat([0.0, 0.25, 1.0], (3, 1, 1))) == (0.0, 1.0)

    def test_masked_example(self):
        vol = Volume3D.from_flat([1.0, 2.0, 3.0, 5.0], (4, 1, 1))
        mask = Mask3D(np.array([0, 1, 1, 1], dtype=np.uint8).reshape(4, 1, 1))
        assert minmax_masked(vol, mask) == (2.0, 5.0)

    def test_masked_all_ones_equals_minmax(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            dims = random_dims(rng)
            vol = random_volume(rng, dims, lo=-3.0, hi=9.0)
            ones = Mask3D(np.ones(dims, dtype=np.uint8))
            assert minmax_masked(vol, ones) == minmax(vol)

    def test_masked_singleton(self):
        vol = Volume3D.from_flat([1.0, 3.0, 9.0], (3, 1, 1))
        mask = Mask3D(np.array([0, 1, 0], dtype=np.uint8).reshape(3, 1, 1))
        assert minmax_masked(vol, mask) == (3.0, 3.0)

    def test_masked_empty_raises(self):
        vol = Volume3D.from_flat([1.0, 2.0], (2, 1, 1))
        with pytest.raises(EmptyForegroundError):
            minmax_masked(vol, empty_mask((2, 1, 1)))

    def test_masked_dim_mismatch(self):
        vol = Volume3D(np.ones((2, 2, 2)))
        with pytest.raises(InvalidInputError):
            minmax_masked(vol, Mask3D(np.ones((2, 2, 3), dtype=np.uint8)))


class TestPointwiseMix:
    def test_example(self):
        a = Volume3D.from_flat([1.0, 2.0], (2, 1, 1))
        b = Volume3D.from_flat([9.0, 9.0], (2, 1, 1))
        mask = Mask3D(np.array([0, 1], dtype=np.uint8).reshape(2, 1, 1))
        assert list(pointwise_mix(a, b, mask).flat()) == [1.0, 9.0]

    def test_all_zero_and_all_one_masks(self):
        rng = np.random.default_rng(6)
        dims = (3, 4, 2)
        a = random_volume(rng, dims)
        b = random_volume(rng, dims)
        zeros = empty_mask(dims)
        ones = Mask3D(np.ones(dims, dtype=np.uint8))
        assert np.array_equal(pointwise_mix(a, b, zeros).data, a.data)
        assert np.array_equal(pointwise_mix(a, b, ones).data, b.data)

    def test_mix_of_volume_with_itself_is_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            dims = random_dims(rng)
            a = random_volume(rng, dims)
            m = random_mask(rng, dims, nonempty=False)
            assert np.array_equal(pointwise_mix(a, a, m).data, a.data)

    def test_dim_mismatch(self):
        a = Volume3D(np.ones((2, 2, 2)))
        b = Volume3D(np.ones((2, 2, 3)))
        with pytest.raises(InvalidInputError):
            pointwise_mix(a, b, Mask3D(np.ones((2, 2, 2), dtype=np.uint8)))


class TestStudy:
    def test_construction_and_accessors(self):
        rng = np.random.default_rng(8)
        dims = (4, 3, 2)
        study = Study(
            {"b0": random_volume(rng, dims), "flair": random_volume(rng, dims)},
            random_mask(rng, dims),
        )
        assert study.dims == dims
        assert study.channel_names == ("b0", "flair")
        assert study.mask is not None

    def test_requires_consistent_dims(self):
        rng = np.random.default_rng(9)
        with pytest.raises(InvalidInputError):
            Study({"a": random_volume(rng, (2, 2, 2)), "b": random_volume(rng, (2, 2, 3))})
        with pytest.raises(InvalidInputError):
            Study({"a": random_volume(rng, (2, 2, 2))}, Mask3D(np.ones((2, 2, 3), dtype=np.uint8)))

    def test_requires_consistent_spacing(self):
        rng = np.random.default_rng(10)
        with pytest.raises(InvalidInputError):
            Study(
                {
                    "a": random_volume(rng, (2, 2, 2), spacing=(1.0, 1.0, 1.0)),
                    "b": random_volume(rng, (2, 2, 2), spacing=(1.0, 1.0, 2.0)),
                }
            )

    def test_requires_at_least_one_channel(self):
        with pytest.raises(InvalidInputError):
            Study({})

    def test_with_channels_keeps_mask(self):
        rng = np.random.default_rng(11)
        dims = (3, 3, 3)
        study = Study({"a": random_volume(rng, dims)}, random_mask(rng, dims))
        swapped = study.with_channels({"a": random_volume(rng, dims)})
        assert swapped.mask is study.mask


class TestExtractPatch:
    def test_basic_crop(self):
        rng = np.random.default_rng(12)
        dims = (8, 8, 8)
        study = Study({"a": random_volume(rng, dims)}, random_mask(rng, dims))
        patch = extract_patch(study, (2, 3, 4), (4, 2, 3))
        assert patch.dims == (4, 2, 3)
        assert np.array_equal(
            patch.channels["a"].data, study.channels["a"].data[2:6, 3:5, 4:7]
        )
        assert np.array_equal(patch.mask.data, study.mask.data[2:6, 3:5, 4:7])

    def test_identity_crop(self):
        rng = np.random.default_rng(13)
        dims = (5, 6, 7)
        study = Study({"a": random_volume(rng, dims)})
        patch = extract_patch(study, (0, 0, 0), dims)
        assert np.array_equal(patch.channels["a"].data, study.channels["a"].data)

    def test_out_of_bounds(self):
        rng = np.random.default_rng(14)
        study = Study({"a": random_volume(rng, (6, 6, 6))})
        with pytest.raises(InvalidInputError):
            extract_patch(study, (4, 0, 0), (4, 4, 4))
        with pytest.raises(InvalidInputError):
            extract_patch(study, (-1, 0, 0), (2, 2, 2))

    def test_reembedding_recovers_original_voxels(self):
        rng = np.random.default_rng(15)
        dims = (7, 6, 5)
        study = Study({"a": random_volume(rng, dims)})
        origin, size = (1, 2, 0), (4, 3, 5)
        patch = extract_patch(study, origin, size)
        rebuilt = np.array(study.channels["a"].data, copy=True)
        sl = tuple(slice(o, o + s) for o, s in zip(origin, size))
        rebuilt[sl] = patch.channels["a"].data
        assert np.array_equal(rebuilt, study.channels["a"].data)

    def test_spacing_preserved(self):
        rng = np.random.default_rng(16)
        study = Study({"a": random_volume(rng, (6, 6, 6), spacing=(0.9, 1.1, 2.5))})
        patch = extract_patch(study, (1, 1, 1), (2, 2, 2))
        assert patch.spacing == (0.9, 1.1, 2.5)
