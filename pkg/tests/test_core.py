from __future__ import annotations

import numpy as np
import pytest

from convlab.core.models import AlgoConfig, Algorithm, ConvShape, ceil_div, output_shape
from convlab.core.tensor import (
    Layout,
    Tensor,
    check_operands,
    convert_layout,
    feature_map,
    filter_bank,
    filter_dims,
)
from convlab.errors import ConfigError, LayoutError, ShapeError


@pytest.mark.parametrize(
    ("shape", "expected"),
    [
        (ConvShape(1, 1, 14, 14), (14, 14)),
        (ConvShape(1, 1, 3, 3, pad=0), (1, 1)),
        (ConvShape(1, 1, 7, 7, pad=1, stride=2), (4, 4)),
    ],
)
def test_output_dims(shape, expected):
    assert output_shape(shape) == expected


def test_output_shape_is_monotone():
    by_filter = [output_shape(ConvShape(1, 1, 9, 9, filter_h=r, filter_w=r)) for r in (1, 3, 5)]
    by_pad = [output_shape(ConvShape(1, 1, 9, 9, pad=p)) for p in (0, 1, 2)]
    assert by_filter == sorted(by_filter, reverse=True)
    assert by_pad == sorted(by_pad)
    assert output_shape(ConvShape(1, 1, 9, 9, pad=0, stride=2)) < output_shape(ConvShape(1, 1, 9, 9, pad=0))


def test_stride_must_divide_exactly():
    with pytest.raises(ShapeError):
        ConvShape(1, 1, 8, 8, pad=1, stride=2)


def test_rejects_non_positive_dims():
    with pytest.raises(ShapeError):
        ConvShape(0, 1, 4, 4)
    with pytest.raises(ShapeError):
        ConvShape(1, 1, 4, 4, pad=-1)


def test_conv4_sizes():
    shape = ConvShape(256, 256, 14, 14)
    assert shape.input_bytes == 200_704
    assert shape.filter_bytes == 2_359_296
    assert shape.mac_count == 115_605_504


def test_ceil_div():
    assert ceil_div(14, 4) == 4
    assert ceil_div(16, 4) == 4


def test_single_element_layout_conversion():
    t = filter_bank(np.array([[[[3.0]]]]))
    out = convert_layout(t, Layout.CRSK)
    assert out.dims == (1, 1, 1, 1)
    assert out.data[0, 0, 0, 0] == 3.0


def test_kcrs_to_crsk_two_filters():
    t = filter_bank(np.array([1.0, 2.0]).reshape(2, 1, 1, 1))
    out = convert_layout(t, Layout.CRSK)
    assert out.dims == (1, 1, 1, 2)
    assert out.flat().tolist() == [1.0, 2.0]


def test_crsk_index_formula(rng):
    k_, c_, r_, s_ = 4, 3, 3, 3
    t = filter_bank(rng.standard_normal((k_, c_, r_, s_)))
    flat = convert_layout(t, Layout.CRSK).flat()
    for _ in range(20):
        k, c, r, s = (int(rng.integers(n)) for n in (k_, c_, r_, s_))
        assert flat[((c * r_ + r) * s_ + s) * k_ + k] == t.data[k, c, r, s]


def test_layout_round_trip(rng):
    t = filter_bank(rng.standard_normal((5, 2, 3, 3)))
    back = convert_layout(convert_layout(t, Layout.CRSK), Layout.KCRS)
    assert back.equals(t)
    assert filter_dims(convert_layout(t, Layout.CRSK)) == (5, 2, 3, 3)


def test_incompatible_layouts():
    with pytest.raises(LayoutError):
        convert_layout(feature_map(np.zeros((1, 2, 2))), Layout.CRSK)
    with pytest.raises(LayoutError):
        Tensor(Layout.CHW, np.zeros((2, 2)))


def test_check_operands_rejects_wrong_layout_and_dims(operands, small_shape):
    inp, filters = operands
    check_operands(inp, filters, small_shape)
    with pytest.raises(LayoutError):
        check_operands(inp, convert_layout(filters, Layout.CRSK), small_shape)
    with pytest.raises(ShapeError):
        check_operands(inp, filters, small_shape.with_channels(2))


def test_tensor_data_is_read_only():
    t = feature_map(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        t.data[0, 0, 0] = 1.0


def test_direct_config_variant_follows_cache_flag():
    assert AlgoConfig(Algorithm.DIRECT_NOCACHE, cache_filter=True).algorithm is Algorithm.DIRECT_CACHE
    assert AlgoConfig(Algorithm.DIRECT_CACHE).cache_filter is True
    assert AlgoConfig(Algorithm.DIRECT_NOCACHE).cache_filter is False


def test_config_validation():
    shape = ConvShape(8, 16, 14, 14)
    with pytest.raises(ConfigError):
        AlgoConfig(Algorithm.DIRECT_CACHE, tile_x=16, tile_y=32).validate(shape)
    with pytest.raises(ConfigError):
        AlgoConfig(Algorithm.DIRECT_CACHE, out_channels_per_thread=3).validate(shape)
    with pytest.raises(ConfigError):
        AlgoConfig(Algorithm.ILPM, workgroup_channels=32).validate(shape)
    with pytest.raises(ConfigError):
        AlgoConfig(Algorithm.WINOGRAD).validate(ConvShape(8, 8, 14, 14, filter_h=5, filter_w=5, pad=2))
    AlgoConfig(Algorithm.ILPM, workgroup_channels=16).validate(shape)


def test_label_and_sort_key_use_relevant_fields():
    cfg = AlgoConfig(Algorithm.ILPM, tile_x=14, tile_y=14, workgroup_channels=32, transpose_output=True)
    assert cfg.label() == "ilpm tile_x=14 tile_y=14 workgroup_channels=32 transpose_output=1"
    assert cfg.sort_key() == ("ilpm", 14, 14, 32, 1)
