"""
行動コーデックのテスト
"""

import numpy as np
import pytest

from models.network_models import RadioConfig
from services.agents.codec import (
    continuous_codec,
    decode_action,
    discrete_codec,
    encode_action,
    level_spacing_db,
)
from utils.errors import CodecError


@pytest.fixture
def codec():
    return discrete_codec(RadioConfig(), 10)


def test_level_set_spans_min_to_max(codec):
    levels = codec.levels
    assert len(levels) == 10
    assert levels[0] == 0.0
    levels_dbm = 10.0 * np.log10(levels[1:])
    assert levels_dbm[0] == pytest.approx(5.0)
    assert levels_dbm[-1] == pytest.approx(38.0)
    np.testing.assert_allclose(np.diff(levels_dbm), 33.0 / 8.0)
    assert level_spacing_db(codec) == pytest.approx(33.0 / 8.0)


def test_decode_and_encode_levels(codec):
    assert decode_action(codec, 0) == 0.0
    assert decode_action(codec, 9) == pytest.approx(RadioConfig().p_max_mw)
    indices = np.arange(10)
    np.testing.assert_array_equal(encode_action(codec, decode_action(codec, indices)), indices)


def test_encode_picks_nearest_level_in_db(codec):
    level = codec.levels[4]
    assert encode_action(codec, level * 1.1) == 4


def test_decode_rejects_out_of_range(codec):
    with pytest.raises(CodecError):
        decode_action(codec, 10)
    with pytest.raises(CodecError):
        decode_action(codec, 1.5)


def test_encode_rejects_power_above_max(codec):
    with pytest.raises(CodecError):
        encode_action(codec, RadioConfig().p_max_mw * 1.01)


def test_too_few_levels():
    with pytest.raises(CodecError):
        discrete_codec(RadioConfig(), 2)


def test_continuous_codec_is_scaled_sigmoid():
    codec = continuous_codec(RadioConfig())
    p_max = RadioConfig().p_max_mw
    assert decode_action(codec, 0.0) == pytest.approx(p_max / 2)
    assert encode_action(codec, p_max / 4) == pytest.approx(np.log(1 / 3))
    with pytest.raises(CodecError):
        encode_action(codec, 0.0)
    with pytest.raises(CodecError):
        decode_action(codec, float("nan"))
