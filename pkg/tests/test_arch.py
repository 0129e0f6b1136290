import numpy as np
import pytest

from eas.arch import (DEFAULT_TABLE, ArchitectureSpec, ArchParseError, LayerKind, WidthTable,
                      conv, count_params, describe, deserialize, fc, next_width_level, pool,
                      serialize, softmax, split_blocks, start_network, validate_architecture)

from helpers import random_dense_spec, random_plain_spec


def test_start_network_is_valid():
    spec = start_network()
    assert validate_architecture(spec).ok
    assert describe(spec) == "C16-P-C32-P-C64-P-C128-A-FC256-SM10"


def test_conv_after_fc_is_reported():
    spec = ArchitectureSpec((conv(16), fc(64), conv(32), softmax(10)), input_shape=(3, 8, 8))
    assert "conv-after-fc" in validate_architecture(spec).codes


def test_spatial_underflow_is_reported():
    layers = [conv(16)] + [pool(2, 2)] * 6 + [softmax(10)]
    assert "spatial-underflow" in validate_architecture(ArchitectureSpec(tuple(layers))).codes


@pytest.mark.parametrize("layers,code", [
    ((conv(16, 7), softmax(10)), "conv-filter-size"),
    ((conv(16), softmax(10), fc(64)), "softmax-not-last"),
    ((conv(16), softmax(10), softmax(10)), "softmax-not-last"),
    ((conv(17), softmax(10)), "width-not-in-table"),
    ((conv(16), fc(100), softmax(10)), "width-not-in-table"),
    ((conv(16), fc(64), pool(2), softmax(10)), "pool-after-fc"),
    ((conv(16, dropout=1.0), softmax(10)), "bad-dropout"),
])
def test_violations(layers, code):
    assert code in validate_architecture(ArchitectureSpec(layers, input_shape=(3, 8, 8))).codes


def test_dense_block_validation():
    layers = (conv(16), conv(40), conv(44), conv(32, 1), pool(8, 8, "avg"), softmax(10))
    good = ArchitectureSpec(layers, (3, 8, 8), "dense", ((0, 3),))
    assert validate_architecture(good).ok
    bad = ArchitectureSpec(layers, (3, 8, 8), "dense", ((0, 5),))
    assert "invalid-dense-block" in validate_architecture(bad).codes
    wrong_width = ArchitectureSpec(layers, (3, 8, 8), "dense", ((1, 3),))
    assert "width-not-in-table" in validate_architecture(wrong_width).codes


def test_split_blocks_start_network():
    blocks = split_blocks(start_network())
    assert [b.layers for b in blocks] == [(0,), (2,), (4,), (6,), (8, 9)]
    assert [b.kind for b in blocks] == ["conv"] * 4 + ["fc"]


def test_split_blocks_without_pools():
    spec = ArchitectureSpec((conv(16), conv(32), softmax(10)), input_shape=(3, 8, 8))
    blocks = split_blocks(spec)
    assert [b.layers for b in blocks] == [(0, 1), (2,)]


def test_split_blocks_two_pools_four_convs():
    layers = (conv(16), conv(16), pool(), conv(32), conv(32), pool(), fc(64), softmax(10))
    blocks = split_blocks(ArchitectureSpec(layers, input_shape=(3, 8, 8)))
    assert [len(b.layers) for b in blocks] == [2, 2, 2]


def test_split_blocks_partition_random():
    rng = np.random.default_rng(0)
    for _ in range(200):
        spec = random_plain_spec(rng)
        covered = [i for b in split_blocks(spec) for i in b.layers]
        expected = [i for i, layer in enumerate(spec.layers) if layer.kind is not LayerKind.POOL]
        assert covered == expected


def test_split_blocks_rejects_invalid():
    with pytest.raises(ValueError):
        split_blocks(ArchitectureSpec((conv(17), softmax(10))))


def test_next_width_level_examples():
    assert next_width_level(32, "conv") == 64
    assert next_width_level(512, "conv") is None
    assert next_width_level(44, "growth") == 48
    assert next_width_level(256, LayerKind.FC) == 384
    with pytest.raises(ValueError):
        next_width_level(33, "conv")


def test_next_width_level_strictly_increasing():
    for name in ("conv", "fc", "growth"):
        level = DEFAULT_TABLE.levels(name)[0]
        seen = [level]
        while (level := next_width_level(level, name)) is not None:
            assert level > seen[-1]
            seen.append(level)
        assert tuple(seen) == DEFAULT_TABLE.levels(name)


def test_width_table_must_increase():
    with pytest.raises(ValueError):
        WidthTable(conv_levels=(16, 16, 32))


def test_serialize_round_trip_random():
    rng = np.random.default_rng(1)
    for i in range(1000):
        spec = random_plain_spec(rng) if i % 2 else random_dense_spec(rng)
        text = serialize(spec)
        assert text.startswith("eas-arch v1\n")
        back = deserialize(text)
        assert back == spec
        assert serialize(back) == text


def test_dense_round_trip_keeps_boundaries():
    spec = random_dense_spec(np.random.default_rng(3))
    assert deserialize(serialize(spec)).dense_blocks == spec.dense_blocks


@pytest.mark.parametrize("text,line", [
    ("eas-arch v1\ninput 3 8 8\nlayer lstm width=4\n", 3),
    ("eas-arch v2\n", 1),
    ("eas-arch v1\ninput 3 8 8\nlayer conv width=x k=3\n", 3),
    ("eas-arch v1\ninput 3 8 8\nlayer conv width=16\n", 3),
    ("eas-arch v1\ninput 3 8 8\nbogus\n", 3),
    ("eas-arch v1\nlayer softmax width=10\n", 2),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ArchParseError) as exc:
        deserialize(text)
    assert exc.value.line == line


def test_count_params_start_network():
    spec = start_network()
    # conv weights + biases + bn (gamma, beta) for each conv and fc layer
    expected = 0
    c_in = 3
    for w in (16, 32, 64, 128):
        expected += 9 * c_in * w + w + 2 * w
        c_in = w
    expected += 128 * 256 + 256 + 2 * 256
    expected += 256 * 10 + 10
    assert count_params(spec) == expected
