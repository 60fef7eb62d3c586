import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polarlab.channel import (
    AlphabetCapError,
    ChannelError,
    DiscreteBMC,
    as_erasure,
    bec,
    bec_transform,
    bhattacharyya,
    bsc,
    load_channel,
    merge_equivalent_outputs,
    parse_channel,
    symmetric_capacity,
    transform_minus,
    transform_plus,
)

from conftest import channels, random_channel


def brute_minus(w):
    # W-(y1,y2|u1) = 1/2 sum_u2 W(y1|u1^u2) W(y2|u2)
    o = w.outputs
    rows = []
    for y1, y2 in itertools.product(range(len(o)), repeat=2):
        rows.append([sum(0.5 * o[y1, u1 ^ u2] * o[y2, u2] for u2 in (0, 1)) for u1 in (0, 1)])
    return np.array(rows)


def brute_plus(w):
    o = w.outputs
    rows = []
    for y1, y2, u1 in itertools.product(range(len(o)), range(len(o)), (0, 1)):
        rows.append([0.5 * o[y1, u1 ^ u2] * o[y2, u2] for u2 in (0, 1)])
    return np.array(rows)


def capacity_oracle(o):
    total = 0.0
    for w0, w1 in o:
        for p in (w0, w1):
            if p > 0:
                total += 0.5 * p * math.log2(p / (0.5 * (w0 + w1)))
    return total


class TestFunctionals:
    def test_bec_z(self):
        w = DiscreteBMC(np.array([[0.7, 0.0], [0.3, 0.3], [0.0, 0.7]]))
        assert bhattacharyya(w) == pytest.approx(0.3, abs=1e-15)
        assert symmetric_capacity(w) == pytest.approx(0.7, abs=1e-15)

    def test_noiseless(self):
        w = DiscreteBMC(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert bhattacharyya(w) == 0.0
        assert symmetric_capacity(w) == 1.0

    def test_useless(self):
        w = DiscreteBMC(np.array([[0.5, 0.5], [0.5, 0.5]]))
        assert symmetric_capacity(w) == pytest.approx(0.0, abs=1e-15)
        assert bhattacharyya(w) == pytest.approx(1.0)

    def test_bsc(self):
        assert bhattacharyya(bsc(0.11)) == pytest.approx(0.6257795138864806, abs=1e-15)
        h = -0.11 * math.log2(0.11) - 0.89 * math.log2(0.89)
        assert symmetric_capacity(bsc(0.11)) == pytest.approx(1 - h, abs=1e-14)

    @given(channels())
    def test_capacity_matches_oracle(self, w):
        assert symmetric_capacity(w) == pytest.approx(capacity_oracle(w.outputs), abs=1e-12)


class TestValidation:
    def test_zero_rows_dropped(self):
        w = DiscreteBMC(np.array([[0.5, 0.0], [0.0, 0.0], [0.5, 1.0]]))
        assert w.num_outputs == 2

    @pytest.mark.parametrize(
        "rows",
        [
            [[0.5, 0.5], [0.4, 0.5]],
            [[-0.1, 0.5], [1.1, 0.5]],
            [[float("nan"), 0.5], [1.0, 0.5]],
            [],
            [[0.5, 0.5, 0.0]],
        ],
    )
    def test_rejects_malformed(self, rows):
        with pytest.raises(ChannelError):
            DiscreteBMC(np.array(rows, dtype=float))

    def test_small_rounding_renormalized(self):
        w = DiscreteBMC(np.array([[0.3333333333333, 0.5], [0.6666666666667, 0.5]]))
        assert w.outputs[:, 0].sum() == pytest.approx(1.0, abs=1e-15)

    def test_immutable(self):
        w = bec(0.3)
        with pytest.raises(ValueError):
            w.outputs[0, 0] = 0.0

    @pytest.mark.parametrize("eps", [-0.1, 1.5, float("nan")])
    def test_bad_erasure(self, eps):
        with pytest.raises(ChannelError):
            bec(eps)


class TestTransforms:
    def test_bec_half(self):
        w = bec(0.5)
        assert bhattacharyya(transform_minus(w)) == pytest.approx(0.75, abs=1e-15)
        assert bhattacharyya(transform_plus(w)) == pytest.approx(0.25, abs=1e-15)
        assert transform_minus(w).num_outputs == 9
        # 2 k^2 = 18 raw outputs, four of them the unreachable (0, 0) pair
        assert transform_plus(w).num_outputs == 14

    def test_noiseless_minus(self):
        w = DiscreteBMC(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert bhattacharyya(transform_minus(w)) == 0.0
        assert bhattacharyya(transform_plus(w)) == 0.0

    def test_bsc_plus(self):
        z = bhattacharyya(transform_plus(bsc(0.11)))
        assert z == pytest.approx(0.6257795138864806**2, abs=1e-12)
        assert z == pytest.approx(0.3916, abs=1e-4)

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_matches_brute_force(self, k, rng):
        w = random_channel(rng, k)
        np.testing.assert_allclose(transform_minus(w).outputs, brute_minus(w), atol=1e-15)
        np.testing.assert_allclose(transform_plus(w).outputs, brute_plus(w), atol=1e-15)

    @settings(max_examples=60)
    @given(channels())
    def test_z_relations(self, w):
        z = w.z
        assert transform_plus(w).z == pytest.approx(z * z, abs=1e-12)
        zm = transform_minus(w).z
        assert z - 1e-12 <= zm <= 2 * z - z * z + 1e-12
        assert zm + z * z <= 2 * z + 1e-12

    @settings(max_examples=60)
    @given(channels())
    def test_capacity_chain_rule(self, w):
        total = transform_minus(w).capacity + transform_plus(w).capacity
        assert total == pytest.approx(2 * w.capacity, abs=1e-9)

    @given(st.floats(0, 1))
    def test_bec_supermartingale_equality(self, eps):
        w = bec(eps)
        assert transform_minus(w).z + transform_plus(w).z == pytest.approx(2 * eps, abs=1e-12)

    def test_alphabet_cap_after_merge(self, rng):
        # W- is symmetric in (y1, y2), so merging only halves k^2 outputs
        with pytest.raises(AlphabetCapError):
            transform_minus(random_channel(rng, 400))

    def test_merge_rescues_cap(self, rng):
        w = transform_minus(random_channel(rng, 300))
        assert w.num_outputs <= 2**16

    def test_raw_guard(self, rng):
        w = transform_plus(transform_plus(random_channel(rng, 8)))
        with pytest.raises(AlphabetCapError):
            transform_plus(w)


class TestMerge:
    def test_proportional_rows(self):
        w = DiscreteBMC(np.array([[0.2, 0.1], [0.4, 0.2], [0.4, 0.7]]))
        np.testing.assert_allclose(merge_equivalent_outputs(w).outputs, [[0.6, 0.3], [0.4, 0.7]], atol=1e-15)

    def test_minimal_unchanged(self):
        w = bec(0.3)
        np.testing.assert_array_equal(merge_equivalent_outputs(w).outputs, w.outputs)

    def test_bec_minus_merges_to_bec(self):
        m = merge_equivalent_outputs(transform_minus(bec(0.5)))
        assert m.num_outputs == 3
        assert m.z == pytest.approx(0.75, abs=1e-15)
        assert m.capacity == pytest.approx(0.25, abs=1e-15)

    @settings(max_examples=40)
    @given(channels())
    def test_preserves_functionals(self, w):
        raw = transform_plus(w)
        m = merge_equivalent_outputs(raw)
        assert m.num_outputs <= raw.num_outputs
        assert m.z == pytest.approx(raw.z, abs=1e-12)
        assert m.capacity == pytest.approx(raw.capacity, abs=1e-12)


class TestErasure:
    @pytest.mark.parametrize("eps,expected", [(0.5, (0.75, 0.25)), (0.0, (0.0, 0.0)), (1.0, (1.0, 1.0))])
    def test_bec_transform(self, eps, expected):
        assert bec_transform(eps) == expected

    @given(st.floats(0, 1))
    def test_agrees_with_generic(self, eps):
        em, ep = bec_transform(eps)
        assert as_erasure(transform_minus(bec(eps))) == pytest.approx(em, abs=1e-12)
        assert as_erasure(transform_plus(bec(eps))) == pytest.approx(ep, abs=1e-12)

    def test_as_erasure_rejects_bsc(self):
        assert as_erasure(bsc(0.1)) is None
        assert as_erasure(bec(0.25)) == pytest.approx(0.25)


class TestLoading:
    def test_shorthands(self):
        assert load_channel("bec:0.3").z == pytest.approx(0.3)
        assert load_channel("bsc:0.11").z == pytest.approx(0.6257795138864806)

    def test_file(self, tmp_path):
        p = tmp_path / "w.json"
        p.write_text(json.dumps({"outputs": [[0.7, 0.0], [0.3, 0.3], [0.0, 0.7]]}))
        assert load_channel(str(p)).z == pytest.approx(0.3)

    @pytest.mark.parametrize("text", ["not json", "[1, 2]", '{"foo": 1}', '{"outputs": [[0.5, 0.2]]}'])
    def test_bad_files(self, tmp_path, text):
        p = tmp_path / "w.json"
        p.write_text(text)
        with pytest.raises(ChannelError):
            load_channel(str(p))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ChannelError):
            load_channel(str(tmp_path / "nope.json"))

    def test_parse_object(self):
        assert parse_channel({"bec": 0.2}).z == pytest.approx(0.2)
