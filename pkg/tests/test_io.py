from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from binary_lottery import io
from binary_lottery.construct import build_network
from binary_lottery.embed import sample_binary
from binary_lottery.network import (BinaryNetwork, IntegerNetwork, Mask, MaskSet, ShapeError,
                                    TargetNetwork, forward_eval)

from conftest import integer_networks


def test_target_round_trip_is_exact():
    f = TargetNetwork(([["0.1", "-1/3"]], [["2/7"]]))
    g = io.network_from_json(io.network_to_json(f))
    assert all(np.array_equal(a, b) for a, b in zip(f.layers, g.layers))
    doc = io.network_to_json(f)
    assert doc["layers"][0][0] == ["1/10", "-1/3"]


@given(integer_networks())
def test_integer_round_trip(layers):
    f = IntegerNetwork(tuple(layers), output_scale=Fraction(1, 100))
    g = io.network_from_json(io.network_to_json(f))
    assert g.output_scale == f.output_scale and g.weight_bound == f.weight_bound
    assert all(np.array_equal(a, b) for a, b in zip(f.layers, g.layers))


def test_lazy_binary_stored_by_generator():
    net = sample_binary((3, 40, 2), 77).with_scale(Fraction(1, 10))
    doc = io.network_to_json(net)
    assert doc["generator"] == {"name": io.GENERATOR_NAME, "seed": 77}
    back = io.network_from_json(doc)
    assert back.last_layer_scale == Fraction(1, 10)
    assert all(np.array_equal(a, b) for a, b in zip(net.dense_layers(), back.dense_layers()))


def test_dense_binary_round_trip_and_width_check():
    net = BinaryNetwork((np.array([[1, -1]], dtype=np.int8),))
    doc = io.network_to_json(net)
    assert io.network_from_json(doc).dense_layers()[0].tolist() == [[1, -1]]
    doc["widths"] = [3, 1]
    with pytest.raises(ShapeError):
        io.network_from_json(doc)


def test_unknown_kinds():
    with pytest.raises(ValueError):
        io.network_from_json({"kind": "ternary"})
    with pytest.raises(ValueError):
        io.network_from_json({"kind": "binary", "widths": [1, 1],
                              "generator": {"name": "mt19937", "seed": 1}})
    with pytest.raises(ValueError):
        io.masks_from_json({"kind": "network"})


def test_masks_round_trip_dense_and_sparse(monkeypatch):
    r = build_network(IntegerNetwork(([[3, -2]],)))
    back = io.masks_from_json(io.masks_to_json(r.masks))
    assert all(np.array_equal(a.dense(), b.dense()) for a, b in zip(r.masks.masks, back.masks))
    monkeypatch.setattr(io, "DENSE_MASK_LIMIT", 0)
    doc = io.masks_to_json(r.masks)
    assert "rows" in doc["layers"][0]
    back = io.masks_from_json(doc)
    assert all(np.array_equal(a.dense(), b.dense()) for a, b in zip(r.masks.masks, back.masks))


def test_mask_shape_mismatch():
    doc = io.masks_to_json(MaskSet((Mask.ones((2, 2)),)))
    doc["layers"][0]["shape"] = [2, 3]
    with pytest.raises(ShapeError):
        io.masks_from_json(doc)


def test_plan_round_trip():
    r = build_network(IntegerNetwork(([[5, 0], [-1, 2]], [[1, 1]])))
    assert io.plan_from_json(r.plan.to_json()) == r.plan


def test_files_and_example(tmp_path):
    f = io.load_network(io.example_target_path())
    assert isinstance(f, TargetNetwork)
    f.check_norm_bound()
    path = tmp_path / "t.json"
    io.write_json(path, io.network_to_json(f))
    g = io.load_network(path)
    x = [Fraction(1, 3)] * f.widths[0]
    assert list(forward_eval(f, x)) == list(forward_eval(g, x))
    assert io.dumps({"b": 1, "a": 2}) == io.dumps({"a": 2, "b": 1})
    assert "\n" not in io.dumps({"a": [1, 2]}, compact=True).rstrip("\n")
