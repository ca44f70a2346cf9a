"""JSON documents for networks, masks, plans and reports.

Numbers that must stay exact (weights, scales, bounds) are written as
strings such as ``"-3/8"`` or ``"0.25"``.  A lazily generated random binary
network is stored by its generator descriptor rather than its entries.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .construct import GadgetPlan
from .network import (BinaryNetwork, HashedSigns, IntegerNetwork, Mask, MaskSet,
                      ShapeError, TargetNetwork, as_fraction)

__all__ = [
    "GENERATOR_NAME",
    "DENSE_MASK_LIMIT",
    "dumps",
    "write_json",
    "read_json",
    "network_to_json",
    "network_from_json",
    "masks_to_json",
    "masks_from_json",
    "plan_from_json",
    "example_target_path",
    "load_network",
    "load_masks",
]

GENERATOR_NAME = "splitmix64-sign"
# Masks with more entries than this are written as coordinate lists.
DENSE_MASK_LIMIT = 1 << 22


def dumps(doc, compact: bool = False) -> str:
    if compact:
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_json(path, doc, compact: bool = False) -> None:
    Path(path).write_text(dumps(doc, compact))


def read_json(path):
    return json.loads(Path(path).read_text())


def _number(v) -> str:
    return str(as_fraction(v))


def network_to_json(net) -> dict:
    if isinstance(net, TargetNetwork):
        return {"kind": "target",
                "layers": [[[_number(v) for v in row] for row in w] for w in net.layers]}
    if isinstance(net, IntegerNetwork):
        return {"kind": "integer", "weight_bound": net.weight_bound,
                "output_scale": str(net.output_scale),
                "layers": [[[int(v) for v in row] for row in w] for w in net.layers]}
    if isinstance(net, BinaryNetwork):
        doc = {"kind": "binary", "widths": list(net.widths),
               "last_layer_scale": str(net.last_layer_scale)}
        seeds = {b.seed for b in net.layers if isinstance(b, HashedSigns)}
        lazy = all(isinstance(b, HashedSigns) for b in net.layers)
        if lazy and len(seeds) == 1 and all(b.layer == i for i, b in enumerate(net.layers)):
            doc["generator"] = {"name": GENERATOR_NAME, "seed": seeds.pop()}
        else:
            doc["layers"] = [b.tolist() for b in net.dense_layers()]
        return doc
    raise TypeError(f"not a network: {type(net).__name__}")


def network_from_json(doc: dict):
    kind = doc.get("kind")
    if kind == "target":
        return TargetNetwork(tuple(np.array([[as_fraction(v) for v in row] for row in w],
                                            dtype=object) for w in doc["layers"]))
    if kind == "integer":
        return IntegerNetwork(tuple(doc["layers"]), doc.get("weight_bound"),
                              as_fraction(doc.get("output_scale", "1")))
    if kind == "binary":
        scale = as_fraction(doc.get("last_layer_scale", "1"))
        if "generator" in doc:
            gen = doc["generator"]
            if gen.get("name") != GENERATOR_NAME:
                raise ValueError(f"unknown generator {gen.get('name')!r}")
            w = [int(v) for v in doc["widths"]]
            return BinaryNetwork(tuple(HashedSigns(int(gen["seed"]), i, (w[i + 1], w[i]))
                                       for i in range(len(w) - 1)), scale)
        net = BinaryNetwork(tuple(np.array(b, dtype=np.int8) for b in doc["layers"]), scale)
        if "widths" in doc and list(net.widths) != list(doc["widths"]):
            raise ShapeError(f"declared widths {doc['widths']} differ from layers {net.widths}")
        return net
    raise ValueError(f"unknown network kind {kind!r}")


def masks_to_json(masks: MaskSet) -> dict:
    layers = []
    for m in masks.masks:
        if m.shape[0] * m.shape[1] <= DENSE_MASK_LIMIT:
            layers.append({"shape": list(m.shape), "dense": m.dense().tolist()})
        else:
            layers.append({"shape": list(m.shape), "rows": m.rows.tolist(),
                           "cols": m.cols.tolist()})
    return {"kind": "masks", "widths": list(masks.widths), "layers": layers}


def masks_from_json(doc: dict) -> MaskSet:
    if doc.get("kind") != "masks":
        raise ValueError("not a mask document")
    out = []
    for layer in doc["layers"]:
        if "dense" in layer:
            m = Mask.from_dense(np.array(layer["dense"], dtype=np.int64))
            if "shape" in layer and list(m.shape) != list(layer["shape"]):
                raise ShapeError(f"mask shape {m.shape} differs from declared {layer['shape']}")
        else:
            m = Mask(tuple(layer["shape"]), layer["rows"], layer["cols"])
        out.append(m)
    return MaskSet(tuple(out))


def plan_from_json(doc: dict) -> GadgetPlan:
    return GadgetPlan.from_json(doc)


def example_target_path() -> Path:
    return Path(str(resources.files("binary_lottery") / "data" / "example_target.json"))


def load_network(path):
    return network_from_json(read_json(path))


def load_masks(path) -> MaskSet:
    return masks_from_json(read_json(path))
