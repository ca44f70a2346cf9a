"""Deterministic gadget constructions that represent integer networks exactly.

Every target layer becomes one *block* of ``chain_length + 2`` binary layers:

1. a mirror-split layer sending each input ``x_j`` into two width-2 chains
   per power ``q``: the positive chain starts at ``relu(x_j)``, the negative
   chain at ``relu(-x_j)``;
2. ``chain_length`` transition layers.  Each chain is a stack of diamonds
   (2x2 all-ones patterns).  A diamond left intact doubles the value; with
   one branch pruned it passes the value through.  The chain for power ``q``
   doubles on its first ``q`` transitions and passes through afterwards;
3. a selection layer.  Output row ``r`` keeps the +/-1 weights that read
   ``sign(w_rj) * (pos - neg) = sign(w_rj) * 2**q * x_j`` for every set bit
   ``q`` of ``|w_rj|`` and prunes the rest.

The chains depend only on the weight bound, so a single chain bundle per
(input, power) is shared by all output rows of the layer.  Only the
selection layer depends on the actual weights.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .network import BinaryNetwork, IntegerNetwork, Mask, MaskSet, TargetNetwork
from .precision import scale_to_integer

__all__ = [
    "BinaryExpansion",
    "Selection",
    "BlockPlan",
    "GadgetPlan",
    "Gadget",
    "ConstructionResult",
    "binary_expand",
    "build_diamond_chain",
    "build_mirrored_pair",
    "plan_network",
    "realize_plan",
    "build_scalar",
    "build_neuron",
    "build_layer",
    "build_network",
    "build_classifier",
    "worst_case_network",
]


@dataclass(frozen=True)
class BinaryExpansion:
    sign: int
    bits: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.bits) - 1

    def value(self) -> int:
        return self.sign * sum(z << k for k, z in enumerate(self.bits))


def binary_expand(w: int) -> BinaryExpansion:
    """Sign and little-endian bits of a non-zero integer."""
    w = int(w)
    if w == 0:
        raise ValueError("zero has no binary expansion; prune the weight instead")
    mag = abs(w)
    return BinaryExpansion(1 if w > 0 else -1,
                           tuple((mag >> k) & 1 for k in range(mag.bit_length())))


# --------------------------------------------------------------------------
# Single gadgets
# --------------------------------------------------------------------------

class Gadget(NamedTuple):
    binary: BinaryNetwork
    masks: MaskSet


def _transition_mask(width_pairs: int, doubling: list[bool]) -> np.ndarray:
    m = np.zeros((2 * width_pairs, 2 * width_pairs), dtype=np.uint8)
    for c, dbl in enumerate(doubling):
        a, b = 2 * c, 2 * c + 1
        m[a, a] = m[b, a] = 1
        if dbl:
            m[a, b] = m[b, b] = 1
    return m


def build_diamond_chain(n: int, k: int) -> Gadget:
    """Width-2 chain of ``n`` diamonds, ``k`` of them pruned to pass-throughs.

    The masked network computes ``2**(n-k) * max(0, x)``.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    layers = [np.ones((2, 1), dtype=np.int8)]
    masks = [np.ones((2, 1), dtype=np.uint8)]
    for t in range(n):
        layers.append(np.ones((2, 2), dtype=np.int8))
        masks.append(_transition_mask(1, [t < n - k]))
    layers.append(np.ones((1, 2), dtype=np.int8))
    masks.append(np.array([[1, 0]], dtype=np.uint8))
    return Gadget(BinaryNetwork(tuple(layers)), MaskSet(tuple(masks)))


def build_mirrored_pair(n: int, k: int) -> Gadget:
    """Two mirrored chains whose output pre-activations are ``+/-2**(n-k) x``.

    The last layer is a tap: evaluate with ``relu_output=False`` to read the
    two linear values.  Inside a block the taps are never materialised; the
    next layer's selection weights consume them directly.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    split = np.array([[1], [1], [-1], [-1]], dtype=np.int8)
    layers = [split]
    masks = [np.ones((4, 1), dtype=np.uint8)]
    for t in range(n):
        layers.append(np.ones((4, 4), dtype=np.int8))
        masks.append(_transition_mask(2, [t < n - k] * 2))
    layers.append(np.array([[1, 1, -1, 1], [-1, 1, 1, 1]], dtype=np.int8))
    masks.append(np.array([[1, 0, 1, 0], [1, 0, 1, 0]], dtype=np.uint8))
    return Gadget(BinaryNetwork(tuple(layers)), MaskSet(tuple(masks)))


# --------------------------------------------------------------------------
# Plans
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Selection:
    input_index: int
    power: int
    sign: int


@dataclass(frozen=True)
class BlockPlan:
    input_width: int
    output_width: int
    bits: int
    chain_length: int
    first_layer: int
    selections: tuple[tuple[Selection, ...], ...]

    @property
    def powers(self) -> int:
        return self.bits + 1

    @property
    def hidden_width(self) -> int:
        return 4 * self.input_width * self.powers

    @property
    def depth(self) -> int:
        return self.chain_length + 2

    @property
    def selection_layer(self) -> int:
        return self.first_layer + self.chain_length + 1

    def unit(self, j: int, power: int, polarity: int) -> int:
        """Logical index of the first neuron of a chain in every hidden layer."""
        return 4 * (j * self.powers + power) + (0 if polarity > 0 else 2)

    def chains(self):
        """(input, power, polarity) triples in layout order."""
        for j in range(self.input_width):
            for q in range(self.powers):
                yield j, q, 1
                yield j, q, -1

    @staticmethod
    def doubles(power: int, t: int) -> bool:
        return t < power

    def to_json(self) -> dict:
        chains = []
        for j, q, pol in self.chains():
            u = self.unit(j, q, pol)
            chains.append({
                "input": j, "power": q, "polarity": pol, "units": [u, u + 2],
                "doubled": [t for t in range(self.chain_length) if self.doubles(q, t)],
                "pass_through": [t for t in range(self.chain_length)
                                 if not self.doubles(q, t)],
            })
        return {
            "input_width": self.input_width,
            "output_width": self.output_width,
            "bits": self.bits,
            "chain_length": self.chain_length,
            "layers": [self.first_layer, self.selection_layer],
            "hidden_width": self.hidden_width,
            "chains": chains,
            "selection": [[[s.input_index, s.power, s.sign] for s in row]
                          for row in self.selections],
        }

    @classmethod
    def from_json(cls, d: dict) -> "BlockPlan":
        return cls(d["input_width"], d["output_width"], d["bits"], d["chain_length"],
                   d["layers"][0],
                   tuple(tuple(Selection(*s) for s in row) for row in d["selection"]))


@dataclass(frozen=True)
class GadgetPlan:
    blocks: tuple[BlockPlan, ...]
    weight_bound: int

    @property
    def depth(self) -> int:
        return sum(b.depth for b in self.blocks)

    @property
    def input_width(self) -> int:
        return self.blocks[0].input_width

    @property
    def target_widths(self) -> tuple[int, ...]:
        return (self.blocks[0].input_width,) + tuple(b.output_width for b in self.blocks)

    def logical_widths(self) -> tuple[int, ...]:
        return self.embedding_widths(1)

    def embedding_widths(self, k: int) -> tuple[int, ...]:
        """Layer widths of a host network with ``k`` candidates per hidden neuron."""
        widths = [self.input_width]
        for b in self.blocks:
            widths += [k * b.hidden_width] * (b.chain_length + 1)
            widths.append(b.output_width)
        return tuple(widths)

    def to_json(self) -> dict:
        return {"weight_bound": self.weight_bound, "depth": self.depth,
                "widths": list(self.logical_widths()),
                "blocks": [b.to_json() for b in self.blocks]}

    @classmethod
    def from_json(cls, d: dict) -> "GadgetPlan":
        return cls(tuple(BlockPlan.from_json(b) for b in d["blocks"]), d["weight_bound"])


def plan_network(f: IntegerNetwork, weight_bound: int | None = None) -> GadgetPlan:
    bound = f.weight_bound if weight_bound is None else int(weight_bound)
    if bound < f.weight_bound:
        raise ValueError("weight bound below the network's own bound")
    bits = bound.bit_length() - 1
    length = max(1, bits)
    blocks, first = [], 0
    for w in f.layers:
        rows = []
        for r in range(w.shape[0]):
            row = []
            for j in range(w.shape[1]):
                if w[r, j] == 0:
                    continue
                e = binary_expand(w[r, j])
                row.extend(Selection(j, q, e.sign) for q, z in enumerate(e.bits) if z)
            rows.append(tuple(row))
        block = BlockPlan(w.shape[1], w.shape[0], bits, length, first, tuple(rows))
        blocks.append(block)
        first += block.depth
    return GadgetPlan(tuple(blocks), bound)


def realize_plan(plan: GadgetPlan) -> tuple[BinaryNetwork, MaskSet]:
    """Materialise the deterministic binary network and masks of a plan."""
    layers, masks = [], []
    for blk in plan.blocks:
        h = blk.hidden_width
        split = np.ones((h, blk.input_width), dtype=np.int8)
        smask = np.zeros_like(split, dtype=np.uint8)
        for j in range(blk.input_width):
            for q in range(blk.powers):
                u = blk.unit(j, q, 1)
                split[u + 2:u + 4, j] = -1
                smask[u:u + 4, j] = 1
        layers.append(split)
        masks.append(smask)
        for t in range(blk.chain_length):
            layers.append(np.ones((h, h), dtype=np.int8))
            m = np.zeros((h, h), dtype=np.uint8)
            for j, q, pol in blk.chains():
                a = blk.unit(j, q, pol)
                m[a, a] = m[a + 1, a] = 1
                if blk.doubles(q, t):
                    m[a, a + 1] = m[a + 1, a + 1] = 1
            masks.append(m)
        sel = np.ones((blk.output_width, h), dtype=np.int8)
        smask = np.zeros_like(sel, dtype=np.uint8)
        for r, row in enumerate(blk.selections):
            for s in row:
                pos, neg = blk.unit(s.input_index, s.power, 1), blk.unit(s.input_index, s.power, -1)
                sel[r, pos], sel[r, neg] = s.sign, -s.sign
                smask[r, pos] = smask[r, neg] = 1
        layers.append(sel)
        masks.append(smask)
    return BinaryNetwork(tuple(layers)), MaskSet(tuple(Mask.from_dense(m) for m in masks))


# --------------------------------------------------------------------------
# Constructions
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConstructionResult:
    binary: BinaryNetwork
    masks: MaskSet
    plan: GadgetPlan

    @property
    def widths(self) -> tuple[int, ...]:
        return self.binary.widths

    @property
    def width(self) -> int:
        return self.binary.max_width

    @property
    def depth(self) -> int:
        return self.binary.depth

    @property
    def parameter_count(self) -> int:
        return self.binary.parameter_count

    def size_json(self) -> dict:
        return {"widths": list(self.widths), "max_width": self.width, "depth": self.depth,
                "parameters": self.parameter_count, "kept_weights": self.masks.nnz}


def build_network(f: IntegerNetwork, weight_bound: int | None = None) -> ConstructionResult:
    """Binary network + masks with ``masked(x) * f.output_scale == f(x)``."""
    plan = plan_network(f, weight_bound)
    binary, masks = realize_plan(plan)
    return ConstructionResult(binary, masks, plan)


def build_scalar(w: int) -> ConstructionResult:
    return build_network(IntegerNetwork(([[int(w)]],)))


def build_neuron(w) -> ConstructionResult:
    return build_network(IntegerNetwork(([list(w)],)))


def build_layer(w1) -> ConstructionResult:
    return build_network(IntegerNetwork((w1,)))


def build_classifier(f: TargetNetwork, p: int) -> ConstructionResult:
    """Sign-preserving construction for a ``p``-digit network; no output scale.

    The binary network's last layer is left unscaled: the dropped factor
    ``10**(-p*l)`` is positive and cannot change a sign.
    """
    return build_network(scale_to_integer(f, p))


def worst_case_network(d: int, l: int, w: int) -> IntegerNetwork:
    """``l`` square ``d x d`` layers with entries ``+/-w`` in a checkerboard."""
    sign = np.fromfunction(lambda r, c: 1 - 2 * ((r + c) % 2), (d, d), dtype=int)
    layer = (sign * int(w)).astype(object)
    return IntegerNetwork(tuple(layer for _ in range(l)), int(w))
