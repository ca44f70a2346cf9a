"""Fully-connected ReLU networks, supermasks and their evaluation.

Three network flavours share one evaluation path:

* ``TargetNetwork``  -- real weights (floats or exact ``Fraction`` objects).
* ``IntegerNetwork`` -- arbitrary-precision integer weights plus a rational
  output scale applied to the last layer.
* ``BinaryNetwork``  -- +/-1 weights plus a rational last-layer scale.  Layers
  are either dense ``int8`` arrays or ``HashedSigns`` matrices whose entries
  are generated on demand, so that very wide random networks never need to
  be materialised.

Two backends are provided.  ``"float"`` runs in float64.  ``"rational"`` is
exact: every layer is rescaled to integer numerators, inputs are written over
a per-point common denominator, and the ReLU's positive homogeneity moves all
denominators to the end.  Integer products run in int64 whenever an a-priori
magnitude bound proves it safe and fall back to Python integers otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

__all__ = [
    "ShapeError",
    "as_fraction",
    "HashedSigns",
    "TargetNetwork",
    "IntegerNetwork",
    "BinaryNetwork",
    "Mask",
    "MaskSet",
    "LayerNorms",
    "forward_eval",
    "masked_eval",
    "max_norms",
    "prune_dead",
]

_INT64_SAFE = 2**62
# Largest lazily generated layer that forward_eval will densify.
MAX_DENSE_ENTRIES = 50_000_000


class ShapeError(ValueError):
    """Raised when matrix shapes do not chain or masks are not congruent."""


def as_fraction(value) -> Fraction:
    """Convert ints, floats (exactly), decimal/ratio strings and rationals."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("booleans are not weights")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(float(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# Counter-based random signs
# --------------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def hashed_signs(seed: int, layer: int, rows, cols) -> np.ndarray:
    """Uniform +/-1 signs addressed by (seed, layer, row, col).

    Each entry is an independent evaluation of the splitmix64 finaliser, so
    any subset of a huge matrix can be read without generating the rest.
    ``seed`` may be an array; it broadcasts against ``rows`` and ``cols``.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if isinstance(seed, (int, np.integer)):
        seed = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    else:
        seed = np.asarray(seed, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = _splitmix64(seed)
        base = _splitmix64(base ^ np.uint64(layer))
        h = _splitmix64(base ^ rows.astype(np.uint64))
        h = _splitmix64(h ^ (cols.astype(np.uint64) * _GOLDEN))
    bits = (h >> np.uint64(63)).astype(np.int8)
    return (2 * bits - 1).astype(np.int8)


class HashedSigns:
    """Read-only lazily generated +/-1 matrix."""

    ndim = 2

    def __init__(self, seed: int, layer: int, shape: tuple[int, int]):
        rows, cols = (int(s) for s in shape)
        if rows <= 0 or cols <= 0:
            raise ShapeError(f"non-positive shape {shape}")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.layer = int(layer)
        self.shape = (rows, cols)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def __getitem__(self, key) -> np.ndarray:
        rows, cols = key
        rows, cols = np.broadcast_arrays(np.asarray(rows), np.asarray(cols))
        if rows.size and (rows.min() < 0 or rows.max() >= self.shape[0]
                          or cols.min() < 0 or cols.max() >= self.shape[1]):
            raise IndexError("sign index out of range")
        return hashed_signs(self.seed, self.layer, rows, cols)

    def dense(self) -> np.ndarray:
        if self.size > MAX_DENSE_ENTRIES:
            raise MemoryError(f"refusing to materialise a {self.shape} sign matrix")
        r = np.arange(self.shape[0])[:, None]
        c = np.arange(self.shape[1])[None, :]
        return self[r, c]

    def __repr__(self) -> str:
        return f"HashedSigns(seed={self.seed}, layer={self.layer}, shape={self.shape})"


# --------------------------------------------------------------------------
# Network types
# --------------------------------------------------------------------------

def _check_chain(shapes: Sequence[tuple[int, int]]) -> tuple[int, ...]:
    if not shapes:
        raise ShapeError("a network needs at least one layer")
    for i, s in enumerate(shapes):
        if len(s) != 2 or s[0] <= 0 or s[1] <= 0:
            raise ShapeError(f"layer {i} has invalid shape {s}")
    for i in range(1, len(shapes)):
        if shapes[i][1] != shapes[i - 1][0]:
            raise ShapeError(
                f"layer {i} expects {shapes[i][1]} inputs but layer {i - 1} "
                f"produces {shapes[i - 1][0]}")
    return (shapes[0][1],) + tuple(s[0] for s in shapes)


def _real_matrix(m) -> np.ndarray:
    if isinstance(m, np.ndarray) and m.dtype.kind == "f":
        a = np.array(m, dtype=np.float64)
    else:
        obj = np.array(m, dtype=object)
        if obj.ndim != 2:
            raise ShapeError("weight matrices must be 2-D")
        if all(isinstance(v, (float, np.floating)) for v in obj.flat):
            a = obj.astype(np.float64)
        else:
            a = np.vectorize(as_fraction, otypes=[object])(obj)
    if a.ndim != 2:
        raise ShapeError("weight matrices must be 2-D")
    if a.dtype.kind == "f" and not np.all(np.isfinite(a)):
        raise ValueError("weights must be finite")
    return _readonly(a)


def _to_int(v) -> int:
    if isinstance(v, (bool, np.bool_)):
        raise TypeError("booleans are not weights")
    if isinstance(v, (int, np.integer)):
        return int(v)
    f = as_fraction(v)
    if f.denominator != 1:
        raise ValueError(f"{v!r} is not an integer")
    return f.numerator


def _int_matrix(m) -> np.ndarray:
    obj = np.array(m, dtype=object)
    if obj.ndim != 2:
        raise ShapeError("weight matrices must be 2-D")
    return _readonly(np.vectorize(_to_int, otypes=[object])(obj))


@dataclass(frozen=True, eq=False)
class TargetNetwork:
    """Real-weight network ``x -> relu(W_l relu(... relu(W_1 x)))``."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(_real_matrix(w) for w in self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "widths", _check_chain([w.shape for w in layers]))

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def max_width(self) -> int:
        return max(self.widths)

    def exact_layers(self) -> list[np.ndarray]:
        return [np.vectorize(as_fraction, otypes=[object])(w) for w in self.layers]

    def check_norm_bound(self) -> None:
        """Raise ``ValueError`` unless every layer has Frobenius norm <= 1."""
        for i, n in enumerate(max_norms(self)):
            if n.frobenius_squared > 1:
                raise ValueError(
                    f"layer {i} has squared Frobenius norm {n.frobenius_squared} > 1")


@dataclass(frozen=True, eq=False)
class IntegerNetwork:
    """Integer-weight network whose last layer is multiplied by ``output_scale``."""

    layers: tuple
    weight_bound: int | None = None
    output_scale: Fraction = Fraction(1)

    def __post_init__(self):
        layers = tuple(_int_matrix(w) for w in self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "widths", _check_chain([w.shape for w in layers]))
        actual = max(max((abs(v) for v in w.flat), default=0) for w in layers)
        bound = max(1, actual) if self.weight_bound is None else int(self.weight_bound)
        if bound < 1 or bound < actual:
            raise ValueError(f"weight bound {bound} below max |weight| {actual}")
        object.__setattr__(self, "weight_bound", bound)
        scale = as_fraction(self.output_scale)
        if scale <= 0:
            raise ValueError("output scale must be positive")
        object.__setattr__(self, "output_scale", scale)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def max_width(self) -> int:
        return max(self.widths)


def _binary_layer(m):
    if isinstance(m, HashedSigns):
        return m
    a = np.asarray(m)
    if a.ndim != 2:
        raise ShapeError("weight matrices must be 2-D")
    if not np.all((a == 1) | (a == -1)):
        raise ValueError("binary weights must be exactly -1 or +1")
    return _readonly(a.astype(np.int8))


@dataclass(frozen=True, eq=False)
class BinaryNetwork:
    """+/-1 network; ``last_layer_scale`` multiplies only the final layer."""

    layers: tuple
    last_layer_scale: Fraction = Fraction(1)

    def __post_init__(self):
        layers = tuple(_binary_layer(b) for b in self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "widths", _check_chain([b.shape for b in layers]))
        scale = as_fraction(self.last_layer_scale)
        if scale < 0:
            raise ValueError("last-layer scale must be non-negative")
        object.__setattr__(self, "last_layer_scale", scale)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def max_width(self) -> int:
        return max(self.widths)

    @property
    def parameter_count(self) -> int:
        return sum(r * c for r, c in (b.shape for b in self.layers))

    @property
    def is_lazy(self) -> bool:
        return any(isinstance(b, HashedSigns) for b in self.layers)

    def dense_layers(self) -> list[np.ndarray]:
        return [b.dense() if isinstance(b, HashedSigns) else b for b in self.layers]

    def with_scale(self, scale) -> "BinaryNetwork":
        return BinaryNetwork(self.layers, scale)


# --------------------------------------------------------------------------
# Masks
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Mask:
    """0/1 matrix stored as the sorted row-major coordinates of its ones."""

    shape: tuple
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise ShapeError("row and column index arrays differ in length")
        if rows.size and (rows.min() < 0 or rows.max() >= shape[0]
                          or cols.min() < 0 or cols.max() >= shape[1]):
            raise ShapeError(f"mask coordinate outside shape {shape}")
        flat = np.unique(rows * shape[1] + cols)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "rows", _readonly(flat // shape[1]))
        object.__setattr__(self, "cols", _readonly(flat % shape[1]))

    @classmethod
    def from_dense(cls, a) -> "Mask":
        a = np.asarray(a)
        if a.ndim != 2:
            raise ShapeError("masks must be 2-D")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("mask entries must be 0 or 1")
        r, c = np.nonzero(a)
        return cls(a.shape, r, c)

    @classmethod
    def ones(cls, shape) -> "Mask":
        r, c = np.indices(shape)
        return cls(shape, r.ravel(), c.ravel())

    @classmethod
    def zeros(cls, shape) -> "Mask":
        return cls(shape, [], [])

    @property
    def nnz(self) -> int:
        return int(self.rows.size)

    def dense(self) -> np.ndarray:
        a = np.zeros(self.shape, dtype=np.uint8)
        a[self.rows, self.cols] = 1
        return a

    def __eq__(self, other) -> bool:
        return (isinstance(other, Mask) and self.shape == other.shape
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MaskSet:
    masks: tuple

    def __post_init__(self):
        masks = tuple(m if isinstance(m, Mask) else Mask.from_dense(m) for m in self.masks)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "widths", _check_chain([m.shape for m in masks]))

    @classmethod
    def ones(cls, net: BinaryNetwork) -> "MaskSet":
        return cls(tuple(Mask.ones(b.shape) for b in net.layers))

    @classmethod
    def zeros(cls, net: BinaryNetwork) -> "MaskSet":
        return cls(tuple(Mask.zeros(b.shape) for b in net.layers))

    @property
    def nnz(self) -> int:
        return sum(m.nnz for m in self.masks)

    def dense(self) -> list[np.ndarray]:
        return [m.dense() for m in self.masks]

    def check_congruent(self, net: BinaryNetwork) -> None:
        if len(self.masks) != net.depth:
            raise ShapeError(f"{len(self.masks)} masks for a depth-{net.depth} network")
        for i, (m, b) in enumerate(zip(self.masks, net.layers)):
            if m.shape != tuple(b.shape):
                raise ShapeError(f"mask {i} has shape {m.shape}, layer has {b.shape}")

    def replace(self, index: int, mask: Mask) -> "MaskSet":
        masks = list(self.masks)
        masks[index] = mask
        return MaskSet(tuple(masks))

    def __eq__(self, other) -> bool:
        return (isinstance(other, MaskSet) and len(self.masks) == len(other.masks)
                and all(a == b for a, b in zip(self.masks, other.masks)))

    __hash__ = None


# --------------------------------------------------------------------------
# Norms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerNorms:
    frobenius_squared: Fraction
    max_abs: Fraction

    @property
    def frobenius(self):
        """Exact when the squared norm is a rational square, float otherwise."""
        q = self.frobenius_squared
        rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
        if rn * rn == q.numerator and rd * rd == q.denominator:
            return Fraction(rn, rd)
        return math.sqrt(q)


def max_norms(net) -> list[LayerNorms]:
    out = []
    for w in net.layers:
        vals = [as_fraction(v) for v in np.asarray(w, dtype=object).flat]
        out.append(LayerNorms(sum((v * v for v in vals), Fraction(0)),
                              max((abs(v) for v in vals), default=Fraction(0))))
    return out


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

class _Layer:
    """One linear map held as integer numerators over a common denominator."""

    def __init__(self, shape, denominator=1, dense=None, rows=None, cols=None, vals=None):
        self.shape = tuple(shape)
        self.denominator = int(denominator)
        self.dense = dense
        self.rows, self.cols, self.vals = rows, cols, vals
        if dense is not None:
            absrows = [sum(abs(int(v)) for v in row) for row in dense]
            self._fits = all(abs(int(v)) < _INT64_SAFE for v in dense.flat)
        else:
            acc = np.zeros(self.shape[0], dtype=object)
            np.add.at(acc, rows, np.abs(vals).astype(object))
            absrows = list(acc)
            self._fits = bool(np.all(np.abs(vals) < _INT64_SAFE))
        self.rowsum = int(max(absrows, default=0))
        self._dense64 = self._csr64 = self._float = None

    # exact -----------------------------------------------------------------
    def apply_exact(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[1]
        xmax = int(np.abs(X).max()) if X.size else 0
        if self._fits and xmax * self.rowsum < _INT64_SAFE:
            X64 = X if X.dtype == np.int64 else X.astype(np.int64)
            if self.dense is not None:
                if self._dense64 is None:
                    self._dense64 = self.dense.astype(np.int64)
                return self._dense64 @ X64
            if self._csr64 is None:
                self._csr64 = sparse.csr_array(
                    (self.vals.astype(np.int64), (self.rows, self.cols)), shape=self.shape)
            return np.asarray(self._csr64 @ X64, dtype=np.int64)
        Xo = X.astype(object)
        if self.dense is not None:
            return self.dense.astype(object).dot(Xo)
        out = np.zeros((self.shape[0], n), dtype=object)
        if self.rows.size == 0:
            return out
        contrib = Xo[self.cols] * self.vals.astype(object)[:, None]
        starts = np.flatnonzero(np.r_[True, self.rows[1:] != self.rows[:-1]])
        out[self.rows[starts]] = np.add.reduceat(contrib, starts, axis=0)
        return out

    # float -----------------------------------------------------------------
    def apply_float(self, X: np.ndarray) -> np.ndarray:
        if self._float is None:
            if self.dense is not None:
                self._float = np.array(
                    [[float(Fraction(int(v), self.denominator)) for v in row]
                     for row in self.dense], dtype=np.float64).reshape(self.shape)
            else:
                data = np.array([float(Fraction(int(v), self.denominator))
                                 for v in self.vals], dtype=np.float64)
                self._float = sparse.csr_array((data, (self.rows, self.cols)),
                                               shape=self.shape)
        return np.asarray(self._float @ X, dtype=np.float64)


def _dense_layer(w: np.ndarray) -> _Layer:
    if w.dtype.kind in "iu":
        return _Layer(w.shape, 1, dense=w.astype(object))
    fr = np.vectorize(as_fraction, otypes=[object])(w)
    q = 1
    for v in fr.flat:
        q = math.lcm(q, v.denominator)
    num = np.vectorize(lambda v: v.numerator * (q // v.denominator), otypes=[object])(fr)
    return _Layer(w.shape, q, dense=num)


def _network_layers(net) -> tuple[list[_Layer], Fraction]:
    if isinstance(net, TargetNetwork):
        return [_dense_layer(w) for w in net.layers], Fraction(1)
    if isinstance(net, IntegerNetwork):
        return [_Layer(w.shape, 1, dense=w) for w in net.layers], net.output_scale
    if isinstance(net, BinaryNetwork):
        layers = []
        for b in net.layers:
            if isinstance(b, HashedSigns):
                b = b.dense()
            layers.append(_Layer(b.shape, 1, dense=b.astype(object)))
        return layers, net.last_layer_scale
    raise TypeError(f"not a network: {type(net).__name__}")


def _masked_layers(net: BinaryNetwork, masks: MaskSet) -> list[_Layer]:
    """Sparse layers restricted to neurons that keep at least one weight.

    A hidden neuron without incoming weights outputs relu(0) = 0, so dropping
    it (and its outgoing weights) leaves the function unchanged.  The output
    layer is always kept at full width.
    """
    masks.check_congruent(net)
    layers = []
    live = np.arange(net.widths[0])
    last = net.depth - 1
    for i, (b, m) in enumerate(zip(net.layers, masks.masks)):
        col_pos = np.full(m.shape[1], -1, dtype=np.int64)
        col_pos[live] = np.arange(live.size)
        keep = col_pos[m.cols] >= 0
        rows, cols = m.rows[keep], m.cols[keep]
        out = np.arange(m.shape[0]) if i == last else np.unique(rows)
        if out.size == 0:
            out = np.zeros(1, dtype=np.int64)
        row_pos = np.full(m.shape[0], -1, dtype=np.int64)
        row_pos[out] = np.arange(out.size)
        vals = np.asarray(b[rows, cols], dtype=np.int64)
        layers.append(_Layer((out.size, live.size), 1, rows=row_pos[rows],
                             cols=col_pos[cols], vals=vals))
        live = out
    return layers


def prune_dead(masks: MaskSet) -> MaskSet:
    """Drop kept weights that lie on no input-to-output path.

    The masked function is unchanged: such weights either read a neuron that
    is constantly zero or feed a neuron whose value never reaches the output.
    """
    fwd = [np.ones(masks.widths[0], dtype=bool)]
    for m in masks.masks:
        reach = np.zeros(m.shape[0], dtype=bool)
        reach[m.rows[fwd[-1][m.cols]]] = True
        fwd.append(reach)
    bwd = [np.ones(masks.widths[-1], dtype=bool)]
    for m in reversed(masks.masks):
        reach = np.zeros(m.shape[1], dtype=bool)
        reach[m.cols[bwd[-1][m.rows]]] = True
        bwd.append(reach)
    bwd.reverse()
    out = []
    for i, m in enumerate(masks.masks):
        keep = fwd[i][m.cols] & bwd[i + 1][m.rows]
        out.append(Mask(m.shape, m.rows[keep], m.cols[keep]))
    return MaskSet(tuple(out))


def _points(x, d0: int) -> tuple[np.ndarray, bool]:
    arr = np.array(x, dtype=object)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != d0:
        raise ShapeError(f"input of shape {np.shape(x)} does not match input width {d0}")
    return arr, single


def _exact_forward(layers: list[_Layer], X: np.ndarray, relu_output: bool) -> np.ndarray:
    """Integer forward pass; columns are grouped by size so small ones stay in int64."""
    n = X.shape[1]
    last = len(layers) - 1
    sizes = [max((abs(int(v)) for v in X[:, j]), default=0).bit_length() // 16
             for j in range(n)]
    groups = {}
    for j, s in enumerate(sizes):
        groups.setdefault(s, []).append(j)
    out = None
    for cols in groups.values():
        Y = X[:, cols]
        for i, layer in enumerate(layers):
            Y = layer.apply_exact(Y)
            if i < last or relu_output:
                Y = np.maximum(Y, 0)
        if out is None:
            out = np.empty((Y.shape[0], n), dtype=object)
        out[:, cols] = Y
    if out is None:
        out = np.empty((layers[-1].shape[0], 0), dtype=object)
    return out


def _run(layers: list[_Layer], scale: Fraction, x, backend: str, relu_output: bool):
    d0 = layers[0].shape[1]
    pts, single = _points(x, d0)
    last = len(layers) - 1
    if backend == "float":
        X = pts.astype(np.float64).T
        with np.errstate(over="ignore", invalid="ignore"):
            for i, layer in enumerate(layers):
                X = layer.apply_float(X)
                if i == last:
                    X = X * float(scale)
                if i < last or relu_output:
                    X = np.maximum(X, 0.0)
                if not np.all(np.isfinite(X)):
                    raise OverflowError(f"float backend overflowed at layer {i}")
        out = X.T
    elif backend == "rational":
        frac = np.vectorize(as_fraction, otypes=[object])(pts)
        n = frac.shape[0]
        dens = [1] * n
        for j in range(n):
            for v in frac[j]:
                dens[j] = math.lcm(dens[j], v.denominator)
        X = np.empty((d0, n), dtype=object)
        for j in range(n):
            for i in range(d0):
                v = frac[j, i]
                X[i, j] = v.numerator * (dens[j] // v.denominator)
        q = 1
        for layer in layers:
            q *= layer.denominator
        X = _exact_forward(layers, X, relu_output)
        out = np.empty((n, X.shape[0]), dtype=object)
        sn, sd = scale.numerator, scale.denominator
        for j in range(n):
            den = dens[j] * q * sd
            for r in range(X.shape[0]):
                out[j, r] = Fraction(int(X[r, j]) * sn, den)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out[0] if single else out


def forward_eval(net, x, backend: str = "rational", *, relu_output: bool = True):
    """Evaluate ``net`` at one point (1-D) or a batch of points (rows of 2-D).

    The last layer is multiplied by the network's output scale.  With
    ``relu_output=False`` the final ReLU is skipped, exposing the
    pre-activation of the output layer.
    """
    layers, scale = _network_layers(net)
    return _run(layers, scale, x, backend, relu_output)


def masked_eval(net: BinaryNetwork, masks: MaskSet, x, backend: str = "rational",
                *, relu_output: bool = True):
    """Evaluate the pruned network whose layer ``i`` is ``masks[i] * net[i]``."""
    return _run(_masked_layers(net, masks), net.last_layer_scale, x, backend, relu_output)


def fractions_to_strings(values: Iterable) -> list[str]:
    return [str(as_fraction(v)) for v in values]
