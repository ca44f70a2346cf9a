"""Finding a gadget plan inside a uniformly random +/-1 network.

The host network has the plan's layer count.  Every logical hidden neuron
``u`` of the plan owns the slab of ``k`` host neurons ``[u*k, (u+1)*k)`` in
its layer; input, interface and output layers are not widened.  The search
runs layer by layer and only inspects signs on edges leaving neurons that are
already selected, so each unit's success depends on fresh, independent signs.

* Split layer: a mirror pair (four logical neurons) searches its merged
  ``4k`` slab for two neurons reading ``+1`` from the input (positive chain)
  and two reading ``-1`` (negative chain).
* Transition layers: a doubling step needs two slab neurons that read ``+1``
  from both current chain holders; a pass-through step needs two neurons
  reading ``+1`` from at least one holder.
* Selection layer: in the last transition every valid neuron of a chain
  carries the chain value, so all of them are kept as taps.  Output row ``r``
  realises a set bit of sign ``s`` with one positive tap whose sign into ``r``
  is ``s`` and one negative tap whose sign is ``-s``.
"""
from __future__ import annotations

import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy import stats

from .construct import ConstructionResult, GadgetPlan, build_network
from .network import (BinaryNetwork, HashedSigns, Mask, MaskSet, ShapeError,
                      TargetNetwork, as_fraction, hashed_signs, prune_dead)
from .precision import (PrecisionSpec, TruncationReport, required_precision,
                        scale_to_integer, truncate_network)

__all__ = [
    "EmbedConfig",
    "EmbedFailure",
    "EmbedResult",
    "FailureRate",
    "PipelineResult",
    "substream_seed",
    "sample_binary",
    "union_count",
    "analytic_failure_bound",
    "min_width_factor",
    "embed_plan",
    "embed_with_retries",
    "diamond_match_frequency",
    "failure_rate_mc",
    "strong_lth_pipeline",
]

MAX_RETRIES = 16
_MISS = 1 - Fraction(1, 16)


def substream_seed(seed: int, name: str, index: int = 0) -> int:
    """64-bit seed of the named substream ``(name, index)`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(zlib.crc32(name.encode()), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_binary(widths, seed: int) -> BinaryNetwork:
    """I.i.d. uniform +/-1 network with the given widths, generated lazily."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or min(widths) < 1:
        raise ShapeError(f"need at least two positive widths, got {widths}")
    return BinaryNetwork(tuple(HashedSigns(seed, i, (widths[i + 1], widths[i]))
                               for i in range(len(widths) - 1)))


# --------------------------------------------------------------------------
# Width factor
# --------------------------------------------------------------------------

def union_count(d: int, l: int, W: int) -> float:
    """Number of diamond events ``d * l * log2(W)**2`` in the union bound.

    ``W = 1`` is counted as ``W = 2``: its blocks still hold one diamond layer.
    """
    if d < 1 or l < 1 or W < 1:
        raise ValueError("d, l and W must be positive")
    return d * l * math.log2(max(W, 2)) ** 2


def analytic_failure_bound(d: int, l: int, W: int, k: int) -> float:
    return union_count(d, l, W) * float(_MISS) ** k


def min_width_factor(d: int, l: int, W: int, delta: float) -> int:
    """Smallest ``k >= 1`` with ``d l log2(W)^2 (15/16)^k <= delta``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    count = union_count(d, l, W)
    if count <= delta:
        return 1
    k = max(1, math.ceil(math.log(count / delta) / math.log(16 / 15)))
    # guard the float rounding at the boundary
    while k > 1 and count * (15 / 16) ** (k - 1) <= delta:
        k -= 1
    while count * (15 / 16) ** k > delta:
        k += 1
    return k


# --------------------------------------------------------------------------
# Embedding
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbedConfig:
    delta: float
    k: int
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if int(self.k) < 1:
            raise ValueError("width factor k must be at least 1")


class EmbedFailure(Exception):
    """No candidate in a unit's slab has the required sign pattern."""

    def __init__(self, layer: int, kind: str, unit, examined: int, matches: int,
                 attempts: int = 1):
        self.layer, self.kind, self.unit = layer, kind, unit
        self.examined, self.matches, self.attempts = examined, matches, attempts
        super().__init__(f"no {kind} candidate for unit {unit} in layer {layer} "
                         f"({matches} matches among {examined})")

    def to_json(self) -> dict:
        return {"layer": self.layer, "kind": self.kind, "unit": list(self.unit),
                "examined": self.examined, "matches": self.matches,
                "attempts": self.attempts}


@dataclass(frozen=True, eq=False)
class EmbedResult:
    masks: MaskSet | None
    success: bool
    k: int
    seed: int
    stats: tuple = ()
    failure: EmbedFailure | None = None
    attempts: int = 1

    def to_json(self) -> dict:
        out = {"success": self.success, "k": self.k, "seed": self.seed,
               "attempts": self.attempts,
               "kept_weights": None if self.masks is None else self.masks.nnz,
               "units": [dict(s) for s in self.stats]}
        if self.failure is not None:
            out["failure"] = self.failure.to_json()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


def _first(valid: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Positions of the first ``count`` True entries of each row, and whether they exist."""
    order = np.argsort(~valid, axis=1, kind="stable")[:, :count]
    return order, np.take_along_axis(valid, order, axis=1).all(axis=1)


class _Edges:
    def __init__(self, depth: int):
        self.rows = [[] for _ in range(depth)]
        self.cols = [[] for _ in range(depth)]

    def add(self, layer: int, rows, cols) -> None:
        self.rows[layer].append(np.asarray(rows, dtype=np.int64).ravel())
        self.cols[layer].append(np.asarray(cols, dtype=np.int64).ravel())

    def masks(self, net: BinaryNetwork) -> MaskSet:
        out = []
        for i, b in enumerate(net.layers):
            r = np.concatenate(self.rows[i]) if self.rows[i] else np.zeros(0, np.int64)
            c = np.concatenate(self.cols[i]) if self.cols[i] else np.zeros(0, np.int64)
            out.append(Mask(b.shape, r, c))
        return MaskSet(tuple(out))


def _check_host(plan: GadgetPlan, random: BinaryNetwork, k: int) -> None:
    need = plan.embedding_widths(k)
    have = random.widths
    if len(have) != len(need):
        raise ShapeError(f"host depth {random.depth} differs from plan depth {plan.depth}")
    if have[0] != need[0] or have[-1] != need[-1]:
        raise ShapeError(f"host input/output widths {have[0]}/{have[-1]} must equal "
                         f"{need[0]}/{need[-1]}")
    short = [i for i, (h, n) in enumerate(zip(have, need)) if h < n]
    if short:
        i = short[0]
        raise ShapeError(f"host width {have[i]} at layer {i} below required {need[i]}")


def _embed(plan: GadgetPlan, random: BinaryNetwork, k: int):
    edges = _Edges(random.depth)
    unit_stats = []
    inputs = np.arange(plan.input_width)
    for blk in plan.blocks:
        s = blk.first_layer
        chains = list(blk.chains())
        n_pairs = len(chains) // 2
        units = np.array([blk.unit(j, q, pol) for j, q, pol in chains], dtype=np.int64)
        powers = np.array([q for _, q, _ in chains], dtype=np.int64)

        # split: one merged 4k slab per mirror pair
        base = units[0::2]
        slab = base[:, None] * k + np.arange(4 * k)[None, :]
        src = inputs[np.array([j for j, _, _ in chains[0::2]], dtype=np.int64)]
        signs = np.asarray(random.layers[s][slab, src[:, None]])
        pos_at, pos_ok = _first(signs == 1, 2)
        neg_at, neg_ok = _first(signs == -1, 2)
        n_pos, n_neg = (signs == 1).sum(axis=1), (signs == -1).sum(axis=1)
        for c in range(n_pairs):
            j, q, _ = chains[2 * c]
            unit_stats.append({"layer": s, "kind": "split", "unit": [j, q],
                               "examined": 4 * k, "matches": [int(n_pos[c]), int(n_neg[c])]})
        bad = np.flatnonzero(~(pos_ok & neg_ok))
        if bad.size:
            c = int(bad[0])
            j, q, _ = chains[2 * c]
            raise EmbedFailure(s, "split", (j, q), 4 * k, int(min(n_pos[c], n_neg[c])))
        holders = np.empty((len(chains), 2), dtype=np.int64)
        holders[0::2] = np.take_along_axis(slab, pos_at, axis=1)
        holders[1::2] = np.take_along_axis(slab, neg_at, axis=1)
        edges.add(s, holders, np.repeat(src, 4))

        # transitions
        L = blk.chain_length
        for t in range(L):
            layer = s + 1 + t
            slabs = units[:, None] * k + np.arange(2 * k)[None, :]
            sg = np.asarray(random.layers[layer][slabs[:, :, None], holders[:, None, :]])
            plus = sg == 1
            dbl = powers > t
            valid = np.where(dbl[:, None], plus.all(axis=2), plus.any(axis=2))
            at, ok = _first(valid, 2)
            counts = valid.sum(axis=1)
            for c, (j, q, pol) in enumerate(chains):
                unit_stats.append({"layer": layer, "kind": "double" if dbl[c] else "pass",
                                   "unit": [j, q, pol], "examined": 2 * k,
                                   "matches": int(counts[c])})
            bad = np.flatnonzero(~ok)
            if bad.size:
                c = int(bad[0])
                raise EmbedFailure(layer, "double" if dbl[c] else "pass", chains[c],
                                   2 * k, int(counts[c]))
            # source of a pass-through edge: first holder with a +1 sign
            first_src = np.take_along_axis(holders[:, None, :],
                                           np.argmax(plus, axis=2)[:, :, None], axis=2)[:, :, 0]
            if t < L - 1:
                new = np.take_along_axis(slabs, at, axis=1)
                for c in range(len(chains)):
                    rows = new[c]
                    if dbl[c]:
                        edges.add(layer, np.repeat(rows, 2), np.tile(holders[c], 2))
                    else:
                        edges.add(layer, rows, first_src[c, at[c]])
                holders = new
            else:
                taps = [slabs[c][valid[c]] for c in range(len(chains))]
                tap_src = [first_src[c][valid[c]] for c in range(len(chains))]
                tap_used = [np.zeros(len(tp), dtype=bool) for tp in taps]
                for c in range(len(chains)):
                    tap_used[c][:2] = True
                tap_holders = holders

        # selection
        layer = blk.selection_layer
        B = random.layers[layer]
        chain_of = {(j, q, pol): c for c, (j, q, pol) in enumerate(chains)}
        sel_rows, sel_cols = [], []
        for r, row in enumerate(blk.selections):
            if not row:
                continue
            cand = np.concatenate([taps[c] for c in range(len(chains))])
            offsets = np.cumsum([0] + [len(tp) for tp in taps])
            rs = np.asarray(B[np.full(cand.size, r), cand])
            for sel in row:
                for pol in (1, -1):
                    c = chain_of[(sel.input_index, sel.power, pol)]
                    want = sel.sign * pol
                    seg = rs[offsets[c]:offsets[c + 1]]
                    hit = np.flatnonzero(seg == want)
                    unit_stats.append({"layer": layer, "kind": "select",
                                       "unit": [r, sel.input_index, sel.power, pol],
                                       "examined": int(seg.size), "matches": int(hit.size)})
                    if hit.size == 0:
                        raise EmbedFailure(layer, "select",
                                           (r, sel.input_index, sel.power, pol),
                                           int(seg.size), 0)
                    tap_used[c][hit[0]] = True
                    sel_rows.append(r)
                    sel_cols.append(int(taps[c][hit[0]]))
        edges.add(layer, sel_rows, sel_cols)
        last_layer = s + L
        for c in range(len(chains)):
            rows, srcs = taps[c][tap_used[c]], tap_src[c][tap_used[c]]
            if dbl[c]:
                edges.add(last_layer, np.repeat(rows, 2), np.tile(tap_holders[c], rows.size))
            else:
                edges.add(last_layer, rows, srcs)
        inputs = np.arange(blk.output_width)
    return edges.masks(random), tuple(unit_stats)


def embed_plan(plan: GadgetPlan, random: BinaryNetwork, config: EmbedConfig, *,
               raise_on_failure: bool = True) -> EmbedResult:
    """Greedy layerwise search for masks reproducing ``plan`` inside ``random``.

    Raises ``EmbedFailure`` at the first unit without a matching candidate,
    or returns an unsuccessful result when ``raise_on_failure`` is false.
    """
    k = int(config.k)
    _check_host(plan, random, k)
    try:
        masks, unit_stats = _embed(plan, random, k)
    except EmbedFailure as exc:
        if raise_on_failure:
            raise
        return EmbedResult(None, False, k, int(config.seed), (), exc)
    return EmbedResult(masks, True, k, int(config.seed), unit_stats)


def diamond_match_frequency(samples: int, seed: int) -> float:
    """Fraction of independent networks whose fixed 2x2 block is all +1."""
    if samples < 1:
        raise ValueError("samples must be positive")
    seeds = np.array([substream_seed(seed, "diamond", i) for i in range(samples)],
                     dtype=np.uint64)
    rows = np.array([0, 0, 1, 1])
    cols = np.array([0, 1, 0, 1])
    signs = hashed_signs(seeds[:, None], 1, rows[None, :], cols[None, :])
    return float(np.mean((signs == 1).all(axis=1)))


# --------------------------------------------------------------------------
# Monte Carlo failure rate
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FailureRate:
    d: int
    l: int
    W: int
    delta: float | None
    k: int
    trials: int
    failures: int
    ci_low: float
    ci_high: float
    analytic_bound: float

    @property
    def rate(self) -> float:
        return self.failures / self.trials

    CSV_COLUMNS = ("d", "l", "W", "delta", "k", "trials", "failures",
                   "ci_low", "ci_high", "analytic_bound")

    def csv_row(self) -> list[str]:
        return [str(self.d), str(self.l), str(self.W),
                "" if self.delta is None else repr(float(self.delta)),
                str(self.k), str(self.trials), str(self.failures),
                f"{self.ci_low:.6f}", f"{self.ci_high:.6f}", f"{self.analytic_bound:.6g}"]

    def to_json(self) -> dict:
        return dict(zip(self.CSV_COLUMNS, self.csv_row()))


def _count_failures(plan: GadgetPlan, k: int, seed: int, trials) -> int:
    widths = plan.embedding_widths(k)
    cfg = EmbedConfig(0.5, k, seed)
    failures = 0
    for t in trials:
        net = sample_binary(widths, substream_seed(seed, "trial", t))
        if not embed_plan(plan, net, cfg, raise_on_failure=False).success:
            failures += 1
    return failures


def failure_rate_mc(plan: GadgetPlan, k: int, trials: int, seed: int, *,
                    delta: float | None = None, jobs: int = 1) -> FailureRate:
    """Empirical embedding failure rate with a 95% Clopper-Pearson interval."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if k < 1:
        raise ValueError("k must be at least 1")
    if jobs > 1 and trials > 1:
        chunks = [range(i, trials, jobs) for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            failures = sum(pool.map(_count_failures, [plan] * jobs, [k] * jobs,
                                    [seed] * jobs, chunks))
    else:
        failures = _count_failures(plan, k, seed, range(trials))
    ci = stats.binomtest(failures, trials).proportion_ci(0.95, method="exact")
    d = max(plan.target_widths)
    l = len(plan.blocks)
    return FailureRate(d, l, plan.weight_bound, delta, k, trials, failures,
                       float(ci.low), float(ci.high),
                       analytic_failure_bound(d, l, plan.weight_bound, k))


# --------------------------------------------------------------------------
# End-to-end pipeline
# --------------------------------------------------------------------------

def embed_with_retries(plan: GadgetPlan, k: int, seed: int, *, delta: float = 0.5,
                       scale=Fraction(1), max_retries: int = MAX_RETRIES):
    """Sample hosts from the ``sampling`` substream until ``plan`` embeds.

    Returns the host network (carrying ``scale`` on its last layer) and the
    successful ``EmbedResult``; raises the last ``EmbedFailure`` otherwise.
    """
    if max_retries < 1:
        raise ValueError("max_retries must be at least 1")
    widths = plan.embedding_widths(k)
    for attempt in range(max_retries):
        net_seed = substream_seed(seed, "sampling", attempt)
        host = sample_binary(widths, net_seed).with_scale(scale)
        result = embed_plan(plan, host, EmbedConfig(delta, k, net_seed),
                            raise_on_failure=False)
        if result.success:
            return host, replace(result, attempts=attempt + 1)
    result.failure.attempts = max_retries
    raise result.failure


@dataclass(frozen=True, eq=False)
class PipelineResult:
    target: TargetNetwork
    epsilon: Fraction
    delta: float
    seed: int
    precision: PrecisionSpec
    truncated: TargetNetwork
    truncation: TruncationReport
    integer: object
    construction: ConstructionResult
    k: int
    attempts: int
    binary: BinaryNetwork
    masks: MaskSet
    embedding: EmbedResult
    certificates: dict = field(default_factory=dict)

    @property
    def last_layer_scale(self) -> Fraction:
        return self.binary.last_layer_scale

    @property
    def formula_scale(self) -> Fraction:
        """``(eps / (d^2 l))**l``; equals the used scale when ``d^2 l / eps`` is a power of 10."""
        d, l = self.precision.width, self.precision.depth
        return (self.epsilon / (d * d * l)) ** l


def strong_lth_pipeline(f: TargetNetwork, eps, delta: float, seed: int, *,
                        k: int | None = None, max_retries: int = MAX_RETRIES,
                        verify_points=None) -> PipelineResult:
    """Truncate, rescale, plan, sample and embed; certify the result.

    The digit count ``p`` is the smallest with ``10**-p <= eps/(d^2 l)``
    and the final binary layer carries ``10**(-p l)``, the exact factor
    removed by the integer rescaling.  On failure the whole host network is
    resampled from the next ``sampling`` substream, up to ``max_retries``
    attempts.
    """
    from .verify import verify_exact

    eps = as_fraction(eps)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    d, l = f.max_width, f.depth
    spec = required_precision(d, l, eps)
    truncated, report = truncate_network(f, spec)
    integer = scale_to_integer(truncated, spec.p)
    construction = build_network(integer)
    plan = construction.plan
    if k is None:
        k = min_width_factor(d, l, plan.weight_bound, delta)
    host, result = embed_with_retries(plan, k, seed, delta=delta, scale=integer.output_scale,
                                      max_retries=max_retries)
    masks = prune_dead(result.masks)
    exact = verify_exact(integer, host, masks, points=verify_points,
                         seed=substream_seed(seed, "verify"))
    return PipelineResult(f, eps, delta, seed, spec, truncated, report, integer,
                          construction, k, result.attempts, host, masks, result,
                          {"truncation": report, "exact": exact})
