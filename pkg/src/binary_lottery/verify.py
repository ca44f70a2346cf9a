"""Certificates for exact, uniform-epsilon and sign-level agreement, plus size accounting."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .network import (BinaryNetwork, IntegerNetwork, MaskSet, TargetNetwork, as_fraction,
                      forward_eval, masked_eval)
from .precision import TruncationReport

__all__ = [
    "Certificate",
    "Realisation",
    "SizeReport",
    "random_rational_points",
    "grid_points",
    "default_points",
    "sample_unit_ball",
    "snap_rational",
    "verify_exact",
    "certify_epsilon",
    "verify_sign_agreement",
    "size_accounting",
    "table_formulas",
]

GRID_MAX_DIM = 6
DEFAULT_POINTS = 100
RANDOM_DENOMINATOR = 10**6
SNAP_DIGITS = 12
# Slack allowed for float64 round-off in the sampled (non-certifying) check.
FLOAT_SLACK = 2.0**-30


def _fmt(v) -> str | None:
    if v is None:
        return None
    if isinstance(v, Fraction):
        return str(v)
    return repr(float(v))


@dataclass(frozen=True, eq=False)
class Certificate:
    kind: str
    passed: bool
    bound: Fraction = Fraction(0)
    evidence: dict = field(default_factory=dict)
    sample_count: int = 0
    max_observed_error: Fraction | float | None = None
    witness: tuple | None = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "bound": str(self.bound),
            "evidence": self.evidence,
            "samples": {"count": self.sample_count,
                        "max_observed_error": _fmt(self.max_observed_error)},
            "witness": None if self.witness is None else [str(v) for v in self.witness],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


class Realisation(NamedTuple):
    """A masked binary network with its integer-path certificate."""

    binary: BinaryNetwork
    masks: MaskSet
    exact: Certificate


# --------------------------------------------------------------------------
# Point sets
# --------------------------------------------------------------------------

def random_rational_points(n: int, d0: int, seed: int = 0,
                           max_denominator: int = RANDOM_DENOMINATOR) -> list[list[Fraction]]:
    """Rationals ``a/b`` with ``1 <= b <= max_denominator`` and ``|a/b| <= 1``."""
    rng = np.random.default_rng(seed)
    den = rng.integers(1, max_denominator + 1, size=(n, d0))
    num = rng.integers(-den, den + 1)
    return [[Fraction(int(a), int(b)) for a, b in zip(rn, rd)] for rn, rd in zip(num, den)]


def grid_points(d0: int) -> list[list[Fraction]]:
    return [[Fraction(v) for v in p] for p in itertools.product((-1, 0, 1), repeat=d0)]


def default_points(d0: int, seed: int = 0) -> list[list[Fraction]]:
    pts = random_rational_points(DEFAULT_POINTS, d0, seed)
    if d0 <= GRID_MAX_DIM:
        pts += grid_points(d0)
    return pts


def sample_unit_ball(n: int, d0: int, seed: int = 0) -> np.ndarray:
    """Uniform points in the closed Euclidean unit ball, rounded toward the origin."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, d0))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.random(n) ** (1.0 / d0)
    x = g * r[:, None]
    scale = 10.0**SNAP_DIGITS
    # truncation toward zero keeps snapped points inside the ball
    return np.trunc(x * scale) / scale


def snap_rational(x: np.ndarray, digits: int = SNAP_DIGITS) -> np.ndarray:
    """Exact rationals ``round(x * 10**digits) / 10**digits``, stored as objects."""
    scale = 10**digits
    num = np.rint(np.asarray(x, dtype=np.float64) * scale).astype(np.int64)
    return np.vectorize(lambda v: Fraction(int(v), scale), otypes=[object])(num)


# --------------------------------------------------------------------------
# Exact equality
# --------------------------------------------------------------------------

def verify_exact(target: IntegerNetwork, binary: BinaryNetwork, masks: MaskSet,
                 points=None, *, seed: int = 0) -> Certificate:
    """Exact rational equality of ``target`` and the masked binary network.

    If the two networks carry different last-layer scales the masked output
    is multiplied by their ratio (a positive constant), which is recorded in
    the evidence.  The pipeline's scales agree and the ratio is 1.
    """
    if binary.last_layer_scale == 0:
        raise ValueError("binary network has a zero last-layer scale")
    if binary.widths[0] != target.widths[0] or binary.widths[-1] != target.widths[-1]:
        raise ValueError(f"input/output widths differ: {target.widths} vs {binary.widths}")
    ratio = target.output_scale / binary.last_layer_scale
    pts = default_points(target.widths[0], seed) if points is None else [
        [as_fraction(v) for v in p] for p in points]
    want = forward_eval(target, pts, "rational")
    got = masked_eval(binary, masks, pts, "rational")
    evidence = {"points": len(pts), "output_scale_ratio": str(ratio),
                "grid": target.widths[0] <= GRID_MAX_DIM and points is None}
    for p, a, b in zip(pts, want, got):
        if any(x != y * ratio for x, y in zip(a, b)):
            evidence["expected"] = [str(v) for v in a]
            evidence["observed"] = [str(v * ratio) for v in b]
            return Certificate("exact", False, Fraction(0), evidence, len(pts), None, tuple(p))
    return Certificate("exact", True, Fraction(0), evidence, len(pts), Fraction(0))


# --------------------------------------------------------------------------
# Uniform epsilon
# --------------------------------------------------------------------------

def certify_epsilon(f: TargetNetwork, realisation, report: TruncationReport | None = None, *,
                    samples: int = 10_000, exact_samples: int = 50,
                    seed: int = 0, backend: str = "float") -> Certificate:
    """Uniform error certificate over the unit ball.

    The masked binary network equals the truncated integer path exactly, so
    the truncation bound is the only error term and holds for every point of
    the ball.  Sampled errors are attached as corroboration: the first
    ``exact_samples`` points are compared exactly, the rest in float64.
    With ``backend="rational"`` every sample is compared exactly.
    """
    if backend not in ("float", "rational"):
        raise ValueError(f"unknown backend {backend!r}")
    certs = getattr(realisation, "certificates", None)
    if certs is not None:
        exact = certs.get("exact")
        report = report if report is not None else certs.get("truncation")
    else:
        exact = realisation.exact
    if exact is None or exact.kind != "exact" or not exact.passed:
        raise ValueError("integer-path exact certificate missing or failed")
    if report is None:
        raise ValueError("truncation report missing")
    binary, masks = realisation.binary, realisation.masks
    bound = report.certified_bound
    x = sample_unit_ball(samples, f.widths[0], seed)
    exact_max = Fraction(0)
    n_exact = samples if backend == "rational" else min(exact_samples, samples)
    if n_exact:
        xq = snap_rational(x[:n_exact])
        fe = forward_eval(f, xq, "rational")
        ge = masked_eval(binary, masks, xq, "rational")
        exact_max = max((abs(a - b) for a, b in zip(fe.flat, ge.flat)), default=Fraction(0))
    float_max = 0.0
    if samples and backend == "float":
        ff = forward_eval(f, x, "float")
        gf = masked_eval(binary, masks, x, "float")
        float_max = float(np.max(np.abs(ff - gf)))
    passed = exact_max <= bound and float_max <= float(bound) + FLOAT_SLACK
    evidence = {
        "source": "truncation",
        "p": report.p,
        "epsilon": str(report.epsilon),
        "layer_frobenius_error_upper": [str(e) for e in report.layer_error],
        "binary_stage": "exact",
        "exact_samples": n_exact,
        "exact_max_error": str(exact_max),
        "float_samples": samples if backend == "float" else 0,
        "float_max_error": repr(float_max),
        "within_epsilon": bound <= report.epsilon,
    }
    return Certificate("epsilon-uniform", passed, bound, evidence, samples,
                       max(float(exact_max), float_max))


# --------------------------------------------------------------------------
# Sign agreement
# --------------------------------------------------------------------------

def _sign(v: Fraction) -> int:
    return (v > 0) - (v < 0)


def verify_sign_agreement(target: TargetNetwork, construction, points, *,
                          head: str = "relu") -> Certificate:
    """Exact sign agreement between a classifier target and a construction.

    With ``head="relu"`` signs are read after the final ReLU, so they lie in
    ``{0, 1}`` and ``sign(0) = 0``.  ``head="linear"`` reads the pre-activation
    of the output layer instead.
    """
    if head not in ("relu", "linear"):
        raise ValueError("head must be 'relu' or 'linear'")
    relu = head == "relu"
    pts = [[as_fraction(v) for v in p] for p in points]
    want = forward_eval(target, pts, "rational", relu_output=relu)
    got = masked_eval(construction.binary, construction.masks, pts, "rational",
                      relu_output=relu)
    zeros = 0
    for p, a, b in zip(pts, want, got):
        sa, sb = [_sign(v) for v in a], [_sign(v) for v in b]
        zeros += sa.count(0)
        if sa != sb:
            return Certificate("sign-agreement", False, Fraction(0),
                               {"head": head, "expected": sa, "observed": sb},
                               len(pts), None, tuple(p))
    return Certificate("sign-agreement", True, Fraction(0),
                       {"head": head, "zero_outputs": zeros}, len(pts), Fraction(0))


# --------------------------------------------------------------------------
# Size accounting
# --------------------------------------------------------------------------

def table_formulas(d: int, l: int, eps, delta: float) -> dict:
    """Width, depth and parameter formulas with unit constants and natural logs."""
    e, dl = float(as_fraction(eps)), float(d * l)
    ln = math.log
    m = min(e, delta)
    ours_log = ln(dl / (e * delta))
    return {
        "malach": {"width": d**2 * l**2 / e**2, "depth": 2 * l,
                   "parameters": d**2 * l**3 / e**2},
        "orseau": {"width": d**2 * ln(dl / e), "depth": 2 * l,
                   "parameters": d**2 * l * ln(dl / e)},
        "pensia": {"width": d * ln(dl / m), "depth": 2 * l,
                   "parameters": dl * ln(dl / m)},
        "diffenderfer": {"width": l * d**1.5 / e + dl * ln(dl / delta), "depth": 2 * l,
                         "parameters": l**2 * d**1.5 / e + l * dl * ln(dl / delta)},
        "ours": {"width": d * ours_log**2, "depth": l * ln(dl / e),
                 "parameters": dl * ours_log**3},
    }


def _base2_formulas(d: int, l: int, eps, delta: float, W: int) -> dict:
    """Base-2 width/depth bounds, in terms of ``eps`` and of the weight bound ``W``."""
    a = d * d * l / float(as_fraction(eps))
    lw = math.log2(max(W, 2))
    factor_eps = math.log2(a) * math.log2(d * l * math.log2(a) ** 2 / delta)
    factor_w = lw * math.log2(d * l * lw**2 / delta)
    return {
        "ours_eps": {"width": d * factor_eps, "depth": l * math.log2(a),
                     "width_factor": factor_eps},
        "ours_weight_bound": {"width": d * factor_w, "depth": l * lw, "width_factor": factor_w},
    }


@dataclass(frozen=True)
class SizeReport:
    measured: dict
    formulas: dict
    ratios: dict

    def to_json(self) -> dict:
        return {"measured": self.measured, "formulas": self.formulas, "ratios": self.ratios}

    CSV_COLUMNS = ("max_width", "depth", "parameters", "kept_weights",
                   "max_layer_ratio", "width_over_construction_formula")

    def csv_row(self) -> list[str]:
        m = self.measured
        return [str(m["max_width"]), str(m["depth"]), str(m["parameters"]),
                str(m["kept_weights"]), f"{m['max_layer_ratio']:.6g}",
                f"{self.ratios['width_over_construction_formula']:.6g}"]


def size_accounting(result, d: int | None = None, l: int | None = None, eps=None,
                    delta: float | None = None) -> SizeReport:
    """Measured sizes next to the evaluated formulas.

    ``result`` is a deterministic ``ConstructionResult`` or a pipeline result
    (anything with ``binary``, ``masks`` and a plan).  Per-block hidden width
    is compared against ``max(d_{i-1}, d_i)`` of the target layer it encodes.
    """
    plan = result.plan if hasattr(result, "plan") else result.construction.plan
    binary, masks = result.binary, result.masks
    tw = plan.target_widths
    d = max(tw) if d is None else d
    l = len(plan.blocks) if l is None else l
    widths = binary.widths
    params = sum(a * b for a, b in zip(widths[:-1], widths[1:]))
    if params != binary.parameter_count:
        raise AssertionError("parameter count disagrees with width products")
    layer_ratios = []
    for blk in plan.blocks:
        hidden = max(widths[blk.first_layer + 1:blk.selection_layer + 1])
        layer_ratios.append(hidden / max(blk.input_width, blk.output_width))
    measured = {
        "widths": list(widths), "max_width": binary.max_width, "depth": binary.depth,
        "parameters": params, "kept_weights": masks.nnz,
        "target_widths": list(tw), "weight_bound": plan.weight_bound,
        "width_factor": getattr(result, "k", 1),
        "layer_width_ratios": layer_ratios, "max_layer_ratio": max(layer_ratios),
    }
    W = plan.weight_bound
    k = getattr(result, "k", 1)
    construction = {
        "width": k * 4 * max(tw[:-1]) * (W.bit_length()),
        "depth": l * (max(1, W.bit_length() - 1) + 2),
    }
    formulas = {"construction": construction}
    ratios = {"width_over_construction_formula": binary.max_width / construction["width"],
              "depth_over_construction_formula": binary.depth / construction["depth"]}
    if eps is not None and delta is not None:
        formulas.update(table_formulas(d, l, eps, delta))
        formulas.update(_base2_formulas(d, l, eps, delta, W))
        for name in ("ours", "ours_eps", "ours_weight_bound"):
            ratios[f"width_over_{name}"] = binary.max_width / formulas[name]["width"]
    return SizeReport(measured, formulas, ratios)
