"""Decimal truncation of real networks and rescaling to integer networks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .network import IntegerNetwork, TargetNetwork, as_fraction

__all__ = [
    "PrecisionSpec",
    "TruncationReport",
    "truncate_scalar",
    "required_precision",
    "truncate_network",
    "scale_to_integer",
    "sqrt_upper",
]

# Significant digits kept when a square root has to be rounded up.
SQRT_DIGITS = 40


@dataclass(frozen=True)
class PrecisionSpec:
    """Digit count ``p`` together with the error target it was chosen for.

    ``derived`` is set when ``p`` is the smallest count with
    ``10**-p <= epsilon / (d**2 * l)``; hand-picked precisions leave it unset.
    """

    p: int
    epsilon: Fraction
    derived: bool = False
    width: int | None = None
    depth: int | None = None

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("digit count must be non-negative")
        object.__setattr__(self, "epsilon", as_fraction(self.epsilon))
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "epsilon": str(self.epsilon),
            "derived": self.derived,
            "width": self.width,
            "depth": self.depth,
            "digit_base": 10,
            "rule": "smallest p with 10^-p <= eps/(d^2 l)" if self.derived else "given",
        }


@dataclass(frozen=True)
class TruncationReport:
    p: int
    epsilon: Fraction
    layer_error_squared: tuple[Fraction, ...]
    layer_error: tuple[Fraction, ...]
    certified_bound: Fraction = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "certified_bound", sum(self.layer_error, Fraction(0)))

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "epsilon": str(self.epsilon),
            "layer_frobenius_error_squared": [str(e) for e in self.layer_error_squared],
            "layer_frobenius_error_upper": [str(e) for e in self.layer_error],
            "certified_bound": str(self.certified_bound),
            "within_epsilon": self.certified_bound <= self.epsilon,
        }


def sqrt_upper(q: Fraction, digits: int = SQRT_DIGITS) -> Fraction:
    """Smallest-ish rational upper bound on sqrt(q); exact for rational squares."""
    q = as_fraction(q)
    if q < 0:
        raise ValueError("negative argument")
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    # sqrt(n/d) = sqrt(n*d)/d, rounded up once `digits` significant digits are in.
    m = max(0, digits - len(str(math.isqrt(n * d))))
    scale = 10**m
    return Fraction(math.isqrt(n * d * scale * scale) + 1, d * scale)


def truncate_scalar(w, p: int) -> Fraction:
    """Truncate ``w`` toward zero to ``p`` decimal digits."""
    w = as_fraction(w)
    if abs(w) > 1:
        raise ValueError(f"|w| = {abs(w)} exceeds 1")
    if p < 0:
        raise ValueError("digit count must be non-negative")
    scale = 10**p
    mag = (abs(w).numerator * scale) // abs(w).denominator
    return Fraction(mag if w >= 0 else -mag, scale)


def required_precision(d: int, l: int, eps) -> PrecisionSpec:
    """Smallest ``p`` with ``10**-p <= eps / (d**2 l)``."""
    if d < 1 or l < 1:
        raise ValueError("width and depth must be at least 1")
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    need = Fraction(d * d * l) / eps
    p = 0
    while 10**p < need:
        p += 1
    return PrecisionSpec(p, eps, derived=True, width=d, depth=l)


def truncate_network(f: TargetNetwork, spec: PrecisionSpec) -> tuple[TargetNetwork, TruncationReport]:
    """Entrywise truncation plus a certified uniform error bound on the unit ball.

    With every ``||W_i||_F <= 1`` and truncation toward zero (which cannot
    increase a Frobenius norm) the error after layer ``i`` grows by at most
    ``||W_i - W^_i||_F``, so the sum of per-layer Frobenius errors bounds the
    output error for all ``||x|| <= 1``.
    """
    f.check_norm_bound()
    new_layers, err_sq, err = [], [], []
    for w in f.exact_layers():
        t = np.vectorize(lambda v: truncate_scalar(v, spec.p), otypes=[object])(w)
        e2 = sum(((a - b) ** 2 for a, b in zip(w.flat, t.flat)), Fraction(0))
        new_layers.append(t)
        err_sq.append(e2)
        err.append(sqrt_upper(e2))
    return TargetNetwork(tuple(new_layers)), TruncationReport(spec.p, spec.epsilon,
                                                              tuple(err_sq), tuple(err))


def scale_to_integer(g_p: TargetNetwork, p: int) -> IntegerNetwork:
    """Multiply every layer by ``10**p``; the last layer carries ``10**(-p*l)``."""
    c = 10**p
    layers = []
    for i, w in enumerate(g_p.exact_layers()):
        scaled = np.empty(w.shape, dtype=object)
        for idx, v in np.ndenumerate(w):
            s = v * c
            if s.denominator != 1:
                raise ValueError(f"layer {i} weight {v} has more than {p} decimal digits")
            scaled[idx] = s.numerator
        layers.append(scaled)
    bound = max(1, max(max((abs(v) for v in w.flat), default=0) for w in layers))
    return IntegerNetwork(tuple(layers), bound, Fraction(1, c**g_p.depth))
