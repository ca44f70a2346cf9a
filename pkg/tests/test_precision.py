from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from binary_lottery.network import TargetNetwork, forward_eval
from binary_lottery.precision import (PrecisionSpec, required_precision, scale_to_integer,
                                      sqrt_upper, truncate_network, truncate_scalar)
from binary_lottery.verify import sample_unit_ball

from conftest import naive_forward, rational_points

unit_fractions = st.fractions(min_value=-1, max_value=1, max_denominator=10**9)


def random_target(rng, widths):
    layers = []
    for a, b in zip(widths[:-1], widths[1:]):
        w = rng.standard_normal((b, a))
        layers.append(w / np.linalg.norm(w) * rng.uniform(0.3, 0.999))
    return TargetNetwork(tuple(layers))


@pytest.mark.parametrize("w,p,want", [
    ("0.123456", 3, Fraction(123, 1000)),
    ("-0.9999", 2, Fraction(-99, 100)),
    ("0.5", 4, Fraction(1, 2)),
    ("1", 0, Fraction(1)),
])
def test_truncate_scalar_examples(w, p, want):
    assert truncate_scalar(w, p) == want


def test_truncate_scalar_rejects_large():
    with pytest.raises(ValueError):
        truncate_scalar(Fraction(3, 2), 2)
    with pytest.raises(ValueError):
        truncate_scalar("0.5", -1)


@given(unit_fractions, st.integers(0, 12))
def test_truncation_error_and_idempotence(w, p):
    t = truncate_scalar(w, p)
    assert abs(w - t) <= Fraction(1, 10**p)
    assert abs(t) <= abs(w)
    assert t == 0 or (t > 0) == (w > 0)
    assert truncate_scalar(t, p) == t
    assert (t * 10**p).denominator == 1


@pytest.mark.parametrize("d,l,eps,p", [(2, 1, "0.01", 3), (1, 1, "0.1", 1),
                                       (10, 10, "0.001", 6)])
def test_required_precision_examples(d, l, eps, p):
    spec = required_precision(d, l, eps)
    assert spec.p == p and spec.derived


@given(st.integers(1, 30), st.integers(1, 6),
       st.fractions(min_value=Fraction(1, 10**6), max_value=Fraction(99, 100)))
def test_required_precision_is_minimal(d, l, eps):
    p = required_precision(d, l, eps).p
    target = eps / (d * d * l)
    assert Fraction(1, 10**p) <= target
    assert p == 0 or Fraction(1, 10 ** (p - 1)) > target


def test_precision_spec_validation():
    with pytest.raises(ValueError):
        PrecisionSpec(-1, Fraction(1, 10))
    with pytest.raises(ValueError):
        PrecisionSpec(2, 0)


@given(st.fractions(min_value=0, max_value=10**6, max_denominator=10**6))
def test_sqrt_upper_is_an_upper_bound(q):
    r = sqrt_upper(q)
    assert r * r >= q
    assert float(r) - float(q) ** 0.5 <= 1e-12 * max(1.0, float(q) ** 0.5)


def test_sqrt_upper_exact_on_squares():
    assert sqrt_upper(Fraction(9, 49)) == Fraction(3, 7)
    assert sqrt_upper(0) == 0


def test_truncate_network_single_weight():
    f = TargetNetwork(([["0.123456"]],))
    g, rep = truncate_network(f, required_precision(1, 1, "0.001"))
    assert g.layers[0][0, 0] == Fraction(123, 1000)
    assert rep.certified_bound == Fraction(456, 10**6)
    assert rep.certified_bound <= Fraction(1, 1000)


def test_truncate_network_already_representable():
    f = TargetNetwork(([["0.25", "-0.5"]], [["0.75"]]))
    _, rep = truncate_network(f, PrecisionSpec(2, Fraction(1, 10)))
    assert rep.certified_bound == 0


def test_truncate_network_norm_precondition():
    with pytest.raises(ValueError):
        truncate_network(TargetNetwork(([[2.0]],)), PrecisionSpec(2, Fraction(1, 10)))


@pytest.mark.parametrize("seed", range(3))
def test_certified_bound_dominates_sampled_error(seed):
    rng = np.random.default_rng(seed)
    f = random_target(rng, [2, 2, 2])
    spec = required_precision(2, 2, "0.01")
    g, rep = truncate_network(f, spec)
    assert rep.certified_bound <= Fraction(1, 100)
    assert rep.certified_bound >= max(rep.layer_error)
    x = sample_unit_ball(10_000, 2, seed)
    err = np.max(np.abs(forward_eval(f, x, "float") - forward_eval(g, x, "float")))
    assert err <= float(rep.certified_bound)


@settings(max_examples=25)
@given(st.integers(0, 2**32), st.integers(1, 6), st.integers(1, 4))
def test_certified_bound_soundness_property(seed, d, l):
    rng = np.random.default_rng(seed)
    widths = [int(v) for v in rng.integers(1, d + 1, size=l + 1)]
    f = random_target(rng, widths)
    spec = required_precision(max(widths), l, "0.05")
    g, rep = truncate_network(f, spec)
    assert rep.certified_bound <= Fraction(1, 20)
    x = sample_unit_ball(10_000, widths[0], seed)
    err = np.max(np.abs(forward_eval(f, x, "float") - forward_eval(g, x, "float")))
    assert err <= float(rep.certified_bound) + 1e-12


@pytest.mark.parametrize("kind", ["neuron", "layer"])
def test_single_neuron_and_single_layer_specialisations(kind):
    rng = np.random.default_rng(5)
    d, eps = 5, Fraction(1, 100)
    rows = 1 if kind == "neuron" else d
    w = rng.standard_normal((rows, d))
    f = TargetNetwork((w / np.linalg.norm(w) * 0.999,))
    need = Fraction(d if kind == "neuron" else d * d) / eps
    p = 0
    while 10**p < need:
        p += 1
    _, rep = truncate_network(f, PrecisionSpec(p, eps))
    assert rep.certified_bound <= eps


def test_scale_to_integer_examples():
    n = scale_to_integer(TargetNetwork(([["0.13"]],)), 2)
    assert n.layers[0][0, 0] == 13 and n.output_scale == Fraction(1, 100)
    n = scale_to_integer(TargetNetwork(([["0.5"]], [["0.5"]])), 1)
    assert n.layers[0][0, 0] == 5 and n.layers[1][0, 0] == 5
    assert n.output_scale == Fraction(1, 100)


def test_scale_to_integer_rejects_extra_digits():
    with pytest.raises(ValueError):
        scale_to_integer(TargetNetwork(([["0.125"]],)), 2)


@given(st.integers(0, 2**32), st.data())
def test_scale_to_integer_round_trip(seed, data):
    rng = np.random.default_rng(seed)
    f = random_target(rng, [3, 2, 3, 1])
    g, _ = truncate_network(f, PrecisionSpec(2, Fraction(1, 10)))
    n = scale_to_integer(g, 2)
    for w in n.layers:
        assert max(abs(v) for v in w.flat) <= 100
    back = [np.vectorize(lambda v: Fraction(v, 100), otypes=[object])(w) for w in n.layers]
    assert all(np.array_equal(a, b) for a, b in zip(back, g.layers))
    x = data.draw(rational_points(3))
    assert list(forward_eval(n, x)) == list(forward_eval(g, x)) == naive_forward(g.layers, x)


def test_report_json():
    _, rep = truncate_network(TargetNetwork(([["0.123456"]],)), required_precision(1, 1, "0.001"))
    doc = rep.to_json()
    assert doc["certified_bound"] == "57/125000" and doc["within_epsilon"]
