import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from binary_lottery.construct import build_network, build_scalar, plan_network, worst_case_network
from binary_lottery.embed import (EmbedConfig, EmbedFailure, analytic_failure_bound,
                                  diamond_match_frequency, embed_plan, embed_with_retries,
                                  failure_rate_mc, min_width_factor, sample_binary,
                                  strong_lth_pipeline, substream_seed)
from binary_lottery.network import (BinaryNetwork, IntegerNetwork, TargetNetwork,
                                    forward_eval, masked_eval)
from binary_lottery.verify import random_rational_points, verify_exact

from conftest import integer_networks, rational_points


def test_substreams_are_distinct_and_stable():
    a = substream_seed(0, "sampling", 0)
    assert a == substream_seed(0, "sampling", 0)
    others = {substream_seed(0, "sampling", 1), substream_seed(0, "verify"),
              substream_seed(1, "sampling", 0)}
    assert a not in others and len(others) == 3


def test_sample_binary_deterministic_and_balanced():
    a = sample_binary((50, 300, 10), 11)
    b = sample_binary((50, 300, 10), 11)
    da, db = a.dense_layers(), b.dense_layers()
    assert all(np.array_equal(x, y) for x, y in zip(da, db))
    assert a.widths == (50, 300, 10)
    assert abs(da[0].mean()) < 0.02
    assert not np.array_equal(da[0], sample_binary((50, 300, 10), 12).dense_layers()[0])


def test_diamond_match_frequency():
    assert abs(diamond_match_frequency(20_000, 3) - 1 / 16) < 0.01


@pytest.mark.parametrize("d,l,W,delta,k", [(2, 1, 15, 0.1, 89), (1, 1, 5, 0.1, 62)])
def test_min_width_factor_values(d, l, W, delta, k):
    assert min_width_factor(d, l, W, delta) == k


def test_min_width_factor_unit_weight_bound():
    assert min_width_factor(1, 1, 1, 0.1) == min_width_factor(1, 1, 2, 0.1) == 36
    assert min_width_factor(1, 1, 2, 0.99) == 1


@given(st.integers(1, 8), st.integers(1, 4), st.integers(2, 1000),
       st.floats(1e-6, 0.99))
def test_min_width_factor_matches_loop_oracle(d, l, W, delta):
    count = d * l * math.log2(W) ** 2
    k = 1
    while count * (15 / 16) ** k > delta:
        k += 1
    got = min_width_factor(d, l, W, delta)
    assert got == k
    assert analytic_failure_bound(d, l, W, got) <= delta
    assert min_width_factor(d, l, W, delta / 2) >= got
    assert min_width_factor(d + 1, l, W, delta) >= got


def test_embed_config_validation():
    with pytest.raises(ValueError):
        EmbedConfig(0, 3)
    with pytest.raises(ValueError):
        EmbedConfig(0.1, 0)


def test_embed_scalar_at_computed_k():
    plan = build_scalar(5).plan
    k = min_width_factor(1, 1, 5, 0.1)
    assert k == 62
    host, result = embed_with_retries(plan, k, seed=0, delta=0.1)
    assert result.success and result.attempts >= 1
    pts = random_rational_points(50, 1, seed=1)
    out = masked_eval(host, result.masks, pts)
    assert [row[0] for row in out] == [max(5 * p[0], 0) for p in pts]


def test_embed_requires_matching_host_widths():
    plan = build_scalar(5).plan
    with pytest.raises(Exception):
        embed_plan(plan, sample_binary((1, 3, 1), 0), EmbedConfig(0.1, 2))


def test_small_k_usually_fails():
    plan = build_scalar(16).plan
    fails = 0
    for s in range(500):
        net = sample_binary(plan.embedding_widths(1), s)
        if not embed_plan(plan, net, EmbedConfig(0.5, 1), raise_on_failure=False).success:
            fails += 1
    assert fails >= 250


def test_adversarial_host_fails_at_first_unit():
    plan = build_scalar(5).plan
    k = 4
    widths = plan.embedding_widths(k)
    host = BinaryNetwork(tuple(-np.ones((b, a), dtype=np.int8)
                               for a, b in zip(widths[:-1], widths[1:])))
    with pytest.raises(EmbedFailure) as info:
        embed_plan(plan, host, EmbedConfig(0.1, k))
    exc = info.value
    assert exc.layer == 0 and exc.kind == "split"
    assert exc.examined == 4 * k and exc.matches < 2
    res = embed_plan(plan, host, EmbedConfig(0.1, k), raise_on_failure=False)
    assert not res.success and res.masks is None
    assert res.to_json()["failure"]["layer"] == 0


def test_retries_exhausted_report_attempts():
    plan = build_scalar(16).plan
    with pytest.raises(EmbedFailure) as info:
        embed_with_retries(plan, 1, seed=0, max_retries=3)
    assert info.value.attempts == 3


@settings(max_examples=15)
@given(integer_networks(max_width=2, max_depth=2, max_weight=15), st.integers(0, 2**32),
       st.data())
def test_embedding_soundness(layers, seed, data):
    f = IntegerNetwork(tuple(layers))
    plan = plan_network(f)
    host, result = embed_with_retries(plan, 40, seed)
    det = build_network(f)
    for _ in range(3):
        x = data.draw(rational_points(f.widths[0], bound=3))
        got = list(masked_eval(host, result.masks, x))
        assert got == list(masked_eval(det.binary, det.masks, x)) == list(forward_eval(f, x))
    assert result.masks.widths == host.widths


def test_embed_result_dumps_byte_identical():
    plan = build_network(IntegerNetwork(([[3, -2], [1, 7]],))).plan
    _, a = embed_with_retries(plan, 30, seed=9)
    _, b = embed_with_retries(plan, 30, seed=9)
    assert a.dumps() == b.dumps()


def test_failure_rate_rejects_zero_trials():
    plan = build_scalar(3).plan
    with pytest.raises(ValueError):
        failure_rate_mc(plan, 4, 0, 0)


def test_failure_rate_large_k_never_fails():
    plan = build_scalar(5).plan
    r = failure_rate_mc(plan, 200, 200, 0)
    assert r.failures == 0 and r.ci_low == 0


def test_failure_rate_ci_matches_beta_oracle():
    plan = build_scalar(16).plan
    r = failure_rate_mc(plan, 8, 100, 4)
    x, n = r.failures, r.trials
    low = 0.0 if x == 0 else stats.beta.ppf(0.025, x, n - x + 1)
    high = 1.0 if x == n else stats.beta.ppf(0.975, x + 1, n - x)
    assert r.ci_low == pytest.approx(low, abs=1e-9)
    assert r.ci_high == pytest.approx(high, abs=1e-9)
    assert r.rate == x / n
    assert len(r.csv_row()) == len(r.CSV_COLUMNS)


def test_failure_rate_non_increasing_in_k():
    plan = build_scalar(16).plan
    rates = [failure_rate_mc(plan, k, 100, 1).failures for k in (1, 4, 16, 64)]
    assert rates == sorted(rates, reverse=True)
    assert rates[0] == 100 and rates[-1] == 0


def test_failure_rate_parallel_matches_serial():
    plan = build_scalar(16).plan
    a = failure_rate_mc(plan, 12, 40, 2)
    b = failure_rate_mc(plan, 12, 40, 2, jobs=2)
    assert a == b


def test_pipeline_single_neuron():
    f = TargetNetwork(([["0.5"]],))
    res = strong_lth_pipeline(f, "1/10", 0.1, seed=0)
    assert res.certificates["exact"].passed
    assert res.last_layer_scale == Fraction(1, 10)
    assert Fraction(2, 5) <= masked_eval(res.binary, res.masks, [1])[0] <= Fraction(3, 5)


def test_pipeline_zero_network_prunes_everything():
    f = TargetNetwork(([["0", "0"]], [["0"]]))
    res = strong_lth_pipeline(f, "1/10", 0.1, seed=0)
    assert res.masks.nnz == 0
    assert res.certificates["exact"].passed


def test_pipeline_small_network():
    rng = np.random.default_rng(0)
    layers = []
    for a, b in [(3, 3), (3, 1)]:
        w = rng.standard_normal((b, a))
        layers.append(w / np.linalg.norm(w) * 0.9)
    f = TargetNetwork(tuple(layers))
    res = strong_lth_pipeline(f, "1/10", 0.1, seed=5)
    assert res.certificates["exact"].passed
    assert res.truncation.certified_bound <= Fraction(1, 10)
    assert res.k == min_width_factor(3, 2, res.construction.plan.weight_bound, 0.1)
    assert res.formula_scale == (Fraction(1, 10) / 18) ** 2
    x = random_rational_points(20, 3, seed=2)
    got = masked_eval(res.binary, res.masks, x)
    want = forward_eval(res.truncated, x)
    assert all(list(a) == list(b) for a, b in zip(got, want))
    assert verify_exact(res.integer, res.binary, res.masks, x).passed


def test_pipeline_rejects_bad_parameters():
    f = TargetNetwork(([["0.5"]],))
    with pytest.raises(ValueError):
        strong_lth_pipeline(f, 0, 0.1, 0)
    with pytest.raises(ValueError):
        strong_lth_pipeline(f, "1/10", 1.0, 0)


@pytest.mark.parametrize("d,l,W", [(1, 1, 3), (2, 1, 3), (1, 2, 15), (2, 1, 15)])
def test_bound_dominance(d, l, W):
    plan = plan_network(worst_case_network(d, l, W))
    k = min_width_factor(d, l, W, 0.1)
    r = failure_rate_mc(plan, k, 200, seed=d * 100 + l * 10 + W, delta=0.1)
    assert r.analytic_bound <= 0.1
    assert r.ci_high <= r.analytic_bound
