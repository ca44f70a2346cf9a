"""Shared strategies, oracles and the acceptance summary hook."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings, strategies as st

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def relu(v):
    return v if v > 0 else 0 * v


def naive_forward(layers, x, scale=Fraction(1), relu_output=True):
    """Pure-Python Fraction evaluation, independent of the library's backends."""
    h = [Fraction(v) for v in x]
    for i, w in enumerate(layers):
        w = [[Fraction(v) for v in row] for row in np.asarray(w, dtype=object).tolist()]
        z = [sum((a * b for a, b in zip(row, h)), Fraction(0)) for row in w]
        if i == len(layers) - 1:
            z = [v * scale for v in z]
        h = [relu(v) for v in z] if (i < len(layers) - 1 or relu_output) else z
    return h


@st.composite
def integer_networks(draw, max_width=4, max_depth=2, max_weight=20):
    depth = draw(st.integers(1, max_depth))
    widths = draw(st.lists(st.integers(1, max_width), min_size=depth + 1, max_size=depth + 1))
    layers = []
    for i in range(depth):
        flat = draw(st.lists(st.integers(-max_weight, max_weight),
                             min_size=widths[i + 1] * widths[i],
                             max_size=widths[i + 1] * widths[i]))
        layers.append(np.array(flat, dtype=object).reshape(widths[i + 1], widths[i]))
    return layers


@st.composite
def rational_points(draw, dim, bound=1, max_den=50):
    out = []
    for _ in range(dim):
        den = draw(st.integers(1, max_den))
        num = draw(st.integers(-bound * den, bound * den))
        out.append(Fraction(num, den))
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_acceptance():
    def record(number: int, passed: bool, detail: str):
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        print(ACCEPTANCE_LINES[-1])
    return record
