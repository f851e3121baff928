import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridcr import _kernels_py as py
from hybridcr import kernels

cy = pytest.importorskip("hybridcr._kernels")

coord = st.floats(-100, 100)
angle = st.floats(-math.pi, math.pi)
speed = st.floats(1.2, 1.8)
rate = st.floats(-0.5, 0.5)


@given(coord, coord, angle, speed, rate)
def test_rk4_unicycle_identical(x, y, th, v, w):
    assert cy.rk4_unicycle(x, y, th, v, w, 0.01) == py.rk4_unicycle(x, y, th, v, w, 0.01)


@given(st.lists(st.tuples(coord, coord, angle, speed, rate), min_size=1, max_size=12))
def test_rk4_batch_identical(rows):
    cols = [np.array(c, dtype=np.float64) for c in zip(*rows)]
    a = [c.copy() for c in cols[:3]]
    b = [c.copy() for c in cols[:3]]
    cy.rk4_batch(a[0], a[1], a[2], cols[3], cols[4], 0.01)
    py.rk4_batch(b[0], b[1], b[2], cols[3], cols[4], 0.01)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)
    assert np.all((a[2] > -math.pi) & (a[2] <= math.pi))


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.5, 5), angle)
def test_limit_cycle_terms_identical(px, py_, r, th):
    assert cy.limit_cycle_terms(px, py_, r, th) == py.limit_cycle_terms(px, py_, r, th)


@given(coord, coord, coord, coord, angle)
def test_goal_terms_identical(px, py_, gx, gy, th):
    assert cy.goal_terms(px, py_, gx, gy, th) == py.goal_terms(px, py_, gx, gy, th)


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=0, max_size=15),
       st.floats(0.1, 5))
def test_close_pairs_identical(pts, radius):
    x = np.array([p[0] for p in pts], dtype=np.float64)
    y = np.array([p[1] for p in pts], dtype=np.float64)
    assert cy.close_pairs(x, y, radius) == py.close_pairs(x, y, radius)


@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 2**31))
def test_min_distance_series_identical(T, n, seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(T, n)), rng.normal(size=(T, n))
    for u, v in zip(cy.min_distance_series(X, Y), py.min_distance_series(X, Y)):
        assert np.array_equal(np.asarray(u), np.asarray(v))


def test_dispatcher_prefers_compiled_backend():
    assert kernels.BACKEND == "cython"


def test_pure_flag_selects_fallback():
    code = "from hybridcr import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, HYBRIDCR_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    assert out.stdout.strip() == "python"
