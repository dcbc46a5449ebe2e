from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moreau_opt.polytope import (
    EmptySetError,
    Halfspace,
    Polyhedron,
    active_set,
    check_licq,
    check_slater,
    contains,
    normal_cone_coefficients,
    project,
    slater_margin,
)


def brute_projection(A, b, y):
    """Nearest point over every active-subset KKT candidate."""
    if np.all(A @ y <= b + 1e-12):
        return y.copy()
    best, best_d = None, np.inf
    for size in range(1, min(A.shape) + 1):
        for idx in itertools.combinations(range(A.shape[0]), size):
            As = A[list(idx)]
            lam, *_ = np.linalg.lstsq(As @ As.T, As @ y - b[list(idx)], rcond=None)
            x = y - As.T @ lam
            if np.all(lam >= -1e-10) and np.all(A @ x - b <= 1e-9):
                d = np.linalg.norm(x - y)
                if d < best_d:
                    best, best_d = x, d
    return best


@st.composite
def polyhedron_and_point(draw):
    m = draw(st.integers(1, 5))
    s = draw(st.integers(1, 5))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(s, m))
    center = rng.normal(size=m)
    b = A @ center + rng.uniform(0.0, 1.0, size=s)
    y = center + rng.normal(scale=2.0, size=m)
    return Polyhedron.from_constraints(A, b), y


def test_box_example():
    P = Polyhedron.from_constraints(np.vstack([np.eye(2), -np.eye(2)]), [1, 1, 1, 1])
    np.testing.assert_allclose(project(P, [3.0, 0.5]), [1.0, 0.5])
    np.testing.assert_allclose(project(P, [3.0, -4.0]), [1.0, -1.0])
    np.testing.assert_allclose(project(P, [0.2, 0.3]), [0.2, 0.3])


def test_halfspace_normalization():
    h = Halfspace.normalized([3.0, 4.0], 10.0)
    np.testing.assert_allclose(h.normal, [0.6, 0.8])
    assert h.offset == pytest.approx(2.0)
    with pytest.raises(ValueError):
        Halfspace.normalized([0.0, 0.0], 1.0)


def test_empty_set_detected():
    P = Polyhedron.from_constraints([[1.0], [-1.0]], [-1.0, -1.0])
    with pytest.raises(EmptySetError):
        project(P, [0.0])


@settings(max_examples=200, deadline=None)
@given(polyhedron_and_point())
def test_matches_enumeration_oracle(data):
    P, y = data
    np.testing.assert_allclose(project(P, y), brute_projection(P.A, P.b, y), atol=1e-8)


@settings(max_examples=200, deadline=None)
@given(polyhedron_and_point())
def test_idempotent_and_feasible(data):
    P, y = data
    x = project(P, y)
    assert contains(P, x, 1e-9)
    np.testing.assert_allclose(project(P, x), x, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(polyhedron_and_point(), st.integers(0, 2**31 - 1))
def test_nonexpansive(data, seed):
    P, y = data
    z = y + np.random.default_rng(seed).normal(size=y.size)
    assert np.linalg.norm(project(P, y) - project(P, z)) <= np.linalg.norm(y - z) + 1e-9


@settings(max_examples=200, deadline=None)
@given(polyhedron_and_point())
def test_kkt_multipliers(data):
    P, y = data
    x, lam = project(P, y, return_multipliers=True)
    assert np.all(lam >= -1e-10)
    np.testing.assert_allclose(P.A.T @ lam, y - x, atol=1e-9)
    slack = P.b - P.A @ x
    assert np.all(np.abs(lam * slack) <= 1e-8)
    nc = normal_cone_coefficients(P, x, y - x, 1e-9)
    assert nc is not None and np.all(nc >= 0)


def test_normal_cone_rejects_inward_vector():
    P = Polyhedron.from_constraints([[1.0, 0.0]], [0.0])
    assert normal_cone_coefficients(P, [0.0, 0.0], [-1.0, 0.0]) is None
    np.testing.assert_allclose(normal_cone_coefficients(P, [0.0, 0.0], [2.0, 0.0]), [2.0])


def test_active_set_and_licq():
    P = Polyhedron.from_constraints([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [0.0, 0.0, 0.0])
    assert set(active_set(P, [0.0, 0.0]).indices) == {0, 1, 2}
    assert not check_licq(P, [0.0, 0.0])
    assert check_licq(P, [0.0, -1.0])


def test_slater():
    slab = Polyhedron.from_constraints([[1.0], [-1.0]], [1.0, 1.0])
    assert check_slater(slab)
    flat = Polyhedron.from_constraints([[1.0], [-1.0]], [0.0, 0.0])
    assert not check_slater(flat)
    tri = Polyhedron.from_constraints([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], [1.0, 1.0, 0.0])
    assert slater_margin(tri) < 0
