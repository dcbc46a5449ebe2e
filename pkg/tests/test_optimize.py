from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moreau_opt.optimize import BoxDomain, grid_search, nelder_mead


def bowl(c):
    c = np.asarray(c, dtype=float)
    return lambda x: float(np.sum((np.asarray(x) - c) ** 2))


def test_grid_example():
    dom = BoxDomain([0, 0], [1, 1])
    res = grid_search(bowl([0.25, 0.75]), dom, 5)
    np.testing.assert_allclose(res.x, [0.25, 0.75])
    assert res.evaluations == 25


def test_grid_tie_break_is_lexicographic():
    dom = BoxDomain([-1.0], [1.0])
    res = grid_search(lambda x: float(x[0] ** 2 - 1) ** 2, dom, 3)
    assert res.x[0] == -1.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_nelder_mead_bowl(a, b):
    dom = BoxDomain([-1, -1], [1, 1])
    res = nelder_mead(bowl([a, b]), [0.0, 0.0], dom)
    assert res.converged
    np.testing.assert_allclose(res.x, [a, b], atol=1e-4)


def test_polish_never_worse_than_grid():
    f = lambda x: float((x[0] - 0.3) ** 2 + 3 * (x[1] + 0.2) ** 2 + np.sin(5 * x[0]) * 0.01)
    dom = BoxDomain([-1, -1], [1, 1])
    g = grid_search(f, dom, 11)
    n = nelder_mead(f, g.x, dom)
    assert n.fun <= g.fun


def test_coupled_domain_is_one_dimensional():
    dom = BoxDomain([0, 0], [3, 3], [[1.0, -2.0]], [0.0])
    assert dom.reduced_dim == 1
    lo, hi = dom.reduced_box()
    for z in np.linspace(lo[0], hi[0], 7):
        x = dom.lift([z])
        assert dom.contains(x)
        assert x[0] == pytest.approx(2 * x[1])
    res = nelder_mead(bowl([2.0, 1.0]), [1.0, 0.5], dom)
    np.testing.assert_allclose(res.x, [2.0, 1.0], atol=1e-5)
    g = grid_search(bowl([2.0, 1.0]), dom, 31)
    assert dom.contains(g.x)


def test_deterministic():
    dom = BoxDomain([-1, -1], [1, 1])
    f = bowl([0.1, -0.3])
    a, b = nelder_mead(f, [0.5, 0.5], dom), nelder_mead(f, [0.5, 0.5], dom)
    np.testing.assert_array_equal(a.x, b.x)
    assert a.evaluations == b.evaluations


def test_thread_cap_gives_same_answer(monkeypatch):
    dom = BoxDomain([-1, -1], [1, 1])
    f = bowl([0.1, -0.3])
    serial = grid_search(f, dom, 9)
    monkeypatch.setenv("MOREAU_OPT_THREADS", "4")
    np.testing.assert_array_equal(grid_search(f, dom, 9).x, serial.x)


def test_domain_validation():
    with pytest.raises(ValueError):
        BoxDomain([1.0], [0.0])
    with pytest.raises(ValueError):
        BoxDomain([0, 0], [1, 1], [[1.0, 1.0]], [5.0])
    with pytest.raises(ValueError):
        nelder_mead(bowl([0, 0]), [2.0, 0.0], BoxDomain([-1, -1], [1, 1]))
    with pytest.raises(ValueError):
        grid_search(bowl([0]), BoxDomain([0], [1]), 1)
