from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moreau_opt import nano
from moreau_opt.planar import Configuration
from moreau_opt.regression import TABLE1
from moreau_opt.sweeping import ControlSignal, Grid, simulate

# entries reproduced to better than 1e-3; two printed values are not (see the acceptance suite)
STABLE = [(i, k) for i, row in TABLE1.items() for k in row if (i, k) not in {(1, "h1_w2"), (1, "F_w")}]


@pytest.mark.parametrize("particle,key", STABLE)
def test_force_table_entry(particle, key):
    value = getattr(nano.compute_forces()[particle - 1], key)
    assert value == pytest.approx(TABLE1[particle][key], rel=1e-3, abs=0)


def test_swapping_wall_labels():
    a = nano.compute_forces()
    b = nano.compute_forces(swap_walls=True)
    for fa, fb in zip(a, b):
        assert (fa.dw1, fa.h6_w1, fa.h1_w1) == (fb.dw2, fb.h6_w2, fb.h1_w2)
        assert fa.v1 == pytest.approx(fb.v1, rel=1e-14, abs=0)
        assert fa.F_w == pytest.approx(fb.F_w, rel=1e-14, abs=0)


def test_wall_contact_error():
    c = Configuration([[0.0, 499.0], [100.0, 200.0]], [5.0, 10.0])
    with pytest.raises(nano.WallContactError):
        nano.compute_forces(c=c)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.5))
def test_products_do_not_depend_on_u2(u2):
    s1, s2 = nano.nano_speeds()
    tp = nano.contact_products(s1, s2)
    Tp = nano.horizon_product(s1, s2)
    c1, c2 = nano.evaluate_case(1, u2), nano.evaluate_case(2, u2)
    assert c1.t_star * u2 == pytest.approx(tp[0], rel=1e-12, abs=0)
    assert c2.t_star * u2 == pytest.approx(tp[1], rel=1e-12, abs=0)
    assert c1.T_bar * u2 == pytest.approx(Tp, rel=1e-12, abs=0)


def test_ratios_and_order():
    c1 = nano.evaluate_case(1, nano.REPORTED_U2)
    c2 = nano.evaluate_case(2, nano.REPORTED_U2)
    assert c1.ratio == pytest.approx(1.3569, rel=1e-3, abs=0)
    assert c2.ratio == pytest.approx(1.2277, rel=1e-3, abs=0)
    assert c1.feasible and not c2.feasible
    assert c1.objective < c2.objective
    assert c1.cost == pytest.approx(28.125, abs=1e-9)


def test_cost_is_flat_along_the_control_line():
    res = nano.optimize_nano()
    assert res.best.case_id == 1
    flat = res.flatness[1]
    # only the 0.5 T^2 term (about 1e-25) varies, far below double precision of 28.125
    assert flat["cost_max"] - flat["cost_min"] <= 1e-12 * flat["cost_max"]


def test_case_id_and_range_checked():
    with pytest.raises(ValueError):
        nano.evaluate_case(3, 1.0)
    with pytest.raises(ValueError):
        nano.evaluate_case(1, 2.0)


def test_simulation_matches_closed_form():
    cand = nano.evaluate_case(1, nano.REPORTED_U2)
    spec = nano.nano_spec()
    L, tau = spec.units.length, spec.units.time
    traj = simulate(spec, ControlSignal.constant([cand.u1, cand.u2]), Grid(cand.T_bar / tau, 4096))
    phys = traj.rescaled(L, tau)
    ref = nano.nano_path(cand).sample(phys.nodes)
    assert np.max(np.abs(phys.states - ref)) <= 1.0


@pytest.mark.xfail(strict=True, reason="printed contact time and horizon disagree with the printed products at u2 = 1.1903")
def test_printed_contact_time_at_reported_control():
    cand = nano.evaluate_case(1, nano.REPORTED_U2)
    assert cand.t_star == pytest.approx(5.1688e-13, rel=1e-3, abs=0)
    assert cand.T_bar == pytest.approx(7.0135e-13, rel=1e-3, abs=0)
