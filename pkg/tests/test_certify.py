from __future__ import annotations

import json

import numpy as np
import pytest

from moreau_opt import nano, usv
from moreau_opt.certify import (
    RESIDUAL_NAMES,
    certify,
    check_complementary_slackness,
    check_nontriviality,
    max_condition_gaps,
)
from moreau_opt.sweeping import ControlSignal, Grid, PiecewisePath, halfspace_sweep_path, simulate


@pytest.fixture(scope="module")
def usv_opt():
    return usv.optimize()


def test_optimum_passes(usv_opt):
    cert = certify(usv.analytic_path(usv_opt), usv.usv_spec())
    assert cert.ok
    assert set(cert.residuals) == set(RESIDUAL_NAMES)
    assert max(cert.residuals.values()) <= 1e-10
    assert cert.gamma_atoms and cert.gamma_atoms[-1][0] == pytest.approx(usv_opt.T_bar)
    assert cert.E0[0] == pytest.approx([usv_opt.t_m, usv_opt.T_bar])
    assert cert.control_on_boundary
    json.loads(cert.to_json())


@pytest.mark.parametrize("u", [(99.0, 60.0), (95.0, 55.0), (100.0, 59.0)])
def test_perturbed_control_fails(usv_opt, u):
    path = halfspace_sweep_path(usv.usv_spec(), u, usv_opt.T_bar)
    cert = certify(path, usv.usv_spec())
    assert not cert.ok
    assert max(cert.residuals.values()) > 1e-3


def test_control_outside_box_flagged(usv_opt):
    path = halfspace_sweep_path(usv.usv_spec(), (101.0, 60.0), usv_opt.T_bar, check_bounds=False)
    cert = certify(path, usv.usv_spec())
    assert cert.residuals["control_admissibility"] == pytest.approx(1.0)


def test_slackness_violation_detected():
    spec = usv.usv_spec()
    traj = simulate(spec, ControlSignal.constant([100.0, 60.0]), Grid(0.35, 16))
    eta = np.array(traj.multipliers)
    eta[0] = 5.0  # positive multiplier on a free-flight piece
    path = PiecewisePath(traj.nodes, traj.states, traj.velocities, traj.desired, traj.controls)
    assert check_complementary_slackness(path, eta, spec) > 1.0


def test_nontriviality():
    assert check_nontriviality(1.0, np.zeros(4), [])
    assert not check_nontriviality(0.0, np.zeros(4), [])
    assert check_nontriviality(0.0, np.ones(4), [])


def test_max_condition_gaps():
    psi = np.array([[1.0, -1.0]])
    U = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert max_condition_gaps(psi, np.array([[1.0, 0.0]]), U).max() == pytest.approx(0.0)
    assert max_condition_gaps(psi, np.array([[0.0, 1.0]]), U).max() == pytest.approx(2.0)


def test_nano_branch_one_certified():
    cand = nano.evaluate_case(1, nano.REPORTED_U2)
    spec = nano.nano_spec()
    cert = certify(nano.scaled_path(cand, spec), spec)
    assert cert.ok


def test_scope_errors(usv_opt):
    path = usv.analytic_path(usv_opt)
    with pytest.raises(ValueError, match="unsupported perturbation map"):
        certify(path, usv.usv_spec(), perturbation="state_dependent")
    with pytest.raises(TypeError):
        certify([1, 2, 3], usv.usv_spec())
