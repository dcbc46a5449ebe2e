"""Two surface vessels driven toward the origin along the 45 degree diagonal.

Vessel 1 starts behind vessel 2 and is faster; after the sum-norm gap closes
to the radius sum the pair slides along the constraint with a common
velocity.  The closed forms below assume constant controls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .optimize import BoxDomain, grid_search, nelder_mead
from .planar import SUM_NORM, Configuration, ControlledVelocityModel, ScenarioSpec
from .sweeping import Grid, Trajectory

SQRT2 = math.sqrt(2.0)


class NoContactError(ValueError):
    pass


class ContactAfterHorizonError(ValueError):
    pass


@dataclass(frozen=True)
class UsvData:
    initial: tuple = ((-25.0, -25.0), (-15.0, -15.0))
    radii: tuple = (3.5, 3.5)
    heading_deg: float = 45.0
    speeds: tuple = (1.0, 1.0)
    upper: tuple = (100.0, 60.0)
    offset: float = -7.0
    # vessel metadata only; not used by the dynamics
    mass_kg: float = 23.8
    length_m: float = 1.255

    @property
    def heading(self) -> float:
        return math.radians(self.heading_deg)

    @property
    def x0(self) -> np.ndarray:
        return np.array(self.initial, dtype=float).reshape(-1)

    @property
    def normal(self) -> np.ndarray:
        return np.array([1.0, 1.0, -1.0, -1.0])


USV = UsvData()


def usv_model(data: UsvData = USV) -> ControlledVelocityModel:
    return ControlledVelocityModel(
        speeds=data.speeds,
        angles=[data.heading] * 2,
        lower=[0.0, 0.0],
        upper=data.upper,
    )


def usv_spec(data: UsvData = USV) -> ScenarioSpec:
    return ScenarioSpec(
        model=usv_model(data),
        initial=Configuration(np.array(data.initial), data.radii),
        constraint=SUM_NORM,
        offset_override=data.offset,
        name="usv",
    )


@dataclass(frozen=True)
class UsvCandidate:
    u1: float
    u2: float
    t_m: float
    eta_m: float
    T_bar: float
    cost: float
    root: int = 0
    feasible: bool = True

    @property
    def control_vector(self) -> np.ndarray:
        return usv_model().directions() @ np.array([self.u1, self.u2])

    @property
    def terminal_state(self) -> np.ndarray:
        return terminal_state(self.u1, self.u2, self.root)


def _axis_rates(u1: float, u2: float, data: UsvData = USV):
    c = math.cos(data.heading)
    return data.speeds[0] * u1 * c, data.speeds[1] * u2 * c


def hitting_times(u1: float, u2: float, data: UsvData = USV) -> tuple[float, float]:
    """Times at which the sum-norm gap between the vessels equals the radius sum.

    The first root is the physical first contact; the second is the time the
    gap reaches the radius sum again after the vessels have crossed.
    """
    if u1 == u2:
        raise NoContactError("no contact: equal control magnitudes keep the gap constant")
    if not u1 > u2:
        raise NoContactError("no contact: the leading vessel is at least as fast")
    a1, a2 = _axis_rates(u1, u2, data)
    gap0 = data.x0[2:] - data.x0[:2]
    closing = a1 - a2
    contact = -data.offset
    # per-axis gaps are equal on the diagonal: 2 |gap - t * closing| = contact
    g = float(gap0[0])
    return (g - contact / 2) / closing, (g + contact / 2) / closing


def boundary_multiplier(u1: float, u2: float) -> float:
    """Normal-cone weight keeping the vessels in contact once they touch."""
    if u1 < u2:
        raise ValueError("boundary multiplier needs u1 >= u2")
    return SQRT2 * (u1 - u2) / 4


def optimal_horizon(u1: float, u2: float, data: UsvData = USV) -> float:
    """Horizon at which the two vessels' positions sum to zero on each axis."""
    if not u1 + u2 > 0:
        raise ValueError("horizon needs u1 + u2 > 0")
    a1, a2 = _axis_rates(u1, u2, data)
    centroid0 = float(data.x0[0] + data.x0[2])
    return -centroid0 / (a1 + a2)


def _sliding_velocity(g: np.ndarray, normal: np.ndarray) -> np.ndarray:
    rate = normal @ g
    return g - rate / (normal @ normal) * normal


def terminal_state(u1: float, u2: float, root: int = 0, data: UsvData = USV) -> np.ndarray:
    t_m = hitting_times(u1, u2, data)[root]
    T = optimal_horizon(u1, u2, data)
    if t_m > T:
        raise ContactAfterHorizonError(f"contact after horizon (t_m = {t_m:.6g} > T = {T:.6g})")
    g = usv_model(data).directions() @ np.array([u1, u2])
    return data.x0 + t_m * g + (T - t_m) * _sliding_velocity(g, data.normal)


def cost(u1: float, u2: float, root: int = 0, data: UsvData = USV) -> float:
    """``0.5 |x(T)|^2 + 0.5 T^2`` along the contact-then-slide trajectory."""
    x = terminal_state(u1, u2, root, data)
    T = optimal_horizon(u1, u2, data)
    return 0.5 * float(x @ x) + 0.5 * T * T


def state_violation(u1: float, u2: float, root: int = 0, data: UsvData = USV) -> float:
    """Largest excess of ``<x*, x(t)> - c`` along the candidate (kinks suffice)."""
    t_m = hitting_times(u1, u2, data)[root]
    g = usv_model(data).directions() @ np.array([u1, u2])
    at_contact = data.x0 + t_m * g
    # the pre-contact leg is linear, so its extremes are the endpoints
    return max(float(data.normal @ data.x0 - data.offset), float(data.normal @ at_contact - data.offset))


def evaluate(u1: float, u2: float, root: int = 0, data: UsvData = USV) -> UsvCandidate:
    t_m = hitting_times(u1, u2, data)[root]
    T = optimal_horizon(u1, u2, data)
    J = cost(u1, u2, root, data)
    feasible = state_violation(u1, u2, root, data) <= 1e-9
    return UsvCandidate(u1, u2, t_m, boundary_multiplier(u1, u2), T, J, root, feasible)


def objective(u, root: int = 0, data: UsvData = USV) -> float:
    """Cost of a feasible contact candidate; ``inf`` otherwise."""
    u1, u2 = float(u[0]), float(u[1])
    try:
        cand = evaluate(u1, u2, root, data)
    except (NoContactError, ContactAfterHorizonError, ValueError):
        return math.inf
    return cand.cost if cand.feasible else math.inf


def optimize(resolution=(101, 61), data: UsvData = USV) -> UsvCandidate:
    """Grid search over the control box for each root, then simplex polish."""
    dom = BoxDomain([0.0, 0.0], list(data.upper))
    best = None
    for root in (0, 1):
        f = lambda u, r=root: objective(u, r, data)
        coarse = grid_search(f, dom, resolution)
        if not math.isfinite(coarse.fun):
            continue
        polished = nelder_mead(f, coarse.x, dom)
        x = polished.x if polished.fun <= coarse.fun else coarse.x
        cand = evaluate(float(x[0]), float(x[1]), root, data)
        if best is None or cand.cost < best.cost:
            best = cand
    if best is None:
        raise RuntimeError("no feasible contact candidate in the control box")
    return best


def synthesize_trajectory(candidate: UsvCandidate, k: int = 4096, data: UsvData = USV) -> Trajectory:
    """Two-phase analytic trajectory sampled on a uniform grid of ``k`` cells."""
    a1, a2 = _axis_rates(candidate.u1, candidate.u2, data)
    eta = boundary_multiplier(candidate.u1, candidate.u2)
    pre = np.array([a1, a1, a2, a2])
    post = pre - eta * data.normal
    grid = Grid(candidate.T_bar, k)
    t = grid.nodes
    t_m = candidate.t_m
    states = data.x0 + np.minimum(t, t_m)[:, None] * pre + np.maximum(t - t_m, 0.0)[:, None] * post
    vels = np.diff(states, axis=0) / grid.h
    residuals = (states @ data.normal - data.offset)[:, None]
    desired = np.tile(pre, (k, 1))
    controls = np.tile([candidate.u1, candidate.u2], (k, 1))
    mid = 0.5 * (t[:-1] + t[1:])
    mult = np.where(mid >= t_m, eta, 0.0)[:, None]
    return Trajectory(grid, states, vels, desired, controls, mult, residuals)


def analytic_path(candidate: UsvCandidate, data: UsvData = USV):
    """The same trajectory with kinks exactly at ``0, t_m, T_bar``."""
    from .sweeping import PiecewisePath

    a1, a2 = _axis_rates(candidate.u1, candidate.u2, data)
    eta = boundary_multiplier(candidate.u1, candidate.u2)
    pre = np.array([a1, a1, a2, a2])
    post = pre - eta * data.normal
    t_m, T = candidate.t_m, candidate.T_bar
    x_m = data.x0 + t_m * pre
    states = np.array([data.x0, x_m, x_m + (T - t_m) * post])
    mags = np.array([candidate.u1, candidate.u2])
    return PiecewisePath(
        np.array([0.0, t_m, T]), states, np.array([pre, post]), np.array([pre, pre]), np.array([mags, mags])
    )
