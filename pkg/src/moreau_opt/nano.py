"""Two nanoparticles in a straight microtube.

Speeds come from a wall-corrected drag and van der Waals force balance
evaluated once at the initial configuration.  Controls are coupled by
``|u1| = 2 |u2|`` and both particles head along 45 degrees.  Closed forms
are evaluated in a scaled frame (lengths in units of ``LENGTH_UNIT`` nm,
times in units of ``LENGTH_UNIT / s_1`` s) and rescaled on output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .optimize import BoxDomain, nelder_mead
from .planar import (
    SUM_NORM,
    Configuration,
    ControlledVelocityModel,
    Coupling,
    Scaling,
    ScenarioSpec,
    disk_distance,
    sum_norm_contact_roots,
)
from .sweeping import PiecewisePath

LENGTH_UNIT = 350.0
# |u2| reported for the first contact branch; only used as a default start
# because the cost is flat in u2 to machine precision.
REPORTED_U2 = 1.1903


class WallContactError(ValueError):
    pass


@dataclass(frozen=True)
class NanoEnvironment:
    a: float = 500.0
    l: float = 7000.0
    S: float = 1600e6
    hamaker: float = 5e-21
    gravity: float = 9.81e9
    viscosity: float = 3.4e-3
    delta_rho: float = -1e3
    h: float = 0.0075
    radii: tuple = (5.0, 10.0)
    initial: tuple = ((-350.0, -350.0), (-200.0, -200.0))
    heading_deg: float = 45.0
    u_max: float = 3.0

    @property
    def configuration(self) -> Configuration:
        return Configuration(np.array(self.initial), self.radii)

    @property
    def offset(self) -> float:
        return -float(sum(self.radii[:2]))


NANO = NanoEnvironment()


@dataclass(frozen=True)
class NanoForces:
    dw1: float
    dw2: float
    h6_w1: float
    h6_w2: float
    h1_w1: float
    h1_w2: float
    h5_w1: float
    h5_w2: float
    F_w: float
    F_pair: float
    D: float
    v1: float
    v2: float

    @property
    def speed(self) -> float:
        return math.hypot(self.v1, self.v2)


def _h6(mu, R, dw):
    r = R / (R + dw)
    return 6 * math.pi * mu * R * (1 + 9 / 16 * r + 0.13868 * r**1.4829)


def _h1(mu, R, dw):
    r = R / (R + dw)
    return 48 / 15 * math.pi * mu * R * (math.log(1 - r) + r)


def _h5(mu, R, z):
    # the variant with -1/(1 - R/|z|) reproduces the tabulated values for both particles
    r = R / abs(z)
    return 6 * math.pi * mu * R * (-1 / (1 - r) + math.log(1 - r) / 8)


def compute_forces(env: NanoEnvironment = NANO, c: Configuration | None = None, swap_walls: bool = False):
    """Per-particle resistances, forces and velocities at configuration ``c``.

    ``swap_walls`` exchanges the labels of the two walls.
    """
    c = env.configuration if c is None else c
    mu, A = env.viscosity, env.hamaker
    out = []
    for i in range(c.n):
        R = float(c.radii[i])
        z = float(c.positions[i, 1])
        dw1, dw2 = env.a - abs(z) - R, env.a + abs(z) - R
        if swap_walls:
            dw1, dw2 = dw2, dw1
        if dw1 <= 0 or dw2 <= 0:
            raise WallContactError(f"wall contact for particle {i + 1}")
        if abs(z) <= R:
            raise WallContactError(f"particle {i + 1} straddles the tube axis")
        h6 = (_h6(mu, R, dw1), _h6(mu, R, dw2))
        h1 = (_h1(mu, R, dw1), _h1(mu, R, dw2))
        h5 = _h5(mu, R, z)
        F_w = abs(A * R**3 / dw1**4 - A * R**3 / dw2**4)
        F_pair, D = 0.0, math.inf
        for j in range(c.n):
            if j != i:
                d = disk_distance(c, i, j)
                if d <= 0:
                    raise ValueError("particles overlap")
                F_pair += A * R**3 / d**4
                D = min(D, d)
        v1 = -(h6[0] + h6[1]) * env.S / (h1[0] + h1[1])
        v2 = (4 * math.pi / 3 * env.gravity * R * env.delta_rho + F_pair + F_w) / (2 * h5)
        out.append(NanoForces(dw1, dw2, h6[0], h6[1], h1[0], h1[1], h5, h5, F_w, F_pair, D, v1, v2))
    return out


def nano_speeds(env: NanoEnvironment = NANO) -> tuple[float, float]:
    f = compute_forces(env)
    return f[0].speed, f[1].speed


@dataclass(frozen=True)
class _Frame:
    """Scaled frame: x = x_phys / L, t = t_phys / tau, speeds s_i tau / L."""

    L: float
    tau: float
    speeds: np.ndarray
    x0: np.ndarray
    contact: float


def _frame(s1: float, s2: float, env: NanoEnvironment) -> _Frame:
    tau = LENGTH_UNIT / s1
    return _Frame(
        LENGTH_UNIT,
        tau,
        np.array([s1, s2]) * tau / LENGTH_UNIT,
        np.array(env.initial, dtype=float).reshape(-1) / LENGTH_UNIT,
        -env.offset / LENGTH_UNIT,
    )


def _check_heading(theta: float):
    if not math.isclose(math.cos(theta), math.sin(theta), rel_tol=0, abs_tol=1e-12):
        raise ValueError("closed forms need a 45 degree heading")


def eta_closed_form(s1: float, s2: float, u2: float, theta: float = math.pi / 4) -> float:
    """Contact multiplier that equalizes post-contact velocities (``u1 = 2 u2``)."""
    _check_heading(theta)
    return 0.5 * (2 * s1 - s2) * u2 * math.cos(theta)


def contact_products(s1: float, s2: float, env: NanoEnvironment = NANO, theta: float = math.pi / 4):
    """The two values of ``t_star * u2`` solving the sum-norm contact equation."""
    _check_heading(theta)
    if 2 * s1 == s2:
        raise ValueError("no contact: equal desired velocities")
    fr = _frame(s1, s2, env)
    delta = fr.x0[2:] - fr.x0[:2]
    rate = (fr.speeds[1] - 2 * fr.speeds[0]) * np.array([math.cos(theta), math.sin(theta)])
    roots = sum_norm_contact_roots(delta, rate, fr.contact)
    if len(roots) != 2:
        raise ValueError("no contact: the particles never reach the radius sum")
    return tuple(r * fr.tau for r in roots)


def horizon_product(s1: float, s2: float, env: NanoEnvironment = NANO, theta: float = math.pi / 4) -> float:
    """``T_bar * u2`` at which the two positions sum to zero on each axis."""
    _check_heading(theta)
    fr = _frame(s1, s2, env)
    centroid = fr.x0[:2] + fr.x0[2:]
    rate = (2 * fr.speeds[0] + fr.speeds[1]) * np.array([math.cos(theta), math.sin(theta)])
    per_axis = -centroid / rate
    if not np.isclose(per_axis[0], per_axis[1], rtol=1e-12):
        raise ValueError("axes disagree on the horizon; initial state must be on the diagonal")
    return float(per_axis[0]) * fr.tau


@dataclass(frozen=True)
class NanoCandidate:
    case_id: int
    u2: float
    t_star: float
    T_bar: float
    eta: float
    terminal: np.ndarray = field(repr=False)
    state_cost: float = 0.0
    time_cost: float = 0.0
    feasible: bool = True
    pre_slopes: tuple = ()
    post_slopes: tuple = ()

    @property
    def u1(self) -> float:
        return 2 * self.u2

    @property
    def cost(self) -> float:
        """``0.5 |x(T)|^2 + 0.5 T^2`` along the closed-form path."""
        return self.state_cost + self.time_cost

    @property
    def objective(self) -> float:
        """Cost of a feasible candidate, ``inf`` for one that violates the state constraint."""
        return self.cost if self.feasible else math.inf

    @property
    def ratio(self) -> float:
        return self.T_bar / self.t_star


def evaluate_case(case_id: int, u2: float, env: NanoEnvironment = NANO, speeds=None) -> NanoCandidate:
    """Closed-form two-phase candidate for contact branch ``case_id`` (1 or 2)."""
    if case_id not in (1, 2):
        raise ValueError("case_id must be 1 or 2")
    if not 0 < u2 <= env.u_max / 2:
        raise ValueError(f"u2 = {u2:g} outside (0, {env.u_max / 2:g}] (coupling u1 = 2 u2)")
    s1, s2 = nano_speeds(env) if speeds is None else speeds
    theta = math.radians(env.heading_deg)
    fr = _frame(s1, s2, env)
    t_star = contact_products(s1, s2, env, theta)[case_id - 1] / u2
    T_bar = horizon_product(s1, s2, env, theta) / u2
    # scaled frame arithmetic
    cs = math.cos(theta)
    ts, Ts = t_star / fr.tau, T_bar / fr.tau
    pre = np.array([2 * fr.speeds[0], 2 * fr.speeds[0], fr.speeds[1], fr.speeds[1]]) * u2 * cs
    eta_s = 0.5 * (pre[0] - pre[2])
    post = pre + eta_s * np.array([-1.0, -1.0, 1.0, 1.0])
    x_c = fr.x0 + ts * pre
    x_T = x_c + (Ts - ts) * post
    normal = np.array([1.0, 1.0, -1.0, -1.0])
    c_s = -fr.contact
    violation = max(float(normal @ fr.x0 - c_s), float(normal @ x_c - c_s), float(normal @ x_T - c_s))
    terminal = x_T * fr.L
    v = fr.L / fr.tau
    return NanoCandidate(
        case_id=case_id,
        u2=u2,
        t_star=t_star,
        T_bar=T_bar,
        eta=eta_s * v,
        terminal=terminal,
        state_cost=0.5 * float(terminal @ terminal),
        time_cost=0.5 * T_bar * T_bar,
        feasible=violation <= 1e-9,
        pre_slopes=tuple(pre * v),
        post_slopes=tuple(post * v),
    )


def nano_path(cand: NanoCandidate, env: NanoEnvironment = NANO) -> PiecewisePath:
    """Piecewise-linear path (physical units) with kinks at ``0, t_star, T_bar``."""
    x0 = np.array(env.initial, dtype=float).reshape(-1)
    pre, post = np.array(cand.pre_slopes), np.array(cand.post_slopes)
    x_c = x0 + cand.t_star * pre
    states = np.array([x0, x_c, x_c + (cand.T_bar - cand.t_star) * post])
    mags = np.array([cand.u1, cand.u2])
    return PiecewisePath(
        np.array([0.0, cand.t_star, cand.T_bar]), states, np.array([pre, post]), np.array([pre, pre]), np.array([mags, mags])
    )


def nano_model(env: NanoEnvironment = NANO, speeds=None, scaled: bool = True) -> ControlledVelocityModel:
    s1, s2 = nano_speeds(env) if speeds is None else speeds
    sp = np.array([s1, s2])
    if scaled:
        fr = _frame(s1, s2, env)
        sp = fr.speeds
    theta = math.radians(env.heading_deg)
    return ControlledVelocityModel(
        speeds=sp,
        angles=[theta, theta],
        lower=[0.0, 0.0],
        upper=[env.u_max, env.u_max],
        couplings=(Coupling((1.0, -2.0), 0.0),),
    )


def nano_spec(env: NanoEnvironment = NANO, speeds=None) -> ScenarioSpec:
    """Scenario in the scaled frame; ``spec.units`` converts back to nm and s."""
    s1, s2 = nano_speeds(env) if speeds is None else speeds
    fr = _frame(s1, s2, env)
    return ScenarioSpec(
        model=nano_model(env, (s1, s2), scaled=True),
        initial=Configuration(np.array(env.initial) / fr.L, np.array(env.radii) / fr.L),
        constraint=SUM_NORM,
        units=Scaling(fr.L, fr.tau),
        name="nano",
        time_weight=(fr.tau / fr.L) ** 2,
    )


def scaled_path(cand: NanoCandidate, spec: ScenarioSpec, env: NanoEnvironment = NANO) -> PiecewisePath:
    """``nano_path`` expressed in the frame of ``nano_spec``."""
    path = nano_path(cand, env)
    L, tau = spec.units.length, spec.units.time
    return PiecewisePath(
        path.times / tau,
        path.states / L,
        path.velocities * tau / L,
        path.desired * tau / L,
        path.controls,
    )


@dataclass(frozen=True)
class NanoResult:
    best: NanoCandidate
    cases: dict
    flatness: dict
    iterations: dict


def optimize_nano(env: NanoEnvironment = NANO, start_u2: float = REPORTED_U2) -> NanoResult:
    """Nelder-Mead over the coupled control line for each contact branch.

    The cost depends on ``u2`` only through ``0.5 T^2`` (about 1e-25), so
    the simplex stops on the f-spread criterion and the minimizer is not
    unique; ``flatness`` reports the cost range over the admissible line.
    """
    speeds = nano_speeds(env)
    dom = BoxDomain([0.0, 0.0], [env.u_max, env.u_max], [[1.0, -2.0]], [0.0])
    cases, its, flat = {}, {}, {}
    for case_id in (1, 2):

        def f(u, cid=case_id):
            if not u[1] > 0:
                return math.inf
            return evaluate_case(cid, float(u[1]), env, speeds).objective

        res = nelder_mead(f, dom.project([2 * start_u2, start_u2]), dom)
        cases[case_id] = evaluate_case(case_id, float(res.x[1]), env, speeds)
        its[case_id] = (res.iterations, res.reason)
        line = [evaluate_case(case_id, u, env, speeds).cost for u in np.linspace(0.05, env.u_max / 2, 30)]
        flat[case_id] = {
            "cost_min": float(min(line)),
            "cost_max": float(max(line)),
            "J(u2=1.0)-J(u2=1.4)": evaluate_case(case_id, 1.0, env, speeds).cost
            - evaluate_case(case_id, 1.4, env, speeds).cost,
        }
    best = min(cases.values(), key=lambda c: (c.objective, c.case_id))
    return NanoResult(best, cases, flat, its)
