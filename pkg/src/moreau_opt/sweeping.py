"""Catching-up discretization of the controlled sweeping process.

Each step projects the desired velocity ``g(x_i, u_i)`` onto the admissible
velocity set of the current state (equivalently, the Euler predictor
``x_i + h g`` onto ``K(x_i)``) and moves along the result for one grid step.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .planar import EUCLIDEAN, Configuration, ScenarioSpec, controlled_velocity, disk_distance
from .polytope import DEFAULT_TOL, normal_cone_coefficients, project


class InadmissibleStateError(ValueError):
    """The state handed to the simulator violates the constraints."""


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    T: float
    k: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon must be positive")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("number of subintervals must be a positive integer")
        object.__setattr__(self, "k", int(self.k))

    @property
    def h(self) -> float:
        return self.T / self.k

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.k + 1) * self.h
        t[-1] = self.T
        return t


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-constant control magnitudes, one row per subinterval or a single row."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.atleast_2d(np.asarray(self.values, dtype=float)))

    @classmethod
    def constant(cls, mags) -> ControlSignal:
        return cls(np.asarray(mags, dtype=float).reshape(1, -1))

    def at(self, i: int) -> np.ndarray:
        return self.values[0] if self.values.shape[0] == 1 else self.values[i]

    def check_length(self, k: int):
        if self.values.shape[0] not in (1, k):
            raise ValueError(f"control has {self.values.shape[0]} samples for {k} subintervals")


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear grid function.

    ``velocities[i]`` is the constant slope on ``[t_i, t_{i+1})``;
    ``multipliers[i]`` the nonnegative weights of the raw constraint vectors
    with ``desired[i] - velocities[i] = sum_j multipliers[i, j] * normal_j``;
    ``residuals[i, j]`` is the constraint value at node ``i`` (``<= 0`` feasible).
    """

    grid: Grid
    states: np.ndarray
    velocities: np.ndarray
    desired: np.ndarray | None = None
    controls: np.ndarray | None = None
    multipliers: np.ndarray | None = None
    residuals: np.ndarray | None = None
    active_tol: float = 1e-9

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def active(self) -> np.ndarray:
        return np.abs(self.residuals) <= self.active_tol * max(1.0, float(np.abs(self.states).max()))

    def __call__(self, t: float) -> np.ndarray:
        t = float(t)
        if t <= 0:
            return self.states[0].copy()
        if t >= self.grid.T:
            return self.states[-1].copy()
        i = min(int(t / self.grid.h), self.grid.k - 1)
        return self.states[i] + (t - self.nodes[i]) * self.velocities[i]

    def sample(self, times) -> np.ndarray:
        return np.array([self(t) for t in times])

    def rescaled(self, length: float, time: float) -> Trajectory:
        """Same trajectory in units where ``x_phys = length * x``, ``t_phys = time * t``."""
        grid = Grid(self.grid.T * time, self.grid.k)
        v = length / time
        return Trajectory(
            grid,
            self.states * length,
            self.velocities * v,
            None if self.desired is None else self.desired * v,
            self.controls,
            None if self.multipliers is None else self.multipliers * v,
            None if self.residuals is None else self.residuals * length,
            self.active_tol,
        )

    def to_csv(self) -> str:
        n2 = self.states.shape[1]
        s = 0 if self.residuals is None else self.residuals.shape[1]
        header = ["t"] + [f"x{i // 2 + 1}{i % 2 + 1}" for i in range(n2)]
        header += [f"eta_{j + 1}" for j in range(s)] + ["active_flags"]
        out = io.StringIO()
        out.write(",".join(header) + "\n")
        active = self.active if s else np.zeros((self.states.shape[0], 0), dtype=bool)
        for i, t in enumerate(self.nodes):
            eta = self.multipliers[i - 1] if (i > 0 and s) else np.zeros(s)
            row = [t, *self.states[i], *eta]
            flags = ";".join("1" if a else "0" for a in active[i]) if s else ""
            out.write(",".join(f"{v:.17g}" for v in row) + "," + flags + "\n")
        return out.getvalue()


def constraint_residuals(spec: ScenarioSpec, x) -> np.ndarray:
    """Constraint values at ``x`` in the raw units of each constraint; ``<= 0`` is feasible.

    Sum-norm scenarios report ``<x*_j, x> - c_j``; Euclidean ones ``-D_ij(x)``.
    """
    x = np.asarray(x, dtype=float)
    if spec.constraint == EUCLIDEAN:
        c = Configuration.from_stacked(x, spec.radii)
        return np.array([-disk_distance(c, i, j) for i, j in c.pairs()])
    P = spec.fixed_set
    return (P.A @ x - P.b) * P.scales


def _scale(*arrays) -> float:
    return max(1.0, *(float(np.max(np.abs(a), initial=0.0)) for a in arrays))


def step(spec: ScenarioSpec, x, u, h: float, formulation: str = "velocity", admissibility_tol: float = 1e-9):
    """One catching-up step from state ``x`` under control magnitudes ``u``.

    Returns ``(next_state, V, eta)`` where ``eta`` are the weights of the raw
    constraint vectors of ``K(x)`` that account for ``g - V``.
    """
    x = np.asarray(x, dtype=float)
    if not h > 0:
        raise ValueError("step must be positive")
    if not spec.is_admissible(x, admissibility_tol * _scale(x)):
        raise InadmissibleStateError("state violates the constraints")
    g = controlled_velocity(spec.model, u)
    K = spec.local_set(x)
    if formulation == "velocity":
        V = project(K.shifted(x, h), g)
        nxt = x + h * V
    elif formulation == "state":
        nxt = project(K, x + h * g)
        V = (nxt - x) / h
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    tol = DEFAULT_TOL * _scale(x, nxt, h * g)
    lam = normal_cone_coefficients(K, nxt, x + h * g - nxt, tol)
    if lam is None:
        raise NumericalFailure("projection residual is not a normal-cone element")
    eta = lam / (h * K.scales)
    return nxt, V, eta


def simulate(spec: ScenarioSpec, u: ControlSignal, grid: Grid, formulation: str = "velocity") -> Trajectory:
    if not isinstance(u, ControlSignal):
        u = ControlSignal(u)
    u.check_length(grid.k)
    x = spec.initial.stacked
    if not spec.is_admissible(x):
        raise InadmissibleStateError("initial configuration is not admissible")
    h = grid.h
    states = [x]
    vels, desired, etas, ctrls = [], [], [], []
    B = spec.model.directions()
    for i in range(grid.k):
        mags = u.at(i)
        x, V, eta = step(spec, x, mags, h, formulation)
        states.append(x)
        vels.append(V)
        etas.append(eta)
        ctrls.append(mags)
        desired.append(B @ mags)
    states = np.array(states)
    res = np.array([constraint_residuals(spec, s) for s in states])
    return Trajectory(grid, states, np.array(vels), np.array(desired), np.array(ctrls), np.array(etas), res)


def first_contact(traj: Trajectory, spec: ScenarioSpec, tol: float = 1e-9, iters: int = 80) -> float | None:
    """Earliest time some constraint becomes active, refined on the free-flight segment.

    Returns ``None`` if no node reaches the boundary within ``tol``.
    """
    scale = _scale(traj.states)
    hit = np.flatnonzero(traj.residuals.max(axis=1) >= -tol * scale)
    if hit.size == 0:
        return None
    i = int(hit[0])
    if i == 0:
        return 0.0
    x0 = traj.states[i - 1]
    g = traj.desired[i - 1] if traj.desired is not None else traj.velocities[i - 1]
    lo, hi = 0.0, traj.grid.h
    if constraint_residuals(spec, x0 + hi * g).max() < -tol * scale:
        return float(traj.nodes[i])
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if constraint_residuals(spec, x0 + mid * g).max() >= -tol * scale:
            hi = mid
        else:
            lo = mid
    return float(traj.nodes[i - 1] + hi)


def w12_distance(a: Trajectory, b: Trajectory) -> float:
    """Discrete W^{1,2} distance: initial-state gap plus L2 gap of the slopes.

    The finer grid must refine the coarser one and both share the horizon.
    """
    if a.grid.k > b.grid.k:
        a, b = b, a
    if not np.isclose(a.grid.T, b.grid.T, rtol=1e-12, atol=0.0):
        raise ValueError("trajectories have different horizons")
    if b.grid.k % a.grid.k:
        raise ValueError("grids are not nested")
    ratio = b.grid.k // a.grid.k
    va = np.repeat(a.velocities, ratio, axis=0)
    diff = va - b.velocities
    l2 = np.sqrt(b.grid.h * float(np.sum(diff * diff)))
    return float(np.linalg.norm(a.states[0] - b.states[0]) + l2)


def refine_and_compare(spec: ScenarioSpec, u, T: float, k_list) -> list[tuple[int, float]]:
    """Distances between successive refinements ``(k_list[m], k_list[m+1])``.

    Each entry is ``(k_list[m], distance)``.
    """
    k_list = [int(k) for k in k_list]
    if any(b <= a or b % a for a, b in zip(k_list, k_list[1:])):
        raise ValueError("k_list must be increasing with each entry dividing the next")
    if not isinstance(u, ControlSignal):
        u = ControlSignal.constant(u)
    if u.values.shape[0] != 1:
        raise ValueError("refinement studies need a constant control")
    trajs = [simulate(spec, u, Grid(T, k)) for k in k_list]
    return [(k, w12_distance(a, b)) for k, a, b in zip(k_list, trajs, trajs[1:])]


@dataclass(frozen=True)
class PiecewisePath:
    """Piecewise-linear path with arbitrary kink times.

    ``velocities[i]``, ``desired[i]`` and ``controls[i]`` hold on
    ``[times[i], times[i+1])``.
    """

    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    desired: np.ndarray
    controls: np.ndarray

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def __call__(self, t: float) -> np.ndarray:
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.velocities) - 1))
        return self.states[i] + (t - self.times[i]) * self.velocities[i]

    def sample(self, times) -> np.ndarray:
        return np.array([self(t) for t in times])


def trajectory_path(traj: Trajectory) -> PiecewisePath:
    return PiecewisePath(traj.nodes, traj.states, traj.velocities, traj.desired, traj.controls)


def halfspace_sweep_path(spec: ScenarioSpec, mags, T: float, check_bounds: bool = True) -> PiecewisePath:
    """Exact sweeping solution for one fixed halfspace and a constant control.

    Free flight until the boundary is reached, then sliding with the
    tangential part of the desired velocity.  ``check_bounds=False`` admits
    controls outside ``U`` (used to certify deliberately bad candidates).
    """
    P = spec.fixed_set
    if P.n_constraints != 1:
        raise ValueError("exact sweep path needs exactly one halfspace")
    a, b = P.A[0], P.b[0]
    mags = np.asarray(mags, dtype=float)
    g = controlled_velocity(spec.model, mags) if check_bounds else spec.model.directions() @ mags
    x0 = spec.initial.stacked
    gap = b - a @ x0
    rate = a @ g
    slide = g - rate * a if rate > 0 else g
    if rate > 0 and gap / rate < T:
        t_hit = max(gap / rate, 0.0)
        times = np.array([0.0, t_hit, T]) if t_hit > 0 else np.array([0.0, T])
    else:
        times = np.array([0.0, T])
    if len(times) == 3:
        x_hit = x0 + t_hit * g
        states = np.array([x0, x_hit, x_hit + (T - t_hit) * slide])
        vels = np.array([g, slide])
    else:
        v = slide if (rate > 0 and gap <= 0) else g
        states = np.array([x0, x0 + T * v])
        vels = np.array([v])
    k = len(vels)
    return PiecewisePath(times, states, vels, np.tile(g, (k, 1)), np.tile(mags, (k, 1)))
