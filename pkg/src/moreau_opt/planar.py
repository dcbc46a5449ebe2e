"""Planar multi-disk model.

Configurations stack ``n`` planar centers into a vector of length ``2n``
ordered ``(x11, x12, x21, x22, ...)``.  Two constraint geometries live here:
the Euclidean disk distances ``D_ij`` and their linearizations, and the
sum-norm polyhedron built from consecutive difference vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .polytope import Polyhedron, contains

SUM_NORM = "sum_norm_polyhedron"
EUCLIDEAN = "euclidean_pairs"
CONSTRAINT_KINDS = (SUM_NORM, EUCLIDEAN)


class ControlBoundsError(ValueError):
    """A control magnitude violates a bound or coupling."""


class OrientationError(ValueError):
    """Objects are not ordered along both axes as the sum-norm encoding requires."""


@dataclass(frozen=True)
class Configuration:
    positions: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        radii = np.asarray(self.radii, dtype=float).reshape(-1)
        if pos.shape[0] < 2:
            raise ValueError("at least two disks are required")
        if radii.shape[0] != pos.shape[0]:
            raise ValueError("one radius per disk is required")
        if np.any(radii <= 0):
            raise ValueError("radii must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "radii", radii)

    @classmethod
    def from_stacked(cls, x, radii) -> Configuration:
        return cls(np.asarray(x, dtype=float).reshape(-1, 2), radii)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def stacked(self) -> np.ndarray:
        return self.positions.reshape(-1).copy()

    def pairs(self):
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)]

    def min_distance(self) -> float:
        return min(disk_distance(self, i, j) for i, j in self.pairs())

    def is_admissible(self, tol: float = 0.0) -> bool:
        return self.min_distance() >= -tol


def _check_pair(c: Configuration, i: int, j: int):
    if not (0 <= i < c.n and 0 <= j < c.n):
        raise IndexError(f"disk index out of range for {c.n} disks")
    if i == j:
        raise ValueError("distance needs two distinct disks")


def disk_distance(c: Configuration, i: int, j: int) -> float:
    """Center distance minus the radius sum; negative when disks overlap."""
    _check_pair(c, i, j)
    return float(np.linalg.norm(c.positions[i] - c.positions[j]) - (c.radii[i] + c.radii[j]))


def disk_distance_gradient(c: Configuration, i: int, j: int) -> np.ndarray:
    _check_pair(c, i, j)
    d = c.positions[i] - c.positions[j]
    r = np.linalg.norm(d)
    if r == 0:
        raise ValueError("gradient undefined for coincident centers")
    grad = np.zeros(2 * c.n)
    grad[2 * i : 2 * i + 2] = d / r
    grad[2 * j : 2 * j + 2] = -d / r
    return grad


def _pair_rows(c: Configuration):
    rows, dists = [], []
    for i, j in c.pairs():
        rows.append(disk_distance_gradient(c, i, j))
        dists.append(disk_distance(c, i, j))
    return np.array(rows), np.array(dists)


def admissible_velocity_set(c: Configuration, h: float) -> Polyhedron:
    """Velocities ``V`` with ``D_ij + h grad D_ij . V >= 0`` for every pair."""
    if not h > 0:
        raise ValueError("step must be positive")
    grads, dists = _pair_rows(c)
    return Polyhedron.from_constraints(-h * grads, dists)


def linearized_feasible_set(c: Configuration) -> Polyhedron:
    """Points ``y`` with ``D_ij(x) + grad D_ij(x) . (y - x) >= 0`` for every pair."""
    grads, dists = _pair_rows(c)
    x = c.stacked
    return Polyhedron.from_constraints(-grads, dists - grads @ x)


def vertex_vectors(n: int) -> list[np.ndarray]:
    """Consecutive difference vectors ``e_j1 + e_j2 - e_(j+1)1 - e_(j+1)2``.

    Not normalized.
    """
    if n < 2:
        raise ValueError("need at least two objects")
    out = []
    for j in range(n - 1):
        v = np.zeros(2 * n)
        v[2 * j : 2 * j + 2] = 1.0
        v[2 * j + 2 : 2 * j + 4] = -1.0
        out.append(v)
    return out


class MovingPolyhedron:
    """``C(t) = {x | <normals(t)[j], x> <= offsets(t)[j]}``."""

    def __init__(self, normals: Callable[[float], np.ndarray], offsets: Callable[[float], np.ndarray]):
        self._normals = normals
        self._offsets = offsets

    @classmethod
    def constant(cls, normals, offsets) -> MovingPolyhedron:
        normals = np.atleast_2d(np.asarray(normals, dtype=float)).copy()
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float)).copy()
        return cls(lambda t: normals, lambda t: offsets)

    def raw_normals(self, t: float = 0.0) -> np.ndarray:
        return np.atleast_2d(self._normals(t))

    def raw_offsets(self, t: float = 0.0) -> np.ndarray:
        return np.atleast_1d(self._offsets(t))

    def at(self, t: float = 0.0) -> Polyhedron:
        return Polyhedron.from_constraints(self.raw_normals(t), self.raw_offsets(t))


@dataclass(frozen=True)
class Coupling:
    """Linear relation ``coeffs . magnitudes == rhs``."""

    coeffs: tuple[float, ...]
    rhs: float = 0.0


@dataclass(frozen=True)
class ControlledVelocityModel:
    speeds: np.ndarray
    angles: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    couplings: tuple[Coupling, ...] = ()

    def __post_init__(self):
        for name in ("speeds", "angles", "lower", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        n = self.speeds.shape[0]
        if any(getattr(self, k).shape[0] != n for k in ("angles", "lower", "upper")):
            raise ValueError("speeds, angles and bounds must have one entry per object")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        for cp in self.couplings:
            if len(cp.coeffs) != n:
                raise ValueError("coupling has the wrong number of coefficients")

    @property
    def n(self) -> int:
        return self.speeds.shape[0]

    def directions(self) -> np.ndarray:
        """Matrix ``B`` with ``g = B @ magnitudes`` (shape ``2n x n``)."""
        B = np.zeros((2 * self.n, self.n))
        for i in range(self.n):
            B[2 * i, i] = self.speeds[i] * np.cos(self.angles[i])
            B[2 * i + 1, i] = self.speeds[i] * np.sin(self.angles[i])
        return B

    def check(self, mags, tol: float = 1e-9) -> np.ndarray:
        mags = np.asarray(mags, dtype=float).reshape(-1)
        if mags.shape[0] != self.n:
            raise ControlBoundsError(f"expected {self.n} control magnitudes, got {mags.shape[0]}")
        for i, m in enumerate(mags):
            if m < self.lower[i] - tol or m > self.upper[i] + tol:
                raise ControlBoundsError(
                    f"magnitude of control {i + 1} is {m:g}, outside [{self.lower[i]:g}, {self.upper[i]:g}]"
                )
        for cp in self.couplings:
            lhs = float(np.dot(cp.coeffs, mags))
            if abs(lhs - cp.rhs) > tol * max(1.0, float(np.abs(mags).max())):
                raise ControlBoundsError(f"coupling {cp.coeffs} . u = {cp.rhs:g} violated (got {lhs:g})")
        return mags


def controlled_velocity(model: ControlledVelocityModel, u_mags) -> np.ndarray:
    mags = model.check(u_mags)
    return model.directions() @ mags


@dataclass(frozen=True)
class Scaling:
    """Physical value = internal value * scale."""

    length: float = 1.0
    time: float = 1.0


@dataclass(frozen=True)
class ScenarioSpec:
    model: ControlledVelocityModel
    initial: Configuration
    constraint: str = SUM_NORM
    target: np.ndarray = field(default=None)
    offset_override: float | None = None
    endpoint_box: tuple | None = None
    horizon_bounds: tuple[float, float] = (0.0, float("inf"))
    cost: str = "quadratic_state_time"
    units: Scaling = Scaling()
    name: str = "custom"
    # weight w in 0.5 |x - target|^2 + 0.5 w T^2; scaled frames use (time / length)^2
    time_weight: float = 1.0

    def __post_init__(self):
        if self.constraint not in CONSTRAINT_KINDS:
            raise ValueError(f"unknown constraint kind {self.constraint!r}")
        if self.model.n != self.initial.n:
            raise ValueError("model and configuration disagree on the number of objects")
        target = np.zeros(2 * self.initial.n) if self.target is None else np.asarray(self.target, dtype=float)
        object.__setattr__(self, "target", target)
        if self.cost != "quadratic_state_time":
            raise ValueError(f"unsupported cost {self.cost!r}")
        if self.constraint == SUM_NORM:
            check_orientation(self.initial.stacked, self.n)

    @cached_property
    def fixed_set(self) -> Polyhedron:
        return build_sum_norm_constraint_set(self).at(0.0)

    @property
    def n(self) -> int:
        return self.initial.n

    @property
    def radii(self) -> np.ndarray:
        return self.initial.radii

    def constraint_set(self) -> MovingPolyhedron | None:
        """The fixed sweeping polyhedron, or ``None`` for Euclidean pairs."""
        if self.constraint == SUM_NORM:
            return build_sum_norm_constraint_set(self)
        return None

    def local_set(self, x) -> Polyhedron:
        """Feasible set used for the step from state ``x`` (``K(x)``)."""
        if self.constraint == SUM_NORM:
            return self.fixed_set
        return linearized_feasible_set(Configuration.from_stacked(x, self.radii))

    def cost_value(self, x_final, T: float) -> float:
        x_final = np.asarray(x_final, dtype=float) - self.target
        return 0.5 * float(x_final @ x_final) + 0.5 * self.time_weight * T * T

    def cost_gradient(self, x_final, T: float) -> tuple[np.ndarray, float]:
        return np.asarray(x_final, dtype=float) - self.target, self.time_weight * float(T)

    def is_admissible(self, x, tol: float = 1e-9) -> bool:
        if self.constraint == SUM_NORM:
            return contains(self.fixed_set, x, tol)
        return Configuration.from_stacked(x, self.radii).is_admissible(tol)


def check_orientation(x, n: int):
    """Object ``j+1`` must lie strictly ahead of object ``j`` on both axes."""
    pos = np.asarray(x, dtype=float).reshape(n, 2)
    for j in range(n - 1):
        if not np.all(pos[j + 1] > pos[j]):
            raise OrientationError(
                f"object {j + 2} must be ahead of object {j + 1} on both axes for the sum-norm encoding"
            )


def build_sum_norm_constraint_set(spec: ScenarioSpec) -> MovingPolyhedron:
    """Constant polyhedron ``<x*_j, x> <= -(R_j + R_{j+1})``.

    Under the orientation assumption (object ``j+1`` ahead of ``j`` on both
    axes) the boundary coincides with sum-norm contact of consecutive disks.
    """
    n = spec.n
    normals = np.array(vertex_vectors(n))
    if spec.offset_override is not None:
        offsets = np.full(n - 1, float(spec.offset_override))
    else:
        offsets = -(spec.radii[:-1] + spec.radii[1:])
    return MovingPolyhedron.constant(normals, offsets)


def sum_norm_gap(x, j: int = 0) -> float:
    """Sum-norm distance between the centers of objects ``j`` and ``j+1``."""
    pos = np.asarray(x, dtype=float).reshape(-1, 2)
    return float(np.abs(pos[j + 1] - pos[j]).sum())


def sum_norm_contact_roots(delta, rate, contact: float, tol: float = 1e-12) -> list[float]:
    """Positive roots of ``|delta_1 + t rate_1| + |delta_2 + t rate_2| = contact``.

    The left side is convex and piecewise linear in ``t``, so it has at most
    two roots; they are returned in increasing order.
    """
    delta = np.asarray(delta, dtype=float)
    rate = np.asarray(rate, dtype=float)
    f = lambda t: float(np.abs(delta + t * rate).sum() - contact)
    brk = sorted({float(-d / r) for d, r in zip(delta, rate) if r != 0 and -d / r > 0})
    knots = [0.0] + brk
    roots = []
    for a, b in zip(knots, knots[1:] + [None]):
        fa = f(a)
        slope = float(np.sum(np.sign(delta + (a + (1.0 if b is None else 0.5 * (b - a))) * rate) * rate))
        if slope == 0:
            continue
        t = a - fa / slope
        if t > a - tol * max(1.0, a) and (b is None or t <= b + tol * max(1.0, b)) and t > 0:
            if not roots or abs(t - roots[-1]) > tol * max(1.0, t):
                roots.append(t)
    return roots
