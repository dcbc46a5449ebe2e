"""Halfspace-represented convex polyhedra.

A :class:`Polyhedron` stores unit normals ``A`` and offsets ``b`` so that the
set is ``{x | A @ x <= b}``.  The raw normal lengths used at construction are
kept in ``scales`` so multipliers can be mapped back to the caller's vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, nnls

DEFAULT_TOL = 1e-9
ENUMERATION_LIMIT = 6


class EmptySetError(ValueError):
    """Raised when a polyhedron turns out to have no points."""


@dataclass(frozen=True)
class Halfspace:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float)
        if normal.ndim != 1 or not np.linalg.norm(normal) > 0:
            raise ValueError("halfspace normal must be a nonzero vector")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def normalized(cls, normal, offset) -> Halfspace:
        normal = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(normal)
        if not norm > 0:
            raise ValueError("halfspace normal must be a nonzero vector")
        return cls(normal / norm, float(offset) / norm)


@dataclass(frozen=True)
class ActiveSet:
    indices: tuple[int, ...]
    tolerance: float

    def __contains__(self, j):
        return j in self.indices

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class Polyhedron:
    """Intersection of halfspaces ``<A[j], x> <= b[j]`` with unit rows ``A[j]``."""

    A: np.ndarray
    b: np.ndarray
    scales: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError("normals and offsets disagree in count")
        scales = np.ones(len(b)) if self.scales is None else np.asarray(self.scales, dtype=float)
        A.setflags(write=False)
        b.setflags(write=False)
        scales.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "scales", scales)

    @classmethod
    def from_constraints(cls, normals, offsets) -> Polyhedron:
        """Build ``{x | normals @ x <= offsets}``, normalizing each row."""
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms <= 0):
            raise ValueError("zero normal in constraint list")
        return cls(normals / norms[:, None], offsets / norms, norms)

    @classmethod
    def from_halfspaces(cls, halfspaces, dim: int | None = None) -> Polyhedron:
        halfspaces = list(halfspaces)
        if not halfspaces:
            if dim is None:
                raise ValueError("dimension required for an empty halfspace list")
            return cls(np.zeros((0, dim)), np.zeros(0))
        dims = {h.normal.shape[0] for h in halfspaces}
        if len(dims) != 1 or (dim is not None and dims != {dim}):
            raise ValueError("halfspace normals have inconsistent dimensions")
        return cls.from_constraints([h.normal for h in halfspaces], [h.offset for h in halfspaces])

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.A.shape[0]

    @property
    def halfspaces(self) -> list[Halfspace]:
        return [Halfspace(a, c) for a, c in zip(self.A, self.b)]

    @property
    def raw_normals(self) -> np.ndarray:
        return self.A * self.scales[:, None]

    def residuals(self, x) -> np.ndarray:
        """``A @ x - b``; nonpositive entries are satisfied constraints."""
        x = self._check_point(x)
        return self.A @ x - self.b

    def shifted(self, origin, step: float) -> Polyhedron:
        """The set of ``V`` with ``origin + step * V`` in this polyhedron."""
        origin = self._check_point(origin)
        if not step > 0:
            raise ValueError("step must be positive")
        return Polyhedron(self.A, (self.b - self.A @ origin) / step, self.scales)

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}, got shape {x.shape}")
        return x


def contains(P: Polyhedron, x, tol: float = DEFAULT_TOL) -> bool:
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    r = P.residuals(x)
    return bool(np.all(r <= tol))


def active_set(P: Polyhedron, x, tol: float = DEFAULT_TOL) -> ActiveSet:
    r = P.residuals(x)
    return ActiveSet(tuple(int(j) for j in np.flatnonzero(np.abs(r) <= tol)), tol)


def _scaled_tol(P: Polyhedron, y: np.ndarray, tol: float) -> float:
    scale = max(1.0, float(np.max(np.abs(y), initial=0.0)), float(np.max(np.abs(P.b), initial=0.0)))
    return tol * scale


def _project_enumerate(P: Polyhedron, y: np.ndarray, tol: float):
    A, b = P.A, P.b
    s = P.n_constraints
    r = A @ y - b
    if np.all(r <= tol):
        return y.copy(), np.zeros(s)
    # Subsets by increasing size; the first KKT point found is the projection.
    for size in range(1, min(s, P.dim) + 1):
        for subset in itertools.combinations(range(s), size):
            idx = list(subset)
            As = A[idx]
            G = As @ As.T
            rhs = As @ y - b[idx]
            if np.linalg.matrix_rank(G) < size:
                continue
            lam = np.linalg.solve(G, rhs)
            if np.any(lam < -tol):
                continue
            x = y - As.T @ lam
            if np.all(A @ x - b <= tol):
                full = np.zeros(s)
                full[idx] = np.maximum(lam, 0.0)
                return x, full
    raise EmptySetError("empty set")


def _project_dykstra(P: Polyhedron, y: np.ndarray, tol: float, max_iter: int = 100_000):
    A, b = P.A, P.b
    s = P.n_constraints
    x = y.copy()
    corrections = np.zeros((s, P.dim))
    for _ in range(max_iter):
        x_prev = x.copy()
        for j in range(s):
            z = x + corrections[j]
            viol = A[j] @ z - b[j]
            x_new = z - max(viol, 0.0) * A[j]
            corrections[j] = z - x_new
            x = x_new
        if np.linalg.norm(x - x_prev) <= 1e-3 * tol and np.all(A @ x - b <= tol):
            break
    else:
        if not np.all(A @ x - b <= tol):
            raise EmptySetError("empty set")
    active = np.flatnonzero(np.abs(A @ x - b) <= 1e3 * tol)
    lam = np.zeros(s)
    if active.size:
        coef, _ = nnls(A[active].T, y - x)
        lam[active] = coef
    return x, lam


def project(P: Polyhedron, y, tol: float = DEFAULT_TOL, return_multipliers: bool = False):
    """Euclidean projection of ``y`` onto ``P``.

    For at most six halfspaces every candidate active subset is tried in
    order of size, which is exact.  Larger systems fall back to Dykstra's
    alternating projections.

    With ``return_multipliers`` the nonnegative ``lam`` satisfying
    ``y - x = A.T @ lam`` (unit normals) is returned as well.

    Raises
    ------
    EmptySetError
        If no feasible KKT point exists.
    """
    y = P._check_point(y)
    tol_eff = _scaled_tol(P, y, tol)
    if P.n_constraints <= ENUMERATION_LIMIT:
        x, lam = _project_enumerate(P, y, tol_eff)
    else:
        x, lam = _project_dykstra(P, y, tol_eff)
    return (x, lam) if return_multipliers else x


def normal_cone_coefficients(P: Polyhedron, x, v, tol: float = DEFAULT_TOL):
    """Nonnegative weights of the active unit normals reproducing ``v``.

    Returns an array of length ``P.n_constraints`` (zero off the active set),
    or ``None`` when ``v`` is not in the normal cone within ``tol``.
    """
    x = P._check_point(x)
    v = P._check_point(v)
    if not contains(P, x, tol):
        raise ValueError("point is not in the polyhedron")
    lam = np.zeros(P.n_constraints)
    active = list(active_set(P, x, tol).indices)
    if active:
        coef, _ = nnls(P.A[active].T, v)
        lam[active] = coef
    if np.linalg.norm(P.A.T @ lam - v) > tol:
        return None
    return lam


def check_licq(P: Polyhedron, x, tol: float = DEFAULT_TOL) -> bool:
    """Active normals at ``x`` are linearly independent."""
    if not contains(P, x, tol):
        raise ValueError("point is not in the polyhedron")
    active = list(active_set(P, x, tol).indices)
    if not active:
        return True
    sv = np.linalg.svd(P.A[active], compute_uv=False)
    return len(active) <= P.dim and bool(sv.min() > 1e-10)


def slater_margin(P: Polyhedron) -> float:
    """``min_x max_j (<A[j], x> - b[j])``, floored at -1."""
    s, m = P.A.shape
    if s == 0:
        return -1.0
    if s == 1:
        return -1.0
    if s == 2:
        cos = float(P.A[0] @ P.A[1])
        if cos > -1 + 1e-12:
            return -1.0
        # antiparallel pair: slab of width b0 + b1
        return max(-1.0, -(P.b[0] + P.b[1]) / 2)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A_ub = np.hstack([P.A, -np.ones((s, 1))])
    bounds = [(None, None)] * m + [(-1.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=P.b, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"Slater LP failed: {res.message}")
    return float(res.fun)


def check_slater(P: Polyhedron) -> bool:
    return slater_margin(P) < -1e-12
