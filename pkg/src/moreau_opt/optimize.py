"""Derivative-free minimization over boxes with optional linear couplings."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BoxDomain:
    """Box ``lower <= x <= upper`` intersected with ``couplings @ x == rhs``.

    Couplings are eliminated by an affine parameterization ``x = x_p + N z``
    where ``N`` spans the null space of the coupling matrix.  For the common
    single-coupling case used here ``N`` is one column.
    """

    lower: np.ndarray
    upper: np.ndarray
    couplings: np.ndarray = field(default=None)
    rhs: np.ndarray = field(default=None)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("bounds disagree in dimension")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        C = np.zeros((0, lo.size)) if self.couplings is None else np.atleast_2d(np.asarray(self.couplings, float))
        r = np.zeros(C.shape[0]) if self.rhs is None else np.atleast_1d(np.asarray(self.rhs, float))
        if C.shape[1] != lo.size or r.size != C.shape[0]:
            raise ValueError("coupling dimensions do not match the box")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "couplings", C)
        object.__setattr__(self, "rhs", r)
        if C.shape[0] and self._reduced_bounds() is None:
            raise ValueError("couplings are inconsistent with the box")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def reduced_dim(self) -> int:
        return self.dim - np.linalg.matrix_rank(self.couplings) if self.couplings.size else self.dim

    def _parameterization(self):
        C, r = self.couplings, self.rhs
        if not C.shape[0]:
            return np.zeros(self.dim), np.eye(self.dim)
        x_p = np.linalg.lstsq(C, r, rcond=None)[0]
        _, s, vt = np.linalg.svd(C)
        rank = int(np.sum(s > 1e-12))
        N = vt[rank:].T
        # orient columns so the dominant entry is positive (deterministic)
        for j in range(N.shape[1]):
            if N[np.argmax(np.abs(N[:, j])), j] < 0:
                N[:, j] = -N[:, j]
        return x_p, N

    def _reduced_bounds(self):
        """Bounds on ``z`` for one-dimensional null spaces; box bounds otherwise."""
        x_p, N = self._parameterization()
        if not self.couplings.shape[0]:
            return self.lower.copy(), self.upper.copy()
        if N.shape[1] != 1:
            raise ValueError("only couplings leaving a one-dimensional family are supported")
        lo, hi = -math.inf, math.inf
        for i in range(self.dim):
            n = N[i, 0]
            if abs(n) < 1e-14:
                if not self.lower[i] - 1e-12 <= x_p[i] <= self.upper[i] + 1e-12:
                    return None
                continue
            a, b = (self.lower[i] - x_p[i]) / n, (self.upper[i] - x_p[i]) / n
            lo, hi = max(lo, min(a, b)), min(hi, max(a, b))
        if lo > hi + 1e-12:
            return None
        return np.array([lo]), np.array([max(lo, hi)])

    def lift(self, z) -> np.ndarray:
        x_p, N = self._parameterization()
        return x_p + N @ np.atleast_1d(np.asarray(z, dtype=float))

    def reduce(self, x) -> np.ndarray:
        x_p, N = self._parameterization()
        return np.linalg.lstsq(N, np.asarray(x, dtype=float) - x_p, rcond=None)[0]

    def reduced_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self._reduced_bounds()

    def project(self, x) -> np.ndarray:
        """Nearest admissible point along the coupling family, clipped to the box."""
        lo, hi = self.reduced_box()
        z = np.clip(self.reduce(x), lo, hi)
        return np.clip(self.lift(z), self.lower, self.upper)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        return bool(np.all(np.abs(self.couplings @ x - self.rhs) <= tol * max(1.0, np.abs(x).max())))


@dataclass(frozen=True)
class SearchResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool = True
    reason: str = ""
    method: str = ""


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("MOREAU_OPT_THREADS", "1")))
    except ValueError:
        return 1


def grid_search(f, dom: BoxDomain, resolution) -> SearchResult:
    """Exhaustive evaluation on a uniform grid of the coupling-reduced box.

    Ties are broken toward the lexicographically smallest point.
    """
    lo, hi = dom.reduced_box()
    d = lo.size
    res = np.broadcast_to(np.atleast_1d(np.asarray(resolution, dtype=int)), (d,))
    if np.any(res < 2):
        raise ValueError("grid resolution must be at least 2 per axis")
    axes = [np.linspace(lo[i], hi[i], int(res[i])) for i in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    points = [dom.lift(z) for z in mesh]
    workers = _thread_cap()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(f, points))
    else:
        values = [f(p) for p in points]
    values = np.array([v if v == v else math.inf for v in map(float, values)])
    best = min(range(len(points)), key=lambda i: (values[i], tuple(points[i])))
    return SearchResult(points[best], float(values[best]), 1, len(points), True, "exhaustive", "grid")


def nelder_mead(
    f,
    start,
    dom: BoxDomain,
    tol_x: float = 1e-8,
    tol_f: float = 1e-10,
    max_iter: int = 2000,
    initial_step: float = 0.05,
    max_restarts: int = 10,
) -> SearchResult:
    """Nelder-Mead simplex in the coupling-reduced coordinates.

    Proposed vertices are projected onto the box.  Coefficients: reflection
    1, expansion 2, contraction 0.5, shrink 0.5.  Clipping can flatten the
    simplex onto a face of the box, so after convergence the search restarts
    from the best vertex with a fresh simplex until a restart no longer
    improves the value by more than ``tol_f``.
    """
    start = np.asarray(start, dtype=float)
    if not dom.contains(start, 1e-9):
        raise ValueError("start point is not feasible")
    res = _nelder_mead_once(f, start, dom, tol_x, tol_f, max_iter, initial_step)
    its, evals = res.iterations, res.evaluations
    for _ in range(max_restarts):
        if not res.converged or its >= max_iter:
            break
        nxt = _nelder_mead_once(f, res.x, dom, tol_x, tol_f, max_iter - its, initial_step)
        its, evals = its + nxt.iterations, evals + nxt.evaluations
        improved = nxt.fun < res.fun - tol_f
        if nxt.fun <= res.fun:
            res = nxt
        if not improved:
            break
    return SearchResult(res.x, res.fun, its, evals, res.converged, res.reason, "nelder_mead")


def _nelder_mead_once(f, start, dom, tol_x, tol_f, max_iter, initial_step) -> SearchResult:
    lo, hi = dom.reduced_box()
    d = lo.size
    span = np.where(hi > lo, hi - lo, 1.0)
    clip = lambda z: np.clip(z, lo, hi)
    evals = 0

    def F(z):
        nonlocal evals
        evals += 1
        v = float(f(dom.lift(z)))
        return v if v == v else math.inf

    z0 = clip(dom.reduce(start))
    simplex = [z0]
    for i in range(d):
        z = z0.copy()
        step = initial_step * span[i]
        z[i] = z[i] + step if z[i] + step <= hi[i] else z[i] - step
        simplex.append(clip(z))
    simplex = np.array(simplex)
    fs = np.array([F(z) for z in simplex])
    it = 0
    converged, reason = False, "max_iter"
    while it < max_iter:
        order = np.lexsort((np.arange(d + 1), fs))
        simplex, fs = simplex[order], fs[order]
        diam = max(np.max(np.abs(simplex[1:] - simplex[0]), initial=0.0), 0.0)
        spread = fs[-1] - fs[0] if np.all(np.isfinite(fs)) else math.inf
        if diam < tol_x:
            converged, reason = True, "tol_x"
            break
        if spread < tol_f:
            converged, reason = True, "tol_f"
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        zr = clip(centroid + (centroid - simplex[-1]))
        fr = F(zr)
        if fs[0] <= fr < fs[-2]:
            simplex[-1], fs[-1] = zr, fr
            continue
        if fr < fs[0]:
            ze = clip(centroid + 2.0 * (centroid - simplex[-1]))
            fe = F(ze)
            simplex[-1], fs[-1] = (ze, fe) if fe < fr else (zr, fr)
            continue
        if fr < fs[-1]:
            zc = clip(centroid + 0.5 * (zr - centroid))
            fc = F(zc)
            if fc <= fr:
                simplex[-1], fs[-1] = zc, fc
                continue
        else:
            zc = clip(centroid + 0.5 * (simplex[-1] - centroid))
            fc = F(zc)
            if fc < fs[-1]:
                simplex[-1], fs[-1] = zc, fc
                continue
        simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
        fs[1:] = [F(z) for z in simplex[1:]]
    best = int(np.lexsort((np.arange(d + 1), fs))[0])
    return SearchResult(dom.lift(simplex[best]), float(fs[best]), it, evals, converged, reason, "nelder_mead")
