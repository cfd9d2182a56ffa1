"""Warped-product distances on the mass cone.

The length of a curve ``t -> (m(t), rho(t))`` of masses and probability
profiles is ``int sqrt(g(rho)^2 |m'|^2 + |rho'|^2) dt`` with ``|rho'|`` the W_p
metric derivative, and the distance is the infimum over curves.

Two discretisations are provided:

* :func:`path_length` for explicit piecewise paths (any profiles);
* :class:`DiracConeGraph`, which restricts profiles to Diracs, so the cone is
  ``(0, inf) x R^n``, and replaces the infimum by a shortest path on a grid
  graph. Every graph path is an admissible curve, so graph distances are
  upper bounds of the continuum value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Optional

import numpy as np
from scipy.sparse import coo_matrix

from . import kernels
from .errors import GridTooCoarseError, UnsupportedExponentError
from .measure import DiscreteMeasure, decompose, total_mass
from .transport import wasserstein_distance

WARPING_KINDS = ("constant", "one_plus_wp_to_origin", "one_plus_inf_wp_to_diracs", "custom")
G_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class WarpingFunction:
    """Warping ``g`` on probability measures.

    ``kind`` selects a built-in; ``value`` is the constant for ``"constant"``
    and ``evaluator`` the callable for ``"custom"``.
    """

    kind: str
    p: float = 1.0
    value: float = 1.0
    evaluator: Optional[Callable[[DiscreteMeasure], float]] = None

    def __post_init__(self):
        if self.kind not in WARPING_KINDS:
            raise ValueError(f"unknown warping kind {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError("constant warping must be positive")
        if self.kind == "custom" and self.evaluator is None:
            raise ValueError("custom warping needs an evaluator")
        if self.kind == "one_plus_inf_wp_to_diracs" and self.p not in (1.0, 2.0):
            raise UnsupportedExponentError("inf over Diracs is implemented for p in {1, 2} only")

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", value=float(c))

    def __call__(self, mu):
        return eval_warping(self, mu)

    def on_diracs(self, points):
        """``g(delta_x)`` for every row ``x`` of ``points``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "constant":
            return np.full(points.shape[0], self.value)
        if self.kind == "one_plus_wp_to_origin":
            return 1.0 + np.linalg.norm(points, axis=1)
        if self.kind == "one_plus_inf_wp_to_diracs":
            return np.ones(points.shape[0])
        return np.array([self(DiscreteMeasure.dirac(x)) for x in points])

    def to_dict(self):
        out = {"kind": self.kind, "p": self.p}
        if self.kind == "constant":
            out["value"] = self.value
        if self.kind == "custom":
            out["evaluator"] = getattr(self.evaluator, "__name__", repr(self.evaluator))
        return out


def weighted_geometric_median(points, weights, tol=1e-12, max_iter=10_000):
    """Weighted geometric median by Weiszfeld iteration.

    In one dimension the weighted median is returned directly. The iteration
    handles landing on a data point with the Vardi-Zhang correction.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if points.shape[1] == 1:
        order = np.argsort(points[:, 0])
        cw = np.cumsum(weights[order])
        k = int(np.searchsorted(cw, 0.5 * cw[-1]))
        return points[order[min(k, len(order) - 1)]].copy()
    y = weights @ points / weights.sum()
    for _ in range(max_iter):
        diff = points - y
        r = np.linalg.norm(diff, axis=1)
        at = r < 1e-15
        if np.any(at):
            # y coincides with a support point: it is optimal iff the pull of
            # the others does not exceed that point's weight
            pull = (weights[~at, None] * diff[~at] / r[~at, None]).sum(axis=0)
            if np.linalg.norm(pull) <= weights[at].sum():
                return y
            inv = weights[~at] / r[~at]
            t = (inv @ points[~at]) / inv.sum()
            eta = weights[at].sum()
            rr = np.linalg.norm(pull)
            y_new = max(0.0, 1 - eta / rr) * t + min(1.0, eta / rr) * y
        else:
            inv = weights / r
            y_new = (inv @ points) / inv.sum()
        if np.linalg.norm(y_new - y) <= tol * (1.0 + np.linalg.norm(y)):
            return y_new
        y = y_new
    return y


def eval_warping(g, mu):
    """Evaluate ``g`` on a probability measure ``mu``."""
    m = total_mass(mu)
    if abs(m - 1.0) > 1e-9:
        raise ValueError(f"warping functions take probability measures (mass {m!r})")
    if g.kind == "constant":
        return g.value
    if g.kind == "one_plus_wp_to_origin":
        return 1.0 + wasserstein_distance(mu, DiscreteMeasure.dirac(np.zeros(mu.dim)), g.p)
    if g.kind == "one_plus_inf_wp_to_diracs":
        if g.p == 2.0:
            center = mu.weights @ mu.points / mu.weights.sum()
        elif g.p == 1.0:
            center = weighted_geometric_median(mu.points, mu.weights)
        else:  # pragma: no cover - rejected at construction
            raise UnsupportedExponentError("p must be 1 or 2")
        return 1.0 + wasserstein_distance(mu, DiscreteMeasure.dirac(center), g.p)
    value = float(g.evaluator(mu))
    if not math.isfinite(value) or value < G_FLOOR:
        raise ValueError(f"custom warping returned {value!r}")
    return value


# ---------------------------------------------------------------------------
# explicit paths


@dataclass(frozen=True)
class ConePath:
    """Piecewise path through (mass, probability profile) waypoints."""

    waypoints: tuple
    times: Optional[tuple] = None

    def __post_init__(self):
        wps = tuple((float(m), rho) for m, rho in self.waypoints)
        if len(wps) < 2:
            raise ValueError("a path needs at least two waypoints")
        for m, rho in wps:
            if not m > 0:
                raise ValueError("waypoint masses must be positive")
            if abs(total_mass(rho) - 1.0) > 1e-9:
                raise ValueError("waypoint profiles must be probability measures")
        object.__setattr__(self, "waypoints", wps)
        if self.times is None:
            object.__setattr__(self, "times", tuple(np.linspace(0.0, 1.0, len(wps))))

    @classmethod
    def from_measures(cls, measures):
        return cls(tuple((d.mass, d.profile) for d in map(decompose, measures)))

    def reversed(self):
        return ConePath(self.waypoints[::-1])


SCHEMES = ("left", "trapezoid", "upper")


def _segment_g(scheme, g0, g1):
    if scheme == "trapezoid":
        return 0.5 * (g0 + g1)
    if scheme == "upper":
        return max(g0, g1)
    return g0


def path_length(path, g, p=1.0, scheme="left"):
    """Discrete length ``sum_k sqrt(g(rho_k)^2 (m_{k+1} - m_k)^2 + W_p(rho_k, rho_{k+1})^2)``.

    ``scheme="trapezoid"`` uses the mean of ``g`` at both ends of a segment
    and ``scheme="upper"`` the larger value; both make the length invariant
    under reversing the path. When ``g`` is convex along each segment the
    upper rule never increases under subdivision, so grid distances built
    with it are monotone under refinement.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    wps = path.waypoints
    gs = [eval_warping(g, rho) for _, rho in wps]
    total = 0.0
    for k in range(len(wps) - 1):
        (m0, r0), (m1, r1) = wps[k], wps[k + 1]
        gk = _segment_g(scheme, gs[k], gs[k + 1])
        w = wasserstein_distance(r0, r1, p)
        total += math.sqrt(gk * gk * (m1 - m0) ** 2 + w * w)
    return total


# ---------------------------------------------------------------------------
# Dirac-cone grid graph


@dataclass(frozen=True)
class ConeGrid:
    """Grid over ``[mass_min, mass_max] x box``.

    ``stencil_radius`` bounds the index offsets of graph edges (Chebyshev
    norm over all axes, mass included); only primitive offsets are used.
    """

    mass_min: float
    mass_max: float
    mass_steps: int
    box_lo: tuple
    box_hi: tuple
    spatial_steps: int
    stencil_radius: int = 0
    scheme: str = "left"

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.box_lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.box_hi))
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)
        if len(lo) != len(hi):
            raise ValueError("box corners differ in dimension")
        if self.mass_steps < 3 or self.spatial_steps < 3:
            raise GridTooCoarseError("a cone grid needs at least 3 nodes per axis")
        if not (0 < self.mass_min < self.mass_max):
            raise ValueError("need 0 < mass_min < mass_max")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("box needs hi > lo on every axis")
        if self.stencil_radius == 0:
            # radius 3 keeps the direction error of straight moves below ~1.5%
            # in 1-D space; higher dimensions fall back to the 3^k neighbourhood
            object.__setattr__(self, "stencil_radius", 3 if len(lo) == 1 else 1)
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")

    @property
    def dim(self):
        return len(self.box_lo)

    def refined(self, times=1):
        """Halve every spacing ``times`` times; coarse nodes stay nodes."""
        grid = self
        for _ in range(times):
            grid = ConeGrid(
                grid.mass_min,
                grid.mass_max,
                2 * grid.mass_steps - 1,
                grid.box_lo,
                grid.box_hi,
                2 * grid.spatial_steps - 1,
                grid.stencil_radius,
                grid.scheme,
            )
        return grid

    def axes(self):
        mass = np.linspace(self.mass_min, self.mass_max, self.mass_steps)
        space = [np.linspace(l, h, self.spatial_steps) for l, h in zip(self.box_lo, self.box_hi)]
        return mass, space

    def to_dict(self):
        return {
            "mass_min": self.mass_min,
            "mass_max": self.mass_max,
            "mass_steps": self.mass_steps,
            "box_lo": list(self.box_lo),
            "box_hi": list(self.box_hi),
            "spatial_steps": self.spatial_steps,
            "stencil_radius": self.stencil_radius,
            "scheme": self.scheme,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["box_lo"] = tuple(float(v) for v in data["box_lo"])
        data["box_hi"] = tuple(float(v) for v in data["box_hi"])
        return cls(**data)


DEFAULT_SPATIAL_STEPS = 161
DEFAULT_LEVELS = 3
MAX_DEFAULT_NODES = 2_000_000


def default_grid(src, dst, g=None, spatial_steps=DEFAULT_SPATIAL_STEPS, pad=0.1, stencil_radius=0):
    """Finest default grid around two Dirac-cone points.

    The box is the bounding box of the two points, padded by ``pad`` of its
    span; the mass spacing is chosen so ``g * dm`` matches the spatial spacing
    at the median warping value, which keeps grid cells roughly square in the
    warped metric.
    """
    (m1, x1), (m2, x2) = src, dst
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    lo = np.minimum(x1, x2)
    hi = np.maximum(x1, x2)
    g = g or WarpingFunction.constant(1.0)
    # measure the mass gap in warped units so that large g does not explode the mass axis
    g_end = float(np.max(g.on_diracs(np.vstack([x1, x2]))))
    span = max(float(np.max(hi - lo)), g_end * abs(m1 - m2), 1.0)
    lo = lo - pad * span
    hi = hi + pad * span
    h = float(np.max(hi - lo)) / (spatial_steps - 1)
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    g_typ = float(np.median(g.on_diracs(np.vstack([corners, x1, x2]))))
    mlo = min(m1, m2)
    mhi = max(m1, m2)
    mpad = max(pad * (mhi - mlo), 2 * h / g_typ)
    mass_min = max(mlo - mpad, 0.5 * mlo)
    mass_max = mhi + mpad
    mass_steps = max(3, int(math.ceil((mass_max - mass_min) * g_typ / h)) + 1)
    if mass_steps * spatial_steps ** len(lo) > MAX_DEFAULT_NODES:
        raise GridTooCoarseError(
            f"default grid would need {mass_steps} mass levels; pass an explicit ConeGrid"
        )
    return ConeGrid(mass_min, mass_max, mass_steps, tuple(lo), tuple(hi), spatial_steps, stencil_radius)


def _primitive_offsets(ndim, radius):
    offs = []
    for o in itertools.product(range(-radius, radius + 1), repeat=ndim):
        if any(o) and reduce(math.gcd, (abs(v) for v in o)) == 1:
            offs.append(o)
    return np.array(offs, dtype=np.int64)


class DiracConeGraph:
    """Shortest-path approximation of the warped distance between ``m delta_x`` points.

    The graph is built once; :meth:`distance` queries only read it.
    """

    def __init__(self, grid, g, p=1.0):
        self.grid = grid
        self.g = g
        self.p = float(p)
        self.mass_axis, self.space_axes = grid.axes()
        self.shape = (grid.mass_steps,) + (grid.spatial_steps,) * grid.dim
        self.h_mass = self.mass_axis[1] - self.mass_axis[0]
        self.h_space = np.array([ax[1] - ax[0] for ax in self.space_axes])
        self.offsets = _primitive_offsets(1 + grid.dim, grid.stencil_radius)

        coords = np.meshgrid(*self.space_axes, indexing="ij")
        self.space_points = np.stack([c.ravel() for c in coords], axis=1)
        self.g_space = np.maximum(g.on_diracs(self.space_points), G_FLOOR)
        n_space = self.space_points.shape[0]
        self.n_nodes = grid.mass_steps * n_space

        idx = np.indices(self.shape).reshape(len(self.shape), -1).T  # (n_nodes, 1 + dim)
        srcs, dsts, wts = [], [], []
        for off in self.offsets:
            tgt = idx + off
            ok = np.all((tgt >= 0) & (tgt < np.array(self.shape)), axis=1)
            s_idx = idx[ok]
            t_idx = tgt[ok]
            s_node = np.ravel_multi_index(s_idx.T, self.shape)
            t_node = np.ravel_multi_index(t_idx.T, self.shape)
            s_sp = s_node % n_space
            t_sp = t_node % n_space
            w = kernels.cone_edge_weights(
                np.ascontiguousarray(self.mass_axis[s_idx[:, 0]]),
                np.ascontiguousarray(self.space_points[s_sp]),
                np.ascontiguousarray(self.mass_axis[t_idx[:, 0]]),
                np.ascontiguousarray(self.space_points[t_sp]),
                np.ascontiguousarray(self.g_space[s_sp]),
                np.ascontiguousarray(self.g_space[t_sp]),
                SCHEMES.index(grid.scheme),
            )
            srcs.append(s_node)
            dsts.append(t_node)
            wts.append(w)
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        wt = np.concatenate(wts)
        csr = coo_matrix((wt, (src, dst)), shape=(self.n_nodes, self.n_nodes)).tocsr()
        csr.sort_indices()
        self.indptr = csr.indptr.astype(np.int64)
        self.indices = csr.indices.astype(np.int64)
        self.weights = csr.data.astype(float)

    @property
    def n_edges(self):
        return self.indices.shape[0]

    def _segment(self, m0, x0, g0, m1, x1, g1):
        gk = _segment_g(self.grid.scheme, g0, g1)
        dx2 = float(np.sum((np.asarray(x1) - np.asarray(x0)) ** 2))
        return math.sqrt(gk * gk * (m1 - m0) ** 2 + dx2)

    def _frac_index(self, m, x):
        t = np.empty(1 + self.grid.dim)
        t[0] = (m - self.mass_axis[0]) / self.h_mass
        t[1:] = (x - np.array(self.grid.box_lo)) / self.h_space
        return t

    def _attachments(self, m, x):
        """Grid nodes within ``stencil_radius`` index units of the point (every axis)."""
        t = self._frac_index(m, x)
        R = self.grid.stencil_radius
        ranges = []
        for k, tk in enumerate(t):
            lo = max(0, int(math.ceil(tk - R - 1e-9)))
            hi = min(self.shape[k] - 1, int(math.floor(tk + R + 1e-9)))
            ranges.append(np.arange(lo, hi + 1))
        mesh = np.meshgrid(*ranges, indexing="ij")
        idx = np.stack([a.ravel() for a in mesh], axis=1)
        return np.ravel_multi_index(idx.T, self.shape), idx

    def _check_inside(self, m, x):
        if not (self.mass_axis[0] - 1e-12 <= m <= self.mass_axis[-1] + 1e-12):
            raise ValueError(f"mass {m} outside grid range [{self.mass_axis[0]}, {self.mass_axis[-1]}]")
        lo = np.array(self.grid.box_lo)
        hi = np.array(self.grid.box_hi)
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            raise ValueError(f"point {x} outside grid box")

    def distance(self, src, dst):
        """Graph distance from ``src = (mass, point)`` to ``dst``; an upper bound of the warped distance."""
        (m0, x0), (m1, x1) = src, dst
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        m0, m1 = float(m0), float(m1)
        self._check_inside(m0, x0)
        self._check_inside(m1, x1)
        if m0 == m1 and np.array_equal(x0, x1):
            return 0.0
        g0 = max(float(self.g.on_diracs(x0)[0]), G_FLOOR)
        g1 = max(float(self.g.on_diracs(x1)[0]), G_FLOOR)

        seeds, seed_idx = self._attachments(m0, x0)
        n_space = self.space_points.shape[0]
        seed_dist = np.array(
            [
                self._segment(m0, x0, g0, self.mass_axis[i[0]], self.space_points[s % n_space], self.g_space[s % n_space])
                for s, i in zip(seeds, seed_idx)
            ]
        )
        dist = kernels.dijkstra_seeded(self.indptr, self.indices, self.weights, seeds.astype(np.int64), seed_dist)

        ends, end_idx = self._attachments(m1, x1)
        best = math.inf
        for s, i in zip(ends, end_idx):
            if math.isfinite(dist[s]):
                sp = s % n_space
                best = min(
                    best,
                    dist[s] + self._segment(self.mass_axis[i[0]], self.space_points[sp], self.g_space[sp], m1, x1, g1),
                )
        # direct segment when the endpoints are stencil neighbours
        t0 = self._frac_index(m0, x0)
        t1 = self._frac_index(m1, x1)
        if np.all(np.abs(t1 - t0) <= self.grid.stencil_radius + 1e-9):
            best = min(best, self._segment(m0, x0, g0, m1, x1, g1))
        return best


def warped_distance_dirac_cone(src, dst, g, p=1.0, grid=None):
    """Warped distance between ``src = (m, x)`` and ``dst`` on the Dirac cone.

    Without ``grid`` the finest default grid around the two points is used.
    """
    if grid is None:
        grid = default_grid(src, dst, g)
    return DiracConeGraph(grid, g, p).distance(src, dst)


def refinement_series(src, dst, g, grid, levels=DEFAULT_LEVELS, p=1.0):
    """Distances on ``grid`` and its successive halvings (coarsest first)."""
    out = []
    for k in range(levels):
        out.append(warped_distance_dirac_cone(src, dst, g, p, grid.refined(k)))
    return out


def _as_cone_point(mu):
    if mu.size != 1:
        raise ValueError("the warped family is implemented on Dirac measures m*delta_x only")
    return float(mu.weights[0]), mu.points[0]


@dataclass(eq=False)
class _WarpedMetric:
    g: WarpingFunction
    grid: Optional[ConeGrid] = None
    p: float = 1.0
    _graph: Optional[DiracConeGraph] = field(default=None, repr=False)

    def __call__(self, mu1, mu2):
        a = _as_cone_point(mu1)
        b = _as_cone_point(mu2)
        if self.grid is None:
            return warped_distance_dirac_cone(a, b, self.g, self.p)
        if self._graph is None:
            self._graph = DiracConeGraph(self.grid, self.g, self.p)
        return self._graph.distance(a, b)


def warped_metric(g, grid=None, p=1.0):
    """Callable metric on Dirac measures; a fixed ``grid`` shares one graph across calls."""
    return _WarpedMetric(g, grid, p)
