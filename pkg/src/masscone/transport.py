"""Exact p-Wasserstein distances between discrete measures of equal mass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from . import kernels
from .errors import MassMismatchError, UnsupportedInstanceError, ZeroMassError
from .measure import DiscreteMeasure, total_mass

MASS_TOL = 1e-9
BRUTE_FORCE_MAX = 8


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between ``source`` and ``target`` weights.

    ``couplings[i, j]`` is the mass moved from source atom ``i`` to target atom
    ``j``; the atoms are those of the canonicalised measures.
    """

    couplings: np.ndarray
    source: np.ndarray
    target: np.ndarray

    @property
    def row_marginals(self):
        return self.couplings.sum(axis=1)

    @property
    def column_marginals(self):
        return self.couplings.sum(axis=0)

    def marginal_error(self):
        return max(
            float(np.max(np.abs(self.row_marginals - self.source), initial=0.0)),
            float(np.max(np.abs(self.column_marginals - self.target), initial=0.0)),
        )

    def is_feasible(self, tol=1e-10):
        return bool(np.all(self.couplings >= 0)) and self.marginal_error() <= tol


def cost_matrix(mu, nu, p=1.0):
    """Matrix of ``|x_i - y_j|^p`` between the supports of ``mu`` and ``nu``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return kernels.cost_matrix(
        np.ascontiguousarray(mu.points), np.ascontiguousarray(nu.points), float(p)
    )


def _check_pair(mu, nu, rescale):
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    m_mu = total_mass(mu)
    m_nu = total_mass(nu)
    if m_mu == 0 or m_nu == 0:
        raise ZeroMassError("Wasserstein distance needs two measures of positive mass")
    a = mu.weights
    b = nu.weights
    if abs(m_mu - m_nu) > MASS_TOL * max(1.0, m_mu, m_nu):
        if not rescale:
            raise MassMismatchError(f"masses differ: {m_mu!r} vs {m_nu!r}")
        b = b * (m_mu / m_nu)
    else:
        # absorb sub-tolerance rounding so the simplex sees balanced marginals
        b = b * (m_mu / m_nu)
    return np.ascontiguousarray(a, dtype=float), np.ascontiguousarray(b, dtype=float)


def dirac_distance(x, y):
    """W_p between two Diracs of equal mass: the Euclidean distance, for every p."""
    return float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))


def wasserstein_p(mu, nu, p=1.0, rescale=False, return_plan=True, max_iter=None):
    """Exact W_p between two discrete measures of equal mass.

    The transport linear program is solved by a transportation simplex, so the
    plan is a vertex of the transport polytope. Single-atom instances use the
    closed form instead.

    Parameters
    ----------
    mu, nu : DiscreteMeasure
        Measures of the same (positive) mass, up to ``MASS_TOL`` relative.
    p : float
        Exponent, ``p >= 1``.
    rescale : bool
        Rescale ``nu`` to the mass of ``mu`` instead of raising
        :class:`MassMismatchError`.
    return_plan : bool
        When false only the distance is returned.

    Returns
    -------
    distance : float
    plan : TransportPlan
        Only when ``return_plan`` is true.
    """
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    a, b = _check_pair(mu, nu, rescale)
    n, m = a.shape[0], b.shape[0]

    if n == 1 or m == 1:
        # the only coupling: everything goes to (or comes from) the single atom
        flow = b.reshape(1, -1).copy() if n == 1 else a.reshape(-1, 1).copy()
        if n == 1 and m == 1:
            dist = dirac_distance(mu.points[0], nu.points[0])
            if a[0] != 1.0:
                dist *= a[0] ** (1.0 / p)
        else:
            dist = float(np.sum(cost_matrix(mu, nu, p) * flow)) ** (1.0 / p)
    else:
        C = cost_matrix(mu, nu, p)
        if max_iter is None:
            max_iter = 50 * (n + m) * max(n, m) + 1000
        flow, cost, status, _ = kernels.transport_simplex(a, b, C, int(max_iter))
        if status != kernels.OPTIMAL:
            flow, cost = _solve_highs(a, b, C)
        dist = max(float(cost), 0.0) ** (1.0 / p)

    if not return_plan:
        return dist
    return dist, TransportPlan(flow, a, b)


def wasserstein_distance(mu, nu, p=1.0, rescale=False):
    """Convenience wrapper returning only the distance."""
    return wasserstein_p(mu, nu, p, rescale=rescale, return_plan=False)


def _solve_highs(a, b, C):
    n, m = C.shape
    rows = np.concatenate([np.repeat(np.arange(n), m), n + np.tile(np.arange(m), n)])
    cols = np.concatenate([np.arange(n * m), np.arange(n * m)])
    A = coo_matrix((np.ones(2 * n * m), (rows, cols)), shape=(n + m, n * m)).tocsr()
    res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed on a transport LP: {res.message}")
    flow = np.maximum(res.x.reshape(n, m), 0.0)
    return flow, float(C.ravel() @ res.x)


def wasserstein_lp(mu, nu, p=1.0):
    """W_p through scipy's HiGHS dual simplex; an independent cross-check of the kernel."""
    a, b = _check_pair(mu, nu, rescale=False)
    _, cost = _solve_highs(a, b, cost_matrix(mu, nu, p))
    return max(cost, 0.0) ** (1.0 / float(p))


def brute_force_wasserstein(mu, nu, p=1.0):
    """W_p by enumerating every permutation coupling.

    Valid only for uniform measures on supports of the same size ``k <= 8``;
    there the optimum is attained at a permutation matrix (Birkhoff), so this
    is an exact, solver-free oracle. Atoms are taken as listed, so duplicate
    points must not be merged away: pass measures built with distinct points.
    """
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    k = mu.size
    if k == 0 or nu.size != k:
        raise UnsupportedInstanceError("supports must be non-empty and of equal size")
    if k > BRUTE_FORCE_MAX:
        raise UnsupportedInstanceError(f"support size {k} exceeds {BRUTE_FORCE_MAX}")
    for w in (mu.weights, nu.weights):
        if np.max(w) - np.min(w) > 1e-12 * max(1.0, np.max(w)):
            raise UnsupportedInstanceError("brute force needs uniform weights")
    if abs(mu.weights[0] - nu.weights[0]) > MASS_TOL * max(1.0, mu.weights[0]):
        raise MassMismatchError("masses differ")
    C = cost_matrix(mu, nu, p)
    best = kernels.min_permutation_cost(np.ascontiguousarray(C))
    return float(best * mu.weights[0]) ** (1.0 / float(p))


__all__ = [
    "DiscreteMeasure",
    "TransportPlan",
    "brute_force_wasserstein",
    "cost_matrix",
    "dirac_distance",
    "wasserstein_distance",
    "wasserstein_lp",
    "wasserstein_p",
]
