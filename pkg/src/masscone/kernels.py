"""Hot numeric kernels.

Every kernel exists twice: a loop implementation compiled with numba, and a
numpy/scipy implementation. Which one the rest of the package calls is
decided once, at import time:

* ``MASSCONE_DISABLE_NUMBA=1`` (or numba not importable) selects numpy.
* otherwise the numba versions are used.

Both variants stay importable under explicit names (``*_numba`` and
``*_numpy``) so tests and ``benchmarks/bench_kernels.py`` can compare them.
The transportation simplex has no vectorised formulation; its fallback is the
same source executed by the interpreter.
"""

import heapq
import itertools
import os

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled():
    return os.environ.get("MASSCONE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


USE_NUMBA = HAVE_NUMBA and not _env_disabled()

# simplex status codes
OPTIMAL = 0
ITERATION_LIMIT = 1


def _njit(func):
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


# ---------------------------------------------------------------------------
# pairwise cost |x_i - y_j|^p


def _cost_matrix_loops(x, y, p):
    n, d = x.shape
    m = y.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                t = x[i, k] - y[j, k]
                s += t * t
            r = np.sqrt(s)
            out[i, j] = r if p == 1.0 else r**p
    return out


cost_matrix_numba = _njit(_cost_matrix_loops)


def cost_matrix_numpy(x, y, p):
    diff = x[:, None, :] - y[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return r if p == 1.0 else r**p


# ---------------------------------------------------------------------------
# transportation simplex (MODI / stepping-stone on the spanning-tree basis)


def _transport_simplex_impl(a, b, C, max_iter):
    n, m = C.shape
    flow = np.zeros((n, m))
    basic = np.zeros((n, m), dtype=np.bool_)

    # north-west corner: staircase of exactly n + m - 1 cells, a spanning tree
    ra = a.copy()
    rb = b.copy()
    i = 0
    j = 0
    while True:
        x = min(ra[i], rb[j])
        flow[i, j] = x
        basic[i, j] = True
        ra[i] -= x
        rb[j] -= x
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1

    scale = 1.0
    for i in range(n):
        for j in range(m):
            if C[i, j] > scale:
                scale = C[i, j]
    eps = 1e-13 * scale

    nodes = n + m
    u = np.zeros(n)
    v = np.zeros(m)
    seen = np.zeros(nodes, dtype=np.bool_)
    parent = np.empty(nodes, dtype=np.int64)
    queue = np.empty(nodes, dtype=np.int64)
    path = np.empty(nodes, dtype=np.int64)
    degenerate_run = 0
    status = ITERATION_LIMIT
    iters = 0

    for it in range(max_iter):
        iters = it
        # potentials u_i + v_j = C_ij on basic cells, rooted at row 0
        seen[:] = False
        seen[0] = True
        u[0] = 0.0
        queue[0] = 0
        head = 0
        tail = 1
        while head < tail:
            node = queue[head]
            head += 1
            if node < n:
                for jj in range(m):
                    if basic[node, jj] and not seen[n + jj]:
                        v[jj] = C[node, jj] - u[node]
                        seen[n + jj] = True
                        queue[tail] = n + jj
                        tail += 1
            else:
                jj = node - n
                for ii in range(n):
                    if basic[ii, jj] and not seen[ii]:
                        u[ii] = C[ii, jj] - v[jj]
                        seen[ii] = True
                        queue[tail] = ii
                        tail += 1

        # entering cell: Dantzig, switching to Bland after a degenerate run
        bland = degenerate_run > nodes
        ei = -1
        ej = -1
        best = -eps
        for ii in range(n):
            for jj in range(m):
                if basic[ii, jj]:
                    continue
                r = C[ii, jj] - u[ii] - v[jj]
                if r < best:
                    best = r
                    ei = ii
                    ej = jj
                    if bland:
                        break
            if bland and ei >= 0:
                break
        if ei < 0:
            status = OPTIMAL
            break

        # tree path from row ei to column ej
        seen[:] = False
        seen[ei] = True
        parent[ei] = -1
        queue[0] = ei
        head = 0
        tail = 1
        target = n + ej
        while head < tail and not seen[target]:
            node = queue[head]
            head += 1
            if node < n:
                for jj in range(m):
                    if basic[node, jj] and not seen[n + jj]:
                        seen[n + jj] = True
                        parent[n + jj] = node
                        queue[tail] = n + jj
                        tail += 1
            else:
                jj = node - n
                for ii in range(n):
                    if basic[ii, jj] and not seen[ii]:
                        seen[ii] = True
                        parent[ii] = node
                        queue[tail] = ii
                        tail += 1

        # walk back from column ej; cells alternate -, +, -, ..., -
        length = 0
        node = target
        while node != -1:
            path[length] = node
            length += 1
            node = parent[node]

        theta = np.inf
        li = -1
        lj = -1
        for k in range(length - 1):
            if k % 2 == 0:
                c_node = path[k]
                r_node = path[k + 1]
                f = flow[r_node, c_node - n]
                if f < theta:
                    theta = f
                    li = r_node
                    lj = c_node - n

        if theta > 0.0:
            degenerate_run = 0
        else:
            degenerate_run += 1

        for k in range(length - 1):
            if k % 2 == 0:
                c_node = path[k]
                r_node = path[k + 1]
                flow[r_node, c_node - n] -= theta
            else:
                r_node = path[k]
                c_node = path[k + 1]
                flow[r_node, c_node - n] += theta
        flow[ei, ej] = theta
        flow[li, lj] = 0.0
        basic[ei, ej] = True
        basic[li, lj] = False

    cost = 0.0
    for i in range(n):
        for j in range(m):
            cost += C[i, j] * flow[i, j]
    return flow, cost, status, iters


transport_simplex_numba = _njit(_transport_simplex_impl)


def transport_simplex_numpy(a, b, C, max_iter):
    return _transport_simplex_impl(a, b, C, max_iter)


# ---------------------------------------------------------------------------
# minimum over permutation couplings (Heap's algorithm)


def _min_permutation_cost_loops(C):
    k = C.shape[0]
    perm = np.arange(k)
    c = np.zeros(k, dtype=np.int64)
    best = 0.0
    for i in range(k):
        best += C[i, perm[i]]
    i = 0
    while i < k:
        if c[i] < i:
            if i % 2 == 0:
                t = perm[0]
                perm[0] = perm[i]
                perm[i] = t
            else:
                t = perm[c[i]]
                perm[c[i]] = perm[i]
                perm[i] = t
            s = 0.0
            for r in range(k):
                s += C[r, perm[r]]
            if s < best:
                best = s
            c[i] += 1
            i = 0
        else:
            c[i] = 0
            i += 1
    return best


min_permutation_cost_numba = _njit(_min_permutation_cost_loops)


def min_permutation_cost_numpy(C):
    k = C.shape[0]
    perms = np.array(list(itertools.permutations(range(k))), dtype=np.int64)
    return float(C[np.arange(k), perms].sum(axis=1).min())


# ---------------------------------------------------------------------------
# Dirac-cone grid edge weights


SCHEME_LEFT = 0
SCHEME_TRAPEZOID = 1
SCHEME_UPPER = 2


def _cone_edge_weights_loops(src_mass, src_space, dst_mass, dst_space, g_src, g_dst, scheme):
    n_edges, d = src_space.shape
    out = np.empty(n_edges)
    for e in range(n_edges):
        s = 0.0
        for k in range(d):
            t = dst_space[e, k] - src_space[e, k]
            s += t * t
        if scheme == 1:
            g = 0.5 * (g_src[e] + g_dst[e])
        elif scheme == 2:
            g = max(g_src[e], g_dst[e])
        else:
            g = g_src[e]
        dm = dst_mass[e] - src_mass[e]
        out[e] = np.sqrt(g * g * dm * dm + s)
    return out


cone_edge_weights_numba = _njit(_cone_edge_weights_loops)


def cone_edge_weights_numpy(src_mass, src_space, dst_mass, dst_space, g_src, g_dst, scheme):
    if scheme == SCHEME_TRAPEZOID:
        g = 0.5 * (g_src + g_dst)
    elif scheme == SCHEME_UPPER:
        g = np.maximum(g_src, g_dst)
    else:
        g = g_src
    dx2 = np.sum((dst_space - src_space) ** 2, axis=1)
    return np.sqrt(g * g * (dst_mass - src_mass) ** 2 + dx2)


# ---------------------------------------------------------------------------
# single-source (multi-seed) Dijkstra on a CSR graph


def _dijkstra_seeded_loops(indptr, indices, weights, seeds, seed_dist):
    n_nodes = indptr.shape[0] - 1
    dist = np.full(n_nodes, np.inf)
    heap = [(0.0, 0)]
    heap.pop()
    for s in range(seeds.shape[0]):
        node = seeds[s]
        if seed_dist[s] < dist[node]:
            dist[node] = seed_dist[s]
            heapq.heappush(heap, (seed_dist[s], node))
    while len(heap) > 0:
        d, node = heapq.heappop(heap)
        if d > dist[node]:
            continue
        for e in range(indptr[node], indptr[node + 1]):
            nxt = indices[e]
            nd = d + weights[e]
            if nd < dist[nxt]:
                dist[nxt] = nd
                heapq.heappush(heap, (nd, nxt))
    return dist


dijkstra_seeded_numba = _njit(_dijkstra_seeded_loops)


def dijkstra_seeded_numpy(indptr, indices, weights, seeds, seed_dist):
    """Same contract via scipy, using a virtual super-source node."""
    n_nodes = indptr.shape[0] - 1
    ext_indptr = np.concatenate([indptr, [indptr[-1] + seeds.shape[0]]])
    ext_indices = np.concatenate([indices, seeds])
    # csgraph treats explicit zeros as missing edges
    ext_weights = np.concatenate([weights, np.maximum(seed_dist, 1e-300)])
    graph = csr_matrix((ext_weights, ext_indices, ext_indptr), shape=(n_nodes + 1, n_nodes + 1))
    dist = _csgraph_dijkstra(graph, directed=True, indices=n_nodes)
    # undo the zero-weight shim on seeds carrying an exact 0 offset
    dist = dist[:n_nodes]
    zero = seeds[seed_dist == 0.0]
    dist[zero] = 0.0
    return dist


# ---------------------------------------------------------------------------
# public dispatch

if USE_NUMBA:
    cost_matrix = cost_matrix_numba
    transport_simplex = transport_simplex_numba
    min_permutation_cost = min_permutation_cost_numba
    cone_edge_weights = cone_edge_weights_numba
    dijkstra_seeded = dijkstra_seeded_numba
else:
    cost_matrix = cost_matrix_numpy
    transport_simplex = transport_simplex_numpy
    min_permutation_cost = min_permutation_cost_numpy
    cone_edge_weights = cone_edge_weights_numpy
    dijkstra_seeded = dijkstra_seeded_numpy


def backend():
    """Name of the active kernel backend: ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"
