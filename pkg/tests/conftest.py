"""Shared helpers: hand-built digraph box maps and brute-force oracles.

The brute-force routines here are deliberately independent of the library
internals (Floyd-Warshall closures, dense rank counts) so the fast
implementations are checked against slow-but-obvious ones.
"""

import math

import numpy as np
import pytest

from boxdyn import BoxMap, CubicalGrid, PhaseSpace


def digraph_boxmap(n, edges, depth=None):
    """Explicit-form BoxMap realizing an arbitrary digraph on n nodes.

    Nodes are the first n boxes of a 1-D grid; edges is an iterable of
    (source, target) pairs.
    """
    if depth is None:
        depth = max(1, math.ceil(math.log2(max(n, 2))))
    grid = CubicalGrid(PhaseSpace([0.0], [float(1 << depth)]), [depth])
    adj = {}
    for s, t in edges:
        adj.setdefault(int(s), set()).add(int(t))
    explicit = {s: np.array(sorted(ts), dtype=np.int64) for s, ts in adj.items()}
    members = np.arange(n, dtype=np.int64)
    return BoxMap(grid, 0.0, explicit=explicit, members=members)


def reachability_closure(n, edges):
    """Floyd-Warshall style boolean transitive closure (walks of length >= 1)."""
    reach = np.zeros((n, n), dtype=bool)
    for s, t in edges:
        reach[s, t] = True
    for k in range(n):
        reach |= reach[:, k][:, None] & reach[k, :][None, :]
    return reach


def brute_sccs(n, edges):
    """SCC partition + recurrence flags from the reachability closure.

    Returns (components, recurrent) where components is a list of sorted
    node lists and recurrent marks components containing an edge (mutual
    reachability through walks of length >= 1, or a self-loop).
    """
    reach = reachability_closure(n, edges)
    comp_of = [-1] * n
    components = []
    for v in range(n):
        if comp_of[v] != -1:
            continue
        comp = [w for w in range(n)
                if w == v or (reach[v, w] and reach[w, v])]
        for w in comp:
            comp_of[w] = len(components)
        components.append(comp)
    recurrent = [bool(reach[c[0], c[0]]) if len(c) == 1 else True
                 for c in components]
    return components, recurrent


def brute_betti(complex, max_dim):
    """Relative Betti numbers via dense rank-nullity over F_p.

    betti_k = dim C_k - rank d_k - rank d_{k+1}; independent of the
    column-reduction path used by HomologyBasis.
    """
    from boxdyn.homology import rank_mod_p

    out = []
    for k in range(max_dim + 1):
        nk = complex.n_cells(k)
        rk = rank_mod_p(complex.boundary_matrix(k), complex.prime)
        rk1 = rank_mod_p(complex.boundary_matrix(k + 1), complex.prime)
        out.append(nk - rk - rk1)
    return out


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260826)
