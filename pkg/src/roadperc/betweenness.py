"""Edge betweenness on unweighted multigraphs (Brandes accumulation).

Scores sum over *ordered* source/target pairs, so on the path a-b-c the edge
a-b scores 4. Parallel edges are distinct shortest-path hops and therefore
split their pair's share equally.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .road_graph import RoadNetwork


def alive_csr(network: RoadNetwork, alive: np.ndarray):
    """CSR incidence ``(indptr, neighbour, edge_id)`` restricted to alive edges."""
    eids = np.flatnonzero(alive)
    u = network.edge_u[eids]
    v = network.edge_v[eids]
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    eid = np.concatenate([eids, eids])
    order = np.lexsort((eid, src))
    counts = np.bincount(src, minlength=network.n_nodes)
    indptr = np.zeros(network.n_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, dst[order].astype(np.int64), eid[order].astype(np.int64)


@njit(cache=True)
def _brandes_edges(indptr, nbr, eid, sources, n_nodes, n_edges):
    score = np.zeros(n_edges)
    dist = np.full(n_nodes, -1, dtype=np.int64)
    sigma = np.zeros(n_nodes)
    delta = np.zeros(n_nodes)
    order = np.empty(n_nodes, dtype=np.int64)
    for s in sources:
        dist[s] = 0
        sigma[s] = 1.0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            x = order[head]
            head += 1
            for k in range(indptr[x], indptr[x + 1]):
                y = nbr[k]
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    order[tail] = y
                    tail += 1
                if dist[y] == dist[x] + 1:
                    sigma[y] += sigma[x]
        for i in range(tail - 1, 0, -1):
            w = order[i]
            coeff = (1.0 + delta[w]) / sigma[w]
            for k in range(indptr[w], indptr[w + 1]):
                x = nbr[k]
                if dist[x] == dist[w] - 1:
                    c = sigma[x] * coeff
                    score[eid[k]] += c
                    delta[x] += c
        for i in range(tail):
            w = order[i]
            dist[w] = -1
            sigma[w] = 0.0
            delta[w] = 0.0
    return score


def betweenness_scores(network: RoadNetwork, alive: np.ndarray,
                       sources: np.ndarray | None = None) -> np.ndarray:
    """Dense score array over all edge ids; dead edges score 0.

    With ``sources`` given, only shortest paths starting there are counted;
    passing every node of a set of components yields exact scores for the
    edges of those components.
    """
    alive = np.asarray(alive, dtype=bool)
    indptr, nbr, eid = alive_csr(network, alive)
    if sources is None:
        sources = np.arange(network.n_nodes, dtype=np.int64)
    return _brandes_edges(indptr, nbr, eid, np.asarray(sources, dtype=np.int64),
                          network.n_nodes, network.n_edges)


def edge_betweenness(network: RoadNetwork, alive: np.ndarray | None = None) -> dict[int, float]:
    """Map each alive edge id to its betweenness score."""
    if alive is None:
        alive = np.ones(network.n_edges, dtype=bool)
    alive = np.asarray(alive, dtype=bool)
    scores = betweenness_scores(network, alive)
    return {int(e): float(scores[e]) for e in np.flatnonzero(alive)}
