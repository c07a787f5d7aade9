"""Road network construction from map paths, giant component, structural metrics.

The builder follows a three-step simplification:

1. a path node is *relevant* if it starts or ends a path, or occurs in more
   than one path (or twice in the same path);
2. each path contributes one edge per successive pair of relevant nodes, the
   edge length being the length of the discarded polyline in between;
3. degree-2 nodes are contracted away until a fixed point.

The result is an undirected multigraph without self-loops.
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geo_io import GeoPoint, PathRecord, ValidationError, haversine_km


@dataclass(frozen=True, eq=False)
class RoadNetwork:
    """Immutable multigraph with dense integer node and edge ids.

    ``node_labels[i]`` is the original map id of node ``i``; edge ``j`` joins
    ``edge_u[j]`` and ``edge_v[j]`` (``edge_u[j] < edge_v[j]``) and is
    ``edge_length[j]`` kilometers long.
    """

    node_labels: tuple[str, ...]
    lon: np.ndarray
    lat: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_length: np.ndarray

    def __post_init__(self):
        n = len(self.node_labels)
        if len(set(self.node_labels)) != n:
            raise ValidationError("node labels must be unique")
        if self.lon.shape != (n,) or self.lat.shape != (n,):
            raise ValidationError("coordinate arrays must match node count")
        m = self.edge_u.shape[0]
        if self.edge_v.shape != (m,) or self.edge_length.shape != (m,):
            raise ValidationError("edge arrays must have equal length")
        if m:
            if self.edge_u.min() < 0 or max(self.edge_u.max(), self.edge_v.max()) >= n:
                raise ValidationError("edge endpoint out of range")
            if np.any(self.edge_u == self.edge_v):
                raise ValidationError("self-loops are not allowed")
            if not np.all(np.isfinite(self.edge_length)) or np.any(self.edge_length < 0):
                raise ValidationError("edge lengths must be finite and non-negative")
        for arr in (self.lon, self.lat, self.edge_u, self.edge_v, self.edge_length):
            arr.setflags(write=False)

    @classmethod
    def from_edges(cls, labels: Sequence[str], points: Sequence[GeoPoint],
                   edges: Iterable[tuple[int, int, float]]) -> "RoadNetwork":
        edges = list(edges)
        u = np.array([min(a, b) for a, b, _ in edges], dtype=np.int64)
        v = np.array([max(a, b) for a, b, _ in edges], dtype=np.int64)
        length = np.array([w for _, _, w in edges], dtype=np.float64)
        return cls(
            tuple(labels),
            np.array([p.lon for p in points], dtype=np.float64),
            np.array([p.lat for p in points], dtype=np.float64),
            u, v, length,
        )

    @property
    def n_nodes(self) -> int:
        return len(self.node_labels)

    @property
    def n_edges(self) -> int:
        return int(self.edge_u.shape[0])

    def point(self, node: int) -> GeoPoint:
        return GeoPoint(float(self.lon[node]), float(self.lat[node]))

    def degrees(self) -> np.ndarray:
        """Multigraph degrees; each parallel edge counts once."""
        return np.bincount(np.concatenate([self.edge_u, self.edge_v]),
                           minlength=self.n_nodes)

    @cached_property
    def incidence(self) -> tuple[tuple[int, ...], ...]:
        """Per-node incident edge ids, ascending."""
        inc: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for e, (a, b) in enumerate(zip(self.edge_u.tolist(), self.edge_v.tolist())):
            inc[a].append(e)
            inc[b].append(e)
        return tuple(tuple(x) for x in inc)

    def component_labels(self, alive: np.ndarray | None = None) -> tuple[int, np.ndarray]:
        """Connected components over all nodes using only ``alive`` edges."""
        u, v = self.edge_u, self.edge_v
        if alive is not None:
            u, v = u[alive], v[alive]
        n = self.n_nodes
        adj = coo_matrix((np.ones(u.shape[0], dtype=np.int8), (u, v)), shape=(n, n))
        return connected_components(adj, directed=False)

    def subgraph(self, nodes: np.ndarray) -> "RoadNetwork":
        """Induced subgraph on a boolean node mask; ids re-densified in order."""
        nodes = np.asarray(nodes, dtype=bool)
        new_id = np.full(self.n_nodes, -1, dtype=np.int64)
        new_id[nodes] = np.arange(int(nodes.sum()))
        keep = nodes[self.edge_u] & nodes[self.edge_v]
        return RoadNetwork(
            tuple(lbl for lbl, k in zip(self.node_labels, nodes) if k),
            self.lon[nodes].copy(),
            self.lat[nodes].copy(),
            new_id[self.edge_u[keep]],
            new_id[self.edge_v[keep]],
            self.edge_length[keep].copy(),
        )


@dataclass(frozen=True)
class NetworkMetrics:
    v: int
    e: int
    length_km: float
    avg_degree: float
    meshness: float
    organic: float

    def to_dict(self) -> dict:
        return asdict(self)


def identify_relevant_nodes(paths: Sequence[PathRecord]) -> set[str]:
    """Path endpoints plus every node seen in more than one path position set."""
    relevant: set[str] = set()
    owners: dict[str, int] = {}
    for idx, path in enumerate(paths):
        ids = path.node_ids
        relevant.add(ids[0])
        relevant.add(ids[-1])
        seen_here: set[str] = set()
        for nid in ids:
            if nid in seen_here:
                relevant.add(nid)  # path crosses itself
                continue
            seen_here.add(nid)
            if nid in owners and owners[nid] != idx:
                relevant.add(nid)
            owners[nid] = idx
    return relevant


def _node_table(paths: Sequence[PathRecord]) -> dict[str, GeoPoint]:
    table: dict[str, GeoPoint] = {}
    for path in paths:
        for nid, pt in path.nodes:
            prev = table.setdefault(nid, pt)
            if prev != pt:
                raise ValidationError(
                    f"node {nid!r} has conflicting coordinates {prev} and {pt}"
                )
    return table


def build_edges(paths: Sequence[PathRecord], relevant: set[str]) -> RoadNetwork:
    """Collapse each path onto its relevant nodes.

    Node ids follow first appearance of relevant nodes in path order. Edge
    lengths are polyline lengths; closed runs that return to the same
    relevant node are dropped.
    """
    coords = _node_table(paths)
    index: dict[str, int] = {}
    labels: list[str] = []
    edges: list[tuple[int, int, float]] = []

    def node(nid: str) -> int:
        if nid not in index:
            index[nid] = len(labels)
            labels.append(nid)
        return index[nid]

    for path in paths:
        start = path.nodes[0][0]
        node(start)
        acc = 0.0
        prev_pt = path.nodes[0][1]
        for nid, pt in path.nodes[1:]:
            acc += haversine_km(prev_pt, pt)
            prev_pt = pt
            if nid in relevant:
                a, b = node(start), node(nid)
                if a != b:
                    edges.append((a, b, acc))
                start, acc = nid, 0.0
    return RoadNetwork.from_edges(labels, [coords[x] for x in labels], edges)


def prune_degree_two(network: RoadNetwork) -> RoadNetwork:
    """Contract degree-2 nodes to a fixed point.

    Sweeps visit nodes in ascending id order. A node whose two edges lead to
    distinct neighbours is replaced by one edge carrying the summed length
    (a parallel edge may result). A node whose two edges reach the same
    neighbour is kept, since contracting it would create a self-loop.
    """
    ends: dict[int, tuple[int, int, float]] = {
        e: (int(a), int(b), float(w))
        for e, (a, b, w) in enumerate(zip(network.edge_u, network.edge_v, network.edge_length))
    }
    inc = [set(x) for x in network.incidence]
    alive = [True] * network.n_nodes
    next_id = network.n_edges

    changed = True
    while changed:
        changed = False
        for x in range(network.n_nodes):
            if not alive[x] or len(inc[x]) != 2:
                continue
            e1, e2 = sorted(inc[x])
            a1, b1, w1 = ends[e1]
            a2, b2, w2 = ends[e2]
            o1 = b1 if a1 == x else a1
            o2 = b2 if a2 == x else a2
            if o1 == o2:
                continue
            for e, o in ((e1, o1), (e2, o2)):
                inc[o].discard(e)
                del ends[e]
            ends[next_id] = (min(o1, o2), max(o1, o2), w1 + w2)
            inc[o1].add(next_id)
            inc[o2].add(next_id)
            next_id += 1
            inc[x].clear()
            alive[x] = False
            changed = True

    keep = np.array(alive, dtype=bool)
    new_id = np.cumsum(keep) - 1
    edges = [(int(new_id[a]), int(new_id[b]), w) for _, (a, b, w) in sorted(ends.items())]
    return RoadNetwork.from_edges(
        [lbl for lbl, k in zip(network.node_labels, alive) if k],
        [network.point(i) for i in range(network.n_nodes) if alive[i]],
        edges,
    )


def extract_gcc(network: RoadNetwork) -> RoadNetwork:
    """Largest connected component by node count; ties go to the one holding
    the smallest node id."""
    return network.subgraph(gcc_mask(network))


def gcc_mask(network: RoadNetwork, alive: np.ndarray | None = None) -> np.ndarray:
    if network.n_nodes == 0:
        raise ValidationError("empty network has no giant component")
    _, labels = network.component_labels(alive)
    sizes = np.bincount(labels)
    _, first_node = np.unique(labels, return_index=True)
    biggest = np.flatnonzero(sizes == sizes.max())
    winner = biggest[np.argmin(first_node[biggest])]
    return labels == winner


def compute_metrics(network: RoadNetwork) -> NetworkMetrics:
    v, e = network.n_nodes, network.n_edges
    if v < 3:
        raise ValidationError(f"meshness undefined for v={v} (need v >= 3)")
    census = Counter(network.degrees().tolist())
    return NetworkMetrics(
        v=v,
        e=e,
        length_km=float(np.sum(network.edge_length)),
        avg_degree=2 * e / v,
        meshness=(e - v + 1) / (2 * v - 5),
        organic=(census[1] + census[3]) / v,
    )


def build_network(paths: Sequence[PathRecord]) -> RoadNetwork:
    """Full pipeline: relevant nodes, edges, pruning, giant component."""
    raw = build_edges(paths, identify_relevant_nodes(paths))
    return extract_gcc(prune_degree_two(raw))


# -- interchange dump --------------------------------------------------------

def write_network_csv(network: RoadNetwork) -> tuple[str, str]:
    """Return ``(nodes_csv, edges_csv)``. Floats use repr so reloads are exact."""
    nodes = io.StringIO()
    w = csv.writer(nodes, lineterminator="\n")
    w.writerow(["node_id", "lon", "lat"])
    for lbl, lo, la in zip(network.node_labels, network.lon.tolist(), network.lat.tolist()):
        w.writerow([lbl, repr(lo), repr(la)])
    edges = io.StringIO()
    w = csv.writer(edges, lineterminator="\n")
    w.writerow(["edge_id", "node_a", "node_b", "length_km"])
    labels = network.node_labels
    for j, (a, b, length) in enumerate(zip(network.edge_u.tolist(), network.edge_v.tolist(),
                                           network.edge_length.tolist())):
        w.writerow([j, labels[a], labels[b], repr(length)])
    return nodes.getvalue(), edges.getvalue()


def read_network_csv(nodes_text: str, edges_text: str) -> RoadNetwork:
    rows = list(csv.reader(io.StringIO(nodes_text)))
    if not rows or rows[0] != ["node_id", "lon", "lat"]:
        raise ValidationError("bad node table header")
    labels = [r[0] for r in rows[1:]]
    points = [GeoPoint(float(r[1]), float(r[2])) for r in rows[1:]]
    index = {lbl: i for i, lbl in enumerate(labels)}
    rows = list(csv.reader(io.StringIO(edges_text)))
    if not rows or rows[0] != ["edge_id", "node_a", "node_b", "length_km"]:
        raise ValidationError("bad edge table header")
    try:
        edges = [(index[r[1]], index[r[2]], float(r[3])) for r in rows[1:]]
    except KeyError as exc:
        raise ValidationError(f"edge references unknown node {exc.args[0]!r}") from None
    return RoadNetwork.from_edges(labels, points, edges)
