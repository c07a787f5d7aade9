"""Bond percolation under random failure (Error) and betweenness attack (Attack).

Both schemes remove edges from a connected network and follow the sizes of
the largest (GCC) and second-largest (SLCC) connected components. A run
stops once the two are equal; its threshold is the removed fraction at which
the SLCC peaks.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from .betweenness import betweenness_scores
from .geo_io import ValidationError
from .road_graph import RoadNetwork, gcc_mask

log = logging.getLogger(__name__)

# relative slack under which two betweenness scores count as tied
SCORE_TIE_RTOL = 1e-10


class Checkpoint(NamedTuple):
    p: float
    gcc_size: int
    slcc_size: int


@dataclass
class PercolationRun:
    scheme: str
    curve: list[Checkpoint]
    p_c: float
    removed_order: np.ndarray
    removed_at_pc: int
    seed: int | None = None


@dataclass
class PercolationEnsemble:
    runs: list[PercolationRun]
    p_c_mean: float
    p_c_std: float
    mean_curve: list[tuple[float, float, float]] = field(repr=False)

    @property
    def p_c_values(self) -> list[float]:
        return [r.p_c for r in self.runs]


def component_sizes(network: RoadNetwork, alive: np.ndarray) -> list[int]:
    """Component node counts (descending) using all nodes and alive edges."""
    _, labels = network.component_labels(np.asarray(alive, dtype=bool))
    return sorted(np.bincount(labels).tolist(), reverse=True)


def _top_two(sizes: Sequence[int]) -> tuple[int, int]:
    if len(sizes) == 0:
        return 0, 0
    if len(sizes) == 1:
        return int(sizes[0]), 0
    top = np.partition(np.asarray(sizes), -2)[-2:]
    return int(top[1]), int(top[0])


def detect_threshold(curve: Sequence[Checkpoint]) -> float:
    """``p`` of the checkpoint with the largest SLCC, earliest on ties."""
    if not curve:
        raise ValueError("empty curve")
    best = max(range(len(curve)), key=lambda i: (curve[i][2], -i))
    return curve[best][0]


def _threshold_index(curve: Sequence[Checkpoint]) -> int:
    return max(range(len(curve)), key=lambda i: (curve[i][2], -i))


def _require_connected(network: RoadNetwork):
    if network.n_edges == 0 or network.n_nodes < 2:
        raise ValidationError("percolation needs at least one edge")
    n_comp, _ = network.component_labels()
    if n_comp != 1:
        raise ValidationError("network is disconnected: run on GCC only")


def checkpoint_step(n_edges: int, checkpoint_fraction: float) -> int:
    if not 0 < checkpoint_fraction <= 0.5:
        raise ValidationError("checkpoint_fraction must lie in (0, 0.5]")
    # round away float noise such as 0.01 * 4900 = 49.000000000000004
    return max(1, math.ceil(round(checkpoint_fraction * n_edges, 9)))


@njit(cache=True)
def _reverse_union_find(n_nodes, edge_u, edge_v, order, marks):
    """GCC/SLCC sizes after removing ``order[:r]`` for each r in ``marks``.

    ``marks`` must be descending. Edges are re-inserted from the end of the
    removal order, so one sweep serves every checkpoint.
    """
    parent = np.arange(n_nodes)
    size = np.ones(n_nodes, dtype=np.int64)
    gcc = np.zeros(marks.shape[0], dtype=np.int64)
    slcc = np.zeros(marks.shape[0], dtype=np.int64)
    r = order.shape[0]
    for k in range(marks.shape[0]):
        while r > marks[k]:
            r -= 1
            a = edge_u[order[r]]
            b = edge_v[order[r]]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a != b:
                if size[a] < size[b]:
                    a, b = b, a
                parent[b] = a
                size[a] += size[b]
        first = 0
        second = 0
        for i in range(n_nodes):
            if parent[i] == i:
                s = size[i]
                if s > first:
                    second = first
                    first = s
                elif s > second:
                    second = s
        gcc[k] = first
        slcc[k] = second
    return gcc, slcc


def removal_curve(network: RoadNetwork, order: np.ndarray, marks: Sequence[int]) -> list[Checkpoint]:
    """Checkpoints after removing ``order[:r]`` for each ascending ``r`` in marks."""
    marks_desc = np.asarray(marks, dtype=np.int64)[::-1].copy()
    gcc, slcc = _reverse_union_find(network.n_nodes, network.edge_u, network.edge_v,
                                    np.asarray(order, dtype=np.int64), marks_desc)
    m = network.n_edges
    return [Checkpoint(int(r) / m, int(g), int(s))
            for r, g, s in zip(marks, gcc[::-1].tolist(), slcc[::-1].tolist())]


def run_error(network: RoadNetwork, seed: int, checkpoint_fraction: float = 0.01) -> PercolationRun:
    """Remove edges in a seeded uniform random order, checking periodically."""
    _require_connected(network)
    m = network.n_edges
    step = checkpoint_step(m, checkpoint_fraction)
    order = np.random.default_rng(seed).permutation(m)
    marks = list(range(0, m, step)) + [m]
    full = removal_curve(network, order, marks)
    curve = []
    for cp in full:
        curve.append(cp)
        log.debug("error seed=%d p=%.6f gcc=%d slcc=%d", seed, *cp)
        if cp.gcc_size == cp.slcc_size:
            break
    idx = _threshold_index(curve)
    return PercolationRun("error", curve, curve[idx].p, order, marks[idx], seed=seed)


def run_error_ensemble(network: RoadNetwork, base_seed: int, runs: int = 50,
                       checkpoint_fraction: float = 0.01) -> PercolationEnsemble:
    """``runs`` Error runs seeded ``base_seed + i``; per-run thresholds averaged."""
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    members = [run_error(network, base_seed + i, checkpoint_fraction) for i in range(runs)]
    pcs = np.array([r.p_c for r in members])
    shortest = min(len(r.curve) for r in members)
    mean_curve = []
    for k in range(shortest):
        mean_curve.append((
            members[0].curve[k].p,
            float(np.mean([r.curve[k].gcc_size for r in members])),
            float(np.mean([r.curve[k].slcc_size for r in members])),
        ))
    return PercolationEnsemble(members, float(pcs.mean()), float(pcs.std()), mean_curve)


def run_attack(network: RoadNetwork, recompute_every: int = 1) -> PercolationRun:
    """Repeatedly remove the alive edge of highest betweenness.

    Ties (within ``SCORE_TIE_RTOL``) go to the smallest edge id. Scores are
    refreshed every ``recompute_every`` removals, only inside components that
    lost an edge since the last refresh; elsewhere they cannot have changed.
    """
    if recompute_every < 1:
        raise ValidationError("recompute_every must be >= 1")
    _require_connected(network)
    m = network.n_edges
    alive = np.ones(m, dtype=bool)
    scores = betweenness_scores(network, alive)
    curve = [Checkpoint(0.0, network.n_nodes, 0)]
    order: list[int] = []
    dirty: list[int] = []
    while alive.any():
        live = np.where(alive, scores, -np.inf)
        best = live.max()
        target = int(np.flatnonzero(live >= best - SCORE_TIE_RTOL * abs(best))[0])
        alive[target] = False
        order.append(target)
        dirty.extend((int(network.edge_u[target]), int(network.edge_v[target])))

        _, labels = network.component_labels(alive)
        gcc, slcc = _top_two(np.bincount(labels))
        cp = Checkpoint(len(order) / m, gcc, slcc)
        curve.append(cp)
        log.debug("attack p=%.6f gcc=%d slcc=%d", *cp)
        if gcc == slcc:
            break
        if len(order) % recompute_every == 0:
            touched = np.isin(labels, labels[dirty])
            fresh = betweenness_scores(network, alive, np.flatnonzero(touched))
            in_touched = touched[network.edge_u]
            scores[in_touched] = fresh[in_touched]
            dirty.clear()
    idx = _threshold_index(curve)
    return PercolationRun("attack", curve, curve[idx].p, np.array(order, dtype=np.int64), idx)


def surviving_gcc(network: RoadNetwork, run: PercolationRun) -> np.ndarray:
    """Boolean node mask of the GCC at the run's threshold."""
    alive = np.ones(network.n_edges, dtype=bool)
    alive[run.removed_order[:run.removed_at_pc]] = False
    return gcc_mask(network, alive)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("pearson needs two sequences of equal length >= 2")
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise ValueError("undefined correlation: zero variance")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
