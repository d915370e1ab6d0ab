"""Outage root cause analysis.

Builds a per-outage event cause graph over the detected events plus the
outage node, scores nodes with a personalized random walk, ranks the top-k
root-cause candidates, and infers the failure propagation path with the
highest product of node scores.

Edge weights combine historical knowledge and current connectivity:

    w_ij = exp(conf_ij) * dist(e_i, e_j)

where conf_ij is the mined confidence of the type pair (0 when absent) and
dist the CMDB connectivity strength. The outage node gets a back-edge to
every event, weighted 1/(|E|-1), so walks never pile up on it.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .cmdb import CmdbGraph
from .config import PipelineConfig
from .errors import CmdbLookupError, NoCandidatesError
from .fcm import FailureKnowledgeGraph
from .mfd import ChangeWhitelist, run_mfd
from .model import Event, FailureTypeCatalog, OutageSnapshot

OUTAGE_NODE = "outage"

# Floor used for personalization only: events with no connectivity to the
# outage still receive a positive teleport weight.
PERSONALIZATION_DIST_FLOOR = 1e-6


def dist(e_i: Event, e_j: Event, cmdb: CmdbGraph) -> float:
    """Connectivity strength of e_i toward e_j, in [0, 1].

    Same device type compares the device sets directly; otherwise the
    one-hop downstream neighborhood of e_i's devices is intersected with
    e_j's devices. The ratio is taken over |e_i.sns| and capped at 1.
    """
    if not e_i.sns:
        raise ValueError("dist requires a non-empty source device set")
    for sn in e_i.sns | e_j.sns:
        if sn not in cmdb:
            raise CmdbLookupError(f"unknown device: {sn!r}")
    if e_i.type_device == e_j.type_device:
        overlap = len(e_i.sns & e_j.sns)
    else:
        overlap = len(cmdb.out_set(e_i.sns) & e_j.sns)
    return min(overlap / len(e_i.sns), 1.0)


@dataclass(frozen=True, eq=False)
class EventCauseGraph:
    """Directed weighted graph over candidate events plus the outage node."""

    node_ids: tuple[str, ...]  # events in rank order, outage node last
    events: Mapping[str, Event]
    edges: Mapping[str, tuple[tuple[str, float], ...]]

    @property
    def event_ids(self) -> tuple[str, ...]:
        return self.node_ids[:-1]

    def weight_matrix(self) -> np.ndarray:
        index = {nid: i for i, nid in enumerate(self.node_ids)}
        n = len(self.node_ids)
        w = np.zeros((n, n))
        for src, outs in self.edges.items():
            for dst, weight in outs:
                w[index[src], index[dst]] = weight
        return w


def event_node_id(position: int) -> str:
    return f"e{position + 1:03d}"


def build_ecg(
    events: Sequence[Event],
    outage: Event,
    fkg: FailureKnowledgeGraph,
    cmdb: CmdbGraph,
    all_dist_one: bool = False,
) -> EventCauseGraph:
    """Construct the event cause graph for one outage case.

    An edge e_i -> e_j exists iff its connectivity strength is positive
    (exp(conf) >= 1 never vanishes); this includes event -> outage edges.
    ``all_dist_one`` short-circuits every distance to 1, which removes the
    CMDB's influence.
    """
    if not events:
        raise NoCandidatesError("no candidate events; cannot build an event cause graph")
    ids = [event_node_id(i) for i in range(len(events))]
    nodes = {nid: e for nid, e in zip(ids, events)}
    nodes[OUTAGE_NODE] = outage

    edges: dict[str, list[tuple[str, float]]] = {nid: [] for nid in ids}
    edges[OUTAGE_NODE] = []
    all_ids = ids + [OUTAGE_NODE]
    for src in ids:
        e_i = nodes[src]
        for dst in all_ids:
            if dst == src:
                continue
            e_j = nodes[dst]
            d = 1.0 if all_dist_one else dist(e_i, e_j, cmdb)
            if d <= 0.0:
                continue
            conf = fkg.confidence_of(e_i.type_failure, e_j.type_failure)
            edges[src].append((dst, math.exp(conf) * d))

    back_weight = 1.0 / (len(events) - 1) if len(events) > 1 else 1.0
    edges[OUTAGE_NODE] = [(nid, back_weight) for nid in ids]

    return EventCauseGraph(
        node_ids=tuple(all_ids),
        events=nodes,
        edges={src: tuple(outs) for src, outs in edges.items()},
    )


def init_personalization(
    g: EventCauseGraph,
    cmdb: CmdbGraph,
    all_dist_one: bool = False,
    floor: float = PERSONALIZATION_DIST_FLOOR,
) -> np.ndarray:
    """Teleport distribution: u_i = exp(-t_i) * max(dist(e_i, outage), floor).

    t_i is the event start time in hours on the relative axis, so earlier
    events weigh exponentially more. The outage node gets 0 and the rest is
    normalized to sum 1.
    """
    outage = g.events[OUTAGE_NODE]
    u = np.zeros(len(g.node_ids))
    for i, nid in enumerate(g.event_ids):
        event = g.events[nid]
        t_hours = event.start_time / 60.0
        d = 1.0 if all_dist_one else dist(event, outage, cmdb)
        u[i] = math.exp(-t_hours) * max(d, floor)
    total = u.sum()
    if total <= 0:
        raise NoCandidatesError("personalization vector is all-zero")
    return u / total


def mapr_walk(
    g: EventCauseGraph,
    u0: np.ndarray,
    iterations: int = 100,
    damping: float = 0.85,
    tol: float = 1e-12,
) -> np.ndarray:
    """Personalized-teleport fixed point over the event cause graph.

    Iterates u <- (1 - damping) * u0 + damping * P^T u with P the
    row-normalized weight matrix (back-edges included); rows without
    out-edges redistribute their mass according to u0. Stops after
    ``iterations`` steps or as soon as the L1 change drops below ``tol``,
    and returns a probability vector.
    """
    n = len(g.node_ids)
    if len(u0) != n:
        raise ValueError(f"u0 has length {len(u0)}, expected {n}")
    if not np.all(np.isfinite(u0)) or abs(u0.sum() - 1.0) > 1e-9 or np.any(u0 < 0):
        raise ValueError("u0 must be a normalized non-negative vector")

    w = g.weight_matrix()
    if not np.all(np.isfinite(w)):
        raise ValueError("event cause graph has non-finite edge weights")
    row_sums = w.sum(axis=1)
    p = np.zeros_like(w)
    has_out = row_sums > 0
    p[has_out] = w[has_out] / row_sums[has_out, None]
    p[~has_out] = u0

    u = u0.copy()
    for _ in range(iterations):
        nxt = (1.0 - damping) * u0 + damping * (p.T @ u)
        delta = float(np.abs(nxt - u).sum())
        u = nxt
        if delta < tol:
            break
    total = u.sum()
    return u / total if total > 0 else u


def rank_root_causes(
    g: EventCauseGraph, scores: np.ndarray, k: int
) -> list[tuple[str, float]]:
    """Top-k non-outage nodes by walk score.

    Ties break toward the earlier start time, then the lexicographically
    smaller failure type.
    """
    ranked = sorted(
        (
            (nid, float(scores[i]))
            for i, nid in enumerate(g.node_ids)
            if nid != OUTAGE_NODE
        ),
        key=lambda item: (
            -item[1],
            g.events[item[0]].start_time,
            g.events[item[0]].type_failure,
            item[0],
        ),
    )
    return ranked[: min(k, len(ranked))]


def infer_path(
    g: EventCauseGraph,
    root_id: str,
    scores: Mapping[str, float],
    max_len: int = 10,
) -> tuple[Optional[list[str]], float]:
    """Highest-score simple path from the root candidate to the outage node.

    Paths follow event-to-event and event-to-outage edges only (back-edges
    are not traversable) and are scored by the product of node scores, with
    the outage node contributing 1. Ties prefer the shorter path, then the
    lexicographically smaller node sequence. Returns (None, 0.0) when the
    outage is unreachable within ``max_len`` nodes.
    """

    def node_score(nid: str) -> float:
        return 1.0 if nid == OUTAGE_NODE else float(scores[nid])

    best: Optional[tuple[float, int, tuple[str, ...]]] = None

    def consider(path: list[str], score: float) -> None:
        nonlocal best
        key = (score, len(path), tuple(path))
        if best is None:
            best = key
            return
        if score > best[0]:
            best = key
        elif score == best[0] and (len(path), tuple(path)) < (best[1], best[2]):
            best = key

    def dfs(node: str, path: list[str], score: float) -> None:
        if node == OUTAGE_NODE:
            consider(path, score)
            return
        if len(path) >= max_len:
            return
        # Scores are <= 1, so extending a path can never raise its product.
        if best is not None and score < best[0]:
            return
        for dst, _ in sorted(g.edges.get(node, ())):
            if dst in path:
                continue
            dfs(dst, path + [dst], score * node_score(dst))

    dfs(root_id, [root_id], node_score(root_id))
    if best is None:
        return None, 0.0
    return list(best[2]), best[0]


@dataclass(frozen=True)
class DiagnosisResult:
    """Ranked root-cause candidates and one inferred propagation path."""

    ranked: tuple[tuple[str, float], ...]
    top_k: tuple[str, ...]
    path: tuple[str, ...]
    path_score: float
    events: Mapping[str, Event]
    status: str = "ok"
    provenance: Mapping[str, object] = field(default_factory=dict)
    timings: Mapping[str, float] = field(default_factory=dict)

    @property
    def top_events(self) -> list[Event]:
        return [self.events[nid] for nid in self.top_k]

    @property
    def ranked_events(self) -> list[Event]:
        return [self.events[nid] for nid, _ in self.ranked]

    def path_types(self) -> list[str]:
        return [self.events[nid].type_failure for nid in self.path]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "ranked": [
                {"id": nid, "score": score, "event": self.events[nid].to_dict()}
                for nid, score in self.ranked
            ],
            "top_k": list(self.top_k),
            "path": list(self.path),
            "path_types": self.path_types(),
            "path_score": self.path_score,
            "provenance": dict(self.provenance),
            "timings": dict(self.timings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def localize(
    events: Sequence[Event],
    outage: Event,
    fkg: FailureKnowledgeGraph,
    cmdb: CmdbGraph,
    config: PipelineConfig,
) -> DiagnosisResult:
    """Rank candidates and infer the propagation path for a detected E."""
    effective_fkg = FailureKnowledgeGraph.empty() if config.disable_fkg else fkg
    all_dist_one = config.disable_cmdb
    g = build_ecg(events, outage, effective_fkg, cmdb, all_dist_one=all_dist_one)
    u0 = init_personalization(g, cmdb, all_dist_one=all_dist_one)
    scores = mapr_walk(
        g,
        u0,
        iterations=config.walk.iterations,
        damping=config.walk.damping,
        tol=config.walk.tol,
    )
    ranked = rank_root_causes(g, scores, k=len(events))
    top_k = tuple(nid for nid, _ in ranked[: config.k])
    score_map = {
        nid: float(scores[i]) for i, nid in enumerate(g.node_ids) if nid != OUTAGE_NODE
    }
    path, path_score = infer_path(g, ranked[0][0], score_map, max_len=config.max_path_len)
    return DiagnosisResult(
        ranked=tuple(ranked),
        top_k=top_k,
        path=tuple(path) if path else (),
        path_score=path_score if path else 0.0,
        events=dict(g.events),
        status="ok" if path else "no_path",
    )


def diagnose(
    snapshot: OutageSnapshot,
    fkg: FailureKnowledgeGraph,
    cmdb: CmdbGraph,
    catalog: FailureTypeCatalog,
    config: PipelineConfig,
    whitelist: Optional[ChangeWhitelist] = None,
) -> DiagnosisResult:
    """Full diagnosis of one outage snapshot.

    Deterministic given inputs and configuration. Raises NoCandidatesError
    when failure detection yields an empty candidate set.
    """
    t0 = time.perf_counter()
    events = run_mfd(snapshot, catalog, config, whitelist=whitelist, cmdb=cmdb)
    t1 = time.perf_counter()
    if not events:
        raise NoCandidatesError("failure detection produced no candidate events")
    result = localize(events, snapshot.outage, fkg, cmdb, config)
    t2 = time.perf_counter()
    provenance = {
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "fkg": dict(fkg.provenance),
        "n_events": len(events),
    }
    return DiagnosisResult(
        ranked=result.ranked,
        top_k=result.top_k,
        path=result.path,
        path_score=result.path_score,
        events=result.events,
        status=result.status,
        provenance=provenance,
        timings={
            "failure_analysis_s": t1 - t0,
            "localization_s": t2 - t1,
            "total_s": t2 - t0,
        },
    )
