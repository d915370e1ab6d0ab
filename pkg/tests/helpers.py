"""Shared factories and independent oracles for the test suite.

The oracles here deliberately do not reuse the implementation's code
paths: the walk oracle is a dense linear solve, the path oracle enumerates
every simple path without pruning, and the mining oracle counts with plain
set loops.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import genpareto

from bsodiag.cmdb import CmdbGraph
from bsodiag.model import CatalogEntry, Event, FailureTypeCatalog, Source
from bsodiag.orca import OUTAGE_NODE, EventCauseGraph


def make_event(
    sns,
    type_failure="f",
    type_device="server",
    start=-30,
    end=-29,
    source=Source.INCIDENT,
) -> Event:
    return Event(
        sns=frozenset(sns),
        type_failure=type_failure,
        type_device=type_device,
        start_time=start,
        end_time=end,
        source=source,
    )


def make_catalog(**levels) -> FailureTypeCatalog:
    """Catalog from keyword args: name=(level, device_class[, pattern])."""
    entries = {}
    for name, spec in levels.items():
        if len(spec) == 3:
            level, dclass, pattern = spec
            entries[name] = CatalogEntry(
                level=level, device_class=dclass, numeric=True, extraction_pattern=pattern
            )
        else:
            level, dclass = spec
            entries[name] = CatalogEntry(level=level, device_class=dclass)
    return FailureTypeCatalog(entries=entries)


def make_cmdb(classes: dict, adjacency: dict) -> CmdbGraph:
    return CmdbGraph(
        classes=dict(classes),
        adjacency={k: frozenset(v) for k, v in adjacency.items()},
    )


def solve_walk(g: EventCauseGraph, u0: np.ndarray, damping: float) -> np.ndarray:
    """Dense linear-solve oracle for the walk's fixed point."""
    w = g.weight_matrix()
    n = len(u0)
    p = np.zeros_like(w)
    rows = w.sum(axis=1)
    for i in range(n):
        p[i] = w[i] / rows[i] if rows[i] > 0 else u0
    u = np.linalg.solve(np.eye(n) - damping * p.T, (1.0 - damping) * u0)
    return u / u.sum()


def exhaustive_best_path(
    g: EventCauseGraph, root: str, scores: dict, max_len: int
) -> tuple:
    """Enumerate every simple path root -> outage; argmax of score product.

    Same tie rules as the implementation (higher score, then shorter path,
    then lexicographic node sequence) but with no pruning.
    """
    paths = []

    def walk(node, path):
        if node == OUTAGE_NODE:
            paths.append(tuple(path))
            return
        if len(path) >= max_len:
            return
        for dst, _ in g.edges.get(node, ()):
            if dst not in path:
                walk(dst, path + [dst])

    walk(root, [root])
    if not paths:
        return None, 0.0

    def product(path):
        s = 1.0
        for nid in path:
            s *= 1.0 if nid == OUTAGE_NODE else scores[nid]
        return s

    best = min(paths, key=lambda p: (-product(p), len(p), p))
    return list(best), product(best)


def random_cause_graph(rng: np.random.Generator, n_events: int):
    """Random weighted event graph + outage node + random score vector."""
    ids = [f"e{i + 1:03d}" for i in range(n_events)]
    events = {
        nid: make_event([f"d{i}"], type_failure=f"t{i}", start=-10 * (i + 1), end=-10 * (i + 1) + 1)
        for i, nid in enumerate(ids)
    }
    events[OUTAGE_NODE] = make_event(["srv"], type_failure="outage", start=0, end=0)
    edges = {}
    for i, src in enumerate(ids):
        outs = []
        for j, dst in enumerate(ids):
            if i != j and rng.random() < 0.4:
                outs.append((dst, float(rng.uniform(0.05, 2.0))))
        if rng.random() < 0.6:
            outs.append((OUTAGE_NODE, float(rng.uniform(0.05, 2.0))))
        edges[src] = tuple(outs)
    back = 1.0 / (n_events - 1) if n_events > 1 else 1.0
    edges[OUTAGE_NODE] = tuple((nid, back) for nid in ids)
    g = EventCauseGraph(node_ids=tuple(ids + [OUTAGE_NODE]), events=events, edges=edges)
    raw = rng.uniform(0.01, 1.0, size=n_events)
    raw = raw / raw.sum()
    scores = {nid: float(raw[i]) for i, nid in enumerate(ids)}
    return g, scores


def brute_force_mine(groups, alpha, levels, mode="groups"):
    """Set-loop oracle for frequent types and pairs.

    ``groups`` is a list of iterables of failure-type names. Returns
    (q1 counts, {(a, b): (count, support, confidence)}).
    """
    sets = [set(g) for g in groups]
    n_groups = len(sets)
    presence = {}
    for s in sets:
        for t in s:
            presence[t] = presence.get(t, 0) + 1
    q1 = {t: c for t, c in presence.items() if c >= alpha * n_groups}
    candidates = [
        (a, b) for a in sorted(q1) for b in sorted(q1) if a != b and levels[a] > levels[b]
    ]
    denominator = n_groups if mode == "groups" else max(len(candidates), 1)
    threshold = alpha * (n_groups if mode == "groups" else len(candidates))
    out = {}
    for a, b in candidates:
        count = sum(1 for s in sets if a in s and b in s)
        if count == 0 or count < threshold:
            continue
        out[(a, b)] = (count, count / denominator, count / q1[a])
    return q1, out


def reference_pot_flags(init, stream, q=1e-4, quantile=0.98):
    """Independent streaming peaks-over-threshold re-implementation.

    Uses scipy's generalized Pareto MLE instead of the package's fitter;
    mirrors only the documented update discipline.
    """
    init = np.asarray(init, dtype=float)
    t = float(np.quantile(init, quantile))
    peaks = [float(v - t) for v in init if v > t]
    n = len(init)

    def z_q(n_seen):
        if not peaks:
            return math.inf
        if len(peaks) == 1 or np.var(peaks) == 0:
            gamma, sigma = 0.0, float(np.mean(peaks))
        else:
            gamma, _, sigma = genpareto.fit(peaks, floc=0.0)
        ratio = q * n_seen / len(peaks)
        if abs(gamma) < 1e-9:
            return t - sigma * math.log(ratio)
        return t + sigma / gamma * (ratio ** (-gamma) - 1.0)

    z = z_q(n)
    flags = []
    for x in stream:
        n += 1
        if x > z:
            flags.append(True)
            continue
        if x > t:
            peaks.append(float(x - t))
            z = z_q(n)
        flags.append(False)
    return flags
