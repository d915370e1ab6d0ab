"""Failure correlation mining.

Historical events are partitioned into groups by (day, data center), the
maximum scope within which two failures can influence each other. Frequent
failure types and then frequent ordered type pairs are mined; a pair
<a, b> is only admitted when the hierarchy allows a to trigger b, i.e.
level(a) > level(b). Retained pairs carry

    support(<a, b>)    = co-occurrence count / denominator
    confidence(<a, b>) = co-occurrence count / count(groups containing a)

and are stored as edges of the failure knowledge graph. Counting is group
presence: a pair counts at most once per group no matter how often it
repeats inside.

Two threshold/support modes exist. The default "groups" mode thresholds
counts against alpha * (number of groups) and uses the group count as the
support denominator (market-basket semantics). The "literal" mode instead
thresholds against alpha * (candidate-set size) and divides support by the
number of candidate pairs, for fidelity experiments; it changes neither
counting nor confidence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import (
    SnapshotParseError,
    SnapshotValidationError,
    UndefinedConfidenceError,
)
from .model import Event

RuleTree = Mapping[str, int]


@dataclass(frozen=True)
class TaggedEvent:
    """Historical event tagged with its group key."""

    day: str
    data_center: str
    event: Event

    def to_dict(self) -> dict:
        d = self.event.to_dict()
        d["day"] = self.day
        d["data_center"] = self.data_center
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TaggedEvent":
        if not d.get("day") or not d.get("data_center"):
            raise SnapshotValidationError(
                "historical event is missing its day/data_center tags"
            )
        return cls(day=str(d["day"]), data_center=str(d["data_center"]), event=Event.from_dict(d))


@dataclass(frozen=True)
class EventGroup:
    day: str
    data_center: str
    events: tuple[Event, ...]

    @property
    def failure_types(self) -> frozenset[str]:
        return frozenset(e.type_failure for e in self.events)


@dataclass(frozen=True)
class FailurePair:
    antecedent: str
    consequent: str
    count: int
    support: float
    confidence: float


@dataclass(frozen=True)
class CorpusStats:
    n_groups: int
    type_group_counts: Mapping[str, int]
    n_candidates: int
    mode: str = "groups"


@dataclass(frozen=True, eq=False)
class FailureKnowledgeGraph:
    """Directed failure-type graph with mined confidences on the edges."""

    nodes: tuple[str, ...]
    edges: tuple[FailurePair, ...]
    provenance: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_index", {(e.antecedent, e.consequent): e for e in self.edges}
        )

    def confidence_of(self, antecedent: str, consequent: str) -> float:
        edge = self._index.get((antecedent, consequent))
        return edge.confidence if edge is not None else 0.0

    def edge(self, antecedent: str, consequent: str) -> Optional[FailurePair]:
        return self._index.get((antecedent, consequent))

    def structurally_equal(self, other: "FailureKnowledgeGraph") -> bool:
        return self.nodes == other.nodes and self.edges == other.edges

    @classmethod
    def empty(cls) -> "FailureKnowledgeGraph":
        return cls(nodes=(), edges=(), provenance={"note": "empty"})

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [
                {
                    "a": e.antecedent,
                    "b": e.consequent,
                    "count": e.count,
                    "support": e.support,
                    "confidence": e.confidence,
                }
                for e in self.edges
            ],
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FailureKnowledgeGraph":
        edges = tuple(
            FailurePair(
                antecedent=str(e["a"]),
                consequent=str(e["b"]),
                count=int(e["count"]),
                support=float(e["support"]),
                confidence=float(e["confidence"]),
            )
            for e in d.get("edges", [])
        )
        return cls(
            nodes=tuple(str(n) for n in d.get("nodes", [])),
            edges=edges,
            provenance=dict(d.get("provenance", {})),
        )


def group_events(history: Iterable[TaggedEvent]) -> list[EventGroup]:
    """Partition tagged events into (day, data center) groups.

    Within a group, events duplicated on (failure type, device class,
    start time) collapse to one; the survivor is chosen by a total order so
    grouping is insensitive to input permutation.
    """
    buckets: dict[tuple[str, str], list[Event]] = {}
    for tagged in history:
        buckets.setdefault((tagged.day, tagged.data_center), []).append(tagged.event)
    groups = []
    for (day, dc) in sorted(buckets):
        events = sorted(buckets[(day, dc)], key=Event.sort_key)
        seen = set()
        deduped = []
        for e in events:
            key = (e.type_failure, e.type_device, e.start_time)
            if key in seen:
                continue
            seen.add(key)
            deduped.append(e)
        groups.append(EventGroup(day=day, data_center=dc, events=tuple(deduped)))
    return groups


def mine_frequent_failures(
    groups: Sequence[EventGroup], alpha: float
) -> dict[str, int]:
    """Failure types present in at least alpha * |groups| groups, with counts."""
    presence: dict[str, int] = {}
    for group in groups:
        for ftype in group.failure_types:
            presence[ftype] = presence.get(ftype, 0) + 1
    threshold = alpha * len(groups)
    return {t: c for t, c in sorted(presence.items()) if c >= threshold}


def _candidate_pairs(q1: Mapping[str, int], rule_tree: RuleTree) -> list[tuple[str, str]]:
    types = sorted(q1)
    missing = [t for t in types if t not in rule_tree]
    if missing:
        raise SnapshotValidationError(
            f"failure rule tree has no level for mined types: {missing}"
        )
    return [
        (a, b)
        for a in types
        for b in types
        if a != b and rule_tree[a] > rule_tree[b]
    ]


def mine_failure_pairs(
    q1: Mapping[str, int],
    groups: Sequence[EventGroup],
    alpha: float,
    rule_tree: RuleTree,
    mode: str = "groups",
) -> list[FailurePair]:
    """Mine frequent, hierarchy-consistent ordered failure pairs."""
    candidates = _candidate_pairs(q1, rule_tree)
    counts: dict[tuple[str, str], int] = {}
    for group in groups:
        present = group.failure_types & set(q1)
        for a in present:
            for b in present:
                if a != b and rule_tree[a] > rule_tree[b]:
                    counts[(a, b)] = counts.get((a, b), 0) + 1

    n_groups = len(groups)
    denominator = n_groups if mode == "groups" else max(len(candidates), 1)
    threshold = alpha * (n_groups if mode == "groups" else len(candidates))
    pairs = []
    for a, b in candidates:
        count = counts.get((a, b), 0)
        if count == 0 or count < threshold:
            continue
        pairs.append(
            FailurePair(
                antecedent=a,
                consequent=b,
                count=count,
                support=count / denominator,
                confidence=count / q1[a],
            )
        )
    return pairs


def support(pair_count: int, stats: CorpusStats) -> float:
    if stats.mode == "literal":
        return pair_count / max(stats.n_candidates, 1)
    return pair_count / stats.n_groups if stats.n_groups else 0.0


def confidence(pair_count: int, antecedent: str, stats: CorpusStats) -> float:
    n_a = stats.type_group_counts.get(antecedent, 0)
    if n_a == 0:
        raise UndefinedConfidenceError(
            f"antecedent {antecedent!r} never occurs; confidence undefined"
        )
    return pair_count / n_a


def build_fkg(
    pairs: Sequence[FailurePair],
    alpha: float,
    n_groups: int,
    mode: str = "groups",
    mined_at: Optional[str] = None,
) -> FailureKnowledgeGraph:
    edges = tuple(sorted(pairs, key=lambda p: (p.antecedent, p.consequent)))
    nodes = tuple(sorted({p.antecedent for p in edges} | {p.consequent for p in edges}))
    if mined_at is None:
        mined_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return FailureKnowledgeGraph(
        nodes=nodes,
        edges=edges,
        provenance={
            "mined_at": mined_at,
            "alpha": alpha,
            "n_groups": n_groups,
            "mode": mode,
        },
    )


def mine_fkg(
    history: Iterable[TaggedEvent],
    alpha: float,
    rule_tree: RuleTree,
    mode: str = "groups",
    mined_at: Optional[str] = None,
) -> FailureKnowledgeGraph:
    """Grouping, frequent-type and frequent-pair mining in one call."""
    groups = group_events(history)
    q1 = mine_frequent_failures(groups, alpha)
    pairs = mine_failure_pairs(q1, groups, alpha, rule_tree, mode=mode)
    return build_fkg(pairs, alpha, len(groups), mode=mode, mined_at=mined_at)


def save_fkg(fkg: FailureKnowledgeGraph, path: Union[str, Path]) -> None:
    Path(path).write_text(
        json.dumps(fkg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_fkg(path: Union[str, Path]) -> FailureKnowledgeGraph:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SnapshotParseError(f"cannot read knowledge graph {path}: {e}") from e
    return FailureKnowledgeGraph.from_dict(data)


def load_history(path: Union[str, Path]) -> list[TaggedEvent]:
    """Read a history.jsonl corpus (one tagged event per line)."""
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(TaggedEvent.from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise SnapshotParseError(f"{path}:{lineno}: invalid JSON: {e}") from e
    return out


def save_history(history: Iterable[TaggedEvent], path: Union[str, Path]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for tagged in history:
            fh.write(json.dumps(tagged.to_dict(), sort_keys=True) + "\n")
