"""Evaluation harness: ranking metrics, rule-based baselines, benchmarks.

A predicted event matches the true root cause when it has the same failure
type and a non-empty device-set intersection (merging can widen device
sets relative to the injected truth). Propagation paths are compared as
failure-type sequences via their longest common contiguous subpath.

All localization methods consume the identical detection output per case,
so comparisons isolate localization quality.
"""

from __future__ import annotations

import json
import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .cmdb import CmdbGraph
from .config import PipelineConfig
from .errors import UndefinedMetricError
from .fcm import FailureKnowledgeGraph, RuleTree
from .mfd import ChangeWhitelist, run_mfd
from .model import Event, FailureTypeCatalog, OutageSnapshot
from .orca import localize
from .simgen import GroundTruth

logger = logging.getLogger(__name__)

BASELINE_METHODS = ("random", "time_first", "hierarchy_first")
DIAG_METHODS = ("bsodiag", "bsodiag_no_fkg", "bsodiag_no_cmdb")
ALL_METHODS = DIAG_METHODS + BASELINE_METHODS


def root_cause_matches(predicted: Event, truth: Event) -> bool:
    return (
        predicted.type_failure == truth.type_failure
        and bool(predicted.sns & truth.sns)
    )


def pr_at_k(cases: Sequence[tuple[Sequence[Event], Event]], k: int) -> float:
    """Fraction of cases whose true root cause appears in the top k."""
    if k < 1:
        raise UndefinedMetricError(f"k must be >= 1, got {k}")
    if not cases:
        raise UndefinedMetricError("PR@k over an empty case list is undefined")
    hits = 0
    for ranked, truth in cases:
        if any(root_cause_matches(e, truth) for e in list(ranked)[:k]):
            hits += 1
    return hits / len(cases)


def map_k(cases: Sequence[tuple[Sequence[Event], Event]], k: int = 3) -> float:
    """Arithmetic mean of PR@1 .. PR@k."""
    return sum(pr_at_k(cases, i) for i in range(1, k + 1)) / k


def longest_common_subpath(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest contiguous run common to both sequences."""
    best = 0
    run = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                run[i][j] = run[i - 1][j - 1] + 1
                best = max(best, run[i][j])
    return best


def pcr(
    cases: Sequence[tuple[Sequence[str], Sequence[str]]],
    denominator: str = "predicted",
) -> float:
    """Mean path coverage: longest common subpath over the path length.

    Cases with an empty predicted path score 0. The denominator is the
    predicted path length by default; "truth" divides by the ground-truth
    path length instead (sensitivity mode).
    """
    if not cases:
        raise UndefinedMetricError("PCR over an empty case list is undefined")
    total = 0.0
    for predicted, truth in cases:
        if not predicted:
            continue
        length = len(predicted) if denominator == "predicted" else len(truth)
        if length == 0:
            continue
        total += longest_common_subpath(predicted, truth) / length
    return total / len(cases)


def baseline_random(events: Sequence[Event], k: int, seed: int) -> list[Event]:
    """Seeded shuffle, top k: triage without any domain knowledge."""
    shuffled = list(events)
    random.Random(seed).shuffle(shuffled)
    return shuffled[:k]


def baseline_time_first(events: Sequence[Event], k: int) -> list[Event]:
    """Earliest occurring failures first."""
    return sorted(events, key=lambda e: (e.start_time, e.type_failure))[:k]


def baseline_hierarchy_first(
    events: Sequence[Event], k: int, rule_tree: RuleTree
) -> list[Event]:
    """Highest failure-hierarchy level first, ties by earlier start."""
    return sorted(
        events,
        key=lambda e: (-rule_tree.get(e.type_failure, 0), e.start_time, e.type_failure),
    )[:k]


@dataclass(frozen=True)
class CaseRecord:
    case: str
    method: str
    predicted_ids: tuple[str, ...]
    predicted_path: tuple[str, ...]
    hit_rank: Optional[int]


@dataclass(frozen=True)
class EvalReport:
    metrics: Mapping[str, Mapping[str, float]]
    records: tuple[CaseRecord, ...]
    n_cases: int
    skipped: tuple[str, ...]
    timings: Mapping[str, float]
    config: Mapping[str, object]

    def to_dict(self) -> dict:
        return {
            "n_cases": self.n_cases,
            "skipped": list(self.skipped),
            "metrics": {m: dict(v) for m, v in self.metrics.items()},
            "records": [
                {
                    "case": r.case,
                    "method": r.method,
                    "predicted_ids": list(r.predicted_ids),
                    "predicted_path": list(r.predicted_path),
                    "hit_rank": r.hit_rank,
                }
                for r in self.records
            ],
            "timings": dict(self.timings),
            "config": dict(self.config),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def render_table(report: EvalReport, k: int = 3) -> str:
    headers = ["method"] + [f"PR@{i}" for i in range(1, k + 1)] + ["MAP", "PCR"]
    rows = [headers]
    for method in sorted(report.metrics):
        m = report.metrics[method]
        rows.append(
            [method]
            + [f"{m.get(f'pr@{i}', 0.0):.3f}" for i in range(1, k + 1)]
            + [f"{m.get('map', 0.0):.3f}", f"{m.get('pcr', 0.0):.3f}"]
        )
    widths = [max(len(r[c]) for r in rows) for c in range(len(headers))]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)))
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


@dataclass
class _MethodOutcome:
    ranked: list[Event] = field(default_factory=list)
    ids: tuple[str, ...] = ()
    path_types: list[str] = field(default_factory=list)


def evaluate_cases(
    cases: Sequence[tuple[OutageSnapshot, GroundTruth]],
    fkg: FailureKnowledgeGraph,
    cmdb: CmdbGraph,
    catalog: FailureTypeCatalog,
    config: PipelineConfig,
    methods: Sequence[str] = ("bsodiag",) + BASELINE_METHODS,
    whitelist: Optional[ChangeWhitelist] = None,
    seed: int = 0,
    case_names: Optional[Sequence[str]] = None,
) -> EvalReport:
    """Run every method over in-memory cases and aggregate the metrics."""
    for m in methods:
        if m not in ALL_METHODS:
            raise UndefinedMetricError(f"unknown method {m!r}; known: {ALL_METHODS}")
    rule_tree = catalog.levels()
    k = config.k

    per_method_rank: dict[str, list[tuple[list[Event], Event]]] = {m: [] for m in methods}
    per_method_path: dict[str, list[tuple[list[str], list[str]]]] = {m: [] for m in methods}
    records: list[CaseRecord] = []
    detect_seconds = 0.0
    localize_seconds = 0.0

    for idx, (snapshot, truth) in enumerate(cases):
        name = case_names[idx] if case_names else f"case_{idx:04d}"
        t0 = time.perf_counter()
        events = run_mfd(snapshot, catalog, config, whitelist=whitelist, cmdb=cmdb)
        detect_seconds += time.perf_counter() - t0

        outcomes: dict[str, _MethodOutcome] = {}
        for method in methods:
            outcome = _MethodOutcome()
            if events:
                if method in DIAG_METHODS:
                    variant = config
                    if method == "bsodiag_no_fkg":
                        variant = _with(config, disable_fkg=True)
                    elif method == "bsodiag_no_cmdb":
                        variant = _with(config, disable_cmdb=True)
                    t1 = time.perf_counter()
                    result = localize(events, snapshot.outage, fkg, cmdb, variant)
                    localize_seconds += time.perf_counter() - t1
                    outcome.ranked = result.ranked_events
                    outcome.ids = result.top_k
                    outcome.path_types = result.path_types()
                elif method == "random":
                    outcome.ranked = baseline_random(events, len(events), seed=seed + idx)
                elif method == "time_first":
                    outcome.ranked = baseline_time_first(events, len(events))
                elif method == "hierarchy_first":
                    outcome.ranked = baseline_hierarchy_first(events, len(events), rule_tree)
            outcomes[method] = outcome

        truth_types = truth.path_types()
        for method, outcome in outcomes.items():
            per_method_rank[method].append((outcome.ranked, truth.root_cause))
            per_method_path[method].append((outcome.path_types, truth_types))
            hit_rank = None
            for rank, event in enumerate(outcome.ranked, start=1):
                if root_cause_matches(event, truth.root_cause):
                    hit_rank = rank
                    break
            records.append(
                CaseRecord(
                    case=name,
                    method=method,
                    predicted_ids=tuple(outcome.ids),
                    predicted_path=tuple(outcome.path_types),
                    hit_rank=hit_rank,
                )
            )

    metrics: dict[str, dict[str, float]] = {}
    for method in methods:
        m: dict[str, float] = {}
        for i in range(1, k + 1):
            m[f"pr@{i}"] = pr_at_k(per_method_rank[method], i)
        m["map"] = map_k(per_method_rank[method], k)
        m["pcr"] = pcr(per_method_path[method], denominator=config.pcr_denominator)
        metrics[method] = m

    return EvalReport(
        metrics=metrics,
        records=tuple(records),
        n_cases=len(cases),
        skipped=(),
        timings={
            "failure_analysis_s": detect_seconds,
            "localization_s": localize_seconds,
            "total_s": detect_seconds + localize_seconds,
        },
        config=config.to_dict(),
    )


def _with(config: PipelineConfig, **kwargs) -> PipelineConfig:
    from dataclasses import replace

    return replace(config, **kwargs)


def run_benchmark(
    scenario_dir: Union[str, Path],
    methods: Sequence[str],
    fkg: FailureKnowledgeGraph,
    cmdb: CmdbGraph,
    catalog: FailureTypeCatalog,
    config: PipelineConfig,
    whitelist: Optional[ChangeWhitelist] = None,
    seed: int = 0,
) -> EvalReport:
    """Evaluate every (snapshot, truth) case directory under scenario_dir.

    A case is a subdirectory holding a snapshot bundle plus truth.json;
    cases missing their truth file are skipped with a warning and listed in
    the report.
    """
    from .model import load_snapshot
    from .simgen import load_truth

    scenario_dir = Path(scenario_dir)
    case_dirs = sorted(
        d for d in scenario_dir.iterdir() if d.is_dir() and (d / "meta.json").exists()
    )
    if not case_dirs:
        raise UndefinedMetricError(f"no case directories under {scenario_dir}")
    cases = []
    names = []
    skipped = []
    for d in case_dirs:
        truth_path = d / "truth.json"
        if not truth_path.exists():
            logger.warning("skipping %s: no truth.json", d)
            skipped.append(d.name)
            continue
        cases.append((load_snapshot(d, catalog), load_truth(truth_path)))
        names.append(d.name)
    if not cases:
        raise UndefinedMetricError(f"no usable cases under {scenario_dir}")
    report = evaluate_cases(
        cases,
        fkg,
        cmdb,
        catalog,
        config,
        methods=methods,
        whitelist=whitelist,
        seed=seed,
        case_names=names,
    )
    return EvalReport(
        metrics=report.metrics,
        records=report.records,
        n_cases=report.n_cases,
        skipped=tuple(skipped),
        timings=report.timings,
        config=report.config,
    )
