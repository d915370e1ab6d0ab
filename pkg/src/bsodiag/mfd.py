"""Multi-source failure detection.

Turns a raw outage snapshot into the candidate event set E: alerts are
serialized into per-device multivariate time series and screened with the
peaks-over-threshold detector, changes pass a proactive whitelist, and
everything (including original incidents) is merged into unified events on
eta-length windows.

Per-device serialization and per-dimension detection are pure and
independent; the merge is a deterministic ordered reduction, so the output
never depends on evaluation order.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .cmdb import CmdbGraph
from .config import PipelineConfig
from .errors import (
    ConfigurationError,
    IntensityExtractionError,
    SnapshotParseError,
    SnapshotValidationError,
)
from .model import (
    Alert,
    Change,
    Event,
    Failure,
    FailureTypeCatalog,
    Incident,
    OutageSnapshot,
    Source,
    Trigger,
)
from .spot import spot_init, spot_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AlertSeries:
    """Equidistant multivariate series of cumulative alert intensity.

    ``values`` is K x N where row k tracks failure type ``dims[k]`` and
    column i covers the slot [origin + i*slot_len, origin + (i+1)*slot_len).
    """

    device_sn: str
    dims: tuple[str, ...]
    values: np.ndarray
    slot_len: int
    origin: int

    @property
    def n_slots(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WhitelistRule:
    """Predicate over (change_type, trigger, device class); None = any."""

    change_types: Optional[frozenset[str]] = None
    triggers: Optional[frozenset[Trigger]] = None
    device_classes: Optional[frozenset[str]] = None

    def matches(self, change: Change, device_classes: frozenset[str]) -> bool:
        if self.change_types is not None and change.change_type not in self.change_types:
            return False
        if self.triggers is not None and change.trigger not in self.triggers:
            return False
        if self.device_classes is not None and not (device_classes & self.device_classes):
            return False
        return True


@dataclass(frozen=True)
class ChangeWhitelist:
    """A change matching no rule is discarded."""

    rules: tuple[WhitelistRule, ...] = ()

    @classmethod
    def from_dict(cls, d: Mapping) -> "ChangeWhitelist":
        rules = []
        for raw in d.get("rules", []):
            rules.append(
                WhitelistRule(
                    change_types=frozenset(raw["change_types"])
                    if raw.get("change_types")
                    else None,
                    triggers=frozenset(Trigger(t) for t in raw["triggers"])
                    if raw.get("triggers")
                    else None,
                    device_classes=frozenset(raw["device_classes"])
                    if raw.get("device_classes")
                    else None,
                )
            )
        return cls(rules=tuple(rules))

    def to_dict(self) -> dict:
        rules = []
        for r in self.rules:
            d = {}
            if r.change_types is not None:
                d["change_types"] = sorted(r.change_types)
            if r.triggers is not None:
                d["triggers"] = sorted(t.value for t in r.triggers)
            if r.device_classes is not None:
                d["device_classes"] = sorted(r.device_classes)
            rules.append(d)
        return {"rules": rules}


def load_whitelist(path: Union[str, Path]) -> ChangeWhitelist:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SnapshotParseError(f"cannot read whitelist {path}: {e}") from e
    return ChangeWhitelist.from_dict(data)


def partition_alerts(snapshot: OutageSnapshot) -> dict[str, list[Alert]]:
    """Split alerts by device serial number, chronologically sorted."""
    subsets: dict[str, list[Alert]] = {}
    for alert in snapshot.alerts:
        subsets.setdefault(alert.device_sn, []).append(alert)
    for subset in subsets.values():
        subset.sort(key=lambda a: a.time)
    return subsets


def alert_intensity(
    alert: Alert,
    catalog: FailureTypeCatalog,
    fallback: bool = False,
) -> float:
    """Intensity contributed by one alert.

    Non-numeric types count 1; numeric types parse a value out of the
    description with the catalog's extraction pattern. A failed extraction
    raises unless ``fallback`` is set, which logs and counts 1 instead.
    """
    entry = catalog.lookup(alert.failure_type)
    if not entry.numeric:
        return 1.0
    pattern = entry.extraction_pattern
    value: Optional[float] = None
    if pattern:
        m = re.search(pattern, alert.description)
        if m:
            raw = m.group(1) if m.groups() else m.group(0)
            try:
                value = float(raw)
            except ValueError:
                value = None
    if value is None or value < 0:
        if fallback:
            logger.warning(
                "intensity extraction failed for %s on %s; counting 1",
                alert.failure_type,
                alert.device_sn,
            )
            return 1.0
        raise IntensityExtractionError(
            f"cannot extract numeric intensity for {alert.failure_type!r} "
            f"from description {alert.description!r}"
        )
    return value


def alert_to_series(
    device_sn: str,
    subset: Sequence[Alert],
    delta: int,
    window_l: int,
    window_t_prime: int,
    catalog: FailureTypeCatalog,
    fallback: bool = False,
) -> Optional[AlertSeries]:
    """Aggregate one device's alerts into slot-cumulative intensities.

    Slot i (0-based) covers [i*delta - L, (i+1)*delta - L); a value at
    exactly T' lands in the final slot. Returns None for an empty subset.
    """
    if (window_l + window_t_prime) % delta != 0:
        raise ConfigurationError(
            f"delta={delta} must divide L+T'={window_l + window_t_prime}"
        )
    if not subset:
        return None
    n_slots = (window_l + window_t_prime) // delta
    dims = sorted({a.failure_type for a in subset})
    index = {k: i for i, k in enumerate(dims)}
    values = np.zeros((len(dims), n_slots), dtype=float)
    for alert in subset:
        slot = min((alert.time + window_l) // delta, n_slots - 1)
        values[index[alert.failure_type], slot] += alert_intensity(
            alert, catalog, fallback=fallback
        )
    return AlertSeries(
        device_sn=device_sn,
        dims=tuple(dims),
        values=values,
        slot_len=delta,
        origin=-window_l,
    )


def _consolidate(
    outlier_slots: Sequence[int], split_gap: Optional[int]
) -> list[tuple[int, int]]:
    """Group outlier slot indices into (first, last) runs.

    All outliers of a dimension form one run unless gap splitting is
    enabled, in which case runs break where consecutive outliers are more
    than ``split_gap`` slots apart.
    """
    if split_gap is None:
        return [(outlier_slots[0], outlier_slots[-1])]
    runs = []
    start = prev = outlier_slots[0]
    for slot in outlier_slots[1:]:
        if slot - prev > split_gap:
            runs.append((start, prev))
            start = slot
        prev = slot
    runs.append((start, prev))
    return runs


def detect_failures(
    series: AlertSeries,
    window_t: int,
    q: float,
    catalog: FailureTypeCatalog,
    init_quantile: float = 0.98,
    min_nonzero: int = 10,
    split_gap_slots: Optional[int] = None,
) -> list[Failure]:
    """Screen every dimension of a series for outage-related failures.

    The slots entirely before -T calibrate the detector; the remaining
    slots are streamed through it. Outlier slots of one dimension
    consolidate into a single failure spanning first outlier start to last
    outlier end.
    """
    n_init = (-window_t - series.origin) // series.slot_len
    if n_init <= 0 or n_init >= series.n_slots:
        raise ConfigurationError(
            f"diagnosis window T={window_t} leaves no initial slots for a "
            f"series over [{series.origin}, "
            f"{series.origin + series.n_slots * series.slot_len})"
        )
    failures = []
    for k, dim in enumerate(series.dims):
        row = series.values[k]
        state = spot_init(
            row[:n_init], q=q, init_quantile=init_quantile, min_nonzero=min_nonzero
        )
        outlier_slots = []
        for i in range(n_init, series.n_slots):
            state, is_outlier = spot_step(state, float(row[i]))
            if is_outlier:
                outlier_slots.append(i)
        if not outlier_slots:
            continue
        for first, last in _consolidate(outlier_slots, split_gap_slots):
            failures.append(
                Failure(
                    sn=series.device_sn,
                    type_failure=dim,
                    type_device=catalog.device_class_of(dim),
                    start_time=series.origin + first * series.slot_len,
                    end_time=series.origin + (last + 1) * series.slot_len,
                )
            )
    return failures


def filter_changes(
    changes: Sequence[Change],
    whitelist: ChangeWhitelist,
    cmdb: Optional[CmdbGraph] = None,
    catalog: Optional[FailureTypeCatalog] = None,
) -> list[Change]:
    """Keep proactive changes that match a whitelist rule, order preserved."""

    def classes_of(change: Change) -> frozenset[str]:
        classes = set()
        for sn in change.device_sns:
            if cmdb is not None and sn in cmdb:
                classes.add(cmdb.device_class(sn))
        if not classes and catalog is not None and change.change_type in catalog:
            classes.add(catalog.device_class_of(change.change_type))
        return frozenset(classes)

    retained = []
    for change in changes:
        if change.trigger is not Trigger.PROACTIVE:
            continue
        classes = classes_of(change)
        if any(rule.matches(change, classes) for rule in whitelist.rules):
            retained.append(change)
    return retained


def _change_device_class(
    change: Change,
    catalog: FailureTypeCatalog,
    cmdb: Optional[CmdbGraph],
) -> str:
    if cmdb is not None:
        for sn in sorted(change.device_sns):
            if sn in cmdb:
                return cmdb.device_class(sn)
    return catalog.device_class_of(change.change_type)


def merge_events(
    failures: Sequence[Failure],
    incidents: Sequence[Incident],
    proactive: Sequence[Change],
    eta: int,
    window_t: int,
    window_t_prime: int,
    catalog: FailureTypeCatalog,
    cmdb: Optional[CmdbGraph] = None,
) -> list[Event]:
    """Merge detected failures, incidents and proactive changes into events.

    The diagnosis window [-T, T'] is segmented into eta-length windows
    aligned at -T; items whose (failure type, device class) coincide within
    one window merge into a single event whose device set is the union and
    whose span is the earliest start to the latest end. Changes contribute
    their change type as the failure type.
    """
    buckets: dict[tuple[int, str, str], list[tuple[frozenset[str], int, int, Source]]] = {}

    def add(sns: frozenset[str], ftype: str, dclass: str, start: int, end: int, src: Source):
        if start < -window_t or end > window_t_prime:
            raise SnapshotValidationError(
                f"{ftype} span [{start}, {end}] outside diagnosis window "
                f"[-{window_t}, {window_t_prime}]"
            )
        window = (start + window_t) // eta
        buckets.setdefault((window, ftype, dclass), []).append((sns, start, end, src))

    for f in failures:
        add(frozenset([f.sn]), f.type_failure, f.type_device, f.start_time, f.end_time, Source.ALERT)
    for inc in incidents:
        add(
            inc.device_sns,
            inc.failure_type,
            catalog.device_class_of(inc.failure_type),
            inc.start,
            inc.end,
            Source.INCIDENT,
        )
    for ch in proactive:
        add(
            ch.device_sns,
            ch.change_type,
            _change_device_class(ch, catalog, cmdb),
            ch.time,
            ch.time,
            Source.CHANGE,
        )

    source_order = {Source.ALERT: 0, Source.INCIDENT: 1, Source.CHANGE: 2}
    events = []
    for (window, ftype, dclass), members in buckets.items():
        sns: frozenset[str] = frozenset()
        for member_sns, _, _, _ in members:
            sns |= member_sns
        start = min(m[1] for m in members)
        end = max(m[2] for m in members)
        source = min(members, key=lambda m: (m[1], source_order[m[3]]))[3]
        events.append(
            Event(
                sns=sns,
                type_failure=ftype,
                type_device=dclass,
                start_time=start,
                end_time=end,
                source=source,
            )
        )
    events.sort(key=Event.sort_key)
    return events


def run_mfd(
    snapshot: OutageSnapshot,
    catalog: FailureTypeCatalog,
    config: PipelineConfig,
    whitelist: Optional[ChangeWhitelist] = None,
    cmdb: Optional[CmdbGraph] = None,
) -> list[Event]:
    """Full detection pass: snapshot -> outage-related candidate events E.

    Events whose failure type equals the outage's own type are the outage
    itself and are excluded; the outage event is carried on the snapshot.
    With no whitelist configured, all changes are considered irrelevant.
    """
    w = snapshot.window_params
    failures: list[Failure] = []
    subsets = partition_alerts(snapshot)
    for device_sn in sorted(subsets):
        series = alert_to_series(
            device_sn,
            subsets[device_sn],
            config.delta_minutes,
            w.initial,
            w.post,
            catalog,
            fallback=config.spot.intensity_fallback,
        )
        if series is None:
            continue
        failures.extend(
            detect_failures(
                series,
                w.diagnosis,
                config.spot.q,
                catalog,
                init_quantile=config.spot.init_quantile,
                min_nonzero=config.spot.min_nonzero,
                split_gap_slots=config.spot.split_gap_slots,
            )
        )

    if whitelist is None:
        whitelist = ChangeWhitelist()
    proactive = filter_changes(snapshot.changes, whitelist, cmdb=cmdb, catalog=catalog)

    merged = merge_events(
        failures,
        snapshot.incidents,
        proactive,
        config.eta_minutes,
        w.diagnosis,
        w.post,
        catalog,
        cmdb=cmdb,
    )
    return [e for e in merged if e.type_failure != snapshot.outage.type_failure]


def events_to_json(events: Iterable[Event]) -> str:
    return json.dumps([e.to_dict() for e in events], indent=2)
