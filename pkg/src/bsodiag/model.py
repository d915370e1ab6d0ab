"""Core domain types and the on-disk snapshot bundle format.

All timestamps live on a relative axis: signed integer minutes from the
outage occurrence instant, negative before the outage. Alerts are collected
over [-L, T'], incidents and changes over [-T, T'], where L/T/T' are the
snapshot's window parameters in minutes.

A snapshot bundle is a directory containing:

    meta.json       outage instant (optional ISO-8601), window parameters,
                    outage device SNs and outage failure type
    alerts.csv      columns: time,device_sn,failure_type,description
    incidents.csv   columns: start,end,device_sns,failure_type,description
    changes.csv     columns: time,device_sns,change_type,trigger,description

CSV files are UTF-8 with a header row and RFC-4180 quoting; multi-device
fields join SNs with ';'. Time fields are either integers (relative
minutes) or ISO-8601 timestamps, which require ``outage_instant`` in
meta.json and are floored to whole minutes relative to it.

All types here are immutable after construction and safe to share across
concurrent tasks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import SnapshotParseError, SnapshotValidationError

DEFAULT_OUTAGE_TYPE = "batch_servers_outage"


class Trigger(str, Enum):
    PROACTIVE = "proactive"
    PASSIVE = "passive"


class Source(str, Enum):
    ALERT = "alert"
    INCIDENT = "incident"
    CHANGE = "change"


@dataclass(frozen=True)
class WindowParams:
    """Snapshot collection windows, in minutes.

    ``initial`` (L) bounds how far back alerts reach, ``diagnosis`` (T)
    bounds incidents/changes, ``post`` (T') extends past the outage. The
    defaults reproduce an initial window of [-240, -120] and a diagnosis
    window of [-120, +15].
    """

    initial: int = 240
    diagnosis: int = 120
    post: int = 15

    def __post_init__(self) -> None:
        if self.initial <= 0 or self.diagnosis <= 0 or self.post < 0:
            raise SnapshotValidationError(
                f"window parameters must be positive: L={self.initial} "
                f"T={self.diagnosis} T'={self.post}"
            )
        if self.initial < self.diagnosis:
            raise SnapshotValidationError(
                f"initial window L={self.initial} must cover diagnosis window "
                f"T={self.diagnosis}"
            )


@dataclass(frozen=True)
class Alert:
    time: int
    device_sn: str
    failure_type: str
    description: str = ""


@dataclass(frozen=True)
class Incident:
    start: int
    end: int
    device_sns: frozenset[str]
    failure_type: str
    description: str = ""

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise SnapshotValidationError(
                f"incident start {self.start} after end {self.end}"
            )
        if not self.device_sns:
            raise SnapshotValidationError("incident has no devices")


@dataclass(frozen=True)
class Change:
    time: int
    device_sns: frozenset[str]
    change_type: str
    trigger: Trigger
    description: str = ""

    def __post_init__(self) -> None:
        if not self.device_sns:
            raise SnapshotValidationError("change has no devices")


@dataclass(frozen=True)
class Failure:
    """A consolidated per-device failure detected from one alert dimension."""

    sn: str
    type_failure: str
    type_device: str
    start_time: int
    end_time: int

    def __post_init__(self) -> None:
        if self.start_time > self.end_time:
            raise SnapshotValidationError(
                f"failure start {self.start_time} after end {self.end_time}"
            )


@dataclass(frozen=True)
class Event:
    """Unified failure representation produced by event merge."""

    sns: frozenset[str]
    type_failure: str
    type_device: str
    start_time: int
    end_time: int
    source: Source = Source.INCIDENT

    def __post_init__(self) -> None:
        if not self.sns:
            raise SnapshotValidationError("event has no devices")
        if self.start_time > self.end_time:
            raise SnapshotValidationError(
                f"event start {self.start_time} after end {self.end_time}"
            )

    def sort_key(self) -> tuple:
        return (
            self.start_time,
            self.type_failure,
            self.type_device,
            self.end_time,
            tuple(sorted(self.sns)),
        )

    def to_dict(self) -> dict:
        return {
            "sns": sorted(self.sns),
            "type_failure": self.type_failure,
            "type_device": self.type_device,
            "start_time": self.start_time,
            "end_time": self.end_time,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Event":
        return cls(
            sns=frozenset(d["sns"]),
            type_failure=d["type_failure"],
            type_device=d["type_device"],
            start_time=int(d["start_time"]),
            end_time=int(d["end_time"]),
            source=Source(d.get("source", "incident")),
        )


@dataclass(frozen=True)
class CatalogEntry:
    level: int
    device_class: str
    numeric: bool = False
    extraction_pattern: Optional[str] = None

    def __post_init__(self) -> None:
        if self.level < 0:
            raise SnapshotValidationError(f"catalog level must be >= 0, got {self.level}")


# Entry assigned to unknown failure types in permissive mode.
PERMISSIVE_ENTRY = CatalogEntry(level=0, device_class="unknown", numeric=False)


@dataclass(frozen=True)
class FailureTypeCatalog:
    """Failure-type registry: hierarchy level, device class, numeric extraction.

    Levels encode the failure rule tree: a type can only trigger types of
    strictly lower level.
    """

    entries: Mapping[str, CatalogEntry]

    def __contains__(self, failure_type: str) -> bool:
        return failure_type in self.entries

    def lookup(self, failure_type: str, permissive: bool = False) -> CatalogEntry:
        entry = self.entries.get(failure_type)
        if entry is None:
            if permissive:
                return PERMISSIVE_ENTRY
            raise SnapshotValidationError(f"unknown failure type: {failure_type!r}")
        return entry

    def level_of(self, failure_type: str) -> int:
        return self.lookup(failure_type, permissive=True).level

    def device_class_of(self, failure_type: str) -> str:
        return self.lookup(failure_type, permissive=True).device_class

    def levels(self) -> dict[str, int]:
        return {name: e.level for name, e in self.entries.items()}

    def to_dict(self) -> dict:
        out = {}
        for name in sorted(self.entries):
            e = self.entries[name]
            d = {"level": e.level, "device_class": e.device_class, "numeric": e.numeric}
            if e.extraction_pattern:
                d["extraction_pattern"] = e.extraction_pattern
            out[name] = d
        return {"entries": out}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FailureTypeCatalog":
        entries = {}
        for name, raw in d.get("entries", {}).items():
            entries[name] = CatalogEntry(
                level=int(raw["level"]),
                device_class=str(raw["device_class"]),
                numeric=bool(raw.get("numeric", False)),
                extraction_pattern=raw.get("extraction_pattern"),
            )
        return cls(entries=entries)


@dataclass(frozen=True)
class OutageSnapshot:
    """All monitoring data collected around one batch-servers outage."""

    outage: Event
    alerts: tuple[Alert, ...]
    incidents: tuple[Incident, ...]
    changes: tuple[Change, ...]
    window_params: WindowParams
    outage_instant: Optional[str] = None

    def __post_init__(self) -> None:
        w = self.window_params
        for i, a in enumerate(self.alerts):
            if not -w.initial <= a.time <= w.post:
                raise SnapshotValidationError(
                    f"alert #{i} time {a.time} outside [-{w.initial}, {w.post}]"
                )
        for i, inc in enumerate(self.incidents):
            for label, t in (("start", inc.start), ("end", inc.end)):
                if not -w.diagnosis <= t <= w.post:
                    raise SnapshotValidationError(
                        f"incident #{i} {label} {t} outside [-{w.diagnosis}, {w.post}]"
                    )
        for i, ch in enumerate(self.changes):
            if not -w.diagnosis <= ch.time <= w.post:
                raise SnapshotValidationError(
                    f"change #{i} time {ch.time} outside [-{w.diagnosis}, {w.post}]"
                )
        for label, t in (("start", self.outage.start_time), ("end", self.outage.end_time)):
            if not -w.diagnosis <= t <= w.post:
                raise SnapshotValidationError(
                    f"outage {label} {t} outside [-{w.diagnosis}, {w.post}]"
                )


ALERT_COLUMNS = ["time", "device_sn", "failure_type", "description"]
INCIDENT_COLUMNS = ["start", "end", "device_sns", "failure_type", "description"]
CHANGE_COLUMNS = ["time", "device_sns", "change_type", "trigger", "description"]
SN_SEPARATOR = ";"


def _parse_instant(raw: str, context: str) -> datetime:
    try:
        return datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as e:
        raise SnapshotParseError(f"{context}: bad ISO-8601 timestamp {raw!r}: {e}") from e


def _relative_minutes(
    raw: str, outage_instant: Optional[datetime], context: str
) -> int:
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    if outage_instant is None:
        raise SnapshotParseError(
            f"{context}: time {raw!r} is not an integer and meta.json has no "
            "outage_instant to resolve absolute timestamps"
        )
    ts = _parse_instant(raw, context)
    delta = ts - outage_instant
    return delta.days * 1440 + delta.seconds // 60


def _split_sns(raw: str, context: str) -> frozenset[str]:
    sns = frozenset(s for s in (p.strip() for p in raw.split(SN_SEPARATOR)) if s)
    if not sns:
        raise SnapshotParseError(f"{context}: empty device_sns field")
    return sns


def _read_rows(path: Path, columns: Sequence[str]) -> Iterable[tuple[int, dict]]:
    if not path.exists():
        raise SnapshotParseError(f"missing bundle file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(columns):
            raise SnapshotParseError(
                f"{path.name}: header must be exactly {','.join(columns)}, "
                f"got {','.join(reader.fieldnames or [])}"
            )
        for lineno, row in enumerate(reader, start=2):
            if any(v is None for v in row.values()) or None in row:
                raise SnapshotParseError(f"{path.name}:{lineno}: wrong column count")
            yield lineno, row


def load_catalog(path: Union[str, Path]) -> FailureTypeCatalog:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SnapshotParseError(f"cannot read catalog {path}: {e}") from e
    return FailureTypeCatalog.from_dict(data)


def save_catalog(catalog: FailureTypeCatalog, path: Union[str, Path]) -> None:
    Path(path).write_text(
        json.dumps(catalog.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_snapshot(
    path: Union[str, Path],
    catalog: FailureTypeCatalog,
    permissive: bool = False,
) -> OutageSnapshot:
    """Load and validate a snapshot bundle directory.

    Strict mode (default) rejects alert/incident failure types missing from
    the catalog; permissive mode admits them with level 0. Change types are
    opaque identifiers and are not checked against the catalog.
    """
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise SnapshotParseError(f"missing bundle file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SnapshotParseError(f"{meta_path}: invalid JSON: {e}") from e

    for key in ("L", "T", "T_prime", "outage_sns"):
        if key not in meta:
            raise SnapshotParseError(f"{meta_path}: missing field {key!r}")
    windows = WindowParams(
        initial=int(meta["L"]), diagnosis=int(meta["T"]), post=int(meta["T_prime"])
    )
    instant_raw = meta.get("outage_instant")
    instant = _parse_instant(str(instant_raw), str(meta_path)) if instant_raw else None

    outage_type = str(meta.get("outage_type", DEFAULT_OUTAGE_TYPE))
    outage_sns = frozenset(str(s) for s in meta["outage_sns"])
    if not outage_sns:
        raise SnapshotParseError(f"{meta_path}: outage_sns is empty")
    outage = Event(
        sns=outage_sns,
        type_failure=outage_type,
        type_device=catalog.lookup(outage_type, permissive=True).device_class,
        start_time=int(meta.get("outage_start", 0)),
        end_time=int(meta.get("outage_end", 0)),
        source=Source.INCIDENT,
    )

    def check_type(ftype: str, context: str) -> None:
        if not permissive and ftype not in catalog:
            raise SnapshotValidationError(f"{context}: unknown failure type {ftype!r}")

    alerts = []
    apath = path / "alerts.csv"
    for lineno, row in _read_rows(apath, ALERT_COLUMNS):
        ctx = f"{apath.name}:{lineno}"
        check_type(row["failure_type"], ctx + ":failure_type")
        alerts.append(
            Alert(
                time=_relative_minutes(row["time"], instant, ctx + ":time"),
                device_sn=row["device_sn"].strip(),
                failure_type=row["failure_type"].strip(),
                description=row["description"],
            )
        )

    incidents = []
    ipath = path / "incidents.csv"
    for lineno, row in _read_rows(ipath, INCIDENT_COLUMNS):
        ctx = f"{ipath.name}:{lineno}"
        check_type(row["failure_type"], ctx + ":failure_type")
        incidents.append(
            Incident(
                start=_relative_minutes(row["start"], instant, ctx + ":start"),
                end=_relative_minutes(row["end"], instant, ctx + ":end"),
                device_sns=_split_sns(row["device_sns"], ctx + ":device_sns"),
                failure_type=row["failure_type"].strip(),
                description=row["description"],
            )
        )

    changes = []
    cpath = path / "changes.csv"
    for lineno, row in _read_rows(cpath, CHANGE_COLUMNS):
        ctx = f"{cpath.name}:{lineno}"
        trig = row["trigger"].strip().lower()
        if trig not in (Trigger.PROACTIVE.value, Trigger.PASSIVE.value):
            raise SnapshotParseError(f"{ctx}:trigger: must be proactive or passive, got {trig!r}")
        changes.append(
            Change(
                time=_relative_minutes(row["time"], instant, ctx + ":time"),
                device_sns=_split_sns(row["device_sns"], ctx + ":device_sns"),
                change_type=row["change_type"].strip(),
                trigger=Trigger(trig),
                description=row["description"],
            )
        )

    return OutageSnapshot(
        outage=outage,
        alerts=tuple(alerts),
        incidents=tuple(incidents),
        changes=tuple(changes),
        window_params=windows,
        outage_instant=str(instant_raw) if instant_raw else None,
    )


def save_snapshot(snapshot: OutageSnapshot, path: Union[str, Path]) -> None:
    """Write a snapshot as a bundle directory (relative integer times)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    w = snapshot.window_params
    meta = {
        "outage_instant": snapshot.outage_instant,
        "L": w.initial,
        "T": w.diagnosis,
        "T_prime": w.post,
        "outage_type": snapshot.outage.type_failure,
        "outage_sns": sorted(snapshot.outage.sns),
        "outage_start": snapshot.outage.start_time,
        "outage_end": snapshot.outage.end_time,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

    with (path / "alerts.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ALERT_COLUMNS)
        for a in snapshot.alerts:
            writer.writerow([a.time, a.device_sn, a.failure_type, a.description])

    with (path / "incidents.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(INCIDENT_COLUMNS)
        for inc in snapshot.incidents:
            writer.writerow(
                [
                    inc.start,
                    inc.end,
                    SN_SEPARATOR.join(sorted(inc.device_sns)),
                    inc.failure_type,
                    inc.description,
                ]
            )

    with (path / "changes.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHANGE_COLUMNS)
        for ch in snapshot.changes:
            writer.writerow(
                [
                    ch.time,
                    SN_SEPARATOR.join(sorted(ch.device_sns)),
                    ch.change_type,
                    ch.trigger.value,
                    ch.description,
                ]
            )
