"""Synthetic cloud-infrastructure scenario generation.

Produces CMDB topologies (power, cooling and network dependencies wired as
directed downstream edges), injects root-cause failure chains with ground
truth, and renders realistic monitoring data:

* chain steps materialize on devices downstream of the previous step and
  emit incidents (subject to omission), proactive changes, and bursts of
  alerts (subject to flooding);
* stationary background noise is emitted as per-minute heartbeat alerts
  with bounded continuous values, identical in the initial and diagnosis
  windows, so a calibrated detector should not flag it;
* distractor bursts land on devices with no connectivity to the outage,
  earlier than the root cause and often higher in the failure hierarchy,
  which is exactly what trips time-first and hierarchy-first triage.

Everything is a pure function of (spec, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import json

from .cmdb import CmdbGraph
from .errors import ConfigurationError, GenerationError
from .fcm import TaggedEvent
from .mfd import ChangeWhitelist, WhitelistRule
from .model import (
    DEFAULT_OUTAGE_TYPE,
    Alert,
    CatalogEntry,
    Change,
    Event,
    FailureTypeCatalog,
    Incident,
    OutageSnapshot,
    Source,
    Trigger,
    WindowParams,
)

OUTAGE_TYPE = DEFAULT_OUTAGE_TYPE


def default_catalog() -> FailureTypeCatalog:
    """Failure taxonomy used by the generator (levels = rule-tree hierarchy)."""
    return FailureTypeCatalog(
        entries={
            OUTAGE_TYPE: CatalogEntry(level=1, device_class="server"),
            "partial_network_loss": CatalogEntry(
                level=2,
                device_class="server",
                numeric=True,
                extraction_pattern=r"loss_pct=([0-9]+(?:\.[0-9]+)?)",
            ),
            "high_cpu_utilization": CatalogEntry(
                level=2,
                device_class="server",
                numeric=True,
                extraction_pattern=r"cpu_util=([0-9]+(?:\.[0-9]+)?)",
            ),
            "temperature_anomaly": CatalogEntry(
                level=3,
                device_class="rack",
                numeric=True,
                extraction_pattern=r"temp_c=([0-9]+(?:\.[0-9]+)?)",
            ),
            "switch_reboot": CatalogEntry(level=4, device_class="switch"),
            "psu_power_outage": CatalogEntry(level=5, device_class="rack"),
            "psu_replacement": CatalogEntry(level=6, device_class="rack"),
            "refrigerant_replacing": CatalogEntry(level=6, device_class="cooling"),
            "fan_speed_anomaly": CatalogEntry(
                level=6,
                device_class="cooling",
                numeric=True,
                extraction_pattern=r"fan_rpm=([0-9]+(?:\.[0-9]+)?)",
            ),
            "ups_voltage_fluctuation": CatalogEntry(
                level=7,
                device_class="ups",
                numeric=True,
                extraction_pattern=r"voltage=([0-9]+(?:\.[0-9]+)?)",
            ),
        }
    )


def default_whitelist() -> ChangeWhitelist:
    return ChangeWhitelist(
        rules=(
            WhitelistRule(
                change_types=frozenset({"psu_replacement", "refrigerant_replacing"})
            ),
        )
    )


# Value bands for rendered alert descriptions: (noise_lo, noise_hi) for
# heartbeats and (burst_lo, burst_hi) for genuine failures.
_VALUE_BANDS = {
    "high_cpu_utilization": ((55.0, 85.0), (92.0, 100.0)),
    "partial_network_loss": ((0.1, 5.0), (40.0, 90.0)),
    "temperature_anomaly": ((18.0, 24.0), (45.0, 60.0)),
    "fan_speed_anomaly": ((2000.0, 3000.0), (9000.0, 12000.0)),
    "ups_voltage_fluctuation": ((218.0, 222.0), (250.0, 280.0)),
}

_VALUE_KEYS = {
    "high_cpu_utilization": "cpu_util",
    "partial_network_loss": "loss_pct",
    "temperature_anomaly": "temp_c",
    "fan_speed_anomaly": "fan_rpm",
    "ups_voltage_fluctuation": "voltage",
}


@dataclass(frozen=True)
class TopologySpec:
    """Device counts per class plus the wiring seed."""

    ups: int = 2
    cooling: int = 2
    load_balancers: int = 1
    switches: int = 3
    racks: int = 4
    servers: int = 24
    seed: int = 0

    def __post_init__(self) -> None:
        if self.servers < 1 or self.racks < 1:
            raise GenerationError("topologies need at least one rack and one server")
        for name in ("ups", "cooling", "load_balancers", "switches"):
            if getattr(self, name) < 0:
                raise GenerationError(f"negative device count for {name}")


def _partition(members: Sequence[str], parents: Sequence[str]) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {p: [] for p in parents}
    for i, m in enumerate(members):
        out[parents[i % len(parents)]].append(m)
    return out


def generate_topology(spec: TopologySpec) -> CmdbGraph:
    """Deterministic CMDB for a spec: power, cooling and network wiring.

    Racks feed their servers, UPS units feed racks, cooling units cover
    rooms of racks and switches, and a one- or two-layer switch tree (plus
    load balancers) fans out to the servers.
    """
    rng = np.random.default_rng(spec.seed)
    servers = [f"srv-{i:03d}" for i in range(spec.servers)]
    racks = [f"rack-{i:02d}" for i in range(spec.racks)]
    switches = [f"sw-{i:02d}" for i in range(spec.switches)]
    ups = [f"ups-{i:02d}" for i in range(spec.ups)]
    cooling = [f"cool-{i:02d}" for i in range(spec.cooling)]
    lbs = [f"lb-{i:02d}" for i in range(spec.load_balancers)]

    classes: dict[str, str] = {}
    for sn_list, cls in (
        (servers, "server"),
        (racks, "rack"),
        (switches, "switch"),
        (ups, "ups"),
        (cooling, "cooling"),
        (lbs, "load_balancer"),
    ):
        for sn in sn_list:
            classes[sn] = cls

    adjacency: dict[str, set[str]] = {sn: set() for sn in classes}

    shuffled_servers = list(servers)
    rng.shuffle(shuffled_servers)
    for rack, members in _partition(shuffled_servers, racks).items():
        adjacency[rack].update(members)

    if ups:
        shuffled_racks = list(racks)
        rng.shuffle(shuffled_racks)
        for unit, members in _partition(shuffled_racks, ups).items():
            adjacency[unit].update(members)

    top_switches: list[str] = []
    edge_switches: list[str] = []
    if switches:
        if len(switches) == 1:
            edge_switches = switches
        else:
            n_top = max(1, len(switches) // 4)
            top_switches = switches[:n_top]
            edge_switches = switches[n_top:]
        for sw, members in _partition(shuffled_servers, edge_switches).items():
            adjacency[sw].update(members)
        if top_switches:
            for top, members in _partition(edge_switches, top_switches).items():
                adjacency[top].update(members)
        if lbs:
            uplinks = top_switches if top_switches else edge_switches
            for lb, members in _partition(uplinks, lbs).items():
                adjacency[lb].update(members)

    if cooling:
        rooms = racks + switches
        for unit, members in _partition(rooms, cooling).items():
            adjacency[unit].update(members)

    cmdb = CmdbGraph(
        classes=classes,
        adjacency={sn: frozenset(peers) for sn, peers in adjacency.items() if peers},
    )
    server_set = set(servers)
    for sn in classes:
        if classes[sn] != "server" and not (cmdb.descendants([sn]) & server_set):
            raise GenerationError(f"{sn} cannot reach any server; wiring unsatisfiable")
    return cmdb


@dataclass(frozen=True)
class ChainStep:
    failure_type: str
    device_class: str
    delay_min: int = 1
    delay_max: int = 10
    record: str = "incident"  # "incident" | "change" | "none"
    emit_alerts: bool = False
    root_devices: int = 1
    # Direct-cause roots must sit on devices that feed servers one hop down
    # (e.g. edge switches, not aggregation switches).
    root_feeds_servers: bool = False

    def __post_init__(self) -> None:
        if self.delay_min < 0 or self.delay_max < self.delay_min:
            raise ConfigurationError(
                f"bad delay range [{self.delay_min}, {self.delay_max}]"
            )
        if self.record not in ("incident", "change", "none"):
            raise ConfigurationError(f"bad record kind {self.record!r}")


@dataclass(frozen=True)
class CollateralSpec:
    """Off-path side event anchored to a chain step.

    Placement picks the devices relative to the anchor step's devices:
    "same" reuses them, "downstream" takes their one-hop successors of the
    collateral's class, "upstream" their one-hop predecessors. Delays are
    signed offsets from the anchor's start, so symptoms may precede it.
    """

    failure_type: str
    device_class: str
    attach_step: int = 0
    probability: float = 1.0
    delay_min: int = 1
    delay_max: int = 5
    record: str = "incident"
    emit_alerts: bool = False
    placement: str = "same"  # "same" | "downstream" | "upstream"
    max_devices: int = 0  # 0 = all eligible devices

    def __post_init__(self) -> None:
        if self.delay_max < self.delay_min:
            raise ConfigurationError(
                f"bad delay range [{self.delay_min}, {self.delay_max}]"
            )
        if self.placement not in ("same", "downstream", "upstream"):
            raise ConfigurationError(f"bad placement {self.placement!r}")


@dataclass(frozen=True)
class HeartbeatSpec:
    """Stationary per-minute telemetry alerts over a fraction of a class."""

    failure_type: str
    coverage: float = 1.0


@dataclass(frozen=True)
class NoiseSpec:
    heartbeats: tuple[HeartbeatSpec, ...] = ()
    flooding_factor: int = 1
    incident_omission: float = 0.0
    passive_changes: float = 0.0
    distractors_min: int = 0
    distractors_max: int = 0
    distractor_types: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.flooding_factor < 1:
            raise ConfigurationError("flooding_factor must be >= 1")
        if not 0 <= self.incident_omission <= 1:
            raise ConfigurationError("incident_omission must be in [0, 1]")
        if self.distractors_min > self.distractors_max:
            raise ConfigurationError("distractors_min must be <= distractors_max")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    chain: tuple[ChainStep, ...]
    collaterals: tuple[CollateralSpec, ...] = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    windows: WindowParams = field(default_factory=WindowParams)

    def __post_init__(self) -> None:
        if not self.chain:
            raise ConfigurationError("a chain needs at least the outage step")
        if self.chain[-1].failure_type != OUTAGE_TYPE:
            raise ConfigurationError(
                f"chains must terminate in {OUTAGE_TYPE!r}, "
                f"got {self.chain[-1].failure_type!r}"
            )


@dataclass(frozen=True)
class ScenarioLibrary:
    topology: TopologySpec
    scenarios: tuple[ScenarioSpec, ...]
    weights: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not self.scenarios:
            return
        if self.weights and len(self.weights) != len(self.scenarios):
            raise ConfigurationError("weights must match scenarios one-to-one")

    def draw(self, rng: np.random.Generator) -> ScenarioSpec:
        if not self.scenarios:
            raise GenerationError("scenario library is empty")
        weights = np.asarray(self.weights if self.weights else [1.0] * len(self.scenarios))
        probs = weights / weights.sum()
        return self.scenarios[int(rng.choice(len(self.scenarios), p=probs))]


@dataclass(frozen=True)
class GroundTruth:
    root_cause: Event
    path: tuple[Event, ...]
    injected: tuple[Event, ...]

    def to_dict(self) -> dict:
        return {
            "root_cause": self.root_cause.to_dict(),
            "path": [e.to_dict() for e in self.path],
            "injected": [e.to_dict() for e in self.injected],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruth":
        return cls(
            root_cause=Event.from_dict(d["root_cause"]),
            path=tuple(Event.from_dict(e) for e in d["path"]),
            injected=tuple(Event.from_dict(e) for e in d["injected"]),
        )

    def path_types(self) -> list[str]:
        return [e.type_failure for e in self.path]


def save_truth(truth: GroundTruth, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(truth.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_truth(path: Union[str, Path]) -> GroundTruth:
    return GroundTruth.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class _PlannedEvent:
    event: Event
    record: str
    emit_alerts: bool
    on_path: bool


def _chain_devices(
    cmdb: CmdbGraph,
    step: ChainStep,
    prev: Optional[tuple[ChainStep, list[str]]],
    rng: np.random.Generator,
) -> list[str]:
    members = set(cmdb.devices_of_class(step.device_class))
    if not members:
        raise GenerationError(f"no devices of class {step.device_class!r}")
    if prev is None:
        pool = sorted(members)
        if step.root_feeds_servers:
            pool = [
                sn
                for sn in pool
                if any(cmdb.device_class(p) == "server" for p in cmdb.out(sn))
            ]
            if not pool:
                raise GenerationError(
                    f"no {step.device_class!r} device feeds servers directly"
                )
        n = min(step.root_devices, len(pool))
        picked = rng.choice(len(pool), size=n, replace=False)
        return sorted(pool[i] for i in picked)
    prev_step, prev_devices = prev
    candidates = sorted(cmdb.out_set(prev_devices) & members)
    if not candidates and prev_step.device_class == step.device_class:
        candidates = sorted(prev_devices)
    if not candidates:
        candidates = sorted(cmdb.descendants(prev_devices) & members)
    if not candidates:
        raise GenerationError(
            f"chain step {step.failure_type!r} has no reachable "
            f"{step.device_class!r} device downstream of {prev_devices}"
        )
    return candidates


def _plan(
    cmdb: CmdbGraph, spec: ScenarioSpec, rng: np.random.Generator
) -> tuple[list[_PlannedEvent], list[_PlannedEvent]]:
    """Materialize chain and side events on concrete devices and times.

    Returns (path events in order, off-path events).
    """
    w = spec.windows
    delays = [0] + [
        int(rng.integers(s.delay_min, s.delay_max + 1)) for s in spec.chain[1:]
    ]
    start = -sum(delays)
    if start < -(w.diagnosis - 10):
        raise GenerationError(
            f"chain span {-start} min does not fit the diagnosis window "
            f"T={w.diagnosis}"
        )

    chain_events: list[_PlannedEvent] = []
    devices_by_step: list[list[str]] = []
    t = start
    prev: Optional[tuple[ChainStep, list[str]]] = None
    for i, step in enumerate(spec.chain):
        t += delays[i]
        devices = _chain_devices(cmdb, step, prev, rng)
        duration = int(rng.integers(1, 4))
        end = min(t + duration, w.post)
        event = Event(
            sns=frozenset(devices),
            type_failure=step.failure_type,
            type_device=step.device_class,
            start_time=t,
            end_time=max(end, t),
            source=Source.CHANGE if step.record == "change" else Source.INCIDENT,
        )
        chain_events.append(
            _PlannedEvent(event=event, record=step.record, emit_alerts=step.emit_alerts, on_path=True)
        )
        devices_by_step.append(devices)
        prev = (step, devices)

    side_events: list[_PlannedEvent] = []
    for coll in spec.collaterals:
        if rng.random() >= coll.probability:
            continue
        anchor = chain_events[coll.attach_step]
        anchor_devices = devices_by_step[coll.attach_step]
        if coll.placement == "downstream":
            members = set(cmdb.devices_of_class(coll.device_class))
            devices = sorted(cmdb.out_set(anchor_devices) & members)
        elif coll.placement == "upstream":
            anchor_set = set(anchor_devices)
            devices = sorted(
                sn
                for sn in cmdb.devices_of_class(coll.device_class)
                if cmdb.out(sn) & anchor_set
            )
        else:
            devices = sorted(anchor_devices)
        if not devices:
            continue
        if coll.max_devices and len(devices) > coll.max_devices:
            picked = rng.choice(len(devices), size=coll.max_devices, replace=False)
            devices = sorted(devices[j] for j in picked)
        t0 = anchor.event.start_time + int(rng.integers(coll.delay_min, coll.delay_max + 1))
        if t0 > w.post - 1 or t0 < -(w.diagnosis - 2):
            continue
        event = Event(
            sns=frozenset(devices),
            type_failure=coll.failure_type,
            type_device=coll.device_class,
            start_time=t0,
            end_time=min(t0 + int(rng.integers(1, 4)), w.post),
            source=Source.INCIDENT,
        )
        side_events.append(
            _PlannedEvent(event=event, record=coll.record, emit_alerts=coll.emit_alerts, on_path=False)
        )

    # Distractor bursts: devices with no connectivity to the outage servers,
    # timed before the root cause.
    noise = spec.noise
    outage_sns = chain_events[-1].event.sns
    n_distr = (
        int(rng.integers(noise.distractors_min, noise.distractors_max + 1))
        if noise.distractors_max > 0
        else 0
    )
    catalog = default_catalog()
    for _ in range(n_distr):
        ftype = str(noise.distractor_types[int(rng.integers(0, len(noise.distractor_types)))])
        dclass = catalog.device_class_of(ftype)
        eligible = [
            sn
            for sn in cmdb.devices_of_class(dclass)
            if sn not in outage_sns and not (cmdb.out(sn) & outage_sns)
        ]
        if not eligible:
            continue
        device = eligible[int(rng.integers(0, len(eligible)))]
        latest = chain_events[0].event.start_time - 4
        earliest = -(w.diagnosis - 5)
        if latest <= earliest:
            continue
        t0 = int(rng.integers(earliest, latest + 1))
        event = Event(
            sns=frozenset([device]),
            type_failure=ftype,
            type_device=dclass,
            start_time=t0,
            end_time=t0 + 2,
            source=Source.ALERT,
        )
        side_events.append(
            _PlannedEvent(event=event, record="none", emit_alerts=True, on_path=False)
        )

    return chain_events, side_events


def _value(rng: np.random.Generator, ftype: str, burst: bool) -> str:
    band = _VALUE_BANDS.get(ftype)
    if band is None:
        return ""
    lo, hi = band[1] if burst else band[0]
    return f"{_VALUE_KEYS[ftype]}={rng.uniform(lo, hi):.1f}"


def _burst_alerts(
    planned: _PlannedEvent,
    flooding: int,
    rng: np.random.Generator,
    catalog: FailureTypeCatalog,
    w: WindowParams,
) -> list[Alert]:
    event = planned.event
    numeric = catalog.lookup(event.type_failure, permissive=True).numeric
    alerts = []
    for sn in sorted(event.sns):
        for offset in range(3):
            t = event.start_time + offset
            if t > w.post:
                break
            for _ in range(flooding):
                desc = _value(rng, event.type_failure, burst=True) if numeric else (
                    f"{event.type_failure} detected"
                )
                alerts.append(
                    Alert(time=t, device_sn=sn, failure_type=event.type_failure, description=desc)
                )
    return alerts


def inject_scenario(
    cmdb: CmdbGraph, spec: ScenarioSpec, seed: int
) -> tuple[OutageSnapshot, GroundTruth]:
    """Render one scenario into a snapshot bundle plus its ground truth."""
    rng = np.random.default_rng(seed)
    catalog = default_catalog()
    w = spec.windows
    chain_events, side_events = _plan(cmdb, spec, rng)
    noise = spec.noise

    alerts: list[Alert] = []
    incidents: list[Incident] = []
    changes: list[Change] = []

    outage_planned = chain_events[-1]
    for planned in chain_events + side_events:
        event = planned.event
        if planned.record == "incident":
            omitted = (
                planned is not outage_planned
                and rng.random() < noise.incident_omission
            )
            if not omitted:
                incidents.append(
                    Incident(
                        start=event.start_time,
                        end=event.end_time,
                        device_sns=event.sns,
                        failure_type=event.type_failure,
                        description=f"{event.type_failure} on {len(event.sns)} devices",
                    )
                )
        elif planned.record == "change":
            changes.append(
                Change(
                    time=event.start_time,
                    device_sns=event.sns,
                    change_type=event.type_failure,
                    trigger=Trigger.PROACTIVE,
                    description=f"{event.type_failure} maintenance",
                )
            )
        if planned.emit_alerts and planned is not outage_planned:
            alerts.extend(_burst_alerts(planned, noise.flooding_factor, rng, catalog, w))

    # Stationary heartbeat noise, identical process across both windows.
    for hb in noise.heartbeats:
        dclass = catalog.device_class_of(hb.failure_type)
        members = cmdb.devices_of_class(dclass)
        n_covered = int(round(hb.coverage * len(members)))
        if n_covered <= 0:
            continue
        picked = sorted(
            members[i] for i in rng.choice(len(members), size=n_covered, replace=False)
        )
        for sn in picked:
            values = rng.uniform(
                _VALUE_BANDS[hb.failure_type][0][0],
                _VALUE_BANDS[hb.failure_type][0][1],
                size=w.initial + w.post,
            )
            key = _VALUE_KEYS[hb.failure_type]
            # Millesimal precision keeps the telemetry effectively
            # continuous, so the calibration quantile sits strictly below
            # the sample maximum and the detector gets a warm fit.
            for i, v in enumerate(values):
                alerts.append(
                    Alert(
                        time=-w.initial + i,
                        device_sn=sn,
                        failure_type=hb.failure_type,
                        description=f"{key}={v:.3f}",
                    )
                )

    n_passive = int(rng.poisson(noise.passive_changes)) if noise.passive_changes else 0
    all_devices = sorted(cmdb.classes)
    for _ in range(n_passive):
        sn = all_devices[int(rng.integers(0, len(all_devices)))]
        changes.append(
            Change(
                time=int(rng.integers(-w.diagnosis + 1, w.post)),
                device_sns=frozenset([sn]),
                change_type="vm_migration",
                trigger=Trigger.PASSIVE,
                description="automated virtual resource migration",
            )
        )

    alerts.sort(key=lambda a: (a.time, a.device_sn, a.failure_type, a.description))
    incidents.sort(key=lambda i: (i.start, i.failure_type, sorted(i.device_sns)))
    changes.sort(key=lambda c: (c.time, c.change_type, sorted(c.device_sns)))

    outage_event = replace(outage_planned.event, source=Source.INCIDENT)
    snapshot = OutageSnapshot(
        outage=outage_event,
        alerts=tuple(alerts),
        incidents=tuple(incidents),
        changes=tuple(changes),
        window_params=w,
    )
    truth = GroundTruth(
        root_cause=chain_events[0].event,
        path=tuple(p.event for p in chain_events),
        injected=tuple(p.event for p in chain_events + side_events),
    )
    return snapshot, truth


def generate_history(
    cmdb: CmdbGraph,
    library: ScenarioLibrary,
    n_days: int,
    seed: int,
    data_centers: Sequence[str] = ("dc-01",),
    start_day: str = "2023-01-01",
) -> list[TaggedEvent]:
    """Tagged ground-truth event corpus for correlation mining.

    One scenario is drawn per (day, data center). Only ticketed events
    (incidents and changes) enter the corpus: raw alert storms are not
    curated into historical failure records, so their types never gain
    mined confidence. Pairwise conditional frequencies follow directly
    from the library composition.
    """
    if n_days < 0:
        raise ConfigurationError("n_days must be >= 0")
    first = date.fromisoformat(start_day)
    rng = np.random.default_rng(seed)
    corpus: list[TaggedEvent] = []
    if not library.scenarios:
        return corpus
    for day_idx in range(n_days):
        day = (first + timedelta(days=day_idx)).isoformat()
        for dc in data_centers:
            spec = library.draw(rng)
            chain_events, side_events = _plan(cmdb, spec, rng)
            for planned in chain_events + side_events:
                if planned.record == "none":
                    continue
                corpus.append(TaggedEvent(day=day, data_center=dc, event=planned.event))
    return corpus


def simulate_cases(
    library: ScenarioLibrary,
    n_cases: int,
    seed: int,
) -> list[tuple[OutageSnapshot, GroundTruth]]:
    """Generate ``n_cases`` seeded scenario instances over one topology."""
    cmdb = generate_topology(library.topology)
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n_cases):
        spec = library.draw(rng)
        snapshot, truth = inject_scenario(cmdb, spec, seed=int(rng.integers(0, 2**31)))
        cases.append((snapshot, truth))
    return cases


def _noisy_noise() -> NoiseSpec:
    return NoiseSpec(
        heartbeats=(
            HeartbeatSpec("high_cpu_utilization", coverage=1.0),
            HeartbeatSpec("partial_network_loss", coverage=0.6),
            HeartbeatSpec("temperature_anomaly", coverage=1.0),
        ),
        flooding_factor=20,
        incident_omission=0.3,
        passive_changes=1.0,
        distractors_min=2,
        distractors_max=5,
        distractor_types=(
            "ups_voltage_fluctuation",
            "fan_speed_anomaly",
            "temperature_anomaly",
        ),
    )


def zero_noise_library(topology: Optional[TopologySpec] = None) -> ScenarioLibrary:
    """Direct-cause scenarios with clean monitoring data."""
    topo = topology or TopologySpec(seed=7)
    outage = ChainStep(OUTAGE_TYPE, "server", delay_min=2, delay_max=8)
    return ScenarioLibrary(
        topology=topo,
        scenarios=(
            ScenarioSpec(
                name="rack-power-outage",
                chain=(
                    ChainStep("psu_power_outage", "rack", emit_alerts=True),
                    outage,
                ),
            ),
            ScenarioSpec(
                name="switch-reboot",
                chain=(
                    ChainStep(
                        "switch_reboot", "switch", emit_alerts=True, root_feeds_servers=True
                    ),
                    outage,
                ),
            ),
            ScenarioSpec(
                name="psu-replacement-change",
                chain=(
                    ChainStep("psu_replacement", "rack", record="change"),
                    outage,
                ),
            ),
        ),
    )


def noisy_library(topology: Optional[TopologySpec] = None) -> ScenarioLibrary:
    """Cascade scenarios under flooding, omission, noise and distractors."""
    topo = topology or TopologySpec(seed=7)
    noise = _noisy_noise()
    outage = ChainStep(OUTAGE_TYPE, "server", delay_min=2, delay_max=8)
    mid_pnl = ChainStep(
        "partial_network_loss", "server", delay_min=2, delay_max=8, emit_alerts=True
    )
    temp_collateral = CollateralSpec(
        "temperature_anomaly",
        "rack",
        attach_step=0,
        probability=0.5,
        emit_alerts=True,
    )
    return ScenarioLibrary(
        topology=topo,
        scenarios=(
            ScenarioSpec(
                name="rack-power-direct",
                chain=(
                    ChainStep("psu_power_outage", "rack", emit_alerts=True),
                    outage,
                ),
                collaterals=(temp_collateral,),
                noise=noise,
            ),
            ScenarioSpec(
                name="switch-reboot-direct",
                chain=(
                    ChainStep(
                        "switch_reboot", "switch", emit_alerts=True, root_feeds_servers=True
                    ),
                    outage,
                ),
                noise=noise,
            ),
            ScenarioSpec(
                name="rack-power-cascade",
                chain=(
                    ChainStep("psu_power_outage", "rack", emit_alerts=True),
                    mid_pnl,
                    outage,
                ),
                collaterals=(temp_collateral,),
                noise=noise,
            ),
            ScenarioSpec(
                name="switch-reboot-cascade",
                chain=(
                    ChainStep(
                        "switch_reboot", "switch", emit_alerts=True, root_feeds_servers=True
                    ),
                    mid_pnl,
                    outage,
                ),
                noise=noise,
            ),
            ScenarioSpec(
                name="psu-replacement-cascade",
                chain=(
                    ChainStep("psu_replacement", "rack", record="change"),
                    ChainStep(
                        "psu_power_outage",
                        "rack",
                        delay_min=2,
                        delay_max=6,
                        emit_alerts=True,
                    ),
                    outage,
                ),
                noise=noise,
            ),
        ),
        weights=(2.0, 2.0, 1.5, 1.5, 1.0),
    )


def efficiency_library() -> ScenarioLibrary:
    """A single large case with roughly 1e5 alerts."""
    topo = TopologySpec(
        ups=4, cooling=4, load_balancers=2, switches=12, racks=24, servers=360, seed=3
    )
    noise = NoiseSpec(
        heartbeats=(
            HeartbeatSpec("high_cpu_utilization", coverage=1.0),
            HeartbeatSpec("partial_network_loss", coverage=0.1),
            HeartbeatSpec("temperature_anomaly", coverage=1.0),
        ),
        flooding_factor=20,
        incident_omission=0.0,
        distractors_min=3,
        distractors_max=3,
        distractor_types=("ups_voltage_fluctuation", "fan_speed_anomaly"),
    )
    return ScenarioLibrary(
        topology=topo,
        scenarios=(
            ScenarioSpec(
                name="rack-power-cascade-large",
                chain=(
                    ChainStep("psu_power_outage", "rack", emit_alerts=True),
                    ChainStep(
                        "partial_network_loss",
                        "server",
                        delay_min=2,
                        delay_max=8,
                        emit_alerts=True,
                    ),
                    ChainStep(OUTAGE_TYPE, "server", delay_min=2, delay_max=8),
                ),
                noise=noise,
            ),
        ),
    )


PRESETS = {
    "zero_noise": zero_noise_library,
    "noisy": noisy_library,
    "efficiency": efficiency_library,
}


def _steps_from_toml(rows: Sequence[Mapping]) -> tuple[ChainStep, ...]:
    return tuple(
        ChainStep(
            failure_type=str(r["failure_type"]),
            device_class=str(r["device_class"]),
            delay_min=int(r.get("delay_min", 1)),
            delay_max=int(r.get("delay_max", 10)),
            record=str(r.get("record", "incident")),
            emit_alerts=bool(r.get("emit_alerts", False)),
            root_devices=int(r.get("root_devices", 1)),
            root_feeds_servers=bool(r.get("root_feeds_servers", False)),
        )
        for r in rows
    )


def load_library(path: Union[str, Path]) -> ScenarioLibrary:
    """Parse a scenario library from a TOML spec file."""
    raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    topo_raw = raw.get("topology", {})
    topology = TopologySpec(
        ups=int(topo_raw.get("ups", 2)),
        cooling=int(topo_raw.get("cooling", 2)),
        load_balancers=int(topo_raw.get("load_balancers", 1)),
        switches=int(topo_raw.get("switches", 3)),
        racks=int(topo_raw.get("racks", 4)),
        servers=int(topo_raw.get("servers", 24)),
        seed=int(topo_raw.get("seed", 0)),
    )
    win_raw = raw.get("windows", {})
    windows = WindowParams(
        initial=int(win_raw.get("L", 240)),
        diagnosis=int(win_raw.get("T", 120)),
        post=int(win_raw.get("T_prime", 15)),
    )
    noise_raw = raw.get("noise", {})
    noise = NoiseSpec(
        heartbeats=tuple(
            HeartbeatSpec(str(h["failure_type"]), float(h.get("coverage", 1.0)))
            for h in noise_raw.get("heartbeats", [])
        ),
        flooding_factor=int(noise_raw.get("flooding_factor", 1)),
        incident_omission=float(noise_raw.get("incident_omission", 0.0)),
        passive_changes=float(noise_raw.get("passive_changes", 0.0)),
        distractors_min=int(noise_raw.get("distractors_min", 0)),
        distractors_max=int(noise_raw.get("distractors_max", 0)),
        distractor_types=tuple(noise_raw.get("distractor_types", [])),
    )
    scenarios = []
    weights = []
    for sc in raw.get("scenario", []):
        scenarios.append(
            ScenarioSpec(
                name=str(sc.get("name", f"scenario-{len(scenarios)}")),
                chain=_steps_from_toml(sc.get("step", [])),
                collaterals=tuple(
                    CollateralSpec(
                        failure_type=str(c["failure_type"]),
                        device_class=str(c["device_class"]),
                        attach_step=int(c.get("attach_step", 0)),
                        probability=float(c.get("probability", 1.0)),
                        delay_min=int(c.get("delay_min", 1)),
                        delay_max=int(c.get("delay_max", 5)),
                        record=str(c.get("record", "incident")),
                        emit_alerts=bool(c.get("emit_alerts", False)),
                        placement=str(c.get("placement", "same")),
                    )
                    for c in sc.get("collateral", [])
                ),
                noise=noise,
                windows=windows,
            )
        )
        weights.append(float(sc.get("weight", 1.0)))
    if not scenarios:
        raise ConfigurationError(f"{path}: no [[scenario]] tables found")
    return ScenarioLibrary(topology=topology, scenarios=tuple(scenarios), weights=tuple(weights))
