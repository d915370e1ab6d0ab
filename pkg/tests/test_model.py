import json

import pytest

from bsodiag.errors import SnapshotParseError, SnapshotValidationError
from bsodiag.model import (
    Alert,
    Change,
    Event,
    Incident,
    OutageSnapshot,
    Source,
    Trigger,
    WindowParams,
    load_catalog,
    load_snapshot,
    save_catalog,
    save_snapshot,
)

from helpers import make_catalog

CATALOG = make_catalog(
    batch_servers_outage=(1, "server"),
    switch_reboot=(4, "switch"),
    high_cpu_utilization=(2, "server", r"cpu_util=([0-9.]+)"),
)


def write_bundle(path, alerts=(), incidents=(), changes=(), meta_extra=None):
    meta = {
        "outage_instant": None,
        "L": 240,
        "T": 120,
        "T_prime": 15,
        "outage_type": "batch_servers_outage",
        "outage_sns": ["srv-1", "srv-2"],
    }
    meta.update(meta_extra or {})
    path.mkdir(parents=True, exist_ok=True)
    (path / "meta.json").write_text(json.dumps(meta))

    def write_csv(name, header, rows):
        import csv

        with (path / name).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    write_csv("alerts.csv", ["time", "device_sn", "failure_type", "description"], alerts)
    write_csv(
        "incidents.csv",
        ["start", "end", "device_sns", "failure_type", "description"],
        incidents,
    )
    write_csv(
        "changes.csv", ["time", "device_sns", "change_type", "trigger", "description"], changes
    )
    return path


def test_empty_bundle_keeps_outage_only(tmp_path):
    bundle = write_bundle(
        tmp_path / "b",
        incidents=[(0, 2, "srv-1;srv-2", "batch_servers_outage", "outage")],
    )
    snap = load_snapshot(bundle, CATALOG)
    assert snap.alerts == ()
    assert len(snap.incidents) == 1
    assert snap.outage.sns == frozenset({"srv-1", "srv-2"})
    assert snap.outage.type_device == "server"


def test_alert_within_initial_window_accepted(tmp_path):
    bundle = write_bundle(
        tmp_path / "b", alerts=[(-130, "sw-1", "switch_reboot", "reboot")]
    )
    snap = load_snapshot(bundle, CATALOG)
    assert snap.alerts[0].time == -130


def test_incident_outside_diagnosis_window_rejected(tmp_path):
    bundle = write_bundle(
        tmp_path / "b",
        incidents=[(-200, -190, "sw-1", "switch_reboot", "too early")],
    )
    with pytest.raises(SnapshotValidationError):
        load_snapshot(bundle, CATALOG)


def test_unknown_failure_type_strict_vs_permissive(tmp_path):
    bundle = write_bundle(tmp_path / "b", alerts=[(-10, "x", "mystery_failure", "")])
    with pytest.raises(SnapshotValidationError, match="mystery_failure"):
        load_snapshot(bundle, CATALOG)
    snap = load_snapshot(bundle, CATALOG, permissive=True)
    assert snap.alerts[0].failure_type == "mystery_failure"


def test_malformed_header_names_file_and_columns(tmp_path):
    bundle = write_bundle(tmp_path / "b")
    (bundle / "alerts.csv").write_text("time,device,failure_type,description\n")
    with pytest.raises(SnapshotParseError, match="alerts.csv"):
        load_snapshot(bundle, CATALOG)


def test_bad_trigger_names_line(tmp_path):
    bundle = write_bundle(
        tmp_path / "b", changes=[(-5, "srv-1", "patch", "automatic", "")]
    )
    with pytest.raises(SnapshotParseError, match="changes.csv:2"):
        load_snapshot(bundle, CATALOG)


def test_absolute_timestamps_resolve_against_outage_instant(tmp_path):
    bundle = write_bundle(
        tmp_path / "b",
        alerts=[("2023-05-01T11:30:00", "sw-1", "switch_reboot", "")],
        meta_extra={"outage_instant": "2023-05-01T12:00:00"},
    )
    snap = load_snapshot(bundle, CATALOG)
    assert snap.alerts[0].time == -30


def test_absolute_timestamp_without_instant_is_parse_error(tmp_path):
    bundle = write_bundle(
        tmp_path / "b", alerts=[("2023-05-01T11:30:00", "sw-1", "switch_reboot", "")]
    )
    with pytest.raises(SnapshotParseError, match="outage_instant"):
        load_snapshot(bundle, CATALOG)


def test_round_trip_is_field_identical(tmp_path):
    bundle = write_bundle(
        tmp_path / "b",
        alerts=[
            (-130, "sw-1", "switch_reboot", "rebooted"),
            (-5, "srv-1", "high_cpu_utilization", "cpu_util=93.5"),
        ],
        incidents=[
            (-40, -35, "sw-1;sw-2", "switch_reboot", 'with, comma and "quotes"'),
            (0, 2, "srv-1;srv-2", "batch_servers_outage", "outage"),
        ],
        changes=[(-20, "srv-2", "patch", "proactive", "rollout")],
    )
    snap = load_snapshot(bundle, CATALOG)
    save_snapshot(snap, tmp_path / "copy")
    again = load_snapshot(tmp_path / "copy", CATALOG)
    assert again == snap


def test_window_defaults_match_paperlike_setup():
    w = WindowParams()
    assert (-w.initial, -w.diagnosis) == (-240, -120)
    assert (-w.diagnosis, w.post) == (-120, 15)


def test_window_invariants_checked_at_construction():
    outage = Event(
        sns=frozenset({"s"}),
        type_failure="batch_servers_outage",
        type_device="server",
        start_time=0,
        end_time=0,
    )
    with pytest.raises(SnapshotValidationError, match="alert #0"):
        OutageSnapshot(
            outage=outage,
            alerts=(Alert(time=-300, device_sn="s", failure_type="x"),),
            incidents=(),
            changes=(),
            window_params=WindowParams(),
        )
    with pytest.raises(SnapshotValidationError, match="change #0"):
        OutageSnapshot(
            outage=outage,
            alerts=(),
            incidents=(),
            changes=(
                Change(
                    time=-130,
                    device_sns=frozenset({"s"}),
                    change_type="patch",
                    trigger=Trigger.PASSIVE,
                ),
            ),
            window_params=WindowParams(),
        )


def test_incident_requires_ordered_span_and_devices():
    with pytest.raises(SnapshotValidationError):
        Incident(start=5, end=4, device_sns=frozenset({"a"}), failure_type="x")
    with pytest.raises(SnapshotValidationError):
        Incident(start=0, end=1, device_sns=frozenset(), failure_type="x")


def test_catalog_round_trip(tmp_path):
    save_catalog(CATALOG, tmp_path / "catalog.json")
    loaded = load_catalog(tmp_path / "catalog.json")
    assert loaded.entries == CATALOG.entries
    assert loaded.lookup("high_cpu_utilization").numeric


def test_event_serialization_round_trip():
    event = Event(
        sns=frozenset({"b", "a"}),
        type_failure="switch_reboot",
        type_device="switch",
        start_time=-9,
        end_time=-7,
        source=Source.ALERT,
    )
    assert Event.from_dict(json.loads(json.dumps(event.to_dict()))) == event
