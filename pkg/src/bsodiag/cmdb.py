"""Configuration management database: device inventory and dependency edges.

An edge u -> v records that v is a peripheral device directly downstream of
u (v fails when u fails: a rack's servers, a switch's attached servers,
etc.). ``out`` of a device set is the union of its one-hop downstream
neighborhoods, the basis of the connectivity-strength measure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Union

from .errors import CmdbLookupError, SnapshotParseError


@dataclass(frozen=True, eq=False)
class CmdbGraph:
    classes: Mapping[str, str]
    adjacency: Mapping[str, frozenset[str]]

    def __contains__(self, sn: str) -> bool:
        return sn in self.classes

    def __len__(self) -> int:
        return len(self.classes)

    def device_class(self, sn: str) -> str:
        try:
            return self.classes[sn]
        except KeyError:
            raise CmdbLookupError(f"unknown device: {sn!r}") from None

    def out(self, sn: str) -> frozenset[str]:
        if sn not in self.classes:
            raise CmdbLookupError(f"unknown device: {sn!r}")
        return self.adjacency.get(sn, frozenset())

    def out_set(self, sns: Iterable[str]) -> set[str]:
        result: set[str] = set()
        for sn in sns:
            result |= self.out(sn)
        return result

    def devices_of_class(self, device_class: str) -> list[str]:
        return sorted(sn for sn, cls in self.classes.items() if cls == device_class)

    def descendants(self, sns: Iterable[str]) -> set[str]:
        seen: set[str] = set()
        frontier = list(sns)
        while frontier:
            nxt = []
            for sn in frontier:
                for peer in self.out(sn):
                    if peer not in seen:
                        seen.add(peer)
                        nxt.append(peer)
            frontier = nxt
        return seen

    def to_dict(self) -> dict:
        return {
            "devices": [
                {"sn": sn, "device_class": self.classes[sn]} for sn in sorted(self.classes)
            ],
            "adjacency": {
                sn: sorted(self.adjacency[sn]) for sn in sorted(self.adjacency)
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CmdbGraph":
        classes = {str(dev["sn"]): str(dev["device_class"]) for dev in d.get("devices", [])}
        adjacency = {}
        for sn, peers in d.get("adjacency", {}).items():
            if sn not in classes:
                raise SnapshotParseError(f"adjacency references unknown device {sn!r}")
            for peer in peers:
                if peer not in classes:
                    raise SnapshotParseError(
                        f"adjacency of {sn!r} references unknown device {peer!r}"
                    )
            adjacency[str(sn)] = frozenset(str(p) for p in peers)
        return cls(classes=classes, adjacency=adjacency)


def load_cmdb(path: Union[str, Path]) -> CmdbGraph:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SnapshotParseError(f"cannot read CMDB {path}: {e}") from e
    return CmdbGraph.from_dict(data)


def save_cmdb(cmdb: CmdbGraph, path: Union[str, Path]) -> None:
    Path(path).write_text(
        json.dumps(cmdb.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
