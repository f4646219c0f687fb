"""Time-expanded contact plans for the backhaul topologies.

A plan combines line-of-sight contact windows from the orbital module with
permanent HAPS-OGS and OGS-MOC links. Contacts that terminate at an OGS are
tagged with that OGS's weather site; LEO-HAPS links live above tropospheric
weather and are never tagged. Contacts are directed in the data-flow
direction (LEO towards MOC).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

from . import orbital
from .config import (
    CALGARY,
    HAPS_ALTITUDE_KM,
    OTTAWA,
    ScenarioConfig,
)
from .errors import ConfigError, DataError
from .orbital import StationSpec

PLAN_CSV_HEADER = ["from", "to", "start_s", "end_s", "rate_bps", "weather_site"]

NODE_KINDS = ("LEO", "HAPS", "OGS", "MOC")


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: str
    station: Optional[StationSpec] = None
    weather_site: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in NODE_KINDS:
            raise ConfigError(f"unknown node kind {self.kind!r}")
        if self.kind == "OGS" and not self.weather_site:
            raise ConfigError(f"OGS node {self.id!r} must reference a weather site")
        if self.kind in ("HAPS", "OGS") and self.station is None:
            raise ConfigError(f"{self.kind} node {self.id!r} needs a station")


@dataclass(frozen=True)
class Contact:
    from_node: str
    to_node: str
    start_s: float
    end_s: float
    rate_bps: float
    weather_site: Optional[str] = None

    def __post_init__(self) -> None:
        if self.start_s >= self.end_s:
            raise ConfigError(
                f"contact {self.from_node}->{self.to_node} has start >= end "
                f"({self.start_s} >= {self.end_s})"
            )
        if self.rate_bps <= 0:
            raise ConfigError("contact rate must be positive")

    @property
    def volume_bits(self) -> float:
        return (self.end_s - self.start_s) * self.rate_bps


@dataclass
class ContactPlan:
    nodes: list[NodeSpec]
    contacts: list[Contact]
    _adjacency: dict[str, list[int]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        ids = {n.id for n in self.nodes}
        if len(ids) != len(self.nodes):
            raise ConfigError("duplicate node ids in plan")
        if sum(1 for n in self.nodes if n.kind == "MOC") != 1:
            raise ConfigError("a plan must contain exactly one MOC node")
        for c in self.contacts:
            if c.from_node not in ids or c.to_node not in ids:
                raise ConfigError(
                    f"contact {c.from_node}->{c.to_node} references undeclared node"
                )
        for i, c in enumerate(self.contacts):
            self._adjacency.setdefault(c.from_node, []).append(i)

    def contacts_from(self, node_id: str) -> list[int]:
        return self._adjacency.get(node_id, [])

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise ConfigError(f"unknown node {node_id!r}")

    @property
    def moc_id(self) -> str:
        return next(n.id for n in self.nodes if n.kind == "MOC")

    @property
    def horizon_s(self) -> float:
        return max(c.end_s for c in self.contacts) if self.contacts else 0.0


def _topology_nodes(topology: str) -> list[NodeSpec]:
    leo = NodeSpec("LEO", "LEO")
    moc = NodeSpec("MOC", "MOC", station=OTTAWA)
    ogs_ott = NodeSpec("OGS-OTTAWA", "OGS", station=OTTAWA, weather_site="ottawa")
    ogs_cgy = NodeSpec("OGS-CALGARY", "OGS", station=CALGARY, weather_site="calgary")
    haps_ott = NodeSpec(
        "HAPS-OTTAWA",
        "HAPS",
        station=StationSpec("HAPS-OTTAWA", OTTAWA.latitude_deg, OTTAWA.longitude_deg, HAPS_ALTITUDE_KM),
    )
    haps_cgy = NodeSpec(
        "HAPS-CALGARY",
        "HAPS",
        station=StationSpec("HAPS-CALGARY", CALGARY.latitude_deg, CALGARY.longitude_deg, HAPS_ALTITUDE_KM),
    )
    if topology == "ogs1":
        return [leo, ogs_ott, moc]
    if topology == "ogs2":
        return [leo, ogs_ott, ogs_cgy, moc]
    if topology == "haps1":
        return [leo, haps_ott, ogs_ott, moc]
    if topology == "haps2":
        return [leo, haps_ott, ogs_ott, haps_cgy, ogs_cgy, moc]
    raise ConfigError(f"unknown topology {topology!r}")


def _pair_haps_to_ogs(
    nodes: list[NodeSpec], pairing: Optional[dict[str, str]]
) -> dict[str, str]:
    """Map each HAPS node id to its OGS node id, by co-location or explicitly."""
    ogs_nodes = [n for n in nodes if n.kind == "OGS"]
    result: dict[str, str] = {}
    for haps in (n for n in nodes if n.kind == "HAPS"):
        if pairing and haps.id in pairing:
            result[haps.id] = pairing[haps.id]
            continue
        matches = [
            o
            for o in ogs_nodes
            if o.station is not None
            and haps.station is not None
            and abs(o.station.latitude_deg - haps.station.latitude_deg) < 1e-9
            and abs(o.station.longitude_deg - haps.station.longitude_deg) < 1e-9
        ]
        if len(matches) != 1:
            raise ConfigError(
                f"HAPS {haps.id!r} is not co-located with exactly one OGS; "
                "give an explicit HAPS-OGS pairing"
            )
        result[haps.id] = matches[0].id
    return result


def build_plan(
    scenario: ScenarioConfig,
    horizon_s: float,
    nodes: Optional[list[NodeSpec]] = None,
    haps_pairing: Optional[dict[str, str]] = None,
) -> ContactPlan:
    """Assemble the contact plan for a scenario topology over [0, horizon].

    LEO windows come from line-of-sight computation; each HAPS-OGS link is a
    single permanent contact tagged with the OGS's weather site; each OGS-MOC
    link is a single permanent untagged contact (ideal terrestrial backbone).
    Baseline LEO-OGS windows are weather-tagged; LEO-HAPS windows are not.
    """
    if horizon_s <= 0:
        raise ConfigError(f"plan horizon must be positive, got {horizon_s}")
    if nodes is None:
        if scenario.topology == "custom":
            raise ConfigError("topology 'custom' requires an explicit node list")
        nodes = _topology_nodes(scenario.topology)

    rate = scenario.rate_bps
    pairing = _pair_haps_to_ogs(nodes, haps_pairing)
    paired_ogs = set(pairing.values())
    moc_id = next(n.id for n in nodes if n.kind == "MOC")

    contacts: list[Contact] = []
    # LEO downlink targets: every HAPS, plus any OGS without a HAPS above it.
    for node in nodes:
        if node.kind == "HAPS" or (node.kind == "OGS" and node.id not in paired_ogs):
            windows = orbital.compute_contacts(
                scenario.orbit,
                node.station,
                horizon_s,
                coarse_step_s=scenario.coarse_step_s,
                from_node="LEO",
                to_node=node.id,
            )
            site = node.weather_site if node.kind == "OGS" else None
            contacts.extend(
                Contact("LEO", node.id, w.start, w.end, rate, site) for w in windows
            )
    for haps_id, ogs_id in sorted(pairing.items()):
        ogs = next(n for n in nodes if n.id == ogs_id)
        contacts.append(
            Contact(haps_id, ogs_id, 0.0, horizon_s, rate, ogs.weather_site)
        )
    for node in nodes:
        if node.kind == "OGS":
            contacts.append(Contact(node.id, moc_id, 0.0, horizon_s, rate, None))

    contacts.sort(key=lambda c: (c.start_s, c.end_s, c.from_node, c.to_node))
    return ContactPlan(nodes=nodes, contacts=contacts)


def plan_volume(plan: ContactPlan, from_node: str, to_node: str) -> float:
    """Total deliverable bits over all contacts from_node -> to_node."""
    plan.node(from_node)
    plan.node(to_node)
    return sum(
        c.volume_bits
        for c in plan.contacts
        if c.from_node == from_node and c.to_node == to_node
    )


def write_plan_csv(plan: ContactPlan, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLAN_CSV_HEADER)
        for c in plan.contacts:
            writer.writerow(
                [
                    c.from_node,
                    c.to_node,
                    repr(c.start_s),
                    repr(c.end_s),
                    repr(c.rate_bps),
                    c.weather_site or "",
                ]
            )


def read_contacts_csv(source: str | io.TextIOBase) -> list[Contact]:
    """Read a contact CSV (weather_site column optional)."""
    if isinstance(source, str):
        with open(source, newline="") as fh:
            return read_contacts_csv(fh)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("contact CSV is empty") from None
    header = [h.strip() for h in header]
    if header not in (PLAN_CSV_HEADER, PLAN_CSV_HEADER[:5]):
        raise DataError(f"unexpected contact CSV header: {','.join(header)}")
    contacts = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            site = row[5].strip() if len(row) > 5 and row[5].strip() else None
            contacts.append(
                Contact(row[0], row[1], float(row[2]), float(row[3]), float(row[4]), site)
            )
        except (ValueError, IndexError, ConfigError) as exc:
            raise DataError(f"line {lineno}: bad contact row: {exc}") from None
    return contacts
