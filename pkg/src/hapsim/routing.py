"""Contact graph routing: earliest-arrival Dijkstra over a contact plan.

Routes are computed on the nominal plan; weather failures are unknown to
the router and are injected at execution time by the simulator. Volume
bookkeeping lives in ResidualVolumes, with commit/release so that aborted
transmissions restore capacity exactly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

from .contactplan import ContactPlan
from .errors import InvariantError


@dataclass
class Bundle:
    """One fixed-size data unit travelling from its source to the MOC."""

    id: int
    size_bits: int
    source: str
    destination: str
    created_s: float
    custodian: str


@dataclass(frozen=True)
class Route:
    """An ordered contact sequence with its earliest possible arrival."""

    hops: tuple[int, ...]  # indices into plan.contacts
    earliest_arrival_s: float
    bottleneck_residual_bits: float


class ResidualVolumes:
    """Remaining capacity per contact, with a commit ledger for safe release."""

    def __init__(self, plan: ContactPlan, unlimited: bool = False):
        self.unlimited = unlimited
        self._remaining = [c.volume_bits for c in plan.contacts]
        self._committed: dict[tuple[int, int], int] = {}  # (bundle id, hop) -> count

    def remaining(self, contact_index: int) -> float:
        if self.unlimited:
            return math.inf
        return self._remaining[contact_index]


def compute_route(
    plan: ContactPlan,
    residuals: ResidualVolumes,
    bundle: Bundle,
    now_s: float,
) -> Optional[Route]:
    """The route from the bundle's custodian to its destination that minimizes
    earliest arrival, or None if no feasible route exists.

    A hop over contact c departing at time t is feasible when
    max(t, c.start) + size/rate <= c.end and residual(c) >= size. Ties are
    broken by fewer hops, then smallest first-contact start, then lowest
    contact index chain, making the result deterministic.
    """
    size = bundle.size_bits
    dest = bundle.destination
    contacts = plan.contacts

    # Best-first search over labels ordered by the full priority
    # (arrival, n_hops, first_contact_start, hop index tuple). Extensions
    # strictly increase arrival and hop count, so the first destination label
    # popped is the global minimum of that total order. Plain node settling
    # is not enough: a later arrival at an intermediate node can still carry
    # the winning (lexicographically smaller) hop chain, so nodes keep a list
    # of componentwise non-dominated labels instead.
    start = (float(now_s), 0, 0.0, (), bundle.custodian, frozenset((bundle.custodian,)))
    heap = [start]
    node_labels: dict[str, list[tuple[float, int, float, tuple]]] = {}

    while heap:
        arrival, n_hops, first_start, hops, node, visited = heapq.heappop(heap)
        if node == dest:
            if not hops:
                return Route((), float(now_s), math.inf)
            bottleneck = min(residuals.remaining(i) for i in hops)
            return Route(hops, arrival, bottleneck)
        label = (arrival, n_hops, first_start, hops)
        kept = node_labels.setdefault(node, [])
        if any(_dominates(old, label) for old in kept):
            continue
        kept.append(label)
        for i in plan.contacts_from(node):
            c = contacts[i]
            if c.to_node in visited:
                continue
            depart = max(arrival, c.start_s)
            hop_arrival = depart + size / c.rate_bps
            if hop_arrival > c.end_s:
                continue
            if residuals.remaining(i) < size:
                continue
            new_first = first_start if hops else c.start_s
            heapq.heappush(
                heap,
                (
                    hop_arrival,
                    n_hops + 1,
                    new_first,
                    hops + (i,),
                    c.to_node,
                    visited | {c.to_node},
                ),
            )
    return None


def _dominates(a: tuple, b: tuple) -> bool:
    """Label a dominates b when every extension of b is beaten by the same
    extension of a: all of arrival, hop count, first start, and hop chain
    are <= componentwise (chain comparison is lexicographic)."""
    return a[0] <= b[0] and a[1] <= b[1] and a[2] <= b[2] and a[3] <= b[3]


def commit_route(residuals: ResidualVolumes, route: Route, bundle: Bundle) -> ResidualVolumes:
    """Reserve the bundle's volume on every hop of the route."""
    if not residuals.unlimited:
        for i in route.hops:
            if residuals._remaining[i] < bundle.size_bits:
                raise InvariantError(
                    f"insufficient residual on contact {i} to commit bundle {bundle.id}"
                )
        for i in route.hops:
            residuals._remaining[i] -= bundle.size_bits
    for i in route.hops:
        key = (bundle.id, i)
        residuals._committed[key] = residuals._committed.get(key, 0) + 1
    return residuals


def release_route(residuals: ResidualVolumes, route: Route, bundle: Bundle) -> ResidualVolumes:
    """Undo a prior commit for these hops (e.g. after a failed transmission)."""
    for i in route.hops:
        key = (bundle.id, i)
        if residuals._committed.get(key, 0) < 1:
            raise InvariantError(
                f"release of uncommitted contact {i} for bundle {bundle.id}"
            )
    for i in route.hops:
        key = (bundle.id, i)
        residuals._committed[key] -= 1
        if residuals._committed[key] == 0:
            del residuals._committed[key]
        if not residuals.unlimited:
            residuals._remaining[i] += bundle.size_bits
    return residuals


def format_route_trace(
    time_s: float, bundle: Bundle, route: Optional[Route]
) -> str:
    """One route-decision log line: time,bundle_id,custodian,route_hops,arrival."""
    if route is None:
        return f"{time_s},{bundle.id},{bundle.custodian},,unreachable"
    hops = "|".join(str(i) for i in route.hops)
    return f"{time_s},{bundle.id},{bundle.custodian},{hops},{route.earliest_arrival_s}"
