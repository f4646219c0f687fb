"""Discrete-event execution of a scenario, plus the Monte Carlo harness.

All bundles are created at t=0 at the LEO with the MOC as destination.
Store-and-forward transmissions follow contact-graph routes computed on the
nominal plan; weather failure timelines gate weather-tagged links at
execution time. A mid-transmission contact end or link failure aborts the
transfer completely (no partial transfer); the bundle stays with its
custodian and re-enters the routing queue.

Everything is deterministic given (scenario, run seed).
"""

from __future__ import annotations

import hashlib
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import routing, weather as wx
from .config import ScenarioConfig, SyntheticWeatherSpec
from .contactplan import ContactPlan, build_plan
from .errors import ConfigError, InvariantError
from .routing import Bundle, ResidualVolumes, Route
from .weather import FailureStats, FailureTimeline, LinkState

# Tie order for simultaneous events: failures land before contact starts so
# a link that dies exactly when a contact opens is never used; completions
# land before recoveries so an exactly-finishing transfer is not re-gated.
EVENT_ORDER = {
    "LINK_DOWN": 0,
    "CONTACT_START": 1,
    "TX_COMPLETE": 2,
    "CONTACT_END": 3,
    "LINK_UP": 4,
    "ROUTE_WAKE": 5,
}


@dataclass
class SimReport:
    """Per-run outcome: delivery ratio and buffer occupancy series."""

    topology: str
    duration_s: float
    generated_count: int
    delivered_count: int
    occupancy_pct: dict[str, list[tuple[float, float]]]
    latencies_s: list[float]

    @property
    def delivery_ratio(self) -> float:
        return self.delivered_count / self.generated_count

    @property
    def mean_occupancy_pct(self) -> dict[str, float]:
        return {n: occupancy_stats(self, n)[0] for n in self.occupancy_pct}

    @property
    def max_occupancy_pct(self) -> dict[str, float]:
        return {n: occupancy_stats(self, n)[1] for n in self.occupancy_pct}


def occupancy_stats(report: SimReport, node: str) -> tuple[float, float]:
    """Time-weighted mean and pointwise max occupancy (%) over [0, duration]."""
    if node not in report.occupancy_pct:
        raise ConfigError(f"node {node!r} not present in report")
    series = report.occupancy_pct[node]
    total = 0.0
    peak = 0.0
    for i, (t, pct) in enumerate(series):
        end = series[i + 1][0] if i + 1 < len(series) else report.duration_s
        total += pct * (end - t)
        peak = max(peak, pct)
    return total / report.duration_s, peak


@dataclass
class RunSummary:
    run_index: int
    delivery_ratio: float
    node_occupancy: dict[str, tuple[float, float]]  # node -> (mean %, max %)


@dataclass
class ThresholdAggregate:
    threshold_pct: float
    delivery_mean: float
    delivery_ci95: float
    node_mean_occ: dict[str, tuple[float, float]]  # node -> (mean over runs, ci95)
    node_max_occ: dict[str, tuple[float, float]]
    runs: list[RunSummary] = field(default_factory=list)


@dataclass
class MonteCarloReport:
    topology: str
    seed: int
    n_runs: int
    aggregates: list[ThresholdAggregate]


def ci95(values: Sequence[float]) -> float:
    """95% confidence interval half-width, 1.96 * s / sqrt(n)."""
    n = len(values)
    if n < 2:
        return 0.0
    return 1.96 * float(np.std(values, ddof=1)) / math.sqrt(n)


def derive_run_seed(seed: int, threshold_pct: float, run_index: int) -> int:
    """Stable per-run seed from (campaign seed, threshold, run index)."""
    digest = hashlib.blake2b(
        f"{seed}:{threshold_pct:.6f}:{run_index}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


@dataclass
class _Transmission:
    contact_index: int
    bundle_id: int
    route: Route
    token: int
    started_s: float


class _Engine:
    """Single deterministic simulation run over a fixed plan and timelines."""

    def __init__(
        self,
        plan: ContactPlan,
        timelines: dict[str, FailureTimeline],
        bundles: list[Bundle],
        duration_s: float,
        *,
        unlimited_volume: bool = False,
        terminals_per_node: int = 1,
        trace: Optional[list] = None,
    ):
        self.plan = plan
        self.contacts = plan.contacts
        self.duration_s = duration_s
        self.moc = plan.moc_id
        self.terminals = terminals_per_node
        self.trace = trace

        self.bundles = {b.id: b for b in bundles}
        self.generated = len(bundles)
        self.queues: dict[str, deque[int]] = {n.id: deque() for n in plan.nodes}
        for b in bundles:
            self.queues[b.custodian].append(b.id)

        self.residuals = ResidualVolumes(plan, unlimited=unlimited_volume)
        self.active: set[int] = set()
        self.link_busy: set[int] = set()
        self.node_tx: dict[str, int] = {n.id: 0 for n in plan.nodes}
        self.inflight: dict[int, _Transmission] = {}
        self.cancelled: set[int] = set()
        self.site_up: dict[str, bool] = {}
        self.delivered = 0
        self.latencies: list[float] = []
        self.occupancy: dict[str, list[tuple[float, int]]] = {
            n.id: [(0.0, len(self.queues[n.id]))] for n in plan.nodes
        }

        self._heap: list[tuple[float, int, int, tuple]] = []
        self._seq = 0
        self._token = 0

        # Senders that must be re-dispatched when a weather site recovers.
        self.site_senders: dict[str, list[str]] = {}
        for c in self.contacts:
            if c.weather_site:
                senders = self.site_senders.setdefault(c.weather_site, [])
                if c.from_node not in senders:
                    senders.append(c.from_node)

        for i, c in enumerate(self.contacts):
            if c.start_s < duration_s:
                self._schedule(c.start_s, "CONTACT_START", (i,))
                self._schedule(min(c.end_s, duration_s), "CONTACT_END", (i,))
        for site in sorted(timelines):
            tl = timelines[site]
            self.site_up[site] = tl.transitions[0][1] is LinkState.UP
            for t, state in tl.transitions[1:]:
                if t < duration_s:
                    kind = "LINK_UP" if state is LinkState.UP else "LINK_DOWN"
                    self._schedule(t, kind, (site,))
        for node in sorted({b.custodian for b in bundles}):
            self._schedule(0.0, "ROUTE_WAKE", (node,))

    # -- event plumbing --------------------------------------------------

    def _schedule(self, time_s: float, kind: str, payload: tuple) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time_s, EVENT_ORDER[kind], self._seq, kind, payload))

    def _record_occupancy(self, node: str, t: float) -> None:
        self.occupancy[node].append((t, len(self.queues[node])))

    def _emit_trace(self, t: float, kind: str, **payload) -> None:
        if self.trace is not None:
            self.trace.append({"time_s": t, "kind": kind, **payload})

    def _check_conservation(self) -> None:
        buffered = sum(len(q) for q in self.queues.values())
        total = self.delivered + buffered + len(self.inflight)
        if total != self.generated:
            raise InvariantError(
                f"bundle conservation violated: delivered={self.delivered} "
                f"buffered={buffered} inflight={len(self.inflight)} "
                f"generated={self.generated}"
            )

    def _contact_live(self, i: int) -> bool:
        c = self.contacts[i]
        return i in self.active and (
            c.weather_site is None or self.site_up[c.weather_site]
        )

    # -- core semantics ---------------------------------------------------

    def _dispatch(self, node: str, t: float) -> None:
        if node == self.moc:
            return
        queue = self.queues[node]
        while queue and self.node_tx[node] < self.terminals:
            bundle = self.bundles[queue[0]]
            route = routing.compute_route(self.plan, self.residuals, bundle, t)
            if route is None or not route.hops:
                return
            i0 = route.hops[0]
            c0 = self.contacts[i0]
            if c0.start_s > t or not self._contact_live(i0) or i0 in self.link_busy:
                # A later CONTACT_START / LINK_UP / TX_COMPLETE re-dispatches.
                return
            queue.popleft()
            routing.commit_route(self.residuals, route, bundle)
            self.link_busy.add(i0)
            self.node_tx[node] += 1
            self._token += 1
            tx = _Transmission(i0, bundle.id, route, self._token, t)
            self.inflight[i0] = tx
            finish = t + bundle.size_bits / c0.rate_bps
            self._schedule(finish, "TX_COMPLETE", (i0, self._token))
            self._record_occupancy(node, t)
            self._emit_trace(
                t, "TX_START", bundle=bundle.id, contact=i0,
                from_node=c0.from_node, to_node=c0.to_node,
            )

    def _abort(self, i: int, t: float, reason: str) -> None:
        tx = self.inflight.pop(i)
        self.cancelled.add(tx.token)
        self.link_busy.discard(i)
        c = self.contacts[i]
        self.node_tx[c.from_node] -= 1
        bundle = self.bundles[tx.bundle_id]
        routing.release_route(self.residuals, tx.route, bundle)
        self.queues[c.from_node].appendleft(bundle.id)
        self._record_occupancy(c.from_node, t)
        self._emit_trace(t, "TX_ABORT", bundle=bundle.id, contact=i, reason=reason)
        self._dispatch(c.from_node, t)

    def _complete(self, i: int, token: int, t: float) -> None:
        if token in self.cancelled:
            self.cancelled.discard(token)
            return
        tx = self.inflight.pop(i)
        self.link_busy.discard(i)
        c = self.contacts[i]
        self.node_tx[c.from_node] -= 1
        bundle = self.bundles[tx.bundle_id]
        # Keep the executed hop consumed; give back the planned tail (the new
        # custodian recomputes and re-reserves its own route).
        tail = Route(tx.route.hops[1:], tx.route.earliest_arrival_s, 0)
        routing.release_route(self.residuals, tail, bundle)
        bundle.custodian = c.to_node
        self._emit_trace(
            t, "TX_COMPLETE", bundle=bundle.id, contact=i, to_node=c.to_node
        )
        if c.to_node == self.moc:
            self.delivered += 1
            self.latencies.append(t - bundle.created_s)
        else:
            self.queues[c.to_node].append(bundle.id)
            self._record_occupancy(c.to_node, t)
        self._dispatch(c.from_node, t)
        if c.to_node != self.moc:
            self._dispatch(c.to_node, t)

    def run(self) -> SimReport:
        while self._heap:
            t, _, _, kind, payload = heapq.heappop(self._heap)
            if t > self.duration_s:
                break
            if kind == "CONTACT_START":
                (i,) = payload
                self.active.add(i)
                self._dispatch(self.contacts[i].from_node, t)
            elif kind == "CONTACT_END":
                (i,) = payload
                self.active.discard(i)
                if i in self.inflight:
                    self._abort(i, t, "contact_end")
                self._dispatch(self.contacts[i].from_node, t)
            elif kind == "LINK_DOWN":
                (site,) = payload
                self.site_up[site] = False
                for i in sorted(self.inflight):
                    if self.contacts[i].weather_site == site:
                        self._abort(i, t, "link_down")
            elif kind == "LINK_UP":
                (site,) = payload
                self.site_up[site] = True
                for node in self.site_senders.get(site, []):
                    self._dispatch(node, t)
            elif kind == "TX_COMPLETE":
                i, token = payload
                self._complete(i, token, t)
            elif kind == "ROUTE_WAKE":
                (node,) = payload
                self._dispatch(node, t)
            self._check_conservation()

        pct = 100.0 / self.generated
        occupancy_pct = {
            node: [(t, count * pct) for t, count in series]
            for node, series in self.occupancy.items()
        }
        return SimReport(
            topology="",
            duration_s=self.duration_s,
            generated_count=self.generated,
            delivered_count=self.delivered,
            occupancy_pct=occupancy_pct,
            latencies_s=self.latencies,
        )


def simulate_plan(
    plan: ContactPlan,
    timelines: dict[str, FailureTimeline],
    bundles: list[Bundle],
    duration_s: float,
    *,
    unlimited_volume: bool = False,
    terminals_per_node: int = 1,
    trace: Optional[list] = None,
    topology: str = "custom",
) -> SimReport:
    """Execute one run over an explicit plan, timelines, and bundle set."""
    sites_needed = {c.weather_site for c in plan.contacts if c.weather_site}
    missing = sites_needed - set(timelines)
    if missing:
        raise ConfigError(f"no failure timeline for weather site(s): {sorted(missing)}")
    engine = _Engine(
        plan,
        timelines,
        bundles,
        duration_s,
        unlimited_volume=unlimited_volume,
        terminals_per_node=terminals_per_node,
        trace=trace,
    )
    report = engine.run()
    report.topology = topology
    return report


def make_bundles(
    n: int, size_bits: int, source: str = "LEO", destination: str = "MOC"
) -> list[Bundle]:
    """All bundles are created at t=0 at the source."""
    return [Bundle(i, size_bits, source, destination, 0.0, source) for i in range(n)]


_PLAN_CACHE: dict[tuple, ContactPlan] = {}
_STATS_CACHE: dict[tuple, FailureStats] = {}


def _plan_for(scenario: ScenarioConfig) -> ContactPlan:
    key = (
        scenario.topology,
        scenario.orbit,
        scenario.rate_bps,
        scenario.duration_s,
        scenario.coarse_step_s,
    )
    if key not in _PLAN_CACHE:
        _PLAN_CACHE[key] = build_plan(scenario, scenario.duration_s)
    return _PLAN_CACHE[key]


def _stats_for(
    scenario: ScenarioConfig, threshold_pct: float
) -> dict[str, FailureStats]:
    stats: dict[str, FailureStats] = {}
    for site in scenario.sites():
        source = scenario.weather_sources.get(site)
        if source is None:
            raise ConfigError(f"no weather source configured for site {site!r}")
        key = (site, source if isinstance(source, SyntheticWeatherSpec) else str(source),
               threshold_pct, scenario.fog_fails_at_100)
        if key not in _STATS_CACHE:
            records = (
                source.generate()
                if isinstance(source, SyntheticWeatherSpec)
                else wx.load_weather(str(source))
            )
            _STATS_CACHE[key] = wx.compute_failure_stats(
                records,
                threshold_pct,
                site=site,
                fog_fails_at_100=scenario.fog_fails_at_100,
            )
        stats[site] = _STATS_CACHE[key]
    return stats


def _sample_timelines(
    stats_by_site: dict[str, FailureStats], duration_s: float, run_seed: int
) -> dict[str, FailureTimeline]:
    ss = np.random.SeedSequence(run_seed)
    children = ss.spawn(len(stats_by_site))
    timelines = {}
    for child, site in zip(children, sorted(stats_by_site)):
        rng = np.random.default_rng(child)
        timelines[site] = wx.sample_timeline(stats_by_site[site], duration_s, rng)
    return timelines


def run(
    scenario: ScenarioConfig, run_seed: int, trace: Optional[list] = None
) -> SimReport:
    """One simulation run; deterministic given (scenario, run_seed)."""
    plan = _plan_for(scenario)
    stats = _stats_for(scenario, scenario.cloud_threshold_pct)
    timelines = _sample_timelines(stats, scenario.duration_s, run_seed)
    bundles = make_bundles(scenario.n_bundles, scenario.bundle_size_bits)
    report = simulate_plan(
        plan,
        timelines,
        bundles,
        scenario.duration_s,
        unlimited_volume=scenario.unlimited_contact_volume,
        terminals_per_node=scenario.terminals_per_node,
        trace=trace,
        topology=scenario.topology,
    )
    return report


def _aggregate(
    threshold_pct: float, summaries: list[RunSummary], nodes: list[str]
) -> ThresholdAggregate:
    ratios = [s.delivery_ratio for s in summaries]
    node_mean_occ = {}
    node_max_occ = {}
    for node in nodes:
        means = [s.node_occupancy[node][0] for s in summaries]
        maxes = [s.node_occupancy[node][1] for s in summaries]
        node_mean_occ[node] = (float(np.mean(means)), ci95(means))
        node_max_occ[node] = (float(np.mean(maxes)), ci95(maxes))
    return ThresholdAggregate(
        threshold_pct=threshold_pct,
        delivery_mean=float(np.mean(ratios)),
        delivery_ci95=ci95(ratios),
        node_mean_occ=node_mean_occ,
        node_max_occ=node_max_occ,
        runs=summaries,
    )


def monte_carlo(
    scenario: ScenarioConfig, thresholds: Sequence[float]
) -> MonteCarloReport:
    """Sweep thresholds, n_runs independent runs each, aggregate with 95% CIs.

    Weather timelines are resampled per run; orbital geometry is fixed. Run
    seeds derive from (scenario seed, threshold, run index) so the result is
    independent of execution order.
    """
    if scenario.n_runs < 2:
        raise ConfigError("monte_carlo requires n_runs >= 2")
    plan = _plan_for(scenario)
    node_ids = [n.id for n in plan.nodes]
    aggregates = []
    for threshold in thresholds:
        stats = _stats_for(scenario, threshold)
        summaries = []
        for i in range(scenario.n_runs):
            run_seed = derive_run_seed(scenario.seed, threshold, i)
            timelines = _sample_timelines(stats, scenario.duration_s, run_seed)
            bundles = make_bundles(scenario.n_bundles, scenario.bundle_size_bits)
            report = simulate_plan(
                plan,
                timelines,
                bundles,
                scenario.duration_s,
                unlimited_volume=scenario.unlimited_contact_volume,
                terminals_per_node=scenario.terminals_per_node,
                topology=scenario.topology,
            )
            summaries.append(
                RunSummary(
                    run_index=i,
                    delivery_ratio=report.delivery_ratio,
                    node_occupancy={
                        n: occupancy_stats(report, n) for n in node_ids
                    },
                )
            )
        aggregates.append(_aggregate(threshold, summaries, node_ids))
    return MonteCarloReport(
        topology=scenario.topology,
        seed=scenario.seed,
        n_runs=scenario.n_runs,
        aggregates=aggregates,
    )
