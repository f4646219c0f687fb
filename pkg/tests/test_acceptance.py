"""Acceptance suite: eight release criteria, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -s` to see the verdict lines on
passing runs as well. Criteria 5 and 6 share one module-scoped Monte Carlo
sweep (4 topologies x 5 thresholds x 50 runs). The sweep uses 200 bundles of
800 Gb instead of 1000 bundles of 160 Gb: the total offered volume (1.6e14
bits) and per-link rates are unchanged, only the bundle granularity is
coarser, which keeps the full sweep under a minute instead of minutes.
"""

import math
import random
import time

import numpy as np
import pytest

from hapsim import orbital, simengine, weather as wx
from hapsim.config import (
    DEFAULT_ORBIT,
    DEFAULT_WEATHER_SOURCES,
    HAPS_ALTITUDE_KM,
    OTTAWA,
    ScenarioConfig,
    preset,
)
from hapsim.orbital import StationSpec
from hapsim.routing import ResidualVolumes, compute_route
from hapsim.simengine import make_bundles, monte_carlo, simulate_plan
from hapsim.contactplan import build_plan

from test_routing import brute_force_route, bundle as make_test_bundle, random_plan

NINETY_DAYS_S = 90 * 86400.0
THRESHOLDS = [0.0, 25.0, 50.0, 75.0, 100.0]
DESK_SCALE = dict(n_bundles=200, bundle_size_bits=int(8e11), n_runs=50)


def verdict(criterion: int, name: str, ok: bool, detail: str = "") -> None:
    state = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {criterion} [{name}]: {state}{suffix}")
    assert ok, f"acceptance criterion {criterion} ({name}) failed{suffix}"


@pytest.fixture(scope="module")
def sweep():
    results = {}
    for topology in ("ogs1", "ogs2", "haps1", "haps2"):
        scenario = preset(f"paper-{topology}", **DESK_SCALE)
        results[topology] = monte_carlo(scenario, THRESHOLDS)
    return results


def non_decreasing_up_to_ci(points: list[tuple[float, float]]) -> bool:
    """points = [(mean, ci95), ...] in threshold order; consecutive decreases
    are tolerated only when the 95% intervals overlap."""
    for (m0, c0), (m1, c1) in zip(points, points[1:]):
        if m1 < m0 and m1 + c1 < m0 - c0:
            return False
    return True


def non_increasing_up_to_ci(points: list[tuple[float, float]]) -> bool:
    return non_decreasing_up_to_ci([(-m, c) for m, c in points])


def test_criterion_1_haps_contact_advantage():
    start = time.perf_counter()
    ogs_contacts = orbital.compute_contacts(DEFAULT_ORBIT, OTTAWA, NINETY_DAYS_S)
    haps_station = StationSpec(
        "HAPS-OTTAWA", OTTAWA.latitude_deg, OTTAWA.longitude_deg, HAPS_ALTITUDE_KM
    )
    haps_contacts = orbital.compute_contacts(DEFAULT_ORBIT, haps_station, NINETY_DAYS_S)
    elapsed = time.perf_counter() - start

    count_ratio = len(haps_contacts) / len(ogs_contacts)
    duration_ratio = float(
        np.mean([c.duration for c in haps_contacts])
        / np.mean([c.duration for c in ogs_contacts])
    )
    ok = (
        1.15 <= count_ratio <= 1.35
        and 1.15 <= duration_ratio <= 1.35
        and elapsed <= 120.0
    )
    verdict(
        1, "contact geometry", ok,
        f"count x{count_ratio:.3f}, duration x{duration_ratio:.3f}, {elapsed:.1f}s",
    )


def test_criterion_2_orbital_correctness():
    a = DEFAULT_ORBIT.semi_major_axis_km
    expected_period = 2.0 * math.pi * math.sqrt(a**3 / orbital.MU_EARTH_KM3_S2)
    period_ok = abs(DEFAULT_ORBIT.period_s - expected_period) < 1e-9
    period_value_ok = abs(expected_period - 5677.0) <= 1.0
    # The inertial trajectory must actually close after each period.
    p0 = orbital.propagate_inertial(DEFAULT_ORBIT, 0.0)
    closure_ok = all(
        float(np.linalg.norm(orbital.propagate_inertial(DEFAULT_ORBIT, k * expected_period) - p0)) < 1e-6
        for k in (1, 2, 3)
    )
    times = np.linspace(0.0, NINETY_DAYS_S, 20001)
    positions = orbital._sat_positions_ecef(DEFAULT_ORBIT, times)
    norms = np.linalg.norm(positions, axis=1)
    norm_drift = float(np.max(np.abs(norms - a)))
    ok = period_ok and period_value_ok and closure_ok and norm_drift < 1e-6
    verdict(
        2, "orbital correctness", ok,
        f"period {expected_period:.1f}s, norm drift {norm_drift:.2e} km over 90d",
    )


def test_criterion_3_weather_statistics_oracle():
    records = wx.pattern_weather(1200, [0.0] * 9 + [100.0] * 3)
    stats = wx.compute_failure_stats(records, 50.0, site="oracle")
    exact_ok = stats.mean_ttf_s == 32400.0 and stats.mean_ttr_s == 10800.0

    fractions = [
        wx.sample_timeline(stats, NINETY_DAYS_S, np.random.default_rng(seed)).up_fraction()
        for seed in range(1000)
    ]
    up_fraction = float(np.mean(fractions))
    ok = exact_ok and abs(up_fraction - 0.75) < 0.02
    verdict(
        3, "weather statistics oracle", ok,
        f"TTF {stats.mean_ttf_s:.0f}s, TTR {stats.mean_ttr_s:.0f}s, "
        f"up fraction {up_fraction:.4f} over 1000 seeds",
    )


def test_criterion_4_ttf_ttr_trend():
    # The trend is asserted over the documented climatology family (the two
    # site presets plus ten further generator seeds) and the deterministic
    # 9-up/3-down pattern. It is not a theorem for arbitrary hour series:
    # when short outages vanish below a rising threshold while one long
    # outage persists, the mean TTR can locally increase (that adversarial
    # construction is exercised by the CLI trend-check failure test).
    grid = [float(t) for t in range(0, 101, 10)]
    datasets = [spec.generate() for spec in DEFAULT_WEATHER_SOURCES.values()]
    datasets.append(wx.pattern_weather(1200, [0.0] * 9 + [100.0] * 3))
    for seed in range(10):
        datasets.append(wx.synthetic_weather(8760, noise=20.0, fog_period=137, seed=seed))

    ok = True
    for records in datasets:
        stats = wx.threshold_sweep(records, grid)
        ttf = [s.mean_ttf_s for s in stats]
        ttr = [s.mean_ttr_s for s in stats]
        ok = ok and all(a <= b + 1e-9 for a, b in zip(ttf, ttf[1:]))
        ok = ok and all(a >= b - 1e-9 for a, b in zip(ttr, ttr[1:]))
    verdict(
        4, "TTF/TTR trend", ok,
        f"{len(datasets)} datasets x {len(grid)} thresholds monotone",
    )


def test_criterion_5_delivery_ratio_trend(sweep):
    ok = True
    details = []
    for haps, ogs in (("haps1", "ogs1"), ("haps2", "ogs2")):
        for agg_h, agg_o in zip(sweep[haps].aggregates, sweep[ogs].aggregates):
            if agg_h.threshold_pct > 50.0:
                continue
            separation = (agg_h.delivery_mean - agg_h.delivery_ci95) - (
                agg_o.delivery_mean + agg_o.delivery_ci95
            )
            ok = ok and separation > 0.0
            details.append(f"{haps}>{ogs}@{agg_h.threshold_pct:g}: {separation:+.3f}")
    for topology in ("ogs1", "ogs2", "haps1", "haps2"):
        points = [
            (a.delivery_mean, a.delivery_ci95) for a in sweep[topology].aggregates
        ]
        ok = ok and non_decreasing_up_to_ci(points)
    verdict(5, "delivery ratio trend", ok, "; ".join(details))


def test_criterion_6_buffer_occupancy_trend(sweep):
    ok = True
    haps1 = sweep["haps1"].aggregates
    haps2 = sweep["haps2"].aggregates
    for a1, a2 in zip(haps1, haps2):
        mean1 = a1.node_mean_occ["HAPS-OTTAWA"][0]
        max1 = a1.node_max_occ["HAPS-OTTAWA"][0]
        for node in ("HAPS-OTTAWA", "HAPS-CALGARY"):
            ok = ok and a2.node_mean_occ[node][0] <= mean1 + 1e-9
            ok = ok and a2.node_max_occ[node][0] <= max1 + 1e-9
    for aggregates, node_ids in (
        (haps1, ["HAPS-OTTAWA"]),
        (haps2, ["HAPS-OTTAWA", "HAPS-CALGARY"]),
    ):
        for node in node_ids:
            for pick in (lambda a: a.node_mean_occ[node], lambda a: a.node_max_occ[node]):
                ok = ok and non_increasing_up_to_ci([pick(a) for a in aggregates])
    verdict(
        6, "buffer occupancy trend", ok,
        f"HAPS1 mean occ {haps1[0].node_mean_occ['HAPS-OTTAWA'][0]:.2f}% -> "
        f"{haps1[-1].node_mean_occ['HAPS-OTTAWA'][0]:.3f}%; HAPS2 always lower",
    )


def test_criterion_7_cgr_oracle_equivalence():
    rng = random.Random(90210)
    checked = 0
    ok = True
    for _ in range(1000):
        plan = random_plan(rng)
        residuals = ResidualVolumes(plan)
        b = make_test_bundle(size=rng.choice([int(4e10), int(1.6e11)]))
        now = rng.uniform(0.0, 150.0)
        got = compute_route(plan, residuals, b, now)
        want = brute_force_route(plan, residuals, b, now)
        again = compute_route(plan, residuals, b, now)
        if want is None:
            ok = ok and got is None
        else:
            checked += 1
            # Full label equality covers arrival optimality and every
            # tie-break level; the repeated call covers determinism.
            ok = ok and got is not None and got.hops == want.hops
            ok = ok and got.earliest_arrival_s == pytest.approx(want.earliest_arrival_s)
        ok = ok and got == again
    ok = ok and checked >= 200
    verdict(
        7, "CGR oracle equivalence", ok,
        f"1000 random plans, {checked} feasible, exact tie-break match",
    )


def test_criterion_8_conservation_and_determinism():
    scenario = ScenarioConfig(
        topology="haps1", duration_s=7 * 86400.0, n_bundles=100,
        bundle_size_bits=int(8e11), cloud_threshold_pct=50.0,
    )
    # Conservation is enforced after every event inside the engine (a
    # violation raises and fails this test); the final accounting is
    # re-checked here from the report.
    report_a = simengine.run(scenario, run_seed=2024)
    report_b = simengine.run(scenario, run_seed=2024)
    buffered = report_a.generated_count - report_a.delivered_count
    conserved = buffered >= 0 and report_a.delivered_count == len(report_a.latencies_s)
    identical = report_a == report_b

    clean = ScenarioConfig(
        topology="haps1", duration_s=7 * 86400.0, n_bundles=100,
        bundle_size_bits=int(8e11), cloud_threshold_pct=100.0,
        fog_fails_at_100=False,
    )
    full = simengine.run(clean, run_seed=1)
    full_delivery = full.delivery_ratio == 1.0

    ok = conserved and identical and full_delivery
    verdict(
        8, "conservation and determinism", ok,
        f"bit-identical reports, failure-free delivery ratio {full.delivery_ratio}",
    )
