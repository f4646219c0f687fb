"""Command-line front end: contacts, weather, simulate, report.

Exit codes: 0 success, 2 usage/config error, 3 input-data error,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, orbital, report as rpt, simengine, weather as wx
from .config import (
    CALGARY,
    DEFAULT_ORBIT,
    HAPS_ALTITUDE_KM,
    OTTAWA,
    ScenarioConfig,
    SyntheticWeatherSpec,
    load_config,
    parse_thresholds,
    preset,
)
from .contactplan import write_plan_csv
from .errors import ConfigError, DataError, InvariantError
from .orbital import OrbitSpec, StationSpec

STATION_PRESETS = {
    "ottawa-ogs": OTTAWA,
    "ottawa-haps": StationSpec("HAPS-OTTAWA", OTTAWA.latitude_deg, OTTAWA.longitude_deg, HAPS_ALTITUDE_KM),
    "calgary-ogs": CALGARY,
    "calgary-haps": StationSpec("HAPS-CALGARY", CALGARY.latitude_deg, CALGARY.longitude_deg, HAPS_ALTITUDE_KM),
}

SIM_PRESETS = ("paper-ogs1", "paper-ogs2", "paper-haps1", "paper-haps2", "paper-all")


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- contacts ---------------------------------------------------------------


def cmd_contacts(args) -> int:
    if args.days <= 0:
        raise ConfigError(f"--days must be positive, got {args.days}")
    if args.preset:
        station = STATION_PRESETS[args.preset]
    else:
        if args.lat is None or args.lon is None:
            raise ConfigError("custom station needs --lat and --lon (or use --preset)")
        station = StationSpec(args.name, args.lat, args.lon, args.alt_km)
    orbit = OrbitSpec(
        altitude_km=args.orbit_altitude_km,
        inclination_deg=args.inclination_deg,
        raan_deg=args.raan_deg,
        arg_latitude_deg=args.arg_latitude_deg,
    )
    horizon = args.days * 86400.0
    contacts = orbital.compute_contacts(
        orbit, station, horizon, coarse_step_s=args.coarse_step_s, to_node=station.name
    )
    out = _out_dir(args)
    orbital.write_contacts_csv(contacts, args.rate_gbps * 1e9, str(out / "contacts.csv"))
    histogram = orbital.contact_histogram(contacts, args.bin_s)
    orbital.write_histogram_csv(histogram, str(out / "contact_histogram.csv"))
    rpt.plot_contact_histogram(
        histogram,
        f"LEO-{station.name} contact durations over {args.days:g} days",
        out / "contact_histogram.png",
    )
    mean_dur = float(np.mean([c.duration for c in contacts])) if contacts else 0.0
    _say(args, f"{len(contacts)} contacts, mean duration {mean_dur:.1f} s")
    _say(args, f"wrote {out / 'contacts.csv'}, {out / 'contact_histogram.csv'}, "
               f"{out / 'contact_histogram.png'}")
    return 0


# --- weather ----------------------------------------------------------------


def _parse_synthetic_spec(text: str) -> SyntheticWeatherSpec:
    kwargs = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad synthetic weather field {part!r}; expected key=value")
        key, value = part.split("=", 1)
        key = key.strip().replace("-", "_")
        try:
            kwargs[key] = int(value) if key in ("n_hours", "fog_period", "seed") else float(value)
        except ValueError:
            raise ConfigError(f"bad synthetic weather value {part!r}") from None
    try:
        return SyntheticWeatherSpec(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad synthetic weather spec: {exc}") from None


def cmd_weather(args) -> int:
    if bool(args.csv) == bool(args.synthetic is not None):
        raise ConfigError("give exactly one of --csv or --synthetic")
    if args.csv:
        records = wx.load_weather(args.csv)
    else:
        records = _parse_synthetic_spec(args.synthetic).generate()
    thresholds = parse_thresholds(args.thresholds)
    stats = wx.threshold_sweep(records, thresholds, site=args.site)
    out = _out_dir(args)
    wx.write_stats_csv(stats, str(out / "failure_stats.csv"))
    rpt.plot_ttf_ttr({args.site: stats}, out / "ttf_ttr.png")
    _say(args, f"wrote {out / 'failure_stats.csv'}, {out / 'ttf_ttr.png'}")
    if args.check:
        ttf = [s.mean_ttf_s for s in stats]
        ttr = [s.mean_ttr_s for s in stats]
        ttf_ok = all(a <= b + 1e-9 for a, b in zip(ttf, ttf[1:]))
        ttr_ok = all(a >= b - 1e-9 for a, b in zip(ttr, ttr[1:]))
        if not (ttf_ok and ttr_ok):
            raise DataError(
                "trend check failed: TTF must be non-decreasing and TTR "
                "non-increasing in threshold"
            )
        _say(args, "trend check passed: TTF non-decreasing, TTR non-increasing")
    return 0


# --- simulate ---------------------------------------------------------------


def _apply_overrides(args, scenario: ScenarioConfig) -> ScenarioConfig:
    if args.runs is not None:
        scenario.n_runs = args.runs
    if args.bundles is not None:
        scenario.n_bundles = args.bundles
    if args.bundle_size_gb is not None:
        scenario.bundle_size_bits = int(args.bundle_size_gb * 8e9)
    if args.duration_days is not None:
        scenario.duration_s = args.duration_days * 86400.0
    if args.rate_gbps is not None:
        scenario.rate_bps = args.rate_gbps * 1e9
    if args.seed is not None:
        scenario.seed = args.seed
    # Re-validate after overrides.
    return ScenarioConfig(**{**scenario.__dict__})


def _write_manifest(out: Path, scenarios: list[ScenarioConfig], thresholds, outputs) -> None:
    manifest = {
        "tool": "hapsim",
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": scenarios[0].seed,
        "thresholds": list(thresholds),
        "scenarios": [s.to_dict() for s in scenarios],
        "outputs": outputs,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args) -> int:
    if bool(args.preset) == bool(args.config):
        raise ConfigError("give exactly one of --preset or --config")
    if args.preset and args.preset not in SIM_PRESETS:
        raise ConfigError(f"unknown preset {args.preset!r}; expected one of {SIM_PRESETS}")

    thresholds = None
    if args.config:
        scenario, thresholds = load_config(args.config)
        scenarios = [scenario]
    elif args.preset == "paper-all":
        scenarios = [preset(f"paper-{t}") for t in ("ogs1", "ogs2", "haps1", "haps2")]
    else:
        scenarios = [preset(args.preset)]
    if args.thresholds is not None:
        thresholds = parse_thresholds(args.thresholds)
    if thresholds is None:
        thresholds = parse_thresholds("0:100:10")

    scenarios = [_apply_overrides(args, s) for s in scenarios]
    out = _out_dir(args)

    reports = []
    for scenario in scenarios:
        _say(args, f"simulating topology {scenario.topology} "
                   f"({scenario.n_runs} runs x {len(thresholds)} thresholds)...")
        if scenario.n_runs >= 2:
            reports.append(simengine.monte_carlo(scenario, thresholds))
        else:
            # Single-run mode: still emit per-run rows, without CIs.
            aggregates = []
            for threshold in thresholds:
                single = ScenarioConfig(**{**scenario.__dict__, "cloud_threshold_pct": threshold})
                trace = [] if args.trace else None
                run_seed = simengine.derive_run_seed(scenario.seed, threshold, 0)
                result = simengine.run(single, run_seed, trace=trace)
                if trace is not None:
                    trace_path = out / f"trace_{scenario.topology}_{threshold:g}.jsonl"
                    with open(trace_path, "w") as fh:
                        for event in trace:
                            fh.write(json.dumps(event) + "\n")
                summary = simengine.RunSummary(
                    0,
                    result.delivery_ratio,
                    {n: simengine.occupancy_stats(result, n) for n in result.occupancy_pct},
                )
                aggregates.append(
                    simengine._aggregate(threshold, [summary], sorted(result.occupancy_pct))
                )
            reports.append(
                simengine.MonteCarloReport(scenario.topology, scenario.seed, 1, aggregates)
            )

    runs_path = out / "runs.csv"
    agg_path = out / "aggregate.csv"
    rpt.write_runs_csv(reports, runs_path)
    rpt.write_aggregate_csv(reports, agg_path)
    _write_manifest(out, scenarios, thresholds, ["runs.csv", "aggregate.csv"])
    _say(args, f"wrote {runs_path}, {agg_path}, {out / 'manifest.json'}")
    return 0


# --- report -----------------------------------------------------------------


def cmd_report(args) -> int:
    results_dir = Path(args.results_dir)
    if not results_dir.is_dir():
        raise DataError(f"results directory not found: {results_dir}")
    manifests = sorted(results_dir.rglob("manifest.json"))
    orphans = [
        str(p) for p in sorted(results_dir.rglob("runs.csv"))
        if not (p.parent / "manifest.json").exists()
    ]
    if not manifests:
        raise DataError(f"no manifest.json found under {results_dir}")
    warnings = []
    all_rows = []
    versions = set()
    missing = []
    for manifest_path in manifests:
        manifest = rpt.load_manifest(manifest_path)
        versions.add(manifest.get("version", "unknown"))
        runs_path = manifest_path.parent / "runs.csv"
        if not runs_path.exists():
            missing.append(str(runs_path))
            continue
        all_rows.extend(rpt.read_runs_csv(runs_path))
    if missing or orphans:
        raise DataError(
            "mismatched result sets: "
            + "; ".join(f"missing {m}" for m in missing)
            + "; ".join(f"manifest missing for {o}" for o in orphans)
        )
    if len(versions) > 1:
        warnings.append(f"mixed tool versions in inputs: {sorted(versions)}")

    out = _out_dir(args) if args.out != "." else results_dir / "report"
    out.mkdir(parents=True, exist_ok=True)
    tidy = rpt.tidy_aggregate(all_rows)
    rpt.write_tidy_csv(tidy, out / "tidy.csv", warnings=warnings)
    rpt.plot_delivery_ratio(tidy, out / "delivery_ratio.png")
    rpt.plot_buffer_occupancy(tidy, out / "buffer_occupancy.png")
    _say(args, f"wrote {out / 'tidy.csv'}, {out / 'delivery_ratio.png'}, "
               f"{out / 'buffer_occupancy.png'}")
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hapsim",
        description="HAPS-buffered optical backhaul simulator",
    )
    parser.add_argument("--version", action="version", version=f"hapsim {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="campaign seed")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("contacts", parents=[common], help="compute LOS contact windows")
    p.add_argument("--preset", choices=sorted(STATION_PRESETS), default=None)
    p.add_argument("--name", default="STATION")
    p.add_argument("--lat", type=float, default=None)
    p.add_argument("--lon", type=float, default=None)
    p.add_argument("--alt-km", type=float, default=0.0)
    p.add_argument("--days", type=float, default=90.0)
    p.add_argument("--orbit-altitude-km", type=float, default=DEFAULT_ORBIT.altitude_km)
    p.add_argument("--inclination-deg", type=float, default=DEFAULT_ORBIT.inclination_deg)
    p.add_argument("--raan-deg", type=float, default=DEFAULT_ORBIT.raan_deg)
    p.add_argument("--arg-latitude-deg", type=float, default=DEFAULT_ORBIT.arg_latitude_deg)
    p.add_argument("--coarse-step-s", type=float, default=10.0)
    p.add_argument("--bin-s", type=float, default=60.0, help="histogram bin width")
    p.add_argument("--rate-gbps", type=float, default=8.0)
    p.set_defaults(func=cmd_contacts)

    p = sub.add_parser("weather", parents=[common], help="TTF/TTR threshold sweep")
    p.add_argument("--csv", default=None, help="canonical weather CSV path")
    p.add_argument("--synthetic", default=None,
                   help="synthetic spec, e.g. base=35,amplitude=45,noise=20,n_hours=8760")
    p.add_argument("--site", default="site")
    p.add_argument("--thresholds", default="0:100:10")
    p.add_argument("--check", action="store_true",
                   help="assert TTF non-decreasing / TTR non-increasing")
    p.set_defaults(func=cmd_weather)

    p = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo sweep")
    p.add_argument("--preset", choices=SIM_PRESETS, default=None)
    p.add_argument("--config", default=None, help="scenario INI file")
    p.add_argument("--thresholds", default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--bundles", type=int, default=None)
    p.add_argument("--bundle-size-gb", type=float, default=None)
    p.add_argument("--duration-days", type=float, default=None)
    p.add_argument("--rate-gbps", type=float, default=None)
    p.add_argument("--trace", action="store_true",
                   help="write per-event JSON-lines traces (single-run mode only)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="join sweeps into tidy tables and figures")
    p.add_argument("results_dir")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
