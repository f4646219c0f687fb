"""Scenario configuration: reference presets, INI files, synthetic weather specs.

Config files are flat `key = value` INI sections. The four reference
presets (ogs1, ogs2, haps1, haps2) encode the reference scenario defaults:
500 km / 99.5 deg circular orbit, Ottawa and Calgary sites, a 20 km HAPS,
8 Gbps links, 1000 x 20 GB bundles over 7 days, 50 Monte Carlo runs.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import ConfigError
from .orbital import OrbitSpec, StationSpec
from . import weather as wx

TOPOLOGIES = ("ogs1", "ogs2", "haps1", "haps2", "custom")

OTTAWA = StationSpec("OTTAWA", 45.4247, -75.6950, 0.0)
CALGARY = StationSpec("CALGARY", 51.0500, -114.0667, 0.0)
HAPS_ALTITUDE_KM = 20.0

# The reference scenario fixes no ascending node; placing the orbital plane
# over Ottawa's longitude at epoch is the documented choice. Contact
# statistics at these latitudes are insensitive to this over long horizons.
DEFAULT_RAAN_DEG = OTTAWA.longitude_deg

DEFAULT_ORBIT = OrbitSpec(
    altitude_km=500.0,
    inclination_deg=99.5,
    raan_deg=DEFAULT_RAAN_DEG,
    arg_latitude_deg=0.0,
)

WEEK_S = 7 * 86400.0
DEFAULT_RATE_BPS = 8e9
DEFAULT_BUNDLE_SIZE_BITS = int(20e9 * 8)  # 20 GB


@dataclass(frozen=True)
class SyntheticWeatherSpec:
    """Parameters for the built-in synthetic weather generator."""

    n_hours: int = 8760
    base: float = 35.0
    amplitude: float = 45.0
    period_hours: float = 24.0
    noise: float = 20.0
    fog_period: int = 0
    seed: int = 0
    persistence: float = 0.95

    def generate(self) -> list[wx.WeatherRecord]:
        return wx.synthetic_weather(
            self.n_hours,
            base=self.base,
            amplitude=self.amplitude,
            period_hours=self.period_hours,
            noise=self.noise,
            fog_period=self.fog_period,
            seed=self.seed,
            persistence=self.persistence,
        )


# Documented synthetic site climates used by the presets (the historical
# hourly datasets for the two sites are not redistributable). Six years of
# hourly cover, matching the length of the reference site records.
DEFAULT_WEATHER_SOURCES: dict[str, SyntheticWeatherSpec] = {
    "ottawa": SyntheticWeatherSpec(n_hours=52560, seed=11, fog_period=137),
    "calgary": SyntheticWeatherSpec(
        n_hours=52560, base=40.0, noise=25.0, seed=23, fog_period=149
    ),
}


@dataclass
class ScenarioConfig:
    """Everything one simulation campaign needs, resolvable and hashable to disk."""

    topology: str = "haps1"
    duration_s: float = WEEK_S
    n_bundles: int = 1000
    bundle_size_bits: int = DEFAULT_BUNDLE_SIZE_BITS
    rate_bps: float = DEFAULT_RATE_BPS
    cloud_threshold_pct: float = 0.0
    weather_sources: dict[str, "str | SyntheticWeatherSpec"] = field(
        default_factory=lambda: dict(DEFAULT_WEATHER_SOURCES)
    )
    seed: int = 0
    n_runs: int = 50
    orbit: OrbitSpec = DEFAULT_ORBIT
    coarse_step_s: float = 10.0
    fog_fails_at_100: bool = True
    unlimited_contact_volume: bool = False
    terminals_per_node: int = 1

    def __post_init__(self) -> None:
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {self.topology!r}; expected one of {TOPOLOGIES}")
        if self.duration_s <= 0:
            raise ConfigError(f"duration_s must be positive, got {self.duration_s}")
        if self.n_bundles < 1:
            raise ConfigError(f"n_bundles must be >= 1, got {self.n_bundles}")
        if self.bundle_size_bits <= 0:
            raise ConfigError("bundle_size_bits must be positive")
        if self.rate_bps <= 0:
            raise ConfigError("rate_bps must be positive")
        if not 0.0 <= self.cloud_threshold_pct <= 100.0:
            raise ConfigError(
                f"cloud_threshold_pct must be in [0, 100], got {self.cloud_threshold_pct}"
            )
        if self.n_runs < 1:
            raise ConfigError(f"n_runs must be >= 1, got {self.n_runs}")
        if self.terminals_per_node < 1:
            raise ConfigError("terminals_per_node must be >= 1")

    def sites(self) -> list[str]:
        """Weather sites this topology depends on."""
        return ["ottawa"] if self.topology in ("ogs1", "haps1") else ["ottawa", "calgary"]

    def resolve_weather_records(self) -> dict[str, list[wx.WeatherRecord]]:
        records: dict[str, list[wx.WeatherRecord]] = {}
        for site in self.sites():
            source = self.weather_sources.get(site)
            if source is None:
                raise ConfigError(f"no weather source configured for site {site!r}")
            if isinstance(source, SyntheticWeatherSpec):
                records[site] = source.generate()
            else:
                records[site] = wx.load_weather(str(source))
        return records

    def to_dict(self) -> dict:
        d = asdict(self)
        d["orbit"] = asdict(self.orbit)
        d["weather_sources"] = {
            site: (asdict(src) if isinstance(src, SyntheticWeatherSpec) else str(src))
            for site, src in self.weather_sources.items()
        }
        return d


def preset(name: str, **overrides) -> ScenarioConfig:
    """A named reference scenario: paper-ogs1|paper-ogs2|paper-haps1|paper-haps2."""
    short = name.removeprefix("paper-")
    if short not in ("ogs1", "ogs2", "haps1", "haps2"):
        raise ConfigError(f"unknown preset {name!r}")
    return ScenarioConfig(topology=short, **overrides)


def parse_thresholds(text: str) -> list[float]:
    """Parse `a,b,c` or `start:stop:step` into an ascending threshold list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad threshold range {text!r}; expected start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"bad threshold range {text!r}") from None
        if step <= 0:
            raise ConfigError("threshold step must be positive")
        values = []
        v = start
        while v <= stop + 1e-9:
            values.append(round(v, 6))
            v += step
    else:
        try:
            values = [float(p) for p in text.split(",") if p.strip()]
        except ValueError:
            raise ConfigError(f"bad threshold list {text!r}") from None
    if not values:
        raise ConfigError("empty threshold list")
    if values != sorted(values):
        raise ConfigError("thresholds must be ascending")
    for v in values:
        if not 0.0 <= v <= 100.0:
            raise ConfigError(f"threshold {v} outside [0, 100]")
    return values


def _weather_source_from_section(section: configparser.SectionProxy):
    kind = section.get("kind", "synthetic").strip().lower()
    if kind == "csv":
        path = section.get("path")
        if not path:
            raise ConfigError(f"weather section [{section.name}] kind=csv needs path")
        return path
    if kind == "synthetic":
        return SyntheticWeatherSpec(
            n_hours=section.getint("n_hours", 8760),
            base=section.getfloat("base", 35.0),
            amplitude=section.getfloat("amplitude", 45.0),
            period_hours=section.getfloat("period_hours", 24.0),
            noise=section.getfloat("noise", 20.0),
            fog_period=section.getint("fog_period", 0),
            seed=section.getint("seed", 0),
            persistence=section.getfloat("persistence", 0.95),
        )
    raise ConfigError(f"weather section [{section.name}]: unknown kind {kind!r}")


def load_config(path: str | Path) -> tuple[ScenarioConfig, list[float]]:
    """Load a scenario INI file; returns (scenario, sweep thresholds)."""
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"config file not found: {path}")
    if "scenario" not in parser:
        raise ConfigError(f"{path}: missing [scenario] section")
    sc = parser["scenario"]

    weather_sources: dict[str, str | SyntheticWeatherSpec] = dict(DEFAULT_WEATHER_SOURCES)
    for section_name in parser.sections():
        if section_name.startswith("weather."):
            site = section_name.split(".", 1)[1]
            weather_sources[site] = _weather_source_from_section(parser[section_name])

    orbit_kwargs = {}
    if "orbit" in parser:
        ob = parser["orbit"]
        orbit_kwargs = dict(
            altitude_km=ob.getfloat("altitude_km", DEFAULT_ORBIT.altitude_km),
            inclination_deg=ob.getfloat("inclination_deg", DEFAULT_ORBIT.inclination_deg),
            raan_deg=ob.getfloat("raan_deg", DEFAULT_ORBIT.raan_deg),
            arg_latitude_deg=ob.getfloat("arg_latitude_deg", DEFAULT_ORBIT.arg_latitude_deg),
        )
    orbit = OrbitSpec(**orbit_kwargs) if orbit_kwargs else DEFAULT_ORBIT

    try:
        scenario = ScenarioConfig(
            topology=sc.get("topology", "haps1").strip().lower(),
            duration_s=sc.getfloat("duration_s", WEEK_S),
            n_bundles=sc.getint("n_bundles", 1000),
            bundle_size_bits=sc.getint("bundle_size_bits", DEFAULT_BUNDLE_SIZE_BITS),
            rate_bps=sc.getfloat("rate_bps", DEFAULT_RATE_BPS),
            cloud_threshold_pct=sc.getfloat("cloud_threshold_pct", 0.0),
            weather_sources=weather_sources,
            seed=sc.getint("seed", 0),
            n_runs=sc.getint("n_runs", 50),
            orbit=orbit,
            coarse_step_s=sc.getfloat("coarse_step_s", 10.0),
            fog_fails_at_100=sc.getboolean("fog_fails_at_100", True),
            unlimited_contact_volume=sc.getboolean("unlimited_contact_volume", False),
            terminals_per_node=sc.getint("terminals_per_node", 1),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    thresholds_text = sc.get("thresholds", "0:100:10")
    return scenario, parse_thresholds(thresholds_text)
