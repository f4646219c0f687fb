"""Weather-driven link availability: TTF/TTR statistics and failure timelines.

Hourly cloud/fog records are reduced to mean time-to-failure and
time-to-recover per cloud threshold. Up and down durations are then modeled
as independent exponential random variables (rate = 1/mean) and sampled as
an alternating renewal process to produce per-run failure timelines.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

HOUR_S = 3600.0
WEATHER_CSV_HEADER = ["timestamp", "cloud_cover_pct", "fog"]
STATS_CSV_HEADER = ["site", "threshold_pct", "mean_ttf_s", "mean_ttr_s", "availability"]


class LinkState(enum.Enum):
    UP = "UP"
    DOWN = "DOWN"


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: datetime
    cloud_cover_pct: float
    fog: bool


@dataclass(frozen=True)
class FailureStats:
    """Mean up/down run lengths for a site at one cloud threshold."""

    site: str
    cloud_threshold_pct: float
    mean_ttf_s: float
    mean_ttr_s: float

    @property
    def lambda_ttf(self) -> float:
        return 1.0 / self.mean_ttf_s if self.mean_ttf_s > 0 else 0.0

    @property
    def lambda_ttr(self) -> float:
        return 1.0 / self.mean_ttr_s if self.mean_ttr_s > 0 else 0.0

    @property
    def never_failing(self) -> bool:
        return self.mean_ttr_s == 0.0

    @property
    def always_failing(self) -> bool:
        return self.mean_ttf_s == 0.0

    @property
    def availability(self) -> float:
        if self.never_failing:
            return 1.0
        if self.always_failing:
            return 0.0
        return self.mean_ttf_s / (self.mean_ttf_s + self.mean_ttr_s)


@dataclass(frozen=True)
class FailureTimeline:
    """One sampled alternating up/down realization over [0, horizon].

    The first transition is at t=0 and defines the initial state; states
    strictly alternate afterwards.
    """

    site: str
    transitions: tuple[tuple[float, LinkState], ...]
    horizon_s: float

    def state_at(self, t: float) -> LinkState:
        state = self.transitions[0][1]
        for time_s, new_state in self.transitions:
            if time_s <= t:
                state = new_state
            else:
                break
        return state

    def up_fraction(self) -> float:
        up_time = 0.0
        for i, (time_s, state) in enumerate(self.transitions):
            end = (
                self.transitions[i + 1][0]
                if i + 1 < len(self.transitions)
                else self.horizon_s
            )
            if state is LinkState.UP:
                up_time += end - time_s
        return up_time / self.horizon_s


def load_weather(source: str | io.TextIOBase) -> list[WeatherRecord]:
    """Parse the canonical weather CSV (`timestamp,cloud_cover_pct,fog`).

    Timestamps are ISO-8601 UTC at hourly cadence; gaps are allowed but
    logged. Raises DataError naming the offending line on any malformed row,
    out-of-range cloud value, or non-increasing timestamp.
    """
    if isinstance(source, str):
        try:
            with open(source, newline="") as fh:
                return load_weather(fh)
        except OSError as exc:
            raise DataError(f"cannot read weather CSV {source}: {exc}") from None

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("weather CSV is empty") from None
    if [h.strip() for h in header] != WEATHER_CSV_HEADER:
        raise DataError(
            f"line 1: expected header {','.join(WEATHER_CSV_HEADER)}, got {','.join(header)}"
        )

    records: list[WeatherRecord] = []
    prev_ts: datetime | None = None
    gap_count = 0
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise DataError(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            ts = datetime.fromisoformat(row[0].strip().replace("Z", "+00:00"))
        except ValueError as exc:
            raise DataError(f"line {lineno}: bad timestamp {row[0]!r}: {exc}") from None
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        try:
            cloud = float(row[1])
        except ValueError:
            raise DataError(f"line {lineno}: bad cloud_cover_pct {row[1]!r}") from None
        if not 0.0 <= cloud <= 100.0:
            raise DataError(
                f"line {lineno}: cloud_cover_pct {cloud} outside [0, 100]"
            )
        fog_raw = row[2].strip()
        if fog_raw not in ("0", "1"):
            raise DataError(f"line {lineno}: fog must be 0 or 1, got {fog_raw!r}")
        if prev_ts is not None:
            if ts <= prev_ts:
                raise DataError(
                    f"line {lineno}: timestamp {ts.isoformat()} not after previous"
                )
            if (ts - prev_ts) > timedelta(hours=1):
                gap_count += 1
        records.append(WeatherRecord(ts, cloud, fog_raw == "1"))
        prev_ts = ts
    if gap_count:
        log.warning("weather series has %d cadence gap(s) > 1 hour", gap_count)
    return records


def is_down(
    record: WeatherRecord, threshold_pct: float, fog_fails_at_100: bool = True
) -> bool:
    """Whether one hour counts as a link failure at the given cloud threshold."""
    if record.cloud_cover_pct > threshold_pct:
        return True
    if record.fog:
        return fog_fails_at_100 or threshold_pct < 100.0
    return False


def compute_failure_stats(
    records: Sequence[WeatherRecord],
    threshold_pct: float,
    site: str = "",
    fog_fails_at_100: bool = True,
) -> FailureStats:
    """Mean TTF/TTR from run lengths of the hourly up/down series.

    A cadence gap terminates the current run; the post-gap hours start a new
    run. First and last (possibly truncated) runs count as full runs. An
    all-up series yields mean_ttr_s = 0 (never failing); all-down yields
    mean_ttf_s = 0 (always failing).
    """
    if len(records) < 2:
        raise DataError("need at least 2 weather records to compute failure stats")
    if not 0.0 <= threshold_pct <= 100.0:
        raise ConfigError(f"cloud threshold must be in [0, 100], got {threshold_pct}")

    up_runs: list[int] = []
    down_runs: list[int] = []
    cur_down: bool | None = None
    cur_len = 0
    prev_ts: datetime | None = None

    def close_run() -> None:
        if cur_len:
            (down_runs if cur_down else up_runs).append(cur_len)

    for rec in records:
        down = is_down(rec, threshold_pct, fog_fails_at_100)
        gap = prev_ts is not None and (rec.timestamp - prev_ts) > timedelta(hours=1)
        if gap or down != cur_down:
            close_run()
            cur_down = down
            cur_len = 1
        else:
            cur_len += 1
        prev_ts = rec.timestamp
    close_run()

    mean_ttf = (sum(up_runs) / len(up_runs)) * HOUR_S if up_runs else 0.0
    mean_ttr = (sum(down_runs) / len(down_runs)) * HOUR_S if down_runs else 0.0
    return FailureStats(site, threshold_pct, mean_ttf, mean_ttr)


def threshold_sweep(
    records: Sequence[WeatherRecord],
    thresholds: Sequence[float],
    site: str = "",
    fog_fails_at_100: bool = True,
) -> list[FailureStats]:
    """One FailureStats per threshold; thresholds must be sorted ascending."""
    if list(thresholds) != sorted(thresholds):
        raise ConfigError("thresholds must be sorted ascending")
    return [
        compute_failure_stats(records, thr, site=site, fog_fails_at_100=fog_fails_at_100)
        for thr in thresholds
    ]


def sample_timeline(
    stats: FailureStats, horizon_s: float, rng: np.random.Generator
) -> FailureTimeline:
    """Sample an alternating renewal up/down timeline over [0, horizon].

    Up durations ~ Exp(mean_ttf), down durations ~ Exp(mean_ttr). The initial
    state is Bernoulli(stationary availability). Deterministic given the rng.
    """
    if horizon_s <= 0:
        raise ConfigError(f"horizon must be positive, got {horizon_s}")
    if stats.never_failing and stats.always_failing:
        raise ConfigError(f"degenerate failure stats for site {stats.site!r}")

    if stats.never_failing:
        return FailureTimeline(stats.site, ((0.0, LinkState.UP),), horizon_s)
    if stats.always_failing:
        return FailureTimeline(stats.site, ((0.0, LinkState.DOWN),), horizon_s)

    up = rng.random() < stats.availability
    transitions: list[tuple[float, LinkState]] = [
        (0.0, LinkState.UP if up else LinkState.DOWN)
    ]
    t = 0.0
    while t < horizon_s:
        mean = stats.mean_ttf_s if up else stats.mean_ttr_s
        t += rng.exponential(mean)
        up = not up
        if t < horizon_s:
            transitions.append((t, LinkState.UP if up else LinkState.DOWN))
    return FailureTimeline(stats.site, tuple(transitions), horizon_s)


# --- synthetic weather -------------------------------------------------------
#
# The historical datasets behind the reference sites are not distributable,
# so the package ships parameterized generators that produce the canonical
# record format directly.

_DEFAULT_START = datetime(2020, 1, 1, tzinfo=timezone.utc)


def pattern_weather(
    n_hours: int,
    cloud_cycle: Sequence[float],
    fog_cycle: Sequence[bool] | None = None,
    start: datetime = _DEFAULT_START,
) -> list[WeatherRecord]:
    """Deterministic repeating hourly pattern of cloud values and fog flags."""
    if not cloud_cycle:
        raise ConfigError("cloud_cycle must not be empty")
    records = []
    for h in range(n_hours):
        cloud = float(cloud_cycle[h % len(cloud_cycle)])
        fog = bool(fog_cycle[h % len(fog_cycle)]) if fog_cycle else False
        records.append(WeatherRecord(start + timedelta(hours=h), cloud, fog))
    return records


def synthetic_weather(
    n_hours: int,
    base: float = 50.0,
    amplitude: float = 40.0,
    period_hours: float = 24.0,
    noise: float = 0.0,
    fog_period: int = 0,
    seed: int = 0,
    start: datetime = _DEFAULT_START,
    persistence: float = 0.95,
) -> list[WeatherRecord]:
    """Sinusoidal cloud cover with autocorrelated noise, clipped to [0, 100].

    The noise is a stationary AR(1) process (lag-1 correlation `persistence`)
    so cloud systems persist across hours the way real weather fronts do;
    hour-to-hour independent noise would create unphysical one-hour holes in
    overcast blocks. fog_period > 0 marks every fog_period-th hour as foggy.
    Clipping puts a point mass at 0 and 100 so that threshold endpoints
    behave like real clear/overcast hours.
    """
    if n_hours < 1:
        raise ConfigError(f"n_hours must be >= 1, got {n_hours}")
    if not 0.0 <= persistence < 1.0:
        raise ConfigError(f"persistence must be in [0, 1), got {persistence}")
    rng = np.random.default_rng(seed)
    hours = np.arange(n_hours)
    cloud = base + amplitude * np.sin(2.0 * math.pi * hours / period_hours)
    if noise > 0:
        eps = rng.normal(0.0, 1.0, size=n_hours)
        ar = np.empty(n_hours)
        ar[0] = eps[0]
        scale = math.sqrt(1.0 - persistence**2)
        for i in range(1, n_hours):
            ar[i] = persistence * ar[i - 1] + scale * eps[i]
        cloud = cloud + noise * ar
    cloud = np.clip(cloud, 0.0, 100.0)
    return [
        WeatherRecord(
            start + timedelta(hours=int(h)),
            float(cloud[h]),
            fog_period > 0 and h % fog_period == 0,
        )
        for h in range(n_hours)
    ]


def write_weather_csv(records: Iterable[WeatherRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(WEATHER_CSV_HEADER)
        for rec in records:
            writer.writerow(
                [rec.timestamp.isoformat(), repr(rec.cloud_cover_pct), int(rec.fog)]
            )


def write_stats_csv(stats_list: Iterable[FailureStats], path: str) -> None:
    """Export as `site,threshold_pct,mean_ttf_s,mean_ttr_s,availability`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STATS_CSV_HEADER)
        for s in stats_list:
            writer.writerow(
                [
                    s.site,
                    repr(s.cloud_threshold_pct),
                    repr(s.mean_ttf_s),
                    repr(s.mean_ttr_s),
                    repr(s.availability),
                ]
            )
