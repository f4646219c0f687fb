"""Circular LEO orbit propagation and line-of-sight contact window detection.

The Earth is a rotating sphere; the orbit is analytic two-body circular
motion, so propagation is exact and deterministic. Contact windows between
the satellite and a fixed station are found by coarse sampling followed by
bisection refinement of each rise/set boundary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

EARTH_RADIUS_KM = 6378.137
MU_EARTH_KM3_S2 = 398600.4418
EARTH_ROTATION_RAD_S = 7.2921159e-5

# Boundary refinement target for contact windows, seconds.
REFINE_TOL_S = 0.1


@dataclass(frozen=True)
class OrbitSpec:
    """Circular orbit around the rotating Earth."""

    altitude_km: float
    inclination_deg: float
    raan_deg: float = 0.0
    arg_latitude_deg: float = 0.0
    eccentricity: float = 0.0

    def __post_init__(self) -> None:
        if self.altitude_km <= 0:
            raise ConfigError(f"orbit altitude must be positive, got {self.altitude_km}")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ConfigError(f"inclination must be in [0, 180], got {self.inclination_deg}")
        if self.eccentricity != 0.0:
            raise ConfigError("only circular orbits (eccentricity 0) are supported")

    @property
    def semi_major_axis_km(self) -> float:
        return EARTH_RADIUS_KM + self.altitude_km

    @property
    def period_s(self) -> float:
        a = self.semi_major_axis_km
        return 2.0 * math.pi * math.sqrt(a**3 / MU_EARTH_KM3_S2)

    @property
    def mean_motion_rad_s(self) -> float:
        a = self.semi_major_axis_km
        return math.sqrt(MU_EARTH_KM3_S2 / a**3)


@dataclass(frozen=True)
class StationSpec:
    """A fixed ground or stratospheric station."""

    name: str
    latitude_deg: float
    longitude_deg: float
    altitude_km: float = 0.0

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ConfigError(f"latitude out of range: {self.latitude_deg}")
        if not -180.0 < self.longitude_deg <= 180.0:
            raise ConfigError(f"longitude out of range: {self.longitude_deg}")
        if self.altitude_km < 0:
            raise ConfigError(f"station altitude must be >= 0, got {self.altitude_km}")


@dataclass
class CartesianState:
    """Earth-fixed position (km) at a time (seconds since scenario epoch)."""

    position: np.ndarray
    time: float = 0.0


@dataclass(frozen=True, order=True)
class ContactWindow:
    """A maximal interval of line-of-sight between two nodes."""

    start: float
    end: float
    from_node: str = field(compare=False, default="")
    to_node: str = field(compare=False, default="")

    @property
    def duration(self) -> float:
        return self.end - self.start


def _sat_positions_ecef(orbit: OrbitSpec, times: np.ndarray) -> np.ndarray:
    """Satellite positions in the Earth-fixed frame, one row per time."""
    a = orbit.semi_major_axis_km
    inc = math.radians(orbit.inclination_deg)
    raan = math.radians(orbit.raan_deg)
    u = math.radians(orbit.arg_latitude_deg) + orbit.mean_motion_rad_s * times

    cos_u, sin_u = np.cos(u), np.sin(u)
    # Inertial position of a circular orbit with argument of latitude u.
    x_i = a * (math.cos(raan) * cos_u - math.sin(raan) * sin_u * math.cos(inc))
    y_i = a * (math.sin(raan) * cos_u + math.cos(raan) * sin_u * math.cos(inc))
    z_i = a * sin_u * math.sin(inc)

    # Rotate into the Earth-fixed frame (Greenwich at longitude 0 at t=0).
    theta = EARTH_ROTATION_RAD_S * times
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    x_e = cos_t * x_i + sin_t * y_i
    y_e = -sin_t * x_i + cos_t * y_i
    return np.column_stack((x_e, y_e, z_i))


def propagate(orbit: OrbitSpec, t: float) -> CartesianState:
    """Satellite state at time t (seconds since epoch), Earth-fixed frame."""
    if t < 0:
        raise ConfigError(f"propagation time must be >= 0, got {t}")
    pos = _sat_positions_ecef(orbit, np.asarray([float(t)]))[0]
    return CartesianState(position=pos, time=float(t))


def propagate_inertial(orbit: OrbitSpec, t: float) -> np.ndarray:
    """Satellite position in the inertial frame (for periodicity checks)."""
    a = orbit.semi_major_axis_km
    inc = math.radians(orbit.inclination_deg)
    raan = math.radians(orbit.raan_deg)
    u = math.radians(orbit.arg_latitude_deg) + orbit.mean_motion_rad_s * t
    return np.array(
        [
            a * (math.cos(raan) * math.cos(u) - math.sin(raan) * math.sin(u) * math.cos(inc)),
            a * (math.sin(raan) * math.cos(u) + math.cos(raan) * math.sin(u) * math.cos(inc)),
            a * math.sin(u) * math.sin(inc),
        ]
    )


def station_position(station: StationSpec) -> CartesianState:
    """Earth-fixed position of a station; time-independent."""
    r = EARTH_RADIUS_KM + station.altitude_km
    lat = math.radians(station.latitude_deg)
    lon = math.radians(station.longitude_deg)
    pos = np.array(
        [
            r * math.cos(lat) * math.cos(lon),
            r * math.cos(lat) * math.sin(lon),
            r * math.sin(lat),
        ]
    )
    return CartesianState(position=pos, time=0.0)


def has_line_of_sight(a: CartesianState, b: CartesianState) -> bool:
    """True iff the segment between a and b does not pass through the Earth.

    Both endpoints must be on or outside the Earth sphere. No minimum
    elevation angle: a grazing (tangent) geometry counts as visible.
    """
    return bool(_segment_clears_earth(a.position[None, :], b.position[None, :])[0])


def _segment_clears_earth(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized segment-vs-sphere test; rows of a and b are endpoints."""
    d = b - a
    ad = np.einsum("ij,ij->i", a, d)
    dd = np.einsum("ij,ij->i", d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(dd > 0, -ad / dd, 0.0)
    interior = (t_star > 0.0) & (t_star < 1.0)
    aa = np.einsum("ij,ij->i", a, a)
    closest_sq = aa - np.where(dd > 0, ad * ad / np.where(dd > 0, dd, 1.0), 0.0)
    blocked = interior & (closest_sq < EARTH_RADIUS_KM**2)
    return ~blocked


def compute_contacts(
    orbit: OrbitSpec,
    station: StationSpec,
    horizon_s: float,
    coarse_step_s: float = 10.0,
    from_node: str = "LEO",
    to_node: str | None = None,
) -> list[ContactWindow]:
    """All maximal LOS windows between the satellite and a station in [0, horizon].

    Samples visibility every coarse_step_s and refines each rise/set boundary
    by bisection to within REFINE_TOL_S. Windows are sorted and disjoint.
    """
    if horizon_s <= 0:
        raise ConfigError(f"horizon must be positive, got {horizon_s}")
    if coarse_step_s <= 0:
        raise ConfigError(f"coarse step must be positive, got {coarse_step_s}")
    if coarse_step_s > orbit.period_s / 4.0:
        raise ConfigError(
            f"coarse step {coarse_step_s} s exceeds a quarter of the orbital "
            f"period ({orbit.period_s:.0f} s); whole passes could be missed"
        )
    if to_node is None:
        to_node = station.name

    sta = station_position(station).position

    n = int(math.floor(horizon_s / coarse_step_s))
    times = np.arange(n + 1, dtype=float) * coarse_step_s
    if times[-1] < horizon_s:
        times = np.append(times, horizon_s)
    sat = _sat_positions_ecef(orbit, times)
    vis = _segment_clears_earth(np.broadcast_to(sta, sat.shape), sat)

    def vis_at(t: float) -> bool:
        p = _sat_positions_ecef(orbit, np.asarray([t]))
        return bool(_segment_clears_earth(sta[None, :], p)[0])

    def refine(t_lo: float, t_hi: float) -> float:
        # Bisect an interval whose endpoints have opposite visibility; the
        # returned time is on the visible side, within REFINE_TOL_S.
        lo_visible = vis_at(t_lo)
        while t_hi - t_lo > REFINE_TOL_S:
            mid = 0.5 * (t_lo + t_hi)
            if vis_at(mid) == lo_visible:
                t_lo = mid
            else:
                t_hi = mid
        return t_lo if lo_visible else t_hi

    windows: list[ContactWindow] = []
    open_start: float | None = float(times[0]) if vis[0] else None
    for i in range(1, len(times)):
        if vis[i] and not vis[i - 1]:
            open_start = float(refine(times[i - 1], times[i]))
        elif not vis[i] and vis[i - 1]:
            end = float(refine(times[i - 1], times[i]))
            if open_start is not None and end > open_start:
                windows.append(ContactWindow(open_start, end, from_node, to_node))
            open_start = None
    if open_start is not None and horizon_s > open_start:
        windows.append(ContactWindow(open_start, float(horizon_s), from_node, to_node))
    return windows


def contact_histogram(
    contacts: list[ContactWindow], bin_width_s: float
) -> list[tuple[float, float, int]]:
    """Histogram of contact durations as (bin_start, bin_end, count) rows."""
    if bin_width_s <= 0:
        raise ConfigError(f"bin width must be positive, got {bin_width_s}")
    if not contacts:
        return []
    durations = np.array([c.duration for c in contacts])
    n_bins = int(math.floor(durations.max() / bin_width_s)) + 1
    edges = np.arange(n_bins + 1, dtype=float) * bin_width_s
    counts, _ = np.histogram(durations, bins=edges)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(n_bins)
    ]


def write_contacts_csv(
    contacts: list[ContactWindow], rate_bps: float, path: str
) -> None:
    """Export contact windows as `from,to,start_s,end_s,rate_bps`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["from", "to", "start_s", "end_s", "rate_bps"])
        for c in contacts:
            writer.writerow([c.from_node, c.to_node, repr(c.start), repr(c.end), repr(float(rate_bps))])


def write_histogram_csv(
    histogram: list[tuple[float, float, int]], path: str
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_start_s", "bin_end_s", "count"])
        for lo, hi, count in histogram:
            writer.writerow([repr(lo), repr(hi), count])
