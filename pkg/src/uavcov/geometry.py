"""
geometry.py: wrap-around simulation universe, random gNB/UAV deployments,
and relative-geometry helpers (minimal-image displacements, bearings).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .antenna import ArrayConfig, Orientation, default_gnb_array, default_uav_array

__all__ = [
    "Universe",
    "DeploymentConfig",
    "GnbKind",
    "Site",
    "Sector",
    "UavNode",
    "GeometryError",
    "DeploymentError",
    "wrap_displacement",
    "wrap_distance_2d",
    "wrap_distance_3d",
    "relative_angles",
    "deploy_gnbs",
    "deploy_uavs",
    "sites_to_csv",
]


class GeometryError(ValueError):
    """Degenerate geometry (e.g. coincident points)."""


class DeploymentError(RuntimeError):
    """Placement rejection budget exhausted: requested density infeasible."""


class GnbKind(Enum):
    STANDARD = "standard"
    DEDICATED = "dedicated"


@dataclass(frozen=True)
class Universe:
    """Square horizontal universe; x/y wrap toroidally, z is physical."""

    side_length_m: float = 1000.0
    wrap: bool = True

    def __post_init__(self):
        if self.side_length_m <= 0:
            raise ValueError("side_length_m must be positive")

    @property
    def area_m2(self) -> float:
        return self.side_length_m**2


@dataclass(frozen=True)
class DeploymentConfig:
    isd_standard_m: float = 200.0
    isd_dedicated_m: float | None = None
    min_gnb_separation_m: float = 10.0
    min_uav_gnb_separation_m: float = 10.0
    standard_height_range_m: tuple[float, float] = (2.0, 5.0)
    dedicated_height_range_m: tuple[float, float] = (10.0, 30.0)
    standard_downtilt_deg: float = -12.0
    dedicated_uptilt_deg: float = 45.0
    # exact-count overrides; None derives the count from the ISD
    gnb_count_standard: int | None = None
    gnb_count_dedicated: int | None = None
    max_placement_attempts: int = 10_000

    def __post_init__(self):
        if self.isd_standard_m <= 0:
            raise ValueError("isd_standard_m must be positive")
        if self.isd_dedicated_m is not None and self.isd_dedicated_m < self.isd_standard_m:
            raise ValueError("isd_dedicated_m must be >= isd_standard_m")
        if self.min_gnb_separation_m <= 0 or self.min_uav_gnb_separation_m <= 0:
            raise ValueError("minimum separations must be positive")
        for lo, hi in (self.standard_height_range_m, self.dedicated_height_range_m):
            if lo < 0 or hi <= lo:
                raise ValueError("height ranges must be non-negative and non-degenerate")
        if self.max_placement_attempts < 1:
            raise ValueError("max_placement_attempts must be >= 1")

    def isd_for(self, kind: GnbKind) -> float | None:
        return self.isd_standard_m if kind is GnbKind.STANDARD else self.isd_dedicated_m

    def count_override_for(self, kind: GnbKind) -> int | None:
        if kind is GnbKind.STANDARD:
            return self.gnb_count_standard
        return self.gnb_count_dedicated

    def tilt_for(self, kind: GnbKind) -> float:
        if kind is GnbKind.STANDARD:
            return self.standard_downtilt_deg
        return self.dedicated_uptilt_deg

    def height_range_for(self, kind: GnbKind) -> tuple[float, float]:
        if kind is GnbKind.STANDARD:
            return self.standard_height_range_m
        return self.dedicated_height_range_m


@dataclass(frozen=True)
class Sector:
    azimuth_boresight_deg: float
    tilt_deg: float
    array: ArrayConfig

    @property
    def orientation(self) -> Orientation:
        return Orientation(self.azimuth_boresight_deg, self.tilt_deg)


@dataclass(frozen=True)
class Site:
    id: str
    position: np.ndarray  # (3,) meters
    kind: GnbKind
    sectors: tuple[Sector, ...]

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class UavNode:
    id: str
    position: np.ndarray  # (3,) meters
    array: ArrayConfig
    array_boresight: Orientation = field(
        default_factory=lambda: Orientation(0.0, -90.0)
    )

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


def wrap_displacement(p, q, u: Universe) -> np.ndarray:
    """Displacement q - p with x/y mapped to the minimal image.

    x/y components land in [-side/2, side/2) (the lower representative is
    kept when both images are equidistant); z is never wrapped.
    """
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    if u.wrap:
        side = u.side_length_m
        d = d.copy()
        d[..., :2] = (d[..., :2] + side / 2.0) % side - side / 2.0
    return d


def wrap_distance_2d(p, q, u: Universe):
    d = wrap_displacement(p, q, u)
    return np.hypot(d[..., 0], d[..., 1])


def wrap_distance_3d(p, q, u: Universe):
    d = wrap_displacement(p, q, u)
    return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2 + d[..., 2] ** 2)


def azel_from_displacement(d) -> tuple[np.ndarray, np.ndarray]:
    """Bearing of a displacement: azimuth in [0, 360), elevation in [-90, 90]."""
    d = np.asarray(d, dtype=float)
    horiz = np.hypot(d[..., 0], d[..., 1])
    az = np.degrees(np.arctan2(d[..., 1], d[..., 0])) % 360.0
    el = np.degrees(np.arctan2(d[..., 2], horiz))
    return az, el


def relative_angles(frm, to, u: Universe) -> tuple[float, float]:
    """Azimuth/elevation of `to` as seen from `frm` (wrap-aware)."""
    d = wrap_displacement(frm, to, u)
    if not np.any(d):
        raise GeometryError("relative_angles: coincident points")
    az, el = azel_from_displacement(d)
    return float(az), float(el)


def _site_count(cfg: DeploymentConfig, kind: GnbKind, u: Universe) -> int:
    override = cfg.count_override_for(kind)
    if override is not None:
        if override < 0:
            raise ValueError("gnb count override must be >= 0")
        return override
    isd = cfg.isd_for(kind)
    if isd is None:
        raise ValueError(f"no ISD configured for {kind.value} gNBs")
    return round(u.area_m2 / isd**2)


def deploy_gnbs(
    cfg: DeploymentConfig,
    kind: GnbKind,
    u: Universe,
    rng: np.random.Generator,
    *,
    array: ArrayConfig | None = None,
    id_start: int = 0,
) -> list[Site]:
    """Drop N = round(area / ISD^2) sites uniformly at random.

    Positions are rejection-sampled until every pair is at least
    `min_gnb_separation_m` apart (wrapped, horizontal).  Per site, the
    draw order is: position attempts, height, sector rotation.  Sector
    boresights are rho, rho+120, rho+240 with rho ~ Unif[0, 120).
    """
    if array is None:
        array = default_gnb_array()
    n = _site_count(cfg, kind, u)
    lo, hi = cfg.height_range_for(kind)
    tilt = cfg.tilt_for(kind)
    side = u.side_length_m
    placed: list[np.ndarray] = []
    sites: list[Site] = []
    for i in range(n):
        for _ in range(cfg.max_placement_attempts):
            xy = rng.uniform(0.0, side, size=2)
            if all(
                _wrapped_2d(xy, p, u) >= cfg.min_gnb_separation_m for p in placed
            ):
                break
        else:
            raise DeploymentError(
                f"could not place {kind.value} site {i} after "
                f"{cfg.max_placement_attempts} attempts"
            )
        placed.append(xy)
        z = rng.uniform(lo, hi)
        rho = rng.uniform(0.0, 120.0)
        sectors = tuple(
            Sector((rho + 120.0 * s) % 360.0, tilt, array) for s in range(3)
        )
        sites.append(
            Site(f"gnb{id_start + i:03d}", np.array([xy[0], xy[1], z]), kind, sectors)
        )
    return sites


def _wrapped_2d(a, b, u: Universe) -> float:
    d = np.asarray(a, dtype=float)[:2] - np.asarray(b, dtype=float)[:2]
    if u.wrap:
        side = u.side_length_m
        d = (d + side / 2.0) % side - side / 2.0
    return float(np.hypot(d[0], d[1]))


def deploy_uavs(
    count: int,
    altitude_m: float,
    cfg: DeploymentConfig,
    sites: list[Site],
    u: Universe,
    rng: np.random.Generator,
    *,
    array: ArrayConfig | None = None,
) -> list[UavNode]:
    """Drop UAVs uniformly on the altitude plane, re-sampling any position
    whose wrapped 3D distance to some gNB falls below the configured
    minimum."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if altitude_m <= 0:
        raise ValueError("altitude_m must be positive")
    if array is None:
        array = default_uav_array()
    side = u.side_length_m
    site_pos = (
        np.stack([s.position for s in sites]) if sites else np.zeros((0, 3))
    )
    uavs = []
    for i in range(count):
        for _ in range(cfg.max_placement_attempts):
            xy = rng.uniform(0.0, side, size=2)
            pos = np.array([xy[0], xy[1], altitude_m])
            if site_pos.size == 0 or np.min(
                wrap_distance_3d(site_pos, pos, u)
            ) >= cfg.min_uav_gnb_separation_m:
                break
        else:
            raise DeploymentError(
                f"could not place UAV {i} after {cfg.max_placement_attempts} attempts"
            )
        uavs.append(UavNode(f"uav{i:03d}", pos, array))
    return uavs


def sites_to_csv(sites: list[Site], path) -> None:
    """Dump a deployment: id,kind,x_m,y_m,z_m,sector0_az_deg,tilt_deg."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "kind", "x_m", "y_m", "z_m", "sector0_az_deg", "tilt_deg"])
        for s in sites:
            w.writerow(
                [
                    s.id,
                    s.kind.value,
                    s.position[0],
                    s.position[1],
                    s.position[2],
                    s.sectors[0].azimuth_boresight_deg,
                    s.sectors[0].tilt_deg,
                ]
            )
