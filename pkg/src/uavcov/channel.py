"""
channel.py: two-stage statistical channel sampler plus path-trace ingestion.

Stage 1 draws the link state (LOS / NLOS / outage) from the link geometry
and the gNB kind; stage 2 draws the multipath components conditioned on
that state.  The sampler is a parametric surrogate: every coefficient in
`ChannelParams` is a calibration knob, not ground truth for any specific
city.  Externally produced path traces can be loaded and used in place of
the sampler (see `load_path_traces`).

Conventions: path gains are in dB and include path loss but exclude
antenna gains; delays in ns; all angles in degrees in the global frame
(azimuth [0,360), elevation [-90,90]).  In a LOS-state sample the
geometric LOS path is always ``paths[0]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GnbKind, Universe, azel_from_displacement, wrap_displacement

__all__ = [
    "SPEED_OF_LIGHT_M_S",
    "LinkState",
    "PathComponent",
    "ChannelSample",
    "LinkGeometry",
    "StateCurve",
    "PathCoeffs",
    "ChannelParams",
    "SampleCounters",
    "TraceError",
    "friis_pathloss_db",
    "pathloss_los",
    "pathloss_nlos",
    "los_probability",
    "link_state_probabilities",
    "sample_link_state",
    "sample_paths",
    "validate_channel_sample",
    "load_path_traces",
    "validate_traces_against_geometry",
]

SPEED_OF_LIGHT_M_S = 299_792_458.0


from enum import Enum


class LinkState(Enum):
    LOS = "los"
    NLOS = "nlos"
    OUTAGE = "outage"


class TraceError(ValueError):
    """Malformed or physically inconsistent path-trace data."""


@dataclass(frozen=True)
class PathComponent:
    """One multipath ray between a gNB sector and a UAV."""

    gain_db: float
    delay_ns: float
    aoa_elevation_deg: float
    aoa_azimuth_deg: float
    aod_elevation_deg: float
    aod_azimuth_deg: float


@dataclass(frozen=True)
class ChannelSample:
    """Link state plus the multipath components of one link.

    ``state == OUTAGE`` iff ``paths`` is empty; for LOS samples the
    geometric LOS path is ``paths[0]``.
    """

    state: LinkState
    paths: tuple[PathComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))

    def as_arrays(self) -> dict[str, np.ndarray]:
        """Column views of the path list (empty arrays for outage)."""
        return {
            "gain_db": np.array([p.gain_db for p in self.paths]),
            "delay_ns": np.array([p.delay_ns for p in self.paths]),
            "aoa_elevation_deg": np.array([p.aoa_elevation_deg for p in self.paths]),
            "aoa_azimuth_deg": np.array([p.aoa_azimuth_deg for p in self.paths]),
            "aod_elevation_deg": np.array([p.aod_elevation_deg for p in self.paths]),
            "aod_azimuth_deg": np.array([p.aod_azimuth_deg for p in self.paths]),
        }


@dataclass(frozen=True)
class LinkGeometry:
    """Relative geometry of one gNB<->UAV link.

    AOA bearings point from the gNB toward the UAV (arrival side), AOD
    bearings from the UAV toward the gNB (departure side); the two are
    exact reciprocals.
    """

    d2d_m: float
    d3d_m: float
    uav_height_m: float
    gnb_height_m: float
    aoa_azimuth_deg: float
    aoa_elevation_deg: float
    aod_azimuth_deg: float
    aod_elevation_deg: float

    @classmethod
    def from_positions(cls, gnb_position, uav_position, universe: Universe) -> "LinkGeometry":
        d = wrap_displacement(gnb_position, uav_position, universe)
        d2d = float(np.hypot(d[0], d[1]))
        d3d = float(np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2))
        aoa_az, aoa_el = azel_from_displacement(d)
        aod_az, aod_el = azel_from_displacement(-d)
        return cls(
            d2d_m=d2d,
            d3d_m=d3d,
            uav_height_m=float(np.asarray(uav_position, dtype=float)[2]),
            gnb_height_m=float(np.asarray(gnb_position, dtype=float)[2]),
            aoa_azimuth_deg=float(aoa_az),
            aoa_elevation_deg=float(aoa_el),
            aod_azimuth_deg=float(aod_az),
            aod_elevation_deg=float(aod_el),
        )

    @property
    def los_delay_ns(self) -> float:
        return self.d3d_m / SPEED_OF_LIGHT_M_S * 1e9


@dataclass(frozen=True)
class StateCurve:
    """Stage-1 coefficients for one gNB kind.

    The LOS curve is an aerial urban-microcell shape: certain LOS inside a
    breakpoint distance d1, then d1/d + exp(-d/p1)(1 - d1/d), with d1 and
    p1 growing logarithmically in UAV height above `aerial_height_m` and
    ground-UE constants below it.  `los_distance_scale` < 1 shifts the
    whole curve toward higher LOS probability (rooftop siting).  Outage is
    split off the non-LOS mass by a logistic in 3D distance.
    """

    los_distance_scale: float = 1.0
    los_d1_slope: float = 294.05
    los_d1_offset: float = -432.94
    los_d1_floor_m: float = 18.0
    los_p1_slope: float = 233.98
    los_p1_offset: float = -0.95
    aerial_height_m: float = 22.5
    ground_d1_m: float = 18.0
    ground_p1_m: float = 36.0
    outage_midpoint_m: float = 600.0
    outage_slope_per_m: float = 0.01

    def __post_init__(self):
        if self.los_distance_scale <= 0:
            raise ValueError("los_distance_scale must be positive")
        if self.outage_slope_per_m < 0:
            raise ValueError("outage_slope_per_m must be >= 0")


@dataclass(frozen=True)
class PathCoeffs:
    """Stage-2 coefficients for one gNB kind.

    Angular spreads are Laplace *scale* parameters in degrees.  The
    elevation AOA spread at the gNB grows linearly with UAV altitude:
    base + per_120m * (h / 120).
    """

    mean_extra_paths: float = 8.0
    excess_delay_scale_ns: float = 150.0
    gain_decay_db_per_ns: float = 0.05
    shadowing_std_db: float = 4.0
    aoa_azimuth_spread_deg: float = 25.0
    aoa_elevation_spread_base_deg: float = 3.0
    aoa_elevation_spread_per_120m_deg: float = 10.0
    aod_azimuth_spread_deg: float = 35.0
    aod_elevation_spread_deg: float = 20.0

    def __post_init__(self):
        if self.mean_extra_paths < 0:
            raise ValueError("mean_extra_paths must be >= 0")
        for name in (
            "excess_delay_scale_ns",
            "aoa_azimuth_spread_deg",
            "aoa_elevation_spread_base_deg",
            "aod_azimuth_spread_deg",
            "aod_elevation_spread_deg",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.shadowing_std_db < 0 or self.gain_decay_db_per_ns < 0:
            raise ValueError("shadowing/decay coefficients must be >= 0")

    def aoa_elevation_spread_deg(self, uav_height_m: float) -> float:
        return (
            self.aoa_elevation_spread_base_deg
            + self.aoa_elevation_spread_per_120m_deg * uav_height_m / 120.0
        )


@dataclass(frozen=True)
class ChannelParams:
    """Full calibration surface of the surrogate sampler."""

    carrier_ghz: float = 28.0
    los_exponent: float = 2.0
    los_intercept_db: float = 32.45
    nlos_exponent: float = 3.0
    nlos_intercept_db: float = 35.0
    max_paths: int = 25
    standard_state: StateCurve = field(default_factory=StateCurve)
    dedicated_state: StateCurve = field(
        default_factory=lambda: StateCurve(los_distance_scale=0.5)
    )
    standard_paths: PathCoeffs = field(default_factory=PathCoeffs)
    dedicated_paths: PathCoeffs = field(default_factory=PathCoeffs)

    def __post_init__(self):
        if self.carrier_ghz <= 0:
            raise ValueError("carrier_ghz must be positive")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")
        if self.nlos_exponent < 2.0:
            raise ValueError("nlos_exponent must be >= 2")
        if self.nlos_exponent < self.los_exponent or self.nlos_intercept_db < self.los_intercept_db:
            raise ValueError("NLOS path loss must dominate LOS path loss")

    def state_curve(self, kind: GnbKind) -> StateCurve:
        return self.standard_state if kind is GnbKind.STANDARD else self.dedicated_state

    def path_coeffs(self, kind: GnbKind) -> PathCoeffs:
        return self.standard_paths if kind is GnbKind.STANDARD else self.dedicated_paths

    @classmethod
    def pure_los(cls, **overrides) -> "ChannelParams":
        """Degenerate configuration: LOS with probability 1 and no extra
        paths, for closed-form geometry checks."""
        curve = StateCurve(
            los_d1_floor_m=1e9, ground_d1_m=1e9, outage_slope_per_m=0.0,
            outage_midpoint_m=1e12,
        )
        coeffs = PathCoeffs(mean_extra_paths=0.0)
        return cls(
            standard_state=curve,
            dedicated_state=curve,
            standard_paths=coeffs,
            dedicated_paths=coeffs,
            **overrides,
        )


@dataclass
class SampleCounters:
    """Mutable accumulator for sampler pathologies."""

    clamped_paths: int = 0


def friis_pathloss_db(d3d_m: float, carrier_ghz: float):
    """Free-space path loss: 32.45 + 20 log10(d_m) + 20 log10(f_GHz)."""
    return 32.45 + 20.0 * np.log10(d3d_m) + 20.0 * np.log10(carrier_ghz)


def pathloss_los(d3d_m, p: ChannelParams):
    """LOS path loss in dB; defaults coincide with free space at 28 GHz."""
    d = np.asarray(d3d_m, dtype=float)
    if np.any(d < 1.0):
        raise ValueError("pathloss defined for d3d_m >= 1")
    return (
        p.los_intercept_db
        + 10.0 * p.los_exponent * np.log10(d)
        + 20.0 * np.log10(p.carrier_ghz)
    )


def pathloss_nlos(d3d_m, p: ChannelParams):
    """NLOS path loss in dB; dominates `pathloss_los` for all d >= 1."""
    d = np.asarray(d3d_m, dtype=float)
    if np.any(d < 1.0):
        raise ValueError("pathloss defined for d3d_m >= 1")
    return (
        p.nlos_intercept_db
        + 10.0 * p.nlos_exponent * np.log10(d)
        + 20.0 * np.log10(p.carrier_ghz)
    )


def los_probability(d2d_m: float, h_uav_m: float, curve: StateCurve) -> float:
    """LOS-state probability at horizontal distance d2d for a UAV at h."""
    d = d2d_m * curve.los_distance_scale
    if h_uav_m > curve.aerial_height_m:
        lg = math.log10(h_uav_m)
        d1 = max(curve.los_d1_slope * lg + curve.los_d1_offset, curve.los_d1_floor_m)
        p1 = max(curve.los_p1_slope * lg + curve.los_p1_offset, 1.0)
    else:
        d1 = curve.ground_d1_m
        p1 = curve.ground_p1_m
    if d <= d1:
        return 1.0
    return d1 / d + math.exp(-d / p1) * (1.0 - d1 / d)


def _outage_given_not_los(d3d_m: float, curve: StateCurve) -> float:
    x = curve.outage_slope_per_m * (d3d_m - curve.outage_midpoint_m)
    return 1.0 / (1.0 + math.exp(-x))


def link_state_probabilities(
    d2d_m: float,
    h_uav_m: float,
    h_gnb_m: float,
    kind: GnbKind,
    p: ChannelParams,
) -> tuple[float, float, float]:
    """Categorical state distribution (p_los, p_nlos, p_outage).

    LOS is decided first from the horizontal geometry; the non-LOS mass is
    then split into outage/NLOS by a logistic in 3D distance.  `h_gnb_m`
    enters only through that 3D distance.
    """
    curve = p.state_curve(kind)
    p_los = los_probability(d2d_m, h_uav_m, curve)
    d3d = math.hypot(d2d_m, h_uav_m - h_gnb_m)
    p_out_given_not = _outage_given_not_los(d3d, curve)
    p_out = (1.0 - p_los) * p_out_given_not
    p_nlos = 1.0 - p_los - p_out
    return p_los, p_nlos, p_out


def sample_link_state(
    d2d_m: float,
    h_uav_m: float,
    h_gnb_m: float,
    kind: GnbKind,
    p: ChannelParams,
    rng: np.random.Generator,
) -> LinkState:
    """Draw the link state; consumes exactly one uniform variate."""
    p_los, p_nlos, _ = link_state_probabilities(d2d_m, h_uav_m, h_gnb_m, kind, p)
    u = rng.random()
    if u < p_los:
        return LinkState.LOS
    if u < p_los + p_nlos:
        return LinkState.NLOS
    return LinkState.OUTAGE


def sample_paths(
    state: LinkState,
    geom: LinkGeometry,
    kind: GnbKind,
    p: ChannelParams,
    rng: np.random.Generator,
    counters: SampleCounters | None = None,
) -> ChannelSample:
    """Draw the multipath components conditioned on the link state.

    LOS: one geometric LOS path (free of randomness) plus K ~ Poisson(mean
    extra paths) reflected paths; NLOS: 1 + K reflected paths; outage: no
    paths.  Reflected paths get an exponential excess delay, a gain that
    decays linearly in that delay plus normal (dB-domain) shadowing, and
    Laplace angle offsets around the geometric bearings.  Gains exceeding
    free space are clamped (counted in `counters`); elevations are clamped
    to [-90, 90] and azimuths wrapped.

    Draw order (fixed for reproducibility): Poisson count, excess delays,
    shadowing, then AOA-azimuth, AOA-elevation, AOD-azimuth, AOD-elevation
    offsets.
    """
    if state is LinkState.OUTAGE:
        return ChannelSample(LinkState.OUTAGE, ())
    coeffs = p.path_coeffs(kind)
    paths: list[PathComponent] = []
    if state is LinkState.LOS:
        paths.append(
            PathComponent(
                gain_db=float(-pathloss_los(geom.d3d_m, p)),
                delay_ns=geom.los_delay_ns,
                aoa_elevation_deg=geom.aoa_elevation_deg,
                aoa_azimuth_deg=geom.aoa_azimuth_deg,
                aod_elevation_deg=geom.aod_elevation_deg,
                aod_azimuth_deg=geom.aod_azimuth_deg,
            )
        )
        n_extra = min(int(rng.poisson(coeffs.mean_extra_paths)), p.max_paths - 1)
    else:
        n_extra = min(int(rng.poisson(coeffs.mean_extra_paths)) + 1, p.max_paths)

    if n_extra > 0:
        tau = np.maximum(
            rng.standard_exponential(n_extra) * coeffs.excess_delay_scale_ns, 1e-6
        )
        shadow = rng.standard_normal(n_extra) * coeffs.shadowing_std_db
        aoa_az_off = rng.laplace(0.0, coeffs.aoa_azimuth_spread_deg, n_extra)
        aoa_el_off = rng.laplace(
            0.0, coeffs.aoa_elevation_spread_deg(geom.uav_height_m), n_extra
        )
        aod_az_off = rng.laplace(0.0, coeffs.aod_azimuth_spread_deg, n_extra)
        aod_el_off = rng.laplace(0.0, coeffs.aod_elevation_spread_deg, n_extra)

        base_gain = -float(pathloss_nlos(geom.d3d_m, p))
        free_space_gain = -float(friis_pathloss_db(geom.d3d_m, p.carrier_ghz))
        gains = base_gain - coeffs.gain_decay_db_per_ns * tau - shadow
        clamped = gains > free_space_gain
        if counters is not None:
            counters.clamped_paths += int(np.count_nonzero(clamped))
        gains = np.minimum(gains, free_space_gain)

        for k in range(n_extra):
            paths.append(
                PathComponent(
                    gain_db=float(gains[k]),
                    delay_ns=geom.los_delay_ns + float(tau[k]),
                    aoa_elevation_deg=float(
                        np.clip(geom.aoa_elevation_deg + aoa_el_off[k], -90.0, 90.0)
                    ),
                    aoa_azimuth_deg=float(
                        (geom.aoa_azimuth_deg + aoa_az_off[k]) % 360.0
                    ),
                    aod_elevation_deg=float(
                        np.clip(geom.aod_elevation_deg + aod_el_off[k], -90.0, 90.0)
                    ),
                    aod_azimuth_deg=float(
                        (geom.aod_azimuth_deg + aod_az_off[k]) % 360.0
                    ),
                )
            )
    return ChannelSample(state, tuple(paths))


def validate_channel_sample(
    sample: ChannelSample,
    d3d_m: float,
    p: ChannelParams,
    *,
    rtol: float = 1e-9,
    context: str = "sample",
) -> None:
    """Raise TraceError on any violated sample invariant."""
    if (sample.state is LinkState.OUTAGE) != (len(sample.paths) == 0):
        raise TraceError(f"{context}: outage state and empty path list must coincide")
    if sample.state is LinkState.OUTAGE:
        return
    if len(sample.paths) > p.max_paths:
        raise TraceError(f"{context}: {len(sample.paths)} paths exceeds max_paths")
    min_delay = d3d_m / SPEED_OF_LIGHT_M_S * 1e9
    fs_gain = -float(friis_pathloss_db(d3d_m, p.carrier_ghz))
    tol_ns = min_delay * rtol + 1e-9
    for i, path in enumerate(sample.paths):
        if not math.isfinite(path.gain_db):
            raise TraceError(f"{context}: path {i}: non-finite gain")
        if path.gain_db > fs_gain + 1e-6:
            raise TraceError(
                f"{context}: path {i}: gain {path.gain_db:.2f} dB exceeds free space "
                f"({fs_gain:.2f} dB)"
            )
        if path.delay_ns < min_delay - tol_ns:
            raise TraceError(
                f"{context}: path {i}: delay {path.delay_ns:.3f} ns below the "
                f"geometric minimum {min_delay:.3f} ns"
            )
        if (sample.state is LinkState.NLOS or i > 0) and path.delay_ns <= min_delay + tol_ns:
            raise TraceError(
                f"{context}: path {i}: non-LOS path at the geometric LOS delay"
            )
        if not -90.0 <= path.aoa_elevation_deg <= 90.0:
            raise TraceError(f"{context}: path {i}: AOA elevation out of range")
        if not -90.0 <= path.aod_elevation_deg <= 90.0:
            raise TraceError(f"{context}: path {i}: AOD elevation out of range")
    if sample.state is LinkState.LOS:
        los = sample.paths[0]
        if abs(los.delay_ns - min_delay) > tol_ns:
            raise TraceError(
                f"{context}: LOS path delay {los.delay_ns:.3f} ns != geometric "
                f"{min_delay:.3f} ns"
            )


_TRACE_HEADER = [
    "link_id",
    "gnb_id",
    "uav_id",
    "state",
    "path_idx",
    "gain_db",
    "delay_ns",
    "aoa_el_deg",
    "aoa_az_deg",
    "aod_el_deg",
    "aod_az_deg",
]

_NUMERIC_TRACE_FIELDS = _TRACE_HEADER[5:]


def load_path_traces(path) -> dict[tuple[str, str], ChannelSample]:
    """Parse a path-trace CSV into samples keyed by (gnb_id, uav_id).

    Structural invariants (state/path consistency, angle ranges, unique
    contiguous path indices, finite values) are checked here with file row
    numbers; the geometry-dependent ones need positions and live in
    `validate_traces_against_geometry`.  For LOS links the row with
    path_idx 0 is the geometric LOS path.
    """
    rows_by_link: dict[tuple[str, str], list[tuple[int, dict]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _TRACE_HEADER:
            raise TraceError(
                f"{path}: header must be {','.join(_TRACE_HEADER)}"
            )
        for rownum, row in enumerate(reader, start=2):
            key = (row["gnb_id"], row["uav_id"])
            rows_by_link.setdefault(key, []).append((rownum, row))

    traces: dict[tuple[str, str], ChannelSample] = {}
    for key, rows in rows_by_link.items():
        states = {r["state"] for _, r in rows}
        if len(states) != 1:
            raise TraceError(f"{path}: link {key}: inconsistent states {sorted(states)}")
        state_str = states.pop()
        if state_str not in ("los", "nlos", "outage"):
            raise TraceError(
                f"{path}: row {rows[0][0]}: unknown state {state_str!r}"
            )
        if state_str == "outage":
            if len(rows) != 1 or rows[0][1]["path_idx"] != "-1":
                raise TraceError(
                    f"{path}: link {key}: outage must be a single row with path_idx=-1"
                )
            if any(rows[0][1][f] for f in _NUMERIC_TRACE_FIELDS):
                raise TraceError(
                    f"{path}: row {rows[0][0]}: outage rows must leave numeric "
                    "fields empty"
                )
            traces[key] = ChannelSample(LinkState.OUTAGE, ())
            continue

        parsed: dict[int, PathComponent] = {}
        for rownum, row in rows:
            try:
                idx = int(row["path_idx"])
                vals = {f: float(row[f]) for f in _NUMERIC_TRACE_FIELDS}
            except (TypeError, ValueError) as exc:
                raise TraceError(f"{path}: row {rownum}: bad value ({exc})") from None
            if idx < 0:
                raise TraceError(f"{path}: row {rownum}: negative path_idx on a non-outage link")
            if idx in parsed:
                raise TraceError(f"{path}: row {rownum}: duplicate path_idx {idx}")
            if not -90.0 <= vals["aoa_el_deg"] <= 90.0 or not -90.0 <= vals["aod_el_deg"] <= 90.0:
                raise TraceError(f"{path}: row {rownum}: elevation out of [-90, 90]")
            if vals["delay_ns"] <= 0:
                raise TraceError(f"{path}: row {rownum}: delay must be positive")
            if not all(math.isfinite(v) for v in vals.values()):
                raise TraceError(f"{path}: row {rownum}: non-finite value")
            parsed[idx] = PathComponent(
                gain_db=vals["gain_db"],
                delay_ns=vals["delay_ns"],
                aoa_elevation_deg=vals["aoa_el_deg"],
                aoa_azimuth_deg=vals["aoa_az_deg"] % 360.0,
                aod_elevation_deg=vals["aod_el_deg"],
                aod_azimuth_deg=vals["aod_az_deg"] % 360.0,
            )
        if sorted(parsed) != list(range(len(parsed))):
            raise TraceError(
                f"{path}: link {key}: path_idx values must be 0..L-1"
            )
        traces[key] = ChannelSample(
            LinkState(state_str), tuple(parsed[i] for i in range(len(parsed)))
        )
    return traces


def validate_traces_against_geometry(
    traces: dict[tuple[str, str], ChannelSample],
    d3d_by_link: dict[tuple[str, str], float],
    p: ChannelParams,
) -> None:
    """Enforce causality, LOS-delay equality, and the free-space gain
    bound once link distances are known.  Links missing from
    `d3d_by_link` are skipped."""
    for key, sample in traces.items():
        d3d = d3d_by_link.get(key)
        if d3d is None:
            continue
        validate_channel_sample(
            sample, d3d, p, rtol=1e-6, context=f"trace link {key}"
        )
