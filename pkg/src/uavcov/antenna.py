"""
antenna.py: element radiation patterns, uniform-rectangular-array steering
vectors, and rotations between the global frame and array-local frames.

Angle conventions
-----------------
Global frame: x/y horizontal, z up.  Azimuth in [0, 360) counterclockwise
from +x, elevation in [-90, +90] with 0 horizontal and +90 straight up.

Array-local frame: spherical angles (theta, phi) with theta the zenith
angle in [0, 180] measured from the local +z axis and phi the azimuth in
(-180, 180] measured from the local +x axis.  The array panel lies in the
local y-z plane, so boresight is along local +x, i.e. (theta=90, phi=0).
Pattern classes all expose ``gain_db(theta_deg, phi_deg)`` in this frame;
`patch_gain_surrogate` alone measures its polar angle from the element
normal (see its docstring).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ElementPattern3gpp",
    "PatchElement",
    "IsotropicElement",
    "TabulatedPattern",
    "ArrayConfig",
    "Orientation",
    "MountedArray",
    "element_gain_3gpp",
    "patch_gain_surrogate",
    "steering_vector",
    "direction_cosines",
    "global_to_local",
    "local_to_global",
    "load_tabulated_pattern",
    "default_gnb_array",
    "default_uav_array",
]


class PatternError(ValueError):
    """Raised for malformed tabulated-pattern files."""


@dataclass(frozen=True)
class ElementPattern3gpp:
    """Parametric sector element: quadratic rolloff in both planes with
    sidelobe floors, boresight at (theta=90, phi=0)."""

    theta_3db_deg: float = 65.0
    phi_3db_deg: float = 65.0
    sla_v_db: float = 30.0
    a_max_db: float = 30.0
    gain_max_dbi: float = 8.0

    def __post_init__(self):
        if not 0.0 < self.theta_3db_deg < 180.0:
            raise ValueError("theta_3db_deg must be in (0, 180)")
        if not 0.0 < self.phi_3db_deg < 180.0:
            raise ValueError("phi_3db_deg must be in (0, 180)")
        if self.sla_v_db < 0.0 or self.a_max_db < 0.0:
            raise ValueError("attenuations must be >= 0")

    def gain_db(self, theta_deg, phi_deg):
        return element_gain_3gpp(self, theta_deg, phi_deg)


def element_gain_3gpp(p: ElementPattern3gpp, theta_local_deg, phi_local_deg):
    """Element gain in dBi at local zenith angle theta and azimuth phi.

    Vertical and horizontal cuts roll off quadratically, each clipped at
    its sidelobe floor; the combined attenuation is clipped again at
    ``a_max_db`` (the front-to-back limit).
    """
    theta = np.asarray(theta_local_deg, dtype=float)
    phi = np.asarray(phi_local_deg, dtype=float)
    a_v = -np.minimum(12.0 * ((theta - 90.0) / p.theta_3db_deg) ** 2, p.sla_v_db)
    a_h = -np.minimum(12.0 * (phi / p.phi_3db_deg) ** 2, p.a_max_db)
    return p.gain_max_dbi - np.minimum(-(a_v + a_h), p.a_max_db)


def patch_gain_surrogate(
    theta_from_normal_deg,
    phi_deg=0.0,
    *,
    gain_max_dbi: float = 6.0,
    cos_power: float = 2.0,
    back_floor_db: float = 25.0,
):
    """Analytic stand-in for a downward-mounted patch element.

    ``theta_from_normal_deg`` is measured from the element normal
    (boresight at theta=0).  Gain follows gain_max + 10*q*log10(cos theta)
    over the front hemisphere and is floored at gain_max - back_floor_db;
    the pattern is rotationally symmetric, so ``phi_deg`` is accepted for
    interface uniformity but unused.
    """
    del phi_deg
    theta = np.radians(np.asarray(theta_from_normal_deg, dtype=float))
    c = np.maximum(np.cos(theta), 1e-300)
    g = gain_max_dbi + 10.0 * cos_power * np.log10(c)
    return np.maximum(g, gain_max_dbi - back_floor_db)


@dataclass(frozen=True)
class PatchElement:
    """Downward-hemisphere patch surrogate in the uniform local frame."""

    gain_max_dbi: float = 6.0
    cos_power: float = 2.0
    back_floor_db: float = 25.0

    def gain_db(self, theta_deg, phi_deg):
        theta = np.radians(np.asarray(theta_deg, dtype=float))
        phi = np.radians(np.asarray(phi_deg, dtype=float))
        # x component of the local direction = cosine of the angle off
        # the element normal (normal along local +x)
        along = np.clip(np.sin(theta) * np.cos(phi), -1.0, 1.0)
        psi = np.degrees(np.arccos(along))
        return patch_gain_surrogate(
            psi,
            gain_max_dbi=self.gain_max_dbi,
            cos_power=self.cos_power,
            back_floor_db=self.back_floor_db,
        )


@dataclass(frozen=True)
class IsotropicElement:
    """0 dBi in every direction."""

    def gain_db(self, theta_deg, phi_deg):
        return np.zeros(np.broadcast(
            np.asarray(theta_deg, dtype=float), np.asarray(phi_deg, dtype=float)
        ).shape)


@dataclass(frozen=True)
class TabulatedPattern:
    """Measured/simulated element pattern on a rectangular angle grid.

    The grid is indexed by local elevation (90 - theta) in degrees and
    local azimuth phi in degrees; it must span [-90, 90] x [-180, 180].
    Lookups interpolate bilinearly.
    """

    elevation_deg: np.ndarray
    azimuth_deg: np.ndarray
    gain_dbi: np.ndarray

    def __post_init__(self):
        el = np.asarray(self.elevation_deg, dtype=float)
        az = np.asarray(self.azimuth_deg, dtype=float)
        g = np.asarray(self.gain_dbi, dtype=float)
        object.__setattr__(self, "elevation_deg", el)
        object.__setattr__(self, "azimuth_deg", az)
        object.__setattr__(self, "gain_dbi", g)
        if el.ndim != 1 or az.ndim != 1 or g.shape != (el.size, az.size):
            raise PatternError("gain grid shape must be (n_el, n_az)")
        if el.size < 2 or az.size < 2:
            raise PatternError("grids need at least 2 nodes per axis")
        if np.any(np.diff(el) <= 0) or np.any(np.diff(az) <= 0):
            raise PatternError("angle grids must be strictly ascending")
        if el[0] > -90.0 + 1e-9 or el[-1] < 90.0 - 1e-9:
            raise PatternError("elevation grid must cover [-90, 90]")
        if az[0] > -180.0 + 1e-9 or az[-1] < 180.0 - 1e-9:
            raise PatternError("azimuth grid must cover [-180, 180]")
        if not np.all(np.isfinite(g)):
            raise PatternError("gain grid contains non-finite values")

    def lookup(self, elevation_deg, azimuth_deg):
        """Bilinear interpolation; azimuth wrapped into [-180, 180]."""
        el = np.clip(np.asarray(elevation_deg, dtype=float), -90.0, 90.0)
        az = np.asarray(azimuth_deg, dtype=float)
        az = (az + 180.0) % 360.0 - 180.0
        ei = np.clip(np.searchsorted(self.elevation_deg, el) - 1, 0,
                     self.elevation_deg.size - 2)
        ai = np.clip(np.searchsorted(self.azimuth_deg, az) - 1, 0,
                     self.azimuth_deg.size - 2)
        e0 = self.elevation_deg[ei]
        e1 = self.elevation_deg[ei + 1]
        a0 = self.azimuth_deg[ai]
        a1 = self.azimuth_deg[ai + 1]
        te = np.clip((el - e0) / (e1 - e0), 0.0, 1.0)
        ta = np.clip((az - a0) / (a1 - a0), 0.0, 1.0)
        g = self.gain_dbi
        return (
            g[ei, ai] * (1 - te) * (1 - ta)
            + g[ei + 1, ai] * te * (1 - ta)
            + g[ei, ai + 1] * (1 - te) * ta
            + g[ei + 1, ai + 1] * te * ta
        )

    def gain_db(self, theta_deg, phi_deg):
        theta = np.asarray(theta_deg, dtype=float)
        return self.lookup(90.0 - theta, phi_deg)


def load_tabulated_pattern(path) -> TabulatedPattern:
    """Parse a pattern CSV: header ``el_deg\\az_deg,<az...>``, then one row
    per elevation node with gains in dBi."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PatternError(f"{path}: empty pattern file")
    header = rows[0]
    if len(header) < 3:
        raise PatternError(f"{path}: row 1 needs at least 2 azimuth columns")
    try:
        az = np.array([float(v) for v in header[1:]])
    except ValueError as exc:
        raise PatternError(f"{path}: row 1: bad azimuth value ({exc})") from None
    el = []
    gains = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise PatternError(
                f"{path}: row {r}: expected {len(header)} columns, got {len(row)}"
            )
        try:
            el.append(float(row[0]))
            gains.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise PatternError(f"{path}: row {r}: bad numeric value ({exc})") from None
    try:
        return TabulatedPattern(np.array(el), az, np.array(gains))
    except PatternError as exc:
        raise PatternError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform rectangular array: rows along local z, columns along local y."""

    rows: int
    cols: int
    element_spacing_wavelengths: float = 0.5
    element: object = field(default_factory=IsotropicElement)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array must have at least one element per axis")
        if self.element_spacing_wavelengths <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols


def default_gnb_array() -> ArrayConfig:
    return ArrayConfig(rows=8, cols=8, element=ElementPattern3gpp())


def default_uav_array() -> ArrayConfig:
    return ArrayConfig(rows=4, cols=4, element=PatchElement())


@dataclass(frozen=True)
class Orientation:
    """Boresight direction of a mounted array in the global frame."""

    boresight_azimuth_deg: float = 0.0
    boresight_elevation_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "boresight_azimuth_deg", self.boresight_azimuth_deg % 360.0
        )
        if not -90.0 <= self.boresight_elevation_deg <= 90.0:
            raise ValueError("boresight elevation must be in [-90, 90]")


@dataclass(frozen=True)
class MountedArray:
    """Array plus the orientation it is mounted at."""

    array: ArrayConfig
    orientation: Orientation


def rotation_matrix(o: Orientation) -> np.ndarray:
    """3x3 matrix whose columns are the local axes in global coordinates."""
    a = np.radians(o.boresight_azimuth_deg)
    e = np.radians(o.boresight_elevation_deg)
    ca, sa = np.cos(a), np.sin(a)
    ce, se = np.cos(e), np.sin(e)
    rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[ce, 0.0, -se], [0.0, 1.0, 0.0], [se, 0.0, ce]])
    return rz @ ry


def unit_from_azel(azimuth_deg, elevation_deg) -> np.ndarray:
    """Unit direction vector(s), stacked on the last axis."""
    az = np.radians(np.asarray(azimuth_deg, dtype=float))
    el = np.radians(np.asarray(elevation_deg, dtype=float))
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)


def azel_from_unit(vec) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(vec, dtype=float)
    az = np.degrees(np.arctan2(v[..., 1], v[..., 0])) % 360.0
    el = np.degrees(np.arcsin(np.clip(v[..., 2], -1.0, 1.0)))
    return az, el


def global_to_local(o: Orientation, azimuth_deg, elevation_deg):
    """Map a global direction to local (theta, phi) in the frame of `o`.

    Inverse of `local_to_global`; at the poles azimuth collapses to 0 by
    the atan2 convention.
    """
    g = unit_from_azel(azimuth_deg, elevation_deg)
    l = g @ rotation_matrix(o)  # == R^T g for row-stacked directions
    theta = np.degrees(np.arccos(np.clip(l[..., 2], -1.0, 1.0)))
    phi = np.degrees(np.arctan2(l[..., 1], l[..., 0]))
    return theta, phi


def local_to_global(o: Orientation, theta_local_deg, phi_local_deg):
    """Map local (theta, phi) back to a global (azimuth, elevation) pair."""
    theta = np.radians(np.asarray(theta_local_deg, dtype=float))
    phi = np.radians(np.asarray(phi_local_deg, dtype=float))
    st = np.sin(theta)
    l = np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)
    g = l @ rotation_matrix(o).T
    return azel_from_unit(g)


def direction_cosines(theta_local_deg, phi_local_deg):
    """(u, v) phase gradients on the array plane for a local direction:
    u along columns (local y), v along rows (local z)."""
    theta = np.radians(np.asarray(theta_local_deg, dtype=float))
    phi = np.radians(np.asarray(phi_local_deg, dtype=float))
    return np.sin(theta) * np.sin(phi), np.cos(theta)


def steering_vector(a: ArrayConfig, theta_local_deg, phi_local_deg) -> np.ndarray:
    """Array response for a plane wave from the given local direction.

    Entries have unit modulus, so the norm is sqrt(rows*cols).  Flattened
    row-major: element (row n, col m) sits at index n*cols + m.
    """
    u, v = direction_cosines(theta_local_deg, phi_local_deg)
    d = a.element_spacing_wavelengths
    m = np.arange(a.cols)
    n = np.arange(a.rows)
    phase = 2.0 * np.pi * d * (n[:, None] * v + m[None, :] * u)
    return np.exp(1j * phase).ravel()
