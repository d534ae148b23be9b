"""
network.py: Monte Carlo drop orchestration and coverage statistics.

A drop deploys gNBs and UAVs, samples a channel for every UAV x sector
pair, evaluates every link (batched through the kernel backend), and
associates each UAV with its max-SNR sector.  Drops and altitudes are
independent work units with seeds derived from (seed, altitude,
drop_index), so results are bit-identical regardless of how the units are
scheduled; per-link channel draws are keyed by (drop, gNB kind, site,
sector, UAV), which keeps a standard deployment's channels untouched when
dedicated sites are added to the same realization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from . import _kernels
from .antenna import (
    ArrayConfig,
    MountedArray,
    default_gnb_array,
    default_uav_array,
    direction_cosines,
    rotation_matrix,
    unit_from_azel,
)
from .channel import (
    ChannelParams,
    ChannelSample,
    LinkGeometry,
    LinkState,
    SampleCounters,
    sample_link_state,
    sample_paths,
)
from .geometry import (
    GnbKind,
    DeploymentConfig,
    Site,
    UavNode,
    Universe,
    azel_from_displacement,
    deploy_gnbs,
    deploy_uavs,
    wrap_displacement,
)
from .link import EIGEN_RESIDUAL_RTOL, LinkBudget

__all__ = [
    "DropConfig",
    "UavRecord",
    "DropReport",
    "CdfResult",
    "run_drop",
    "run_deployment",
    "run",
    "run_drop_with_extension",
    "snr_cdf",
    "regime_breakdown",
    "dedicated_attach_fraction",
    "nlos_serving_fraction",
    "strongest_path_aoa_sweep",
    "aoa_std_map",
    "SurrogateProvider",
]

_STATE_STR = {LinkState.LOS: "los", LinkState.NLOS: "nlos", LinkState.OUTAGE: "outage"}

# seed-stream tags
_DEPLOY_STREAM = 1
_UAV_STREAM = 2
_LINK_STREAM = 3
_SWEEP_STREAM = 5
_STDMAP_STREAM = 6


@dataclass(frozen=True)
class DropConfig:
    """Everything one Monte Carlo run needs."""

    seed: int = 0
    drops: int = 1
    uav_count: int = 100
    uav_altitudes_m: tuple[float, ...] = (30.0, 60.0, 120.0)
    universe: Universe = field(default_factory=Universe)
    deployment: DeploymentConfig = field(default_factory=DeploymentConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    budget: LinkBudget = field(default_factory=LinkBudget)
    gnb_array: ArrayConfig = field(default_factory=default_gnb_array)
    uav_array: ArrayConfig = field(default_factory=default_uav_array)
    eigen_tol: float = 1e-9
    eigen_max_iter: int = 1000

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.drops < 1:
            raise ValueError("drops must be >= 1")
        if self.uav_count < 1:
            raise ValueError("uav_count must be >= 1")
        if not self.uav_altitudes_m or any(a <= 0 for a in self.uav_altitudes_m):
            raise ValueError("uav_altitudes_m must be positive")


@dataclass(frozen=True)
class UavRecord:
    """One UAV's serving result in one drop."""

    altitude_m: float
    drop_index: int
    uav_id: str
    uav_x_m: float
    uav_y_m: float
    snr_db: float
    serving_gnb_id: str
    serving_sector: int
    serving_kind: str  # "standard" | "dedicated" | "" when in outage
    link_state: str  # "los" | "nlos" | "outage"
    strongest_path_is_los: bool
    serving_aoa_elevation_deg: float

    @property
    def outage(self) -> bool:
        return self.link_state == "outage"


@dataclass
class DropReport:
    records: list[UavRecord]
    counters: dict[str, int]
    config: DropConfig

    def records_for_altitude(self, altitude_m: float) -> list[UavRecord]:
        return [r for r in self.records if r.altitude_m == altitude_m]


def _alt_key(altitude_m: float) -> int:
    # millimeter-resolution integer key for seed derivation
    return int(round(altitude_m * 1000))


def _rng(seed: int, altitude_m: float, drop_index: int, *tail: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((seed, _alt_key(altitude_m), drop_index, *tail))
    )


def link_rng(
    seed: int,
    altitude_m: float,
    drop_index: int,
    kind: GnbKind,
    site_idx: int,
    sector_idx: int,
    uav_idx: int,
) -> np.random.Generator:
    """Per-link random source; `site_idx` counts within the kind."""
    kind_code = 0 if kind is GnbKind.STANDARD else 1
    return _rng(
        seed, altitude_m, drop_index, _LINK_STREAM, kind_code, site_idx, sector_idx, uav_idx
    )


class SurrogateProvider:
    """Default channel backend: the two-stage statistical sampler.

    Providers are picklable callables so parallel runs can ship them to
    worker processes; alternative backends (e.g. loaded path traces) just
    implement the same call signature.
    """

    def __init__(self, params: ChannelParams):
        self.params = params

    def __call__(self, site, sector_idx, uav, geom, rng, counters) -> ChannelSample:
        state = sample_link_state(
            geom.d2d_m, geom.uav_height_m, geom.gnb_height_m, site.kind,
            self.params, rng,
        )
        return sample_paths(state, geom, site.kind, self.params, rng, counters)


@dataclass
class _KindEval:
    """Per-link results for all links of one gNB kind, in canonical
    (site, sector, uav) order."""

    sites: list[Site]
    snr_db: np.ndarray
    state: np.ndarray  # "los"/"nlos"/"outage" strings
    strongest_is_los: np.ndarray
    aoa_elevation_deg: np.ndarray


def _evaluate_kind(
    cfg: DropConfig,
    sites: list[Site],
    uavs: list[UavNode],
    altitude_m: float,
    drop_index: int,
    provider,
    counters: dict[str, int],
) -> _KindEval:
    n_sites = len(sites)
    n_uav = len(uavs)
    n_links = n_sites * 3 * n_uav
    if n_links == 0:
        z = np.zeros(0)
        return _KindEval(sites, z, np.zeros(0, dtype=object), z.astype(bool), z)

    site_pos = np.stack([s.position for s in sites])
    uav_pos = np.stack([u.position for u in uavs])
    disp = wrap_displacement(site_pos[:, None, :], uav_pos[None, :, :], cfg.universe)
    d2d = np.hypot(disp[..., 0], disp[..., 1])
    d3d = np.sqrt((disp**2).sum(axis=-1))
    aoa_az, aoa_el = azel_from_displacement(disp)
    aod_az, aod_el = azel_from_displacement(-disp)

    sample_counters = SampleCounters()
    states: list[LinkState] = []
    path_chunks: list[dict[str, np.ndarray]] = []
    counts = np.zeros(n_links, dtype=np.int64)
    path_uav_idx: list[np.ndarray] = []
    kind = sites[0].kind if sites else GnbKind.STANDARD

    j = 0
    for si, site in enumerate(sites):
        for sec in range(3):
            for ui, uav in enumerate(uavs):
                geom = LinkGeometry(
                    d2d_m=float(d2d[si, ui]),
                    d3d_m=float(d3d[si, ui]),
                    uav_height_m=float(uav.position[2]),
                    gnb_height_m=float(site.position[2]),
                    aoa_azimuth_deg=float(aoa_az[si, ui]),
                    aoa_elevation_deg=float(aoa_el[si, ui]),
                    aod_azimuth_deg=float(aod_az[si, ui]),
                    aod_elevation_deg=float(aod_el[si, ui]),
                )
                rng = link_rng(cfg.seed, altitude_m, drop_index, kind, si, sec, ui)
                sample = provider(site, sec, uav, geom, rng, sample_counters)
                states.append(sample.state)
                if sample.paths:
                    arrs = sample.as_arrays()
                    counts[j] = len(sample.paths)
                    path_chunks.append(arrs)
                    path_uav_idx.append(np.full(counts[j], ui, dtype=np.int64))
                j += 1
    counters["clamped_paths"] = counters.get("clamped_paths", 0) + sample_counters.clamped_paths

    offsets = np.zeros(n_links + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    total_paths = int(offsets[-1])
    state_arr = np.array([_STATE_STR[s] for s in states], dtype=object)

    if total_paths == 0:
        snr = np.full(n_links, -np.inf)
        return _KindEval(
            sites, snr, state_arr, np.zeros(n_links, dtype=bool),
            np.full(n_links, np.nan),
        )

    def cat(name):
        return np.concatenate([c[name] for c in path_chunks])

    gain = cat("gain_db")
    p_aoa_el = cat("aoa_elevation_deg")
    p_aoa_az = cat("aoa_azimuth_deg")
    p_aod_el = cat("aod_elevation_deg")
    p_aod_az = cat("aod_azimuth_deg")
    uav_of_path = np.concatenate(path_uav_idx)

    # departure side: rotate into each UAV's frame
    r_uav = np.stack([rotation_matrix(u.array_boresight) for u in uavs])
    g_aod = unit_from_azel(p_aod_az, p_aod_el)
    l_aod = np.einsum("pji,pj->pi", r_uav[uav_of_path], g_aod)
    th_tx = np.degrees(np.arccos(np.clip(l_aod[:, 2], -1.0, 1.0)))
    ph_tx = np.degrees(np.arctan2(l_aod[:, 1], l_aod[:, 0]))

    # arrival side: per-sector rotation; paths of one (site, sector) block
    # are contiguous in canonical order
    g_aoa = unit_from_azel(p_aoa_az, p_aoa_el)
    th_rx = np.empty(total_paths)
    ph_rx = np.empty(total_paths)
    links_per_sector = n_uav
    for si, site in enumerate(sites):
        for sec in range(3):
            first = (si * 3 + sec) * links_per_sector
            lo = offsets[first]
            hi = offsets[first + links_per_sector]
            if hi == lo:
                continue
            l_aoa = g_aoa[lo:hi] @ rotation_matrix(site.sectors[sec].orientation)
            th_rx[lo:hi] = np.degrees(np.arccos(np.clip(l_aoa[:, 2], -1.0, 1.0)))
            ph_rx[lo:hi] = np.degrees(np.arctan2(l_aoa[:, 1], l_aoa[:, 0]))

    a_tx = np.asarray(cfg.uav_array.element.gain_db(th_tx, ph_tx), dtype=float)
    a_rx = np.asarray(cfg.gnb_array.element.gain_db(th_rx, ph_rx), dtype=float)
    weights = 10.0 ** ((gain + a_tx + a_rx) / 10.0)
    tx_u, tx_v = direction_cosines(th_tx, ph_tx)
    rx_u, rx_v = direction_cosines(th_rx, ph_rx)

    ev = _kernels.evaluate_links(
        weights, tx_u, tx_v, rx_u, rx_v, offsets,
        cfg.uav_array.rows, cfg.uav_array.cols,
        cfg.gnb_array.rows, cfg.gnb_array.cols,
        cfg.uav_array.element_spacing_wavelengths,
        cfg.gnb_array.element_spacing_wavelengths,
        cfg.eigen_tol, cfg.eigen_max_iter,
    )
    bad = ev.converged & (
        (ev.tx_residual_rel > EIGEN_RESIDUAL_RTOL * (1 + 1e-9))
        | (ev.rx_residual_rel > EIGEN_RESIDUAL_RTOL * (1 + 1e-9))
    )
    if np.any(bad):
        raise RuntimeError(
            f"eigen residual bound violated on {int(bad.sum())} links"
        )
    counters["nonconverged_links"] = counters.get("nonconverged_links", 0) + int(
        np.count_nonzero(~ev.converged & (counts > 0))
    )

    noise = cfg.budget.noise_power_dbm
    with np.errstate(divide="ignore"):
        snr = np.where(
            ev.power_sum > 0.0,
            cfg.budget.tx_power_dbm + 10.0 * np.log10(
                np.where(ev.power_sum > 0.0, ev.power_sum, 1.0)
            ) - noise,
            -np.inf,
        )
    has_paths = counts > 0
    strongest_flat = np.where(has_paths, offsets[:-1] + np.maximum(ev.strongest, 0), 0)
    aoa_strongest = np.where(has_paths, p_aoa_el[strongest_flat], np.nan)
    strongest_is_los = has_paths & (state_arr == "los") & (ev.strongest == 0)
    return _KindEval(sites, snr, state_arr, strongest_is_los, aoa_strongest)


def _associate(
    evals: list[_KindEval],
    uavs: list[UavNode],
    altitude_m: float,
    drop_index: int,
) -> list[UavRecord]:
    n_uav = len(uavs)
    best_snr = np.full(n_uav, -np.inf)
    best_kind = np.full(n_uav, -1, dtype=np.int64)
    best_row = np.zeros(n_uav, dtype=np.int64)
    for ki, ev in enumerate(evals):
        if not ev.sites:
            continue
        snr2 = ev.snr_db.reshape(len(ev.sites) * 3, n_uav)
        row = np.argmax(snr2, axis=0)  # first max: lowest (site, sector)
        val = snr2[row, np.arange(n_uav)]
        better = val > best_snr  # strict: earlier kind (lower gnb id) keeps ties
        best_snr[better] = val[better]
        best_kind[better] = ki
        best_row[better] = row[better]

    # association optimality: serving SNR must dominate every candidate
    kind_maxima = [
        ev.snr_db.reshape(len(ev.sites) * 3, n_uav).max(axis=0)
        for ev in evals
        if ev.sites
    ]
    if kind_maxima:
        assert np.all(best_snr >= np.maximum.reduce(kind_maxima)), "association not optimal"

    records = []
    for ui, uav in enumerate(uavs):
        if not np.isfinite(best_snr[ui]):
            records.append(
                UavRecord(
                    altitude_m=altitude_m,
                    drop_index=drop_index,
                    uav_id=uav.id,
                    uav_x_m=float(uav.position[0]),
                    uav_y_m=float(uav.position[1]),
                    snr_db=-np.inf,
                    serving_gnb_id="",
                    serving_sector=-1,
                    serving_kind="",
                    link_state="outage",
                    strongest_path_is_los=False,
                    serving_aoa_elevation_deg=float("nan"),
                )
            )
            continue
        ev = evals[best_kind[ui]]
        row = int(best_row[ui])
        site = ev.sites[row // 3]
        flat = row * n_uav + ui
        records.append(
            UavRecord(
                altitude_m=altitude_m,
                drop_index=drop_index,
                uav_id=uav.id,
                uav_x_m=float(uav.position[0]),
                uav_y_m=float(uav.position[1]),
                snr_db=float(best_snr[ui]),
                serving_gnb_id=site.id,
                serving_sector=row % 3,
                serving_kind=site.kind.value,
                link_state=str(ev.state[flat]),
                strongest_path_is_los=bool(ev.strongest_is_los[flat]),
                serving_aoa_elevation_deg=float(ev.aoa_elevation_deg[flat]),
            )
        )
    return records


def run_deployment(
    cfg: DropConfig,
    sites_standard: list[Site],
    sites_dedicated: list[Site],
    uavs: list[UavNode],
    altitude_m: float,
    drop_index: int,
    *,
    provider=None,
    counters: dict[str, int] | None = None,
) -> list[UavRecord]:
    """Evaluate and associate a fixed deployment (deterministic given the
    config seed and the deployment itself)."""
    if counters is None:
        counters = {}
    if provider is None:
        provider = SurrogateProvider(cfg.channel)
    evals = [
        _evaluate_kind(cfg, sites_standard, uavs, altitude_m, drop_index, provider, counters)
    ]
    if sites_dedicated:
        evals.append(
            _evaluate_kind(cfg, sites_dedicated, uavs, altitude_m, drop_index, provider, counters)
        )
    return _associate(evals, uavs, altitude_m, drop_index)


def deploy_for_drop(
    cfg: DropConfig, altitude_m: float, drop_index: int
) -> tuple[list[Site], list[Site], list[UavNode]]:
    """Random deployment of one drop: standard sites, dedicated sites (may
    be empty), and UAVs (kept clear of every site)."""
    dep = cfg.deployment
    sites_std = deploy_gnbs(
        dep, GnbKind.STANDARD, cfg.universe,
        _rng(cfg.seed, altitude_m, drop_index, _DEPLOY_STREAM, 0),
        array=cfg.gnb_array,
    )
    sites_ded: list[Site] = []
    if dep.isd_dedicated_m is not None or dep.gnb_count_dedicated is not None:
        sites_ded = deploy_gnbs(
            dep, GnbKind.DEDICATED, cfg.universe,
            _rng(cfg.seed, altitude_m, drop_index, _DEPLOY_STREAM, 1),
            array=cfg.gnb_array, id_start=len(sites_std),
        )
    uavs = deploy_uavs(
        cfg.uav_count, altitude_m, dep, sites_std + sites_ded, cfg.universe,
        _rng(cfg.seed, altitude_m, drop_index, _UAV_STREAM),
        array=cfg.uav_array,
    )
    return sites_std, sites_ded, uavs


def run_drop(
    cfg: DropConfig,
    altitude_m: float,
    drop_index: int,
    *,
    provider=None,
    counters: dict[str, int] | None = None,
) -> list[UavRecord]:
    """One Monte Carlo drop at one altitude."""
    sites_std, sites_ded, uavs = deploy_for_drop(cfg, altitude_m, drop_index)
    return run_deployment(
        cfg, sites_std, sites_ded, uavs, altitude_m, drop_index,
        provider=provider, counters=counters,
    )


def run_drop_with_extension(
    cfg: DropConfig, altitude_m: float, drop_index: int
) -> tuple[list[UavRecord], list[UavRecord]]:
    """Candidate-set-extension replay: evaluate a standard-only baseline,
    then re-associate the *same* UAVs and channel realizations with the
    dedicated sites added.  UAV placement avoids standard sites only, so
    the baseline matches a standard-only `run_drop` bit for bit.
    """
    dep = cfg.deployment
    if dep.isd_dedicated_m is None and dep.gnb_count_dedicated is None:
        raise ValueError("extension replay needs a dedicated-deployment config")
    sites_std = deploy_gnbs(
        dep, GnbKind.STANDARD, cfg.universe,
        _rng(cfg.seed, altitude_m, drop_index, _DEPLOY_STREAM, 0),
        array=cfg.gnb_array,
    )
    uavs = deploy_uavs(
        cfg.uav_count, altitude_m, dep, sites_std, cfg.universe,
        _rng(cfg.seed, altitude_m, drop_index, _UAV_STREAM),
        array=cfg.uav_array,
    )
    sites_ded = deploy_gnbs(
        dep, GnbKind.DEDICATED, cfg.universe,
        _rng(cfg.seed, altitude_m, drop_index, _DEPLOY_STREAM, 1),
        array=cfg.gnb_array, id_start=len(sites_std),
    )
    provider = SurrogateProvider(cfg.channel)
    counters: dict[str, int] = {}
    ev_std = _evaluate_kind(cfg, sites_std, uavs, altitude_m, drop_index, provider, counters)
    ev_ded = _evaluate_kind(cfg, sites_ded, uavs, altitude_m, drop_index, provider, counters)
    baseline = _associate([ev_std], uavs, altitude_m, drop_index)
    extended = _associate([ev_std, ev_ded], uavs, altitude_m, drop_index)
    return baseline, extended


def _run_unit(args) -> tuple[int, int, list[UavRecord], dict[str, int]]:
    cfg, alt_idx, altitude_m, drop_index, provider = args
    counters: dict[str, int] = {}
    records = run_drop(cfg, altitude_m, drop_index, provider=provider, counters=counters)
    return alt_idx, drop_index, records, counters


def run(cfg: DropConfig, *, workers: int = 1, provider=None) -> DropReport:
    """Run the full (altitudes x drops) grid; the aggregation is an
    ordered reduction, so the result is identical for any worker count."""
    units = [
        (cfg, ai, alt, d, provider)
        for ai, alt in enumerate(cfg.uav_altitudes_m)
        for d in range(cfg.drops)
    ]
    if workers > 1:
        with Pool(processes=workers) as pool:
            results = pool.map(_run_unit, units)
    else:
        results = [_run_unit(u) for u in units]
    results.sort(key=lambda r: (r[0], r[1]))
    records: list[UavRecord] = []
    counters: dict[str, int] = {"clamped_paths": 0, "nonconverged_links": 0}
    for _, _, recs, cnt in results:
        records.extend(recs)
        for k, v in cnt.items():
            counters[k] = counters.get(k, 0) + v
    return DropReport(records=records, counters=counters, config=cfg)


# ---------------------------------------------------------------------------
# statistics


@dataclass
class CdfResult:
    snr_grid_db: np.ndarray
    cumulative: np.ndarray
    quantiles_db: dict[int, float]
    outage_fraction: float
    n_records: int
    n_connected: int


DEFAULT_CDF_GRID = np.arange(-20.0, 60.0 + 0.25, 0.5)

_QUANTILES = (5, 25, 50, 75, 95)


def snr_cdf(records: list[UavRecord], grid=None) -> CdfResult:
    """Empirical CDF of the serving SNR over connected UAVs.

    Outage records are excluded from the CDF and reported via
    `outage_fraction`.  Quantiles use linear interpolation between order
    statistics (numpy's default rule).
    """
    if not records:
        raise ValueError("snr_cdf needs at least one record")
    if grid is None:
        grid = DEFAULT_CDF_GRID
    snrs = np.array([r.snr_db for r in records if not r.outage])
    n = len(records)
    if snrs.size == 0:
        return CdfResult(
            snr_grid_db=np.array([]), cumulative=np.array([]),
            quantiles_db={}, outage_fraction=1.0, n_records=n, n_connected=0,
        )
    grid = np.asarray(grid, dtype=float)
    cumulative = np.searchsorted(np.sort(snrs), grid, side="right") / snrs.size
    quantiles = {
        q: float(np.percentile(snrs, q)) for q in _QUANTILES
    }
    return CdfResult(
        snr_grid_db=grid,
        cumulative=cumulative,
        quantiles_db=quantiles,
        outage_fraction=1.0 - snrs.size / n,
        n_records=n,
        n_connected=int(snrs.size),
    )


def regime_breakdown(
    records: list[UavRecord], low_thresh_db: float, high_thresh_db: float
) -> dict[str, dict[str, float]]:
    """Link-state composition of the lower/middle/upper SNR regimes.

    Regimes partition the connected records at the two thresholds (lower:
    snr < low, middle: low <= snr <= high, upper: snr > high).  Within
    each regime the three reported fractions sum to 1: NLOS-serving,
    LOS-serving with the LOS path strongest, LOS-serving with an NLOS path
    strongest.
    """
    if low_thresh_db > high_thresh_db:
        raise ValueError("thresholds must be ordered")
    connected = [r for r in records if not r.outage]
    out = {}
    for name, members in (
        ("lower", [r for r in connected if r.snr_db < low_thresh_db]),
        ("middle", [r for r in connected if low_thresh_db <= r.snr_db <= high_thresh_db]),
        ("upper", [r for r in connected if r.snr_db > high_thresh_db]),
    ):
        n = len(members)
        nlos = sum(1 for r in members if r.link_state == "nlos")
        los_los = sum(
            1 for r in members if r.link_state == "los" and r.strongest_path_is_los
        )
        los_nlos = sum(
            1 for r in members if r.link_state == "los" and not r.strongest_path_is_los
        )
        out[name] = {
            "count": n,
            "nlos_serving": nlos / n if n else 0.0,
            "los_serving_los_strongest": los_los / n if n else 0.0,
            "los_serving_nlos_strongest": los_nlos / n if n else 0.0,
        }
    return out


def _per_altitude_fraction(records, predicate) -> dict[float, float]:
    out = {}
    for alt in sorted({r.altitude_m for r in records}):
        connected = [r for r in records if r.altitude_m == alt and not r.outage]
        out[alt] = (
            sum(1 for r in connected if predicate(r)) / len(connected)
            if connected
            else float("nan")
        )
    return out


def dedicated_attach_fraction(records: list[UavRecord]) -> dict[float, float]:
    """Fraction of connected UAVs served by a dedicated site, per altitude."""
    return _per_altitude_fraction(records, lambda r: r.serving_kind == "dedicated")


def nlos_serving_fraction(records: list[UavRecord]) -> dict[float, float]:
    """Fraction of connected UAVs whose serving link is NLOS, per altitude."""
    return _per_altitude_fraction(records, lambda r: r.link_state == "nlos")


# ---------------------------------------------------------------------------
# single-gNB angle-of-arrival analyses


@dataclass
class AoaSweepResult:
    distances_m: np.ndarray
    mean_aoa_elevation_deg: np.ndarray  # nan where every realization was outage
    n_valid: np.ndarray


def _strongest_aoa_elevation(sample: ChannelSample, site: Site, sector_idx: int, mode: str):
    if sample.state is LinkState.OUTAGE:
        return None
    arrs = sample.as_arrays()
    score = arrs["gain_db"].copy()
    if mode == "directional":
        from .antenna import global_to_local  # local import to keep numpy hot path light

        sector = site.sectors[sector_idx]
        th, ph = global_to_local(
            sector.orientation, arrs["aoa_azimuth_deg"], arrs["aoa_elevation_deg"]
        )
        score = score + np.asarray(sector.array.element.gain_db(th, ph), dtype=float)
    return float(arrs["aoa_elevation_deg"][int(np.argmax(score))])


def strongest_path_aoa_sweep(
    gnb: Site,
    altitude_m: float,
    distances_m,
    realizations: int,
    *,
    mode: str = "directional",
    params: ChannelParams | None = None,
    universe: Universe | None = None,
    sector_idx: int = 0,
    seed: int = 0,
) -> AoaSweepResult:
    """Mean elevation AOA of the strongest path versus horizontal distance.

    "directional" ranks paths after applying the sector's element gain at
    the local AOA; "omni" ranks by raw path gain.  The UAV side is treated
    as omnidirectional in both modes, so the comparison isolates the gNB
    directivity.  Distance bins where every realization lands in outage
    come back as nan.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    if mode not in ("directional", "omni"):
        raise ValueError("mode must be 'directional' or 'omni'")
    if params is None:
        params = ChannelParams()
    if universe is None:
        universe = Universe(side_length_m=1e9, wrap=False)
    distances = np.asarray(distances_m, dtype=float)
    means = np.full(distances.size, np.nan)
    n_valid = np.zeros(distances.size, dtype=np.int64)
    for di, dist in enumerate(distances):
        uav_pos = gnb.position + np.array([dist, 0.0, 0.0])
        uav_pos[2] = altitude_m
        geom = LinkGeometry.from_positions(gnb.position, uav_pos, universe)
        vals = []
        for r in range(realizations):
            rng = np.random.default_rng(
                np.random.SeedSequence((seed, _SWEEP_STREAM, di, r))
            )
            state = sample_link_state(
                geom.d2d_m, geom.uav_height_m, geom.gnb_height_m, gnb.kind, params, rng
            )
            sample = sample_paths(state, geom, gnb.kind, params, rng)
            aoa = _strongest_aoa_elevation(sample, gnb, sector_idx, mode)
            if aoa is not None:
                vals.append(aoa)
        if vals:
            means[di] = float(np.mean(vals))
            n_valid[di] = len(vals)
    return AoaSweepResult(distances, means, n_valid)


def aoa_std_map(
    gnb: Site,
    altitudes_m,
    distances_m,
    realizations: int,
    *,
    mode: str = "directional",
    params: ChannelParams | None = None,
    universe: Universe | None = None,
    sector_idx: int = 0,
    seed: int = 0,
) -> np.ndarray:
    """Std of the strongest-path elevation AOA on a (distance, altitude)
    grid; shape (len(distances), len(altitudes)), nan where no realization
    produced a path."""
    if params is None:
        params = ChannelParams()
    if universe is None:
        universe = Universe(side_length_m=1e9, wrap=False)
    altitudes = np.asarray(altitudes_m, dtype=float)
    distances = np.asarray(distances_m, dtype=float)
    if altitudes.size == 0 or distances.size == 0:
        raise ValueError("grids must be non-empty")
    out = np.full((distances.size, altitudes.size), np.nan)
    for ai, alt in enumerate(altitudes):
        for di, dist in enumerate(distances):
            uav_pos = gnb.position + np.array([dist, 0.0, 0.0])
            uav_pos[2] = alt
            geom = LinkGeometry.from_positions(gnb.position, uav_pos, universe)
            vals = []
            for r in range(realizations):
                rng = np.random.default_rng(
                    np.random.SeedSequence((seed, _STDMAP_STREAM, ai, di, r))
                )
                state = sample_link_state(
                    geom.d2d_m, geom.uav_height_m, geom.gnb_height_m, gnb.kind, params, rng
                )
                sample = sample_paths(state, geom, gnb.kind, params, rng)
                aoa = _strongest_aoa_elevation(sample, gnb, sector_idx, mode)
                if aoa is not None:
                    vals.append(aoa)
            if vals:
                out[di, ai] = float(np.std(vals))
    return out
