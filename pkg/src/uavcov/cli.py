"""
cli.py: scenario parsing, batch execution, and plot-ready output files.

Commands:
  uavcov simulate <scenario.json> [--out DIR] [--seed N] [--threads N] [--lenient]
  uavcov validate <scenario.json> [--lenient]
  uavcov aoa-sweep <scenario.json> [--out DIR] [--altitude M] [--max-distance M]
                   [--step M] [--realizations N] [--std-map]

Scenario files are JSON; distances in meters, powers in dBm, angles in
degrees, bandwidth in Hz (keys carry their unit suffix).  An empty file
runs the default urban setup.  Unknown keys are rejected unless --lenient.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import warnings
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from . import __version__
from ._kernels import active_backend
from .antenna import (
    ArrayConfig,
    ElementPattern3gpp,
    IsotropicElement,
    PatchElement,
    load_tabulated_pattern,
)
from .channel import (
    ChannelParams,
    PathCoeffs,
    StateCurve,
    TraceError,
    load_path_traces,
    validate_channel_sample,
)
from .geometry import DeploymentConfig, GnbKind, Sector, Site, Universe, sites_to_csv
from .link import LinkBudget
from .network import (
    DropConfig,
    SurrogateProvider,
    UavRecord,
    aoa_std_map,
    deploy_for_drop,
    dedicated_attach_fraction,
    nlos_serving_fraction,
    run,
    snr_cdf,
    strongest_path_aoa_sweep,
)

__all__ = [
    "ScenarioError",
    "ScenarioConfig",
    "parse_scenario",
    "run_scenario",
    "compute_summary",
    "read_links_csv",
    "main",
]


class ScenarioError(ValueError):
    """Scenario validation failure; message carries the offending path."""


@dataclass
class ScenarioConfig:
    drop_config: DropConfig
    channel_backend: str = "surrogate"  # "surrogate" or "trace:<path>"
    output_dir: str = "out"
    dump_sites: bool = False
    source: dict = field(default_factory=dict)  # defaults-filled echo


# -- field converters --------------------------------------------------------


def _num(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}: expected a number")
    return float(v)


def _int(v, path):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{path}: expected an integer")
    return v


def _bool(v, path):
    if not isinstance(v, bool):
        raise ScenarioError(f"{path}: expected true/false")
    return v


def _str(v, path):
    if not isinstance(v, str):
        raise ScenarioError(f"{path}: expected a string")
    return v


def _opt(conv):
    def inner(v, path):
        return None if v is None else conv(v, path)

    return inner


def _pair(v, path):
    if not isinstance(v, list) or len(v) != 2:
        raise ScenarioError(f"{path}: expected a [low, high] pair")
    return (_num(v[0], path), _num(v[1], path))


def _num_list(v, path):
    if not isinstance(v, list) or not v:
        raise ScenarioError(f"{path}: expected a non-empty list of numbers")
    return tuple(_num(x, f"{path}[{i}]") for i, x in enumerate(v))


def _section(data, schema, path, lenient) -> dict:
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: expected an object")
    unknown = set(data) - set(schema)
    if unknown:
        msg = f"{path}: unknown keys {sorted(unknown)}"
        if lenient:
            warnings.warn(msg)
        else:
            raise ScenarioError(msg)
    return {
        k: conv(data[k], f"{path}.{k}") for k, conv in schema.items() if k in data
    }


def _construct(cls, kwargs, path):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


_UNIVERSE = {"side_length_m": _num, "wrap": _bool}
_DEPLOYMENT = {
    "isd_standard_m": _num,
    "isd_dedicated_m": _opt(_num),
    "min_gnb_separation_m": _num,
    "min_uav_gnb_separation_m": _num,
    "standard_height_range_m": _pair,
    "dedicated_height_range_m": _pair,
    "standard_downtilt_deg": _num,
    "dedicated_uptilt_deg": _num,
    "gnb_count_standard": _opt(_int),
    "gnb_count_dedicated": _opt(_int),
    "max_placement_attempts": _int,
}
_BUDGET = {
    "tx_power_dbm": _num,
    "bandwidth_hz": _num,
    "noise_figure_db": _num,
    "thermal_noise_density_dbm_hz": _num,
}
_STATE_CURVE = {f.name: _num for f in dc_fields(StateCurve)}
_PATH_COEFFS = {f.name: _num for f in dc_fields(PathCoeffs)}
_CHANNEL_SCALARS = {
    "carrier_ghz": _num,
    "los_exponent": _num,
    "los_intercept_db": _num,
    "nlos_exponent": _num,
    "nlos_intercept_db": _num,
    "max_paths": _int,
}
_ELEMENT_PARAMS = {
    "3gpp": {f.name: _num for f in dc_fields(ElementPattern3gpp)},
    "patch": {f.name: _num for f in dc_fields(PatchElement)},
    "isotropic": {},
}


def _parse_channel(data, path, lenient) -> ChannelParams:
    if data is None:
        return ChannelParams()
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: expected an object")
    nested = {
        "standard_state": (StateCurve, _STATE_CURVE),
        "dedicated_state": (StateCurve, _STATE_CURVE),
        "standard_paths": (PathCoeffs, _PATH_COEFFS),
        "dedicated_paths": (PathCoeffs, _PATH_COEFFS),
    }
    unknown = set(data) - set(_CHANNEL_SCALARS) - set(nested)
    if unknown:
        msg = f"{path}: unknown keys {sorted(unknown)}"
        if lenient:
            warnings.warn(msg)
        else:
            raise ScenarioError(msg)
    kwargs = {
        k: conv(data[k], f"{path}.{k}")
        for k, conv in _CHANNEL_SCALARS.items()
        if k in data
    }
    for k, (cls, schema) in nested.items():
        if k in data:
            sub = _section(data[k], schema, f"{path}.{k}", lenient)
            kwargs[k] = _construct(cls, sub, f"{path}.{k}")
        elif k == "dedicated_state":
            continue  # keep the class default (shifted LOS curve)
    return _construct(ChannelParams, kwargs, path)


def _parse_element(name, params, path, lenient):
    if name.startswith("tabulated:"):
        file_path = name.split(":", 1)[1]
        if not os.path.exists(file_path):
            raise ScenarioError(f"{path}: pattern file not found: {file_path}")
        try:
            return load_tabulated_pattern(file_path)
        except ValueError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    if name not in _ELEMENT_PARAMS:
        raise ScenarioError(
            f"{path}: unknown element {name!r} "
            "(use 3gpp|patch|isotropic|tabulated:<file>)"
        )
    kwargs = _section(params, _ELEMENT_PARAMS[name], f"{path}_params", lenient)
    cls = {"3gpp": ElementPattern3gpp, "patch": PatchElement, "isotropic": IsotropicElement}[name]
    return _construct(cls, kwargs, f"{path}_params")


def _parse_array(data, path, lenient, *, rows, cols, element) -> ArrayConfig:
    data = dict(data or {})
    schema = {
        "rows": _int,
        "cols": _int,
        "element_spacing_wavelengths": _num,
        "element": _str,
        "element_params": lambda v, p: v,
    }
    got = _section(data, schema, path, lenient)
    elem = _parse_element(
        got.get("element", element), got.get("element_params"), f"{path}.element", lenient
    )
    return _construct(
        ArrayConfig,
        {
            "rows": got.get("rows", rows),
            "cols": got.get("cols", cols),
            "element_spacing_wavelengths": got.get("element_spacing_wavelengths", 0.5),
            "element": elem,
        },
        path,
    )


_TOP_KEYS = {
    "seed",
    "drops",
    "uav_count",
    "uav_altitudes_m",
    "universe",
    "deployment",
    "budget",
    "channel",
    "arrays",
    "channel_backend",
    "output_dir",
    "dump_sites",
    "eigen_tol",
    "eigen_max_iter",
}


def parse_scenario(path, *, lenient: bool = False) -> ScenarioConfig:
    """Load and fully validate a scenario file; defaults fill every
    omitted field, so {} is a runnable document."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        msg = f"{path}: unknown keys {sorted(unknown)}"
        if lenient:
            warnings.warn(msg)
        else:
            raise ScenarioError(msg)

    universe = _construct(
        Universe, _section(data.get("universe"), _UNIVERSE, "universe", lenient), "universe"
    )
    deployment = _construct(
        DeploymentConfig,
        _section(data.get("deployment"), _DEPLOYMENT, "deployment", lenient),
        "deployment",
    )
    budget = _construct(
        LinkBudget, _section(data.get("budget"), _BUDGET, "budget", lenient), "budget"
    )
    channel = _parse_channel(data.get("channel"), "channel", lenient)
    arrays = data.get("arrays") or {}
    if not isinstance(arrays, dict):
        raise ScenarioError("arrays: expected an object")
    unknown = set(arrays) - {"gnb", "uav"}
    if unknown:
        msg = f"arrays: unknown keys {sorted(unknown)}"
        if lenient:
            warnings.warn(msg)
        else:
            raise ScenarioError(msg)
    gnb_array = _parse_array(
        arrays.get("gnb"), "arrays.gnb", lenient, rows=8, cols=8, element="3gpp"
    )
    uav_array = _parse_array(
        arrays.get("uav"), "arrays.uav", lenient, rows=4, cols=4, element="patch"
    )

    backend = data.get("channel_backend", "surrogate")
    if not isinstance(backend, str) or (
        backend != "surrogate" and not backend.startswith("trace:")
    ):
        raise ScenarioError(
            "channel_backend: expected 'surrogate' or 'trace:<path>'"
        )
    if backend.startswith("trace:"):
        trace_path = backend.split(":", 1)[1]
        if not os.path.exists(trace_path):
            raise ScenarioError(f"channel_backend: trace file not found: {trace_path}")

    cfg_kwargs = {}
    for key, conv in (
        ("seed", _int),
        ("drops", _int),
        ("uav_count", _int),
        ("uav_altitudes_m", _num_list),
        ("eigen_tol", _num),
        ("eigen_max_iter", _int),
    ):
        if key in data:
            cfg_kwargs[key] = conv(data[key], key)
    drop_config = _construct(
        DropConfig,
        dict(
            cfg_kwargs,
            universe=universe,
            deployment=deployment,
            channel=channel,
            budget=budget,
            gnb_array=gnb_array,
            uav_array=uav_array,
        ),
        "scenario",
    )
    scenario = ScenarioConfig(
        drop_config=drop_config,
        channel_backend=backend,
        output_dir=_str(data["output_dir"], "output_dir") if "output_dir" in data else "out",
        dump_sites=_bool(data["dump_sites"], "dump_sites") if "dump_sites" in data else False,
    )
    scenario.source = scenario_to_dict(scenario)
    return scenario


def scenario_to_dict(scn: ScenarioConfig) -> dict:
    """Defaults-filled echo of a scenario; re-parsing it reproduces the run."""
    cfg = scn.drop_config

    def plain(obj):
        out = {}
        for f in dc_fields(obj):
            v = getattr(obj, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def element_name(elem):
        if isinstance(elem, ElementPattern3gpp):
            return "3gpp", plain(elem)
        if isinstance(elem, PatchElement):
            return "patch", plain(elem)
        if isinstance(elem, IsotropicElement):
            return "isotropic", {}
        return "tabulated:<loaded>", {}

    def array_dict(a: ArrayConfig):
        name, params = element_name(a.element)
        return {
            "rows": a.rows,
            "cols": a.cols,
            "element_spacing_wavelengths": a.element_spacing_wavelengths,
            "element": name,
            "element_params": params,
        }

    ch = cfg.channel
    return {
        "seed": cfg.seed,
        "drops": cfg.drops,
        "uav_count": cfg.uav_count,
        "uav_altitudes_m": list(cfg.uav_altitudes_m),
        "eigen_tol": cfg.eigen_tol,
        "eigen_max_iter": cfg.eigen_max_iter,
        "universe": plain(cfg.universe),
        "deployment": plain(cfg.deployment),
        "budget": plain(cfg.budget),
        "channel": {
            **{k: getattr(ch, k) for k in _CHANNEL_SCALARS},
            "standard_state": plain(ch.standard_state),
            "dedicated_state": plain(ch.dedicated_state),
            "standard_paths": plain(ch.standard_paths),
            "dedicated_paths": plain(ch.dedicated_paths),
        },
        "arrays": {"gnb": array_dict(cfg.gnb_array), "uav": array_dict(cfg.uav_array)},
        "channel_backend": scn.channel_backend,
        "output_dir": scn.output_dir,
        "dump_sites": scn.dump_sites,
    }


# -- trace backend ------------------------------------------------------------


class TraceProvider:
    """Channel backend serving pre-loaded path traces keyed by
    (gnb_id, uav_id); a site's three sectors share one sample."""

    def __init__(self, traces, params: ChannelParams):
        self.traces = traces
        self.params = params

    def __call__(self, site, sector_idx, uav, geom, rng, counters):
        key = (site.id, uav.id)
        sample = self.traces.get(key)
        if sample is None:
            raise TraceError(f"trace backend: no sample for link {key}")
        validate_channel_sample(
            sample, geom.d3d_m, self.params, rtol=1e-6, context=f"trace link {key}"
        )
        return sample


# -- output files -------------------------------------------------------------

_LINKS_COLUMNS = [
    "altitude_m",
    "drop_index",
    "uav_id",
    "uav_x_m",
    "uav_y_m",
    "snr_db",
    "serving_gnb_id",
    "serving_sector",
    "serving_kind",
    "link_state",
    "strongest_path_is_los",
    "serving_aoa_elevation_deg",
]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_links_csv(records: list[UavRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(_LINKS_COLUMNS) + "\n")
        for r in records:
            fh.write(
                ",".join(_fmt(getattr(r, c)) for c in _LINKS_COLUMNS) + "\n"
            )


def read_links_csv(path) -> list[UavRecord]:
    import csv as _csv

    records = []
    with open(path, newline="") as fh:
        for row in _csv.DictReader(fh):
            records.append(
                UavRecord(
                    altitude_m=float(row["altitude_m"]),
                    drop_index=int(row["drop_index"]),
                    uav_id=row["uav_id"],
                    uav_x_m=float(row["uav_x_m"]),
                    uav_y_m=float(row["uav_y_m"]),
                    snr_db=float(row["snr_db"]),
                    serving_gnb_id=row["serving_gnb_id"],
                    serving_sector=int(row["serving_sector"]),
                    serving_kind=row["serving_kind"],
                    link_state=row["link_state"],
                    strongest_path_is_los=row["strongest_path_is_los"] == "true",
                    serving_aoa_elevation_deg=float(row["serving_aoa_elevation_deg"]),
                )
            )
    return records


def _alt_label(altitude_m: float) -> str:
    return str(int(altitude_m)) if altitude_m == int(altitude_m) else repr(altitude_m)


def compute_summary(records: list[UavRecord]) -> dict:
    """Per-altitude aggregates; recomputable exactly from links.csv."""
    nlos = nlos_serving_fraction(records)
    dedicated = dedicated_attach_fraction(records)
    out = {}
    for alt in sorted({r.altitude_m for r in records}):
        alt_records = [r for r in records if r.altitude_m == alt]
        cdf = snr_cdf(alt_records)
        connected = [r.snr_db for r in alt_records if not r.outage]
        out[_alt_label(alt)] = {
            "n_records": cdf.n_records,
            "n_connected": cdf.n_connected,
            "outage_fraction": cdf.outage_fraction,
            "snr_quantiles_db": {str(q): v for q, v in cdf.quantiles_db.items()},
            "mean_snr_db": float(np.mean(connected)) if connected else None,
            "nlos_serving_fraction": nlos[alt],
            "dedicated_attach_fraction": dedicated[alt],
        }
    return out


def run_scenario(
    scn: ScenarioConfig,
    *,
    workers: int = 1,
    out_dir: str | None = None,
    seed: int | None = None,
) -> int:
    """Execute a scenario and write links.csv, per-altitude CDFs,
    summary.json, and (optionally) sites.csv.  Returns a process exit
    status."""
    import dataclasses

    cfg = scn.drop_config
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
        scn = dataclasses.replace(scn, drop_config=cfg)
        scn.source = scenario_to_dict(scn)
    out = out_dir or scn.output_dir
    os.makedirs(out, exist_ok=True)

    provider = None
    if scn.channel_backend.startswith("trace:"):
        traces = load_path_traces(scn.channel_backend.split(":", 1)[1])
        provider = TraceProvider(traces, cfg.channel)
        if workers != 1:
            workers = 1  # trace table stays in-process

    report = run(cfg, workers=workers, provider=provider)

    write_links_csv(report.records, os.path.join(out, "links.csv"))
    for alt in cfg.uav_altitudes_m:
        cdf = snr_cdf(report.records_for_altitude(alt))
        with open(os.path.join(out, f"cdf_{_alt_label(alt)}.csv"), "w") as fh:
            fh.write("snr_db,cum_prob\n")
            for s, c in zip(cdf.snr_grid_db, cdf.cumulative):
                fh.write(f"{s!r},{c!r}\n")
    if scn.dump_sites:
        sites_std, sites_ded, _ = deploy_for_drop(cfg, cfg.uav_altitudes_m[0], 0)
        sites_to_csv(sites_std + sites_ded, os.path.join(out, "sites.csv"))
    summary = {
        "code_version": __version__,
        "kernel_backend": active_backend(),
        "seed": cfg.seed,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": scn.source,
        "counters": report.counters,
        "per_altitude": compute_summary(report.records),
    }
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _sweep_site(cfg: DropConfig) -> Site:
    dep = cfg.deployment
    half = cfg.universe.side_length_m / 2.0
    height = sum(dep.standard_height_range_m) / 2.0
    sectors = tuple(
        Sector(120.0 * s, dep.standard_downtilt_deg, cfg.gnb_array) for s in range(3)
    )
    return Site("gnb000", np.array([half, half, height]), GnbKind.STANDARD, sectors)


def _cmd_simulate(args) -> int:
    scn = parse_scenario(args.scenario, lenient=args.lenient)
    return run_scenario(
        scn, workers=args.threads, out_dir=args.out, seed=args.seed
    )


def _cmd_validate(args) -> int:
    parse_scenario(args.scenario, lenient=args.lenient)
    print(f"{args.scenario}: OK")
    return 0


def _cmd_aoa_sweep(args) -> int:
    scn = parse_scenario(args.scenario, lenient=args.lenient)
    cfg = scn.drop_config
    out = args.out or scn.output_dir
    os.makedirs(out, exist_ok=True)
    site = _sweep_site(cfg)
    distances = np.arange(0.0, args.max_distance + args.step / 2, args.step)
    results = {
        mode: strongest_path_aoa_sweep(
            site, args.altitude, distances, args.realizations,
            mode=mode, params=cfg.channel, seed=cfg.seed,
        )
        for mode in ("directional", "omni")
    }
    with open(os.path.join(out, "aoa_sweep.csv"), "w") as fh:
        fh.write(
            "distance_m,mean_aoa_el_directional_deg,mean_aoa_el_omni_deg,"
            "n_valid_directional,n_valid_omni\n"
        )
        for i, d in enumerate(distances):
            fh.write(
                f"{d!r},{results['directional'].mean_aoa_elevation_deg[i]!r},"
                f"{results['omni'].mean_aoa_elevation_deg[i]!r},"
                f"{results['directional'].n_valid[i]},{results['omni'].n_valid[i]}\n"
            )
    if args.std_map:
        grid = aoa_std_map(
            site, cfg.uav_altitudes_m, distances, args.realizations,
            params=cfg.channel, seed=cfg.seed,
        )
        with open(os.path.join(out, "aoa_std_map.csv"), "w") as fh:
            fh.write(
                "distance_m," + ",".join(
                    f"std_at_{_alt_label(a)}m_deg" for a in cfg.uav_altitudes_m
                ) + "\n"
            )
            for i, d in enumerate(distances):
                fh.write(
                    f"{d!r}," + ",".join(repr(v) for v in grid[i]) + "\n"
                )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="uavcov",
        description="mmWave UAV uplink coverage simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario end to end")
    p_sim.add_argument("scenario")
    p_sim.add_argument("--out", default=None, help="output directory override")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--threads", type=int, default=1, help="worker processes")
    p_sim.add_argument("--lenient", action="store_true", help="warn on unknown keys")
    p_sim.set_defaults(func=_cmd_simulate)

    p_val = sub.add_parser("validate", help="check a scenario file")
    p_val.add_argument("scenario")
    p_val.add_argument("--lenient", action="store_true")
    p_val.set_defaults(func=_cmd_validate)

    p_aoa = sub.add_parser("aoa-sweep", help="single-gNB elevation-AOA analyses")
    p_aoa.add_argument("scenario")
    p_aoa.add_argument("--out", default=None)
    p_aoa.add_argument("--altitude", type=float, default=60.0)
    p_aoa.add_argument("--max-distance", type=float, default=500.0)
    p_aoa.add_argument("--step", type=float, default=10.0)
    p_aoa.add_argument("--realizations", type=int, default=1000)
    p_aoa.add_argument("--std-map", action="store_true")
    p_aoa.add_argument("--lenient", action="store_true")
    p_aoa.set_defaults(func=_cmd_aoa_sweep)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, TraceError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
