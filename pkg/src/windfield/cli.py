"""Command-line scenarios.

Each subcommand resolves its parameters (defaults, then ``--config``, then
flags), runs one computation and writes plot-ready files plus ``report.json``
into ``--out``.  Exit codes: 2 for configuration errors, 3 for domain errors
raised by the library, 4 for I/O errors.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .dynamics import (
    GridRegion,
    IntegratorConfig,
    StateEuclid,
    field_action,
    flux_action_4d,
    integrate_newtonian,
    riemann_action_2d,
)
from .errors import WindfieldError
from .evolution import EvolutionConfig, defect_drift, initial_lattice
from .field import FeatureSet, laplacian
from .frames import deform_frame, gram, induced_metric, standard_frame
from .geometry import (
    MinkowskiEvent,
    PolarPoint2,
    PseudoPlanePoint,
    R6Point,
    sphere_branch,
    wind_minkowski_to_r3s1,
    wind_pseudoplane_to_cylinder,
    wind_plane_to_sphere,
    wind_r6_to_r3s3,
)
from .stochastic import (
    HarmonicLagrangian,
    WalkConfig,
    action_histogram,
    amplitude_sum,
    derive_seed,
    harmonic_classical_action,
    lagrangian_from_dict,
    sample_ensemble,
)

log = logging.getLogger("windfield")

EXIT_CONFIG, EXIT_DOMAIN, EXIT_IO = 2, 3, 4
FORMATS = ("csv", "json", "ndjson")
CHARTS = ("cylinder", "sphere", "minkowski", "r6")


class ConfigError(Exception):
    pass


def fmt(v) -> str:
    """17 significant digits, enough to round-trip a double."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def csv_bytes(columns: list[str], rows, note: str = "") -> bytes:
    buf = io.StringIO()
    buf.write(f"# columns: {','.join(columns)}{'; ' + note if note else ''}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join("" if v is None else fmt(v) for v in row) + "\n")
    return buf.getvalue().encode()


def json_bytes(doc) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n").encode()


def ndjson_bytes(records) -> bytes:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records).encode()


@dataclass
class ScenarioConfig:
    kind: str
    params: dict
    out_dir: Path
    seed: int = 0
    formats: tuple[str, ...] = FORMATS


@dataclass
class RunReport:
    scenario: dict
    wall_time: float
    outputs: list[str]
    digests: dict[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parameter helpers


def _features(value) -> FeatureSet:
    if isinstance(value, str):
        try:
            doc = json.loads(Path(value).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{value}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return FeatureSet.from_dict(doc)
    if isinstance(value, dict):
        return FeatureSet.from_dict(value)
    return FeatureSet.from_dict({"features": value})


def _floats(value, n: int | None = None, name: str = "value") -> list[float]:
    if isinstance(value, str):
        value = [v for v in value.replace(";", ",").split(",") if v.strip()]
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers") from exc
    if n is not None and len(out) != n:
        raise ConfigError(f"{name} needs {n} numbers, got {len(out)}")
    return out


def _ints(value, name: str) -> list[int]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        return [int(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of integers") from exc


def _pairs(value, width: int, name: str) -> list[list[float]]:
    if isinstance(value, str):
        value = [chunk.split(",") for chunk in value.split(";") if chunk.strip()]
    try:
        return [_floats(p, width, name) for p in value]
    except TypeError as exc:
        raise ConfigError(f"{name} must be a list of {width}-tuples") from exc


def _num(params: dict, key: str, kind=float):
    try:
        return kind(params[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a {kind.__name__}") from exc


# ---------------------------------------------------------------------------
# scenarios; each returns (files {name: (format, bytes)}, summary)

DEFAULTS: dict[str, dict] = {
    "wind": {"map": "cylinder", "points": [[0.5, 0.25], [1.0, -1.0], [-2.5, 0.75]],
             "points_file": None},
    "metric": {"varphi": [-0.1, 0.0, 0.001, 0.1]},
    "field": {
        "features": [{"pos": [0.0, 0.0, 0.0], "mu": 1.0}],
        "points": [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.5, 0.5, 0.5]],
        "laplacian_step": 1e-3,
    },
    "simulate-orbit": {
        "features": [{"pos": [0.0, 0.0, 0.0], "mu": 1.0}],
        "state": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        "dt": 1e-3,
        "steps": 1000,
        "scheme": "leapfrog",
    },
    "action": {
        "features": [{"pos": [0.0, 0.0, 0.0], "mu": 1e-3}],
        "bounds": [[0.0, 1.0], [0.5, 1.5], [-0.5, 0.5], [-0.5, 0.5]],
        "resolution": [1, 16, 16, 16],
    },
    "walk": {
        "h": 0.03,
        "T": 1.0,
        "mean_passage": 0.25,
        "paths": 2000,
        "speed": 0.5,
        "speed_distribution": "maxwell",
        "start": [0.0, 0.0, 0.0],
        "lagrangian": {"kind": "harmonic", "params": {"k": 1.0, "offset": 0.5}},
        "endpoint": {"center": [0.3, 0.0, 0.0], "radius": 0.1},
        "bins": 10,
        "binning": "quantile",
        "control": False,
    },
    "evolve": {
        "sites": 256,
        "rate": 1.0,
        "dtau": 0.5,
        "steps": 200,
        "defects": [1, 254],
        "walls": [],
        "boundary": "fixed",
        "stencil": 3,
        "noise": 0.0,
        "initial": math.pi / 4,
    },
}


def _read_points(p: dict, width: int):
    if p.get("points_file"):
        rows = []
        for line in Path(p["points_file"]).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append(_floats(line, width, "points_file row"))
            except ConfigError:
                if rows:
                    raise
                continue  # header row
        return rows
    return _pairs(p["points"], width, "points")


def run_wind(p: dict, seed: int):
    chart = str(p["map"])
    rows = []
    if chart == "cylinder":
        cols = ["x0", "x1", "phi", "r", "turns", "sign"]
        for x0, x1 in _read_points(p, 2):
            c, b = wind_pseudoplane_to_cylinder(PseudoPlanePoint(x0, x1))
            rows.append((x0, x1, c.phi, c.r, b.turns, b.sign))
    elif chart == "sphere":
        cols = ["varphi", "rho", "theta", "phi", "turns", "sign"]
        for varphi, rho in _read_points(p, 2):
            q = PolarPoint2(varphi, rho)
            s, b = wind_plane_to_sphere(q), sphere_branch(q)
            rows.append((varphi, rho, s.thetas[0], s.phi, b.turns, b.sign))
    elif chart == "minkowski":
        cols = ["x0", "x1", "x2", "x3", "phi", "r1", "r2", "r3", "turns", "sign"]
        for x in _read_points(p, 4):
            w = wind_minkowski_to_r3s1(MinkowskiEvent(tuple(x)))
            rows.append((*x, w.phi, *w.r, w.branch.turns, w.branch.sign))
    elif chart == "r6":
        cols = ["point", "k", "q", "phi", "r", "turns", "sign"]
        for i, x in enumerate(_read_points(p, 6)):
            for (k, q), (c, b) in wind_r6_to_r3s3(R6Point(tuple(x))).items():
                rows.append((i, k, q, c.phi, c.r, b.turns, b.sign))
    else:
        raise ConfigError(f"map must be one of {CHARTS}, got {chart!r}")
    return {"wind.csv": ("csv", csv_bytes(cols, rows, f"map={chart}"))}, {"rows": len(rows)}


def run_metric(p: dict, seed: int):
    rows, records = [], []
    for v in _floats(p["varphi"], name="varphi"):
        m = induced_metric(v)
        g = gram(deform_frame(standard_frame(), v))
        rows.append((v, m.g_tt, m.g_rr, m.det(), g.det()))
        records.append({
            "varphi": v,
            "metric": m.components.tolist(),
            "gram": g.entries.tolist(),
            "gram_det": g.det(),
        })
    cols = ["varphi", "g_tt", "g_rr", "det", "gram_det"]
    files = {
        "metric.csv": ("csv", csv_bytes(cols, rows)),
        "metric.json": ("json", {"records": records}),
    }
    return files, {"rows": len(rows)}


def run_field(p: dict, seed: int):
    fs = _features(p["features"])
    h = _num(p, "laplacian_step")
    rows = []
    for x in _pairs(p["points"], 3, "points"):
        g = fs.gradient(x)
        rows.append((*x, fs.potential(x), *g, laplacian(fs, x, h)))
    cols = ["x", "y", "z", "phi", "gx", "gy", "gz", "laplacian"]
    return {"field.csv": ("csv", csv_bytes(cols, rows))}, {"points": len(rows), "features": len(fs)}


def run_orbit(p: dict, seed: int):
    fs = _features(p["features"])
    s = _floats(p["state"], 6, "state")
    cfg = IntegratorConfig(_num(p, "dt"), _num(p, "steps", int), str(p["scheme"]))
    traj = integrate_newtonian(fs, StateEuclid(s[:3], s[3:]), cfg)
    rows = (
        (t, *x, *v, e)
        for t, x, v, e in zip(traj.tau, traj.position, traj.velocity, traj.energy)
    )
    cols = ["tau", "x", "y", "z", "vx", "vy", "vz", "energy"]
    e0 = float(traj.energy[0])
    drift = float(np.max(np.abs(traj.energy - e0)))
    summary = {"samples": len(traj), "energy_initial": e0, "energy_max_abs_drift": drift}
    return {"trajectory.csv": ("csv", csv_bytes(cols, rows))}, summary


def run_action(p: dict, seed: int):
    fs = _features(p["features"])
    bounds = _pairs(p["bounds"], 2, "bounds")
    res = _ints(p["resolution"], "resolution")
    if len(bounds) != 4 or len(res) != 4:
        raise ConfigError("action needs a 4-D region (time first)")
    region = GridRegion(tuple(map(tuple, bounds)), tuple(res))
    flux = flux_action_4d(fs, region)
    s_field = field_action(fs, region)
    # hyperbolic angle |phi| along the x axis through the region's centre line
    yc = 0.5 * (bounds[2][0] + bounds[2][1])
    zc = 0.5 * (bounds[3][0] + bounds[3][1])

    def profile(t, x):
        pts = np.stack([x, np.full_like(x, yc), np.full_like(x, zc)], axis=-1)
        return np.abs(fs.potential(pts))

    plane = GridRegion((tuple(bounds[0]), tuple(bounds[1])), (max(res[0], 8), res[1]))
    s_riemann = riemann_action_2d(profile, plane)
    summary = {
        "field_action": s_field,
        "flux_action": flux.flux,
        "gram_volume": flux.volume,
        "riemann_action_2d": s_riemann,
    }
    return {"action.json": ("json", dict(summary))}, summary


def _walk_config(p: dict, seed: int) -> WalkConfig:
    end = p.get("endpoint") or {}
    try:
        return WalkConfig(
            h=float(p["h"]),
            T=float(p["T"]),
            mean_passage=float(p["mean_passage"]),
            paths=int(p["paths"]),
            seed=derive_seed(seed, "walk"),
            speed=float(p["speed"]),
            speed_distribution=str(p["speed_distribution"]),
            start=tuple(_floats(p["start"], 3, "start")),
            endpoint_center=tuple(_floats(end["center"], 3, "endpoint.center")) if end else None,
            endpoint_radius=float(end["radius"]) if end else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"walk config: {exc}") from exc


def run_walk(p: dict, seed: int):
    cfg = _walk_config(p, seed)
    lag = lagrangian_from_dict(p["lagrangian"])
    ens = sample_ensemble(cfg, lag)
    control = bool(p.get("control", False))
    amp = amplitude_sum(cfg, lag, control=control, ensemble=ens)
    reference = None
    if isinstance(lag, HarmonicLagrangian) and cfg.endpoint_center is not None:
        reference = harmonic_classical_action(lag.k, cfg.start, cfg.endpoint_center, cfg.T, lag.offset)
    hist = action_histogram(cfg, lag, int(p["bins"]), str(p["binning"]), reference, control, ens)
    summary = {
        "modulus": amp.modulus,
        "phase": amp.phase,
        "stderr": amp.stderr,
        "paths": amp.paths,
        "ensemble": len(ens),
        "log_modulus": amp.log_modulus,
        "sum_real": amp.total.real,
        "sum_imag": amp.total.imag,
        "negative_increments": amp.negative_increments,
        "classical_action": reference,
        "classical_bin": hist.reference_bin,
        "peak_bin": hist.peak_bin,
        "histogram_log_scale": hist.log_scale,
    }
    records = [r._asdict() for r in hist.rows]
    files = {
        "summary.json": ("json", dict(summary)),
        "histogram.ndjson": ("ndjson", ndjson_bytes(records)),
    }
    return files, summary


def run_evolve(p: dict, seed: int):
    cfg = EvolutionConfig(
        dtau=_num(p, "dtau"),
        steps=_num(p, "steps", int),
        rate=_num(p, "rate"),
        noise=_num(p, "noise"),
        seed=derive_seed(seed, "evolve"),
        stencil=_num(p, "stencil", int),
        boundary=str(p["boundary"]),
    )
    defects = _ints(p["defects"], "defects")
    lattice = initial_lattice(_num(p, "sites", int), _num(p, "initial"), cfg, defects,
                              _ints(p["walls"], "walls"))
    result = defect_drift(lattice, cfg)
    width = len(defects)
    rows = []
    for k, (pos, flux) in enumerate(zip(result.positions, result.flux)):
        rows.append((k, flux, *pos, *([None] * (width - len(pos)))))
    cols = ["step", "flux"] + [f"defect{i}" for i in range(width)]
    summary = {
        "merges": [list(m) for m in result.merges],
        "final_defects": list(result.positions[-1]),
        "final_flux": result.flux[-1],
    }
    return {"evolve.csv": ("csv", csv_bytes(cols, rows))}, summary


SCENARIOS: dict[str, Callable] = {
    "wind": run_wind,
    "metric": run_metric,
    "field": run_field,
    "simulate-orbit": run_orbit,
    "action": run_action,
    "walk": run_walk,
    "evolve": run_evolve,
}


def resolve(kind: str, config: dict | None = None, overrides: dict | None = None) -> dict:
    if kind not in SCENARIOS:
        raise ConfigError(f"unknown scenario {kind!r}")
    params = json.loads(json.dumps(DEFAULTS[kind]))
    for layer in (config or {}, overrides or {}):
        for key, value in layer.items():
            if key in ("seed", "out", "formats"):
                continue
            if key not in params:
                raise ConfigError(f"unknown parameter {key!r} for {kind}")
            params[key] = value
    return params


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    start = time.perf_counter()
    files, summary = SCENARIOS[cfg.kind](cfg.params, cfg.seed)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    echo = {"kind": cfg.kind, "params": cfg.params, "seed": cfg.seed,
            "formats": list(cfg.formats)}
    written, digests = [], {}
    for name, (kind, data) in sorted(files.items()):
        if kind not in cfg.formats:
            continue
        if kind == "json":
            data = json_bytes({**data, "config": echo, "version": __version__})
        (cfg.out_dir / name).write_bytes(data)
        written.append(name)
        digests[name] = hashlib.sha256(data).hexdigest()
    report = {
        "version": __version__,
        "scenario": echo,
        "results": summary,
        "outputs": written,
        "sha256": digests,
    }
    data = json_bytes(report)
    (cfg.out_dir / "report.json").write_bytes(data)
    digests["report.json"] = hashlib.sha256(data).hexdigest()
    return RunReport(echo, time.perf_counter() - start, written + ["report.json"], digests)


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="windfield", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", type=Path, help="JSON file with scenario parameters")
        sp.add_argument("--out", type=Path, help="output directory (default: current)")
        sp.add_argument("--seed", type=int, help="top-level seed, unsigned 64-bit")
        sp.add_argument("--formats", help="comma-separated subset of csv,json,ndjson")
        return sp

    sp = common(sub.add_parser("wind", help="wind pseudo-plane points onto the cylinder"))
    sp.add_argument("--map", choices=CHARTS)
    sp.add_argument("--points", help="semicolon-separated coordinate tuples")
    sp.add_argument("--points-file", help="CSV file, one point per row")
    sp = common(sub.add_parser("metric", help="tabulate the induced metric"))
    sp.add_argument("--varphi", help="comma-separated hyperbolic angles")
    sp = common(sub.add_parser("field", help="sample the feature potential"))
    sp.add_argument("--features", help="feature JSON file")
    sp.add_argument("--points", help="x,y,z;x,y,z;...")
    sp = common(sub.add_parser("simulate-orbit", help="integrate a feature trajectory"))
    sp.add_argument("--features", help="feature JSON file")
    sp.add_argument("--state", help="x,y,z,vx,vy,vz")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--scheme", choices=["leapfrog", "rk4"])
    sp = common(sub.add_parser("action", help="evaluate the action functionals"))
    sp.add_argument("--features", help="feature JSON file")
    sp = common(sub.add_parser("walk", help="random-walk amplitudes and action histogram"))
    sp.add_argument("--paths", type=int)
    sp.add_argument("--bins", type=int)
    sp = common(sub.add_parser("evolve", help="direction-lattice relaxation and defect drift"))
    sp.add_argument("--sites", type=int)
    sp.add_argument("--rate", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--dtau", type=float)
    sp.add_argument("--defects", help="comma-separated site indices")
    sp.add_argument("--walls", help="comma-separated site indices")
    sp.add_argument("--boundary", choices=["periodic", "fixed"])
    return parser


def _load_config(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return doc


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("WINDFIELD_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    skip = {"kind", "config", "out", "seed", "formats"}
    overrides = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    try:
        config = _load_config(args.config) if args.config else {}
        params = resolve(args.kind, config, overrides)
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        formats = tuple((args.formats or ",".join(config.get("formats", FORMATS))).split(","))
        if not set(formats) <= set(FORMATS):
            raise ConfigError(f"formats must be a subset of {FORMATS}")
        out = args.out or Path(config.get("out", "."))
        report = run_scenario(ScenarioConfig(args.kind, params, out, seed, formats))
    except ConfigError as exc:
        print(f"windfield: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WindfieldError as exc:
        print(f"windfield: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"windfield: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("%s finished in %.3f s", args.kind, report.wall_time)
    for name in report.outputs:
        print(out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
