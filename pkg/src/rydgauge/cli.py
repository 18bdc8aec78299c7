"""Command-line front end: ``rydgauge {potentials,gauge,bound,dynamics,verify}``.

Settings are resolved in order: built-in defaults, ``--preset``, ``--config``
file, explicit flags. The merged configuration is schema checked, written
into the run manifest next to the CSV artifacts, and can be fed back through
``--config`` to reproduce the run.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import platform
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from . import adiabatic as ad
from . import boundstates as bs
from . import dynamics as dy
from . import gauge as g
from . import verify as vf
from .errors import RydgaugeError
from .model import MODEL_SCHEMA, ModelParams, Position
from .output import format_value, sha256, write_csv, write_json

COMMANDS = ("potentials", "gauge", "bound", "dynamics", "verify")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 2}


def _section(props: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


CONFIG_SCHEMA = _section({
    "command": {"enum": list(COMMANDS)},
    "preset": {"type": ["string", "null"]},
    "model": MODEL_SCHEMA,
    "delta_ratios": {"type": "array", "items": _pos, "minItems": 1},
    "radial": _section({"rho_min": _pos, "rho_max": _pos, "n": _count}),
    "potentials": _section({"kind": {"enum": ["scan", "well", "states", "map"]}}),
    "map": _section({
        "plane": {"enum": ["xy", "xz"]},
        "window": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
        "n": _count,
    }),
    "gauge": _section({
        "kind": {"enum": ["abelian", "A1", "A2", "commutator"]},
        "rho_min": _pos, "rho_max": _pos, "n": _count,
    }),
    "bound": _section({
        "rho_min": _pos, "rho_max": _pos, "n": _count,
        "M_min": {"type": "integer"}, "M_max": {"type": "integer"},
        "levels": {"type": "integer", "minimum": 1},
        "include_scalar": {"type": "boolean"},
    }),
    "scales": _section({
        "species": {"enum": sorted(bs.ATOMIC_MASS_U)},
        "mass_u": _pos,
        "R0": _pos,
        "delta_abs": _pos,
    }, required=("R0", "delta_abs")),
    "dynamics": _section({
        "rho0": _pos, "t_end": _pos, "dt": _pos,
        "sample_every": {"type": "integer", "minimum": 1},
        "allow_long": {"type": "boolean"},
    }),
    "out": {"type": "string"},
    "threads": {"type": "integer", "minimum": 1},
}, required=("command",))

DEFAULTS = {
    "model": {"delta_ratio": 3.0, "kappa": 2.8e-6},
    "radial": {"rho_min": 0.7, "rho_max": 6.0, "n": 4000},
    "potentials": {"kind": "scan"},
    "map": {"plane": "xy", "window": [-2.0, 2.0, -2.0, 2.0], "n": 400},
    "gauge": {"kind": "abelian", "rho_min": 0.75, "rho_max": 3.0, "n": 451},
    "bound": {"rho_min": bs.DEFAULT_WINDOW[0], "rho_max": bs.DEFAULT_WINDOW[1], "n": bs.DEFAULT_POINTS,
              "M_min": -3, "M_max": 3, "levels": 5, "include_scalar": False},
    "dynamics": {"rho0": 1.5, "t_end": 400.0, "dt": dy.DEFAULT_DT, "sample_every": 50, "allow_long": False},
    "out": ".",
}

PRESETS = {
    "fig2a": {"command": "potentials", "model": {"delta_ratio": 3.0}, "potentials": {"kind": "map"},
              "map": {"plane": "xy"}},
    "fig2b": {"command": "potentials", "model": {"delta_ratio": 3.0}, "potentials": {"kind": "map"},
              "map": {"plane": "xz"}},
    "fig3a": {"command": "potentials", "delta_ratios": [3.0, 1.3], "potentials": {"kind": "well"}},
    "fig3b": {"command": "gauge", "delta_ratios": [3.0, 1.3], "gauge": {"kind": "abelian"}},
    "fig4a": {"command": "bound", "model": {"delta_ratio": 3.0}, "bound": {"M_min": 0, "M_max": 0, "levels": 8}},
    "fig4b": {"command": "bound", "model": {"delta_ratio": 3.0}, "bound": {"M_min": -3, "M_max": 3, "levels": 1}},
    "fig5a": {"command": "potentials", "model": {"delta_ratio": 1.13}, "potentials": {"kind": "states"}},
    "fig5b": {"command": "gauge", "model": {"delta_ratio": 1.13}, "gauge": {"kind": "A1", "rho_min": 1.0, "rho_max": 2.0}},
    "fig5c": {"command": "gauge", "model": {"delta_ratio": 1.13}, "gauge": {"kind": "A2", "rho_min": 1.0, "rho_max": 2.0}},
    "fig5d": {"command": "gauge", "model": {"delta_ratio": 1.13},
              "gauge": {"kind": "commutator", "rho_min": 1.0, "rho_max": 2.0}},
    "fig6": {"command": "dynamics", "model": {"delta_ratio": 1.13, "kappa": 2.8e-6}},
}


class UsageError(Exception):
    pass


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config_file(path: str | Path) -> dict:
    """A RunConfig document, or a run manifest (whose ``config`` is used)."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if isinstance(data, dict) and "manifest_version" in data:
        data = data["config"]
    partial = copy.deepcopy(CONFIG_SCHEMA)
    partial["required"] = []
    try:
        jsonschema.validate(data, partial)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"invalid config {path}: {exc.message}") from exc
    return data


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    file_cfg = load_config_file(args.config) if args.config else {}
    preset = args.preset or file_cfg.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        if PRESETS[preset]["command"] != args.command:
            raise UsageError(f"preset {preset} belongs to the '{PRESETS[preset]['command']}' command")
        cfg = _merge(cfg, PRESETS[preset])
    cfg = _merge(cfg, file_cfg)
    cfg["command"] = args.command
    cfg["preset"] = preset
    flags = {
        ("model", "delta_ratio"): args.delta_ratio,
        ("model", "kappa"): args.kappa,
        ("map", "plane"): args.plane,
        ("dynamics", "rho0"): args.rho0,
        ("dynamics", "dt"): args.dt,
        ("dynamics", "t_end"): args.t_end,
    }
    for (section, key), value in flags.items():
        if value is not None:
            cfg[section][key] = value
    if args.delta_ratio is not None:
        cfg.pop("delta_ratios", None)
    if args.out is not None:
        cfg["out"] = args.out
    cfg["threads"] = args.threads or cfg.get("threads") or os.cpu_count() or 1
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise UsageError(f"invalid configuration at '{path}': {exc.message}") from exc
    return cfg


def _params(cfg: dict, delta_ratio: float | None = None) -> ModelParams:
    m = dict(cfg["model"])
    if delta_ratio is not None:
        m["delta_ratio"] = delta_ratio
    return ModelParams.from_dict(m)


def _delta_ratios(cfg: dict) -> list[float]:
    return list(cfg.get("delta_ratios") or [cfg["model"]["delta_ratio"]])


def _radial(cfg: dict, params: ModelParams):
    r = cfg["radial"]
    scan = ad.track_surfaces(ad.radial_scan(params, (r["rho_min"], r["rho_max"]), r["n"], threads=cfg["threads"]))
    try:
        well = ad.find_well_state(scan)
    except ad.DetectionError:
        # symmetric Stark shifts: the well state leaves through a conical intersection
        well = ad.find_well_state(scan, asymptote=None)
    scan = ad.fix_phases_parallel_transport(scan, scan.nearest_index(well.rho_min))
    return scan, well


def _well_summary(well: ad.WellDescriptor) -> dict:
    return {k: getattr(well, k) for k in ("surface_label", "rho_min", "energy_min", "depth", "asymptote",
                                          "barrier", "rho_barrier")}


SCAN_HEADER = ("delta_ratio", "rho", "z", "phi", "label", "energy")
GAUGE_HEADER = ("delta_ratio", "rho", "z", "phi", "quantity", "real", "imag")


def cmd_potentials(cfg: dict, out: Path, name: str):
    kind = cfg["potentials"]["kind"]
    summary: dict = {}
    if kind == "map":
        params = _params(cfg)
        scan, well = _radial(cfg, params)
        m = cfg["map"]
        pm = ad.potential_map(m["plane"], tuple(m["window"]), params, m["n"], scan, well, threads=cfg["threads"])
        header = ("x", "y" if m["plane"] == "xy" else "z", "energy")
        rows = write_csv(out / f"{name}.csv", header, pm.rows())
        summary["well"] = _well_summary(well)
        summary["map_minimum"] = float(np.nanmin(pm.energy))
        if m["plane"] == "xz":
            summary["angular_half_width_deg"] = ad.angular_half_width(params, scan, well)
        return [(f"{name}.csv", rows)], summary

    def scan_rows():
        for dr in _delta_ratios(cfg):
            params = _params(cfg, dr)
            scan, well = _radial(cfg, params)
            if kind == "well":
                labels = [well.surface_label]
                summary[f"well_{format_value(dr)}"] = _well_summary(well)
            elif kind == "states":
                states = dy.identify_states(scan, well)
                labels = sorted((states.psi1, states.psi2, states.psi3))
                summary[f"states_{format_value(dr)}"] = {
                    "psi1": states.psi1, "psi2": states.psi2, "psi3": states.psi3,
                    "rho_avoided_crossing": states.rho_avoided, "rho_true_crossing": states.rho_crossing,
                }
            else:
                labels = None
            for row in ad.scan_rows(scan, labels):
                yield (dr, *row)

    rows = write_csv(out / f"{name}.csv", SCAN_HEADER, scan_rows())
    return [(f"{name}.csv", rows)], summary


def _gauge_values(kind: str, frame: g.LocalFrame, labels) -> dict[str, complex]:
    if kind == "abelian":
        (w,) = labels
        A = frame.diagonal([w])[:, 0]
        B = np.real(g.curvature_vector(frame, [w])[:, 0, 0])
        a_cyl = g.to_cylindrical(A, frame.position.phi)
        b_cyl = g.to_cylindrical(B, frame.position.phi)
        return {"A_phi": a_cyl[1], "B_rho": b_cyl[0], "B_phi": b_cyl[1], "B_z": b_cyl[2]}
    if kind in ("A1", "A2"):
        k = 0 if kind == "A1" else 1
        A = frame.connection(labels)[k]
        return {f"A{a + 1}{b + 1}_{k + 1}": A[a, b] for a in range(2) for b in range(2)}
    direct, diag = g.commutator_from_frame(frame, labels)
    err = float(np.max(np.abs(np.diag(direct) - diag)))
    if err > g.CONSISTENCY_TOL:
        raise g.ConsistencyError(f"commutator routes disagree by {err:.3g} at {frame.position}")
    return {f"C{a + 1}{b + 1}": direct[a, b] for a in range(2) for b in range(2)}


def cmd_gauge(cfg: dict, out: Path, name: str):
    gc = cfg["gauge"]
    kind = gc["kind"]
    summary: dict = {}

    def rows():
        for dr in _delta_ratios(cfg):
            params = _params(cfg, dr)
            scan, well = _radial(cfg, params)
            if kind == "abelian":
                labels = [well.surface_label]
            else:
                states = dy.identify_states(scan, well)
                labels = [states.psi1, states.psi2]
            summary[f"labels_{format_value(dr)}"] = labels
            for rho in np.linspace(gc["rho_min"], gc["rho_max"], gc["n"]):
                pos = Position(float(rho))
                frame = g.local_frame(pos, params, scan)
                yield from g.gauge_rows(dr, pos, _gauge_values(kind, frame, labels))

    n = write_csv(out / f"{name}.csv", GAUGE_HEADER, rows())
    return [(f"{name}.csv", n)], summary


def cmd_bound(cfg: dict, out: Path, name: str):
    b = cfg["bound"]
    params = _params(cfg)
    scan, well = _radial(cfg, params)
    data = bs.well_data(params, (b["rho_min"], b["rho_max"]), b["n"], scan, well,
                        include_scalar=b["include_scalar"], threads=cfg["threads"])
    Ms = range(b["M_min"], b["M_max"] + 1)
    spectra = bs.solve_ladder(data, params.kappa, sorted(set(Ms) | {0}), b["levels"],
                              b["include_scalar"], cfg["threads"])
    zero = spectra[0].levels[0]
    spectra = {m: spectra[m] for m in Ms}
    rows = [(m, i, float(e), float((e - zero) / params.kappa))
            for m in sorted(spectra) for i, e in enumerate(spectra[m].levels)]
    n = write_csv(out / f"{name}.csv", ("M_mot", "level_index", "energy_hbar_delta", "energy_hbar_OmegaL_rel"), rows)
    summary: dict = {"well": _well_summary(well)}
    if b["levels"] > 1 and 0 in spectra:
        summary["vibrational_spacing"] = spectra[0].spacing
    ground = {m: s.levels[0] for m, s in spectra.items()}
    summary["ground_M"] = min(ground, key=ground.get)
    if 1 in ground and 2 in ground:
        summary["E2_minus_E1_OmegaL"] = float((ground[2] - ground[1]) / params.kappa)
    if "scales" in cfg:
        sc = cfg["scales"]
        if "species" in sc:
            mu = bs.reduced_mass(sc["species"])
        elif "mass_u" in sc:
            mu = sc["mass_u"] * bs.constants.atomic_mass / 2
        else:
            raise UsageError("scales needs 'species' or 'mass_u'")
        summary["scales"] = bs.physical_scales(mu, sc["R0"], sc["delta_abs"]).to_dict()
    return [(f"{name}.csv", n)], summary


def cmd_dynamics(cfg: dict, out: Path, name: str):
    d = cfg["dynamics"]
    params = _params(cfg)
    scan, well = _radial(cfg, params)
    states = dy.identify_states(scan, well)
    start = dy.initial_state(d["rho0"], states.psi2, params, scan)
    traj = dy.run(start, d["t_end"], params, scan, (states.psi1, states.psi2), d["dt"], d["sample_every"],
                  d["allow_long"])
    n = write_csv(out / f"{name}.csv", ("tau", "x", "y", "rho", "P1", "P2", "Psum", "energy"), traj.rows())
    summary = {
        "psi1": states.psi1, "psi2": states.psi2,
        "rho_min_reached": float(traj.rho.min()),
        "final_P1": float(traj.populations[-1, 0]), "final_P2": float(traj.populations[-1, 1]),
        "min_Psum": float(traj.populations.sum(axis=1).min()),
        "energy_drift": float(np.ptp(traj.energies)),
        "domain_exit": None if traj.exit is None else {"time": traj.exit.time, "rho": traj.exit.rho},
    }
    return [(f"{name}.csv", n)], summary


def cmd_verify(cfg: dict, out: Path, name: str):
    results = vf.run_checks(_params(cfg))
    print(vf.format_table(results))
    n = write_csv(out / f"{name}.csv", ("check", "passed", "detail"),
                  ((r.name, r.passed, r.detail) for r in results))
    return [(f"{name}.csv", n)], {"all_passed": all(r.passed for r in results)}


HANDLERS = {
    "potentials": cmd_potentials,
    "gauge": cmd_gauge,
    "bound": cmd_bound,
    "dynamics": cmd_dynamics,
    "verify": cmd_verify,
}


def run(cfg: dict) -> int:
    """Execute a resolved configuration; returns the process exit status."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    name = cfg["preset"] or cfg["command"]
    t0 = time.perf_counter()
    artifacts, summary = HANDLERS[cfg["command"]](cfg, out, name)
    manifest = {
        "manifest_version": 1,
        "config": cfg,
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "artifacts": [{"file": f, "rows": n, "sha256": sha256(out / f)} for f, n in artifacts],
        "summary": summary,
    }
    write_json(out / f"{name}.manifest.json", manifest)
    for f, n in artifacts:
        print(f"wrote {out / f} ({n} rows)")
    if cfg["command"] == "verify":
        return 0 if summary["all_passed"] else 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydgauge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="JSON RunConfig or run manifest")
        p.add_argument("--preset", help=f"figure preset ({', '.join(k for k, v in PRESETS.items() if v['command'] == cmd) or 'none'})")
        p.add_argument("--out", help="output directory (default: current directory)")
        p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        p.add_argument("--delta-ratio", type=float, help="Delta/delta (positive)")
        p.add_argument("--kappa", type=float, help="Omega_L/|delta|")
        p.add_argument("--plane", choices=["xy", "xz"], help="map plane (potentials)")
        p.add_argument("--rho0", type=float, help="initial rho in R0 (dynamics)")
        p.add_argument("--dt", type=float, help="time step in 1/|delta| (dynamics)")
        p.add_argument("--t-end", type=float, help="final time in 1/|delta| (dynamics)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        parser.error(str(exc))
    try:
        return run(cfg)
    except (RydgaugeError, ValueError) as exc:
        print(f"rydgauge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
