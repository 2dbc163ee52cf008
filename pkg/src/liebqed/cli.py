"""Command-line front end: config parsing, subcommands, manifests.

Subcommands: bands, qgt, cls-check, pair-spectrum, evolve, sweep-u.
Configuration is a key=value text file (``#`` starts a comment line);
command-line flags override file values.  Every run writes its data files
atomically plus a ``<command>.manifest.json`` recording the resolved
config, library versions, wall time, and SHA-256 checksums of the data
files.  Data files are byte-identical across reruns of the same config.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bloch import band_structure, refine_band_minimum, band_gap, shifted_k_grid
from .dynamics import (
    fit_linear_origin,
    plateau_stats,
    propagate,
    site_population,
    standard_observers,
    sweep_interaction,
)
from .errors import NumericalError
from .flatband import (
    cls_amplitudes,
    cls_initial_state,
    expected_kernel_dim,
    flatband_kernel,
    two_excitation_flatband_projector,
    valid_cls_centers,
    verify_cls_span,
)
from .hamiltonian import single_excitation_hamiltonian, two_excitation_basis, \
    two_excitation_hamiltonian
from .lattice import HARDCORE, LatticeSpec, build_lattice, build_network
from .pairs import classify_flatband_eigenstates, pair_basis, pair_spectrum, \
    relative_population
from .qgt import _closed_form_arrays, integrate_qgt

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Bad configuration or command line; maps to exit code 1."""


def _parse_u(text):
    if text == HARDCORE:
        return HARDCORE
    try:
        val = float(text)
    except ValueError:
        raise ConfigError(f"u must be a number or '{HARDCORE}', got {text!r}") from None
    return val


def _parse_u_list(text):
    return [_parse_u(tok.strip()) for tok in text.split(",") if tok.strip()]


def _parse_floats(text):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# key -> (converter, default); the single source of truth for RunConfig.
_SCHEMA = {
    "nx": (int, 2),
    "ny": (int, 2),
    "d": (float, 1.0),
    "a": (float, 0.5),
    "k0": (float, math.pi),
    "gamma": (float, 1.0),
    "u": (_parse_u, 0.0),
    "seed": (int, 0),                      # reserved; everything is deterministic
    "threads": (int, 0),                   # 0 = leave BLAS pools alone
    "method": (str, "auto"),
    "tol": (float, 1e-9),
    "krylov_dim": (int, 30),
    "grid": (int, 64),
    "int_grid": (int, 512),
    "qgrid": (int, 16),
    "kpath_points": (int, 40),
    "relpop_at": (str, ""),
    "relpop_branch": (str, "upper"),
    "tmax": (float, 100.0),
    "samples": (int, 400),
    "spacing": (str, "linear"),
    "snapshots": (_parse_floats, []),
    "classify": (_parse_bool, True),
    "r0x": (int, -1),                      # -1 = lattice-center default
    "r0y": (int, -1),
    "u_list": (_parse_u_list, []),
    "exclude_double": (_parse_bool, True),
    "window_scale": (float, 40.0),
    "max_extensions": (int, 3),
    "prominence": (float, 1e-3),
    "sweep_samples": (int, 800),
    "fit_umax": (float, 0.5),
    "plateau_umin": (float, 2.0),
}


def read_config(path) -> dict:
    """Parse a key=value config file; unknown keys are rejected."""
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r}; known keys: "
                + ", ".join(sorted(_SCHEMA)))
        conv = _SCHEMA[key][0]
        try:
            cfg[key] = conv(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return cfg


def resolve_config(args) -> dict:
    """defaults < config file < command-line flags."""
    cfg = {k: default for k, (_, default) in _SCHEMA.items()}
    if args.config:
        cfg.update(read_config(args.config))
    if getattr(args, "cells", None):
        text = args.cells.lower()
        parts = text.split("x")
        if len(parts) == 1:
            parts = [text, text]
        try:
            cfg["nx"], cfg["ny"] = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(f"--cells expects NxM, got {args.cells!r}") from None
    for flag, key in (("U", "u"), ("grid", "grid"), ("method", "method"),
                      ("tol", "tol"), ("threads", "threads"), ("tmax", "tmax"),
                      ("samples", "samples"), ("spacing", "spacing"),
                      ("qgrid", "qgrid"), ("int_grid", "int_grid"),
                      ("u_list", "u_list"), ("snapshots", "snapshots"),
                      ("relpop_at", "relpop_at"), ("relpop_branch", "relpop_branch")):
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    for key in ("grid", "int_grid", "qgrid", "kpath_points", "samples",
                "sweep_samples", "krylov_dim"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be at least 1, got {cfg[key]}")
    return cfg


def _lattice_spec(cfg) -> LatticeSpec:
    try:
        return LatticeSpec(nx=cfg["nx"], ny=cfg["ny"], d=cfg["d"], a=cfg["a"],
                           k0=cfg["k0"], gamma=cfg["gamma"], u=cfg["u"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(x) for x in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: Path, payload: dict):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg: dict, outputs, wall: float):
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": dict(sorted(cfg.items())),
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
            "liebqed": __version__,
        },
        "wall_time_s": wall,
        "outputs": {p.name: {"sha256": _sha256(p), "bytes": p.stat().st_size}
                    for p in outputs},
    }
    write_json(out_dir / f"{command}.manifest.json", manifest)


def _default_center(spec: LatticeSpec, cfg) -> tuple[int, int]:
    rx = cfg["r0x"] if cfg["r0x"] >= 0 else spec.nx // 2
    ry = cfg["r0y"] if cfg["r0y"] >= 0 else spec.ny // 2
    return rx, ry


def _build_problem(spec: LatticeSpec):
    table = build_lattice(spec)
    network = build_network(table)
    h1 = single_excitation_hamiltonian(network, spec)
    return table, network, h1


# ---------------------------------------------------------------- commands

def _cmd_bands(cfg, out_dir: Path):
    spec = _lattice_spec(cfg)
    bs = band_structure(cfg["grid"], spec)
    rows = ((kx, ky, e[0], e[1], e[2])
            for (kx, ky), e in zip(bs.k_grid, bs.energies))
    path = out_dir / "bands.csv"
    write_csv(path, ("kx", "ky", "e1", "e2", "e3"), rows)
    summary = {"max_abs_e2": float(np.abs(bs.energies[:, 1]).max()),
               "min_e3_grid": float(bs.energies[:, 2].min())}
    if spec.chiral:
        start = bs.k_grid[int(np.argmin(bs.energies[:, 2]))]
        _, e_min = refine_band_minimum(spec, start)
        summary["min_e3_refined"] = e_min
        summary["gap_formula"] = band_gap(spec)
    print(f"bands: {cfg['grid']}x{cfg['grid']} grid, max|e2| = {summary['max_abs_e2']:.3e}")
    return [path], summary


def _cmd_qgt(cfg, out_dir: Path, integrate: bool):
    spec = _lattice_spec(cfg)
    spec.require_chiral()
    ks = shifted_k_grid(cfg["grid"], spec)
    kxg, kyg = np.meshgrid(ks, ks, indexing="ij")
    t_xx, t_yy, t_xy = _closed_form_arrays(kxg, kyg, spec)
    rows = zip(kxg.ravel(), kyg.ravel(), t_xx.ravel(), t_yy.ravel(),
               t_xy.real.ravel(), t_xy.imag.ravel(), (-2 * t_xy.imag).ravel())
    path = out_dir / "qgt.csv"
    write_csv(path, ("kx", "ky", "t_xx", "t_yy", "re_txy", "im_txy", "berry"), rows)
    summary = {}
    if integrate:
        ig = integrate_qgt(cfg["int_grid"], spec)
        summary = {"re_txy_integral": ig.re_txy_extrapolated,
                   "im_txy_integral": ig.im_txy_extrapolated,
                   "chern": ig.chern, "grids": list(ig.grid_sizes),
                   "richardson_drift": ig.drift}
        print(f"qgt: Re Txy integral = {ig.re_txy_extrapolated:.10f} "
              f"(target -pi/2 = {-math.pi / 2:.10f}), Chern = {ig.chern}")
    return [path], summary


def _cmd_cls_check(cfg, out_dir: Path):
    spec = _lattice_spec(cfg)
    spec.require_chiral()
    table, _, h1 = _build_problem(spec)
    rows = []
    worst = 0.0
    for r0 in valid_cls_centers(table):
        resid = float(np.linalg.norm(h1 @ cls_amplitudes(r0, table).vector()))
        worst = max(worst, resid)
        rows.append((r0[0], r0[1], resid))
    kernel = flatband_kernel(h1, expected_dim=expected_kernel_dim(spec))
    span = verify_cls_span(kernel, table)
    cls_path = out_dir / "cls.csv"
    write_csv(cls_path, ("r0x", "r0y", "residual"), rows)
    sites_path = out_dir / "sites.csv"
    write_csv(sites_path, ("flat_index", "rx", "ry", "sublattice", "x", "y"),
              table.to_csv_rows())
    summary = {"n_cls": len(rows), "max_residual": worst,
               "kernel_dim": kernel.dim, "expected_kernel_dim": expected_kernel_dim(spec),
               "span_residual": span}
    print(f"cls-check: {len(rows)} states, max residual {worst:.3e}, "
          f"kernel dim {kernel.dim}")
    return [cls_path, sites_path], summary


_KPATH = (((0.0, 0.0), (1.0, 0.0)),    # center -> x edge midpoint, units pi/d
          ((1.0, 0.0), (1.0, 1.0)),    # -> zone corner
          ((1.0, 1.0), (0.0, 0.0)))    # -> back to center


def _cmd_pair_spectrum(cfg, out_dir: Path):
    spec = _lattice_spec(cfg)
    basis = pair_basis(cfg["qgrid"], spec)
    u = cfg["u"] if isinstance(cfg["u"], float) and cfg["u"] > 0 else 1.0
    pts, arcs = [], []
    arc = 0.0
    scale = math.pi / spec.d
    n_seg = cfg["kpath_points"]
    for (ax, ay), (bx, by) in _KPATH:
        seg = np.linspace(0.0, 1.0, n_seg, endpoint=False)
        for s in seg:
            kx = (ax + (bx - ax) * s) * scale
            ky = (ay + (by - ay) * s) * scale
            pts.append((kx, ky))
            arcs.append(arc + s * math.hypot(bx - ax, by - ay) * scale)
        arc += math.hypot(bx - ax, by - ay) * scale
    pts.append((0.0, 0.0))
    arcs.append(arc)
    ps = pair_spectrum(np.array(pts), basis, u, spec, drop_singular=True)
    rows = ((s, k[0], k[1], dark, lo, up) for s, k, dark, lo, up in
            zip(arcs, ps.k_points, ps.dark_counts, ps.lower, ps.upper))
    path = out_dir / "pair_spectrum.csv"
    write_csv(path, ("arc", "kx", "ky", "dark_count", "lower", "upper"), rows)
    outputs = [path]
    summary = {"u": u, "qgrid": cfg["qgrid"],
               "basis_size": len(basis),
               "dark_count_min": int(ps.dark_counts.min()),
               "dark_count_max": int(ps.dark_counts.max()),
               "ambiguous_points": len(ps.flags or [])}
    if cfg["relpop_at"]:
        try:
            kx, ky = (float(t) for t in cfg["relpop_at"].split(","))
        except ValueError:
            raise ConfigError(
                f"relpop_at expects 'kx,ky', got {cfg['relpop_at']!r}") from None
        rp = relative_population((kx, ky), cfg["relpop_branch"], basis, spec, u=u)
        rp_path = out_dir / "relative_population.json"
        write_json(rp_path, {
            "schema_version": SCHEMA_VERSION,
            "K": [kx, ky], "branch": cfg["relpop_branch"], "u": u,
            "branch_energy": rp["branch_energy"],
            "cell_offsets": [int(v) for v in rp["cells"]],
            "by_sublattice": {b: w.tolist() for b, w in rp["by_sublattice"].items()},
            "cell_map": rp["cell_map"].tolist(),
        })
        outputs.append(rp_path)
    print(f"pair-spectrum: {len(pts)} K points, dark counts "
          f"{summary['dark_count_min']}..{summary['dark_count_max']} "
          f"(basis {len(basis)})")
    return outputs, summary


def _evolution_times(cfg):
    if cfg["spacing"] == "linear":
        return np.linspace(0.0, cfg["tmax"], cfg["samples"] + 1)[1:]
    if cfg["spacing"] == "log":
        start = math.log10(max(cfg["tmax"] * 1e-4, 1e-6))
        return np.logspace(start, math.log10(cfg["tmax"]), cfg["samples"])
    raise ConfigError(f"spacing must be linear or log, got {cfg['spacing']!r}")


def _cmd_evolve(cfg, out_dir: Path):
    spec = _lattice_spec(cfg)
    table, _, h1 = _build_problem(spec)
    statistics = HARDCORE if spec.hardcore else "softcore"
    basis = two_excitation_basis(len(table), statistics)
    h2 = two_excitation_hamiltonian(h1, spec, basis)
    r0 = _default_center(spec, cfg)
    psi0 = cls_initial_state(r0, (r0[0] + 1, r0[1]), table, basis)
    projector = classification = None
    if cfg["classify"]:
        kernel = flatband_kernel(h1, expected_dim=expected_kernel_dim(spec))
        projector = two_excitation_flatband_projector(kernel, basis)
        u_for_modes = spec.gamma if spec.hardcore else max(float(spec.u), 1e-12)
        classification = classify_flatband_eigenstates(projector, u_for_modes)
    observers = standard_observers(psi0, projector, classification)
    times = _evolution_times(cfg)
    trace = propagate(h2, psi0, times, method=cfg["method"], tol=cfg["tol"],
                      krylov_dim=cfg["krylov_dim"], keep_states=False,
                      observers=observers)
    header = ["t"] + list(trace.records)
    rows = zip(times, *(trace.records[name] for name in trace.records))
    path = out_dir / "evolve.csv"
    write_csv(path, header, rows)
    outputs = [path]
    if cfg["snapshots"]:
        snap_times = np.array(sorted(cfg["snapshots"]))
        snap = propagate(h2, psi0, snap_times, method=cfg["method"], tol=cfg["tol"],
                         krylov_dim=cfg["krylov_dim"])
        header = ["flat_index", "rx", "ry", "sublattice", "x", "y"] \
            + [f"t={_fmt(t)}" for t in snap_times]
        pops = np.column_stack([site_population(s, basis) for s in snap.states])
        rows = (tuple(site) + tuple(pop)
                for site, pop in zip(table.to_csv_rows(), pops))
        snap_path = out_dir / "populations.csv"
        write_csv(snap_path, header, rows)
        outputs.append(snap_path)
    summary = {"r0": list(r0), "statistics": statistics,
               "propagator": {k: v for k, v in trace.info.items()
                              if isinstance(v, (int, float, str))},
               "final_norm": float(trace.records["norm"][-1]),
               "final_fidelity": float(trace.records["fidelity"][-1])}
    print(f"evolve: {len(times)} samples to t={cfg['tmax']:g}, "
          f"final norm {summary['final_norm']:.6f}")
    return outputs, summary


def _cmd_sweep_u(cfg, out_dir: Path):
    if not cfg["u_list"]:
        raise ConfigError("sweep-u requires u_list (config) or --u-list")
    spec = _lattice_spec(cfg)
    r0 = _default_center(spec, cfg)
    result = sweep_interaction(cfg["u_list"], spec, r0, method=cfg["method"],
                               n_samples=cfg["sweep_samples"],
                               window_scale=cfg["window_scale"],
                               max_extensions=cfg["max_extensions"],
                               tol=cfg["tol"], krylov_dim=cfg["krylov_dim"],
                               prominence=cfg["prominence"],
                               exclude_double=cfg["exclude_double"])
    rows = list(result.as_rows())
    path = out_dir / "sweep.csv"
    write_csv(path, rows[0], rows[1:])
    outputs = [path]
    summary = {"n_runs": len(result.entries),
               "failed": [str(e["u"]) for e in result.entries
                          if e.get("status") != "ok"]}
    linear = [(float(e["u"]), e["omega0"]) for e in result.entries
              if e.get("status") == "ok" and e["u"] != HARDCORE
              and float(e["u"]) <= cfg["fit_umax"] * spec.gamma]
    if len(linear) >= 2:
        us, ws = zip(*linear)
        summary["linear_fit"] = fit_linear_origin(us, ws)
    plateau = [e["omega0"] for e in result.entries
               if e.get("status") == "ok"
               and (e["u"] == HARDCORE or float(e["u"]) >= cfg["plateau_umin"] * spec.gamma)]
    if len(plateau) >= 2:
        summary["plateau"] = plateau_stats(plateau)
    fit_path = out_dir / "sweep_fit.json"
    write_json(fit_path, {"schema_version": SCHEMA_VERSION, **summary})
    outputs.append(fit_path)
    for e in result.entries:
        tag = f"omega0={e['omega0']:.6g}" if e.get("status") == "ok" \
            else f"FAILED: {e.get('message', '?')}"
        print(f"sweep-u: u={e['u']} [{e['statistics']}] {tag}")
    return outputs, summary


# ---------------------------------------------------------------- dispatch

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="liebqed",
                     description="Waveguide-lattice flat bands and bound-pair transport")
    parser.add_argument("--version", action="version", version=f"liebqed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--cells", help="lattice size NxM (e.g. 8x8)")
        p.add_argument("--U", type=_parse_u, dest="U",
                       help=f"on-site interaction (number or '{HARDCORE}')")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, help="cap BLAS/LAPACK threads")

    p = sub.add_parser("bands", help="band structure over the Brillouin zone")
    common(p)
    p.add_argument("--grid", type=int, help="BZ grid size per axis")

    p = sub.add_parser("qgt", help="quantum geometric tensor maps and integrals")
    common(p)
    p.add_argument("--grid", type=int, help="BZ grid size for the map")
    p.add_argument("--int-grid", type=int, dest="int_grid",
                   help="coarse grid for the Richardson-extrapolated integral")
    p.add_argument("--integrate", action="store_true",
                   help="also compute BZ integrals of the tensor")

    p = sub.add_parser("cls-check", help="compact-localized-state darkness audit")
    common(p)

    p = sub.add_parser("pair-spectrum", help="bound-pair branches along a BZ path")
    common(p)
    p.add_argument("--qgrid", type=int, help="relative-momentum grid size")
    p.add_argument("--relpop-at", dest="relpop_at", help="'kx,ky' for a population map")
    p.add_argument("--relpop-branch", dest="relpop_branch", choices=("upper", "lower"))

    p = sub.add_parser("evolve", help="real-time two-excitation dynamics")
    common(p)
    p.add_argument("--tmax", type=float, help="final time (units 1/gamma)")
    p.add_argument("--samples", type=int, help="number of output times")
    p.add_argument("--spacing", choices=("linear", "log"))
    p.add_argument("--method", choices=("auto", "krylov", "dense_eig"))
    p.add_argument("--tol", type=float, help="propagator accuracy target")
    p.add_argument("--snapshots", type=_parse_floats,
                   help="comma-separated times for site-population snapshots")

    p = sub.add_parser("sweep-u", help="oscillation frequency vs interaction")
    common(p)
    p.add_argument("--u-list", type=_parse_u_list, dest="u_list",
                   help=f"comma-separated interactions, e.g. '0.05,0.1,{HARDCORE}'")
    p.add_argument("--method", choices=("auto", "krylov", "dense_eig"))
    p.add_argument("--tol", type=float)
    return parser


_COMMANDS = {
    "bands": lambda cfg, out: _cmd_bands(cfg, out),
    "cls-check": lambda cfg, out: _cmd_cls_check(cfg, out),
    "pair-spectrum": lambda cfg, out: _cmd_pair_spectrum(cfg, out),
    "evolve": lambda cfg, out: _cmd_evolve(cfg, out),
    "sweep-u": lambda cfg, out: _cmd_sweep_u(cfg, out),
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        out_dir = Path(getattr(args, "out", "."))
        out_dir.mkdir(parents=True, exist_ok=True)
        limits = None
        if cfg["threads"] > 0:
            import threadpoolctl
            limits = threadpoolctl.threadpool_limits(limits=cfg["threads"])
        start = time.perf_counter()
        try:
            if args.command == "qgt":
                outputs, summary = _cmd_qgt(cfg, out_dir, args.integrate)
            else:
                outputs, summary = _COMMANDS[args.command](cfg, out_dir)
        finally:
            if limits is not None:
                limits.unregister()
        wall = time.perf_counter() - start
        if summary:
            sum_path = out_dir / f"{args.command}.summary.json"
            write_json(sum_path, {"schema_version": SCHEMA_VERSION, **summary})
            outputs.append(sum_path)
        _write_manifest(out_dir, args.command, cfg, outputs, wall)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
