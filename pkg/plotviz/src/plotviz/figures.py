"""Render figures from the simulation CLI's output files.

Five figure kinds are supported, one per output family:

  bands          3D surfaces of the three single-excitation sheets (bands.csv)
  qgt            six-panel map of the geometric-tensor components (qgt.csv,
                 optional qgt.summary.json for the integrals panel)
  pair-spectrum  bound-pair branches along the symmetry path
                 (pair_spectrum.csv, optional relative_population.json)
  evolve         observable traces vs time (evolve.csv, optional
                 populations.csv for lattice snapshots)
  sweep          oscillation frequency vs interaction on log-log axes
                 (sweep.csv, optional sweep_fit.json for guide lines)

This package is a pure consumer: every number that appears in a figure is
read from the input files, never recomputed.  Inputs are validated before
any drawing happens — JSON files must carry the supported schema version,
CSV files must contain the columns the figure kind needs.
"""

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__version__ = "0.1.0"

SCHEMA_VERSION = 1


class RecipeError(ValueError):
    """Malformed recipe or style file, unknown kind, unusable input path."""


class SchemaError(RecipeError):
    """Input file exists but its schema does not match what the kind needs."""


# Required CSV columns per (kind, input role).  Extra columns are tolerated;
# missing ones are an error.
_REQUIRED = {
    ("bands", "bands"): ("kx", "ky", "e1", "e2", "e3"),
    ("qgt", "qgt"): ("kx", "ky", "t_xx", "t_yy", "re_txy", "im_txy", "berry"),
    ("pair-spectrum", "spectrum"): ("arc", "kx", "ky", "dark_count", "lower", "upper"),
    ("evolve", "trace"): ("t", "norm", "fidelity"),
    ("evolve", "populations"): ("flat_index", "rx", "ry", "sublattice", "x", "y"),
    ("sweep", "sweep"): ("u", "statistics", "omega0", "t_min", "window",
                         "extensions", "status"),
}

_ROLES = {
    "bands": {"required": ("bands",), "optional": ()},
    "qgt": {"required": ("qgt",), "optional": ("summary",)},
    "pair-spectrum": {"required": ("spectrum",), "optional": ("relative_population",)},
    "evolve": {"required": ("trace",), "optional": ("populations",)},
    "sweep": {"required": ("sweep",), "optional": ("fit",)},
}

_OPTIONS = {
    "bands": {"elev", "azim"},
    "qgt": set(),
    "pair-spectrum": set(),
    "evolve": {"xscale", "yscale"},
    "sweep": set(),
}

DEFAULT_STYLE = {
    "dpi": 110,
    "font_size": 9.0,
    "line_width": 1.4,
    "cmap": "RdBu_r",            # diverging maps (signed tensor components)
    "sequential_cmap": "viridis",  # non-negative maps and band sheets
    "figsize_scale": 1.0,
}


@dataclass(frozen=True)
class FigureRecipe:
    kind: str
    inputs: dict
    output: Path
    options: dict = field(default_factory=dict)


# ------------------------------------------------------------------ loading

def load_recipe(path) -> FigureRecipe:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RecipeError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise RecipeError(f"{path}: recipe must be a JSON object")
    version = payload.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: recipe schema version {version!r}, "
                          f"this tool reads version {SCHEMA_VERSION}")
    unknown = set(payload) - {"schema_version", "kind", "inputs", "output", "options"}
    if unknown:
        raise RecipeError(f"{path}: unknown recipe keys {sorted(unknown)}")
    kind = payload.get("kind")
    if kind not in _ROLES:
        raise RecipeError(f"{path}: kind must be one of {sorted(_ROLES)}, "
                          f"got {kind!r}")
    inputs = payload.get("inputs")
    if not isinstance(inputs, dict):
        raise RecipeError(f"{path}: 'inputs' must be an object mapping "
                          "role names to file paths")
    roles = _ROLES[kind]
    allowed = set(roles["required"]) | set(roles["optional"])
    bad = set(inputs) - allowed
    if bad:
        raise RecipeError(f"{path}: kind {kind!r} does not take inputs "
                          f"{sorted(bad)}; allowed: {sorted(allowed)}")
    missing = [r for r in roles["required"] if r not in inputs]
    if missing:
        raise RecipeError(f"{path}: kind {kind!r} needs inputs {missing}")
    # Relative paths in the recipe resolve against the recipe's own directory,
    # so a recipe can live next to the run it describes.
    base = path.parent
    resolved = {}
    for role, p in inputs.items():
        fp = base / Path(p)
        if not fp.is_file():
            raise RecipeError(f"{path}: input {role!r} not found: {fp}")
        resolved[role] = fp
    if "output" not in payload:
        raise RecipeError(f"{path}: recipe needs an 'output' image path")
    output = base / Path(payload["output"])
    options = payload.get("options", {})
    if not isinstance(options, dict):
        raise RecipeError(f"{path}: 'options' must be an object")
    bad = set(options) - _OPTIONS[kind]
    if bad:
        raise RecipeError(f"{path}: kind {kind!r} does not take options "
                          f"{sorted(bad)}; allowed: {sorted(_OPTIONS[kind])}")
    return FigureRecipe(kind=kind, inputs=resolved, output=output, options=options)


def load_style(path=None) -> dict:
    style = dict(DEFAULT_STYLE)
    if path is None:
        return style
    path = Path(path)
    try:
        overrides = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RecipeError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(overrides, dict):
        raise RecipeError(f"{path}: style must be a JSON object")
    unknown = set(overrides) - set(DEFAULT_STYLE)
    if unknown:
        raise RecipeError(f"{path}: unknown style keys {sorted(unknown)}; "
                          f"known: {sorted(DEFAULT_STYLE)}")
    style.update(overrides)
    for key in ("cmap", "sequential_cmap"):
        if style[key] not in plt.colormaps():
            raise RecipeError(f"{path}: unknown colormap {style[key]!r}")
    for key in ("dpi", "font_size", "line_width", "figsize_scale"):
        if not isinstance(style[key], (int, float)) or style[key] <= 0:
            raise RecipeError(f"{path}: {key} must be a positive number")
    return style


def _read_csv(path: Path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows) < 2:
        raise SchemaError(f"{path}: no data rows")
    header = rows[0]
    if any(len(r) != len(header) for r in rows[1:]):
        raise SchemaError(f"{path}: ragged rows do not match the header")
    cols = {}
    for j, name in enumerate(header):
        raw = [r[j] for r in rows[1:]]
        try:
            cols[name] = np.array([float(v) for v in raw])
        except ValueError:
            cols[name] = np.array(raw, dtype=object)
    return cols


def _read_json(path: Path) -> dict:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema version {version!r}, "
                          f"this tool reads version {SCHEMA_VERSION}")
    return payload


def _require(cols: dict, names, path: Path):
    missing = [n for n in names if n not in cols]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")


def _require_keys(payload: dict, names, path: Path):
    missing = [n for n in names if n not in payload]
    if missing:
        raise SchemaError(f"{path}: missing keys {missing}")


def _square_grids(cols: dict, names, path: Path) -> dict:
    n = math.isqrt(len(cols[names[0]]))
    if n * n != len(cols[names[0]]):
        raise SchemaError(f"{path}: {len(cols[names[0]])} rows do not form "
                          "a square k grid")
    return {name: np.asarray(cols[name], dtype=float).reshape(n, n)
            for name in names}


def _maybe_float(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


# ---------------------------------------------------------------- renderers

def _fig_bands(recipe, style):
    path = recipe.inputs["bands"]
    cols = _read_csv(path)
    _require(cols, _REQUIRED[("bands", "bands")], path)
    g = _square_grids(cols, ("kx", "ky", "e1", "e2", "e3"), path)
    n = g["kx"].shape[0]
    s = style["figsize_scale"]
    fig = plt.figure(figsize=(6.8 * s, 5.4 * s))
    ax = fig.add_subplot(projection="3d")
    surf = dict(rcount=n, ccount=n, linewidth=0, antialiased=False)
    ax.plot_surface(g["kx"], g["ky"], g["e1"],
                    cmap=style["sequential_cmap"], alpha=0.85, **surf)
    ax.plot_surface(g["kx"], g["ky"], g["e3"],
                    cmap=style["sequential_cmap"], alpha=0.85, **surf)
    # the middle sheet gets a single solid color so its flatness stands out
    ax.plot_surface(g["kx"], g["ky"], g["e2"], color="crimson", **surf)
    ax.set_xlabel("$k_x$")
    ax.set_ylabel("$k_y$")
    ax.set_zlabel("energy")
    ax.view_init(elev=float(recipe.options.get("elev", 20.0)),
                 azim=float(recipe.options.get("azim", -55.0)))
    return fig


def _heatmap(ax, kx, ky, data, label, style):
    lo, hi = float(data.min()), float(data.max())
    if lo < 0.0 < hi:
        vmax = max(abs(lo), abs(hi))
        kw = dict(cmap=style["cmap"], vmin=-vmax, vmax=vmax)
    else:
        kw = dict(cmap=style["sequential_cmap"])
    pcm = ax.pcolormesh(kx, ky, data, shading="nearest", rasterized=True, **kw)
    ax.set_title(label)
    ax.set_xlabel("$k_x$")
    ax.set_ylabel("$k_y$")
    ax.set_aspect("equal")
    return pcm


def _fig_qgt(recipe, style):
    path = recipe.inputs["qgt"]
    cols = _read_csv(path)
    _require(cols, _REQUIRED[("qgt", "qgt")], path)
    names = ("kx", "ky", "t_xx", "t_yy", "re_txy", "im_txy", "berry")
    g = _square_grids(cols, names, path)
    s = style["figsize_scale"]
    fig, axes = plt.subplots(2, 3, figsize=(10.2 * s, 6.2 * s), layout="constrained")
    panels = (("t_xx", "$T_{xx}$"),
              ("t_yy", "$T_{yy}$"),
              ("re_txy", r"$\mathrm{Re}\,T_{xy}$"),
              ("im_txy", r"$\mathrm{Im}\,T_{xy}$"),
              ("berry", "Berry curvature"))
    for ax, (name, label) in zip(axes.flat, panels):
        pcm = _heatmap(ax, g["kx"], g["ky"], g[name], label, style)
        fig.colorbar(pcm, ax=ax, shrink=0.85)
    # the sixth panel reports the Brillouin-zone integrals when the run
    # produced them; every number shown is read from the summary file
    ax = axes.flat[5]
    ax.axis("off")
    if "summary" in recipe.inputs:
        summary = _read_json(recipe.inputs["summary"])
        _require_keys(summary, ("re_txy_integral", "im_txy_integral", "chern"),
                      recipe.inputs["summary"])
        lines = [r"$\int \mathrm{Re}\,T_{xy}\,d^2k$ = "
                 f"{summary['re_txy_integral']:.6f}",
                 r"$\int \mathrm{Im}\,T_{xy}\,d^2k$ = "
                 f"{summary['im_txy_integral']:.2e}",
                 f"Chern number = {summary['chern']}"]
        if "richardson_drift" in summary:
            lines.append(f"refinement drift = {summary['richardson_drift']:.2e}")
        ax.text(0.02, 0.9, "\n".join(lines), transform=ax.transAxes,
                va="top", family="monospace")
    return fig


_PATH_LABELS = (r"$\Gamma$", "X", "M", r"$\Gamma$")


def _fig_pair_spectrum(recipe, style):
    path = recipe.inputs["spectrum"]
    cols = _read_csv(path)
    _require(cols, _REQUIRED[("pair-spectrum", "spectrum")], path)
    relpop = None
    if "relative_population" in recipe.inputs:
        relpop = _read_json(recipe.inputs["relative_population"])
        _require_keys(relpop, ("K", "branch", "branch_energy", "cell_offsets",
                               "cell_map"), recipe.inputs["relative_population"])
    s = style["figsize_scale"]
    if relpop is None:
        fig, ax = plt.subplots(figsize=(6.4 * s, 4.4 * s), layout="constrained")
    else:
        fig, (ax, ax2) = plt.subplots(
            1, 2, figsize=(10.4 * s, 4.4 * s), layout="constrained",
            width_ratios=(1.5, 1.0))
    arc = np.asarray(cols["arc"], dtype=float)
    ax.plot(arc, cols["lower"], label="lower branch")
    ax.plot(arc, cols["upper"], label="upper branch")
    # the sampled path is three equal-count segments plus a closing point;
    # put the symmetry-point labels on the segment boundaries
    if (len(arc) - 1) % 3 == 0 and len(arc) > 3:
        seg = (len(arc) - 1) // 3
        ticks = [arc[0], arc[seg], arc[2 * seg], arc[-1]]
        ax.set_xticks(ticks, _PATH_LABELS)
        for t in ticks[1:-1]:
            ax.axvline(t, color="0.75", linewidth=0.7, zorder=0)
    ax.set_ylabel("pair energy")
    ax.legend()
    if relpop is not None:
        offsets = np.asarray(relpop["cell_offsets"], dtype=int)
        cell_map = np.asarray(relpop["cell_map"], dtype=float)
        if cell_map.shape != (len(offsets), len(offsets)):
            raise SchemaError(f"{recipe.inputs['relative_population']}: "
                              "cell_map shape does not match cell_offsets")
        order = np.argsort(offsets)
        sorted_map = cell_map[np.ix_(order, order)]
        half = 0.5
        extent = (offsets.min() - half, offsets.max() + half,
                  offsets.min() - half, offsets.max() + half)
        img = ax2.imshow(sorted_map.T, origin="lower", extent=extent,
                         cmap=style["sequential_cmap"], interpolation="nearest")
        fig.colorbar(img, ax=ax2, shrink=0.85)
        kx, ky = relpop["K"]
        ax2.set_title(f"{relpop['branch']} branch at K=({kx:.3g}, {ky:.3g}), "
                      f"E={relpop['branch_energy']:.4g}", fontsize="medium")
        ax2.set_xlabel("cell offset x")
        ax2.set_ylabel("cell offset y")
    return fig


def _fig_evolve(recipe, style):
    path = recipe.inputs["trace"]
    cols = _read_csv(path)
    _require(cols, _REQUIRED[("evolve", "trace")], path)
    xscale = recipe.options.get("xscale", "linear")
    yscale = recipe.options.get("yscale", "linear")
    for name, value in (("xscale", xscale), ("yscale", yscale)):
        if value not in ("linear", "log"):
            raise RecipeError(f"option {name} must be 'linear' or 'log', "
                              f"got {value!r}")
    pops = None
    if "populations" in recipe.inputs:
        pops = _read_csv(recipe.inputs["populations"])
        _require(pops, _REQUIRED[("evolve", "populations")],
                 recipe.inputs["populations"])
        snap_names = [n for n in pops if n.startswith("t=")]
        if not snap_names:
            raise SchemaError(f"{recipe.inputs['populations']}: no snapshot "
                              "columns (expected headers like 't=1.5')")
    s = style["figsize_scale"]
    if pops is None:
        fig, ax = plt.subplots(figsize=(6.8 * s, 4.2 * s), layout="constrained")
    else:
        fig = plt.figure(figsize=(6.8 * s, 6.4 * s), layout="constrained")
        gs = fig.add_gridspec(2, len(snap_names), height_ratios=(1.5, 1.0))
        ax = fig.add_subplot(gs[0, :])
    t = np.asarray(cols["t"], dtype=float)
    for name, values in cols.items():
        if name == "t":
            continue
        ax.plot(t, np.asarray(values, dtype=float), label=name)
    ax.set_xscale(xscale)
    ax.set_yscale(yscale)
    ax.set_xlabel("t")
    ax.legend(ncols=2, fontsize="small")
    if pops is not None:
        x = np.asarray(pops["x"], dtype=float)
        y = np.asarray(pops["y"], dtype=float)
        vmax = max(float(np.asarray(pops[n], dtype=float).max())
                   for n in snap_names) or 1.0
        for i, name in enumerate(snap_names):
            axs = fig.add_subplot(gs[1, i])
            sc = axs.scatter(x, y, c=np.asarray(pops[name], dtype=float),
                             cmap=style["sequential_cmap"], vmin=0.0,
                             vmax=vmax, s=28.0)
            axs.set_title(name, fontsize="medium")
            axs.set_aspect("equal")
            axs.set_xticks(())
            axs.set_yticks(())
        fig.colorbar(sc, ax=fig.axes[-len(snap_names):], shrink=0.8)
    return fig


def _fig_sweep(recipe, style):
    path = recipe.inputs["sweep"]
    cols = _read_csv(path)
    _require(cols, _REQUIRED[("sweep", "sweep")], path)
    fit = None
    if "fit" in recipe.inputs:
        fit = _read_json(recipe.inputs["fit"])
    s = style["figsize_scale"]
    fig, ax = plt.subplots(figsize=(6.2 * s, 4.6 * s), layout="constrained")
    us, ws = [], []
    for u, omega, status in zip(cols["u"], cols["omega0"], cols["status"]):
        if str(status) != "ok":
            continue
        uf, wf = _maybe_float(u), _maybe_float(omega)
        if uf is None:
            if wf is not None:  # statistics without a coupling scale
                ax.axhline(wf, color="0.35", linestyle="--", linewidth=1.1,
                           label=f"hardcore limit ({wf:.3g})")
            continue
        if wf is not None:
            us.append(uf)
            ws.append(wf)
    if us:
        ax.plot(us, ws, "o", color="tab:blue", label=r"measured $\omega_0$")
    if fit is not None and "linear_fit" in fit and us:
        alpha = float(fit["linear_fit"]["alpha"])
        uu = np.array([min(us), max(us)])
        ax.plot(uu, alpha * uu, linestyle=":", color="tab:red",
                label=rf"$\omega_0 = {alpha:.3g}\,U$")
    if fit is not None and "plateau" in fit:
        ax.axhline(float(fit["plateau"]["mean"]), color="tab:green",
                   linestyle=":", linewidth=1.1,
                   label=f"plateau mean ({fit['plateau']['mean']:.3g})")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("U")
    ax.set_ylabel(r"$\omega_0$")
    ax.legend(fontsize="small")
    return fig


_RENDERERS = {
    "bands": _fig_bands,
    "qgt": _fig_qgt,
    "pair-spectrum": _fig_pair_spectrum,
    "evolve": _fig_evolve,
    "sweep": _fig_sweep,
}


def render(recipe: FigureRecipe, style: dict = None) -> Path:
    """Draw the recipe's figure and write it to the recipe's output path.

    The same recipe, input files and style produce byte-identical PNG
    output.  Returns the written path.
    """
    style = dict(DEFAULT_STYLE) if style is None else {**DEFAULT_STYLE, **style}
    rc = {"font.size": style["font_size"],
          "lines.linewidth": style["line_width"],
          "axes.grid": False,
          "figure.dpi": style["dpi"]}
    with matplotlib.rc_context(rc):
        fig = _RENDERERS[recipe.kind](recipe, style)
        out = recipe.output
        out.parent.mkdir(parents=True, exist_ok=True)
        save = {"dpi": style["dpi"]}
        if out.suffix.lower() == ".png":
            save["metadata"] = {"Software": f"plotviz {__version__}"}
        elif out.suffix.lower() == ".pdf":
            save["metadata"] = {"CreationDate": None}
        try:
            fig.savefig(out, **save)
        finally:
            plt.close(fig)
    return out


# ---------------------------------------------------------------------- CLI

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise RecipeError(message)


def _build_parser():
    parser = _Parser(prog="plotviz",
                     description="Render figures from simulation output files")
    parser.add_argument("--version", action="version",
                        version=f"plotviz {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render the figure a recipe describes")
    p.add_argument("recipe", help="recipe JSON file")
    p.add_argument("--style", default=None,
                   help="JSON file overriding default style keys")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        recipe = load_recipe(args.recipe)
        style = load_style(args.style)
        out = render(recipe, style)
    except RecipeError as exc:
        print(f"plotviz: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"plotviz: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # drawing failure on validated inputs
        print(f"plotviz: render failure: {exc}", file=sys.stderr)
        return 2
    print(f"render: {recipe.kind} -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
