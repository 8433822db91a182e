"""Batch command-line front end: one subcommand per standard figure plus
generic single-run and sweep commands.

Recipes resolve from three layers: documented per-figure defaults, then a
flat JSON config file, then command-line flags (flags win). The resolved
recipe is echoed into a manifest next to the outputs; feeding that manifest
back as the config reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from pathlib import Path

from . import __version__
from . import experiments as xp
from .collision import InvariantViolation
from .io import render_heatmap, write_diagram, write_manifest, write_series
from .lindblad import IntegrationAbort
from .measures import DegenerateNormalizationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class RecipeError(ValueError):
    """A recipe key is unknown, ill-typed, or out of range."""


_ME_GRID = dict(
    engine="master_eq",
    x_name="omega1",
    x_values=(0.5, 0.7, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2, 1.3, 1.4, 1.5),
    y_name="lam",
    y_values=(0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10),
    gamma0=0.01,
    spectrum="flat",
    gamma_lf=0.0,
    t_end=1500.0,
    window=3000,
    overlap=2400,
)

_CM_LAM_AXIS = (0.02, 0.04, 0.05, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20)
_CM_RATIO_AXIS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5)
_CM_SWAP_AXIS = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50)

FIGURE_DEFAULTS: dict[str, dict] = {
    "fig1": dict(_ME_GRID),
    "fig2": dict(
        _ME_GRID,
        engine="master_eq_hybrid",
        spectrum="ohmic",
        gamma_lf=0.05,
        gamma0_values=(0.01, 0.001),
    ),
    "fig4": dict(
        engine="collision",
        x_name="ratio",
        x_values=_CM_RATIO_AXIS,
        y_name="lam",
        y_values=_CM_LAM_AXIS,
        swap_values=(0.0, 0.25, 0.5),
        window=250,
        overlap=200,
    ),
    "fig5": dict(
        engine="collision",
        x_name="swap",
        x_values=_CM_SWAP_AXIS,
        y_name="lam",
        y_values=_CM_LAM_AXIS,
        ratio_values=(1.05, 1.10, 1.20),
        window=250,
        overlap=200,
    ),
    "fig6": dict(
        engine="collision",
        x_name="ratio",
        x_values=_CM_RATIO_AXIS,
        y_name="swap",
        y_values=_CM_SWAP_AXIS,
        lam=0.1,
        window=250,
        overlap=200,
    ),
    "fig7": dict(
        engine="collision",
        ratio_values=(1.05, 1.10, 1.20),
        swap_values=(0.0, 0.25, 0.5),
        omega1=1.20,
        lam=0.1,
        window=200,
        overlap=150,
    ),
    "fig8": dict(
        engine="collision",
        x_name="ratio",
        x_values=_CM_RATIO_AXIS,
        y_name="swap",
        y_values=_CM_SWAP_AXIS,
        lam=0.1,
        window=250,
        overlap=200,
    ),
    "me-run": dict(
        engine="master_eq", omega1=1.05, lam=0.05, gamma0=0.01, t_end=500.0,
        window=1000, overlap=800,
    ),
    "cm-run": dict(
        engine="collision", omega1=1.20, lam=0.1, window=250, overlap=200,
    ),
    "sweep": dict(engine="master_eq", x_values=(), y_values=()),
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(xp.ExperimentRecipe)}
_TUPLE_KEYS = {
    "x_values", "y_values", "gamma0_values", "swap_values", "ratio_values",
}
_INT_KEYS = {"sample_stride", "n_collisions", "window", "overlap", "workers"}
_FLOAT_KEYS = {
    "omega1", "lam", "swap_strength", "gamma0", "gamma_lf", "t_end", "step_h",
}
_STR_KEYS = {"engine", "x_name", "y_name", "spectrum", "outdir"}
_BOOL_KEYS = {"heatmap"}
_ALL_KEYS = _TUPLE_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _BOOL_KEYS


def _coerce(key: str, value) -> object:
    try:
        if key in _TUPLE_KEYS:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            return tuple(float(v) for v in value)
        if key in _INT_KEYS:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError("not an integer")
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _BOOL_KEYS:
            if isinstance(value, bool):
                return value
            raise ValueError("expected true/false")
        return str(value)
    except (TypeError, ValueError) as exc:
        raise RecipeError(f"key {key!r}: cannot interpret {value!r} ({exc})") from exc


def _validate(recipe: xp.ExperimentRecipe) -> xp.ExperimentRecipe:
    def bad(key, why):
        raise RecipeError(f"key {key!r}: {why}")

    if recipe.engine not in ("master_eq", "master_eq_hybrid", "collision"):
        bad("engine", f"unknown engine {recipe.engine!r}")
    if recipe.spectrum not in ("flat", "ohmic"):
        bad("spectrum", f"unknown spectrum {recipe.spectrum!r}")
    for key in ("gamma0", "gamma_lf", "lam"):
        if getattr(recipe, key) < 0:
            bad(key, f"must be nonnegative, got {getattr(recipe, key)}")
    for key, seq in (("swap_values", recipe.swap_values), ("swap_strength", (recipe.swap_strength,))):
        for v in seq:
            if not 0.0 <= v <= math.pi / 2:
                bad(key, f"swap strength {v} outside [0, pi/2]")
    for key in ("t_end", "step_h"):
        if getattr(recipe, key) <= 0:
            bad(key, "must be positive")
    for key in ("sample_stride", "n_collisions", "window", "workers"):
        if getattr(recipe, key) < 1:
            bad(key, "must be at least 1")
    if not 0 <= recipe.overlap < recipe.window:
        bad("overlap", f"must satisfy 0 <= overlap < window, got {recipe.overlap}")
    for key, values in (("x_values", recipe.x_values), ("y_values", recipe.y_values)):
        for v in values:
            if v < 0:
                bad(key, f"negative axis value {v}")
    for v in recipe.gamma0_values:
        if v < 0:
            bad("gamma0_values", f"negative rate {v}")
    return recipe


def parse_recipe(figure: str, config: dict | str | Path | None = None,
                 overrides: dict | None = None) -> xp.ExperimentRecipe:
    """Resolve figure defaults, config-file values, and flag overrides.

    ``config`` may be a flat dict, a path to a flat JSON object, or a manifest
    written by a previous run (its embedded recipe is used). Unknown keys and
    out-of-range values are rejected with the offending key named.
    """
    if figure not in FIGURE_DEFAULTS:
        raise RecipeError(f"unknown figure {figure!r}; expected one of {sorted(FIGURE_DEFAULTS)}")
    resolved: dict = dict(figure=figure)
    resolved.update(FIGURE_DEFAULTS[figure])

    layers = []
    if config is not None:
        if isinstance(config, (str, Path)):
            try:
                config = json.loads(Path(config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise RecipeError(f"cannot read config {config}: {exc}") from exc
        if not isinstance(config, dict):
            raise RecipeError("config must be a JSON object with flat keys")
        if "recipe" in config and isinstance(config["recipe"], dict):
            config = dict(config["recipe"])  # a manifest; reuse its recipe
            config.pop("figure", None)
        layers.append(config)
    if overrides:
        layers.append({k: v for k, v in overrides.items() if v is not None})

    for layer in layers:
        for key, value in layer.items():
            if key not in _ALL_KEYS:
                raise RecipeError(f"unknown key {key!r}")
            resolved[key] = _coerce(key, value)

    return _validate(xp.ExperimentRecipe(**resolved))


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _slug(label: str) -> str:
    return label.replace("=", "-").replace(" ", "")


def _emit_panel(result: xp.SweepResult, stem: str, outdir: Path, heatmap: bool,
                outputs: list, counts: dict) -> None:
    paths = [
        write_diagram(result.pearson, outdir / f"{stem}_c12.csv"),
        write_diagram(result.nm, outdir / f"{stem}_nm.csv"),
    ]
    if heatmap:
        paths.append(render_heatmap(result.pearson, outdir / f"{stem}_c12.png"))
        paths.append(render_heatmap(result.nm, outdir / f"{stem}_nm.png"))
    outputs.extend(str(p) for p in paths)
    for status, n in result.status_counts().items():
        counts[status] = counts.get(status, 0) + n


def _run_figure(recipe: xp.ExperimentRecipe) -> tuple[list, dict]:
    outdir = Path(recipe.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    counts: dict[str, int] = {}
    fig = recipe.figure

    if fig == "fig1" or fig == "sweep":
        if recipe.engine == "collision":
            panels = xp.fig4_sweep(
                dataclasses.replace(recipe, swap_values=(recipe.swap_strength,))
            )
            _emit_panel(panels[0], fig, outdir, recipe.heatmap, outputs, counts)
        else:
            _emit_panel(xp.fig1_sweep(recipe), fig, outdir, recipe.heatmap, outputs, counts)
    elif fig == "fig2":
        for panel in xp.fig2_sweep(recipe):
            _emit_panel(panel, f"fig2_{_slug(panel.label)}", outdir, recipe.heatmap,
                        outputs, counts)
    elif fig in ("fig4", "fig5"):
        sweep = xp.fig4_sweep if fig == "fig4" else xp.fig5_sweep
        for panel in sweep(recipe):
            _emit_panel(panel, f"{fig}_{_slug(panel.label)}", outdir, recipe.heatmap,
                        outputs, counts)
    elif fig in ("fig6", "fig8"):
        result = xp.fig6_sweep(recipe, entanglement=(fig == "fig8"))
        _emit_panel(result, fig, outdir, recipe.heatmap, outputs, counts)
    elif fig == "fig7":
        for trace in xp.fig7_traces(recipe):
            path = write_series(
                {"n": trace.indices, "c12": trace.c12, "nm": trace.nm_running},
                outdir / f"fig7_{_slug(trace.label)}.csv",
            )
            outputs.append(str(path))
        counts["ok"] = counts.get("ok", 0) + len(recipe.ratio_values) + len(recipe.swap_values)
    elif fig == "me-run":
        series = xp.master_equation_series(recipe)
        outputs.append(str(write_series(series, outdir / "me_run_series.csv")))
        counts["ok"] = 1
    elif fig == "cm-run":
        series = xp.collision_series(recipe)
        outputs.append(str(write_series(series, outdir / "cm_run_series.csv")))
        counts["ok"] = 1
    else:  # pragma: no cover - parse_recipe rejects unknown figures
        raise RecipeError(f"unknown figure {fig!r}")
    return outputs, counts


def run_recipe(recipe: xp.ExperimentRecipe) -> Path:
    """Execute a resolved recipe and write its outputs plus the manifest."""
    started = time.time()
    outputs, counts = _run_figure(recipe)
    manifest = {
        "tool": "qusync",
        "version": __version__,
        "figure": recipe.figure,
        "recipe": dataclasses.asdict(recipe),
        "duration_s": round(time.time() - started, 3),
        "cell_status_counts": counts,
        "outputs": outputs,
    }
    return write_manifest(manifest, Path(recipe.outdir) / f"{recipe.figure}_manifest.json")


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat JSON config file (or a previous manifest)")
    sub.add_argument("--outdir", help="output directory (default: current)")
    sub.add_argument("--workers", type=int, help="worker processes for grid cells")
    sub.add_argument("--heatmap", action="store_const", const=True,
                     help="also render PNG heatmaps")
    for key in sorted(_FLOAT_KEYS):
        sub.add_argument(f"--{key.replace('_', '-')}", type=float, dest=key)
    for key in sorted(_INT_KEYS - {"workers"}):
        sub.add_argument(f"--{key.replace('_', '-')}", type=int, dest=key)
    for key in sorted(_TUPLE_KEYS):
        sub.add_argument(f"--{key.replace('_', '-')}", dest=key,
                         help="comma-separated values")
    sub.add_argument("--engine", choices=["master_eq", "master_eq_hybrid", "collision"])
    sub.add_argument("--spectrum", choices=["flat", "ohmic"])
    sub.add_argument("--x-name", dest="x_name")
    sub.add_argument("--y-name", dest="y_name")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qusync",
        description="Two-qubit open-system sweeps: synchronization and memory diagrams.",
    )
    parser.add_argument("--version", action="version", version=f"qusync {__version__}")
    subs = parser.add_subparsers(dest="figure", required=True)
    for figure in FIGURE_DEFAULTS:
        sub = subs.add_parser(figure, help=f"run the {figure} recipe")
        _add_common_flags(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key)
        for key in _ALL_KEYS
        if hasattr(args, key) and getattr(args, key) is not None
    }
    try:
        recipe = parse_recipe(args.figure, args.config, overrides)
    except RecipeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest_path = run_recipe(recipe)
    except (IntegrationAbort, InvariantViolation, DegenerateNormalizationError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {manifest_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
