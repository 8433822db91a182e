"""Parameter sweeps and trace studies assembling the package's standard figures.

Every sweep is a grid of independent cells; cells are dispatched to a bounded
worker pool (or run inline for ``workers <= 1``) and gathered by index, so
serial and parallel execution produce identical diagrams. Per-cell failures
are recorded as missing cells with a reason and never abort the sweep.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import collision as cm
from . import lindblad as lb
from .measures import (
    DegenerateNormalizationError,
    TimeSeries,
    WindowSpec,
    nm_from_distance_series,
    normalize_diagram,
    positive_increment_total,
    running_positive_increments,
    sliding_pearson,
)
from .qcore import IDENTITY_2, SIGMA_X

METRICS = ("pearson", "nm-trace", "nm-entanglement")

_SX1 = np.kron(SIGMA_X, IDENTITY_2)
_SX2 = np.kron(IDENTITY_2, SIGMA_X)


@dataclass(frozen=True, eq=False)
class PhaseDiagram:
    """2-D grid of scalar results; ``cells[iy, ix]`` follows the axis order."""

    metric: str
    x_name: str
    x_values: tuple[float, ...]
    y_name: str
    y_values: tuple[float, ...]
    cells: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_values", tuple(float(v) for v in self.x_values))
        object.__setattr__(self, "y_values", tuple(float(v) for v in self.y_values))
        object.__setattr__(self, "cells", np.asarray(self.cells, dtype=float))
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        expected = (len(self.y_values), len(self.x_values))
        if self.cells.shape != expected:
            raise ValueError(f"cells shape {self.cells.shape} does not match axes {expected}")
        finite = self.cells[np.isfinite(self.cells)]
        if self.metric == "pearson":
            if finite.size and (finite.min() < -1 - 1e-9 or finite.max() > 1 + 1e-9):
                raise ValueError("pearson cells must lie in [-1, 1]")
        elif finite.size and finite.min() < -1e-12:
            raise ValueError("non-Markovianity cells must be nonnegative")


@dataclass(frozen=True)
class ExperimentRecipe:
    """Fully resolved, deterministic description of one experiment run."""

    figure: str
    engine: str
    x_name: str = "omega1"
    x_values: tuple[float, ...] = ()
    y_name: str = "lam"
    y_values: tuple[float, ...] = ()
    omega1: float = 1.2
    lam: float = 0.1
    swap_strength: float = 0.0
    gamma0: float = 0.01
    gamma_lf: float = 0.0
    spectrum: str = "flat"
    gamma0_values: tuple[float, ...] = ()
    swap_values: tuple[float, ...] = ()
    ratio_values: tuple[float, ...] = ()
    t_end: float = 1500.0
    step_h: float = 0.01
    sample_stride: int = 10
    n_collisions: int = 10000
    window: int = 3000
    overlap: int = 2400
    workers: int = 1
    outdir: str = "."
    heatmap: bool = False

    def window_spec(self) -> WindowSpec:
        return WindowSpec(self.window, self.overlap)


@dataclass
class SweepResult:
    """Diagrams of one sweep panel, plus per-cell status bookkeeping."""

    label: str
    pearson: PhaseDiagram
    nm_raw: PhaseDiagram
    nm: PhaseDiagram
    statuses: dict = field(default_factory=dict)

    def status_counts(self) -> dict:
        counts: dict[str, int] = {}
        for status in self.statuses.values():
            counts[status] = counts.get(status, 0) + 1
        return dict(sorted(counts.items()))


# ---------------------------------------------------------------------------
# per-cell computations (top-level so they pickle into worker processes)
# ---------------------------------------------------------------------------


def _me_cell(task: dict) -> dict:
    params = lb.SystemParams(
        omega1=task["omega1"],
        lam=task["lam"],
        gamma0=task["gamma0"],
        gamma_lf=task["gamma_lf"],
        spectrum=task["spectrum"],
    )
    out = {"status": "ok" if params.secular_ok() else "secular-warning"}
    t_end, h, stride = task["t_end"], task["step_h"], task["sample_stride"]
    if "c12" in task["want"]:
        times, (sx1, sx2) = lb.observable_series(
            params, lb.sync_initial_state(), [_SX1, _SX2], t_end=t_end, h=h, stride=stride
        )
        dt = h * stride
        spec = WindowSpec(task["window"], task["overlap"])
        series = sliding_pearson(
            TimeSeries(0.0, dt, sx1), TimeSeries(0.0, dt, sx2), spec
        )
        out["c12"] = float(series.values[-1])
    if "nm" in task["want"]:
        _, distances = lb.pair_distance_series(params, t_end=t_end, h=h, stride=stride)
        out["nm"] = nm_from_distance_series(distances)
    return out


def _cm_cell(task: dict) -> dict:
    cfg = cm.CollisionConfig(
        omega1=task["omega1"],
        lam=task["lam"],
        swap_strength=task["swap_strength"],
        n_collisions=task["n_collisions"],
    )
    out = {"status": "ok"}
    spec = WindowSpec(task["window"], task["overlap"])
    if "c12" in task["want"]:
        record = cm.run(cfg, check_every=1000)
        series = sliding_pearson(
            TimeSeries(1.0, 1.0, record.sx1), TimeSeries(1.0, 1.0, record.sx2), spec
        )
        out["c12"] = float(series.values[-1])
    if "nm" in task["want"]:
        pair = cm.run_pair(cfg, check_every=1000)
        out["nm"] = nm_from_distance_series(pair.distances)
    if "nm_ent" in task["want"]:
        witness = cm.run_entanglement(cfg, check_every=1000)
        out["nm_ent"] = positive_increment_total(witness.concurrence)
    return out


def _compute_cell(task: dict) -> dict:
    try:
        if task["kind"] == "me":
            return _me_cell(task)
        return _cm_cell(task)
    except Exception as exc:  # cell failures become missing cells, sweep continues
        return {"status": f"failed:{type(exc).__name__}: {exc}"}


def _run_tasks(tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [_compute_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_compute_cell, tasks))


def _grid_sweep(recipe: ExperimentRecipe, base_task: dict, cell_params, label: str,
                nm_key: str = "nm") -> SweepResult:
    """Run one panel: ``cell_params(x, y)`` supplies the per-cell parameters."""
    xs, ys = recipe.x_values, recipe.y_values
    tasks = []
    for y in ys:
        for x in xs:
            task = dict(base_task)
            task.update(cell_params(x, y))
            tasks.append(task)
    results = _run_tasks(tasks, recipe.workers)

    shape = (len(ys), len(xs))
    c12 = np.full(shape, np.nan)
    nm = np.full(shape, np.nan)
    statuses = {}
    for idx, res in enumerate(results):
        iy, ix = divmod(idx, len(xs))
        statuses[(iy, ix)] = res["status"]
        if "c12" in res:
            c12[iy, ix] = res["c12"]
        if nm_key in res:
            nm[iy, ix] = res[nm_key]

    nm_metric = "nm-entanglement" if nm_key == "nm_ent" else "nm-trace"
    axes = dict(
        x_name=recipe.x_name, x_values=xs, y_name=recipe.y_name, y_values=ys
    )
    pearson_diag = PhaseDiagram(metric="pearson", cells=c12, **axes)
    nm_diag = PhaseDiagram(metric=nm_metric, cells=nm, **axes)
    try:
        normalized = dataclasses.replace(normalize_diagram(nm_diag), normalized=True)
    except DegenerateNormalizationError:
        # nothing positive to scale by (all cells failed or memory-free);
        # keep the raw grid rather than aborting the sweep
        normalized = nm_diag
    return SweepResult(label, pearson_diag, nm_diag, normalized, statuses)


# ---------------------------------------------------------------------------
# figure sweeps
# ---------------------------------------------------------------------------


def _me_base(recipe: ExperimentRecipe, want=("c12", "nm")) -> dict:
    return dict(
        kind="me",
        gamma0=recipe.gamma0,
        gamma_lf=recipe.gamma_lf,
        spectrum=recipe.spectrum,
        t_end=recipe.t_end,
        step_h=recipe.step_h,
        sample_stride=recipe.sample_stride,
        window=recipe.window,
        overlap=recipe.overlap,
        want=tuple(want),
    )


def _cm_base(recipe: ExperimentRecipe, want=("c12", "nm")) -> dict:
    return dict(
        kind="cm",
        n_collisions=recipe.n_collisions,
        window=recipe.window,
        overlap=recipe.overlap,
        want=tuple(want),
    )


def fig1_sweep(recipe: ExperimentRecipe) -> SweepResult:
    """Flat-spectrum synchronization and memory diagrams over (omega1, lam)."""
    return _grid_sweep(
        recipe,
        _me_base(recipe),
        lambda x, y: dict(omega1=x, lam=y),
        label="flat",
    )


def fig2_sweep(recipe: ExperimentRecipe) -> list[SweepResult]:
    """Hybrid-noise diagram pairs, one per high-frequency coupling value."""
    panels = []
    for gamma0 in recipe.gamma0_values:
        base = _me_base(recipe)
        base.update(gamma0=gamma0, spectrum="ohmic", gamma_lf=recipe.gamma_lf)
        panels.append(
            _grid_sweep(recipe, base, lambda x, y: dict(omega1=x, lam=y),
                        label=f"gamma0={gamma0:g}")
        )
    return panels


def fig4_sweep(recipe: ExperimentRecipe) -> list[SweepResult]:
    """Collision diagrams over (ratio, lam), one panel per swap strength."""
    panels = []
    for swap in recipe.swap_values:
        panels.append(
            _grid_sweep(
                recipe,
                _cm_base(recipe),
                lambda x, y, s=swap: dict(omega1=x, lam=y, swap_strength=s),
                label=f"swap={swap:g}",
            )
        )
    return panels


def fig5_sweep(recipe: ExperimentRecipe) -> list[SweepResult]:
    """Collision diagrams over (swap, lam), one panel per frequency ratio."""
    panels = []
    for ratio in recipe.ratio_values:
        panels.append(
            _grid_sweep(
                recipe,
                _cm_base(recipe),
                lambda x, y, r=ratio: dict(omega1=r, lam=y, swap_strength=x),
                label=f"ratio={ratio:g}",
            )
        )
    return panels


def fig6_sweep(recipe: ExperimentRecipe, entanglement: bool = False) -> SweepResult:
    """Collision diagrams over (ratio, swap) at fixed coupling.

    With ``entanglement=True`` the memory diagram uses the witness-pair
    measure instead of the trace-distance one (the companion figure).
    """
    want = ("c12", "nm_ent") if entanglement else ("c12", "nm")
    base = _cm_base(recipe, want=want)
    return _grid_sweep(
        recipe,
        base,
        lambda x, y: dict(omega1=x, lam=recipe.lam, swap_strength=y),
        label="entanglement" if entanglement else "trace",
        nm_key="nm_ent" if entanglement else "nm",
    )


def fig8_sweep(recipe: ExperimentRecipe) -> SweepResult:
    return fig6_sweep(recipe, entanglement=True)


@dataclass
class FigTrace:
    """Windowed synchronization series and running memory measure of one run."""

    label: str
    indices: np.ndarray          # window-center collision indices
    c12: np.ndarray
    nm_running: np.ndarray       # cumulative memory measure at the same indices
    nm_total: float


def _collision_trace(recipe: ExperimentRecipe, ratio: float, swap: float,
                     label: str) -> FigTrace:
    cfg = cm.CollisionConfig(
        omega1=ratio, lam=recipe.lam, swap_strength=swap,
        n_collisions=recipe.n_collisions,
    )
    record = cm.run(cfg, check_every=1000)
    spec = recipe.window_spec()
    series = sliding_pearson(
        TimeSeries(1.0, 1.0, record.sx1), TimeSeries(1.0, 1.0, record.sx2), spec
    )
    pair = cm.run_pair(cfg, check_every=1000)
    running = running_positive_increments(pair.distances)
    centers = series.times().astype(int)
    return FigTrace(
        label=label,
        indices=centers,
        c12=series.values,
        nm_running=running[centers],
        nm_total=float(running[-1]),
    )


def fig7_traces(recipe: ExperimentRecipe) -> list[FigTrace]:
    """Synchronization build-up traces: a ratio sweep at swap=0 and a swap
    sweep at the fixed detuning ratio."""
    traces = [
        _collision_trace(recipe, ratio, 0.0, f"ratio={ratio:g}")
        for ratio in recipe.ratio_values
    ]
    traces += [
        _collision_trace(recipe, recipe.omega1, swap, f"swap={swap:g}")
        for swap in recipe.swap_values
    ]
    return traces


def sync_onset_index(indices, values, threshold: float = 0.9):
    """First index from which |values| stays at or above the threshold."""
    above = np.abs(np.asarray(values)) >= threshold
    for i in range(len(above)):
        if above[i:].all():
            return int(np.asarray(indices)[i])
    return None


def zero_crossings(axis_values, series) -> list[float]:
    """Linearly interpolated sign changes of a sampled curve."""
    x = np.asarray(axis_values, dtype=float)
    v = np.asarray(series, dtype=float)
    out = []
    for i in range(len(v) - 1):
        a, b = v[i], v[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            out.append(float(x[i]))
        elif (a < 0 < b) or (a > 0 > b):
            out.append(float(x[i] + (x[i + 1] - x[i]) * (-a) / (b - a)))
    return out


def boundary_ratio(recipe: ExperimentRecipe, swap: float) -> float:
    """Sync/anti-sync boundary: interpolated zero crossing of the final
    Pearson coefficient along the recipe's ratio axis at its fixed coupling."""
    tasks = []
    base = _cm_base(recipe, want=("c12",))
    for ratio in recipe.x_values:
        task = dict(base)
        task.update(omega1=ratio, lam=recipe.lam, swap_strength=swap)
        tasks.append(task)
    results = _run_tasks(tasks, recipe.workers)
    values = [res.get("c12", np.nan) for res in results]
    crossings = zero_crossings(recipe.x_values, values)
    if not crossings:
        raise ValueError(f"no sign change along the ratio axis at swap={swap}")
    return min(crossings, key=lambda c: abs(c - 1.0))


# ---------------------------------------------------------------------------
# single-run series (the generic me-run / cm-run outputs)
# ---------------------------------------------------------------------------


def master_equation_series(recipe: ExperimentRecipe) -> dict:
    """Observable and distinguishability series of one master-equation run."""
    params = lb.SystemParams(
        omega1=recipe.omega1, lam=recipe.lam, gamma0=recipe.gamma0,
        gamma_lf=recipe.gamma_lf, spectrum=recipe.spectrum,
    )
    times, (sx1, sx2) = lb.observable_series(
        params, lb.sync_initial_state(), [_SX1, _SX2],
        t_end=recipe.t_end, h=recipe.step_h, stride=recipe.sample_stride,
    )
    _, distances = lb.pair_distance_series(
        params, t_end=recipe.t_end, h=recipe.step_h, stride=recipe.sample_stride
    )
    return {"t": times, "sx1": sx1, "sx2": sx2, "distance": distances}


def collision_series(recipe: ExperimentRecipe) -> dict:
    """Observable series of one collision run (integer collision index)."""
    cfg = cm.CollisionConfig(
        omega1=recipe.omega1, lam=recipe.lam, swap_strength=recipe.swap_strength,
        n_collisions=recipe.n_collisions,
    )
    record = cm.run(cfg, check_every=1000)
    pair = cm.run_pair(cfg, check_every=1000)
    return {
        "n": record.indices,
        "sx1": record.sx1,
        "sx2": record.sx2,
        "distance": pair.distances[1:],
    }
