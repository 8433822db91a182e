"""Bit-exact CSV serialization of diagrams and series, plus run manifests.

All numeric output uses 9 significant digits with a '.' decimal point and ','
separators regardless of locale; missing cells are written as ``NaN``, never
coerced to 0. Re-serializing a parsed file reproduces it byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .experiments import PhaseDiagram


def _fmt(value: float) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if np.isnan(v):
        return "NaN"
    return f"{v:.9g}"


def write_diagram(diagram: PhaseDiagram, path) -> Path:
    """Diagram as CSV: metric header, x axis on the first row, y axis in the
    first column (an n-by-n grid serializes to an (n+1)-square body)."""
    path = Path(path)
    lines = [f"# metric={diagram.metric}"]
    lines.append(
        f"# x={diagram.x_name} y={diagram.y_name} normalized={int(diagram.normalized)}"
    )
    lines.append("," + ",".join(_fmt(x) for x in diagram.x_values))
    for iy, y in enumerate(diagram.y_values):
        row = [_fmt(y)] + [_fmt(c) for c in diagram.cells[iy]]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_diagram(path) -> PhaseDiagram:
    """Parse a diagram CSV written by :func:`write_diagram`."""
    text = Path(path).read_text(encoding="ascii").strip().splitlines()
    if not text or not text[0].startswith("# metric="):
        raise ValueError(f"{path} is not a diagram file (missing metric header)")
    metric = text[0].split("=", 1)[1].strip()
    fields = dict(part.split("=", 1) for part in text[1][2:].split())
    body = [line.split(",") for line in text[2:]]
    x_values = tuple(float(v) for v in body[0][1:])
    y_values = tuple(float(r[0]) for r in body[1:])
    cells = np.array([[float(v) for v in r[1:]] for r in body[1:]])
    return PhaseDiagram(
        metric=metric,
        x_name=fields["x"],
        x_values=x_values,
        y_name=fields["y"],
        y_values=y_values,
        cells=cells,
        normalized=bool(int(fields.get("normalized", "0"))),
    )


def write_series(columns: dict, path) -> Path:
    """Named columns as CSV; the first column is the index (t or n)."""
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[name]) for name in names]
    length = len(arrays[0])
    for name, arr in zip(names, arrays):
        if len(arr) != length:
            raise ValueError(f"column {name!r} has length {len(arr)}, expected {length}")
    lines = [",".join(names)]
    integral = [np.issubdtype(a.dtype, np.integer) for a in arrays]
    for i in range(length):
        lines.append(
            ",".join(
                str(int(a[i])) if is_int else _fmt(a[i])
                for a, is_int in zip(arrays, integral)
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_series(path) -> dict:
    """Parse a series CSV back into named float arrays."""
    lines = Path(path).read_text(encoding="ascii").strip().splitlines()
    names = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
    data = np.array(rows)
    return {name: data[:, i] for i, name in enumerate(names)}


def write_manifest(manifest: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="ascii")
    return path


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="ascii"))


# Fixed colormaps for the optional raster rendering: diverging for the signed
# correlation, sequential for the nonnegative memory measure.
PEARSON_CMAP = "coolwarm"
NM_CMAP = "viridis"


def render_heatmap(diagram: PhaseDiagram, path) -> Path:
    """Companion raster image of a diagram (file output only)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    if diagram.metric == "pearson":
        cmap, vmin, vmax = PEARSON_CMAP, -1.0, 1.0
    else:
        finite = diagram.cells[np.isfinite(diagram.cells)]
        top = 1.0 if diagram.normalized else (finite.max() if finite.size else 1.0)
        cmap, vmin, vmax = NM_CMAP, 0.0, top
    mesh = ax.pcolormesh(
        diagram.x_values, diagram.y_values, diagram.cells,
        cmap=cmap, vmin=vmin, vmax=vmax, shading="nearest",
    )
    ax.set_xlabel(diagram.x_name)
    ax.set_ylabel(diagram.y_name)
    ax.set_title(diagram.metric + (" (normalized)" if diagram.normalized else ""))
    fig.colorbar(mesh, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
