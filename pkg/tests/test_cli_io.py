import json
import math

import numpy as np
import pytest

from qusync import cli
from qusync.experiments import PhaseDiagram
from qusync.io import (
    read_diagram,
    read_manifest,
    read_series,
    render_heatmap,
    write_diagram,
    write_series,
)


def make_diagram(cells, metric="pearson", normalized=False):
    cells = np.asarray(cells, dtype=float)
    return PhaseDiagram(
        metric=metric,
        x_name="omega1",
        x_values=tuple(1.0 + 0.1 * i for i in range(cells.shape[1])),
        y_name="lam",
        y_values=tuple(0.05 * (i + 1) for i in range(cells.shape[0])),
        cells=cells,
        normalized=normalized,
    )


class TestDiagramSerialization:
    def test_round_trip_values(self, tmp_path):
        diagram = make_diagram([[0.25, -0.5], [1.0, 0.125]])
        path = write_diagram(diagram, tmp_path / "d.csv")
        back = read_diagram(path)
        assert back.metric == diagram.metric
        assert back.x_values == diagram.x_values
        assert back.y_values == diagram.y_values
        assert np.array_equal(back.cells, diagram.cells)

    def test_serialization_fixed_point(self, tmp_path):
        # write -> read -> write reproduces the file byte for byte
        diagram = make_diagram([[1 / 3, -math.pi / 4], [0.1234567891234, 0.9]])
        first = write_diagram(diagram, tmp_path / "a.csv")
        second = write_diagram(read_diagram(first), tmp_path / "b.csv")
        assert first.read_bytes() == second.read_bytes()

    def test_missing_cell_is_nan_text(self, tmp_path):
        diagram = make_diagram([[0.5, np.nan]], metric="nm-trace")
        path = write_diagram(diagram, tmp_path / "d.csv")
        body = path.read_text().splitlines()
        assert body[-1].split(",")[2] == "NaN"
        assert np.isnan(read_diagram(path).cells[0, 1])

    def test_grid_body_includes_axes(self, tmp_path):
        diagram = make_diagram(np.zeros((11, 11)))
        path = write_diagram(diagram, tmp_path / "d.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "# metric=pearson"
        body = lines[2:]
        assert len(body) == 12
        assert all(len(row.split(",")) == 12 for row in body)


class TestSeriesSerialization:
    def test_trace_schema_columns(self, tmp_path):
        path = write_series(
            {"n": np.arange(100, 104), "c12": np.linspace(-1, 1, 4), "nm": np.zeros(4)},
            tmp_path / "s.csv",
        )
        assert path.read_text().splitlines()[0] == "n,c12,nm"

    def test_collision_index_is_integer_from_one(self, tmp_path):
        path = write_series(
            {"n": np.arange(1, 4), "sx1": np.array([0.5, 0.25, 0.125])},
            tmp_path / "s.csv",
        )
        rows = path.read_text().splitlines()[1:]
        assert [row.split(",")[0] for row in rows] == ["1", "2", "3"]

    def test_round_trip(self, tmp_path):
        columns = {"t": np.linspace(0, 1, 5), "x": np.array([0.5, 0.25, 0.125, 1.0, 0.0])}
        back = read_series(write_series(columns, tmp_path / "s.csv"))
        assert np.array_equal(back["x"], columns["x"])

    def test_mismatched_lengths_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_series({"t": np.arange(3), "x": np.arange(4)}, tmp_path / "s.csv")


class TestParseRecipe:
    def test_documented_figure_defaults(self):
        recipe = cli.parse_recipe("fig1")
        assert recipe.gamma0 == 0.01
        assert recipe.spectrum == "flat"
        assert len(recipe.x_values) == 11
        assert len(recipe.y_values) == 11
        assert recipe.step_h == 0.01

    def test_unknown_key_named(self, tmp_path):
        config = tmp_path / "c.json"
        config.write_text(json.dumps({"gamma9": 0.1}))
        with pytest.raises(cli.RecipeError, match="gamma9"):
            cli.parse_recipe("fig1", config)

    def test_negative_rate_named(self):
        with pytest.raises(cli.RecipeError, match="gamma0"):
            cli.parse_recipe("fig1", {"gamma0": -0.1})

    def test_type_mismatch_named(self):
        with pytest.raises(cli.RecipeError, match="n_collisions"):
            cli.parse_recipe("fig4", {"n_collisions": 10.5})

    def test_flag_overrides_file_value(self, tmp_path):
        config = tmp_path / "c.json"
        config.write_text(json.dumps({"n_collisions": 10000}))
        recipe = cli.parse_recipe("fig4", config, {"n_collisions": 500})
        assert recipe.n_collisions == 500

    def test_swap_range_validated(self):
        with pytest.raises(cli.RecipeError, match="swap_values"):
            cli.parse_recipe("fig4", {"swap_values": [0.0, 3.0]})

    def test_unknown_figure_rejected(self):
        with pytest.raises(cli.RecipeError, match="fig9"):
            cli.parse_recipe("fig9")

    def test_comma_separated_axis_values(self):
        recipe = cli.parse_recipe("fig1", overrides={"x_values": "0.9,1.1"})
        assert recipe.x_values == (0.9, 1.1)


class TestCliEndToEnd:
    FAST_FIG1 = [
        "--x-values", "0.9,1.1", "--y-values", "0.05",
        "--t-end", "50", "--window", "200", "--overlap", "100",
    ]

    def test_success_exit_and_outputs(self, tmp_path):
        code = cli.main(["fig1", *self.FAST_FIG1, "--outdir", str(tmp_path)])
        assert code == 0
        manifest = read_manifest(tmp_path / "fig1_manifest.json")
        assert manifest["version"]
        assert manifest["cell_status_counts"] == {"ok": 2}
        for out in manifest["outputs"]:
            assert (tmp_path / out.split("/")[-1]).exists()

    def test_reruns_are_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["fig1", *self.FAST_FIG1, "--outdir", str(out1)]) == 0
        assert cli.main(["fig1", *self.FAST_FIG1, "--outdir", str(out2)]) == 0
        for name in ("fig1_c12.csv", "fig1_nm.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_manifest_reproduces_outputs(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["fig1", *self.FAST_FIG1, "--outdir", str(out1)]) == 0
        code = cli.main([
            "fig1", "--config", str(out1 / "fig1_manifest.json"), "--outdir", str(out2),
        ])
        assert code == 0
        assert (out1 / "fig1_c12.csv").read_bytes() == (out2 / "fig1_c12.csv").read_bytes()

    def test_config_error_exit_code(self, tmp_path):
        code = cli.main(["fig1", "--gamma0", "-1", "--outdir", str(tmp_path)])
        assert code == cli.EXIT_CONFIG

    def test_numerical_abort_exit_code(self, tmp_path):
        # a hopeless step size blows up the integrator, which must abort
        code = cli.main([
            "me-run", "--t-end", "150", "--step-h", "1.5", "--outdir", str(tmp_path),
        ])
        assert code == cli.EXIT_NUMERIC

    def test_fig7_export_schema(self, tmp_path):
        code = cli.main([
            "fig7", "--n-collisions", "600", "--ratio-values", "1.2",
            "--swap-values", "0.25", "--outdir", str(tmp_path),
        ])
        assert code == 0
        series = (tmp_path / "fig7_swap-0.25.csv").read_text().splitlines()
        assert series[0] == "n,c12,nm"

    def test_cm_run_integer_index(self, tmp_path):
        assert cli.main(["cm-run", "--n-collisions", "40", "--outdir", str(tmp_path)]) == 0
        rows = (tmp_path / "cm_run_series.csv").read_text().splitlines()
        assert rows[1].split(",")[0] == "1"

    def test_heatmap_rendering(self, tmp_path):
        diagram = make_diagram([[0.5, -0.5], [0.1, 0.9]])
        path = render_heatmap(diagram, tmp_path / "d.png")
        assert path.exists() and path.stat().st_size > 0
