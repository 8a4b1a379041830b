"""Figure rendering against synthetic and experiment-shaped CSV files."""

import csv
import math

import pytest
from PIL import Image

from mvsde_plots.render import (FigureSpec, NonPositiveValue, SchemaError,
                                build_figure, fit_loglog, main, render)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


@pytest.fixture
def sqrt_law_csv(tmp_path):
    """Synthetic convergence table with err exactly delta^(1/2)."""
    path = tmp_path / "convergence_synth.csv"
    deltas = [2.0**-e for e in (12, 11, 10, 9)]
    rows = [["synth", 12 - i, d, math.sqrt(d), 0]
            for i, d in enumerate(deltas)]
    write_csv(path, ["run_id", "level_exponent", "delta", "err", "wall_ms"],
              rows)
    return str(path)


@pytest.fixture
def desk_run_csv(tmp_path):
    """Convergence CSV shaped like a desk-scale run of the scalar example."""
    path = tmp_path / "convergence_desk.csv"
    rows = [
        ["deadbeef0123", 12, 0.000244140625, 377.0, 0],
        ["deadbeef0123", 11, 0.00048828125, 585.0, 0],
        ["deadbeef0123", 10, 0.0009765625, 795.0, 0],
        ["deadbeef0123", 9, 0.001953125, 1010.0, 0],
    ]
    write_csv(path, ["run_id", "level_exponent", "delta", "err", "wall_ms"],
              rows)
    return str(path)


class TestFit:
    def test_square_root_law_slope(self, sqrt_law_csv, tmp_path):
        spec = FigureSpec(inputs=[sqrt_law_csv], x_column="delta",
                          y_column="err", output=str(tmp_path / "out.png"))
        result = render(spec)
        assert abs(result.fitted_slope - 0.5) <= 1e-9
        assert result.residual <= 1e-12

    def test_matches_primary_fit_formula(self):
        # least squares on logs, identical formula to the simulator's slope
        # fit: agreement far below the 1e-9 contract
        points = [(1.0, 1.0), (2.0, 2.0), (4.0, 3.0)]
        slope, _, _ = fit_loglog(points)
        assert abs(slope - math.log(3) / (2 * math.log(2))) < 1e-12


class TestRender:
    def test_image_is_parseable_png(self, sqrt_law_csv, tmp_path):
        out = tmp_path / "figure.png"
        render(FigureSpec(inputs=[sqrt_law_csv], x_column="delta",
                          y_column="err", output=str(out)))
        with Image.open(out) as image:
            image.verify()
        with Image.open(out) as image:
            assert image.size[0] > 100 and image.size[1] > 100

    def test_svg_output(self, sqrt_law_csv, tmp_path):
        out = tmp_path / "figure.svg"
        render(FigureSpec(inputs=[sqrt_law_csv], x_column="delta",
                          y_column="err", output=str(out)))
        assert out.read_text().lstrip().startswith("<?xml")

    def test_reference_line_overlaid(self, desk_run_csv, tmp_path):
        spec = FigureSpec(inputs=[desk_run_csv], x_column="delta",
                          y_column="err", output=str(tmp_path / "o.png"),
                          ref_slope=0.5)
        fig, result = build_figure(spec)
        try:
            labels = [line.get_label() for line in fig.axes[0].lines]
            dashed = [line for line in fig.axes[0].lines
                      if line.get_linestyle() == "--"]
            assert result.ref_slope == 0.5
            assert any("reference slope 0.5" in label for label in labels)
            assert len(dashed) == 1
            xs = dashed[0].get_xdata()
            ys = dashed[0].get_ydata()
            drawn = (math.log(ys[-1]) - math.log(ys[0])) / (
                math.log(xs[-1]) - math.log(xs[0]))
            assert drawn == pytest.approx(0.5, rel=1e-9)
            assert any(f"slope {result.fitted_slope:.3f}" in label
                       for label in labels)
        finally:
            import matplotlib.pyplot as plt
            plt.close(fig)

    def test_fitted_slope_in_legend(self, sqrt_law_csv, tmp_path):
        spec = FigureSpec(inputs=[sqrt_law_csv], x_column="delta",
                          y_column="err", output=str(tmp_path / "o.png"))
        fig, result = build_figure(spec)
        try:
            texts = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
            assert any("slope 0.500" in t for t in texts)
        finally:
            import matplotlib.pyplot as plt
            plt.close(fig)


class TestValidation:
    def test_missing_column(self, sqrt_law_csv, tmp_path):
        with pytest.raises(SchemaError):
            render(FigureSpec(inputs=[sqrt_law_csv], x_column="delta",
                              y_column="error", output=str(tmp_path / "o.png")))

    def test_zero_value_rejected(self, tmp_path):
        path = tmp_path / "zero.csv"
        write_csv(path, ["delta", "err"],
                  [[0.5, 1.0], [0.25, 0.0], [0.125, 0.3]])
        with pytest.raises(NonPositiveValue):
            render(FigureSpec(inputs=[str(path)], x_column="delta",
                              y_column="err", output=str(tmp_path / "o.png")))

    def test_too_few_points(self, tmp_path):
        path = tmp_path / "two.csv"
        write_csv(path, ["delta", "err"], [[0.5, 1.0], [0.25, 0.5]])
        with pytest.raises(SchemaError):
            render(FigureSpec(inputs=[str(path)], x_column="delta",
                              y_column="err", output=str(tmp_path / "o.png")))


class TestCli:
    def test_end_to_end(self, sqrt_law_csv, tmp_path, capsys):
        out = tmp_path / "cli.png"
        code = main(["--input", sqrt_law_csv, "--x", "delta", "--y", "err",
                     "--ref-slope", "0.5", "--out", str(out)])
        assert code == 0
        assert "slope 0.5000" in capsys.readouterr().out
        assert out.exists()

    def test_error_exit(self, sqrt_law_csv, tmp_path, capsys):
        code = main(["--input", sqrt_law_csv, "--x", "nope", "--y", "err",
                     "--out", str(tmp_path / "x.png")])
        assert code == 1
        assert "error" in capsys.readouterr().err
