import re
import xml.etree.ElementTree as ET

import pytest

from particle_limits.figures import render_png
from particle_limits.harness import fit_decay
from particle_limits.svg import BOTTOM, HEIGHT, LEFT, RIGHT, TOP, WIDTH, Axes, emit_svg, slope_note

NS = "{http://www.w3.org/2000/svg}"


def polylines(doc):
    return ET.fromstring(doc).findall(f"{NS}polyline")


def test_diagonal_runs_corner_to_corner():
    doc = emit_svg([("line", [0, 1], [0, 1])])
    (line,) = polylines(doc)
    pts = [tuple(map(float, p.split(","))) for p in line.get("points").split()]
    assert pts == [(LEFT, HEIGHT - BOTTOM), (WIDTH - RIGHT, TOP)]


def test_empty_input_is_rejected():
    with pytest.raises(ValueError):
        emit_svg([])
    with pytest.raises(ValueError):
        emit_svg([("a", [], [])])
    with pytest.raises(ValueError):
        emit_svg([("a", [1, 2], [1])])


def test_log_axis_needs_positive_data():
    with pytest.raises(ValueError, match="log"):
        emit_svg([("a", [1, 2], [0.0, 1.0])], Axes(ylog=True))
    with pytest.raises(ValueError, match="log"):
        emit_svg([("a", [-1, 2], [1.0, 1.0])], Axes(xlog=True))


def test_output_is_deterministic_and_self_contained():
    series = [("a", [1, 2, 3], [3, 1, 2]), ("b <&>", [1, 3], [2, 2])]
    axes = Axes("x", "y", "title", markers=True, annotations=["note"])
    doc = emit_svg(series, axes)
    assert doc == emit_svg(series, axes)
    assert "href" not in doc and "<script" not in doc
    root = ET.fromstring(doc)
    assert len(polylines(doc)) == 2
    assert len(root.findall(f"{NS}circle")) == 5


def test_slope_annotation_matches_fit():
    ns = [64, 128, 256]
    med = [0.0781, 0.0547, 0.0396]
    fit = fit_decay(ns, med)
    doc = emit_svg([("median", ns, med)], Axes(xlog=True, ylog=True, annotations=[slope_note(fit["slope"])]))
    m = re.search(r"slope = (-?\d+\.\d{3})<", doc)
    assert m and float(m.group(1)) == round(fit["slope"], 3)
    assert slope_note(None) == "slope = n/a"


def test_flat_series_still_renders():
    doc = emit_svg([("flat", [0, 1, 2], [5, 5, 5])])
    assert len(polylines(doc)) == 1


def test_png_is_deterministic():
    series = [("a", [1, 2, 3], [1, 4, 9])]
    a = render_png(series, Axes("x", "y", xlog=True, ylog=True))
    assert a[:8] == b"\x89PNG\r\n\x1a\n"
    assert a == render_png(series, Axes("x", "y", xlog=True, ylog=True))
    with pytest.raises(ValueError):
        render_png([])
