import math
import xml.etree.ElementTree as ET

from notewatch import plots

SVG = "{http://www.w3.org/2000/svg}"


def parse(svg):
    root = ET.fromstring(svg)
    assert root.tag == SVG + "svg"
    return root


def test_line_plot_has_one_polyline_per_series():
    svg = plots.line_plot([("a", [0, 0.5, 1], [1, 0.6, 0.2]), ("b", [0, 1], [0, 1])],
                          "Title & more", "x", "y", xlim=(0, 1), ylim=(0, 1))
    root = parse(svg)
    assert len(root.findall(SVG + "polyline")) == 2
    assert "Title &amp; more" in svg


def test_non_finite_points_break_the_line():
    root = parse(plots.line_plot([("a", [0, 1, 2, 3], [0, math.nan, 1, 2])], "t", "x", "y"))
    assert len(root.findall(SVG + "polyline")) == 2


def test_step_plot_inserts_corners():
    root = parse(plots.line_plot([("a", [0, 1], [1, 0])], "t", "x", "y", xlim=(0, 1),
                                 ylim=(0, 1), step=True))
    points = root.find(SVG + "polyline").get("points").split()
    assert len(points) == 3


def test_points_stay_inside_the_frame():
    root = parse(plots.line_plot([("a", [0, 1], [0, 1])], "t", "x", "y"))
    for pair in root.find(SVG + "polyline").get("points").split():
        x, y = map(float, pair.split(","))
        assert plots.MARGIN["left"] <= x <= plots.WIDTH - plots.MARGIN["right"]
        assert plots.MARGIN["top"] <= y <= plots.HEIGHT - plots.MARGIN["bottom"]


def test_histogram_bars_scale_with_counts():
    svg = plots.histogram_plot([("positive", [0, 1, 2, 3], [1, 4, 2]),
                                ("negative", [0, 1, 2, 3], [0, 0, 0])], "h", "age")
    rects = parse(svg).findall(SVG + "rect")
    # one frame plus one bar per bin, per panel
    assert len(rects) == 8
    heights = [float(r.get("height")) for r in rects[1:4]]
    assert heights[1] == max(heights) and heights[0] * 4 == heights[1]


def test_empty_inputs_render():
    parse(plots.line_plot([], "t", "x", "y"))
    parse(plots.histogram_plot([], "t", "x"))
