#!/usr/bin/env python3
"""
SVG rendering for branchcover results
Deterministic string-template output: fixed viewports, one panel per plane
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union
from xml.sax.saxutils import escape

import numpy as np

from branch_detector import BranchReport, LocalDegreeResult
from normal_domain import NormalDomain
from normal_form import NormalFormChart
from path_lifting import LiftResult
from planar_map import Rect
from region import CellSet
from regularity import RegularityReport

logger = logging.getLogger(__name__)

PANEL_SIZE = 400
MARGIN = 24
CAPTION_HEIGHT = 20
GRID_LINES = 9

REGION_FILL = "#cfe3f7"
REGION_STROKE = "#4a7fb5"
LIFT_COLORS = ("#c0392b", "#27ae60", "#8e44ad", "#d35400", "#16a085", "#2c3e50")
TARGET_COLOR = "#c0392b"
MARKER_COLOR = "#000000"
CIRCLE_COLOR = "#555555"

PREAMBLE = """\
<?xml version="1.0" standalone="no"?>
<svg width="%(width)d" height="%(height)d" viewBox="0 0 %(width)d %(height)d" version="1.1" xmlns="http://www.w3.org/2000/svg">
<rect x="0" y="0" width="%(width)d" height="%(height)d" style="fill:#ffffff"/>
"""

POSTAMBLE = """\
</svg>
"""


def _fmt(value: float) -> str:
    text = "%.5f" % value
    return "0.00000" if text == "-0.00000" else text


def _text(x: float, y: float, text: str, color: str) -> str:
    return '<text x="%s" y="%s" fill="%s" font-size="11" font-family="monospace">%s</text>' % (
        _fmt(x),
        _fmt(y),
        color,
        escape(text),
    )


class Panel:
    """
    One square drawing area mapped to a rectangle of the plane

    The y axis is flipped so the imaginary part grows upwards.
    """

    def __init__(self, bounds: Rect, title: str, index: int = 0):
        side = max(bounds.width, bounds.height)
        center = bounds.center
        self.bounds = Rect.square(center, side / 2.0)
        self.scale = PANEL_SIZE / side
        self.left = MARGIN + index * (PANEL_SIZE + MARGIN)
        self.top = MARGIN + CAPTION_HEIGHT
        self.title = title
        self.commands: List[str] = []

    def x(self, value) -> np.ndarray:
        return self.left + (np.asarray(value, dtype=float) - self.bounds.x0) * self.scale

    def y(self, value) -> np.ndarray:
        return self.top + (self.bounds.y1 - np.asarray(value, dtype=float)) * self.scale

    def frame(self) -> List[str]:
        return [
            '<rect x="%s" y="%s" width="%d" height="%d" style="fill:none;stroke:#999999;stroke-width:1"/>'
            % (_fmt(self.left), _fmt(self.top), PANEL_SIZE, PANEL_SIZE),
            _text(self.left, MARGIN + CAPTION_HEIGHT / 2.0, self.title, "#333333"),
        ]

    def rect(self, rect: Rect, color: str = "#333333", dashed: bool = False) -> None:
        dash = ";stroke-dasharray:4,3" if dashed else ""
        self.commands.append(
            '<rect x="%s" y="%s" width="%s" height="%s" style="fill:none;stroke:%s;stroke-width:1%s"/>'
            % (
                _fmt(self.x(rect.x0)),
                _fmt(self.y(rect.y1)),
                _fmt(rect.width * self.scale),
                _fmt(rect.height * self.scale),
                color,
                dash,
            )
        )

    def cells(self, cells: CellSet, fill: str = REGION_FILL, stroke: str = REGION_STROKE) -> None:
        """All cells as one path, each row merged into runs"""
        grid = cells.grid
        h = grid.cell_size * self.scale
        parts = []
        for row in np.flatnonzero(cells.mask.any(axis=1)):
            line = np.concatenate([[False], cells.mask[row], [False]]).astype(np.int8)
            edges = np.diff(line)
            starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
            y_top = self.y(grid.bounds.y0 + (row + 1) * grid.cell_size)
            for c0, c1 in zip(starts, stops):
                x0 = self.x(grid.bounds.x0 + c0 * grid.cell_size)
                parts.append(
                    "M%s %sh%sv%sh%sz" % (_fmt(x0), _fmt(y_top), _fmt((c1 - c0) * h), _fmt(h), _fmt(-(c1 - c0) * h))
                )
        if parts:
            self.commands.append(
                '<path d="%s" style="fill:%s;stroke:%s;stroke-width:0.3"/>' % ("".join(parts), fill, stroke)
            )

    def polyline(self, points, color: str = "#000000", width: float = 1.5) -> None:
        """Polyline through points; NaN entries split it into pieces"""
        points = np.asarray(points, dtype=complex)
        valid = ~np.isnan(points)
        breaks = np.flatnonzero(np.diff(valid.astype(np.int8)) != 0) + 1
        for piece in np.split(np.arange(len(points)), breaks):
            if len(piece) < 2 or not valid[piece[0]]:
                continue
            xs, ys = self.x(points[piece].real), self.y(points[piece].imag)
            coords = " ".join("%s,%s" % (_fmt(a), _fmt(b)) for a, b in zip(xs, ys))
            self.commands.append(
                '<polyline points="%s" style="fill:none;stroke:%s;stroke-width:%s"/>' % (coords, color, _fmt(width))
            )

    def circle(self, center: complex, radius: float, color: str = CIRCLE_COLOR, fill: str = "none") -> None:
        """Circle with a radius in plane units"""
        self.commands.append(
            '<circle cx="%s" cy="%s" r="%s" style="fill:%s;stroke:%s;stroke-width:1"/>'
            % (_fmt(self.x(center.real)), _fmt(self.y(center.imag)), _fmt(radius * self.scale), fill, color)
        )

    def marker(self, point: complex, color: str = MARKER_COLOR, label: Optional[str] = None) -> None:
        px, py = float(self.x(point.real)), float(self.y(point.imag))
        self.commands.append(
            '<circle cx="%s" cy="%s" r="3" style="fill:%s;stroke:none"/>' % (_fmt(px), _fmt(py), color)
        )
        if label:
            self.text(px + 5, py - 5, label, color=color)

    def text(self, x: float, y: float, text: str, color: str = "#666666") -> None:
        self.commands.append(_text(x, y, text, color))


class SvgDocument:
    def __init__(self, panels: Sequence[Panel]):
        self.panels = list(panels)

    def render(self) -> str:
        count = max(1, len(self.panels))
        width = MARGIN + count * (PANEL_SIZE + MARGIN)
        height = 2 * MARGIN + CAPTION_HEIGHT + PANEL_SIZE
        body = []
        for panel in self.panels:
            body.extend(panel.frame())
            body.extend(panel.commands)
        return PREAMBLE % {"width": width, "height": height} + "\n".join(body) + ("\n" if body else "") + POSTAMBLE


def _disk_bounds(center: complex, radius: float, pad: float = 1.1) -> Rect:
    return Rect.square(center, pad * radius)


def _points_bounds(points: np.ndarray, pad: float = 0.15) -> Rect:
    points = np.asarray(points, dtype=complex)
    points = points[~np.isnan(points)]
    lo = complex(points.real.min(), points.imag.min())
    hi = complex(points.real.max(), points.imag.max())
    half = 0.5 * max(hi.real - lo.real, hi.imag - lo.imag, 1e-6) * (1.0 + 2 * pad)
    return Rect.square(0.5 * (lo + hi), half)


def _region_bounds(nd: NormalDomain) -> Rect:
    centers = nd.region.centers()
    return _points_bounds(np.concatenate([centers, [nd.center]]))


def _normal_domain_panels(nd: NormalDomain) -> List[Panel]:
    domain = Panel(_region_bounds(nd), f"U(x, f, r)  r={nd.radius:.4g}", 0)
    domain.cells(nd.region)
    domain.marker(nd.center, label="x")
    image = Panel(_disk_bounds(nd.image_center, nd.radius), "B(f(x), r)", 1)
    image.circle(nd.image_center, nd.radius)
    image.marker(nd.image_center, label="f(x)")
    return [domain, image]


def _lift_panels(lifts: Sequence[LiftResult], title: str) -> List[Panel]:
    nd = lifts[0].domain if lifts else None
    vertices = np.concatenate([lf.lift.vertices for lf in lifts]) if lifts else np.array([0j])
    if nd is not None:
        bounds = _points_bounds(np.concatenate([nd.region.centers(), vertices]))
    else:
        bounds = _points_bounds(vertices)
    domain = Panel(bounds, title, 0)
    if nd is not None:
        domain.cells(nd.region)
        domain.marker(nd.center, label="x")
    for i, lf in enumerate(lifts):
        color = LIFT_COLORS[i % len(LIFT_COLORS)]
        domain.polyline(lf.lift.vertices, color=color)
        domain.marker(lf.lift.start, color=color)
        domain.marker(lf.lift.end, color=color)

    targets = np.concatenate([lf.target.vertices for lf in lifts]) if lifts else np.array([0j])
    if nd is not None:
        image = Panel(_disk_bounds(nd.image_center, nd.radius), "target path in f(U)", 1)
        image.circle(nd.image_center, nd.radius)
    else:
        image = Panel(_points_bounds(targets), "target path", 1)
    for lf in lifts:
        image.polyline(lf.target.vertices, color=TARGET_COLOR)
    if lifts:
        image.marker(lifts[0].target.start, label="β(0)")
    return [domain, image]


def _branch_panels(report: BranchReport) -> List[Panel]:
    panel = Panel(report.search_region, f"branch points  cell={report.resolution:.4g}", 0)
    panel.rect(report.search_region)
    for point in report.branch_points:
        panel.circle(point.location, point.isolation_radius, color="#999999")
        panel.marker(point.location, color="#c0392b", label=f"deg {point.degree}")
    return [panel]


def _degree_panels(result: LocalDegreeResult) -> List[Panel]:
    panel = Panel(_disk_bounds(result.point, result.rho, 1.5), f"local degree {result.degree}", 0)
    panel.circle(result.point, result.rho)
    panel.marker(result.point, label=f"deg {result.degree}")
    return [panel]


def _regularity_panels(report: RegularityReport) -> List[Panel]:
    flags = []
    if report.openness_suspect:
        flags.append("openness?")
    if report.lightness_suspect:
        flags.append("lightness?")
    panel = Panel(report.region, "regularity: " + (", ".join(flags) or "clean"), 0)
    panel.rect(report.region)
    for w in report.openness_witnesses:
        panel.marker(w, color="#d35400")
    for w in report.lightness_witnesses:
        panel.marker(w, color="#8e44ad")
    return [panel]


def _chart_grid(chart: NormalFormChart) -> List[np.ndarray]:
    """Horizontal and vertical lines across U sampled at cell spacing"""
    bounds = _region_bounds(chart.nd)
    h = chart.nd.grid.cell_size
    steps = max(2, int(np.ceil(max(bounds.width, bounds.height) / h)))
    t = np.linspace(0.0, 1.0, steps + 1)
    lines = []
    for s in np.linspace(0.1, 0.9, GRID_LINES):
        y = bounds.y0 + s * bounds.height
        lines.append(bounds.x0 + t * bounds.width + 1j * y)
        x = bounds.x0 + s * bounds.width
        lines.append(x + 1j * (bounds.y0 + t * bounds.height))
    return lines


def _chart_panels(chart: NormalFormChart) -> List[Panel]:
    nd = chart.nd
    domain = Panel(_region_bounds(nd), "U with ψ-grid", 0)
    domain.cells(nd.region)
    disk = Panel(_disk_bounds(0j, 1.0), f"unit disk, z -> z^{chart.k}", 1)
    disk.circle(0j, 1.0)
    image = Panel(_disk_bounds(nd.image_center, nd.radius), "f(U)", 2)
    image.circle(nd.image_center, nd.radius)
    for i, line in enumerate(_chart_grid(chart)):
        psi = chart.psi(line)
        line = np.where(np.isnan(psi), np.nan, line)
        color = LIFT_COLORS[i % 2]
        domain.polyline(line, color=color, width=0.8)
        disk.polyline(psi, color=color, width=0.8)
        image.polyline(chart.phi_inverse(psi**chart.k), color=color, width=0.8)
    domain.marker(nd.center, label="z")
    return [domain, disk, image]


RenderableResult = Union[
    NormalDomain, LiftResult, List[LiftResult], BranchReport, NormalFormChart, LocalDegreeResult, RegularityReport
]


def render_svg(result: RenderableResult, title: str = "") -> str:
    """
    Render a task result as a deterministic SVG document

    Results without geometry give a document with a caption only.
    """
    if isinstance(result, NormalDomain):
        panels = _normal_domain_panels(result)
    elif isinstance(result, LiftResult):
        panels = _lift_panels([result], title or "lift")
    elif isinstance(result, list) and all(isinstance(r, LiftResult) for r in result):
        panels = _lift_panels(result, title or f"{len(result)} ray lifts")
    elif isinstance(result, BranchReport):
        panels = _branch_panels(result)
    elif isinstance(result, NormalFormChart):
        panels = _chart_panels(result)
    elif isinstance(result, LocalDegreeResult):
        panels = _degree_panels(result)
    elif isinstance(result, RegularityReport):
        panels = _regularity_panels(result)
    else:
        logger.debug(f"No geometry to draw for {type(result).__name__}")
        panel = Panel(Rect(0.0, 0.0, 1.0, 1.0), title or type(result).__name__, 0)
        panels = [panel]
    return SvgDocument(panels).render()


def write_svg(path: Union[str, Path], document: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document, encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path
