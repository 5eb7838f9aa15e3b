"""Bond-length energy scans, not-a-knot cubic-spline fitting, and artifacts.

The spline is solved from the moment (second-derivative) system with
not-a-knot end conditions, then converted to per-segment polynomial rows in
the layout ``sum_k coefficients[k][i] * (x - x_i)**(3-k)``; row 0 therefore
holds the cubic-term coefficients and duplicates its first/last pair by
construction.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .chemtools import EnergyBackend, EnergyError, compute_energy, diatomic_structure

DEFAULT_PLOT_NAME = "plot_O2_spline_fit_potential.svg"
DEFAULT_SPLINE_NAME = "spline_params.json"
DEFAULT_RESULTS_NAME = "calculation_results.json"


class SplineInputError(ValueError):
    """Knot abscissae are unsorted or duplicated."""


class InsufficientDataError(ValueError):
    """Fewer samples than the not-a-knot fit requires."""


class ScanAbortedError(EnergyError):
    """The backend failed mid-scan; partial results are attached."""

    def __init__(self, message: str, partial: "ScanResult"):
        super().__init__(message)
        self.partial = partial


@dataclass
class ScanResult:
    bond_lengths: list[float]
    energies: list[float]
    backend_label: str = ""

    def __post_init__(self) -> None:
        if len(self.bond_lengths) != len(self.energies):
            raise ValueError("bond_lengths and energies must have equal length")
        if any(b <= a for a, b in zip(self.bond_lengths, self.bond_lengths[1:])):
            raise ValueError("bond lengths must be strictly increasing")


@dataclass
class SplineModel:
    knots: list[float]
    coefficients: list[list[float]]  # 4 rows x (n-1) columns

    def __post_init__(self) -> None:
        if len(self.coefficients) != 4:
            raise ValueError("coefficients must have exactly 4 rows")
        segments = len(self.knots) - 1
        if any(len(row) != segments for row in self.coefficients):
            raise ValueError("each coefficient row must have (knots - 1) columns")


def scan_grid(r_start: float, r_end: float, step: float) -> list[float]:
    """Sample points r_start + i*step with an epsilon-guarded count."""
    if step <= 0:
        raise ValueError("step must be positive")
    if r_start > r_end:
        raise ValueError("r_start must not exceed r_end")
    count = int(math.floor((r_end - r_start) / step + 1e-9)) + 1
    return [r_start + i * step for i in range(count)]


def run_bond_scan(
    diatomic: tuple[str, str],
    r_start: float,
    r_end: float,
    step: float,
    backend: EnergyBackend,
) -> ScanResult:
    """Energy at each grid separation of the two-atom structure.

    A backend failure aborts the scan with the partial result attached.
    """
    lengths: list[float] = []
    energies: list[float] = []
    for r in scan_grid(r_start, r_end, step):
        structure = diatomic_structure(diatomic, r)
        try:
            energy = compute_energy(structure, backend)
        except EnergyError as exc:
            raise ScanAbortedError(
                f"backend failed at r={r:.6f}: {exc}",
                partial=ScanResult(lengths, energies, backend.label),
            ) from exc
        lengths.append(r)
        energies.append(energy)
    return ScanResult(lengths, energies, backend.label)


def fit_cubic_spline(xs: Sequence[float], ys: Sequence[float]) -> SplineModel:
    """Interpolating piecewise cubic with not-a-knot boundary conditions.

    Solves the n x n moment system (third-derivative continuity imposed at
    the second and second-to-last knots), then converts moments to segment
    polynomial rows.
    """
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    if len(xs) != len(ys):
        raise SplineInputError("xs and ys must have equal length")
    if len(xs) < 4:
        raise InsufficientDataError("not-a-knot fit needs at least 4 points")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise SplineInputError("xs must be strictly increasing")

    n = len(xs)
    h = [xs[i + 1] - xs[i] for i in range(n - 1)]
    A = np.zeros((n, n))
    rhs = np.zeros(n)

    A[0, 0] = -h[1]
    A[0, 1] = h[0] + h[1]
    A[0, 2] = -h[0]
    for i in range(1, n - 1):
        A[i, i - 1] = h[i - 1]
        A[i, i] = 2.0 * (h[i - 1] + h[i])
        A[i, i + 1] = h[i]
        rhs[i] = 6.0 * (
            (ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]
        )
    A[n - 1, n - 3] = -h[n - 2]
    A[n - 1, n - 2] = h[n - 3] + h[n - 2]
    A[n - 1, n - 1] = -h[n - 3]

    moments = np.linalg.solve(A, rhs)

    cubic: list[float] = []
    quad: list[float] = []
    linear: list[float] = []
    const: list[float] = []
    for i in range(n - 1):
        cubic.append((moments[i + 1] - moments[i]) / (6.0 * h[i]))
        quad.append(moments[i] / 2.0)
        linear.append(
            (ys[i + 1] - ys[i]) / h[i] - h[i] * (2.0 * moments[i] + moments[i + 1]) / 6.0
        )
        const.append(ys[i])
    return SplineModel(knots=list(xs), coefficients=[cubic, quad, linear, const])


def evaluate_spline(model: SplineModel, x: float) -> float:
    """Evaluate the owning segment's cubic; end segments extrapolate."""
    knots = model.knots
    i = bisect_right(knots, x) - 1
    i = min(max(i, 0), len(knots) - 2)
    dx = x - knots[i]
    c = model.coefficients
    return ((c[0][i] * dx + c[1][i]) * dx + c[2][i]) * dx + c[3][i]


def find_minimum(scan: ScanResult) -> tuple[float, float]:
    """Discrete argmin over the sampled data, ties toward smaller r."""
    if not scan.energies:
        raise ValueError("scan is empty")
    best = 0
    for i, e in enumerate(scan.energies):
        if e < scan.energies[best]:
            best = i
    return scan.bond_lengths[best], scan.energies[best]


def refine_minimum(
    model: SplineModel, lo: float, hi: float, tol: float = 1e-10
) -> tuple[float, float]:
    """Golden-section search for the continuous spline minimum.

    Refinement beyond the discrete scan minimum; not part of the published
    pipeline's report.
    """
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    while abs(b - a) > tol:
        if evaluate_spline(model, c) < evaluate_spline(model, d):
            b = d
        else:
            a = c
        c = b - inv_phi * (b - a)
        d = a + inv_phi * (b - a)
    x = (a + b) / 2.0
    return x, evaluate_spline(model, x)


def write_scan_results(scan: ScanResult, path: str | Path) -> None:
    """JSON object with exactly the keys bond_lengths and energies."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"bond_lengths": scan.bond_lengths, "energies": scan.energies}, fh)


def read_scan_results(path: str | Path, backend_label: str = "") -> ScanResult:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return ScanResult(data["bond_lengths"], data["energies"], backend_label)


def write_spline_params(model: SplineModel, path: str | Path) -> None:
    """JSON object with keys knots and coefficients (row 0 = cubic terms)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"knots": model.knots, "coefficients": model.coefficients}, fh)


def read_spline_params(path: str | Path) -> SplineModel:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return SplineModel(knots=data["knots"], coefficients=data["coefficients"])


def render_scan_plot_svg(
    scan: ScanResult,
    model: SplineModel,
    path: str | Path,
    *,
    width: int = 640,
    height: int = 480,
    samples: int = 200,
) -> None:
    """Standalone SVG: one circle per data point, a spline polyline, axis
    labels, and a Data / Spline Fit legend."""
    if not scan.energies:
        raise ValueError("scan is empty")
    margin = {"left": 70, "right": 20, "top": 20, "bottom": 50}
    plot_w = width - margin["left"] - margin["right"]
    plot_h = height - margin["top"] - margin["bottom"]

    x_lo, x_hi = min(scan.bond_lengths), max(scan.bond_lengths)
    curve_x = [x_lo + (x_hi - x_lo) * i / (samples - 1) for i in range(samples)]
    curve_y = [evaluate_spline(model, x) for x in curve_x]
    y_values = scan.energies + curve_y
    y_lo, y_hi = min(y_values), max(y_values)
    x_pad = (x_hi - x_lo) * 0.05 or 1.0
    y_pad = (y_hi - y_lo) * 0.05 or 1.0
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    def sx(x: float) -> float:
        return margin["left"] + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return margin["top"] + (y_hi - y) / (y_hi - y_lo) * plot_h

    svg = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        width=str(width),
        height=str(height),
        viewBox=f"0 0 {width} {height}",
    )
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    axis_style = {"stroke": "black", "stroke-width": "1"}
    ET.SubElement(svg, "line", x1=str(margin["left"]), y1=str(margin["top"] + plot_h),
                  x2=str(margin["left"] + plot_w), y2=str(margin["top"] + plot_h), **axis_style)
    ET.SubElement(svg, "line", x1=str(margin["left"]), y1=str(margin["top"]),
                  x2=str(margin["left"]), y2=str(margin["top"] + plot_h), **axis_style)

    points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(curve_x, curve_y))
    ET.SubElement(svg, "polyline", points=points, fill="none", stroke="#d62728",
                  attrib={"stroke-width": "1.5", "class": "spline"})
    for x, y in zip(scan.bond_lengths, scan.energies):
        ET.SubElement(svg, "circle", cx=f"{sx(x):.2f}", cy=f"{sy(y):.2f}", r="3.5",
                      fill="#1f77b4", attrib={"class": "data"})

    x_label = ET.SubElement(svg, "text", x=str(margin["left"] + plot_w / 2),
                            y=str(height - 12), attrib={"text-anchor": "middle"})
    x_label.text = "Bond Length (Å)"
    y_label = ET.SubElement(
        svg, "text", x="18", y=str(margin["top"] + plot_h / 2),
        attrib={
            "text-anchor": "middle",
            "transform": f"rotate(-90 18 {margin['top'] + plot_h / 2})",
        },
    )
    y_label.text = "Energy (Hartree)"

    legend_x = margin["left"] + plot_w - 130
    legend_y = margin["top"] + 12
    ET.SubElement(svg, "circle", cx=str(legend_x), cy=str(legend_y), r="3.5",
                  fill="#1f77b4", attrib={"class": "legend"})
    data_text = ET.SubElement(svg, "text", x=str(legend_x + 10), y=str(legend_y + 4))
    data_text.text = "Data"
    ET.SubElement(svg, "line", x1=str(legend_x - 6), y1=str(legend_y + 18),
                  x2=str(legend_x + 6), y2=str(legend_y + 18), stroke="#d62728",
                  attrib={"stroke-width": "1.5"})
    fit_text = ET.SubElement(svg, "text", x=str(legend_x + 10), y=str(legend_y + 22))
    fit_text.text = "Spline Fit"

    tree = ET.ElementTree(svg)
    tree.write(path, encoding="unicode", xml_declaration=True)
