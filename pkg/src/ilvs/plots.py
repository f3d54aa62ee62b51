"""Minimal static SVG plots of episode traces.

Hand-rolled SVG keeps the output deterministic and dependency-free: one
polyline per corner feature, circles at the start positions, crosses at the
desired positions.
"""

from __future__ import annotations

import numpy as np

FEATURE_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")


def _polyline(points, color: str, width: float = 1.5) -> str:
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return (f'<polyline fill="none" stroke="{color}" '
            f'stroke-width="{width}" points="{coords}"/>')


def _cross(x: float, y: float, r: float, color: str) -> str:
    return (f'<path stroke="{color}" stroke-width="2" fill="none" '
            f'd="M {x - r:.2f} {y - r:.2f} L {x + r:.2f} {y + r:.2f} '
            f'M {x - r:.2f} {y + r:.2f} L {x + r:.2f} {y - r:.2f}"/>')


def feature_trajectories_svg(trace, desired_px, width: int, height: int) -> str:
    """Image-plane corner trajectories with start markers and goal crosses."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" '
        f'fill="white" stroke="#888"/>',
    ]
    desired_px = np.asarray(desired_px).reshape(4, 2)
    for i in range(4):
        color = FEATURE_COLORS[i]
        if len(trace.pixels):
            pts = trace.pixels[:, 2 * i : 2 * i + 2]
            parts.append(_polyline(pts, color))
            parts.append(f'<circle cx="{pts[0, 0]:.2f}" cy="{pts[0, 1]:.2f}" '
                         f'r="6" fill="{color}"/>')
        parts.append(_cross(desired_px[i, 0], desired_px[i, 1], 8.0, color))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def error_vs_time_svg(trace, desired_px, width: int = 640, height: int = 360) -> str:
    """Per-corner pixel error against time, plus the mean in black."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" '
        f'fill="white" stroke="#888"/>',
    ]
    if len(trace.pixels):
        diff = (trace.pixels - np.asarray(desired_px)).reshape(-1, 4, 2)
        per_corner = np.linalg.norm(diff, axis=2)
        t = trace.t
        t_span = max(t[-1] - t[0], 1e-9)
        top = max(float(per_corner.max()), 1e-9)
        margin = 30.0

        def to_xy(ts, vals):
            xs = margin + (ts - t[0]) / t_span * (width - 2 * margin)
            ys = height - margin - vals / top * (height - 2 * margin)
            return np.stack([xs, ys], axis=1)

        for i in range(4):
            parts.append(_polyline(to_xy(t, per_corner[:, i]), FEATURE_COLORS[i], 1.0))
        parts.append(_polyline(to_xy(t, per_corner.mean(axis=1)), "#000000", 2.0))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(svg: str, path) -> None:
    with open(path, "w") as f:
        f.write(svg)
