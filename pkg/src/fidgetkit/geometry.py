"""Oriented rectangles and their intersection test (separating axis theorem)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fidgetkit.errors import DataError


@dataclass(frozen=True)
class LimbBox:
    """An oriented rectangle: center, unit axis, and half-extents along/across it."""

    center: tuple[float, float]
    axis: tuple[float, float]
    half_length: float
    half_width: float

    def __post_init__(self):
        if self.half_length < 0 or self.half_width < 0:
            raise DataError("box half-extents must be non-negative")
        if not all(np.isfinite(v) for v in (*self.center, *self.axis, self.half_length, self.half_width)):
            raise DataError("box parameters must be finite")

    @property
    def is_axis_aligned(self) -> bool:
        ax, ay = self.axis
        return (abs(ax) == 1.0 and ay == 0.0) or (ax == 0.0 and abs(ay) == 1.0)

    def corners(self) -> np.ndarray:
        c = np.asarray(self.center)
        u = np.asarray(self.axis)
        v = np.array([-u[1], u[0]])
        du = u * self.half_length
        dv = v * self.half_width
        return np.array([c + du + dv, c + du - dv, c - du - dv, c - du + dv])

    @classmethod
    def from_points(cls, points: np.ndarray) -> "LimbBox":
        """Smallest axis-aligned box bounding the given points."""
        points = np.asarray(points, dtype=float)
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        center = (lo + hi) / 2
        half = (hi - lo) / 2
        return cls(center=(float(center[0]), float(center[1])), axis=(1.0, 0.0),
                   half_length=float(half[0]), half_width=float(half[1]))

    @classmethod
    def from_segment(cls, a: np.ndarray, b: np.ndarray, width: float) -> "LimbBox":
        """Oriented box whose long side spans the segment a->b with the given width.

        Coincident endpoints degenerate to a width x width square at the point.
        """
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = b - a
        length = float(np.linalg.norm(d))
        center = (a + b) / 2
        if length == 0.0:
            return cls(center=(float(center[0]), float(center[1])), axis=(1.0, 0.0),
                       half_length=width / 2, half_width=width / 2)
        u = d / length
        return cls(center=(float(center[0]), float(center[1])), axis=(float(u[0]), float(u[1])),
                   half_length=length / 2, half_width=width / 2)


def _project(corners: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    d = corners @ axis
    return float(d.min()), float(d.max())


def boxes_overlap(a: LimbBox, b: LimbBox) -> bool:
    """True when the rectangles intersect (touching edges count).

    Axis-aligned pairs use interval checks; the general case projects both
    corner sets onto the four edge normals and looks for a separating axis.
    """
    if a.is_axis_aligned and b.is_axis_aligned:
        ax, ay = abs(a.half_length), abs(a.half_width)
        if a.axis[0] == 0.0:
            ax, ay = ay, ax
        bx, by = abs(b.half_length), abs(b.half_width)
        if b.axis[0] == 0.0:
            bx, by = by, bx
        return (
            abs(a.center[0] - b.center[0]) <= ax + bx
            and abs(a.center[1] - b.center[1]) <= ay + by
        )

    # bounding-circle rejection before the projection work
    dx = a.center[0] - b.center[0]
    dy = a.center[1] - b.center[1]
    reach = np.hypot(a.half_length, a.half_width) + np.hypot(b.half_length, b.half_width)
    if dx * dx + dy * dy > reach * reach:
        return False

    ca, cb = a.corners(), b.corners()
    axes = []
    for box in (a, b):
        u = np.asarray(box.axis)
        axes.append(u)
        axes.append(np.array([-u[1], u[0]]))
    for axis in axes:
        lo_a, hi_a = _project(ca, axis)
        lo_b, hi_b = _project(cb, axis)
        if hi_a < lo_b or hi_b < lo_a:
            return False
    return True
