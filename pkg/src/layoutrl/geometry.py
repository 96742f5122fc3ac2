"""Axis-aligned geometry primitives and overlap measures.

Everything downstream (scenes, the simulator, rewards) is built on three
shapes: a 3D point, a 3D axis-aligned box, and a 2D axis-aligned rectangle
living on one of the two working planes (the x-y floor plan or the y-z
elevation).  Boxes and rectangles are stored as center + size, never as
corner pairs, so projections and moves are single-component edits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Plane(Enum):
    """The two working projections of the room."""

    XY = "xy"
    YZ = "yz"


@dataclass(frozen=True)
class Vec3:
    """A point or extent in room coordinates (meters)."""

    x: float
    y: float
    z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class Box3:
    """Axis-aligned 3D box given by center and (positive) size."""

    center: Vec3
    size: Vec3

    @property
    def min_corner(self) -> Vec3:
        return Vec3(self.center.x - self.size.x / 2.0,
                    self.center.y - self.size.y / 2.0,
                    self.center.z - self.size.z / 2.0)

    @property
    def max_corner(self) -> Vec3:
        return Vec3(self.center.x + self.size.x / 2.0,
                    self.center.y + self.size.y / 2.0,
                    self.center.z + self.size.z / 2.0)

    @property
    def volume(self) -> float:
        # corner differences, not size products: matches the overlap
        # arithmetic in box_iou3d so identical boxes give IoU exactly 1.0
        lo, hi = self.min_corner, self.max_corner
        return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z)


@dataclass(frozen=True)
class Rect2:
    """Axis-aligned rectangle on one working plane.

    ``cu``/``cv`` and ``su``/``sv`` are center and size along the plane's
    two axes: (x, y) for ``Plane.XY``, (y, z) for ``Plane.YZ``.
    """

    cu: float
    cv: float
    su: float
    sv: float
    plane: Plane

    @property
    def min_u(self) -> float:
        return self.cu - self.su / 2.0

    @property
    def max_u(self) -> float:
        return self.cu + self.su / 2.0

    @property
    def min_v(self) -> float:
        return self.cv - self.sv / 2.0

    @property
    def max_v(self) -> float:
        return self.cv + self.sv / 2.0

    @property
    def area(self) -> float:
        # corner differences, not size products: matches the overlap
        # arithmetic in rect_iou so identical rectangles give IoU exactly 1.0
        return (self.max_u - self.min_u) * (self.max_v - self.min_v)


def _require_positive_sizes(*sizes: float) -> None:
    for s in sizes:
        if not (s > 0.0) or not math.isfinite(s):
            raise ValueError(f"sizes must be positive and finite, got {s!r}")


def project_xy(box: Box3) -> Rect2:
    """Footprint of a box on the floor plan (x right, y up)."""
    _require_positive_sizes(box.size.x, box.size.y, box.size.z)
    return Rect2(box.center.x, box.center.y, box.size.x, box.size.y, Plane.XY)


def project_yz(box: Box3) -> Rect2:
    """Silhouette of a box on the elevation plane (y right, z up)."""
    _require_positive_sizes(box.size.x, box.size.y, box.size.z)
    return Rect2(box.center.y, box.center.z, box.size.y, box.size.z, Plane.YZ)


def project(box: Box3, plane: Plane) -> Rect2:
    """Project onto the requested plane."""
    return project_xy(box) if plane is Plane.XY else project_yz(box)


def _overlap_1d(lo_a: float, hi_a: float, lo_b: float, hi_b: float) -> float:
    return max(0.0, min(hi_a, hi_b) - max(lo_a, lo_b))


def rect_iou(a: Rect2, b: Rect2) -> float:
    """Intersection-over-union of two rectangles on the same plane.

    Args:
        a: First rectangle.
        b: Second rectangle; must live on the same plane as ``a``.

    Returns:
        IoU in [0, 1].  Touching edges count as zero-area intersection.

    Raises:
        ValueError: if the planes differ or a size is not positive/finite.
    """
    if a.plane is not b.plane:
        raise ValueError(f"plane mismatch: {a.plane.value} vs {b.plane.value}")
    _require_positive_sizes(a.su, a.sv, b.su, b.sv)
    inter = (_overlap_1d(a.min_u, a.max_u, b.min_u, b.max_u)
             * _overlap_1d(a.min_v, a.max_v, b.min_v, b.max_v))
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    # corner arithmetic can land a hair above 1.0 for identical inputs
    return min(1.0, inter / union)


def box_iou3d(a: Box3, b: Box3) -> float:
    """Intersection-over-union of two 3D boxes (volume ratio in [0, 1])."""
    _require_positive_sizes(a.size.x, a.size.y, a.size.z,
                            b.size.x, b.size.y, b.size.z)
    amin, amax = a.min_corner, a.max_corner
    bmin, bmax = b.min_corner, b.max_corner
    inter = (_overlap_1d(amin.x, amax.x, bmin.x, bmax.x)
             * _overlap_1d(amin.y, amax.y, bmin.y, bmax.y)
             * _overlap_1d(amin.z, amax.z, bmin.z, bmax.z))
    if inter == 0.0:
        return 0.0
    union = a.volume + b.volume - inter
    return min(1.0, inter / union)


def rect_inside(inner: Rect2, outer: Rect2, tol: float = 0.0) -> bool:
    """Closed containment test: is ``inner`` fully within ``outer``?

    Touching the boundary counts as inside.  ``tol`` loosens every face by
    that amount; callers doing float-accumulating motion pass a tiny slack,
    the default is exact.
    """
    if inner.plane is not outer.plane:
        raise ValueError(f"plane mismatch: {inner.plane.value} vs {outer.plane.value}")
    return (inner.min_u >= outer.min_u - tol
            and inner.max_u <= outer.max_u + tol
            and inner.min_v >= outer.min_v - tol
            and inner.max_v <= outer.max_v + tol)


def box_inside(inner: Box3, outer: Box3, tol: float = 0.0) -> bool:
    """Closed containment test for 3D boxes (touching faces allowed)."""
    imin, imax = inner.min_corner, inner.max_corner
    omin, omax = outer.min_corner, outer.max_corner
    return (imin.x >= omin.x - tol and imax.x <= omax.x + tol
            and imin.y >= omin.y - tol and imax.y <= omax.y + tol
            and imin.z >= omin.z - tol and imax.z <= omax.z + tol)


def boxes_overlap(a: Box3, b: Box3) -> bool:
    """True when two boxes share positive volume (face contact is not overlap)."""
    amin, amax = a.min_corner, a.max_corner
    bmin, bmax = b.min_corner, b.max_corner
    return (min(amax.x, bmax.x) > max(amin.x, bmin.x)
            and min(amax.y, bmax.y) > max(amin.y, bmin.y)
            and min(amax.z, bmax.z) > max(amin.z, bmin.z))
