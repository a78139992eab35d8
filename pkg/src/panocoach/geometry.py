"""Cross-view math: 2D board <-> 3D world transforms, first-person
projection with frustum culling, distance-compensated billboard sizing,
annotation visibility filtering, and ground-plane minimap footprints.

Conventions: world origin at pitch center, x along the long axis, y along
the short axis, z up, right-handed.  NDC x/y in [-1, 1], +y up, paired with
the forward distance in meters.  The browser board reproduces these formulas
bit-compatibly, so keep them dependency-free and explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .scene import Annotation, Marker, Pose, PitchSpec, shape_ground_points


@dataclass(frozen=True, slots=True)
class BoardPoint:
    u: float  # 0 at x = -length/2, 1 at +length/2
    v: float  # 0 at y = -width/2, 1 at +width/2

    def __post_init__(self):
        if not (0.0 <= self.u <= 1.0 and 0.0 <= self.v <= 1.0):
            raise ValueError(f"board point ({self.u}, {self.v}) outside [0,1]^2")


@dataclass(frozen=True, slots=True)
class CameraParams:
    eye_height_m: float = 1.7
    hfov_rad: float = math.pi / 2.0
    aspect: float = 16.0 / 9.0
    near_m: float = 0.1
    pitch_rad: float = 0.0  # positive looks up

    def __post_init__(self):
        if not (0.0 < self.hfov_rad < math.pi):
            raise ValueError("hfov_rad must be in (0, pi)")
        if self.aspect <= 0 or self.near_m <= 0:
            raise ValueError("aspect and near_m must be > 0")


@dataclass(frozen=True, slots=True)
class NdcPoint:
    x: float
    y: float
    depth_m: float


# Elevated broadcast-style preset: midfield TV gantry looking across the pitch.
BROADCAST_POSE = Pose(x=0.0, y=-45.0, z=18.0, yaw=math.pi / 2.0)
BROADCAST_CAMERA = CameraParams(eye_height_m=0.0, pitch_rad=-0.35)

DEFAULT_D_REF_M = 15.0
DEFAULT_N_MAX = 5

# Frustum-edge slack: tan(pi/4) rounds below 1, which would cull points
# sitting mathematically on the boundary.  Anything within this sliver is
# treated as on-edge and clamped, far below the 1e-6 NDC contract.
_EDGE_EPS = 1e-9


def board_to_world(p: BoardPoint, pitch: PitchSpec) -> tuple[float, float]:
    return ((p.u - 0.5) * pitch.length_m, (p.v - 0.5) * pitch.width_m)


def world_to_board(x: float, y: float, pitch: PitchSpec) -> tuple[BoardPoint, bool]:
    """Inverse of board_to_world; out-of-pitch points clamp to the board edge
    and report out_of_bounds=True."""
    u = x / pitch.length_m + 0.5
    v = y / pitch.width_m + 0.5
    out = not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0)
    if out:
        u = min(1.0, max(0.0, u))
        v = min(1.0, max(0.0, v))
    return BoardPoint(u, v), out


def view_basis(yaw: float, pitch_rad: float) -> tuple[tuple[float, float, float],
                                                      tuple[float, float, float],
                                                      tuple[float, float, float]]:
    """(forward, right, up) for a viewer with the given yaw and camera pitch."""
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch_rad), math.sin(pitch_rad)
    forward = (cy * cp, sy * cp, sp)
    right = (sy, -cy, 0.0)
    up = (right[1] * forward[2] - right[2] * forward[1],
          right[2] * forward[0] - right[0] * forward[2],
          right[0] * forward[1] - right[1] * forward[0])
    return forward, right, up


def fpv_project(viewer: Pose, cam: CameraParams,
                point: tuple[float, float, float]) -> Optional[NdcPoint]:
    """Project a world point into the viewer's normalized device coords.

    Returns None when culled: behind the near plane or outside the frustum.
    """
    eye = (viewer.x, viewer.y, viewer.z + cam.eye_height_m)
    forward, right, up = view_basis(viewer.yaw, cam.pitch_rad)
    dx, dy, dz = point[0] - eye[0], point[1] - eye[1], point[2] - eye[2]
    cf = dx * forward[0] + dy * forward[1] + dz * forward[2]
    if cf <= cam.near_m:
        return None
    half_w = cf * math.tan(cam.hfov_rad / 2.0)
    half_h = half_w / cam.aspect
    cr = dx * right[0] + dy * right[1] + dz * right[2]
    cu = dx * up[0] + dy * up[1] + dz * up[2]
    x = cr / half_w
    y = cu / half_h
    if abs(x) > 1.0 + _EDGE_EPS or abs(y) > 1.0 + _EDGE_EPS:
        return None
    return NdcPoint(min(1.0, max(-1.0, x)), min(1.0, max(-1.0, y)), cf)


def billboard_size(base_m: float, distance_m: float,
                   d_ref_m: float = DEFAULT_D_REF_M) -> float:
    """World-space size that keeps the apparent screen size constant once the
    annotation is beyond the reference distance."""
    if base_m <= 0 or d_ref_m <= 0:
        raise ValueError("base_m and d_ref_m must be > 0")
    if distance_m < 0:
        raise ValueError("distance_m must be >= 0")
    if distance_m <= d_ref_m:
        return base_m
    return base_m * (distance_m / d_ref_m)


def annotation_ground_anchor(a: Annotation) -> tuple[float, float]:
    """Representative ground point (vertex centroid) used for distance
    ordering."""
    pts = shape_ground_points(a.shape)
    n = len(pts)
    return (sum(p[0] for p in pts) / n, sum(p[1] for p in pts) / n)


def select_visible_annotations(annotations, viewer: Pose, n_max: int = DEFAULT_N_MAX,
                               now_ms: int = 0) -> list[Annotation]:
    """At most n_max annotations, most important first.

    Order: priority desc, newest first, then ground distance to the viewer,
    then id — a pure function of the inputs, independent of list order.
    """
    if n_max <= 0:
        return []

    def key(a: Annotation):
        ax, ay = annotation_ground_anchor(a)
        d = math.hypot(ax - viewer.x, ay - viewer.y)
        return (-a.priority, -a.created_at, d, a.id)

    return sorted(annotations, key=key)[:n_max]


@dataclass(frozen=True, slots=True)
class BoardShape:
    """Annotation footprint in board space: z dropped, vertices mapped
    through world_to_board (clamped at the edge)."""
    kind: str  # Polyline | Arrow2D | Zone | Marker
    points: tuple[tuple[float, float], ...]
    text: str = ""


def minimap_footprint(a: Annotation, pitch: PitchSpec) -> BoardShape:
    pts = []
    for x, y in shape_ground_points(a.shape):
        bp, _ = world_to_board(x, y, pitch)
        pts.append((bp.u, bp.v))
    kind = type(a.shape).__name__
    if kind == "Arrow3D":
        kind = "Arrow2D"
    text = a.shape.text if isinstance(a.shape, Marker) else ""
    return BoardShape(kind=kind, points=tuple(pts), text=text)
