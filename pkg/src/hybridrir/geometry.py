"""Planar polygon helpers used by scene validation and image-source tracing."""

import numpy as np

EDGE_TOL = 1e-9


def newell_normal(vertices):
    """Unnormalised polygon normal by Newell's method (length = 2 * area)."""
    v = np.asarray(vertices, dtype=float)
    w = np.roll(v, -1, axis=0)
    return np.array([
        np.sum((v[:, 1] - w[:, 1]) * (v[:, 2] + w[:, 2])),
        np.sum((v[:, 2] - w[:, 2]) * (v[:, 0] + w[:, 0])),
        np.sum((v[:, 0] - w[:, 0]) * (v[:, 1] + w[:, 1])),
    ])


def polygon_plane(vertices):
    """Return ``(unit_normal, offset, area)`` with the plane ``n . x = offset``."""
    n = newell_normal(vertices)
    norm = np.linalg.norm(n)
    area = 0.5 * norm
    if norm == 0.0:
        return np.zeros(3), 0.0, 0.0
    n = n / norm
    offset = float(np.mean(np.asarray(vertices, dtype=float) @ n))
    return n, offset, area


def max_plane_deviation(vertices, normal, offset):
    return float(np.max(np.abs(np.asarray(vertices, dtype=float) @ normal - offset)))


def _project(points, normal):
    # drop the dominant normal axis
    axis = int(np.argmax(np.abs(normal)))
    keep = [i for i in range(3) if i != axis]
    return points[..., keep]


def points_in_polygon(points, vertices, normal, tol=EDGE_TOL):
    """Vectorised inclusion test for points lying on the polygon plane.

    Points within ``tol`` metres of an edge count as inside.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    verts = np.asarray(vertices, dtype=float)
    p2 = _project(pts, normal)
    v2 = _project(verts, normal)
    a = v2
    b = np.roll(v2, -1, axis=0)

    x = p2[:, 0:1]
    y = p2[:, 1:2]
    ay, by = a[:, 1][None, :], b[:, 1][None, :]
    ax, bx = a[:, 0][None, :], b[:, 0][None, :]
    straddle = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (y - ay) * (bx - ax) / (by - ay)
    crossings = np.sum(straddle & (x < x_cross), axis=1)
    inside = (crossings % 2) == 1

    # distance to each edge, measured in 3D
    ea = verts[None, :, :]
    eb = np.roll(verts, -1, axis=0)[None, :, :]
    d = eb - ea
    dd = np.sum(d * d, axis=2)
    rel = pts[:, None, :] - ea
    s = np.clip(np.sum(rel * d, axis=2) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    closest = ea + s[..., None] * d
    dist = np.linalg.norm(pts[:, None, :] - closest, axis=2)
    near_edge = np.min(dist, axis=1) <= tol
    return inside | near_edge


def point_in_polyhedron(point, polygons):
    """Ray-parity test; ``polygons`` is a sequence of ``(vertices, normal, offset)``."""
    p = np.asarray(point, dtype=float)
    direction = np.array([0.5773502691896258, 0.5773502691896257, 0.5773502691896259])
    direction = direction + np.array([1.3e-3, -2.9e-3, 0.7e-3])
    direction /= np.linalg.norm(direction)
    count = 0
    for verts, normal, offset in polygons:
        denom = float(direction @ normal)
        if abs(denom) < 1e-15:
            continue
        t = (offset - float(p @ normal)) / denom
        if t <= 0.0:
            continue
        hit = p + t * direction
        if points_in_polygon(hit, verts, normal, tol=0.0)[0]:
            count += 1
    return count % 2 == 1


def signed_distance_to_planes(points, normals, offsets):
    """``(N, F)`` signed distances, positive on the outward side."""
    return np.atleast_2d(points) @ np.asarray(normals).T - np.asarray(offsets)[None, :]
