import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from hybridrir.geometry import (newell_normal, point_in_polyhedron, points_in_polygon,
                                polygon_plane, signed_distance_to_planes)
from hybridrir.scene import shoebox_room

SQUARE = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)


def test_newell_normal_length_is_twice_area():
    n = newell_normal(SQUARE)
    assert np.allclose(n, [0, 0, 2])


def test_polygon_plane_unit_normal_and_offset():
    n, d, area = polygon_plane(SQUARE + [0, 0, 3])
    assert np.allclose(n, [0, 0, 1])
    assert d == 3.0
    assert area == 1.0


def test_points_in_polygon_interior_edge_outside():
    pts = [[0.5, 0.5, 0], [1.0, 0.3, 0], [1.0 + 5e-10, 0.3, 0], [1.1, 0.5, 0], [0, 0, 0]]
    got = points_in_polygon(pts, SQUARE, np.array([0, 0, 1.0]))
    assert got.tolist() == [True, True, True, False, True]


def test_points_in_polygon_nonconvex():
    ell = np.array([[0, 0, 0], [2, 0, 0], [2, 1, 0], [1, 1, 0], [1, 2, 0], [0, 2, 0]], float)
    got = points_in_polygon([[0.5, 1.5, 0], [1.5, 1.5, 0], [1.5, 0.5, 0]], ell, np.array([0, 0, 1.0]))
    assert got.tolist() == [True, False, True]


def _box_planes(dims):
    out = []
    for poly in shoebox_room(dims):
        n, d, _ = poly.plane
        out.append((poly.array, n, d))
    return out


@given(st.floats(0.01, 3.99), st.floats(0.01, 2.99), st.floats(0.01, 1.99))
def test_point_in_box_interior(x, y, z):
    assert point_in_polyhedron([x, y, z], _box_planes((4, 3, 2)))


@given(st.floats(4.01, 50), st.floats(-5, 5), st.floats(-5, 5))
def test_point_outside_box(x, y, z):
    assert not point_in_polyhedron([x, y, z], _box_planes((4, 3, 2)))


def test_signed_distances_negative_inside():
    planes = _box_planes((4, 3, 2))
    normals = np.array([n for _, n, _ in planes])
    offsets = np.array([d for _, _, d in planes])
    sd = signed_distance_to_planes([1, 1, 1], normals, offsets)
    assert sd.shape == (1, 6)
    assert np.all(sd < 0)
