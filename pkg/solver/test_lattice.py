"""Pruebas de cajas, fronteras y adyacencia del retículo."""
import numpy as np
import pytest

from solver.errors import LatticeError
from solver.lattice import Exhaustion, LatticeBox, boundary, is_connected, l1_distance, neighbors


def test_neighbors_are_unit_steps():
    nbrs = neighbors((0, 0, 0), 3)
    assert len(nbrs) == 6
    assert all(l1_distance(q, (0, 0, 0)) == 1 for q in nbrs)
    assert nbrs == sorted(nbrs)


def test_boundary_of_single_vertex_is_its_neighbors():
    assert boundary([(2, -1)], 2) == neighbors((2, -1), 2)


def test_boundary_of_box_matches_generic_boundary():
    box = LatticeBox((0, 0), (3, 2))
    generic = boundary(box.interior, 2)
    assert [tuple(p) for p in box.boundary] == generic
    # Sin esquinas: 2·(4 + 3) vértices
    assert len(generic) == 14


def test_boundary_empty_domain():
    with pytest.raises(LatticeError, match="empty domain"):
        boundary([], 2)


def test_box_sizes_and_masks():
    box = LatticeBox.cube(3, 2)
    assert box.shape == (5, 5, 5)
    assert box.size == 125
    assert int(box.interior_mask.sum()) == 125
    # Cada cara aporta 5×5 vértices de δΩ
    assert int(box.boundary_mask.sum()) == 6 * 25
    assert not np.any(box.interior_mask & box.boundary_mask)
    assert int(box.closure_mask.sum()) == 125 + 150


def test_collar_is_interior_next_to_boundary():
    box = LatticeBox.cube(2, 3)
    collar = {tuple(p) for p in box.padded_coords[box.collar_mask]}
    expected = {
        tuple(p) for p in box.interior
        if any(box.in_boundary(q) for q in neighbors(p, 2))
    }
    assert collar == expected


def test_index_point_roundtrip():
    box = LatticeBox((-1, 2, 0), (2, 4, 1))
    for i in range(box.size):
        assert box.index(box.point(i)) == i
    with pytest.raises(LatticeError):
        box.index((5, 5, 5))


def test_membership():
    box = LatticeBox.cube(2, 1)
    assert box.contains((1, -1))
    assert box.in_boundary((2, 0))
    # La esquina acolchada no está en Ω̄
    assert not box.in_boundary((2, 2))
    assert not box.in_closure((2, 2))


def test_is_connected():
    assert is_connected(LatticeBox.cube(2, 2).interior)
    assert not is_connected([(0, 0), (2, 0)])
    assert not is_connected([])


def test_invalid_boxes():
    with pytest.raises(LatticeError, match="empty domain"):
        LatticeBox((0, 0), (-1, 0))
    with pytest.raises(LatticeError):
        LatticeBox.cube(1, 3)
    with pytest.raises(LatticeError):
        LatticeBox.centered((0, 0), -1)


def test_exhaustion_nesting():
    base = LatticeBox.cube(2, 1)
    family = Exhaustion.from_radii((0, 0), (2, 4, 7), base)
    assert len(family) == 3
    assert all(a.is_subbox(b) for a, b in zip(family.boxes, family.boxes[1:]))
    with pytest.raises(LatticeError):
        Exhaustion.from_radii((0, 0), (3, 3), base)
    with pytest.raises(LatticeError):
        Exhaustion.from_radii((0, 0), (1, 2), LatticeBox.cube(2, 2))


def test_shifted_box():
    box = LatticeBox.cube(2, 2).shifted((3, -1))
    assert box.center == (3, -1)
    assert box.radius == 2
