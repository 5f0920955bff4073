import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfcascade.dyadic import (
    DyadicIndex,
    ancestor,
    ancestor_paths,
    deinterleave,
    index_of_point,
    interleave,
    neighbors,
)


class TestAncestor:
    def test_floor_example(self):
        assert ancestor(DyadicIndex(4, (13,)), 2) == DyadicIndex(2, (3,))

    def test_root(self):
        assert ancestor(DyadicIndex(4, (13,)), 0) == DyadicIndex(0, (0,))

    def test_2d(self):
        assert ancestor(DyadicIndex(5, (21, 6)), 3) == DyadicIndex(3, (5, 1))

    def test_identity(self):
        idx = DyadicIndex(6, (41,))
        assert ancestor(idx, 6) == idx

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            ancestor(DyadicIndex(3, (2,)), 4)
        with pytest.raises(ValueError):
            ancestor(DyadicIndex(3, (2,)), -1)


class TestNeighbors:
    def test_interior_1d(self):
        ns = neighbors(DyadicIndex(3, (4,)))
        assert sorted(m.coords[0] for m in ns.members) == [3, 4, 5]

    def test_boundary_clamp(self):
        ns = neighbors(DyadicIndex(3, (0,)))
        assert sorted(m.coords[0] for m in ns.members) == [0, 1]

    def test_interior_2d(self):
        ns = neighbors(DyadicIndex(2, (1, 1)))
        assert len(ns.members) == 9
        assert {m.coords for m in ns.members} == {(a, b) for a in (0, 1, 2)
                                                  for b in (0, 1, 2)}

    def test_corner_2d(self):
        ns = neighbors(DyadicIndex(2, (0, 3)))
        assert len(ns.members) == 4

    def test_center_is_member(self):
        idx = DyadicIndex(4, (7, 2))
        assert idx in neighbors(idx).members


class TestIndexOfPoint:
    def test_half(self):
        assert index_of_point(0.5, 1).coords == (1,)

    def test_right_edge_clamps(self):
        assert index_of_point(1.0, 3).coords == (7,)

    def test_2d(self):
        assert index_of_point((0.26, 0.74), 2).coords == (1, 2)

    def test_outside(self):
        with pytest.raises(ValueError):
            index_of_point(1.5, 3)


@given(j=st.integers(0, 20), jp=st.integers(0, 20), m=st.integers(0, 20),
       bits=st.integers(0, 2**40 - 1))
def test_ancestor_transitive(j, jp, m, bits):
    m, jp, j = sorted((j, jp, m))
    idx = DyadicIndex(j, (bits % (1 << j),))
    assert ancestor(ancestor(idx, jp), m) == ancestor(idx, m)


@given(j=st.integers(1, 10), a=st.integers(0, 2**10), b=st.integers(0, 2**10))
def test_neighbor_symmetry(j, a, b):
    top = (1 << j) - 1
    ia, ib = DyadicIndex(j, (min(a, top),)), DyadicIndex(j, (min(b, top),))
    assert (ib in neighbors(ia).members) == (ia in neighbors(ib).members)


@given(x=st.floats(0.0, 1.0), j=st.integers(0, 24), jp=st.integers(0, 24))
@settings(max_examples=200)
def test_point_cube_consistency(x, j, jp):
    # scaling by 2^j is exact in binary floats, so this holds with equality
    j, jp = min(j, jp), max(j, jp)
    assert index_of_point(x, j) == ancestor(index_of_point(x, jp), j)


@given(j=st.integers(0, 15), n=st.integers(1, 32), data=st.data())
def test_interleave_roundtrip(j, n, data):
    top = 1 << j
    coords = np.array([[data.draw(st.integers(0, top - 1)) for _ in range(2)]
                       for _ in range(n)], dtype=np.int64)
    paths = interleave(coords, j)
    assert np.all(deinterleave(paths, j, 2) == coords)


def test_descendants_are_contiguous():
    # the point of the path encoding: a cube's subtree is one index range
    j, jp = 3, 6
    cube = DyadicIndex(j, (2, 5))
    base = cube.path_index()
    lo, hi = base << (2 * (jp - j)), (base + 1) << (2 * (jp - j))
    all_paths = np.arange(1 << (2 * jp), dtype=np.int64)
    anc = ancestor_paths(all_paths, jp, j, 2)
    inside = np.nonzero(anc == base)[0]
    assert inside[0] == lo and inside[-1] == hi - 1 and len(inside) == hi - lo


def test_path_index_matches_interleave():
    idx = DyadicIndex(4, (11, 6))
    assert idx.path_index() == int(interleave(np.array([[11, 6]]), 4)[0])
