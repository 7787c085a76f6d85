import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capkit.grid import (DiscreteMeasure, DyadicCube, DyadicSet, FormatError, GridError,
                         GridFunction, RootCube, compose, cube_children, level_indices,
                         morton_code, morton_decode, morton_perm, parse_cube, read_grid,
                         restrict, write_grid)


def test_children_d1():
    root = RootCube(1, 3)
    assert cube_children(DyadicCube(0, (0,)), root) == [DyadicCube(1, (0,)), DyadicCube(1, (1,))]


def test_children_d2_lexicographic():
    kids = cube_children(DyadicCube(0, (0, 0)), RootCube(2, 2))
    assert [k.index for k in kids] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert all(k.level == 1 for k in kids)


def test_leaf_has_no_children():
    with pytest.raises(GridError, match="leaf has no children"):
        cube_children(DyadicCube(3, (5,)), RootCube(1, 3))


def test_restrict_examples():
    f = GridFunction(RootCube(1, 2), [1, 2, 3, 4])
    assert list(restrict(f, DyadicCube(1, (1,))).values) == [3, 4]
    assert list(restrict(f, DyadicCube(2, (0,))).values) == [1]
    assert restrict(f, f.root.top) == f


def test_restrict_keeps_geometry():
    f = GridFunction(RootCube(2, 3, (1.0, -1.0), 2.0), np.arange(64.0))
    g = restrict(f, DyadicCube(1, (1, 0)))
    assert g.root.origin == (2.0, -1.0)
    assert g.root.side == 1.0 and g.root.n == 2


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 3), data=st.data())
def test_tiling(d, data):
    n = data.draw(st.integers(1, 6 // d + 1))
    root = RootCube(d, n)
    m = data.draw(st.integers(0, n - 1))
    idx = tuple(data.draw(st.integers(0, (1 << m) - 1)) for _ in range(d))
    c = DyadicCube(m, idx)
    cover = np.zeros(root.shape, dtype=int)
    for k in cube_children(c, root):
        cover[k.leaf_slices(n)] += 1
        assert k.parent() == c and c.contains(k)
    own = np.zeros(root.shape, dtype=int)
    own[c.leaf_slices(n)] = 1
    assert np.array_equal(cover, own)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 2), data=st.data())
def test_restrict_composes(d, data):
    n = data.draw(st.integers(2, 8 // d))
    root = RootCube(d, n)
    f = GridFunction(root, np.arange(root.ncells, dtype=float))
    m1 = data.draw(st.integers(0, n))
    c1 = DyadicCube(m1, tuple(data.draw(st.integers(0, (1 << m1) - 1)) for _ in range(d)))
    m2 = data.draw(st.integers(0, n - m1))
    c2 = DyadicCube(m2, tuple(data.draw(st.integers(0, (1 << m2) - 1)) for _ in range(d)))
    assert restrict(restrict(f, c1), c2) == restrict(f, compose(c1, c2))


@pytest.mark.parametrize("d,n", [(1, 5), (2, 3), (3, 2)])
def test_morton_blocks_are_cubes(d, n):
    root = RootCube(d, n)
    p = morton_perm(d, n)
    for m in range(n + 1):
        per = 1 << (d * (n - m))
        for code, idx in enumerate(level_indices(d, m)):
            c = DyadicCube(m, tuple(int(i) for i in idx))
            assert morton_code(c.index, m) == code
            assert morton_decode(code, m, d) == c.index
            block = np.zeros(root.ncells, dtype=bool)
            block[p[code * per:(code + 1) * per]] = True
            own = np.zeros(root.shape, dtype=bool)
            own[c.leaf_slices(n)] = True
            assert np.array_equal(block, own.reshape(-1))


def test_root_validation():
    with pytest.raises(GridError, match="not supported"):
        RootCube(4, 1)
    with pytest.raises(GridError, match="side"):
        RootCube(1, 1, side=0.0)
    with pytest.raises(GridError, match="too large"):
        RootCube(3, 11)
    RootCube(3, 12, max_bits=36)


def test_cube_validation_and_parse():
    root = RootCube(2, 2)
    assert parse_cube("1:0,1") == DyadicCube(1, (0, 1))
    assert str(DyadicCube(1, (0, 1))) == "1:0,1"
    with pytest.raises(GridError):
        root.validate(DyadicCube(1, (2, 0)))
    with pytest.raises(GridError):
        parse_cube("1-0")


def test_payload_invariants():
    root = RootCube(1, 2)
    with pytest.raises(GridError, match="expected 2"):
        GridFunction(root, [1.0, 2.0, 3.0])
    with pytest.raises(GridError, match="finite"):
        GridFunction(root, [1.0, np.nan, 0, 0])
    with pytest.raises(GridError, match="nonnegative"):
        DiscreteMeasure(root, [1.0, -1.0, 0, 0])


def test_set_algebra():
    root = RootCube(1, 2)
    E = DyadicSet.from_leaves(root, [0, 1])
    F = DyadicSet.from_leaves(root, [1, 2])
    assert list((E | F).mask) == [1, 1, 1, 0]
    assert list((E & F).mask) == [0, 1, 0, 0]
    assert (E & F) <= E and not E <= F
    assert (~E).mask.sum() == 2


def test_minimal_file(tmp_path):
    p = tmp_path / "one.dgf"
    p.write_text("dgf v1\nd=1 n=0\norigin=0 side=1\n1.0\n")
    f = read_grid(p)
    assert isinstance(f, GridFunction) and list(f.values) == [1.0]


@pytest.mark.parametrize("kind", ["dgf", "dms", "dst"])
def test_round_trip_bitwise(tmp_path, kind):
    rng = np.random.default_rng(3)
    root = RootCube(2, 3, (0.25, -1.5), 0.1)
    obj = {"dgf": GridFunction(root, rng.standard_normal(64) * 1e5),
           "dms": DiscreteMeasure(root, rng.random(64) / 7),
           "dst": DyadicSet(root, rng.random(64) < 0.5)}[kind]
    p = tmp_path / f"x.{kind}"
    write_grid(p, obj)
    back = read_grid(p, expect=f"{kind} v1")
    assert back == obj and back.root == root
    assert np.array_equal(back.data.view(np.uint8), obj.data.view(np.uint8))


def test_round_trip_random_64(tmp_path):
    v = np.random.default_rng(0).random(64)
    f = GridFunction(RootCube(1, 6), v)
    write_grid(tmp_path / "r.dgf", f)
    assert np.array_equal(read_grid(tmp_path / "r.dgf").values, v)


def test_wrong_payload_length(tmp_path):
    p = tmp_path / "bad.dgf"
    p.write_text("dgf v1\nd=1 n=2\norigin=0 side=1\n1 2 3\n")
    with pytest.raises(FormatError, match="payload has 3 values"):
        read_grid(p)


@pytest.mark.parametrize("text,where", [
    ("dgx v1\nd=1 n=0\norigin=0 side=1\n1\n", ":1:"),
    ("dgf v1\nd=1\norigin=0 side=1\n1\n", ":2:"),
    ("dgf v1\nd=1 n=0\nside=1\n1\n", ":3:"),
    ("dgf v1\nd=1 n=1\norigin=0 side=1\n1 inf\n", ":4:"),
    ("dst v1\nd=1 n=1\norigin=0 side=1\n1 2\n", ":4:"),
])
def test_parse_errors_name_line(tmp_path, text, where):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(FormatError, match=where):
        read_grid(p)


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.dgf"):
        read_grid(tmp_path / "nope.dgf")
