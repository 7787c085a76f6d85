"""Dyadic cubes, grid data on a root cube, and the plain-text file formats.

Leaf cells are half-open boxes ``origin + side * 2**-n * [i, i+1)``.  Values are
stored row-major with the last axis fastest; every consumer that walks the
dyadic tree works on the Morton (Z-order) permutation instead, in which every
dyadic cube is a contiguous block and its children are ``2**d`` consecutive
sub-blocks in lexicographic order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAX_CELL_BITS = 30  # n * d limit; keeps 2**(d*n) arrays in memory
SUPPORTED_DIMS = (1, 2, 3)


class GridError(ValueError):
    """Invalid cube, grid, or resolution."""


class FormatError(ValueError):
    """Malformed grid/set/measure file."""


@dataclass(frozen=True)
class RootCube:
    d: int
    n: int
    origin: tuple[float, ...] = None  # type: ignore[assignment]
    side: float = 1.0
    max_bits: int = field(default=MAX_CELL_BITS, compare=False, repr=False)

    def __post_init__(self):
        if self.d not in SUPPORTED_DIMS:
            raise GridError(f"dimension d={self.d} not supported (use 1, 2 or 3)")
        if int(self.n) != self.n or self.n < 0:
            raise GridError(f"resolution n must be a nonnegative integer, got {self.n}")
        if self.n * self.d > self.max_bits:
            raise GridError(
                f"resolution too large: n*d = {self.n * self.d} exceeds limit {self.max_bits}")
        origin = self.origin if self.origin is not None else (0.0,) * self.d
        origin = tuple(float(x) for x in origin)
        if len(origin) != self.d:
            raise GridError(f"origin needs {self.d} coordinates, got {len(origin)}")
        object.__setattr__(self, "origin", origin)
        if not (self.side > 0 and math.isfinite(self.side)):
            raise GridError(f"side must be positive and finite, got {self.side}")
        object.__setattr__(self, "side", float(self.side))

    @property
    def ncells(self) -> int:
        return 1 << (self.d * self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return (1 << self.n,) * self.d

    @property
    def leaf_side(self) -> float:
        return self.side * 2.0 ** -self.n

    def side_at(self, level: int) -> float:
        return self.side * 2.0 ** -level

    def cube(self, level: int, index: Sequence[int]) -> "DyadicCube":
        c = DyadicCube(level, tuple(int(i) for i in index))
        self.validate(c)
        return c

    @property
    def top(self) -> "DyadicCube":
        return DyadicCube(0, (0,) * self.d)

    def validate(self, c: "DyadicCube") -> None:
        if len(c.index) != self.d:
            raise GridError(f"cube index {c.index} does not have {self.d} components")
        if not 0 <= c.level <= self.n:
            raise GridError(f"cube level {c.level} outside [0, {self.n}]")
        top = 1 << c.level
        if any(not 0 <= i < top for i in c.index):
            raise GridError(f"cube index {c.index} out of range for level {c.level}")

    def children(self, c: "DyadicCube") -> list["DyadicCube"]:
        self.validate(c)
        if c.level >= self.n:
            raise GridError("leaf has no children")
        return c.children()

    def subroot(self, c: "DyadicCube") -> "RootCube":
        """The cube ``c`` as a root cube of its own, at resolution ``n - level``."""
        self.validate(c)
        s = self.side_at(c.level)
        origin = tuple(o + i * s for o, i in zip(self.origin, c.index))
        return RootCube(self.d, self.n - c.level, origin, s, self.max_bits)

    def leaf_centers(self) -> np.ndarray:
        """Cell centers, shape ``(ncells, d)``, row-major order."""
        h = self.leaf_side
        idx = np.indices(self.shape).reshape(self.d, -1).T
        return np.asarray(self.origin) + (idx + 0.5) * h

    def header(self) -> dict:
        return {"d": self.d, "n": self.n, "origin": list(self.origin), "side": self.side}


@dataclass(frozen=True, order=True)
class DyadicCube:
    level: int
    index: tuple[int, ...]

    def children(self) -> list["DyadicCube"]:
        d = len(self.index)
        out = []
        for k in range(1 << d):
            off = [(k >> (d - 1 - j)) & 1 for j in range(d)]
            out.append(DyadicCube(self.level + 1, tuple(2 * i + o for i, o in zip(self.index, off))))
        return out

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise GridError("root cube has no parent")
        return DyadicCube(self.level - 1, tuple(i >> 1 for i in self.index))

    def ancestor(self, level: int) -> "DyadicCube":
        if not 0 <= level <= self.level:
            raise GridError(f"no ancestor at level {level} for {self}")
        shift = self.level - level
        return DyadicCube(level, tuple(i >> shift for i in self.index))

    def contains(self, other: "DyadicCube") -> bool:
        return other.level >= self.level and other.ancestor(self.level) == self

    def leaf_slices(self, n: int) -> tuple[slice, ...]:
        w = 1 << (n - self.level)
        return tuple(slice(i * w, (i + 1) * w) for i in self.index)

    def __str__(self) -> str:
        return f"{self.level}:{','.join(map(str, self.index))}"


def compose(outer: DyadicCube, inner: DyadicCube) -> DyadicCube:
    """Absolute address of ``inner``, given relative to the sub-root ``outer``."""
    if len(outer.index) != len(inner.index):
        raise GridError("cubes of different dimensions")
    return DyadicCube(outer.level + inner.level,
                      tuple((o << inner.level) + i for o, i in zip(outer.index, inner.index)))


def parse_cube(text: str) -> DyadicCube:
    """Parse the CLI form ``level:i1,i2,...``."""
    try:
        level, idx = text.split(":")
        return DyadicCube(int(level), tuple(int(x) for x in idx.split(",")))
    except ValueError:
        raise GridError(f"cannot parse cube {text!r}; expected level:i1,i2,...") from None


def cube_children(c: DyadicCube, root: RootCube) -> list[DyadicCube]:
    return root.children(c)


# ---------------------------------------------------------------------------
# Morton layout

@lru_cache(maxsize=64)
def morton_perm(d: int, n: int) -> np.ndarray:
    """``p`` with ``values_morton = values_rowmajor[p]``."""
    size = 1 << n
    idx = np.indices((size,) * d).reshape(d, -1)
    code = np.zeros(idx.shape[1], dtype=np.int64)
    for b in range(n - 1, -1, -1):
        for k in range(d):
            code = (code << 1) | ((idx[k] >> b) & 1)
    perm = np.empty_like(code)
    perm[code] = np.arange(code.size)
    perm.setflags(write=False)
    return perm


@lru_cache(maxsize=64)
def morton_inverse(d: int, n: int) -> np.ndarray:
    p = morton_perm(d, n)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.size)
    inv.setflags(write=False)
    return inv


def morton_code(index: Sequence[int], level: int) -> int:
    d = len(index)
    code = 0
    for b in range(level - 1, -1, -1):
        for k in range(d):
            code = (code << 1) | ((index[k] >> b) & 1)
    return code


def morton_decode(code: int, level: int, d: int) -> tuple[int, ...]:
    index = [0] * d
    for b in range(level):
        for k in range(d - 1, -1, -1):
            index[k] |= (code & 1) << b
            code >>= 1
    return tuple(index)


@lru_cache(maxsize=64)
def level_indices(d: int, level: int) -> np.ndarray:
    """Cube indices of level ``level`` in Morton block order, shape ``(2**(d*level), d)``."""
    nb = 1 << (d * level)
    codes = np.arange(nb, dtype=np.int64)
    idx = np.zeros((nb, d), dtype=np.int64)
    for b in range(level):
        for k in range(d - 1, -1, -1):
            idx[:, k] |= (codes & 1) << b
            codes = codes >> 1
    idx.setflags(write=False)
    return idx


# ---------------------------------------------------------------------------
# grid data

class _GridData:
    root: RootCube
    _payload: str

    @property
    def data(self) -> np.ndarray:
        return getattr(self, self._payload)

    @cached_property
    def array(self) -> np.ndarray:
        """d-dimensional read-only view, axis order as in the file."""
        return self.data.reshape(self.root.shape)

    @cached_property
    def morton(self) -> np.ndarray:
        m = self.data[morton_perm(self.root.d, self.root.n)]
        m.setflags(write=False)
        return m

    def _check(self, arr, dtype):
        a = np.array(arr, dtype=dtype).reshape(-1)
        if a.size != self.root.ncells:
            raise GridError(
                f"payload has {a.size} cells, expected 2^(d*n) = {self.root.ncells}")
        a.setflags(write=False)
        return a


@dataclass(frozen=True, eq=False)
class GridFunction(_GridData):
    root: RootCube
    values: np.ndarray
    _payload = "values"

    def __post_init__(self):
        v = self._check(self.values, np.float64)
        if not np.all(np.isfinite(v)):
            raise GridError("grid values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_morton(cls, root: RootCube, m: np.ndarray) -> "GridFunction":
        return cls(root, np.asarray(m, dtype=np.float64)[morton_inverse(root.d, root.n)])

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.root, values)

    def __eq__(self, other):
        return (isinstance(other, GridFunction) and self.root == other.root
                and np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class DyadicSet(_GridData):
    root: RootCube
    mask: np.ndarray
    _payload = "mask"

    def __post_init__(self):
        object.__setattr__(self, "mask", self._check(self.mask, bool))

    @classmethod
    def from_morton(cls, root: RootCube, m: np.ndarray) -> "DyadicSet":
        return cls(root, np.asarray(m, dtype=bool)[morton_inverse(root.d, root.n)])

    @classmethod
    def from_leaves(cls, root: RootCube, leaves: Iterable) -> "DyadicSet":
        mask = np.zeros(root.shape, dtype=bool)
        for leaf in leaves:
            mask[tuple(np.atleast_1d(leaf))] = True
        return cls(root, mask)

    @property
    def empty(self) -> bool:
        return not self.mask.any()

    def indicator(self) -> GridFunction:
        return GridFunction(self.root, self.mask.astype(np.float64))

    def __or__(self, other):
        _same_root(self, other)
        return DyadicSet(self.root, self.mask | other.mask)

    def __and__(self, other):
        _same_root(self, other)
        return DyadicSet(self.root, self.mask & other.mask)

    def __invert__(self):
        return DyadicSet(self.root, ~self.mask)

    def __le__(self, other):
        _same_root(self, other)
        return not np.any(self.mask & ~other.mask)

    def __eq__(self, other):
        return (isinstance(other, DyadicSet) and self.root == other.root
                and np.array_equal(self.mask, other.mask))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure(_GridData):
    root: RootCube
    masses: np.ndarray
    _payload = "masses"

    def __post_init__(self):
        m = self._check(self.masses, np.float64)
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise GridError("masses must be finite and nonnegative")
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_morton(cls, root: RootCube, m: np.ndarray) -> "DiscreteMeasure":
        return cls(root, np.asarray(m, dtype=np.float64)[morton_inverse(root.d, root.n)])

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def scaled(self, a: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.root, self.masses * a)

    def __add__(self, other):
        _same_root(self, other)
        return DiscreteMeasure(self.root, self.masses + other.masses)

    def __eq__(self, other):
        return (isinstance(other, DiscreteMeasure) and self.root == other.root
                and np.array_equal(self.masses, other.masses))

    __hash__ = None  # type: ignore[assignment]


def _same_root(a, b):
    if a.root != b.root:
        raise GridError("objects live on different root cubes")


def restrict(obj, c: DyadicCube):
    """Sub-grid of a grid function, set or measure on the dyadic cube ``c``."""
    root = obj.root
    sub = root.subroot(c)
    block = obj.array[c.leaf_slices(root.n)]
    return type(obj)(sub, np.ascontiguousarray(block).reshape(-1))


# ---------------------------------------------------------------------------
# file formats

_TAGS = {"dgf v1": GridFunction, "dms v1": DiscreteMeasure, "dst v1": DyadicSet}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_grid(path, obj) -> None:
    """Write a GridFunction, DiscreteMeasure or DyadicSet in its text format."""
    tag = {GridFunction: "dgf v1", DiscreteMeasure: "dms v1", DyadicSet: "dst v1"}[type(obj)]
    r = obj.root
    lines = [tag, f"d={r.d} n={r.n}",
             "origin=" + " ".join(_fmt(o) for o in r.origin) + f" side={_fmt(r.side)}"]
    if isinstance(obj, DyadicSet):
        tokens = ["1" if b else "0" for b in obj.mask]
    else:
        tokens = [_fmt(x) for x in obj.data]
    row = 1 << r.n
    for k in range(0, len(tokens), row):
        lines.append(" ".join(tokens[k:k + row]))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(path, lines: list[str], expect: str | None):
    if len(lines) < 3:
        raise FormatError(f"{path}: header needs 3 lines, found {len(lines)}")
    tag = lines[0].strip()
    if tag not in _TAGS:
        raise FormatError(f"{path}:1: unknown header tag {tag!r}")
    if expect is not None and tag != expect:
        raise FormatError(f"{path}:1: expected {expect!r}, found {tag!r}")
    try:
        kv = dict(tok.split("=", 1) for tok in lines[1].split())
        d, n = int(kv["d"]), int(kv["n"])
    except (ValueError, KeyError):
        raise FormatError(f"{path}:2: expected 'd=<int> n=<int>', found {lines[1].strip()!r}") from None
    line3 = lines[2].strip()
    try:
        head, side_part = line3.rsplit("side=", 1)
        if not head.startswith("origin="):
            raise ValueError
        origin = [float(x) for x in head[len("origin="):].split()]
        side = float(side_part)
    except ValueError:
        raise FormatError(
            f"{path}:3: expected 'origin=<d decimals> side=<decimal>', found {line3!r}") from None
    try:
        root = RootCube(d, n, tuple(origin), side)
    except GridError as e:
        raise FormatError(f"{path}:2-3: {e}") from None
    return tag, root


def read_grid(path, expect: str | None = None):
    """Read any of the three formats; ``expect`` pins the header tag."""
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file: {path}") from None
    lines = text.splitlines()
    tag, root = _parse_header(path, lines, expect)
    tokens = []
    for lineno, line in enumerate(lines[3:], start=4):
        tokens.extend((lineno, t) for t in line.split())
    if len(tokens) != root.ncells:
        raise FormatError(
            f"{path}: payload has {len(tokens)} values, header declares 2^(d*n) = {root.ncells}")
    if tag == "dst v1":
        vals = np.empty(root.ncells, dtype=bool)
        for k, (lineno, t) in enumerate(tokens):
            if t not in ("0", "1"):
                raise FormatError(f"{path}:{lineno}: token {k} is {t!r}, expected 0 or 1")
            vals[k] = t == "1"
    else:
        vals = np.empty(root.ncells)
        for k, (lineno, t) in enumerate(tokens):
            try:
                x = float(t)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: token {k} {t!r} is not a number") from None
            if not math.isfinite(x):
                raise FormatError(f"{path}:{lineno}: token {k} is not finite")
            if tag == "dms v1" and x < 0:
                raise FormatError(f"{path}:{lineno}: token {k} is a negative mass")
            vals[k] = x
    return _TAGS[tag](root, vals)
