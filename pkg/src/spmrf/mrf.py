"""Binary pairwise MRFs on pixel grids: types, energy, submodularity, brute force.

An instance is a node set (raster-ordered pixels), a per-node unary weight
(cost difference of label 1 versus label 0), a list of neighbor pairs with a
4-entry pairwise cost table each, and an explicit additive constant.  All
pairs are stored once in the canonical orientation p < q; the w01 entry is
the cost of (f_p=0, f_q=1) under that orientation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, NamedTuple, Sequence, Union

import numpy as np

SUBMODULARITY_EPS = 1e-12
BRUTE_FORCE_MAX_NODES = 24

_BRUTE_FORCE_CHUNK = 1 << 18


class MrfError(ValueError):
    """Base class for invalid MRF inputs."""


class DimensionMismatchError(MrfError):
    """Array lengths or geometries disagree."""


class InstanceTooLargeError(MrfError):
    """Exhaustive enumeration refused: too many nodes."""


class FixtureFormatError(MrfError):
    """Unparseable text fixture."""


@dataclass(frozen=True)
class GridGeometry:
    """Pixel grid in raster order: pixel index p = y * width + x."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise MrfError(f"grid must be at least 1x1, got {self.width}x{self.height}")

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def index(self, x: int, y: int) -> int:
        return y * self.width + x

    def coords(self, p: int) -> tuple[int, int]:
        return p % self.width, p // self.width

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


class NeighborPair(NamedTuple):
    """Unordered neighbor pair stored in canonical orientation p < q."""

    p: int
    q: int


class PairwiseWeights(NamedTuple):
    """Pairwise cost table; wmn is the cost of (f_p=m, f_q=n) for p < q."""

    w00: float
    w01: float
    w10: float
    w11: float


def validate_labeling(bits, count: int) -> np.ndarray:
    """Coerce a labeling to an int64 0/1 array of the expected length."""
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.shape[0] != count:
        raise DimensionMismatchError(
            f"labeling has shape {arr.shape}, expected ({count},)")
    arr = arr.astype(np.int64, copy=False)
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise MrfError("labeling entries must be 0 or 1")
    return arr


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _validate_edge_arrays(node_count: int, edge_i, edge_j, edge_w):
    edge_i = np.asarray(edge_i, dtype=np.int64)
    edge_j = np.asarray(edge_j, dtype=np.int64)
    edge_w = np.asarray(edge_w, dtype=np.float64)
    if edge_i.ndim != 1 or edge_j.shape != edge_i.shape:
        raise DimensionMismatchError("edge index arrays must be equal-length 1-D")
    if edge_w.shape != (edge_i.shape[0], 4):
        raise DimensionMismatchError(
            f"edge weights have shape {edge_w.shape}, expected ({edge_i.shape[0]}, 4)")
    if edge_i.size:
        if edge_i.min() < 0 or edge_j.max() >= node_count:
            raise MrfError("edge endpoint out of range")
        if not (edge_i < edge_j).all():
            raise MrfError("edges must satisfy the canonical i < j orientation")
        keys = edge_i * node_count + edge_j
        if np.unique(keys).size != keys.size:
            raise MrfError("duplicate edges are not allowed")
    if not np.isfinite(edge_w).all():
        raise MrfError("edge weights must be finite")
    return (_as_readonly(edge_i), _as_readonly(edge_j), _as_readonly(edge_w))


@dataclass(frozen=True)
class PixelMrf:
    """Binary MRF over a pixel grid.

    unary[p] is the label-1 cost minus the label-0 cost for pixel p; the
    dropped label-0 costs live in `constant`, so energies stay comparable
    across reformulations.  pair_w columns are (w00, w01, w10, w11).
    """

    geometry: GridGeometry
    unary: np.ndarray
    pair_p: np.ndarray
    pair_q: np.ndarray
    pair_w: np.ndarray
    constant: float = 0.0

    def __post_init__(self) -> None:
        unary = np.asarray(self.unary, dtype=np.float64)
        if unary.shape != (self.geometry.pixel_count,):
            raise DimensionMismatchError(
                f"unary has shape {unary.shape}, expected ({self.geometry.pixel_count},)")
        if not np.isfinite(unary).all():
            raise MrfError("unary weights must be finite")
        pp, pq, pw = _validate_edge_arrays(
            self.geometry.pixel_count, self.pair_p, self.pair_q, self.pair_w)
        object.__setattr__(self, "unary", _as_readonly(unary))
        object.__setattr__(self, "pair_p", pp)
        object.__setattr__(self, "pair_q", pq)
        object.__setattr__(self, "pair_w", pw)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def node_count(self) -> int:
        return self.geometry.pixel_count

    @property
    def pair_count(self) -> int:
        return self.pair_p.shape[0]

    def pairs(self) -> Iterator[tuple[NeighborPair, PairwiseWeights]]:
        for i in range(self.pair_count):
            yield (NeighborPair(int(self.pair_p[i]), int(self.pair_q[i])),
                   PairwiseWeights(*map(float, self.pair_w[i])))

    @classmethod
    def from_pairs(cls, geometry: GridGeometry, unary,
                   pairs: Sequence[tuple[NeighborPair, PairwiseWeights]],
                   constant: float = 0.0) -> "PixelMrf":
        pp = np.array([p for (p, _q), _w in pairs], dtype=np.int64)
        pq = np.array([q for (_p, q), _w in pairs], dtype=np.int64)
        pw = np.array([list(w) for _pair, w in pairs], dtype=np.float64).reshape(-1, 4)
        return cls(geometry, unary, pp, pq, pw, constant)


PairWeightFn = Union[Callable[[NeighborPair], PairwiseWeights],
                     Mapping[NeighborPair, PairwiseWeights]]


def grid_pairs(geometry: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    """All 4-adjacent pixel pairs, canonical orientation, sorted by (p, q)."""
    w, h = geometry.width, geometry.height
    grid = np.arange(w * h, dtype=np.int64).reshape(h, w)
    right = grid[:, :-1].ravel()
    down = grid[:-1, :].ravel()
    pp = np.concatenate([right, down])
    qq = np.concatenate([right + 1, down + w])
    order = np.lexsort((qq, pp))
    return pp[order], qq[order]


def build_grid_mrf(geometry: GridGeometry, unary,
                   pair_weight_fn: PairWeightFn,
                   constant: float = 0.0) -> PixelMrf:
    """Materialize the 4-connected grid MRF with per-pair weights.

    pair_weight_fn is either a callable NeighborPair -> PairwiseWeights or a
    mapping with the same contract; it is consulted once per adjacency.
    """
    unary = np.asarray(unary, dtype=np.float64)
    if unary.shape != (geometry.pixel_count,):
        raise DimensionMismatchError(
            f"unary has shape {unary.shape}, expected ({geometry.pixel_count},)")
    pp, pq = grid_pairs(geometry)
    lookup = pair_weight_fn.__getitem__ if isinstance(pair_weight_fn, Mapping) \
        else pair_weight_fn
    pw = np.empty((pp.shape[0], 4), dtype=np.float64)
    for i in range(pp.shape[0]):
        pw[i] = lookup(NeighborPair(int(pp[i]), int(pq[i])))
    return PixelMrf(geometry, unary, pp, pq, pw, constant)


def _binary_energy(constant: float, unary: np.ndarray,
                   edge_i: np.ndarray, edge_j: np.ndarray, edge_w: np.ndarray,
                   bits: np.ndarray) -> float:
    """Shared evaluator so pixel- and superpixel-level energies round identically."""
    total = constant + float(unary @ bits)
    if edge_i.size:
        idx = bits[edge_i] * 2 + bits[edge_j]
        total += float(np.take_along_axis(edge_w, idx[:, None], axis=1).sum())
    return total


def energy(mrf: PixelMrf, labeling) -> float:
    """Total energy: constant + sum of unary terms + sum of pairwise tables."""
    bits = validate_labeling(labeling, mrf.node_count)
    return _binary_energy(mrf.constant, mrf.unary, mrf.pair_p, mrf.pair_q,
                          mrf.pair_w, bits)


def is_submodular(mrf: PixelMrf,
                  eps: float = SUBMODULARITY_EPS) -> tuple[bool, list[NeighborPair]]:
    """Check w00 + w11 <= w01 + w10 (+eps) on every pair; return violators."""
    w = mrf.pair_w
    if not w.size:
        return True, []
    margin = (w[:, 1] + w[:, 2]) - (w[:, 0] + w[:, 3])
    bad = np.flatnonzero(margin < -eps)
    return bad.size == 0, [NeighborPair(int(mrf.pair_p[i]), int(mrf.pair_q[i]))
                           for i in bad]


def brute_force_minimize(mrf: PixelMrf) -> tuple[np.ndarray, float]:
    """Exact minimizer by exhaustive enumeration (oracle; <= 24 nodes).

    Ties break toward the labeling with the lowest binary value when the bits
    are read in raster order (node 0 is the most significant bit).
    """
    n = mrf.node_count
    if n > BRUTE_FORCE_MAX_NODES:
        raise InstanceTooLargeError(
            f"{n} nodes exceeds the {BRUTE_FORCE_MAX_NODES}-node enumeration guard")
    total = 1 << n
    shifts = np.array([n - 1 - p for p in range(n)], dtype=np.int64)
    best_code = 0
    best_val = np.inf
    for start in range(0, total, _BRUTE_FORCE_CHUNK):
        codes = np.arange(start, min(start + _BRUTE_FORCE_CHUNK, total),
                          dtype=np.int64)
        bits = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int64)
        vals = np.full(codes.shape[0], mrf.constant, dtype=np.float64)
        vals += bits @ mrf.unary
        for e in range(mrf.pair_count):
            idx = bits[:, mrf.pair_p[e]] * 2 + bits[:, mrf.pair_q[e]]
            vals += mrf.pair_w[e][idx]
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val = float(vals[i])
            best_code = int(codes[i])
    labeling = ((best_code >> shifts) & 1).astype(np.int64)
    return labeling, energy(mrf, labeling)


def _fmt(x: float) -> str:
    return repr(float(x))


def _format_body(unary: np.ndarray, edge_i: np.ndarray, edge_j: np.ndarray,
                 edge_w: np.ndarray) -> list[str]:
    lines = [f"u {p} {_fmt(unary[p])}" for p in range(unary.shape[0])]
    for e in range(edge_i.shape[0]):
        w = edge_w[e]
        lines.append(f"e {edge_i[e]} {edge_j[e]} "
                     f"{_fmt(w[0])} {_fmt(w[1])} {_fmt(w[2])} {_fmt(w[3])}")
    return lines


def format_mrf_fixture(mrf: PixelMrf) -> str:
    """Plain-text fixture: `mrf <w> <h> <constant>` header, then u/e lines."""
    lines = [f"mrf {mrf.geometry.width} {mrf.geometry.height} {_fmt(mrf.constant)}"]
    lines += _format_body(mrf.unary, mrf.pair_p, mrf.pair_q, mrf.pair_w)
    return "\n".join(lines) + "\n"


def _parse_body(lines: list[list[str]], node_count: int):
    unary = np.zeros(node_count, dtype=np.float64)
    seen_u = set()
    ei, ej, ew = [], [], []
    for tok in lines:
        if tok[0] == "u":
            if len(tok) != 3:
                raise FixtureFormatError(f"bad unary line: {' '.join(tok)}")
            p = _parse_int(tok[1])
            if not 0 <= p < node_count:
                raise FixtureFormatError(f"unary index {p} out of range")
            if p in seen_u:
                raise FixtureFormatError(f"duplicate unary line for node {p}")
            seen_u.add(p)
            unary[p] = _parse_float(tok[2])
        elif tok[0] == "e":
            if len(tok) != 7:
                raise FixtureFormatError(f"bad edge line: {' '.join(tok)}")
            ei.append(_parse_int(tok[1]))
            ej.append(_parse_int(tok[2]))
            ew.append([_parse_float(t) for t in tok[3:7]])
        else:
            raise FixtureFormatError(f"unknown line kind {tok[0]!r}")
    return (unary, np.asarray(ei, dtype=np.int64), np.asarray(ej, dtype=np.int64),
            np.asarray(ew, dtype=np.float64).reshape(-1, 4))


def _parse_int(tok: str) -> int:
    try:
        return int(tok)
    except ValueError as exc:
        raise FixtureFormatError(f"expected integer, got {tok!r}") from exc


def _parse_float(tok: str) -> float:
    try:
        value = float(tok)
    except ValueError as exc:
        raise FixtureFormatError(f"expected number, got {tok!r}") from exc
    if not np.isfinite(value):
        raise FixtureFormatError(f"non-finite value {tok!r}")
    return value


def _tokenize_fixture(text: str) -> list[list[str]]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line.split())
    if not out:
        raise FixtureFormatError("empty fixture")
    return out


def parse_mrf_fixture(text: str) -> PixelMrf:
    """Inverse of format_mrf_fixture; missing u lines default to weight 0."""
    tokens = _tokenize_fixture(text)
    header = tokens[0]
    if header[0] != "mrf" or len(header) != 4:
        raise FixtureFormatError(f"bad header: {' '.join(header)}")
    constant = _parse_float(header[3])
    try:
        geometry = GridGeometry(_parse_int(header[1]), _parse_int(header[2]))
        unary, ei, ej, ew = _parse_body(tokens[1:], geometry.pixel_count)
        return PixelMrf(geometry, unary, ei, ej, ew, constant)
    except FixtureFormatError:
        raise
    except MrfError as exc:
        raise FixtureFormatError(str(exc)) from exc
