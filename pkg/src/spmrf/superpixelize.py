"""Exactly equivalent superpixel-level reformulation of pixel-level MRFs.

Collapsing the pixel energy over a partition yields a K-node MRF whose
energy agrees with the pixel energy on every superpixel-constant labeling:
per-superpixel unary sums pick up corrections from interior pairs (their 00
entry moves to the constant and subtracts from the unary, the 11 entry adds
to it), while crossing pairs accumulate table-wise onto superpixel edges.
Submodularity survives the aggregation, so the result stays min-cut solvable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from spmrf.mrf import (
    DimensionMismatchError,
    FixtureFormatError,
    MrfError,
    NeighborPair,
    PairwiseWeights,
    PixelMrf,
    _as_readonly,
    _binary_energy,
    _fmt,
    _format_body,
    _parse_body,
    _parse_float,
    _parse_int,
    _tokenize_fixture,
    _validate_edge_arrays,
    validate_labeling,
)
from spmrf.partition import SuperpixelPartition


@dataclass(frozen=True)
class SuperpixelMrf:
    """K-node binary MRF produced by aggregating a pixel MRF over a partition.

    unary[k] is the corrected per-superpixel weight; edge_w columns are
    (w00, w01, w10, w11) for the canonical k < l orientation; `constant`
    carries everything dropped while collecting terms, so energies match the
    pixel level exactly rather than up to a constant.
    """

    superpixel_count: int
    unary: np.ndarray
    edge_k: np.ndarray
    edge_l: np.ndarray
    edge_w: np.ndarray
    constant: float = 0.0

    def __post_init__(self) -> None:
        k = int(self.superpixel_count)
        if k < 1:
            raise MrfError("superpixel count must be >= 1")
        unary = np.asarray(self.unary, dtype=np.float64)
        if unary.shape != (k,):
            raise DimensionMismatchError(
                f"unary has shape {unary.shape}, expected ({k},)")
        if not np.isfinite(unary).all():
            raise MrfError("unary weights must be finite")
        ek, el, ew = _validate_edge_arrays(k, self.edge_k, self.edge_l, self.edge_w)
        object.__setattr__(self, "superpixel_count", k)
        object.__setattr__(self, "unary", _as_readonly(unary))
        object.__setattr__(self, "edge_k", ek)
        object.__setattr__(self, "edge_l", el)
        object.__setattr__(self, "edge_w", ew)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def node_count(self) -> int:
        return self.superpixel_count

    @property
    def edge_count(self) -> int:
        return self.edge_k.shape[0]

    def edges(self) -> Iterator[tuple[NeighborPair, PairwiseWeights]]:
        for i in range(self.edge_count):
            yield (NeighborPair(int(self.edge_k[i]), int(self.edge_l[i])),
                   PairwiseWeights(*map(float, self.edge_w[i])))


@dataclass(frozen=True)
class AggregationReport:
    """Intermediate sums of the aggregation, for auditing and invariants.

    node_weight, intra_w00, intra_w11 and intra_pair_count are indexed by
    superpixel; edge_crossing_count aligns with the edges of the produced
    SuperpixelMrf.  Crossing plus interior counts partition the pixel pairs.
    """

    node_weight: np.ndarray
    intra_w00: np.ndarray
    intra_w11: np.ndarray
    intra_pair_count: np.ndarray
    edge_crossing_count: np.ndarray

    @property
    def total_pairs(self) -> int:
        return int(self.intra_pair_count.sum() + self.edge_crossing_count.sum())


def _require_same_geometry(mrf_geom, partition: SuperpixelPartition) -> None:
    if mrf_geom != partition.geometry:
        raise DimensionMismatchError(
            f"MRF geometry {mrf_geom} != partition geometry {partition.geometry}")


def superpixelize(mrf: PixelMrf,
                  partition: SuperpixelPartition
                  ) -> tuple[SuperpixelMrf, AggregationReport]:
    """Aggregate a pixel MRF into the equivalent superpixel MRF.

    Interior pairs of a superpixel contribute their 00 entry to the constant
    (and negatively to the unary) and their 11 entry to the unary; their
    01/10 entries vanish because a node never disagrees with itself.  A
    crossing pair lands table-wise on its superpixel edge, with the 01/10
    entries swapped when the pair's orientation opposes the canonical k < l.
    """
    _require_same_geometry(mrf.geometry, partition)
    labels = partition.labels
    k_count = partition.superpixel_count

    node_weight = np.bincount(labels, weights=mrf.unary, minlength=k_count)

    ki = labels[mrf.pair_p]
    kj = labels[mrf.pair_q]
    intra = ki == kj
    intra_w00 = np.bincount(ki[intra], weights=mrf.pair_w[intra, 0],
                            minlength=k_count)
    intra_w11 = np.bincount(ki[intra], weights=mrf.pair_w[intra, 3],
                            minlength=k_count)
    intra_pair_count = np.bincount(ki[intra], minlength=k_count)

    cross = ~intra
    ci = ki[cross]
    cj = kj[cross]
    w = mrf.pair_w[cross]
    swap = ci > cj
    lo = np.where(swap, cj, ci)
    hi = np.where(swap, ci, cj)
    w01 = np.where(swap, w[:, 2], w[:, 1])
    w10 = np.where(swap, w[:, 1], w[:, 2])

    keys, inverse = np.unique(lo * k_count + hi, return_inverse=True)
    m = keys.shape[0]
    edge_w = np.zeros((m, 4), dtype=np.float64)
    edge_w[:, 0] = np.bincount(inverse, weights=w[:, 0], minlength=m)
    edge_w[:, 1] = np.bincount(inverse, weights=w01, minlength=m)
    edge_w[:, 2] = np.bincount(inverse, weights=w10, minlength=m)
    edge_w[:, 3] = np.bincount(inverse, weights=w[:, 3], minlength=m)
    crossing_count = np.bincount(inverse, minlength=m)

    unary_hat = node_weight - intra_w00 + intra_w11
    constant = mrf.constant + float(intra_w00.sum())
    sp = SuperpixelMrf(k_count, unary_hat, keys // k_count, keys % k_count,
                       edge_w, constant)
    report = AggregationReport(node_weight, intra_w00, intra_w11,
                               intra_pair_count, crossing_count)
    return sp, report


def superpixelize_potts(unary, potts_weights,
                        partition: SuperpixelPartition) -> SuperpixelMrf:
    """Fast path for Potts energies: disagreement cost w_pq per pair.

    Interior pairs never disagree, so only crossing pairs matter; the edge
    weight is the plain sum of crossing w_pq and lands symmetrically on the
    01/10 entries.  potts_weights is a NeighborPair -> weight mapping, or a
    (pair_p, pair_q, weight) array triple.
    """
    unary = np.asarray(unary, dtype=np.float64)
    if unary.shape != (partition.geometry.pixel_count,):
        raise DimensionMismatchError(
            f"unary has shape {unary.shape}, "
            f"expected ({partition.geometry.pixel_count},)")
    pair_p, pair_q, weight = _potts_arrays(potts_weights)
    if not np.isfinite(weight).all():
        raise MrfError("Potts weights must be finite")
    if pair_p.size and max(pair_p.max(), pair_q.max()) >= partition.geometry.pixel_count:
        raise DimensionMismatchError("pair index outside geometry")

    labels = partition.labels
    k_count = partition.superpixel_count
    node_weight = np.bincount(labels, weights=unary, minlength=k_count)

    ki = labels[pair_p]
    kj = labels[pair_q]
    cross = ki != kj
    lo = np.minimum(ki[cross], kj[cross])
    hi = np.maximum(ki[cross], kj[cross])
    keys, inverse = np.unique(lo * k_count + hi, return_inverse=True)
    m = keys.shape[0]
    sums = np.bincount(inverse, weights=weight[cross], minlength=m)
    edge_w = np.zeros((m, 4), dtype=np.float64)
    edge_w[:, 1] = sums
    edge_w[:, 2] = sums
    return SuperpixelMrf(k_count, node_weight, keys // k_count, keys % k_count,
                         edge_w, 0.0)


def _potts_arrays(potts_weights) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(potts_weights, tuple) and len(potts_weights) == 3:
        pp, qq, ww = potts_weights
        return (np.asarray(pp, dtype=np.int64), np.asarray(qq, dtype=np.int64),
                np.asarray(ww, dtype=np.float64))
    if isinstance(potts_weights, Mapping):
        items = list(potts_weights.items())
        pp = np.array([p for (p, _q), _w in items], dtype=np.int64)
        qq = np.array([q for (_p, q), _w in items], dtype=np.int64)
        ww = np.array([w for _pair, w in items], dtype=np.float64)
        return pp, qq, ww
    raise MrfError("potts_weights must be a mapping or a (p, q, w) triple")


def lift(x, partition: SuperpixelPartition) -> np.ndarray:
    """Expand a superpixel labeling to pixels: f_p = x_{k(p)}."""
    bits = validate_labeling(x, partition.superpixel_count)
    return bits[partition.labels]


def restrict(f, partition: SuperpixelPartition) -> np.ndarray:
    """Read one label per superpixel; f must be superpixel-constant."""
    bits = validate_labeling(f, partition.geometry.pixel_count)
    first = np.full(partition.superpixel_count, -1, dtype=np.int64)
    rev = partition.labels[::-1]
    first[rev] = np.arange(partition.geometry.pixel_count - 1, -1, -1)
    x = bits[first]
    if not (x[partition.labels] == bits).all():
        raise MrfError("labeling is not constant on every superpixel")
    return x


def sp_energy(sp: SuperpixelMrf, x) -> float:
    """Energy of the superpixel MRF, including its constant."""
    bits = validate_labeling(x, sp.superpixel_count)
    return _binary_energy(sp.constant, sp.unary, sp.edge_k, sp.edge_l,
                          sp.edge_w, bits)


def edge_aggregation_residuals(mrf: PixelMrf, partition: SuperpixelPartition,
                     sp: SuperpixelMrf) -> dict[tuple[int, int], np.ndarray]:
    """Residuals between each superpixel edge table and its crossing-pair sum.

    Recomputes every aggregated table by direct summation over the crossing
    pixel pairs (an intentionally plain second route) and returns, per edge,
    the absolute difference for all four label combinations.
    """
    _require_same_geometry(mrf.geometry, partition)
    labels = partition.labels
    sums: dict[tuple[int, int], np.ndarray] = {}
    for i in range(mrf.pair_count):
        k = int(labels[mrf.pair_p[i]])
        l = int(labels[mrf.pair_q[i]])
        if k == l:
            continue
        w = mrf.pair_w[i]
        if k < l:
            key, table = (k, l), np.array([w[0], w[1], w[2], w[3]])
        else:
            key, table = (l, k), np.array([w[0], w[2], w[1], w[3]])
        if key in sums:
            sums[key] += table
        else:
            sums[key] = table

    residuals: dict[tuple[int, int], np.ndarray] = {}
    for e in range(sp.edge_count):
        key = (int(sp.edge_k[e]), int(sp.edge_l[e]))
        expected = sums.pop(key, np.zeros(4))
        residuals[key] = np.abs(sp.edge_w[e] - expected)
    for key, table in sums.items():
        residuals[key] = np.abs(table)
    return residuals


def format_spmrf_fixture(sp: SuperpixelMrf) -> str:
    """Same body as the pixel fixture, with header `spmrf <K> <constant>`."""
    lines = [f"spmrf {sp.superpixel_count} {_fmt(sp.constant)}"]
    lines += _format_body(sp.unary, sp.edge_k, sp.edge_l, sp.edge_w)
    return "\n".join(lines) + "\n"


def parse_spmrf_fixture(text: str) -> SuperpixelMrf:
    tokens = _tokenize_fixture(text)
    header = tokens[0]
    if header[0] != "spmrf" or len(header) != 3:
        raise FixtureFormatError(f"bad header: {' '.join(header)}")
    constant = _parse_float(header[2])
    k = _parse_int(header[1])
    if k < 1:
        raise FixtureFormatError(f"superpixel count must be >= 1, got {k}")
    try:
        unary, ek, el, ew = _parse_body(tokens[1:], k)
        return SuperpixelMrf(k, unary, ek, el, ew, constant)
    except FixtureFormatError:
        raise
    except MrfError as exc:
        raise FixtureFormatError(str(exc)) from exc
