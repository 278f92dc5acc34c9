"""Shared generators and independent oracles for the test suite.

Oracles here deliberately use plain loops and if/else tables so they share no
code path with the library's vectorized implementations.
"""

from __future__ import annotations

import itertools

import numpy as np

from spmrf.mrf import GridGeometry, PixelMrf, grid_pairs
from spmrf.partition import SuperpixelPartition


def random_mrf(rng: np.random.Generator, width: int, height: int,
               lo: float = -5.0, hi: float = 5.0,
               with_constant: bool = True) -> PixelMrf:
    geom = GridGeometry(width, height)
    pp, qq = grid_pairs(geom)
    unary = rng.uniform(lo, hi, geom.pixel_count)
    pw = rng.uniform(lo, hi, (pp.shape[0], 4))
    constant = float(rng.uniform(lo, hi)) if with_constant else 0.0
    return PixelMrf(geom, unary, pp, qq, pw, constant)


def random_submodular_mrf(rng: np.random.Generator, width: int,
                          height: int, lo: float = -5.0,
                          hi: float = 5.0) -> PixelMrf:
    """Random instance with w01 + w10 >= w00 + w11 on every pair.

    Violating draws swap their diagonal and off-diagonal entries, which
    exactly flips the sign of the margin.
    """
    mrf = random_mrf(rng, width, height, lo, hi)
    pw = mrf.pair_w.copy()
    margin = (pw[:, 1] + pw[:, 2]) - (pw[:, 0] + pw[:, 3])
    bad = margin < 0
    pw[bad] = pw[bad][:, [1, 0, 3, 2]]
    return PixelMrf(mrf.geometry, mrf.unary, mrf.pair_p, mrf.pair_q, pw,
                    mrf.constant)


def random_partition(rng: np.random.Generator, geometry: GridGeometry,
                     k: int) -> SuperpixelPartition:
    """Arbitrary valid partition (every index used; connectivity not required)."""
    n = geometry.pixel_count
    assert k <= n
    labels = rng.integers(0, k, n)
    forced = rng.choice(n, size=k, replace=False)
    labels[forced] = np.arange(k)
    return SuperpixelPartition(geometry, labels, k)


def reference_energy(mrf: PixelMrf, bits) -> float:
    """Loop-and-table energy evaluation, independent of the library path."""
    bits = list(int(b) for b in bits)
    total = mrf.constant
    for p in range(mrf.node_count):
        if bits[p]:
            total += float(mrf.unary[p])
    for pair, w in mrf.pairs():
        fp, fq = bits[pair.p], bits[pair.q]
        if fp == 0 and fq == 0:
            total += w.w00
        elif fp == 0 and fq == 1:
            total += w.w01
        elif fp == 1 and fq == 0:
            total += w.w10
        else:
            total += w.w11
    return total


def enumerate_minimum(mrf: PixelMrf) -> tuple[tuple[int, ...], float]:
    """Exhaustive minimum via reference_energy; ties toward the labeling whose
    raster-read bit string is the smallest binary number."""
    best_bits = None
    best = np.inf
    for bits in itertools.product((0, 1), repeat=mrf.node_count):
        value = reference_energy(mrf, bits)
        if value < best:
            best = value
            best_bits = bits
    return best_bits, best


def cut_value_oracle(graph, side) -> float:
    """Capacity of the cut defined by a source-side boolean array."""
    total = 0.0
    for a in range(graph.arc_count):
        u, v = int(graph.arc_tail[a]), int(graph.arc_head[a])
        if side[u] and not side[v]:
            total += float(graph.arc_cap[a])
    for v in range(graph.node_count):
        if not side[v]:
            total += float(graph.source_cap[v])  # s -> v crosses
        else:
            total += float(graph.sink_cap[v])    # v -> t crosses
    return total


def min_cut_oracle(graph) -> float:
    """Minimum cut by enumerating all 2^n side assignments (small graphs)."""
    n = graph.node_count
    best = np.inf
    for code in range(1 << n):
        side = [(code >> i) & 1 == 1 for i in range(n)]
        best = min(best, cut_value_oracle(graph, side))
    return best


def mst_weight_oracle(points: np.ndarray) -> float:
    """Minimum spanning tree weight by enumerating spanning edge subsets."""
    m = points.shape[0]
    if m <= 1:
        return 0.0
    edges = []
    for i in range(m):
        for j in range(i + 1, m):
            edges.append((i, j, float(np.hypot(*(points[i] - points[j])))))
    best = np.inf
    for subset in itertools.combinations(edges, m - 1):
        parent = list(range(m))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for i, j, _w in subset:
            ri, rj = find(i), find(j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if ok:
            best = min(best, sum(w for _i, _j, w in subset))
    return best


def boundary_pixels_oracle(mask: np.ndarray) -> list[tuple[int, int]]:
    """(y, x) mask pixels with a 4-neighbor off-mask or out of the image."""
    h, w = mask.shape
    out = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                ny, nx = y + dy, x + dx
                if not (0 <= ny < h and 0 <= nx < w) or not mask[ny, nx]:
                    out.append((y, x))
                    break
    return out


def boundary_deviation_oracle(mask: np.ndarray, truth: np.ndarray) -> float:
    """Symmetric mean boundary distance by exhaustive nearest neighbor."""
    mb = boundary_pixels_oracle(mask)
    tb = boundary_pixels_oracle(truth)

    def mean_nearest(src, dst):
        total = 0.0
        for (y, x) in src:
            total += min(np.hypot(y - dy, x - dx) for (dy, dx) in dst)
        return total / len(src)

    return (mean_nearest(mb, tb) + mean_nearest(tb, mb)) / 2.0


def two_region_image(width: int, height: int, truth: np.ndarray,
                     fg_color=(0.2, 0.3, 0.8), bg_color=(0.8, 0.7, 0.2)):
    """Flat two-color image following a boolean truth mask."""
    from spmrf.partition import RgbImage

    arr = np.empty((height, width, 3), dtype=np.float64)
    arr[truth] = fg_color
    arr[~truth] = bg_color
    return RgbImage.from_array(arr)


def boundary_edge_map(truth: np.ndarray):
    """Edge pixels on both sides of the truth mask's 4-adjacency boundary."""
    from spmrf.mrf import GridGeometry
    from spmrf.pipeline import EdgeMap

    edge = np.zeros_like(truth, dtype=bool)
    edge[:, 1:] |= truth[:, 1:] != truth[:, :-1]
    edge[:, :-1] |= truth[:, 1:] != truth[:, :-1]
    edge[1:, :] |= truth[1:, :] != truth[:-1, :]
    edge[:-1, :] |= truth[1:, :] != truth[:-1, :]
    return EdgeMap(GridGeometry(truth.shape[1], truth.shape[0]), edge)
