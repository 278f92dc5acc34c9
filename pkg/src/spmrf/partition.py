"""Superpixel partitions: representation, SLIC-style generation, file formats.

A partition assigns every pixel exactly one superpixel index in [0, K); every
index is used.  The generator enforces 4-connectivity of each superpixel;
partitions loaded from files may be arbitrary label maps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
import numpy as np
from scipy import ndimage

from spmrf.mrf import DimensionMismatchError, GridGeometry, MrfError


class PartitionError(MrfError):
    """Invalid partition input or file."""


class NonDenseLabelsWarning(UserWarning):
    """Loaded labels were not a dense [0, K) range and were compacted."""


@dataclass(frozen=True)
class RgbImage:
    """RGB image with channels in [0, 1], each shaped (height, width)."""

    geometry: GridGeometry
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        shape = (self.geometry.height, self.geometry.width)
        for name in ("r", "g", "b"):
            chan = np.asarray(getattr(self, name), dtype=np.float64)
            if chan.shape != shape:
                raise DimensionMismatchError(
                    f"channel {name} has shape {chan.shape}, expected {shape}")
            if chan.size and (chan.min() < 0.0 or chan.max() > 1.0):
                raise MrfError(f"channel {name} must lie in [0, 1]")
            chan = np.ascontiguousarray(chan)
            chan.setflags(write=False)
            object.__setattr__(self, name, chan)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RgbImage":
        """Accepts (H, W, 3) or (H, W); uint8 data is scaled by 1/255."""
        arr = np.asarray(arr)
        if arr.dtype == np.uint8:
            arr = arr.astype(np.float64) / 255.0
        else:
            arr = arr.astype(np.float64)
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise DimensionMismatchError(f"expected (H, W, 3) image, got {arr.shape}")
        geom = GridGeometry(arr.shape[1], arr.shape[0])
        return cls(geom, arr[:, :, 0], arr[:, :, 1], arr[:, :, 2])

    def stack(self) -> np.ndarray:
        return np.stack([self.r, self.g, self.b], axis=2)

    def luminance(self) -> np.ndarray:
        return 0.299 * self.r + 0.587 * self.g + 0.114 * self.b


@dataclass(frozen=True)
class SuperpixelPartition:
    """Per-pixel superpixel index (flat raster array) plus the count K."""

    geometry: GridGeometry
    labels: np.ndarray
    superpixel_count: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if labels.shape != (self.geometry.pixel_count,):
            raise DimensionMismatchError(
                f"labels have shape {labels.shape}, "
                f"expected ({self.geometry.pixel_count},)")
        k = int(self.superpixel_count)
        if k < 1:
            raise PartitionError("superpixel count must be >= 1")
        if labels.min() < 0 or labels.max() >= k:
            raise PartitionError("superpixel index out of [0, K)")
        support = np.bincount(labels, minlength=k)
        if (support == 0).any():
            empty = np.flatnonzero(support == 0)
            raise PartitionError(f"empty superpixels: {empty.tolist()}")
        labels = np.ascontiguousarray(labels)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "superpixel_count", k)

    def labels_2d(self) -> np.ndarray:
        return self.labels.reshape(self.geometry.height, self.geometry.width)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.superpixel_count)


def identity_partition(geometry: GridGeometry) -> SuperpixelPartition:
    """One superpixel per pixel: labels[p] = p."""
    n = geometry.pixel_count
    return SuperpixelPartition(geometry, np.arange(n, dtype=np.int64), n)


def _compact_labels(raw: np.ndarray) -> tuple[np.ndarray, int, bool]:
    """Relabel to a dense [0, K) range, first raster occurrence first."""
    uniq, first_idx, inverse = np.unique(raw, return_index=True,
                                         return_inverse=True)
    rank = np.empty(uniq.shape[0], dtype=np.int64)
    rank[np.argsort(first_idx, kind="stable")] = np.arange(uniq.shape[0])
    out = rank[inverse]
    was_identity = bool((uniq == rank).all())
    return out, int(uniq.shape[0]), was_identity


def slic_superpixels(image: RgbImage, target_count: int,
                     compactness: float = 10.0,
                     iterations: int = 10) -> SuperpixelPartition:
    """Grid-seeded k-means over (color, position) with compactness weighting.

    Seeds sit on a regular grid of roughly target_count cells; each iteration
    assigns pixels within a 2S window of each center (S = grid interval) by
    the distance  d_color^2 + (compactness / S)^2 * d_xy^2,  then recenters.
    A post-pass keeps the largest 4-connected component of every cluster and
    merges orphan components into the largest adjacent superpixel, so the
    result is always a valid connected partition.
    """
    geom = image.geometry
    w, h, n = geom.width, geom.height, geom.pixel_count
    if target_count < 1:
        raise PartitionError("target_count must be >= 1")
    if target_count > n:
        raise PartitionError(
            f"target_count {target_count} exceeds pixel count {n}")
    if compactness <= 0 or iterations < 1:
        raise PartitionError("compactness and iterations must be positive")

    interval = float(np.sqrt(n / target_count))
    nx = max(1, int(round(w / interval)))
    ny = max(1, int(round(h / interval)))
    cx = (np.arange(nx) + 0.5) * (w / nx) - 0.5
    cy = (np.arange(ny) + 0.5) * (h / ny) - 0.5
    cgx, cgy = np.meshgrid(cx, cy)
    cent_x = cgx.ravel().astype(np.float64)
    cent_y = cgy.ravel().astype(np.float64)
    k0 = cent_x.shape[0]

    channels = np.stack([image.r, image.g, image.b], axis=0)
    seed_col = np.clip(np.round(cent_x).astype(np.int64), 0, w - 1)
    seed_row = np.clip(np.round(cent_y).astype(np.int64), 0, h - 1)
    cent_color = channels[:, seed_row, seed_col].T.copy()

    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    spatial_scale = (compactness / interval) ** 2
    window = int(np.ceil(2.0 * interval))
    assign = np.zeros((h, w), dtype=np.int64)

    for _ in range(iterations):
        best = np.full((h, w), np.inf, dtype=np.float64)
        assign.fill(-1)
        for k in range(k0):
            x0 = max(0, int(np.floor(cent_x[k])) - window)
            x1 = min(w, int(np.ceil(cent_x[k])) + window + 1)
            y0 = max(0, int(np.floor(cent_y[k])) - window)
            y1 = min(h, int(np.ceil(cent_y[k])) + window + 1)
            if x0 >= x1 or y0 >= y1:
                continue
            dc2 = ((channels[0, y0:y1, x0:x1] - cent_color[k, 0]) ** 2
                   + (channels[1, y0:y1, x0:x1] - cent_color[k, 1]) ** 2
                   + (channels[2, y0:y1, x0:x1] - cent_color[k, 2]) ** 2)
            ds2 = ((xs[None, x0:x1] - cent_x[k]) ** 2
                   + (ys[y0:y1, None] - cent_y[k]) ** 2)
            dist = dc2 + spatial_scale * ds2
            better = dist < best[y0:y1, x0:x1]
            best[y0:y1, x0:x1][better] = dist[better]
            assign[y0:y1, x0:x1][better] = k
        missing = assign < 0
        if missing.any():
            my, mx = np.nonzero(missing)
            for s in range(0, my.shape[0], 4096):
                ry, rx = my[s:s + 4096], mx[s:s + 4096]
                dc2 = ((channels[0, ry, rx][:, None] - cent_color[None, :, 0]) ** 2
                       + (channels[1, ry, rx][:, None] - cent_color[None, :, 1]) ** 2
                       + (channels[2, ry, rx][:, None] - cent_color[None, :, 2]) ** 2)
                ds2 = ((rx[:, None] - cent_x[None, :]) ** 2
                       + (ry[:, None] - cent_y[None, :]) ** 2)
                assign[ry, rx] = np.argmin(dc2 + spatial_scale * ds2, axis=1)

        flat = assign.ravel()
        counts = np.bincount(flat, minlength=k0).astype(np.float64)
        occupied = counts > 0
        px = np.tile(xs, h)
        py = np.repeat(ys, w)
        cent_x[occupied] = (np.bincount(flat, weights=px, minlength=k0)[occupied]
                            / counts[occupied])
        cent_y[occupied] = (np.bincount(flat, weights=py, minlength=k0)[occupied]
                            / counts[occupied])
        for c in range(3):
            sums = np.bincount(flat, weights=channels[c].ravel(), minlength=k0)
            cent_color[occupied, c] = sums[occupied] / counts[occupied]

    assign = _enforce_connectivity(assign)
    labels, count, _ = _compact_labels(assign.ravel())
    if not (0.5 * target_count <= count <= 2.0 * target_count):
        raise PartitionError(
            f"generator produced K={count}, outside [{0.5 * target_count}, "
            f"{2.0 * target_count}] for target {target_count}")
    return SuperpixelPartition(geom, labels, count)


_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _enforce_connectivity(assign: np.ndarray) -> np.ndarray:
    """Keep each cluster's largest 4-connected component; merge the rest.

    Orphan components are merged whole into the adjacent superpixel with the
    largest current area (ties toward the smaller label id); components with
    only orphan neighbors wait for the next sweep.
    """
    h, w = assign.shape
    out = assign.copy()
    boxes = ndimage.find_objects(assign + 1)
    orphans: list[np.ndarray] = []
    for k, box in enumerate(boxes):
        if box is None:
            continue
        mask = assign[box] == k
        comp, ncomp = ndimage.label(mask, structure=_FOUR_CONN)
        if ncomp <= 1:
            continue
        sizes = np.bincount(comp.ravel())[1:]
        keep = int(np.argmax(sizes)) + 1
        for c in range(1, ncomp + 1):
            if c == keep:
                continue
            cy, cx = np.nonzero(comp == c)
            flat = (cy + box[0].start) * w + (cx + box[1].start)
            orphans.append(np.sort(flat))
            out.ravel()[flat] = -1

    if not orphans:
        return out
    orphans.sort(key=lambda px: int(px[0]))
    areas = np.bincount(out.ravel()[out.ravel() >= 0],
                        minlength=int(assign.max()) + 1).astype(np.int64)
    flat_out = out.ravel()
    pending = orphans
    while pending:
        deferred = []
        progressed = False
        for px in pending:
            y, x = px // w, px % w
            neighbor_labels: set[int] = set()
            for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                ny, nx2 = y + dy, x + dx
                ok = (ny >= 0) & (ny < h) & (nx2 >= 0) & (nx2 < w)
                vals = flat_out[ny[ok] * w + nx2[ok]]
                neighbor_labels.update(int(v) for v in vals[vals >= 0])
            if not neighbor_labels:
                deferred.append(px)
                continue
            target = max(neighbor_labels, key=lambda lab: (areas[lab], -lab))
            flat_out[px] = target
            areas[target] += px.shape[0]
            progressed = True
        if deferred and not progressed:
            raise PartitionError("orphan components could not be reattached")
        pending = deferred
    return out


def disconnected_superpixels(partition: SuperpixelPartition) -> list[int]:
    """Superpixel ids whose support has more than one 4-connected component."""
    lab2d = partition.labels_2d()
    bad = []
    for k, box in enumerate(ndimage.find_objects(lab2d + 1)):
        if box is None:
            continue
        _, ncomp = ndimage.label(lab2d[box] == k, structure=_FOUR_CONN)
        if ncomp > 1:
            bad.append(k)
    return bad


def save_partition(partition: SuperpixelPartition, fmt: str = "pgm") -> bytes:
    """Serialize as 16-bit big-endian PGM (default) or plain-text CSV."""
    geom = partition.geometry
    if fmt == "pgm":
        if partition.superpixel_count > 65536:
            raise PartitionError("PGM format supports at most 65536 superpixels")
        header = f"P5\n{geom.width} {geom.height}\n65535\n".encode("ascii")
        return header + partition.labels.astype(">u2").tobytes()
    if fmt == "csv":
        lines = [f"{geom.width},{geom.height}"]
        lines += [str(int(v)) for v in partition.labels]
        return ("\n".join(lines) + "\n").encode("ascii")
    raise PartitionError(f"unknown partition format {fmt!r}")


def load_partition(data: bytes) -> SuperpixelPartition:
    """Parse a PGM or CSV label map; labels compact to [0, K) on load.

    A NonDenseLabelsWarning is issued when the stored labels were not already
    a dense range starting at zero.  Empty superpixels cannot survive the
    compaction, so any partition this returns is valid.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    stripped = data.lstrip()
    if stripped.startswith(b"P5"):
        raw, geom = _parse_pgm_labels(stripped)
    else:
        raw, geom = _parse_csv_labels(data)
    labels, count, was_dense = _compact_labels(raw)
    if not was_dense:
        warnings.warn("partition labels were compacted to a dense [0, K) range",
                      NonDenseLabelsWarning, stacklevel=2)
    return SuperpixelPartition(geom, labels, count)


def _parse_pgm_header(data: bytes, expect_magic: bytes) -> tuple[list[int], int]:
    """Parse magic + 3 header ints, skipping '#' comments; returns (ints, offset)."""
    pos = 0
    tokens: list[bytes] = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PartitionError("truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != expect_magic:
        raise PartitionError(f"expected {expect_magic!r} file")
    try:
        nums = [int(t) for t in tokens[1:]]
    except ValueError as exc:
        raise PartitionError("non-numeric PGM header") from exc
    return nums, pos + 1


def _parse_pgm_labels(data: bytes) -> tuple[np.ndarray, GridGeometry]:
    (width, height, maxval), offset = _parse_pgm_header(data, b"P5")
    if width < 1 or height < 1 or maxval < 1 or maxval > 65535:
        raise PartitionError("bad PGM dimensions")
    n = width * height
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    body = data[offset:offset + n * dtype.itemsize]
    if len(body) != n * dtype.itemsize:
        raise PartitionError(
            f"PGM body holds {len(body) // dtype.itemsize} of {n} pixels")
    raw = np.frombuffer(body, dtype=dtype).astype(np.int64)
    return raw, GridGeometry(width, height)


def _parse_csv_labels(data: bytes) -> tuple[np.ndarray, GridGeometry]:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise PartitionError("partition file is neither PGM nor text CSV") from exc
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise PartitionError("empty partition file")
    head = lines[0].split(",")
    if len(head) != 2:
        raise PartitionError(f"bad CSV header {lines[0]!r}, expected width,height")
    try:
        width, height = int(head[0]), int(head[1])
        values = np.array([int(ln) for ln in lines[1:]], dtype=np.int64)
    except ValueError as exc:
        raise PartitionError("non-integer entry in CSV partition") from exc
    if width < 1 or height < 1:
        raise PartitionError("bad CSV dimensions")
    if values.shape[0] != width * height:
        raise PartitionError(
            f"CSV holds {values.shape[0]} of {width * height} labels")
    if values.size and values.min() < 0:
        raise PartitionError("negative superpixel index")
    return values, GridGeometry(width, height)


def adjacency(partition: SuperpixelPartition, pairs) -> set[tuple[int, int]]:
    """Superpixel pairs (k, l), k < l, crossed by at least one neighbor pair."""
    pair_p, pair_q = _pair_arrays(pairs)
    if pair_p.size and (pair_p.min() < 0
                        or max(pair_p.max(), pair_q.max()) >= partition.geometry.pixel_count):
        raise DimensionMismatchError("neighbor pair indices outside geometry")
    ki = partition.labels[pair_p]
    kj = partition.labels[pair_q]
    crossing = ki != kj
    lo = np.minimum(ki[crossing], kj[crossing])
    hi = np.maximum(ki[crossing], kj[crossing])
    keys = np.unique(lo * partition.superpixel_count + hi)
    k = partition.superpixel_count
    return {(int(key // k), int(key % k)) for key in keys}


def _pair_arrays(pairs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pairs, tuple) and len(pairs) == 2:
        return (np.asarray(pairs[0], dtype=np.int64),
                np.asarray(pairs[1], dtype=np.int64))
    plist = list(pairs)
    pp = np.array([p for p, _q in plist], dtype=np.int64)
    qq = np.array([q for _p, q in plist], dtype=np.int64)
    return pp, qq
