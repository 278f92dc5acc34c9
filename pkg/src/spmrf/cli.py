"""Batch CLI: fixture superpixelization, segmentation runs, benchmarks, service.

Exit codes: 2 for usage and parse failures, 3 for geometry mismatches,
4 for other domain errors (for example a non-submodular instance).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from spmrf.fileio import read_edge_map, read_binary_mask, read_image, write_mask
from spmrf.maxflow import warm_solver
from spmrf.mrf import (
    DimensionMismatchError,
    FixtureFormatError,
    MrfError,
    parse_mrf_fixture,
)
from spmrf.partition import (
    PartitionError,
    load_partition,
    slic_superpixels,
)
from spmrf.pipeline import (
    Seeds,
    boundary_deviation,
    gradient_edge_map,
    overlap_ratio,
    segment_pixel,
    segment_superpixel,
    user_effort,
)
from spmrf.superpixelize import format_spmrf_fixture, superpixelize

EXIT_PARSE = 2
EXIT_GEOMETRY = 3
EXIT_DOMAIN = 4

REPORT_COLUMNS = ["image", "K", "agg_ms", "sp_solve_ms", "px_solve_ms",
                  "sp_energy", "px_energy", "overlap_sp", "overlap_px"]


@dataclass(frozen=True)
class BenchRecord:
    """One benchmark measurement; serializes to a report CSV row."""

    image: str
    superpixel_count: Optional[int] = None
    aggregation_ms: Optional[float] = None
    sp_solve_ms: Optional[float] = None
    px_solve_ms: Optional[float] = None
    sp_energy: Optional[float] = None
    px_energy: Optional[float] = None
    overlap_sp: Optional[float] = None
    overlap_px: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("aggregation_ms", "sp_solve_ms", "px_solve_ms"):
            value = getattr(self, name)
            if value is not None and value <= 0.0:
                raise MrfError(f"{name} must be positive, got {value}")
        for name in ("sp_energy", "px_energy"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise MrfError(f"{name} must be finite")

    def to_row(self) -> dict[str, str]:
        def fmt(value, spec="{:.6f}"):
            return "" if value is None else spec.format(value)

        return {
            "image": self.image,
            "K": "" if self.superpixel_count is None
            else str(self.superpixel_count),
            "agg_ms": fmt(self.aggregation_ms),
            "sp_solve_ms": fmt(self.sp_solve_ms),
            "px_solve_ms": fmt(self.px_solve_ms),
            "sp_energy": "" if self.sp_energy is None else repr(self.sp_energy),
            "px_energy": "" if self.px_energy is None else repr(self.px_energy),
            "overlap_sp": fmt(self.overlap_sp, "{:.9f}"),
            "overlap_px": fmt(self.overlap_px, "{:.9f}"),
        }


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spmrf",
        description="Superpixel-level binary MRF tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("superpixelize",
                       help="aggregate an MRF fixture over a partition")
    p.add_argument("--mrf", required=True, help="input MRF text fixture")
    p.add_argument("--partition", required=True,
                   help="partition file (16-bit PGM or CSV)")
    p.add_argument("--out", required=True, help="output spmrf fixture")
    p.set_defaults(func=cmd_superpixelize)

    p = sub.add_parser("segment", help="seed-driven interactive segmentation")
    p.add_argument("--image", required=True, help="input image (PNG or PGM)")
    p.add_argument("--seeds", required=True, help="seed JSON file")
    p.add_argument("--edges", help="binary edge-map PGM; default: gradient detector")
    level = p.add_mutually_exclusive_group()
    level.add_argument("--partition", help="partition file to segment on")
    level.add_argument("--slic", type=int, default=None, metavar="N",
                       help="generate a partition with ~N superpixels (default 800)")
    level.add_argument("--pixel-level", action="store_true",
                       help="solve at pixel level instead of superpixels")
    p.add_argument("--lambda", dest="lambda_u", type=float, default=1.0,
                   help="unary weight (default 1.0)")
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--seed", type=int, default=0,
                   help="generator seed (the SLIC generator is deterministic; "
                        "reserved for reproducibility flags)")
    p.add_argument("--out-mask", help="write the result mask (PGM or PNG)")
    p.add_argument("--truth", help="ground-truth mask for metrics")
    p.add_argument("--report", help="append a benchmark CSV row (needs --truth)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("bench", help="pixel vs superpixel benchmark over a corpus")
    p.add_argument("--corpus", required=True,
                   help="directory of <stem>.png|.pgm images with "
                        "<stem>.seeds.json, optional <stem>.edges.pgm and "
                        "<stem>.truth.pgm")
    p.add_argument("--superpixels", type=int, default=800)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--report", required=True, help="output CSV path")
    p.add_argument("--lambda", dest="lambda_u", type=float, default=1.0)
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the interactive segmentation service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("SPMRF_PORT", "8000")))
    p.set_defaults(func=cmd_serve)
    return parser


def cmd_superpixelize(args) -> int:
    mrf = parse_mrf_fixture(Path(args.mrf).read_text())
    partition = load_partition(Path(args.partition).read_bytes())
    sp, _report = superpixelize(mrf, partition)
    Path(args.out).write_text(format_spmrf_fixture(sp))
    print(f"K={sp.superpixel_count} C={sp.constant!r}")
    return 0


def _load_segment_inputs(args):
    image = read_image(args.image)
    if args.edges:
        edges = read_edge_map(args.edges, image.geometry)
    else:
        edges = gradient_edge_map(image)
    seeds = Seeds.from_json(Path(args.seeds).read_text(), image.geometry)
    return image, edges, seeds


def _resolve_partition(args, image):
    if args.partition:
        partition = load_partition(Path(args.partition).read_bytes())
        if partition.geometry != image.geometry:
            raise DimensionMismatchError(
                f"partition geometry {partition.geometry} differs from image "
                f"{image.geometry}")
        return partition
    target = args.slic if args.slic is not None else 800
    return slic_superpixels(image, target, compactness=args.compactness,
                            iterations=getattr(args, "iterations", 10))


def cmd_segment(args) -> int:
    image, edges, seeds = _load_segment_inputs(args)
    warm_solver()
    truth = None
    if args.truth:
        truth = read_binary_mask(args.truth)
        if truth.shape != (image.geometry.height, image.geometry.width):
            raise DimensionMismatchError("truth mask geometry differs from image")
    if args.report and truth is None:
        raise FixtureFormatError("--report requires --truth")

    stem = Path(args.image).stem
    if args.pixel_level:
        mask, result, timings = segment_pixel(image, edges, seeds, args.lambda_u)
        print(f"level=pixel energy={result.energy!r} "
              f"solve_ms={timings['solve_s'] * 1e3:.3f}")
        record = BenchRecord(stem, px_solve_ms=timings["solve_s"] * 1e3,
                             px_energy=result.energy)
    else:
        partition = _resolve_partition(args, image)
        mask, result, timings = segment_superpixel(image, edges, seeds,
                                                   partition, args.lambda_u)
        print(f"level=superpixel K={partition.superpixel_count} "
              f"energy={result.energy!r} "
              f"agg_ms={timings['aggregation_s'] * 1e3:.3f} "
              f"solve_ms={timings['solve_s'] * 1e3:.3f}")
        record = BenchRecord(stem, superpixel_count=partition.superpixel_count,
                             aggregation_ms=timings["aggregation_s"] * 1e3,
                             sp_solve_ms=timings["solve_s"] * 1e3,
                             sp_energy=result.energy)

    if args.out_mask:
        write_mask(args.out_mask, mask)
    if truth is not None:
        ratio = overlap_ratio(mask, truth)
        print(f"overlap_ratio={ratio:.6f}")
        try:
            print(f"boundary_deviation={boundary_deviation(mask, truth):.6f}")
        except MrfError:
            print("boundary_deviation=n/a")
        print(f"user_effort={user_effort(seeds):.6f}")
        key = "overlap_px" if args.pixel_level else "overlap_sp"
        record = BenchRecord(**{**record.__dict__, key: ratio})
        if args.report:
            _append_report_row(Path(args.report), record.to_row())
    return 0


def _append_report_row(path: Path, row: dict) -> None:
    fresh = not path.exists()
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        if fresh:
            writer.writeheader()
        writer.writerow(row)


def _corpus_entries(corpus: Path) -> list[Path]:
    images = []
    for path in sorted(corpus.iterdir()):
        if path.suffix.lower() not in (".png", ".pgm"):
            continue
        if path.name.endswith(".edges.pgm") or path.name.endswith(".truth.pgm"):
            continue
        images.append(path)
    return images


def cmd_bench(args) -> int:
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise FileNotFoundError(f"corpus directory {corpus} does not exist")
    images = _corpus_entries(corpus)
    if not images:
        raise FixtureFormatError(f"empty corpus: no images in {corpus}")
    if args.repeat < 1:
        raise FixtureFormatError("--repeat must be >= 1")

    warm_solver()
    rows = []
    for image_path in images:
        stem = image_path.stem
        image = read_image(image_path)
        edges_path = corpus / f"{stem}.edges.pgm"
        if edges_path.exists():
            edges = read_edge_map(edges_path, image.geometry)
        else:
            edges = gradient_edge_map(image)
        seeds_path = corpus / f"{stem}.seeds.json"
        if not seeds_path.exists():
            raise FileNotFoundError(f"missing seed file {seeds_path}")
        seeds = Seeds.from_json(seeds_path.read_text(), image.geometry)
        truth_path = corpus / f"{stem}.truth.pgm"
        truth = read_binary_mask(truth_path) if truth_path.exists() else None

        partition = slic_superpixels(image, args.superpixels,
                                     compactness=args.compactness)
        for _ in range(args.repeat):
            sp_mask, sp_res, sp_t = segment_superpixel(
                image, edges, seeds, partition, args.lambda_u)
            px_mask, px_res, px_t = segment_pixel(image, edges, seeds,
                                                  args.lambda_u)
            record = BenchRecord(
                image=stem,
                superpixel_count=partition.superpixel_count,
                aggregation_ms=sp_t["aggregation_s"] * 1e3,
                sp_solve_ms=sp_t["solve_s"] * 1e3,
                px_solve_ms=px_t["solve_s"] * 1e3,
                sp_energy=sp_res.energy,
                px_energy=px_res.energy,
                overlap_sp=None if truth is None
                else overlap_ratio(sp_mask, truth),
                overlap_px=None if truth is None
                else overlap_ratio(px_mask, truth),
            )
            rows.append(record.to_row())

    summary = _summary_rows(rows)
    report = Path(args.report)
    with report.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows + summary:
            writer.writerow(row)
    med_sp = statistics.median(float(r["sp_solve_ms"]) for r in rows)
    med_px = statistics.median(float(r["px_solve_ms"]) for r in rows)
    speedup = med_px / med_sp if med_sp > 0 else float("inf")
    print(f"images={len(images)} repeats={args.repeat} "
          f"median_sp_solve_ms={med_sp:.3f} median_px_solve_ms={med_px:.3f} "
          f"speedup={speedup:.2f}")
    return 0


def _summary_rows(rows: list[dict]) -> list[dict]:
    stats = {
        "mean": statistics.fmean,
        "std": lambda v: statistics.pstdev(v) if len(v) > 1 else 0.0,
        "min": min,
        "median": statistics.median,
        "max": max,
    }
    numeric = [c for c in REPORT_COLUMNS if c not in ("image", "K")]
    out = []
    for name, fn in stats.items():
        row = {c: "" for c in REPORT_COLUMNS}
        row["image"] = name
        for col in numeric:
            values = [float(r[col]) for r in rows if r[col] != ""]
            if values:
                row[col] = f"{fn(values):.6f}"
        out.append(row)
    return out


def cmd_serve(args) -> int:
    import uvicorn

    from spmrf.service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (FixtureFormatError, PartitionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except MrfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
