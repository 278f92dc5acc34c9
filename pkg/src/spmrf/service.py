"""HTTP service for interactive superpixel segmentation sessions.

Sessions are kept in memory with LRU eviction.  A session pins the image,
its edge map and superpixel partition; each seed POST accumulates seeds,
re-solves the superpixel MRF and returns the new mask with solve timings.
Requests to one session serialize on its lock; distinct sessions proceed in
parallel.
"""

from __future__ import annotations

import base64
import os
import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from spmrf.fileio import mask_to_png_bytes, read_image
from spmrf.maxflow import warm_solver
from spmrf.mrf import MrfError
from spmrf.partition import (
    PartitionError,
    RgbImage,
    SuperpixelPartition,
    slic_superpixels,
)
from spmrf.pipeline import EdgeMap, Seeds, gradient_edge_map, segment_superpixel

DEFAULT_SESSION_CAP = 32
DEFAULT_MAX_IMAGE_BYTES = 16 * 1024 * 1024


@dataclass
class SessionState:
    session_id: str
    image: RgbImage
    edges: EdgeMap
    partition: SuperpixelPartition
    lambda_u: float
    seeds: Seeds
    mask: Optional[np.ndarray] = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(session_cap: Optional[int] = None,
               max_image_bytes: Optional[int] = None) -> FastAPI:
    cap = session_cap if session_cap is not None else int(
        os.environ.get("SPMRF_SESSION_CAP", DEFAULT_SESSION_CAP))
    max_bytes = max_image_bytes if max_image_bytes is not None else int(
        os.environ.get("SPMRF_MAX_IMAGE_BYTES", DEFAULT_MAX_IMAGE_BYTES))

    warm_solver()
    app = FastAPI(title="spmrf interactive segmentation")
    # local tool without auth; the browser UI runs on a different origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    sessions: OrderedDict[str, SessionState] = OrderedDict()
    registry_lock = threading.Lock()

    def _get_session(session_id: str) -> Optional[SessionState]:
        with registry_lock:
            state = sessions.get(session_id)
            if state is not None:
                sessions.move_to_end(session_id)
            return state

    @app.post("/session")
    async def create_session(
            request: Request,
            superpixels: int = Query(800, ge=1),
            compactness: float = Query(10.0, gt=0),
            iterations: int = Query(10, ge=1),
            lambda_u: float = Query(1.0, alias="lambda")):
        body = await request.body()
        if len(body) > max_bytes:
            return _error(413, f"image exceeds {max_bytes} bytes")
        if not body:
            return _error(400, "request body must contain the image bytes")
        try:
            image = read_image(body)
            target = min(superpixels, image.geometry.pixel_count)
            partition = slic_superpixels(image, target, compactness=compactness,
                                         iterations=iterations)
        except (MrfError, PartitionError) as exc:
            return _error(400, str(exc))
        edges = gradient_edge_map(image)
        state = SessionState(
            session_id=uuid.uuid4().hex,
            image=image,
            edges=edges,
            partition=partition,
            lambda_u=lambda_u,
            seeds=Seeds(image.geometry, np.empty(0, dtype=np.int64),
                        np.empty(0, dtype=np.int64)),
        )
        with registry_lock:
            sessions[state.session_id] = state
            while len(sessions) > cap:
                sessions.popitem(last=False)
        return {
            "session_id": state.session_id,
            "width": image.geometry.width,
            "height": image.geometry.height,
            "superpixel_count": partition.superpixel_count,
        }

    @app.post("/session/{session_id}/seeds")
    async def post_seeds(session_id: str, request: Request):
        state = _get_session(session_id)
        if state is None:
            return _error(404, f"unknown session {session_id}")
        body = await request.body()
        try:
            increment = Seeds.from_json(body.decode("utf-8"), state.image.geometry)
        except (MrfError, UnicodeDecodeError) as exc:
            return _error(400, str(exc))
        if increment.point_count() == 0 and increment.box is None:
            return _error(400, "seed increment is empty")
        with state.lock:
            try:
                merged = state.seeds.union(increment)
                mask, result, timings = segment_superpixel(
                    state.image, state.edges, merged, state.partition,
                    state.lambda_u)
            except MrfError as exc:
                return _error(400, str(exc))
            state.seeds = merged
            state.mask = mask
            return {
                "session_id": session_id,
                "width": state.image.geometry.width,
                "height": state.image.geometry.height,
                "superpixel_count": state.partition.superpixel_count,
                "energy": result.energy,
                "seed_count": merged.point_count(),
                "solve_ms": timings["solve_s"] * 1e3,
                "timings_ms": {
                    "unary": timings["unary_s"] * 1e3,
                    "aggregation": timings["aggregation_s"] * 1e3,
                    "solve": timings["solve_s"] * 1e3,
                    "total": timings["total_s"] * 1e3,
                },
                "mask_png_base64": base64.b64encode(
                    mask_to_png_bytes(mask)).decode("ascii"),
            }

    @app.get("/session/{session_id}/overlay")
    async def get_overlay(session_id: str):
        state = _get_session(session_id)
        if state is None:
            return _error(404, f"unknown session {session_id}")
        with state.lock:
            geom = state.image.geometry
            mask = state.mask if state.mask is not None else np.zeros(
                (geom.height, geom.width), dtype=np.uint8)
            return Response(content=mask_to_png_bytes(mask),
                            media_type="image/png")

    @app.get("/session/{session_id}/boundaries")
    async def get_boundaries(session_id: str):
        state = _get_session(session_id)
        if state is None:
            return _error(404, f"unknown session {session_id}")
        labels = state.partition.labels_2d()
        boundary = np.zeros_like(labels, dtype=bool)
        boundary[:, 1:] |= labels[:, 1:] != labels[:, :-1]
        boundary[1:, :] |= labels[1:, :] != labels[:-1, :]
        return Response(content=mask_to_png_bytes(boundary),
                        media_type="image/png")

    @app.delete("/session/{session_id}")
    async def delete_session(session_id: str):
        with registry_lock:
            state = sessions.pop(session_id, None)
        if state is None:
            return _error(404, f"unknown session {session_id}")
        return {"deleted": session_id}

    return app
