"""REST facade over prediction, retrieval, and compositing.

JSON request/response bodies; images are separate GET resources. Sessions
live in memory, optionally mirrored to a persistence directory. Every
composite's provenance re-renders identically through the CLI.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Response, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from composekit import imgio
from composekit.compositing import (
    DEFAULT_FEATHER_RADIUS,
    SCALE_LIMITS,
    CompositeSpec,
    compose,
)
from composekit.data.palette import Palette
from composekit.data.scene import build_scene_input
from composekit.geometry import PixelBox, denormalize_box_clipped
from composekit.net.heatmap import export_heatmap
from composekit.net.inference import predict_multi
from composekit.retrieval.pool import top_candidates_for_ui
from composekit.service.state import Placement, SessionStore

log = logging.getLogger(__name__)

DEFAULT_MAX_PIXELS = 20_000_000


class PredictRequest(BaseModel):
    n_people: int = 1


class PlacementRequest(BaseModel):
    box: int
    segment_id: str
    dx: float = 0.0
    dy: float = 0.0
    scale: float = 1.0


def create_app(
    model,
    pool,
    extractor,
    persist_dir: str | Path | None = None,
    max_pixels: int = DEFAULT_MAX_PIXELS,
    feather_radius: int = DEFAULT_FEATHER_RADIUS,
) -> FastAPI:
    app = FastAPI(title="composekit service")
    store = SessionStore(persist_dir)
    app.state.store = store
    palette = Palette.generate([], seed=0)
    resolution = model.config.input_resolution

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    @app.post("/sessions", status_code=201)
    async def create_session(file: UploadFile = File(...)):
        data = await file.read()
        try:
            background = imgio.decode_rgb(data)
        except Exception:
            return error(400, "could not decode image (PNG or JPEG expected)")
        h, w = background.shape[:2]
        if h * w > max_pixels:
            return error(413, f"image has {h * w} pixels, limit is {max_pixels}")
        from composekit.geometry import pad_to_square
        session = store.create(background, pad_to_square(w, h))
        return {"session_id": session.session_id, "width": w, "height": h}

    @app.post("/sessions/{session_id}/predict")
    def predict_endpoint(session_id: str, req: PredictRequest):
        session = store.get(session_id)
        if session is None:
            return error(404, f"unknown session {session_id}")
        if not (1 <= req.n_people <= 225):
            return error(422, "n_people must be in [1, 225]")
        with session.lock:
            if session.scene is None:
                session.scene = build_scene_input(
                    session.background, [], [], palette, resolution=resolution)
            predictions = predict_multi(model, session.scene, req.n_people)
            session.predictions = predictions
            session.candidates.clear()
            w, h = session.size
            boxes = []
            session.placements = []
            for i, pred in enumerate(predictions):
                try:
                    pixel_box = denormalize_box_clipped(pred.top_box, session.frame, w, h)
                except ValueError:
                    # Decoded cell lies wholly in the padding; skip the box.
                    continue
                session.placements.append(Placement(segment_id=None, box=pixel_box))
                boxes.append({
                    "index": len(session.placements) - 1,
                    "box": list(pixel_box.as_xywh()),
                    "cell": {"col": pred.cell.col, "row": pred.cell.row,
                             "index": pred.cell.index},
                    "size_cell": {"col": pred.box_cells[0][1].col,
                                  "row": pred.box_cells[0][1].row,
                                  "index": pred.box_cells[0][1].index},
                })
            heatmap = export_heatmap(predictions[0], (w, h),
                                     background=session.background,
                                     frame=session.frame)
            session.images["heatmap.png"] = imgio.encode_png(heatmap)
            store.persist_state(session)
        return {
            "boxes": boxes,
            "heatmap_url": f"/sessions/{session_id}/images/heatmap.png",
        }

    @app.get("/sessions/{session_id}/candidates")
    def candidates_endpoint(session_id: str, box: int = 0):
        session = store.get(session_id)
        if session is None:
            return error(404, f"unknown session {session_id}")
        with session.lock:
            if not session.placements:
                return error(409, "call predict before requesting candidates")
            if not (0 <= box < len(session.placements)):
                return error(404, f"no predicted box with index {box}")
            if box not in session.candidates:
                session.candidates[box] = top_candidates_for_ui(
                    pool, session.background, session.placements[box].box, extractor)
            result = session.candidates[box]
        return {
            "box": box,
            "candidates": [{
                "segment_id": r.segment_id,
                "thumbnail_url": f"/segments/{r.segment_id}/thumbnail.png",
                "distance": result.distances[i] if i < len(result.distances) else None,
            } for i, r in enumerate(result.records)],
            "padded": result.padded,
            "short": result.short,
        }

    @app.post("/sessions/{session_id}/placements")
    def placements_endpoint(session_id: str, req: PlacementRequest):
        session = store.get(session_id)
        if session is None:
            return error(404, f"unknown session {session_id}")
        if req.segment_id not in pool:
            return error(404, f"unknown segment id {req.segment_id}")
        if req.scale <= 0:
            return error(422, "scale must be positive")
        with session.lock:
            if not (0 <= req.box < len(session.placements)):
                return error(404, f"no predicted box with index {req.box}")
            placement = session.placements[req.box]
            record = pool.get(req.segment_id)
            try:
                new_box = _edit_box(placement.box, req.dx, req.dy, req.scale,
                                    *session.size)
            except ValueError as exc:
                return error(422, str(exc))
            scale_factor = new_box.height / record.box.height
            if not (SCALE_LIMITS[0] <= scale_factor <= SCALE_LIMITS[1]):
                return error(422, f"resulting segment scale {scale_factor:.4f} "
                                  f"outside limits {SCALE_LIMITS}")
            placement.segment_id = req.segment_id
            placement.box = new_box
            spec = CompositeSpec(
                background=session.background,
                placements=[(p.segment_id, p.box) for p in session.placements
                            if p.segment_id is not None],
                feather_radius=feather_radius,
            )
            composite, provenance = compose(spec, pool)
            session.provenance = provenance
            session.images["composite.png"] = imgio.encode_png(composite)
            store.persist_state(session)
        return {
            "composite_url": f"/sessions/{session_id}/images/composite.png",
            "provenance": provenance,
            "box": {"index": req.box, "box": list(new_box.as_xywh())},
        }

    @app.get("/sessions/{session_id}/images/{name}")
    def session_image(session_id: str, name: str):
        session = store.get(session_id)
        if session is None:
            return error(404, f"unknown session {session_id}")
        data = session.images.get(name)
        if data is None:
            return error(404, f"no image named {name}")
        return Response(content=data, media_type="image/png")

    @app.get("/segments/{segment_id}/thumbnail.png")
    def segment_thumbnail(segment_id: str):
        if segment_id not in pool:
            return error(404, f"unknown segment id {segment_id}")
        record = pool.get(segment_id)
        thumb = record.crop.copy()
        thumb[~record.mask] = (245, 245, 245)
        return Response(content=imgio.encode_png(thumb), media_type="image/png")

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        session = store.get(session_id)
        if session is None:
            return error(404, f"unknown session {session_id}")
        with session.lock:
            w, h = session.size
            return {
                "session_id": session.session_id,
                "width": w, "height": h,
                "placements": [{
                    "index": i,
                    "segment_id": p.segment_id,
                    "box": list(p.box.as_xywh()),
                } for i, p in enumerate(session.placements)],
                "provenance": session.provenance,
            }

    return app


def _edit_box(box: PixelBox, dx: float, dy: float, scale: float,
              width: int, height: int) -> PixelBox:
    """Translate the center and scale the box, clamped into the image."""
    cx, cy = box.center
    cx += dx
    cy += dy
    w = box.width * scale
    h = box.height * scale
    if w < 1 or h < 1:
        raise ValueError("edited box degenerates below one pixel")
    w = min(w, width)
    h = min(h, height)
    cx = min(max(cx, w / 2), width - w / 2)
    cy = min(max(cy, h / 2), height - h / 2)
    return PixelBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
