"""HTTP inference service.

Request/response shapes, status codes and error bodies:

* ``POST /v1/predict`` - multipart form (file part ``image`` + JSON part
  ``meta``) or a plain JSON body with ``image_b64``. Responds with the
  PredictResponse object from ``pallor.pipeline``.
  Errors: 400 malformed payload or ROI out of bounds, 413 payload over the
  configured limit, 422 calibration/segmentation failed (machine-readable
  reason), 503 required model not loaded.
* ``GET /v1/health`` - 200 ``{status, model_id, uptime_seconds}`` once the
  regressor is loaded, 503 otherwise.
* ``GET /v1/model`` - architecture summaries and standardization constants.

Every error path returns ``{"error_code": ..., "message": ...}``. Model
state is loaded at startup and never mutated while serving, so concurrent
requests are safe and identical requests return identical bodies.
"""

from __future__ import annotations

import base64
import binascii
import json
import os
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .errors import (
    CalibrationFloorError,
    CorruptImageError,
    MaskTooSmallError,
    PallorError,
    RoiBoundsError,
    UnsupportedImageFormatError,
)
from .imaging import Roi, decode_image
from .nn import Network, load_weights
from .pipeline import predict_response_dict, run_predict
from .screening import DEFAULT_CUTOFFS, RegressorModel, load_regressor
from .segmentation import _check_segmenter_net

__all__ = ["ServiceConfig", "create_app", "run_service"]

DEFAULT_MAX_BODY = 16 * 1024 * 1024


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    regressor_weights: str | None = None
    segmenter_weights: str | None = None
    max_body_bytes: int = DEFAULT_MAX_BODY
    default_cutoffs: tuple[float, ...] = DEFAULT_CUTOFFS
    cors: bool = False
    ui_dir: str | None = None

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        with open(path) as fh:
            raw = json.load(fh)
        cfg = cls(
            host=raw.get("host", cls.host),
            port=int(raw.get("port", cls.port)),
            regressor_weights=raw.get("regressor_weights"),
            segmenter_weights=raw.get("segmenter_weights"),
            max_body_bytes=int(raw.get("max_body_bytes", DEFAULT_MAX_BODY)),
            default_cutoffs=tuple(raw.get("default_cutoffs", DEFAULT_CUTOFFS)),
            cors=bool(raw.get("cors", False)),
            ui_dir=raw.get("ui_dir"),
        )
        return cfg.with_env_overrides()

    def with_env_overrides(self) -> "ServiceConfig":
        self.host = os.environ.get("PALLOR_HOST", self.host)
        self.port = int(os.environ.get("PALLOR_PORT", self.port))
        self.regressor_weights = os.environ.get(
            "PALLOR_REGRESSOR_WEIGHTS", self.regressor_weights
        )
        self.segmenter_weights = os.environ.get(
            "PALLOR_SEGMENTER_WEIGHTS", self.segmenter_weights
        )
        return self


def _error(status: int, code: str, message: str, **details) -> JSONResponse:
    body = {"error_code": code, "message": message}
    if details:
        body.update(details)
    return JSONResponse(body, status_code=status)


def _parse_roi(obj, name: str) -> Roi:
    if not isinstance(obj, dict) or set(obj) != {"x", "y", "w", "h"}:
        raise ValueError(f"{name} must be an object with integer fields x, y, w, h")
    try:
        return Roi(int(obj["x"]), int(obj["y"]), int(obj["w"]), int(obj["h"]))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad {name}: {exc}") from exc


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="pallor screening service", docs_url=None, redoc_url=None)
    state = app.state
    state.started = time.monotonic()
    state.config = config
    state.regressor = None
    state.segmenter_net = None
    state.segmenter_model_id = None

    if config.regressor_weights:
        state.regressor = load_regressor(config.regressor_weights)
    if config.segmenter_weights:
        net, _std, model_id = load_weights(config.segmenter_weights)
        _check_segmenter_net(net)
        state.segmenter_net = net
        state.segmenter_model_id = model_id

    if config.cors:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    if config.ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    @app.exception_handler(Exception)
    async def _unhandled(request: Request, exc: Exception):
        return _error(500, "internal_error", f"{type(exc).__name__}: {exc}")

    @app.get("/v1/health")
    async def health():
        if state.regressor is None:
            return _error(503, "model_not_loaded", "no regressor weights loaded")
        return {
            "status": "ok",
            "model_id": state.regressor.model_id,
            "uptime_seconds": time.monotonic() - state.started,
        }

    @app.get("/v1/model")
    async def model_info():
        if state.regressor is None:
            return _error(503, "model_not_loaded", "no regressor weights loaded")
        reg = state.regressor
        body = {
            "regressor": {
                "model_id": reg.model_id,
                "spec": reg.net.spec.to_dict(),
                "standardization": reg.standardization.to_dict(),
            },
            "segmenter": None,
        }
        if state.segmenter_net is not None:
            body["segmenter"] = {
                "model_id": state.segmenter_model_id,
                "spec": state.segmenter_net.spec.to_dict(),
                "standardization": None,
            }
        return body

    @app.post("/v1/predict")
    async def predict(request: Request):
        declared = request.headers.get("content-length")
        if declared and declared.isdigit() and int(declared) > config.max_body_bytes:
            return _error(
                413, "payload_too_large",
                f"payload exceeds the {config.max_body_bytes}-byte limit",
            )
        body = await request.body()
        if len(body) > config.max_body_bytes:
            return _error(
                413, "payload_too_large",
                f"payload exceeds the {config.max_body_bytes}-byte limit",
            )

        content_type = request.headers.get("content-type", "")
        try:
            if content_type.startswith("multipart/form-data"):
                form = await request.form()
                if "image" not in form or "meta" not in form:
                    return _error(
                        400, "malformed_payload",
                        "multipart request needs an 'image' file part and a 'meta' JSON part",
                    )
                image_part = form["image"]
                image_bytes = (
                    await image_part.read()
                    if hasattr(image_part, "read")
                    else str(image_part).encode()
                )
                meta_part = form["meta"]
                meta_text = (
                    (await meta_part.read()).decode("utf-8")
                    if hasattr(meta_part, "read")
                    else str(meta_part)
                )
                meta = json.loads(meta_text)
            elif content_type.startswith("application/json"):
                meta = json.loads(body.decode("utf-8"))
                if "image_b64" not in meta:
                    return _error(400, "malformed_payload", "JSON requests need image_b64")
                image_bytes = base64.b64decode(meta["image_b64"], validate=True)
            else:
                return _error(
                    400, "malformed_payload",
                    f"unsupported content type {content_type!r}; use multipart/form-data "
                    "or application/json",
                )
        except (json.JSONDecodeError, UnicodeDecodeError, binascii.Error, ValueError) as exc:
            return _error(400, "malformed_payload", f"cannot parse request: {exc}")

        if not isinstance(meta, dict) or "card_roi" not in meta:
            return _error(400, "malformed_payload", "request must carry card_roi")

        try:
            card_roi = _parse_roi(meta["card_roi"], "card_roi")
            conj_roi = (
                _parse_roi(meta["conjunctiva_roi"], "conjunctiva_roi")
                if meta.get("conjunctiva_roi") is not None
                else None
            )
            segmenter = meta.get("segmenter", "cnn")
            if segmenter not in ("cnn", "classical"):
                raise ValueError(f"segmenter must be 'cnn' or 'classical', got {segmenter!r}")
            cutoffs = tuple(float(c) for c in meta.get("cutoffs", config.default_cutoffs))
            if not cutoffs or any(c <= 0 for c in cutoffs):
                raise ValueError("cutoffs must be positive numbers")
        except ValueError as exc:
            return _error(400, "malformed_payload", str(exc))

        if state.regressor is None:
            return _error(503, "model_not_loaded", "no regressor weights loaded")
        if segmenter == "cnn" and state.segmenter_net is None:
            return _error(503, "model_not_loaded", "no segmenter weights loaded")

        try:
            image = decode_image(image_bytes)
        except (UnsupportedImageFormatError, CorruptImageError) as exc:
            return _error(400, "malformed_payload", f"bad image payload: {exc}")

        try:
            outcome = run_predict(
                image,
                card_roi,
                regressor=state.regressor,
                segmenter=segmenter,
                segmenter_net=state.segmenter_net,
                conjunctiva_roi=conj_roi,
                cutoffs=cutoffs,
            )
        except RoiBoundsError as exc:
            return _error(400, "roi_out_of_bounds", str(exc))
        except CalibrationFloorError as exc:
            return _error(422, "calibration_failed", str(exc))
        except MaskTooSmallError as exc:
            return _error(422, "segmentation_failed", str(exc), reason="mask_under_min_area")
        except PallorError as exc:
            return _error(422, "pipeline_failed", str(exc))

        return JSONResponse(predict_response_dict(outcome))

    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
