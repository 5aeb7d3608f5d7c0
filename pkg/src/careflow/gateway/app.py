"""HTTP front door over the execution environment.

Routes::

    GET  /health
    POST /events                                -> 202 {event_id, seq}
    GET  /patients/{id}/recommendations?status=
    POST /recommendations/{id}/response
    GET  /patients/{id}/trace                   -> text/plain, one record per line

Status mapping: 400 malformed body, 404 unknown patient/recommendation,
409 gate violation or double response.  When a built dashboard is
available its static files are served at the root path.
"""
from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from ..platform import EventEnvelope
from .environment import (
    AlreadyRespondedError,
    Environment,
    GatewayError,
    RecommendationResponse,
    ResponseGateError,
    UnknownPatientError,
    UnknownRecommendationError,
)

logger = logging.getLogger(__name__)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


async def _json_body(request: Request) -> dict | None:
    try:
        body = await request.json()
    except Exception:
        return None
    return body if isinstance(body, dict) else None


def create_app(env: Environment, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="careflow gateway")

    @app.get("/health")
    def health():
        return {"status": "ok", "virtual_time": env.clock.now()}

    @app.post("/events")
    async def post_event(request: Request):
        body = await _json_body(request)
        if body is None:
            return _error(400, "body must be a JSON object")
        event_type = body.get("event_type")
        patient_id = body.get("patient_id")
        if not isinstance(event_type, str) or not event_type:
            return _error(400, "event_type is required")
        if not isinstance(patient_id, str) or not patient_id:
            return _error(400, "patient_id is required")
        payload = body.get("payload", {})
        if not isinstance(payload, dict):
            return _error(400, "payload must be an object")
        at = body.get("at")
        if at is not None and not isinstance(at, int):
            return _error(400, "at must be an integer virtual time")
        try:
            event_id, seq = env.post_event(
                EventEnvelope(
                    event_type=event_type,
                    patient_id=patient_id,
                    payload={k: str(v) for k, v in payload.items()},
                    at=at,
                )
            )
        except UnknownPatientError as exc:
            return _error(404, str(exc))
        return JSONResponse({"event_id": event_id, "seq": seq}, status_code=202)

    @app.get("/patients/{patient_id}/recommendations")
    def recommendations(patient_id: str, status: str | None = None):
        try:
            return env.list_recommendations(patient_id, status)
        except UnknownPatientError as exc:
            return _error(404, str(exc))

    @app.post("/recommendations/{communication_id}/response")
    async def respond(communication_id: str, request: Request):
        body = await _json_body(request)
        if body is None:
            return _error(400, "body must be a JSON object")
        verdict = body.get("verdict")
        responder = body.get("responder", "physician")
        if verdict not in ("accepted", "rejected"):
            return _error(400, "verdict must be accepted or rejected")
        if responder not in ("physician", "patient"):
            return _error(400, "responder must be physician or patient")
        chosen = body.get("chosen_options", [])
        if not isinstance(chosen, list) or not all(isinstance(c, str) for c in chosen):
            return _error(400, "chosen_options must be a list of codes")
        at = body.get("at")
        if at is not None and not isinstance(at, int):
            return _error(400, "at must be an integer virtual time")
        try:
            view = env.respond(
                RecommendationResponse(
                    communication_id=communication_id,
                    responder=responder,
                    verdict=verdict,
                    chosen_options=tuple(chosen),
                    at=at,
                )
            )
        except UnknownRecommendationError as exc:
            return _error(404, str(exc))
        except (ResponseGateError, AlreadyRespondedError) as exc:
            return _error(409, str(exc))
        except GatewayError as exc:
            return _error(400, str(exc))
        return view

    @app.get("/patients/{patient_id}/trace")
    def trace(patient_id: str):
        try:
            lines = env.trace_lines(patient_id)
        except UnknownPatientError as exc:
            return _error(404, str(exc))
        return PlainTextResponse("\n".join(lines) + ("\n" if lines else ""))

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app
