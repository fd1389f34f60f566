"""HTTP facade over the experiment pipeline.

Runs execute asynchronously in background threads; clients poll run status
and fetch artifacts when done. The registry deduplicates admissions by
run_id, so concurrent submissions of one config share a single execution.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import threading
from pathlib import Path
from typing import Optional, Union

from fastapi import Body, FastAPI, Query
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .errors import BiasProbeError, ConfigError, ScorerError
from .experiment import (
    CACHE_DIR_ENV,
    TOOL_VERSION,
    ExperimentConfig,
    compute_run_id,
    load_run,
    render_plot,
    run_experiment,
)
from .stats import fit as refit
from .templates import builtin_axis, builtin_lexicon

__all__ = ["SCHEMA_DIR", "RUN_STATES", "RunRegistry", "create_app", "serve"]

SCHEMA_DIR = Path(__file__).parent / "schemas"

RUN_STATES = ("queued", "scoring", "fitting", "done", "failed")

_TERMINAL = ("done", "failed")


def _err(status: int, message: str, retriable: Optional[bool] = None) -> JSONResponse:
    body: dict = {"error": message}
    if retriable is not None:
        body["retriable"] = retriable
    return JSONResponse(body, status_code=status)


def _inline_file(root: Path, lines, what: str) -> str:
    """Persist browser-supplied lines as a content-addressed input file.

    Identical content maps to one path, so resubmissions keep their run_id."""
    if (
        not isinstance(lines, list)
        or not lines
        or not all(isinstance(line, str) for line in lines)
    ):
        raise ConfigError(f"{what} must be a non-empty list of strings")
    text = "\n".join(lines) + "\n"
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
    directory = root / "_inputs"
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{what}-{digest}.txt"
    if not path.exists():
        path.write_text(text, encoding="utf-8")
    return str(path)


class RunRegistry:
    """Synchronized map of run_id to status, backed by the run directory.

    Completed runs found on disk are hydrated lazily, so the service can be
    restarted over an existing cache without losing its run index.
    """

    def __init__(self, out_dir: Union[str, Path] = "runs"):
        env = os.environ.get(CACHE_DIR_ENV)
        self.root = Path(env) if env else Path(out_dir)
        self._lock = threading.Lock()
        self._runs: dict[str, dict] = {}

    def _new_entry(self, run_id: str, state: str) -> dict:
        return {
            "run_id": run_id,
            "state": state,
            "probes_done": 0,
            "probes_total": 0,
            "error": None,
            "retriable": None,
        }

    def _hydrate_from_disk(self, run_id: str) -> Optional[dict]:
        manifest_path = self.root / run_id / "manifest.json"
        if not manifest_path.exists():
            return None
        try:
            data = json.loads(manifest_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        if not data.get("completed_at"):
            return None
        entry = self._new_entry(run_id, "done")
        entry["probes_done"] = entry["probes_total"] = int(data.get("probe_count", 0))
        return entry

    def submit(self, config: ExperimentConfig) -> tuple[str, bool]:
        """Admit a run; returns (run_id, created). Existing runs are reused,
        failed ones are relaunched (resuming from their checkpoint)."""
        config = dataclasses.replace(config, out_dir=str(self.root))
        run_id = compute_run_id(config)
        with self._lock:
            entry = self._runs.get(run_id)
            if entry is None:
                disk = self._hydrate_from_disk(run_id)
                if disk is not None:
                    self._runs[run_id] = disk
                    return run_id, False
            elif entry["state"] != "failed":
                return run_id, False
            fresh = self._new_entry(run_id, "queued")
            self._runs[run_id] = fresh
        worker = threading.Thread(
            target=self._execute, args=(run_id, config), daemon=True
        )
        worker.start()
        return run_id, True

    def _execute(self, run_id: str, config: ExperimentConfig) -> None:
        def progress(done: int, total: int) -> None:
            with self._lock:
                entry = self._runs[run_id]
                if entry["state"] in _TERMINAL:
                    return
                entry["probes_done"] = done
                entry["probes_total"] = total
                entry["state"] = "fitting" if total and done >= total else "scoring"

        try:
            run_experiment(config, progress=progress)
        except ScorerError as exc:
            self._fail(run_id, str(exc), retriable=exc.retriable)
        except BiasProbeError as exc:
            self._fail(run_id, str(exc), retriable=None)
        except Exception as exc:
            self._fail(run_id, f"internal error: {exc}", retriable=None)
        else:
            with self._lock:
                entry = self._runs[run_id]
                if entry["state"] not in _TERMINAL:
                    entry["state"] = "done"
                    entry["probes_done"] = entry["probes_total"]

    def _fail(self, run_id: str, message: str, retriable: Optional[bool]) -> None:
        with self._lock:
            entry = self._runs[run_id]
            if entry["state"] in _TERMINAL:
                return
            entry["state"] = "failed"
            entry["error"] = message
            entry["retriable"] = retriable

    def status(self, run_id: str) -> Optional[dict]:
        with self._lock:
            entry = self._runs.get(run_id)
            if entry is not None:
                return dict(entry)
            disk = self._hydrate_from_disk(run_id)
            if disk is not None:
                self._runs[run_id] = disk
                return dict(disk)
        return None

    def index(self) -> list[dict]:
        with self._lock:
            merged = {run_id: dict(entry) for run_id, entry in self._runs.items()}
        if self.root.is_dir():
            for manifest_path in sorted(self.root.glob("*/manifest.json")):
                run_id = manifest_path.parent.name
                if run_id in merged:
                    continue
                disk = self._hydrate_from_disk(run_id)
                if disk is not None:
                    merged[run_id] = disk
        return [merged[run_id] for run_id in sorted(merged)]

    def run_dir(self, run_id: str) -> Path:
        return self.root / run_id


def _status_body(entry: dict) -> dict:
    return {
        "run_id": entry["run_id"],
        "state": entry["state"],
        "probes_done": entry["probes_done"],
        "probes_total": entry["probes_total"],
        "error": entry["error"],
        "retriable": entry["retriable"],
    }


def create_app(
    out_dir: Union[str, Path] = "runs",
    static_dir: Optional[Union[str, Path]] = None,
) -> FastAPI:
    """Build the API application over a run cache directory."""
    registry = RunRegistry(out_dir)
    app = FastAPI(title="biasprobe", version=TOOL_VERSION, docs_url=None, redoc_url=None)
    app.state.registry = registry

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request, exc):
        return _err(400, f"invalid request: {exc.errors()}")

    @app.get("/api/lexicon")
    def get_lexicon():
        lexicon = builtin_lexicon()
        return {
            "pairs": [list(pair) for pair in lexicon.pairs],
            "male": list(lexicon.male_column),
            "female": list(lexicon.female_column),
        }

    @app.get("/api/axes/{category}")
    def get_axis(category: str):
        try:
            axis = builtin_axis(category)
        except BiasProbeError as exc:
            return _err(404, str(exc))
        return {"category": axis.category, "values": list(axis.values)}

    @app.post("/api/runs")
    def post_run(config: dict = Body(...)):
        # Web clients cannot reference server files, so they may send
        # axis_values / template_patterns inline instead of the path fields.
        try:
            data = dict(config)
            axis_values = data.pop("axis_values", None)
            template_patterns = data.pop("template_patterns", None)
            if axis_values is not None:
                if data.get("category") is not None or data.get("axis_file") is not None:
                    raise ConfigError("axis_values conflicts with category/axis_file")
                data["axis_file"] = _inline_file(registry.root, axis_values, "axis")
            if template_patterns is not None:
                if data.get("template_file") is not None:
                    raise ConfigError("template_patterns conflicts with template_file")
                data["template_file"] = _inline_file(
                    registry.root, template_patterns, "templates"
                )
            parsed = ExperimentConfig.from_dict(data)
            run_id, created = registry.submit(parsed)
        except ScorerError as exc:
            return _err(502, str(exc), retriable=exc.retriable)
        except BiasProbeError as exc:
            return _err(400, str(exc))
        return JSONResponse(
            {"run_id": run_id, "created": created}, status_code=202 if created else 200
        )

    @app.get("/api/runs")
    def list_runs():
        return {"runs": [_status_body(entry) for entry in registry.index()]}

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str):
        entry = registry.status(run_id)
        if entry is None:
            return _err(404, f"unknown run {run_id}")
        return _status_body(entry)

    def _completed_entry(run_id: str):
        """Status precondition shared by every artifact route."""
        entry = registry.status(run_id)
        if entry is None:
            return None, _err(404, f"unknown run {run_id}")
        if entry["state"] == "failed":
            if entry["retriable"] is not None:
                return None, _err(502, entry["error"], retriable=entry["retriable"])
            return None, _err(500, entry["error"] or "run failed")
        if entry["state"] != "done":
            return None, _err(409, f"run {run_id} is not complete (state {entry['state']})")
        return entry, None

    @app.get("/api/runs/{run_id}/series")
    def get_series(run_id: str):
        _, error = _completed_entry(run_id)
        if error is not None:
            return error
        path = registry.run_dir(run_id) / "series.csv"
        return Response(path.read_text(encoding="utf-8"), media_type="text/csv")

    def _fit_dict(run_id: str, degree: Optional[int]):
        run_dir = registry.run_dir(run_id)
        stored = json.loads((run_dir / "fit.json").read_text(encoding="utf-8"))
        if degree is None or degree == stored["degree"]:
            return stored, None
        if not 1 <= degree <= 5:
            return None, _err(400, "degree must lie in [1, 5]")
        result = load_run(run_dir)
        try:
            refitted = refit(list(result.series), degree)
        except BiasProbeError as exc:
            return None, _err(400, str(exc))
        return refitted.to_dict(), None

    @app.get("/api/runs/{run_id}/fit")
    def get_fit(run_id: str, degree: Optional[int] = Query(default=None)):
        _, error = _completed_entry(run_id)
        if error is not None:
            return error
        payload, error = _fit_dict(run_id, degree)
        if error is not None:
            return error
        if payload["pearson_female"] is None and payload["pearson_male"] is None:
            return _err(409, "degenerate statistics: both gender series are constant")
        return payload

    @app.get("/api/runs/{run_id}/plot.svg")
    def get_plot(run_id: str, degree: Optional[int] = Query(default=None)):
        _, error = _completed_entry(run_id)
        if error is not None:
            return error
        run_dir = registry.run_dir(run_id)
        stored = json.loads((run_dir / "fit.json").read_text(encoding="utf-8"))
        if stored["pearson_female"] is None and stored["pearson_male"] is None:
            return _err(409, "degenerate statistics: both gender series are constant")
        if degree is None or degree == stored["degree"]:
            return Response(
                (run_dir / "plot.svg").read_text(encoding="utf-8"),
                media_type="image/svg+xml",
            )
        result = load_run(run_dir)
        try:
            svg = render_plot(result, degree_override=degree)
        except BiasProbeError as exc:
            return _err(400, str(exc))
        return Response(svg, media_type="image/svg+xml")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    else:

        @app.get("/")
        def root():
            return {"service": "biasprobe", "version": TOOL_VERSION}

    return app


def serve(
    port: int = 8080,
    host: str = "127.0.0.1",
    out_dir: Union[str, Path] = "runs",
    static_dir: Optional[Union[str, Path]] = None,
) -> None:
    """Run the API under uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(out_dir, static_dir), host=host, port=port, log_level="warning")
