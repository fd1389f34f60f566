"""Run orchestration: simulate, score, aggregate, fit, persist, plot.

A run is identified by a content hash of its resolved configuration, so
identical configs share one cached result directory. Scored masses are
checkpointed every 50 probes, which makes interrupted runs resumable and
reruns idempotent.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

from .errors import ConfigError, InputError, ScorerError
from .scm import ScmParams, apply_selection, sample_population
from .scorer import (
    GenderMass,
    MockScorer,
    RemoteScorer,
    gender_mass,
    score,
    train_synthetic_scorer,
)
from .stats import (
    FitResult,
    SeriesPoint,
    aggregate,
    fit,
    read_series_csv,
    write_series_csv,
)
from .svgplot import render_series_plot
from .templates import (
    AxisSpec,
    GenderLexicon,
    ProbeText,
    TemplateSpec,
    builtin_axis,
    builtin_lexicon,
    builtin_templates,
    load_axis,
    load_lexicon,
    load_templates,
    render_probes,
)

__all__ = [
    "TOOL_VERSION",
    "CACHE_DIR_ENV",
    "CHECKPOINT_EVERY",
    "ExperimentConfig",
    "RunManifest",
    "RunResult",
    "run_experiment",
    "render_plot",
    "load_run",
]

TOOL_VERSION = "0.1.0"

CACHE_DIR_ENV = "BIASPROBE_CACHE_DIR"

#: Scored probes between checkpoint flushes.
CHECKPOINT_EVERY = 50

MASSES_HEADER = "probe_index,w_index,template_id,verb,life_stage,female,male"

_SCORER_TYPES = ("synthetic", "remote", "mock")
_CATEGORIES = ("date", "place", "subreddit")

ProgressFn = Callable[[int, int], None]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one run.

    Exactly one scorer is active. ``category`` selects a built-in axis and
    its templates; ``axis_file``/``template_file`` supply custom ones
    (custom axes without a template file use the two sentence patterns of
    the date/place categories). ``k=None`` lets each backend pick its own
    candidate depth: full support for the synthetic scorer, top 5 for
    remote and mock.
    """

    scorer: str
    category: Optional[str] = None
    axis_file: Optional[str] = None
    template_file: Optional[str] = None
    lexicon_file: Optional[str] = None
    k: Optional[int] = None
    fit_degree: int = 1
    seed: int = 7
    out_dir: str = "runs"
    scm: Optional[Mapping] = None
    corpus_n: int = 200000
    smoothing: float = 1.0
    endpoint: Optional[str] = None
    mask_token: Optional[str] = None
    remote_k: Optional[int] = None
    table_file: Optional[str] = None

    def __post_init__(self):
        if self.scorer not in _SCORER_TYPES:
            raise ConfigError(f"scorer must be one of {_SCORER_TYPES}, got {self.scorer!r}")
        if self.category is not None and self.category not in _CATEGORIES:
            raise ConfigError(f"category must be one of {_CATEGORIES}, got {self.category!r}")
        if (self.category is None) == (self.axis_file is None):
            raise ConfigError("exactly one of category or axis_file is required")
        if self.k is not None and self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 1 <= self.fit_degree <= 5:
            raise ConfigError("fit_degree must lie in [1, 5]")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if self.scorer == "remote" and not self.endpoint:
            raise ConfigError("remote scorer needs an endpoint URL")
        if self.scorer == "mock" and not self.table_file:
            raise ConfigError("mock scorer needs a table file")
        if self.scorer == "synthetic":
            if self.corpus_n < 1:
                raise ConfigError("corpus_n must be >= 1")
            if self.smoothing <= 0:
                raise ConfigError("smoothing must be positive")
            if self.scm is not None and "rng_seed" in self.scm:
                raise ConfigError("set the run seed instead of scm.rng_seed")
        if self.remote_k is not None and self.remote_k < 1:
            raise ConfigError("remote k must be >= 1")

    def to_dict(self) -> dict:
        if self.scorer == "synthetic":
            scorer: dict = {
                "type": "synthetic",
                "scm": dict(self.scm) if self.scm else {},
                "corpus_n": self.corpus_n,
                "smoothing": self.smoothing,
            }
        elif self.scorer == "remote":
            scorer = {
                "type": "remote",
                "endpoint": self.endpoint,
                "mask_token": self.mask_token,
                "k": self.remote_k,
            }
        else:
            scorer = {"type": "mock", "table": self.table_file}
        return {
            "scorer": scorer,
            "category": self.category,
            "axis_file": self.axis_file,
            "template_file": self.template_file,
            "lexicon_file": self.lexicon_file,
            "k": self.k,
            "fit_degree": self.fit_degree,
            "seed": self.seed,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("config must be a JSON object")
        known = {
            "scorer",
            "category",
            "axis_file",
            "template_file",
            "lexicon_file",
            "k",
            "fit_degree",
            "seed",
            "out_dir",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        scorer = data.get("scorer")
        if not isinstance(scorer, Mapping) or "type" not in scorer:
            raise ConfigError('config needs a scorer object with a "type" field')
        kind = scorer["type"]
        kwargs: dict = {
            "scorer": kind,
            "category": data.get("category"),
            "axis_file": data.get("axis_file"),
            "template_file": data.get("template_file"),
            "lexicon_file": data.get("lexicon_file"),
            "k": data.get("k"),
            "fit_degree": data.get("fit_degree", 1),
            "seed": data.get("seed", 7),
            "out_dir": data.get("out_dir", "runs"),
        }
        extras = set(scorer) - {"type"}
        if kind == "synthetic":
            bad = extras - {"scm", "corpus_n", "smoothing"}
            if bad:
                raise ConfigError(f"unknown synthetic scorer fields: {sorted(bad)}")
            kwargs.update(
                scm=scorer.get("scm") or None,
                corpus_n=scorer.get("corpus_n", 200000),
                smoothing=scorer.get("smoothing", 1.0),
            )
        elif kind == "remote":
            bad = extras - {"endpoint", "mask_token", "k"}
            if bad:
                raise ConfigError(f"unknown remote scorer fields: {sorted(bad)}")
            kwargs.update(
                endpoint=scorer.get("endpoint"),
                mask_token=scorer.get("mask_token"),
                remote_k=scorer.get("k"),
            )
        elif kind == "mock":
            bad = extras - {"table"}
            if bad:
                raise ConfigError(f"unknown mock scorer fields: {sorted(bad)}")
            kwargs.update(table_file=scorer.get("table"))
        else:
            raise ConfigError(f"unknown scorer type {kind!r}")
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class _Resolved:
    """Config with all file and category references loaded into memory."""

    config: ExperimentConfig
    axis: AxisSpec
    templates: tuple[TemplateSpec, ...]
    lexicon: GenderLexicon
    scm_params: Optional[ScmParams]
    scorer_descriptor: dict
    axis_sha256: str
    templates_sha256: str
    lexicon_sha256: str

    @property
    def run_id(self) -> str:
        payload = {
            "scorer": self.scorer_descriptor,
            "axis": {"category": self.axis.category, "sha256": self.axis_sha256},
            "templates": {"sha256": self.templates_sha256},
            "lexicon": {"sha256": self.lexicon_sha256},
            "k": self.config.k,
            "fit_degree": self.config.fit_degree,
            "seed": self.config.seed,
        }
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return _sha256_text(canon)[:16]

    @property
    def label(self) -> str:
        return f"{self.config.scorer}/{self.axis.category}"


def _resolve(config: ExperimentConfig) -> _Resolved:
    if config.category is not None:
        axis = builtin_axis(config.category)
    else:
        axis = load_axis(config.axis_file, category="custom")
    if config.template_file is not None:
        templates = tuple(load_templates(config.template_file))
    elif config.category is not None:
        templates = tuple(builtin_templates(config.category))
    else:
        templates = tuple(builtin_templates("date"))
    lexicon = load_lexicon(config.lexicon_file) if config.lexicon_file else builtin_lexicon()

    scm_params = None
    if config.scorer == "synthetic":
        overrides = dict(config.scm or {})
        if "axis_levels" in overrides and overrides["axis_levels"] != len(axis):
            raise ConfigError(
                f"scm.axis_levels={overrides['axis_levels']} does not match the "
                f"{len(axis)}-value axis"
            )
        overrides["axis_levels"] = len(axis)
        overrides["rng_seed"] = config.seed
        scm_params = ScmParams.from_dict(overrides)
        descriptor = {
            "type": "synthetic",
            "scm": scm_params.to_dict(),
            "corpus_n": config.corpus_n,
            "smoothing": config.smoothing,
        }
    elif config.scorer == "remote":
        descriptor = {
            "type": "remote",
            "endpoint": config.endpoint,
            "mask_token": config.mask_token,
            "k": config.remote_k,
        }
    else:
        try:
            table_bytes = Path(config.table_file).read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read mock table {config.table_file}: {exc}") from exc
        descriptor = {
            "type": "mock",
            "table_sha256": hashlib.sha256(table_bytes).hexdigest(),
        }

    return _Resolved(
        config=config,
        axis=axis,
        templates=templates,
        lexicon=lexicon,
        scm_params=scm_params,
        scorer_descriptor=descriptor,
        axis_sha256=_sha256_text("\n".join(axis.values)),
        templates_sha256=_sha256_text("\n".join(t.pattern for t in templates)),
        lexicon_sha256=_sha256_text("\n".join(f"{m},{f}" for m, f in lexicon.pairs)),
    )


@dataclass(frozen=True)
class RunManifest:
    """Provenance record persisted alongside each run's artifacts."""

    run_id: str
    created_at: str
    completed_at: Optional[str]
    probe_count: int
    scorer: dict
    label: str
    category: str
    k: Optional[int]
    fit_degree: int
    seed: int
    axis_sha256: str
    templates_sha256: str
    lexicon_sha256: str
    tool_version: str = TOOL_VERSION

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "created_at": self.created_at,
            "completed_at": self.completed_at,
            "probe_count": self.probe_count,
            "scorer": self.scorer,
            "label": self.label,
            "category": self.category,
            "k": self.k,
            "fit_degree": self.fit_degree,
            "seed": self.seed,
            "axis_sha256": self.axis_sha256,
            "templates_sha256": self.templates_sha256,
            "lexicon_sha256": self.lexicon_sha256,
            "tool_version": self.tool_version,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunManifest":
        try:
            return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})
        except TypeError as exc:
            raise InputError(f"malformed manifest: {exc}") from exc


@dataclass(frozen=True)
class RunResult:
    """Everything a completed run produced."""

    manifest: RunManifest
    series: tuple[SeriesPoint, ...]
    fit: FitResult
    masses: Optional[tuple[tuple[int, ProbeText, GenderMass], ...]]
    run_dir: Path

    @property
    def plot_path(self) -> Path:
        return self.run_dir / "plot.svg"


def cache_root(config: ExperimentConfig) -> Path:
    """Run cache root; the environment override wins over the config."""
    env = os.environ.get(CACHE_DIR_ENV)
    return Path(env) if env else Path(config.out_dir)


def compute_run_id(config: ExperimentConfig) -> str:
    """Deterministic run identifier for a config (loads referenced files)."""
    return _resolve(config).run_id


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _build_backend(resolved: _Resolved):
    config = resolved.config
    if config.scorer == "synthetic":
        samples = sample_population(resolved.scm_params, config.corpus_n, resolved.lexicon)
        selected = apply_selection(samples)
        if not selected:
            raise ConfigError("selection removed every simulated individual")
        return train_synthetic_scorer(
            selected, resolved.lexicon, config.smoothing, axis=resolved.axis
        )
    if config.scorer == "remote":
        return RemoteScorer(config.endpoint, mask_token=config.mask_token)
    return MockScorer.from_json(config.table_file)


def _load_checkpoint(path: Path, run_id: str) -> dict[int, tuple[float, float]]:
    if not path.exists():
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return {}
    if data.get("run_id") != run_id:
        return {}
    return {int(i): (float(f), float(m)) for i, f, m in data.get("rows", [])}


def _save_checkpoint(
    path: Path, run_id: str, total: int, rows: Mapping[int, tuple[float, float]]
) -> None:
    payload = {
        "run_id": run_id,
        "total": total,
        "rows": [[i, f, m] for i, (f, m) in sorted(rows.items())],
    }
    _write_atomic(path, json.dumps(payload))


def _score_probe(backend, probe: ProbeText, k: Optional[int], lexicon) -> tuple[float, float]:
    pred = score(backend, probe, k=k)
    mass = gender_mass(pred, lexicon, k=max(1, len(pred.entries)))
    return mass.female, mass.male


def _score_all(
    resolved: _Resolved,
    backend,
    probes: Sequence[ProbeText],
    run_dir: Path,
    run_id: str,
    progress: Optional[ProgressFn],
) -> dict[int, tuple[float, float]]:
    config = resolved.config
    checkpoint = run_dir / "checkpoint.json"
    rows = _load_checkpoint(checkpoint, run_id)
    total = len(probes)
    if progress:
        progress(len(rows), total)
    pending = [i for i in range(total) if i not in rows]
    if not pending:
        return rows

    k = config.k if config.k is not None else config.remote_k
    lexicon = resolved.lexicon
    lock = threading.Lock()
    since_flush = 0

    def record(index: int, masses: tuple[float, float]) -> None:
        nonlocal since_flush
        with lock:
            rows[index] = masses
            since_flush += 1
            if since_flush >= CHECKPOINT_EVERY:
                _save_checkpoint(checkpoint, run_id, total, rows)
                since_flush = 0
            if progress:
                progress(len(rows), total)

    try:
        if config.scorer == "remote":
            # Fan out; the backend's in-flight semaphore is the rate limit.
            with ThreadPoolExecutor(max_workers=4) as pool:
                futures = {
                    pool.submit(_score_probe, backend, probes[i], k, lexicon): i
                    for i in pending
                }
                try:
                    for future in as_completed(futures):
                        index = futures[future]
                        try:
                            record(index, future.result())
                        except ScorerError as exc:
                            raise ScorerError(
                                f"probe {index}: {exc}", retriable=exc.retriable
                            ) from exc
                except BaseException:
                    for future in futures:
                        future.cancel()
                    raise
        else:
            for index in pending:
                try:
                    record(index, _score_probe(backend, probes[index], k, lexicon))
                except ScorerError as exc:
                    raise ScorerError(
                        f"probe {index}: {exc}", retriable=exc.retriable
                    ) from exc
    finally:
        # Keep whatever finished so a rerun only scores the remainder.
        if len(rows) < total:
            _save_checkpoint(checkpoint, run_id, total, rows)
    return rows


def _masses_csv(probes: Sequence[ProbeText], rows: Mapping[int, tuple[float, float]]) -> str:
    lines = [MASSES_HEADER]
    for index in sorted(rows):
        probe = probes[index]
        female, male = rows[index]
        lines.append(
            ",".join(
                [
                    str(index),
                    str(probe.w_index),
                    str(probe.template_id),
                    probe.verb or "",
                    probe.life_stage or "",
                    repr(female),
                    repr(male),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def load_run(run_dir: Union[str, Path]) -> RunResult:
    """Rehydrate a completed run from its directory."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise InputError(f"{run_dir} has no manifest")
    manifest = RunManifest.from_dict(json.loads(manifest_path.read_text(encoding="utf-8")))
    if manifest.completed_at is None:
        raise InputError(f"run {manifest.run_id} never completed")
    series = tuple(read_series_csv(run_dir / "series.csv"))
    fit_result = FitResult.from_dict(
        json.loads((run_dir / "fit.json").read_text(encoding="utf-8"))
    )
    return RunResult(
        manifest=manifest, series=series, fit=fit_result, masses=None, run_dir=run_dir
    )


def run_experiment(
    config: ExperimentConfig, progress: Optional[ProgressFn] = None
) -> RunResult:
    """Execute the full pipeline for ``config``, reusing any cached result.

    ``progress`` is called as progress(probes_done, probes_total) whenever
    the scored count changes. Scorer failures carry the probe index and
    leave a checkpoint behind, so rerunning the same config resumes instead
    of starting over.
    """
    resolved = _resolve(config)
    run_id = resolved.run_id
    run_dir = cache_root(config) / run_id

    if (run_dir / "manifest.json").exists():
        try:
            cached = load_run(run_dir)
        except InputError:
            cached = None
        if cached is not None:
            if progress:
                progress(cached.manifest.probe_count, cached.manifest.probe_count)
            return cached

    probes = render_probes(list(resolved.templates), resolved.axis)
    run_dir.mkdir(parents=True, exist_ok=True)
    created_at = _now()

    backend = _build_backend(resolved)
    rows = _score_all(resolved, backend, probes, run_dir, run_id, progress)

    ordered = [
        (index, probes[index], GenderMass(female=f, male=m))
        for index, (f, m) in sorted(rows.items())
    ]
    series = aggregate([(probe, mass) for _, probe, mass in ordered])
    if len(series) != len(resolved.axis):
        raise InputError(
            f"scored series covers {len(series)} of {len(resolved.axis)} axis values"
        )
    fit_result = fit(series, config.fit_degree)

    _write_atomic(run_dir / "masses.csv", _masses_csv(probes, rows))
    write_series_csv(series, run_dir / "series.csv")
    _write_atomic(
        run_dir / "fit.json", json.dumps(fit_result.to_dict(), indent=2) + "\n"
    )

    manifest = RunManifest(
        run_id=run_id,
        created_at=created_at,
        completed_at=_now(),
        probe_count=len(probes),
        scorer=resolved.scorer_descriptor,
        label=resolved.label,
        category=resolved.axis.category,
        k=config.k,
        fit_degree=config.fit_degree,
        seed=config.seed,
        axis_sha256=resolved.axis_sha256,
        templates_sha256=resolved.templates_sha256,
        lexicon_sha256=resolved.lexicon_sha256,
    )
    result = RunResult(
        manifest=manifest,
        series=tuple(series),
        fit=fit_result,
        masses=tuple(ordered),
        run_dir=run_dir,
    )
    _write_atomic(run_dir / "plot.svg", render_plot(result))
    _write_atomic(
        run_dir / "manifest.json", json.dumps(manifest.to_dict(), indent=2) + "\n"
    )
    checkpoint = run_dir / "checkpoint.json"
    if checkpoint.exists():
        checkpoint.unlink()
    return result


def render_plot(result: RunResult, degree_override: Optional[int] = None) -> str:
    """SVG for a run, optionally refit at another degree without re-scoring."""
    fit_result = result.fit
    if degree_override is not None and degree_override != result.fit.degree:
        if not 1 <= degree_override <= 5:
            raise InputError("degree must lie in [1, 5]")
        fit_result = fit(list(result.series), degree_override)
    title = f"{result.manifest.label} (degree {fit_result.degree})"
    return render_series_plot(list(result.series), fit_result, title=title)
