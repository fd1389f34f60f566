"""Masked-token scoring backends and gendered-mass aggregation.

A scorer answers one question: given a probe with a masked slot, which tokens
fill it and with what probability. Three interchangeable backends are
provided: a synthetic scorer trained on simulator output, a remote fill-mask
HTTP endpoint, and a fixed-table mock for tests. `gender_mass` then folds a
prediction into summed female and male probability mass.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import requests

from .errors import (
    ConfigError,
    InputError,
    ProtocolError,
    ScorerError,
    UnknownAxisValueError,
)
from .templates import MASK, AxisSpec, GenderLexicon, ProbeText

__all__ = [
    "RESIDUAL_TOKEN",
    "DEFAULT_TOP_K",
    "TokenScore",
    "MaskPrediction",
    "GenderMass",
    "SyntheticScorerModel",
    "MockScorer",
    "RemoteScorer",
    "score",
    "gender_mass",
    "train_synthetic_scorer",
    "remote_score",
]

#: Catch-all token the synthetic backend appends so its support covers the
#: whole probability space even when the lexicon does not.
RESIDUAL_TOKEN = "<rest>"

#: Conventional fill-mask truncation depth.
DEFAULT_TOP_K = 5

API_TOKEN_ENV = "BIASPROBE_API_TOKEN"


@dataclass(frozen=True)
class TokenScore:
    """One candidate token with its probability."""

    token: str
    prob: float

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise InputError(f"probability {self.prob!r} for {self.token!r} outside [0, 1]")


@dataclass(frozen=True)
class MaskPrediction:
    """Top candidates for a masked slot, sorted by descending probability.

    ``k_available`` records how many candidates the backend had before any
    client-side truncation.
    """

    entries: tuple[TokenScore, ...]
    k_available: int

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        probs = [e.prob for e in entries]
        if any(p1 < p2 for p1, p2 in zip(probs, probs[1:])):
            raise InputError("prediction entries must be sorted by descending probability")
        if sum(probs) > 1.0 + 1e-6:
            raise InputError("prediction probabilities sum to more than 1")
        if self.k_available < len(entries):
            raise InputError("k_available cannot be smaller than the entry count")


@dataclass(frozen=True)
class GenderMass:
    """Summed probability mass on female-column and male-column tokens."""

    female: float
    male: float

    def __post_init__(self):
        if self.female < 0 or self.male < 0:
            raise InputError("gender masses must be non-negative")
        if self.female + self.male > 1.0 + 1e-6:
            raise InputError("gender masses sum to more than 1")


def _sorted_entries(entries: Sequence[TokenScore]) -> tuple[TokenScore, ...]:
    # Stable sort: ties keep the backend's (or vocabulary's) order.
    return tuple(sorted(entries, key=lambda e: -e.prob))


def score(backend, probe: ProbeText, k: Optional[int] = None) -> MaskPrediction:
    """Ask ``backend`` for its top-k candidates at the probe's masked slot.

    ``k=None`` leaves the depth to the backend's own default (full support
    for the synthetic scorer, 5 for mock and remote).
    """
    if k is not None and k < 1:
        raise InputError("k must be >= 1")
    return backend.score(probe, k=k)


def gender_mass(pred: MaskPrediction, lexicon: GenderLexicon, k: int = DEFAULT_TOP_K) -> GenderMass:
    """Sum female- and male-column probability over the first min(k, n) entries.

    Matching is case-insensitive and whole-token; anything outside the
    lexicon contributes nothing. Worked examples with the built-in lexicon:

    - [she 0.4, he 0.3, it 0.1, they 0.1, was 0.1], k=5 -> female 0.4, male 0.3
    - [it 0.5, they 0.3, a 0.2], k=5 -> female 0.0, male 0.0
    - [the 0.45, she 0.2, her 0.2, he 0.1, woman 0.05], k=5 -> female 0.45, male 0.1
    - [she 0.3, he 0.25, her 0.2, him 0.15, his 0.1], k=3 -> female 0.5, male 0.25
      (truncation to the top three drops him and his)
    """
    if k < 1:
        raise InputError("k must be >= 1")
    female = 0.0
    male = 0.0
    for entry in pred.entries[:k]:
        gender = lexicon.gender_of(entry.token)
        if gender == "female":
            female += entry.prob
        elif gender == "male":
            male += entry.prob
    return GenderMass(female=female, male=male)


@dataclass(frozen=True)
class SyntheticScorerModel:
    """Count model over lexicon words, conditioned on axis position.

    ``counts`` holds one row per (axis index, vocabulary word) including
    zeros, so the vocabulary survives serialization. Scoring a probe looks
    its ``w_value`` up in ``axis`` and returns the additively smoothed word
    distribution for that position, plus a residual token absorbing whatever
    mass the lexicon does not.
    """

    axis: tuple[str, ...]
    alpha: float
    counts: tuple[tuple[int, str, int], ...]

    def __post_init__(self):
        axis = tuple(str(v) for v in self.axis)
        counts = tuple((int(w), str(word), int(c)) for w, word, c in self.counts)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "counts", counts)
        if not axis:
            raise ConfigError("model axis is empty")
        if self.alpha <= 0:
            raise ConfigError("smoothing must be positive")
        if not counts:
            raise ConfigError("model has no count rows")
        for w, word, c in counts:
            if not 0 <= w < len(axis):
                raise ConfigError(f"count row references axis index {w} outside the axis")
            if c < 0:
                raise ConfigError(f"negative count for ({w}, {word!r})")

    @property
    def axis_levels(self) -> int:
        return len(self.axis)

    @cached_property
    def vocabulary(self) -> tuple[str, ...]:
        seen = []
        for _, word, _ in self.counts:
            if word not in seen:
                seen.append(word)
        return tuple(seen)

    @cached_property
    def _distributions(self) -> dict[int, tuple[TokenScore, ...]]:
        vocab = self.vocabulary
        grid = {w: dict.fromkeys(vocab, 0) for w in range(len(self.axis))}
        for w, word, c in self.counts:
            grid[w][word] += c
        out = {}
        for w, row in grid.items():
            total = sum(row.values()) + self.alpha * len(vocab)
            entries = [TokenScore(word, (row[word] + self.alpha) / total) for word in vocab]
            residual = max(0.0, 1.0 - sum(e.prob for e in entries))
            entries.append(TokenScore(RESIDUAL_TOKEN, residual))
            out[w] = _sorted_entries(entries)
        return out

    def score(self, probe: ProbeText, k: Optional[int] = None) -> MaskPrediction:
        try:
            w_index = self.axis.index(probe.w_value)
        except ValueError:
            raise UnknownAxisValueError(
                f"probe value {probe.w_value!r} is not on the trained axis"
            ) from None
        dist = self._distributions[w_index]
        k_eff = len(dist) if k is None else min(k, len(dist))
        return MaskPrediction(entries=dist[:k_eff], k_available=len(dist))

    def to_dict(self) -> dict:
        return {
            "axis": list(self.axis),
            "alpha": self.alpha,
            "counts": [[w, word, c] for w, word, c in self.counts],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SyntheticScorerModel":
        try:
            return cls(
                axis=tuple(data["axis"]),
                alpha=float(data["alpha"]),
                counts=tuple((w, word, c) for w, word, c in data["counts"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed synthetic scorer model: {exc}") from exc

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SyntheticScorerModel":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read scorer model {path}: {exc}") from exc
        return cls.from_dict(data)


def train_synthetic_scorer(
    selected_samples: Sequence,
    lexicon: GenderLexicon,
    smoothing: float = 1.0,
    *,
    axis: Union[AxisSpec, Sequence[str]],
) -> SyntheticScorerModel:
    """Tally y-words per axis position over the selected individuals.

    ``axis`` supplies the display values so the model can later map probe
    texts back to positions; sample ``w`` indices must fit inside it.
    """
    if not selected_samples:
        raise InputError("no training samples")
    if smoothing <= 0:
        raise ConfigError("smoothing must be positive")
    values = axis.values if isinstance(axis, AxisSpec) else tuple(str(v) for v in axis)
    if not values:
        raise InputError("axis is empty")
    vocab = lexicon.vocabulary
    vocab_set = set(vocab)
    grid = {w: dict.fromkeys(vocab, 0) for w in range(len(values))}
    for sample in selected_samples:
        if sample.s != 1:
            continue
        if not 0 <= sample.w < len(values):
            raise InputError(f"sample w={sample.w} outside the {len(values)}-level axis")
        if sample.y_word not in vocab_set:
            raise InputError(f"y-word {sample.y_word!r} is not in the lexicon")
        grid[sample.w][sample.y_word] += 1
    counts = tuple(
        (w, word, grid[w][word]) for w in range(len(values)) for word in vocab
    )
    return SyntheticScorerModel(axis=values, alpha=float(smoothing), counts=counts)


class MockScorer:
    """Fixed-table backend for tests.

    A single table (token to probability) answers every probe; a per-text
    mapping keyed by exact probe text, with optional ``"*"`` fallback,
    answers probes individually.
    """

    def __init__(self, table: Mapping):
        if not table:
            raise ConfigError("mock table is empty")
        first = next(iter(table.values()))
        if isinstance(first, Mapping):
            self._by_text = {str(k): dict(v) for k, v in table.items()}
            self._default = self._by_text.pop("*", None)
        else:
            self._by_text = {}
            self._default = dict(table)
        for tbl in list(self._by_text.values()) + ([self._default] if self._default else []):
            for token, prob in tbl.items():
                if not isinstance(prob, (int, float)) or not 0 <= prob <= 1:
                    raise ConfigError(f"mock probability for {token!r} outside [0, 1]")

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "MockScorer":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read mock table {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: mock table must be a JSON object")
        return cls(data)

    def _table_for(self, text: str) -> Mapping:
        table = self._by_text.get(text, self._default)
        if table is None:
            raise ScorerError(f"mock has no table for probe {text!r}", retriable=False)
        return table

    def score(self, probe: ProbeText, k: Optional[int] = None) -> MaskPrediction:
        table = self._table_for(probe.text)
        entries = _sorted_entries([TokenScore(t, float(p)) for t, p in table.items()])
        k_eff = DEFAULT_TOP_K if k is None else k
        return MaskPrediction(entries=entries[:k_eff], k_available=len(entries))


class RemoteScorer:
    """Client for a fill-mask HTTP endpoint.

    Sends ``{"inputs": <text>}`` and expects a JSON array of objects with
    ``token_str`` and ``score`` fields. Retries transient failures (429,
    5xx, timeouts, connection errors) up to ``max_attempts`` with exponential
    backoff; anything else fails fast. At most ``max_in_flight`` requests are
    outstanding at a time, so instances are safe to share across threads.
    """

    def __init__(
        self,
        endpoint: str,
        mask_token: Optional[str] = None,
        *,
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        max_in_flight: int = 4,
        api_token: Optional[str] = None,
        session: Optional[requests.Session] = None,
    ):
        if not endpoint:
            raise ConfigError("remote endpoint URL is required")
        if max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        if max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        self.endpoint = endpoint
        self.mask_token = mask_token
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._slot = threading.Semaphore(max_in_flight)
        self._session = session or requests.Session()
        self._api_token = api_token if api_token is not None else os.environ.get(API_TOKEN_ENV)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self._api_token:
            headers["Authorization"] = f"Bearer {self._api_token}"
        return headers

    def _request_once(self, text: str) -> requests.Response:
        with self._slot:
            return self._session.post(
                self.endpoint,
                json={"inputs": text},
                headers=self._headers(),
                timeout=self.timeout,
            )

    def _parse(self, response: requests.Response, k: Optional[int]) -> MaskPrediction:
        try:
            payload = response.json()
        except ValueError as exc:
            raise ProtocolError(f"endpoint returned non-JSON body: {exc}") from exc
        if not isinstance(payload, list):
            raise ProtocolError("endpoint response is not a JSON array")
        entries = []
        for item in payload:
            if not isinstance(item, dict) or "token_str" not in item or "score" not in item:
                raise ProtocolError(f"malformed candidate object: {item!r}")
            token = item["token_str"]
            prob = item["score"]
            if not isinstance(token, str) or not isinstance(prob, (int, float)):
                raise ProtocolError(f"malformed candidate fields: {item!r}")
            try:
                entries.append(TokenScore(token, float(prob)))
            except InputError as exc:
                raise ProtocolError(str(exc)) from exc
        ordered = _sorted_entries(entries)
        k_eff = DEFAULT_TOP_K if k is None else k
        try:
            return MaskPrediction(entries=ordered[:k_eff], k_available=len(ordered))
        except InputError as exc:
            raise ProtocolError(str(exc)) from exc

    def score(self, probe: ProbeText, k: Optional[int] = None) -> MaskPrediction:
        text = probe.text
        if self.mask_token and self.mask_token != MASK:
            text = text.replace(MASK, self.mask_token)
        last_error: Optional[ScorerError] = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self._request_once(text)
            except requests.Timeout as exc:
                last_error = ScorerError(f"request timed out: {exc}", retriable=True)
            except requests.RequestException as exc:
                last_error = ScorerError(f"request failed: {exc}", retriable=True)
            else:
                status = response.status_code
                if 200 <= status < 300:
                    return self._parse(response, k)
                body = response.text[:200]
                if status == 429 or 500 <= status < 600:
                    last_error = ScorerError(
                        f"endpoint returned {status}: {body}", retriable=True
                    )
                else:
                    raise ScorerError(f"endpoint returned {status}: {body}", retriable=False)
            if attempt < self.max_attempts:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
        assert last_error is not None
        raise last_error


def remote_score(
    endpoint: str,
    probe: ProbeText,
    mask_token_override: Optional[str] = None,
    **kwargs,
) -> MaskPrediction:
    """One-shot remote scoring; see :class:`RemoteScorer` for the knobs."""
    return RemoteScorer(endpoint, mask_token=mask_token_override, **kwargs).score(probe)
