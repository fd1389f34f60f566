"""Gender-neutral probe construction.

Owns the gendered-word lexicon, the built-in axis value lists (dates,
countries, subreddit names), and the mask-template renderer that turns
them into probe texts for the masked gender task.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .errors import InputError, TemplateError

__all__ = [
    "MASK",
    "VERBS",
    "LIFE_STAGES",
    "GenderLexicon",
    "AxisSpec",
    "TemplateSpec",
    "ProbeText",
    "builtin_lexicon",
    "builtin_axis",
    "builtin_templates",
    "render_probes",
    "validate_neutral",
    "load_lexicon",
    "export_lexicon",
    "load_axis",
    "load_templates",
]

#: Canonical mask placeholder. Scorer backends substitute a model-specific
#: mask string; templates stay model-agnostic.
MASK = "[MASK]"

VERBS = ("was", "is", "will be")

LIFE_STAGES = (
    "a child",
    "a kid",
    "an adolescent",
    "a teenager",
    "an adult",
    "all grown up",
)

_LEXICON_PAIRS = (
    ("he", "she"),
    ("him", "her"),
    ("his", "her"),
    ("himself", "herself"),
    ("male", "female"),
    ("man", "woman"),
    ("men", "women"),
    ("husband", "wife"),
    ("father", "mother"),
    ("boyfriend", "girlfriend"),
    ("brother", "sister"),
    ("actor", "actress"),
)

_DATE_START = 1801
_DATE_END = 2011

_PLACE_VALUES = (
    "Afghanistan",
    "Yemen",
    "Iraq",
    "Pakistan",
    "Syria",
    "Democratic Republic of Congo",
    "Iran",
    "Mali",
    "Chad",
    "Saudi Arabia",
    "Switzerland",
    "Ireland",
    "Lithuania",
    "Rwanda",
    "Namibia",
    "Sweden",
    "New Zealand",
    "Norway",
    "Finland",
    "Iceland",
)

_SUBREDDIT_VALUES = (
    "GlobalOffensive",
    "pcmasterrace",
    "nfl",
    "sports",
    "The_Donald",
    "leagueoflegends",
    "Overwatch",
    "gonewild",
    "Futurology",
    "space",
    "technology",
    "gaming",
    "Jokes",
    "dataisbeautiful",
    "woahdude",
    "askscience",
    "wow",
    "anime",
    "BlackPeopleTwitter",
    "politics",
    "pokemon",
    "worldnews",
    "reddit.com",
    "interestingasfuck",
    "videos",
    "nottheonion",
    "television",
    "science",
    "atheism",
    "movies",
    "gifs",
    "Music",
    "trees",
    "EarthPorn",
    "GetMotivated",
    "pokemongo",
    "news",
    "Fitness",
    "Showerthoughts",
    "OldSchoolCool",
    "explainlikeimfive",
    "todayilearned",
    "gameofthrones",
    "AdviceAnimals",
    "DIY",
    "WTF",
    "IAmA",
    "cringepics",
    "tifu",
    "mildlyinteresting",
    "funny",
    "pics",
    "LifeProTips",
    "creepy",
    "personalfinance",
    "food",
    "AskReddit",
    "books",
    "aww",
    "sex",
    "relationships",
)

# A "word" is a maximal run of letters, optionally hyphen-joined, so that
# compounds like "male-pattern" do not trip whole-word lexicon matches.
_WORD_RE = re.compile(r"[A-Za-z]+(?:-[A-Za-z]+)*")

_PLACEHOLDER_RE = re.compile(r"\{(\w+)\}")

_ALLOWED_PLACEHOLDERS = frozenset({"mask", "verb", "life_stage", "w"})


@dataclass(frozen=True)
class GenderLexicon:
    """Ordered (male_variant, female_variant) word pairs.

    Duplicates are allowed across pairs (the built-in list pairs "her" with
    both "him" and "his"), but membership queries treat each column as a
    case-insensitive set. A word may not appear in both columns. Empty cells
    are tolerated in custom lexicons and simply excluded from that column.
    """

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        pairs = tuple((str(m).strip(), str(f).strip()) for m, f in self.pairs)
        if not pairs:
            raise InputError("lexicon must contain at least one pair")
        object.__setattr__(self, "pairs", pairs)
        overlap = self.male_words & self.female_words
        if overlap:
            raise InputError(f"words present in both columns: {sorted(overlap)}")

    @cached_property
    def male_column(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.pairs if m)

    @cached_property
    def female_column(self) -> tuple[str, ...]:
        return tuple(f for _, f in self.pairs if f)

    @cached_property
    def male_words(self) -> frozenset:
        return frozenset(w.lower() for w in self.male_column)

    @cached_property
    def female_words(self) -> frozenset:
        return frozenset(w.lower() for w in self.female_column)

    @cached_property
    def vocabulary(self) -> tuple[str, ...]:
        """Distinct lexicon words in first-appearance order (male, female per pair)."""
        seen = []
        for male, female in self.pairs:
            for word in (male, female):
                if word and word not in seen:
                    seen.append(word)
        return tuple(seen)

    def gender_of(self, token: str) -> Optional[str]:
        """Return "female"/"male" for a whole-token, case-insensitive match, else None."""
        lowered = token.strip().lower()
        if lowered in self.female_words:
            return "female"
        if lowered in self.male_words:
            return "male"
        return None


@dataclass(frozen=True)
class AxisSpec:
    """An ordered list of axis values; the order encodes the hypothesized gradient."""

    category: str
    values: tuple[str, ...]

    def __post_init__(self):
        values = tuple(str(v) for v in self.values)
        if not values:
            raise InputError("axis must contain at least one value")
        if len(set(values)) != len(values):
            raise InputError("axis values must be distinct")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class TemplateSpec:
    """A probe pattern with `{mask}`, `{w}` and optional `{verb}`/`{life_stage}` slots."""

    pattern: str
    verbs: tuple[str, ...] = VERBS
    life_stages: tuple[str, ...] = LIFE_STAGES

    def __post_init__(self):
        object.__setattr__(self, "verbs", tuple(self.verbs))
        object.__setattr__(self, "life_stages", tuple(self.life_stages))
        names = _PLACEHOLDER_RE.findall(self.pattern)
        unknown = set(names) - _ALLOWED_PLACEHOLDERS
        if unknown:
            raise TemplateError(f"unknown placeholders {sorted(unknown)} in {self.pattern!r}")
        if names.count("mask") != 1:
            raise TemplateError(f"pattern must contain {{mask}} exactly once: {self.pattern!r}")
        if names.count("w") != 1:
            raise TemplateError(f"pattern must contain {{w}} exactly once: {self.pattern!r}")
        for slot in ("verb", "life_stage"):
            if names.count(slot) > 1:
                raise TemplateError(f"pattern may contain {{{slot}}} at most once: {self.pattern!r}")

    @property
    def uses_verb(self) -> bool:
        return "{verb}" in self.pattern

    @property
    def uses_life_stage(self) -> bool:
        return "{life_stage}" in self.pattern

    def renderings_per_value(self) -> int:
        count = 1
        if self.uses_verb:
            count *= len(self.verbs)
        if self.uses_life_stage:
            count *= len(self.life_stages)
        return count


@dataclass(frozen=True)
class ProbeText:
    """One rendered probe: the text plus the slot values that produced it."""

    text: str
    w_index: int
    w_value: str
    verb: Optional[str]
    life_stage: Optional[str]
    template_id: int

    def __post_init__(self):
        if self.text.count(MASK) != 1:
            raise TemplateError(f"probe text must contain {MASK} exactly once: {self.text!r}")


def builtin_lexicon() -> GenderLexicon:
    """The built-in 12-pair gendered-word lexicon."""
    return GenderLexicon(_LEXICON_PAIRS)


def builtin_axis(category: str, *, date_step: int = 10) -> AxisSpec:
    """Built-in axis values for ``date`` (decade steps 1801 to 2011), ``place``
    (bottom-10 then top-10 gender-gap-ranked countries), or ``subreddit``
    (channels ordered by share of self-reported female commenters).

    ``date_step`` changes the year stride; endpoints stay 1801 and 2011.
    """
    if category == "date":
        if date_step < 1:
            raise InputError("date_step must be a positive number of years")
        values = tuple(str(y) for y in range(_DATE_START, _DATE_END + 1, date_step))
        return AxisSpec("date", values)
    if category == "place":
        return AxisSpec("place", _PLACE_VALUES)
    if category == "subreddit":
        return AxisSpec("subreddit", _SUBREDDIT_VALUES)
    if category == "custom":
        raise InputError("custom axes are supplied by the caller, not built in")
    raise InputError(f"unknown axis category {category!r}")


def builtin_templates(category: str) -> list[TemplateSpec]:
    """Built-in patterns: two for date/place, one for subreddit."""
    if category in ("date", "place"):
        return [
            TemplateSpec("{mask} {verb} {life_stage} in {w}."),
            TemplateSpec("In {w}, {mask} {verb} {life_stage}."),
        ]
    if category == "subreddit":
        return [TemplateSpec("{mask} {verb} {life_stage}. {w}.")]
    raise InputError(f"unknown template category {category!r}")


def render_probes(templates: Sequence[TemplateSpec], axis: AxisSpec) -> list[ProbeText]:
    """Render every template/verb/life-stage combination for every axis value.

    Ordering is deterministic: axis-major, then template, verb, life stage.
    Templates without a `{verb}`/`{life_stage}` slot contribute one rendering
    per axis value for that slot.
    """
    if not templates:
        raise InputError("at least one template is required")
    probes = []
    for w_index, w_value in enumerate(axis.values):
        for template_id, spec in enumerate(templates):
            verbs = spec.verbs if spec.uses_verb else (None,)
            stages = spec.life_stages if spec.uses_life_stage else (None,)
            for verb in verbs:
                for stage in stages:
                    try:
                        text = spec.pattern.format(
                            mask=MASK, w=w_value, verb=verb, life_stage=stage
                        )
                    except (KeyError, IndexError, ValueError) as exc:
                        raise TemplateError(f"cannot render {spec.pattern!r}: {exc}") from exc
                    probes.append(
                        ProbeText(
                            text=text,
                            w_index=w_index,
                            w_value=w_value,
                            verb=verb,
                            life_stage=stage,
                            template_id=template_id,
                        )
                    )
    return probes


def validate_neutral(probe: ProbeText, lexicon: GenderLexicon) -> bool:
    """True iff no whole-word lexicon match occurs outside the mask placeholder."""
    text = probe.text.replace(MASK, " ")
    return all(lexicon.gender_of(token) is None for token in _WORD_RE.findall(text))


def load_lexicon(path: Union[str, Path]) -> GenderLexicon:
    """Read a two-column ``male,female`` CSV (header required)."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise InputError(f"cannot read lexicon {path}: {exc}") from exc
    if not rows or [cell.strip().lower() for cell in rows[0][:2]] != ["male", "female"]:
        raise InputError(f"{path}: lexicon CSV must start with a 'male,female' header")
    pairs = []
    for row in rows[1:]:
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) < 2:
            raise InputError(f"{path}: lexicon rows need two cells, got {row!r}")
        pairs.append((row[0], row[1]))
    return GenderLexicon(tuple(pairs))


def export_lexicon(lexicon: GenderLexicon, path: Union[str, Path]) -> None:
    """Write a lexicon in the same CSV format ``load_lexicon`` reads."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["male", "female"])
        writer.writerows(lexicon.pairs)


def load_axis(path: Union[str, Path], category: str = "custom") -> AxisSpec:
    """Read an axis file: one value per line, UTF-8, order significant."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read axis {path}: {exc}") from exc
    values = tuple(line.strip() for line in lines if line.strip())
    if not values:
        raise InputError(f"{path}: axis file contains no values")
    return AxisSpec(category, values)


def load_templates(path: Union[str, Path]) -> list[TemplateSpec]:
    """Read a template file: one pattern per line."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read templates {path}: {exc}") from exc
    patterns = [line.strip() for line in lines if line.strip()]
    if not patterns:
        raise InputError(f"{path}: template file contains no patterns")
    return [TemplateSpec(pattern) for pattern in patterns]
