"""Ground-truth engine for selection-bias demonstrations.

Builds the two causal graphs of interest, answers d-separation queries,
samples a synthetic population from a small structural causal model, applies
dataset selection, and measures the dependence that selection induces.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .errors import (
    ConfigError,
    DegenerateVariableError,
    InputError,
    UndefinedPosteriorError,
)
from .templates import GenderLexicon, builtin_lexicon

__all__ = [
    "CausalDag",
    "ScmParams",
    "PopulationSample",
    "DependenceReport",
    "build_dag",
    "d_separated",
    "sample_population",
    "apply_selection",
    "posterior_female_given_w",
    "dependence_report",
    "samples_to_csv",
    "samples_from_csv",
]

Edge = tuple[str, str]


@dataclass(frozen=True)
class CausalDag:
    """A directed acyclic graph with optional bidirected edges and selection flags.

    Bidirected edges model an unobserved common cause: internally each one is
    expanded to a fresh latent node with two outgoing directed edges, so a
    single d-separation routine serves graphs with and without hidden
    confounding. Latent nodes are an implementation detail and are rejected
    wherever an observed node is expected.
    """

    nodes: tuple[str, ...]
    directed_edges: tuple[Edge, ...] = ()
    bidirected_edges: tuple[Edge, ...] = ()
    selection_nodes: tuple[str, ...] = ()

    def __post_init__(self):
        nodes = tuple(str(n) for n in self.nodes)
        directed = tuple((str(a), str(b)) for a, b in self.directed_edges)
        bidirected = tuple((str(a), str(b)) for a, b in self.bidirected_edges)
        selection = tuple(str(n) for n in self.selection_nodes)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "directed_edges", directed)
        object.__setattr__(self, "bidirected_edges", bidirected)
        object.__setattr__(self, "selection_nodes", selection)

        if not nodes:
            raise InputError("graph needs at least one node")
        if len(set(nodes)) != len(nodes):
            raise InputError("node names must be unique")
        known = set(nodes)
        for a, b in directed + bidirected:
            if a not in known or b not in known:
                raise InputError(f"edge ({a}, {b}) references an unknown node")
            if a == b:
                raise InputError(f"self-loop on {a}")
        unknown_sel = set(selection) - known
        if unknown_sel:
            raise InputError(f"unknown selection nodes: {sorted(unknown_sel)}")
        for a, b in directed:
            if a in selection:
                raise InputError(f"selection node {a} cannot have outgoing edges")
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        # Kahn over directed edges only; latent expansion adds sources and
        # cannot introduce a cycle.
        indeg = {n: 0 for n in self.nodes}
        children: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.directed_edges:
            indeg[b] += 1
            children[a].append(b)
        queue = deque(n for n, d in indeg.items() if d == 0)
        seen = 0
        while queue:
            node = queue.popleft()
            seen += 1
            for child in children[node]:
                indeg[child] -= 1
                if indeg[child] == 0:
                    queue.append(child)
        if seen != len(self.nodes):
            raise InputError("directed edges contain a cycle")

    @cached_property
    def latent_nodes(self) -> tuple[str, ...]:
        names = []
        taken = set(self.nodes)
        for a, b in self.bidirected_edges:
            name = f"U_{a}{b}"
            while name in taken:
                name += "_"
            taken.add(name)
            names.append(name)
        return tuple(names)

    @cached_property
    def all_nodes(self) -> tuple[str, ...]:
        return self.nodes + self.latent_nodes

    @cached_property
    def expanded_edges(self) -> tuple[Edge, ...]:
        extra = []
        for latent, (a, b) in zip(self.latent_nodes, self.bidirected_edges):
            extra.append((latent, a))
            extra.append((latent, b))
        return self.directed_edges + tuple(extra)

    @cached_property
    def _parents(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {n: [] for n in self.all_nodes}
        for a, b in self.expanded_edges:
            out[b].append(a)
        return {n: tuple(v) for n, v in out.items()}

    @cached_property
    def _children(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {n: [] for n in self.all_nodes}
        for a, b in self.expanded_edges:
            out[a].append(b)
        return {n: tuple(v) for n, v in out.items()}

    def parents(self, node: str) -> tuple[str, ...]:
        return self._parents[node]

    def children(self, node: str) -> tuple[str, ...]:
        return self._children[node]


def build_dag(variant: str) -> CausalDag:
    """Return one of the two demonstration graphs.

    ``with_gender``: gender G is explicit; W and G jointly cause access Z,
    W and Z shape the text X, and X and G produce the gendered word Y.
    ``with_selection``: G is hidden (a bidirected Z-Y edge stands in for it)
    and a selection indicator S hangs off Z.
    """
    if variant == "with_gender":
        return CausalDag(
            nodes=("W", "G", "Z", "X", "Y"),
            directed_edges=(
                ("W", "Z"),
                ("G", "Z"),
                ("Z", "X"),
                ("W", "X"),
                ("X", "Y"),
                ("G", "Y"),
            ),
        )
    if variant == "with_selection":
        return CausalDag(
            nodes=("W", "Z", "X", "Y", "S"),
            directed_edges=(
                ("W", "Z"),
                ("Z", "X"),
                ("W", "X"),
                ("X", "Y"),
                ("Z", "S"),
            ),
            bidirected_edges=(("Z", "Y"),),
            selection_nodes=("S",),
        )
    raise InputError(f"unknown graph variant {variant!r}")


def _require_observed(dag: CausalDag, name: str, role: str) -> str:
    node = str(name)
    if node in dag.latent_nodes:
        raise InputError(f"{role} {node!r} is a latent node")
    if node not in dag.nodes:
        raise InputError(f"{role} {node!r} is not a node of the graph")
    return node


def d_separated(dag: CausalDag, a: str, b: str, given: Iterable[str] = ()) -> bool:
    """True iff every path between ``a`` and ``b`` is blocked given ``given``.

    Uses the reachable-set formulation over the latent-expanded graph: walk
    active trails as (node, direction) states, where collider segments are
    passable only when the collider has a conditioned descendant.
    """
    a = _require_observed(dag, a, "endpoint")
    b = _require_observed(dag, b, "endpoint")
    if a == b:
        raise InputError("endpoints must differ")
    given_set = frozenset(_require_observed(dag, g, "conditioning node") for g in given)
    if a in given_set or b in given_set:
        raise InputError("endpoints cannot appear in the conditioning set")

    # Ancestors of the conditioning set (inclusive), for collider activation.
    anc = set(given_set)
    stack = list(given_set)
    while stack:
        node = stack.pop()
        for parent in dag.parents(node):
            if parent not in anc:
                anc.add(parent)
                stack.append(parent)

    reached = set()
    visited = set()
    queue = deque([(a, "up")])
    while queue:
        node, direction = queue.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in given_set:
            reached.add(node)
        if direction == "up" and node not in given_set:
            for parent in dag.parents(node):
                queue.append((parent, "up"))
            for child in dag.children(node):
                queue.append((child, "down"))
        elif direction == "down":
            if node not in given_set:
                for child in dag.children(node):
                    queue.append((child, "down"))
            if node in anc:
                for parent in dag.parents(node):
                    queue.append((parent, "up"))
    return b not in reached


@dataclass(frozen=True)
class ScmParams:
    """Parameters of the structural causal model.

    W is uniform over ``axis_levels`` indices, G is Bernoulli(``p_female``),
    and access follows P(Z=1 | W=w, G=g) = clamp(base_g + gain_g * w/(K-1))
    with per-gender base and gain coefficients. Selection is S = Z.
    """

    p_female: float = 0.5
    axis_levels: int = 22
    access_base_f: float = 0.2
    access_gain_f: float = 0.6
    access_base_m: float = 0.5
    access_gain_m: float = 0.0
    rng_seed: int = 7

    def __post_init__(self):
        if not isinstance(self.axis_levels, int) or self.axis_levels < 2:
            raise ConfigError("axis_levels must be an integer >= 2")
        if not 0.0 <= self.p_female <= 1.0:
            raise ConfigError("p_female must lie in [0, 1]")
        for name in ("access_base_f", "access_gain_f", "access_base_m", "access_gain_m"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite")
        if not isinstance(self.rng_seed, int):
            raise ConfigError("rng_seed must be an integer")

    def access(self, w: int, gender: str) -> float:
        """P(Z=1 | W=w, G=gender), clamped to [0, 1]."""
        if not 0 <= w < self.axis_levels:
            raise InputError(f"w={w} outside [0, {self.axis_levels - 1}]")
        if gender == "female":
            base, gain = self.access_base_f, self.access_gain_f
        elif gender == "male":
            base, gain = self.access_base_m, self.access_gain_m
        else:
            raise InputError(f"unknown gender {gender!r}")
        return min(1.0, max(0.0, base + gain * w / (self.axis_levels - 1)))

    def to_dict(self) -> dict:
        return {
            "p_female": self.p_female,
            "axis_levels": self.axis_levels,
            "access_base_f": self.access_base_f,
            "access_gain_f": self.access_gain_f,
            "access_base_m": self.access_base_m,
            "access_gain_m": self.access_gain_m,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScmParams":
        allowed = {
            "p_female",
            "axis_levels",
            "access_base_f",
            "access_gain_f",
            "access_base_m",
            "access_gain_m",
            "rng_seed",
        }
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown simulation parameters: {sorted(unknown)}")
        return cls(**dict(data))


@dataclass(frozen=True, slots=True)
class PopulationSample:
    """One simulated individual."""

    w: int
    g: str
    z: int
    s: int
    y_word: str


def sample_population(
    params: ScmParams,
    n: int,
    lexicon: Optional[GenderLexicon] = None,
) -> list[PopulationSample]:
    """Draw ``n`` individuals from the structural model, deterministically.

    Four independent substreams (w, g, z, y-word) are spawned from the single
    seed so that each variable's draws are unaffected by the others' order.
    """
    if n < 1:
        raise InputError("n must be >= 1")
    lexicon = lexicon or builtin_lexicon()
    female_col = lexicon.female_column
    male_col = lexicon.male_column
    if params.p_female > 0 and not female_col:
        raise ConfigError("lexicon has no female words to emit")
    if params.p_female < 1 and not male_col:
        raise ConfigError("lexicon has no male words to emit")

    w_ss, g_ss, z_ss, y_ss = np.random.SeedSequence(params.rng_seed).spawn(4)
    w = np.random.default_rng(w_ss).integers(0, params.axis_levels, size=n)
    is_female = np.random.default_rng(g_ss).random(n) < params.p_female

    k1 = params.axis_levels - 1
    frac = w / k1
    p_f = np.clip(params.access_base_f + params.access_gain_f * frac, 0.0, 1.0)
    p_m = np.clip(params.access_base_m + params.access_gain_m * frac, 0.0, 1.0)
    p_z = np.where(is_female, p_f, p_m)
    z = (np.random.default_rng(z_ss).random(n) < p_z).astype(np.int8)

    # One shared float stream indexes whichever column the gender selects;
    # duplicated column entries keep their multiplicity.
    y_u = np.random.default_rng(y_ss).random(n)
    f_idx = (y_u * len(female_col)).astype(np.int64) if female_col else None
    m_idx = (y_u * len(male_col)).astype(np.int64) if male_col else None

    samples = []
    for i in range(n):
        if is_female[i]:
            word = female_col[f_idx[i]]
            gender = "female"
        else:
            word = male_col[m_idx[i]]
            gender = "male"
        zi = int(z[i])
        samples.append(PopulationSample(w=int(w[i]), g=gender, z=zi, s=zi, y_word=word))
    return samples


def apply_selection(samples: Sequence[PopulationSample]) -> list[PopulationSample]:
    """Keep exactly the individuals selected into the dataset (s=1)."""
    return [s for s in samples if s.s == 1]


def posterior_female_given_w(params: ScmParams, w: int) -> float:
    """P(G=female | W=w, S=1), the analytic oracle for the selected population."""
    a_f = params.access(w, "female")
    a_m = params.access(w, "male")
    numer = params.p_female * a_f
    denom = numer + (1.0 - params.p_female) * a_m
    if denom == 0.0:
        raise UndefinedPosteriorError(f"no individual at w={w} is ever selected")
    return numer / denom


_VARIABLES = ("w", "g", "z", "s", "y_word")


def _column(samples: Sequence[PopulationSample], variable: str) -> list:
    name = variable.strip().lower()
    if name not in _VARIABLES:
        raise InputError(f"unknown variable {variable!r}; expected one of {_VARIABLES}")
    return [getattr(s, name) for s in samples]


@dataclass(frozen=True)
class DependenceReport:
    """Dependence between two discrete variables, optionally within strata."""

    n: int
    mi_nats: float
    chi2: float
    p_value: float
    dof: int


def _counts_table(xs: Sequence, ys: Sequence) -> np.ndarray:
    x_arr = np.asarray(xs)
    y_arr = np.asarray(ys)
    _, xi = np.unique(x_arr, return_inverse=True)
    _, yi = np.unique(y_arr, return_inverse=True)
    table = np.zeros((xi.max() + 1, yi.max() + 1), dtype=np.int64)
    np.add.at(table, (xi, yi), 1)
    return table


def _mi_chi2(table: np.ndarray) -> tuple[float, float, int]:
    total = table.sum()
    joint = table / total
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, joint / (px * py), 1.0)
        mi = float(np.sum(np.where(joint > 0, joint * np.log(ratio), 0.0)))
    expected = px * py * total
    mask = expected > 0
    chi2_stat = float(np.sum((table[mask] - expected[mask]) ** 2 / expected[mask]))
    dof = (table.shape[0] - 1) * (table.shape[1] - 1)
    return max(mi, 0.0), chi2_stat, dof


def dependence_report(
    samples: Sequence[PopulationSample],
    x: str,
    y: str,
    condition: Optional[str] = None,
) -> DependenceReport:
    """Plug-in mutual information (nats) and Pearson chi-squared for x vs y.

    With ``condition`` set, both statistics are accumulated per stratum of the
    conditioning variable; strata where either variable shows fewer than two
    levels carry no information about dependence and are skipped.
    """
    if not samples:
        raise InputError("no samples to analyze")
    xs = _column(samples, x)
    ys = _column(samples, y)

    if condition is None:
        if len(set(xs)) < 2:
            raise DegenerateVariableError(f"{x!r} has a single observed level")
        if len(set(ys)) < 2:
            raise DegenerateVariableError(f"{y!r} has a single observed level")
        mi, chi2_stat, dof = _mi_chi2(_counts_table(xs, ys))
        if dof < 1:
            raise DegenerateVariableError("not enough levels for a dependence test")
        p_value = float(chi2_dist.sf(chi2_stat, dof))
        return DependenceReport(len(samples), mi, chi2_stat, p_value, dof)

    cs = _column(samples, condition)
    total = len(samples)
    mi_sum = 0.0
    chi2_sum = 0.0
    dof_sum = 0
    used = 0
    by_stratum: dict = {}
    for xv, yv, cv in zip(xs, ys, cs):
        by_stratum.setdefault(cv, ([], []))
        by_stratum[cv][0].append(xv)
        by_stratum[cv][1].append(yv)
    for stratum in sorted(by_stratum):
        sx, sy = by_stratum[stratum]
        if len(set(sx)) < 2 or len(set(sy)) < 2:
            continue
        mi, chi2_stat, dof = _mi_chi2(_counts_table(sx, sy))
        weight = len(sx) / total
        mi_sum += weight * mi
        chi2_sum += chi2_stat
        dof_sum += dof
        used += len(sx)
    if dof_sum < 1:
        raise DegenerateVariableError(
            f"no stratum of {condition!r} shows two levels of both {x!r} and {y!r}"
        )
    p_value = float(chi2_dist.sf(chi2_sum, dof_sum))
    return DependenceReport(total, max(mi_sum, 0.0), chi2_sum, p_value, dof_sum)


def samples_to_csv(samples: Sequence[PopulationSample], path: Union[str, Path]) -> None:
    """Write samples as CSV with header ``w,g,z,s,y_word``."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["w", "g", "z", "s", "y_word"])
        for s in samples:
            writer.writerow([s.w, s.g, s.z, s.s, s.y_word])


def samples_from_csv(path: Union[str, Path]) -> list[PopulationSample]:
    """Read samples written by :func:`samples_to_csv`."""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise InputError(f"cannot read samples {path}: {exc}") from exc
    if not rows or rows[0] != ["w", "g", "z", "s", "y_word"]:
        raise InputError(f"{path}: expected header w,g,z,s,y_word")
    samples = []
    for row in rows[1:]:
        if len(row) != 5:
            raise InputError(f"{path}: malformed row {row!r}")
        samples.append(
            PopulationSample(
                w=int(row[0]), g=row[1], z=int(row[2]), s=int(row[3]), y_word=row[4]
            )
        )
    return samples
