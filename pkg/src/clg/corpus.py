"""Case corpora: loading, validation, controversy sampling, and splitting.

A corpus is an immutable collection of judged cases for one task domain.
The two supported domains differ only in their decision symbol:

    mod       -> binary decisions ("keep" / "remove")
    toxicity  -> ordinal ratings (integers 1..5)

Corpora are read from JSONL, one case per line:

    {"id": str, "text": str, "group_id": str,
     "gold": "keep"|"remove"|1..5,
     "raw_ratings": [[rater_group_id, 1..5], ...]}   # optional

``raw_ratings`` carries per-rater-group ordinal ratings used only during
preprocessing (controversy scoring); the gold label itself is always
caller-supplied.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import (
    DuplicateId,
    EmptyGroup,
    MalformedRecord,
    MixedDecisionVariants,
    TooFewCases,
)

BINARY = "binary"
ORDINAL = "ordinal"

BINARY_VALUES = ("keep", "remove")
ORDINAL_LEVELS = (1, 2, 3, 4, 5)

# task domain -> decision kind used throughout the pipeline
DOMAIN_KINDS = {"mod": BINARY, "toxicity": ORDINAL}


@dataclass(frozen=True)
class Decision:
    """A single decision value: binary keep/remove or an ordinal 1..5 level."""

    kind: str
    value: str | int

    def __post_init__(self):
        if self.kind == BINARY:
            if self.value not in BINARY_VALUES:
                raise ValueError(f"binary decision must be one of {BINARY_VALUES}, got {self.value!r}")
        elif self.kind == ORDINAL:
            if not isinstance(self.value, int) or isinstance(self.value, bool) or self.value not in ORDINAL_LEVELS:
                raise ValueError(f"ordinal decision must be an integer in {ORDINAL_LEVELS}, got {self.value!r}")
        else:
            raise ValueError(f"unknown decision kind {self.kind!r}")

    @classmethod
    def keep(cls) -> "Decision":
        return cls(BINARY, "keep")

    @classmethod
    def remove(cls) -> "Decision":
        return cls(BINARY, "remove")

    @classmethod
    def rating(cls, level: int) -> "Decision":
        return cls(ORDINAL, level)

    @classmethod
    def from_raw(cls, raw: object, kind: str) -> "Decision":
        """Parse the JSON wire form ("keep"/"remove" or 1..5) for a known kind."""
        if kind == BINARY:
            if not isinstance(raw, str):
                raise ValueError(f"expected 'keep' or 'remove', got {raw!r}")
            return cls(BINARY, raw)
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ValueError(f"expected integer 1..5, got {raw!r}")
        return cls(ORDINAL, raw)

    def to_raw(self) -> str | int:
        return self.value


@dataclass(frozen=True)
class GroupSpec:
    """A community or demographic partition that owns its own gold labels."""

    id: str
    kind: str  # "community" | "demographic"
    label: str


@dataclass(frozen=True)
class Case:
    id: str
    text: str
    group_id: str
    gold: Decision
    raw_ratings: tuple[tuple[str, int], ...] | None = None


@dataclass(frozen=True)
class Batch:
    """One annotator-sized slice of the evaluation portion."""

    index: int
    case_ids: tuple[str, ...]


@dataclass(frozen=True)
class CorpusSplit:
    """Disjoint precedent/evaluation partition plus evaluation batches."""

    precedent_ids: tuple[str, ...]
    evaluation_ids: tuple[str, ...]
    batches: tuple[Batch, ...]
    seed: int
    batch_size: int

    def to_dict(self) -> dict:
        return {
            "precedent_ids": list(self.precedent_ids),
            "evaluation_ids": list(self.evaluation_ids),
            "batches": [{"index": b.index, "case_ids": list(b.case_ids)} for b in self.batches],
            "seed": self.seed,
            "batch_size": self.batch_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSplit":
        return cls(
            precedent_ids=tuple(d["precedent_ids"]),
            evaluation_ids=tuple(d["evaluation_ids"]),
            batches=tuple(Batch(b["index"], tuple(b["case_ids"])) for b in d["batches"]),
            seed=d["seed"],
            batch_size=d["batch_size"],
        )


class Corpus:
    """Immutable, id-indexed set of cases sharing one decision kind."""

    def __init__(self, domain: str, cases: list[Case] | tuple[Case, ...]):
        if domain not in DOMAIN_KINDS:
            raise ValueError(f"unknown domain {domain!r}")
        self.domain = domain
        self.cases: tuple[Case, ...] = tuple(cases)
        self.by_id: dict[str, Case] = {}
        kind = DOMAIN_KINDS[domain]
        for c in self.cases:
            if c.id in self.by_id:
                raise DuplicateId(f"duplicate case id {c.id!r}")
            if c.gold.kind != kind:
                raise MixedDecisionVariants(
                    f"case {c.id!r} carries a {c.gold.kind} decision in a {kind} corpus"
                )
            self.by_id[c.id] = c

    @property
    def decision_kind(self) -> str:
        return DOMAIN_KINDS[self.domain]

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[Case]:
        return iter(self.cases)

    def subset(self, ids: list[str] | tuple[str, ...]) -> "Corpus":
        return Corpus(self.domain, [self.by_id[i] for i in ids])


def _parse_record(obj: dict, kind: str, line_no: int) -> Case:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not a JSON object")
    for field in ("id", "text", "group_id", "gold"):
        if field not in obj:
            raise MalformedRecord(line_no, f"missing field {field!r}")
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise MalformedRecord(line_no, "id must be a non-empty string")
    if not isinstance(obj["text"], str) or not obj["text"]:
        raise MalformedRecord(line_no, "text must be a non-empty string")
    if not isinstance(obj["group_id"], str) or not obj["group_id"]:
        raise MalformedRecord(line_no, "group_id must be a non-empty string")
    try:
        gold = Decision.from_raw(obj["gold"], kind)
    except ValueError as exc:
        raise MalformedRecord(line_no, str(exc)) from exc

    raw_ratings = None
    if obj.get("raw_ratings") is not None:
        parsed = []
        for entry in obj["raw_ratings"]:
            if (
                not isinstance(entry, (list, tuple))
                or len(entry) != 2
                or not isinstance(entry[0], str)
                or isinstance(entry[1], bool)
                or not isinstance(entry[1], int)
                or entry[1] not in ORDINAL_LEVELS
            ):
                raise MalformedRecord(line_no, f"bad raw_ratings entry {entry!r}")
            parsed.append((entry[0], entry[1]))
        raw_ratings = tuple(parsed)

    return Case(
        id=obj["id"],
        text=obj["text"],
        group_id=obj["group_id"],
        gold=gold,
        raw_ratings=raw_ratings,
    )


def load_corpus(path: str | Path, domain: str) -> Corpus:
    """Load and validate a JSONL corpus for the given domain.

    Raises MalformedRecord (with the 1-based line number), DuplicateId, or
    MixedDecisionVariants; a corpus never loads partially.
    """
    if domain not in DOMAIN_KINDS:
        raise ValueError(f"unknown domain {domain!r}")
    kind = DOMAIN_KINDS[domain]
    cases: list[Case] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
            case = _parse_record(obj, kind, line_no)
            if case.id in seen:
                raise DuplicateId(f"duplicate case id {case.id!r} at line {line_no}")
            seen.add(case.id)
            cases.append(case)
    return Corpus(domain, cases)


def case_record(case: Case) -> dict:
    """The JSONL wire form of a case (inverse of loading)."""
    record: dict = {
        "id": case.id,
        "text": case.text,
        "group_id": case.group_id,
        "gold": case.gold.to_raw(),
    }
    if case.raw_ratings is not None:
        record["raw_ratings"] = [[group, level] for group, level in case.raw_ratings]
    return record


def _pstdev(values: list[float]) -> float:
    # population std (divide by N); keeps singleton groups well-defined
    n = len(values)
    mean = sum(values) / n
    return math.sqrt(sum((v - mean) ** 2 for v in values) / n)


def controversy_score(case: Case, groups: list[GroupSpec] | tuple[GroupSpec, ...]) -> float:
    """Between-group deviation minus mean within-group deviation.

    Group means are taken over each group's ratings of the case; the score
    is the population std of those means minus the mean of each group's
    population std. High scores mark cases that are stable within groups
    but split across them.
    """
    ratings = case.raw_ratings or ()
    by_group: dict[str, list[float]] = {g.id: [] for g in groups}
    for rater_group, level in ratings:
        if rater_group in by_group:
            by_group[rater_group].append(float(level))
    for g in groups:
        if not by_group[g.id]:
            raise EmptyGroup(g.id)
    group_means = [sum(v) / len(v) for v in (by_group[g.id] for g in groups)]
    within = [_pstdev(by_group[g.id]) for g in groups]
    between_std = _pstdev(group_means)
    mean_within = sum(within) / len(within)
    return between_std - mean_within


def rater_groups(corpus: Corpus) -> tuple[GroupSpec, ...]:
    """The rater-group universe observed in a corpus's raw ratings."""
    ids = sorted({g for c in corpus for g, _ in (c.raw_ratings or ())})
    return tuple(GroupSpec(id=g, kind="demographic", label=g) for g in ids)


def select_controversial(corpus: Corpus, n: int) -> Corpus:
    """Keep the n highest-controversy cases; ties broken by ascending id.

    The rater-group universe is the union of rater group ids across the
    corpus, so every case must carry at least one rating from each.
    """
    if n > len(corpus):
        raise TooFewCases(f"asked for {n} cases but corpus has {len(corpus)}")
    groups = rater_groups(corpus)
    scored = [(controversy_score(c, groups), c) for c in corpus]
    scored.sort(key=lambda pair: (-pair[0], pair[1].id))
    return Corpus(corpus.domain, [c for _, c in scored[:n]])


def split_and_batch(corpus: Corpus, seed: int, batch_size: int = 10) -> CorpusSplit:
    """Shuffle and split a corpus into precedent/evaluation halves.

    Deterministic for a given seed regardless of input order; with an odd
    corpus the precedent portion takes the extra case. The evaluation
    portion is chunked into batches of ``batch_size`` (last may be short).
    """
    if len(corpus) == 0:
        raise TooFewCases("cannot split an empty corpus")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    ids = sorted(corpus.by_id)
    random.Random(seed).shuffle(ids)
    n_precedent = (len(ids) + 1) // 2
    precedent = tuple(ids[:n_precedent])
    evaluation = tuple(ids[n_precedent:])
    batches = tuple(
        Batch(index=i, case_ids=tuple(evaluation[start : start + batch_size]))
        for i, start in enumerate(range(0, len(evaluation), batch_size))
    )
    return CorpusSplit(
        precedent_ids=precedent,
        evaluation_ids=evaluation,
        batches=batches,
        seed=seed,
        batch_size=batch_size,
    )
