"""Exact k-nearest-precedent retrieval and retrieval-window restriction.

An index holds the precedent portion of a corpus plus its vectors;
retrieval ranks the whole portion by cosine similarity (corpora are small,
so exact search is the right tool). Selections collected at the widest
window can be narrowed after the fact: dropping verdicts outside a smaller
window simulates having retrieved fewer cases in the first place.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping

from .corpus import Case, Corpus, Decision, BINARY, ORDINAL
from .embedding import EmbeddingVector, check_uniform_dim, cosine_similarity
from .errors import DimensionMismatch, EmptyIndex, MissingVector, WindowTooLarge
from . import storage


class Verdict(str, Enum):
    """Per-candidate applicability call made by an agent."""

    PRECEDENT = "precedent"
    DOES_NOT_APPLY = "does_not_apply"


@dataclass(frozen=True)
class RetrievedCase:
    """One ranked precedent candidate, carrying its recorded decision."""

    case_id: str
    text: str
    similarity: float
    rank: int
    gold: Decision


@dataclass(frozen=True)
class RetrievalResult:
    judged_case_id: str
    k: int
    items: tuple[RetrievedCase, ...]

    def ranks(self) -> tuple[int, ...]:
        return tuple(item.rank for item in self.items)

    def to_dict(self) -> dict:
        return {
            "judged_case_id": self.judged_case_id,
            "k": self.k,
            "items": [
                {
                    "case_id": i.case_id,
                    "text": i.text,
                    "similarity": i.similarity,
                    "rank": i.rank,
                    "gold": i.gold.to_raw(),
                }
                for i in self.items
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RetrievalResult":
        items = tuple(
            RetrievedCase(
                case_id=i["case_id"],
                text=i["text"],
                similarity=i["similarity"],
                rank=i["rank"],
                gold=Decision.from_raw(i["gold"], BINARY if isinstance(i["gold"], str) else ORDINAL),
            )
            for i in d["items"]
        )
        return cls(judged_case_id=d["judged_case_id"], k=d["k"], items=items)


@dataclass
class PrecedentSelection:
    """An agent's verdicts over one retrieval result.

    ``final_unconstrained`` is the agent's free decision recorded after
    selection (used for the non-binding comparison); ``defaulted_ranks``
    audits candidates whose verdict fell back to DOES_NOT_APPLY because
    the agent's reply could not be parsed.
    """

    judged_case_id: str
    agent_id: str
    verdicts: dict[int, Verdict]
    final_unconstrained: Decision | None = None
    defaulted_ranks: tuple[int, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "judged_case_id": self.judged_case_id,
            "agent_id": self.agent_id,
            "verdicts": {str(rank): v.value for rank, v in sorted(self.verdicts.items())},
            "final_unconstrained": None if self.final_unconstrained is None else self.final_unconstrained.to_raw(),
            "defaulted_ranks": list(self.defaulted_ranks),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrecedentSelection":
        final = d.get("final_unconstrained")
        return cls(
            judged_case_id=d["judged_case_id"],
            agent_id=d["agent_id"],
            verdicts={int(rank): Verdict(v) for rank, v in d["verdicts"].items()},
            final_unconstrained=None
            if final is None
            else Decision.from_raw(final, BINARY if isinstance(final, str) else ORDINAL),
            defaulted_ranks=tuple(d.get("defaulted_ranks", ())),
        )


class RetrievalIndex:
    """Immutable exact-search index over the precedent portion."""

    def __init__(self, precedents: Corpus, vectors: Mapping[str, EmbeddingVector]):
        if len(precedents) == 0:
            raise EmptyIndex("no precedent cases to index")
        for case in precedents:
            if case.id not in vectors:
                raise MissingVector(case.id)
        self.precedents = precedents
        self.vectors = vectors
        self.dim = check_uniform_dim({c.id: vectors[c.id] for c in precedents})

    def __len__(self) -> int:
        return len(self.precedents)


def build_index(precedents: Corpus, vectors: Mapping[str, EmbeddingVector]) -> RetrievalIndex:
    return RetrievalIndex(precedents, vectors)


def retrieve(index: RetrievalIndex, judged: Case, k: int) -> RetrievalResult:
    """Top-k precedents for a judged case by descending cosine similarity.

    The judged case is excluded by id; similarity ties break by ascending
    case id so rankings are reproducible across runs and platforms.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if judged.id not in index.vectors:
        raise MissingVector(judged.id)
    query = index.vectors[judged.id]
    if query.dim != index.dim:
        raise DimensionMismatch(f"judged vector dim {query.dim} != index dim {index.dim}")
    scored = [
        (cosine_similarity(query, index.vectors[case.id]), case)
        for case in index.precedents
        if case.id != judged.id
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1].id))
    items = tuple(
        RetrievedCase(case_id=case.id, text=case.text, similarity=sim, rank=rank, gold=case.gold)
        for rank, (sim, case) in enumerate(scored[:k], start=1)
    )
    return RetrievalResult(judged_case_id=judged.id, k=k, items=items)


def truncate_result(result: RetrievalResult, k: int) -> RetrievalResult:
    """The same result as if only the top k had been retrieved (prefix)."""
    if k > result.k:
        raise WindowTooLarge(f"cannot widen window from {result.k} to {k}")
    if k < 1:
        raise ValueError("k must be >= 1")
    return RetrievalResult(
        judged_case_id=result.judged_case_id, k=k, items=result.items[:k]
    )


def restrict_window(selection: PrecedentSelection, result: RetrievalResult, k: int) -> PrecedentSelection:
    """Drop verdicts outside a narrower window; verdicts within it are untouched."""
    if k > result.k:
        raise WindowTooLarge(f"window {k} exceeds the collected window {result.k}")
    if k < 1:
        raise ValueError("k must be >= 1")
    known = set(result.ranks())
    stray = set(selection.verdicts) - known
    if stray:
        raise WindowTooLarge(f"selection refers to ranks outside the result: {sorted(stray)}")
    return replace(
        selection,
        verdicts={rank: v for rank, v in selection.verdicts.items() if rank <= k},
        defaulted_ranks=tuple(r for r in selection.defaulted_ranks if r <= k),
    )


def save_results(
    path: str | Path,
    results: list[RetrievalResult],
    corpus_digest: str,
    model_id: str,
    k_max: int,
) -> None:
    """Persist retrieval results as JSONL with a leading metadata record."""
    meta = {"kind": "retrieval_meta", "corpus_hash": corpus_digest, "model_id": model_id, "k_max": k_max}
    rows = [meta] + [r.to_dict() for r in sorted(results, key=lambda r: r.judged_case_id)]
    storage.write_jsonl(path, rows)


def load_results(path: str | Path) -> tuple[dict, dict[str, RetrievalResult]]:
    """Load persisted results; returns (meta, results keyed by judged case id)."""
    rows = list(storage.read_jsonl(path))
    if not rows or rows[0].get("kind") != "retrieval_meta":
        raise ValueError(f"{path} is not a retrieval results file")
    meta = rows[0]
    results = {}
    for row in rows[1:]:
        result = RetrievalResult.from_dict(row)
        results[result.judged_case_id] = result
    return meta, results
