"""Deterministic decision synthesis from precedent verdicts.

The rule, applied to whichever candidate set is in force:

1. take the mode of the recorded decisions,
2. on a tied mode, adopt the decision of the tied candidate most similar
   to the judged case (second-order ties break by ascending case id),
3. if the agent selected no precedents at all, run 1-2 over the full
   retrieved window instead and mark the result as a fallback.

Two reference strategies are implemented as separate code paths rather
than thin wrappers, so tests can cross-check them against ``synthesize``:
``knn_decision`` (whole window counts as precedent) and ``oracle_decision``
(adopt the ground truth whenever it was retrieved, else kNN).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .corpus import Decision
from .errors import EmptyRetrieval, MissingVerdict
from .retrieval import PrecedentSelection, RetrievalResult, RetrievedCase, Verdict


@dataclass(frozen=True)
class SynthesizedDecision:
    """A derived decision plus the provenance needed to audit it."""

    value: Decision
    supporting: tuple[str, ...]
    tie_broken: bool
    fallback_used: bool

    def to_dict(self) -> dict:
        return {
            "value": self.value.to_raw(),
            "supporting": list(self.supporting),
            "tie_broken": self.tie_broken,
            "fallback_used": self.fallback_used,
        }


def _mode_with_nearest_tiebreak(items: tuple[RetrievedCase, ...]) -> tuple[Decision, bool]:
    counts = Counter(item.gold for item in items)
    top = max(counts.values())
    tied = {decision for decision, count in counts.items() if count == top}
    if len(tied) == 1:
        return next(iter(tied)), False
    nearest = min(
        (item for item in items if item.gold in tied),
        key=lambda item: (-item.similarity, item.case_id),
    )
    return nearest.gold, True


def synthesize(selection: PrecedentSelection, result: RetrievalResult) -> SynthesizedDecision:
    """Derive a decision from an agent's verdicts over a retrieval result.

    Every rank in the result must carry a verdict; a missing one is an
    incomplete annotation session, not an implicit rejection.
    """
    if not result.items:
        raise EmptyRetrieval(f"no retrieved cases for {result.judged_case_id!r}")
    ranks = result.ranks()
    for rank in ranks:
        if rank not in selection.verdicts:
            raise MissingVerdict(rank)
    stray = set(selection.verdicts) - set(ranks)
    if stray:
        raise ValueError(f"verdicts refer to ranks outside the result: {sorted(stray)}")

    chosen = tuple(item for item in result.items if selection.verdicts[item.rank] is Verdict.PRECEDENT)
    fallback = not chosen
    basis = result.items if fallback else chosen
    value, tie_broken = _mode_with_nearest_tiebreak(basis)
    return SynthesizedDecision(
        value=value,
        supporting=tuple(item.case_id for item in basis),
        tie_broken=tie_broken,
        fallback_used=fallback,
    )


def knn_decision(result: RetrievalResult) -> SynthesizedDecision:
    """Consensus over the entire retrieved window, no applicability filtering."""
    if not result.items:
        raise EmptyRetrieval(f"no retrieved cases for {result.judged_case_id!r}")
    counts: dict[Decision, int] = {}
    for item in result.items:
        counts[item.gold] = counts.get(item.gold, 0) + 1
    top = max(counts.values())
    tied = {decision for decision, count in counts.items() if count == top}
    if len(tied) == 1:
        value, tie_broken = tied.pop(), False
    else:
        nearest = None
        for item in result.items:
            if item.gold not in tied:
                continue
            if (
                nearest is None
                or item.similarity > nearest.similarity
                or (item.similarity == nearest.similarity and item.case_id < nearest.case_id)
            ):
                nearest = item
        value, tie_broken = nearest.gold, True
    return SynthesizedDecision(
        value=value,
        supporting=tuple(item.case_id for item in result.items),
        tie_broken=tie_broken,
        fallback_used=False,
    )


def oracle_decision(result: RetrievalResult, gold: Decision) -> SynthesizedDecision:
    """Best-achievable reference: adopt the ground truth if retrieved, else kNN."""
    if not result.items:
        raise EmptyRetrieval(f"no retrieved cases for {result.judged_case_id!r}")
    matches = tuple(item for item in result.items if item.gold == gold)
    if matches:
        return SynthesizedDecision(
            value=gold,
            supporting=tuple(item.case_id for item in matches),
            tie_broken=False,
            fallback_used=False,
        )
    return knn_decision(result)


def all_precedent_selection(result: RetrievalResult, agent_id: str) -> PrecedentSelection:
    """A selection marking every retrieved case as a precedent."""
    return PrecedentSelection(
        judged_case_id=result.judged_case_id,
        agent_id=agent_id,
        verdicts={rank: Verdict.PRECEDENT for rank in result.ranks()},
    )
