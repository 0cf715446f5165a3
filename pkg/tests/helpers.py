"""Shared builders for randomized test inputs."""

from __future__ import annotations

import random

from clg.corpus import Decision
from clg.retrieval import PrecedentSelection, RetrievalResult, RetrievedCase, Verdict


def random_gold(rng: random.Random, kind: str) -> Decision:
    if kind == "binary":
        return Decision.keep() if rng.random() < 0.5 else Decision.remove()
    return Decision.rating(rng.randint(1, 5))


def random_window(rng: random.Random, k: int, kind: str, judged_id: str = "q") -> RetrievalResult:
    """A retrieval result with coarse similarities so ties actually occur."""
    drawn = []
    ids = rng.sample(range(1000), k)
    for i in ids:
        drawn.append((f"p{i:03d}", round(rng.random(), 1), random_gold(rng, kind)))
    drawn.sort(key=lambda t: (-t[1], t[0]))
    items = tuple(
        RetrievedCase(case_id=cid, text=f"text of {cid}", similarity=sim, rank=rank, gold=gold)
        for rank, (cid, sim, gold) in enumerate(drawn, start=1)
    )
    return RetrievalResult(judged_case_id=judged_id, k=k, items=items)


def selection_from_flags(
    result: RetrievalResult, flags: list[bool], agent_id: str = "t"
) -> PrecedentSelection:
    verdicts = {
        item.rank: Verdict.PRECEDENT if keep else Verdict.DOES_NOT_APPLY
        for item, keep in zip(result.items, flags)
    }
    return PrecedentSelection(
        judged_case_id=result.judged_case_id, agent_id=agent_id, verdicts=verdicts
    )


def as_plain(result: RetrievalResult) -> list[tuple[str, float, object]]:
    """The oracle-side view of a window: (case_id, similarity, raw gold)."""
    return [(item.case_id, item.similarity, item.gold.to_raw()) for item in result.items]
