"""Deterministic synthetic corpora for tests, demos, and offline runs.

Generated text is nonsense-but-plausible comment prose drawn from fixed
word pools; every field is a pure function of the seed, so two calls with
the same arguments build identical corpora.
"""

from __future__ import annotations

import random

from .corpus import DOMAIN_KINDS, BINARY, Case, Corpus, Decision

_OPENERS = (
    "honestly", "look,", "imo", "wow,", "listen,", "ok so", "frankly",
    "not gonna lie,", "as usual,", "for the record,",
)
_SUBJECTS = (
    "this thread", "the new patch", "that take", "your comment", "the mods",
    "this community", "the last episode", "that policy", "this whole idea",
    "the update",
)
_VERBS = (
    "ruins", "saves", "ignores", "explains", "derails", "proves",
    "misreads", "rewards", "punishes", "changes",
)
_OBJECTS = (
    "everything good here", "the entire discussion", "my whole point",
    "the casual players", "the long-time readers", "any honest debate",
    "the original intent", "the weekly routine", "most of the lurkers",
    "the actual question",
)
_CLOSERS = (
    "and that is fine.", "so stop pretending otherwise.", "full stop.",
    "which nobody asked for.", "and I will die on this hill.",
    "but sure, downvote me.", "end of story.", "try to keep up.",
    "thanks for coming to my talk.", "make of that what you will.",
)


def _sentence(rng: random.Random) -> str:
    parts = [
        rng.choice(_OPENERS),
        rng.choice(_SUBJECTS),
        rng.choice(_VERBS),
        rng.choice(_OBJECTS),
        rng.choice(_CLOSERS),
    ]
    return " ".join(parts)


def synthetic_corpus(
    domain: str,
    n_cases: int,
    n_groups: int = 1,
    seed: int = 0,
    rater_groups: tuple[str, ...] = (),
    raters_per_group: int = 3,
) -> Corpus:
    """Build a deterministic corpus of n_cases for the domain.

    Groups are assigned round-robin. When rater_groups is non-empty each
    case also carries raters_per_group raw ratings per rater group (for
    controversy scoring); gold labels are sampled independently.
    """
    if domain not in DOMAIN_KINDS:
        raise ValueError(f"unknown domain {domain!r}")
    rng = random.Random(seed)
    kind = DOMAIN_KINDS[domain]
    cases = []
    for i in range(n_cases):
        text = _sentence(rng)
        if rng.random() < 0.4:
            text += " " + _sentence(rng)
        if kind == BINARY:
            gold = Decision.keep() if rng.random() < 0.5 else Decision.remove()
        else:
            gold = Decision.rating(rng.randint(1, 5))
        raw_ratings = None
        if rater_groups:
            raw_ratings = tuple(
                (group, rng.randint(1, 5))
                for group in rater_groups
                for _ in range(raters_per_group)
            )
        cases.append(
            Case(
                id=f"{domain}-{i:05d}",
                text=text,
                group_id=f"g{i % n_groups}",
                gold=gold,
                raw_ratings=raw_ratings,
            )
        )
    return Corpus(domain, cases)
