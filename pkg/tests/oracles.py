"""Independent reference implementations used only to cross-check the package.

Everything here is written from the decision rules directly, against plain
tuples and lists — no imports from the package under test — so agreement
between these and the real implementations is a meaningful check, not a
tautology.
"""

from __future__ import annotations

import statistics


def brute_force_decide(
    items: list[tuple[str, float, object]], selected: list[bool]
) -> tuple[object, list[str], bool, bool]:
    """Reference synthesis over a retrieved window.

    items: (case_id, similarity, gold) in window order (best first).
    selected: aligned flags marking which items count as precedents.
    Returns (value, supporting_ids, tie_broken, fallback_used).
    """
    pool = [item for item, keep in zip(items, selected) if keep]
    fallback = not pool
    if fallback:
        pool = list(items)

    seen_values: list[object] = []
    for _, _, gold in pool:
        if gold not in seen_values:
            seen_values.append(gold)
    best_count = 0
    for value in seen_values:
        count = sum(1 for _, _, gold in pool if gold == value)
        if count > best_count:
            best_count = count
    tied = [v for v in seen_values if sum(1 for _, _, g in pool if g == v) == best_count]

    supporting = [cid for cid, _, _ in pool]
    if len(tied) == 1:
        return tied[0], supporting, False, fallback

    best = None
    for cid, sim, gold in pool:
        if gold not in tied:
            continue
        if best is None or sim > best[1] or (sim == best[1] and cid < best[0]):
            best = (cid, sim, gold)
    return best[2], supporting, True, fallback


def brute_force_knn(items: list[tuple[str, float, object]]):
    """kNN is synthesis with everything selected."""
    return brute_force_decide(items, [True] * len(items))


def fleiss_kappa_pairwise(matrix: list[list[object]], categories: list[object]) -> float | None:
    """Fleiss kappa via explicit agreeing-pair counting; None when undefined."""
    n_items = len(matrix)
    n_raters = len(matrix[0])
    per_item = []
    for row in matrix:
        agree = 0
        for i in range(n_raters):
            for j in range(n_raters):
                if i != j and row[i] == row[j]:
                    agree += 1
        per_item.append(agree / (n_raters * (n_raters - 1)))
    observed = sum(per_item) / n_items
    totals = {c: 0 for c in categories}
    for row in matrix:
        for label in row:
            totals[label] += 1
    grand = n_items * n_raters
    expected = sum((t / grand) ** 2 for t in totals.values())
    if expected == 1.0:
        return None
    return (observed - expected) / (1.0 - expected)


def controversy_reference(ratings_by_group: dict[str, list[int]]) -> float:
    """Between-group std of means minus mean within-group std (population stds)."""
    means = [statistics.fmean(v) for v in ratings_by_group.values()]
    within = [statistics.pstdev(v) for v in ratings_by_group.values()]
    return statistics.pstdev(means) - statistics.fmean(within)
