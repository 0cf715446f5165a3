"""Alignment metrics and the retrieval-window sweep.

Scores decision conditions against group gold labels: exact-match
accuracy with standard error, two-sided paired t-tests on per-case
correctness, and Fleiss kappa agreement across annotators. The sweep
derives decisions for every requested condition at every window size k
from persisted artifacts (retrieval results, precedent selections, rule
decisions) and emits a machine-readable report plus per-k CSVs.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from scipy.special import betainc

from .agents import RuleDecisionRecord
from .corpus import BINARY, ORDINAL_LEVELS, Case, Corpus, Decision
from .errors import LengthMismatch, MissingRuns, RaggedMatrix, UndefinedKappa, VariantMismatch
from .retrieval import PrecedentSelection, RetrievalResult, restrict_window, truncate_result
from .storage import write_json
from .synthesis import knn_decision, oracle_decision, synthesize

CONDITION_KINDS = ("CASE", "RULE", "KNN", "ORACLE", "HUMAN_EXAMPLE")
_K_DEPENDENT = {"CASE", "KNN", "ORACLE"}


# --- metrics -----------------------------------------------------------------


def _check_pairs(decisions: Sequence[Decision], gold: Sequence[Decision]) -> None:
    if len(decisions) != len(gold) or not decisions:
        raise LengthMismatch(f"got {len(decisions)} decisions vs {len(gold)} gold labels")
    for d, g in zip(decisions, gold):
        if d.kind != g.kind:
            raise VariantMismatch(f"cannot score a {d.kind} decision against {g.kind} gold")


def accuracy(decisions: Sequence[Decision], gold: Sequence[Decision]) -> tuple[float, float]:
    """Exact-match accuracy and its standard error.

    The standard error is the sample (n-1) standard deviation of the
    per-case 0/1 indicators divided by sqrt(n); 0.0 when n == 1.
    """
    _check_pairs(decisions, gold)
    indicators = [1.0 if d == g else 0.0 for d, g in zip(decisions, gold)]
    n = len(indicators)
    acc = sum(indicators) / n
    se = 0.0 if n == 1 else statistics.stdev(indicators) / math.sqrt(n)
    return acc, se


def tolerant_accuracy(
    decisions: Sequence[Decision], gold: Sequence[Decision], tolerance: int = 1
) -> float:
    """Auxiliary ordinal accuracy counting |decision - gold| <= tolerance as correct.

    Exact match remains the primary metric; binary decisions score exactly
    either way.
    """
    _check_pairs(decisions, gold)
    hits = 0
    for d, g in zip(decisions, gold):
        if d.kind == BINARY:
            hits += d == g
        else:
            hits += abs(d.value - g.value) <= tolerance
    return hits / len(decisions)


def paired_t_test(correct_a: Sequence[float], correct_b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test on per-case correctness.

    Returns (t, p). All-zero differences give (0.0, 1.0); zero variance
    with a nonzero mean gives (+/-inf, 0.0). The p-value comes from the
    regularized incomplete beta function: p = I_{df/(df+t^2)}(df/2, 1/2).
    """
    if len(correct_a) != len(correct_b) or len(correct_a) < 2:
        raise LengthMismatch(
            f"need two equal-length arrays of >= 2 pairs, got {len(correct_a)} and {len(correct_b)}"
        )
    diffs = [a - b for a, b in zip(correct_a, correct_b)]
    n = len(diffs)
    mean = sum(diffs) / n
    sd = statistics.stdev(diffs)
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return t, p


def categories_for(kind: str) -> tuple[Decision, ...]:
    """The fixed category set agreement is computed over, per decision kind."""
    if kind == BINARY:
        return (Decision.keep(), Decision.remove())
    return tuple(Decision.rating(level) for level in ORDINAL_LEVELS)


def fleiss_kappa(labels: Sequence[Sequence[object]], categories: Sequence[object]) -> float:
    """Fleiss kappa for a cases x annotators label matrix over a fixed category set.

    The category set is the domain's full label space, not just the
    observed labels. Raises UndefinedKappa when expected agreement is 1
    (every annotation the same single category), where the statistic has
    no value.
    """
    if len(labels) < 2:
        raise ValueError(f"need >= 2 cases, got {len(labels)}")
    n = len(labels[0])
    if n < 2:
        raise ValueError(f"need >= 2 annotators, got {n}")
    index = {category: j for j, category in enumerate(categories)}
    counts = []
    for row in labels:
        if len(row) != n:
            raise RaggedMatrix(f"rows have {n} and {len(row)} annotations")
        tally = [0] * len(categories)
        for label in row:
            if label not in index:
                raise ValueError(f"label {label!r} not in category set")
            tally[index[label]] += 1
        counts.append(tally)
    total = len(counts) * n
    p_j = [sum(row[j] for row in counts) / total for j in range(len(categories))]
    p_e = sum(p * p for p in p_j)
    if p_e == 1.0:
        raise UndefinedKappa("expected agreement is 1; kappa has no value")
    p_i = [(sum(c * c for c in row) - n) / (n * (n - 1)) for row in counts]
    p_bar = sum(p_i) / len(p_i)
    return (p_bar - p_e) / (1 - p_e)


# --- sweep -------------------------------------------------------------------


@dataclass(frozen=True)
class SweepInputs:
    """Persisted artifacts the sweep is a pure function of."""

    corpus: Corpus
    results: Mapping[str, RetrievalResult]  # judged case id -> result at k_max
    selections: Sequence[PrecedentSelection] = ()
    rule_records: Sequence[RuleDecisionRecord] = ()


@dataclass(frozen=True)
class AccuracyRow:
    group_id: str
    kind: str
    k: int
    label: str
    n: int
    accuracy: float
    standard_error: float
    accuracy_within_1: float | None

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "kind": self.kind,
            "k": self.k,
            "label": self.label,
            "n": self.n,
            "accuracy": self.accuracy,
            "standard_error": self.standard_error,
            "accuracy_within_1": self.accuracy_within_1,
        }


@dataclass(frozen=True)
class PairedTestRow:
    group_id: str
    k: int
    condition_a: str
    condition_b: str
    t: float
    p: float

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "k": self.k,
            "condition_a": self.condition_a,
            "condition_b": self.condition_b,
            "t": self.t,
            "p": self.p,
        }


@dataclass(frozen=True)
class AgreementRow:
    """Fleiss kappa across annotators; None when fewer than two annotators
    per case, counts are uneven, or the statistic is undefined."""

    group_id: str
    kind: str
    k: int
    n_annotators: int | None
    kappa: float | None
    kappa_final: float | None

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "kind": self.kind,
            "k": self.k,
            "n_annotators": self.n_annotators,
            "kappa": self.kappa,
            "kappa_final": self.kappa_final,
        }


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[AccuracyRow, ...]
    tests: tuple[PairedTestRow, ...]
    agreement: tuple[AgreementRow, ...]
    k_set: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "k_set": list(self.k_set),
            "rows": [r.to_dict() for r in self.rows],
            "tests": [t.to_dict() for t in self.tests],
            "agreement": [a.to_dict() for a in self.agreement],
        }


def _condition_label(kind: str, k: int) -> str:
    return f"{kind}({k})" if kind in _K_DEPENDENT else kind


def _decisions_for(
    kind: str,
    k: int,
    cases: Sequence[Case],
    inputs: SweepInputs,
    selections_by_case: Mapping[str, list[PrecedentSelection]],
    rules_by_case: Mapping[str, list[RuleDecisionRecord]],
) -> dict[str, list[tuple[str, Decision]]]:
    """Per-case (agent_id, decision) pairs for one condition at window k."""
    out: dict[str, list[tuple[str, Decision]]] = {}
    for case in cases:
        result = inputs.results[case.id]
        if kind == "KNN":
            out[case.id] = [("knn", knn_decision(truncate_result(result, k)).value)]
        elif kind == "ORACLE":
            out[case.id] = [("oracle", oracle_decision(truncate_result(result, k), case.gold).value)]
        elif kind == "CASE":
            selections = selections_by_case.get(case.id)
            if not selections:
                raise MissingRuns("CASE", f"case {case.id!r} has no precedent selections")
            window = truncate_result(result, k)
            out[case.id] = [
                (s.agent_id, synthesize(restrict_window(s, result, k), window).value)
                for s in sorted(selections, key=lambda s: s.agent_id)
            ]
        elif kind == "RULE":
            records = rules_by_case.get(case.id)
            if not records:
                raise MissingRuns("RULE", f"case {case.id!r} has no rule decisions")
            out[case.id] = [
                (r.agent_id, r.decision) for r in sorted(records, key=lambda r: r.agent_id)
            ]
        elif kind == "HUMAN_EXAMPLE":
            finals = [
                (s.agent_id, s.final_unconstrained)
                for s in sorted(selections_by_case.get(case.id, []), key=lambda s: s.agent_id)
                if s.final_unconstrained is not None
            ]
            if not finals:
                raise MissingRuns("HUMAN_EXAMPLE", f"case {case.id!r} has no final decisions")
            out[case.id] = finals
        else:
            raise ValueError(f"unknown condition kind {kind!r}")
    return out


def _kappa_or_none(labels: list[list[Decision]], categories: Sequence[Decision]) -> float | None:
    if len(labels) < 2:
        return None
    widths = {len(row) for row in labels}
    if len(widths) != 1 or widths == {1} or 0 in widths:
        return None
    try:
        return fleiss_kappa(labels, categories)
    except UndefinedKappa:
        return None


def run_sweep(
    inputs: SweepInputs, conditions: Sequence[str], k_set: Sequence[int]
) -> EvalReport:
    """Score every requested condition at every k, per group.

    Window-independent conditions (RULE, HUMAN_EXAMPLE) are still emitted
    once per k with identical numbers so the per-k CSV is dense for
    plotting. CASE decisions at k come from restricting each persisted
    selection to the top-k window and re-synthesizing.
    """
    for kind in conditions:
        if kind not in CONDITION_KINDS:
            raise ValueError(f"unknown condition kind {kind!r}; expected one of {CONDITION_KINDS}")
    judged = [inputs.corpus.by_id[cid] for cid in sorted(inputs.results)]
    if not judged:
        raise MissingRuns("all", "no retrieval results to evaluate")
    selections_by_case: dict[str, list[PrecedentSelection]] = {}
    for selection in inputs.selections:
        selections_by_case.setdefault(selection.judged_case_id, []).append(selection)
    rules_by_case: dict[str, list[RuleDecisionRecord]] = {}
    for record in inputs.rule_records:
        rules_by_case.setdefault(record.judged_case_id, []).append(record)

    groups = sorted({case.group_id for case in judged})
    ordinal = judged[0].gold.kind != BINARY
    categories = categories_for(judged[0].gold.kind)

    rows: list[AccuracyRow] = []
    tests: list[PairedTestRow] = []
    agreement: list[AgreementRow] = []
    for group_id in groups:
        cases = [case for case in judged if case.group_id == group_id]
        for k in sorted(k_set):
            per_kind: dict[str, dict[str, list[tuple[str, Decision]]]] = {}
            for kind in conditions:
                per_kind[kind] = _decisions_for(
                    kind, k, cases, inputs, selections_by_case, rules_by_case
                )
            for kind in conditions:
                decided = per_kind[kind]
                decisions = [d for case in cases for _, d in decided[case.id]]
                gold = [case.gold for case in cases for _ in decided[case.id]]
                acc, se = accuracy(decisions, gold)
                within = tolerant_accuracy(decisions, gold) if ordinal else None
                rows.append(
                    AccuracyRow(
                        group_id=group_id,
                        kind=kind,
                        k=k,
                        label=_condition_label(kind, k),
                        n=len(decisions),
                        accuracy=acc,
                        standard_error=se,
                        accuracy_within_1=within,
                    )
                )
                labels = [[d for _, d in decided[case.id]] for case in cases]
                finals: list[list[Decision]] = []
                if kind == "CASE":
                    finals = [
                        [
                            s.final_unconstrained
                            for s in sorted(
                                selections_by_case.get(case.id, []), key=lambda s: s.agent_id
                            )
                            if s.final_unconstrained is not None
                        ]
                        for case in cases
                    ]
                n_annotators = len(labels[0]) if len({len(r) for r in labels}) == 1 else None
                agreement.append(
                    AgreementRow(
                        group_id=group_id,
                        kind=kind,
                        k=k,
                        n_annotators=n_annotators,
                        kappa=_kappa_or_none(labels, categories),
                        kappa_final=_kappa_or_none(finals, categories) if kind == "CASE" else None,
                    )
                )
            if len(cases) >= 2:
                for i, kind_a in enumerate(conditions):
                    for kind_b in conditions[i + 1 :]:
                        correct_a = _per_case_correctness(cases, per_kind[kind_a])
                        correct_b = _per_case_correctness(cases, per_kind[kind_b])
                        t, p = paired_t_test(correct_a, correct_b)
                        tests.append(
                            PairedTestRow(
                                group_id=group_id,
                                k=k,
                                condition_a=_condition_label(kind_a, k),
                                condition_b=_condition_label(kind_b, k),
                                t=t,
                                p=p,
                            )
                        )
    return EvalReport(
        rows=tuple(rows), tests=tuple(tests), agreement=tuple(agreement), k_set=tuple(sorted(k_set))
    )


def _per_case_correctness(
    cases: Sequence[Case], decided: Mapping[str, list[tuple[str, Decision]]]
) -> list[float]:
    """Mean exact-match correctness per case (over that case's annotators)."""
    out = []
    for case in cases:
        pairs = decided[case.id]
        out.append(sum(1.0 for _, d in pairs if d == case.gold) / len(pairs))
    return out


# --- report emission ---------------------------------------------------------


def write_report(report: EvalReport, out_dir: str | Path) -> None:
    """Emit report.json plus accuracy/tests/agreement CSVs under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report.to_dict())
    _write_csv(
        out / "accuracy.csv",
        ["group_id", "kind", "k", "label", "n", "accuracy", "standard_error", "accuracy_within_1"],
        [r.to_dict() for r in report.rows],
    )
    _write_csv(
        out / "tests.csv",
        ["group_id", "k", "condition_a", "condition_b", "t", "p"],
        [t.to_dict() for t in report.tests],
    )
    _write_csv(
        out / "agreement.csv",
        ["group_id", "kind", "k", "n_annotators", "kappa", "kappa_final"],
        [a.to_dict() for a in report.agreement],
    )


def _write_csv(path: Path, columns: list[str], rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
