"""Alignment metrics against hand-worked examples and independent oracles,
plus the retrieval-window sweep over synthetic artifacts."""

from __future__ import annotations

import json
import math
import random

import pytest
import scipy.stats

from clg.agents import AllPrecedentAgent, GoldMatchingAgent, RuleDecisionRecord
from clg.corpus import BINARY, ORDINAL, Case, Corpus, Decision
from clg.errors import LengthMismatch, MissingRuns, RaggedMatrix, UndefinedKappa, VariantMismatch
from clg.evaluation import (
    SweepInputs,
    accuracy,
    categories_for,
    fleiss_kappa,
    paired_t_test,
    run_sweep,
    tolerant_accuracy,
    write_report,
)
from clg.retrieval import PrecedentSelection, Verdict

from helpers import random_window, selection_from_flags
from oracles import fleiss_kappa_pairwise

KEEP = Decision(BINARY, "keep")
REMOVE = Decision(BINARY, "remove")


def ratings(*values: int) -> list[Decision]:
    return [Decision(ORDINAL, v) for v in values]


# --- accuracy ------------------------------------------------------------------


def test_accuracy_nine_of_ten():
    decisions = [KEEP] * 9 + [REMOVE]
    gold = [KEEP] * 10
    acc, se = accuracy(decisions, gold)
    assert acc == pytest.approx(0.9, abs=1e-12)
    assert se == pytest.approx(0.1, abs=1e-12)


def test_accuracy_edges():
    assert accuracy([KEEP], [KEEP]) == (1.0, 0.0)  # n == 1: no spread estimate
    assert accuracy([KEEP, REMOVE], [KEEP, REMOVE]) == (1.0, 0.0)
    acc, se = accuracy([KEEP, KEEP], [KEEP, REMOVE])
    assert acc == 0.5
    with pytest.raises(LengthMismatch):
        accuracy([KEEP], [KEEP, KEEP])
    with pytest.raises(LengthMismatch):
        accuracy([], [])
    with pytest.raises(VariantMismatch):
        accuracy([KEEP], ratings(3))


def test_tolerant_accuracy():
    assert tolerant_accuracy(ratings(2, 5, 1), ratings(3, 3, 1)) == pytest.approx(2 / 3)
    assert tolerant_accuracy(ratings(2), ratings(2), tolerance=0) == 1.0
    # binary stays exact-match regardless of tolerance
    assert tolerant_accuracy([KEEP, REMOVE], [REMOVE, REMOVE]) == 0.5


# --- paired t-test ---------------------------------------------------------------


def test_paired_t_test_documented_example():
    t, p = paired_t_test([1, 1, 0], [0, 1, 0])
    assert t == pytest.approx(1.0, abs=1e-12)
    assert p == pytest.approx(0.423, abs=0.001)


def test_paired_t_test_degenerate_inputs():
    assert paired_t_test([1, 0, 1], [1, 0, 1]) == (0.0, 1.0)
    t, p = paired_t_test([1, 1, 1], [0, 0, 0])
    assert t == math.inf and p == 0.0
    t, p = paired_t_test([0, 0], [1, 1])
    assert t == -math.inf and p == 0.0
    with pytest.raises(LengthMismatch):
        paired_t_test([1], [0])
    with pytest.raises(LengthMismatch):
        paired_t_test([1, 0], [1])


def test_paired_t_test_matches_scipy_on_random_arrays():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(2, 40)
        a = [rng.random() for _ in range(n)]
        b = [rng.random() for _ in range(n)]
        t, p = paired_t_test(a, b)
        ref = scipy.stats.ttest_rel(a, b)
        assert t == pytest.approx(ref.statistic, abs=1e-10)
        assert p == pytest.approx(ref.pvalue, abs=1e-10)


# --- fleiss kappa ---------------------------------------------------------------


def test_kappa_perfect_agreement_with_variation():
    labels = [[KEEP, KEEP, KEEP], [REMOVE, REMOVE, REMOVE], [KEEP, KEEP, KEEP]]
    assert fleiss_kappa(labels, categories_for(BINARY)) == pytest.approx(1.0, abs=1e-12)


def test_kappa_documented_three_by_two():
    labels = [[KEEP, KEEP, REMOVE], [REMOVE, REMOVE, KEEP]]
    kappa = fleiss_kappa(labels, categories_for(BINARY))
    assert kappa == pytest.approx(-1 / 3, abs=1e-9)


def test_kappa_undefined_and_invalid():
    with pytest.raises(UndefinedKappa):
        fleiss_kappa([[KEEP, KEEP], [KEEP, KEEP]], categories_for(BINARY))
    with pytest.raises(ValueError):
        fleiss_kappa([[KEEP, KEEP]], categories_for(BINARY))  # one case
    with pytest.raises(ValueError):
        fleiss_kappa([[KEEP], [REMOVE]], categories_for(BINARY))  # one annotator
    with pytest.raises(RaggedMatrix):
        fleiss_kappa([[KEEP, KEEP], [REMOVE]], categories_for(BINARY))
    with pytest.raises(ValueError):
        fleiss_kappa([[KEEP, "?"], [KEEP, KEEP]], categories_for(BINARY))


def test_kappa_matches_pairwise_oracle_on_random_matrices():
    rng = random.Random(12)
    binary = list(categories_for(BINARY))
    ordinal = list(categories_for(ORDINAL))
    checked = 0
    for _ in range(1000):
        categories = binary if rng.random() < 0.5 else ordinal
        cases = rng.randint(2, 12)
        annotators = rng.randint(2, 6)
        matrix = [[rng.choice(categories) for _ in range(annotators)] for _ in range(cases)]
        expected = fleiss_kappa_pairwise(matrix, categories)
        if expected is None:
            with pytest.raises(UndefinedKappa):
                fleiss_kappa(matrix, categories)
        else:
            assert fleiss_kappa(matrix, categories) == pytest.approx(expected, abs=1e-12)
            checked += 1
    assert checked > 900  # undefined draws are rare


def test_categories_for():
    assert categories_for(BINARY) == (KEEP, REMOVE)
    assert categories_for(ORDINAL) == tuple(ratings(1, 2, 3, 4, 5))


# --- sweep -----------------------------------------------------------------------


def build_sweep_inputs(n_per_group: int = 6, k_max: int = 5, seed: int = 13):
    """Two groups of judged cases with two annotators per condition."""
    rng = random.Random(seed)
    cases, results, selections, rule_records = [], {}, [], []
    for g in range(2):
        for i in range(n_per_group):
            cid = f"g{g}-q{i}"
            gold = Decision(BINARY, rng.choice(["keep", "remove"]))
            case = Case(id=cid, text=f"text {cid}", group_id=f"g{g}", gold=gold)
            cases.append(case)
            result = random_window(rng, k_max, "binary", judged_id=cid)
            results[cid] = result
            for agent in (AllPrecedentAgent("ann-a"), GoldMatchingAgent("ann-b")):
                selection = agent.select(case, result)
                selection.final_unconstrained = Decision(BINARY, rng.choice(["keep", "remove"]))
                selections.append(selection)
            for agent_id in ("rule-a", "rule-b"):
                rule_records.append(
                    RuleDecisionRecord(
                        judged_case_id=cid,
                        agent_id=agent_id,
                        decision=Decision(BINARY, rng.choice(["keep", "remove"])),
                    )
                )
    corpus = Corpus("mod", cases)
    return SweepInputs(
        corpus=corpus, results=results, selections=selections, rule_records=rule_records
    )


def test_sweep_cardinality():
    inputs = build_sweep_inputs()
    report = run_sweep(inputs, ("CASE", "RULE", "KNN", "ORACLE"), (1, 2, 3, 4, 5))
    # 2 groups x 5 k x 4 conditions
    assert len(report.rows) == 40
    assert len(report.agreement) == 40
    # 6 condition pairs per (group, k)
    assert len(report.tests) == 2 * 5 * 6
    assert report.k_set == (1, 2, 3, 4, 5)
    labels = {row.label for row in report.rows}
    assert "CASE(3)" in labels and "RULE" in labels and "KNN(5)" in labels


def test_sweep_k_independent_conditions_repeat_identically():
    inputs = build_sweep_inputs()
    report = run_sweep(inputs, ("RULE", "HUMAN_EXAMPLE"), (1, 3, 5))
    for kind in ("RULE", "HUMAN_EXAMPLE"):
        for group in ("g0", "g1"):
            rows = [r for r in report.rows if r.kind == kind and r.group_id == group]
            assert len(rows) == 3
            assert len({(r.accuracy, r.standard_error, r.n) for r in rows}) == 1
            assert rows[0].label == kind


def test_sweep_all_precedent_equals_knn():
    inputs = build_sweep_inputs()
    only_all = SweepInputs(
        corpus=inputs.corpus,
        results=inputs.results,
        selections=[s for s in inputs.selections if s.agent_id == "ann-a"],
        rule_records=inputs.rule_records,
    )
    report = run_sweep(only_all, ("CASE", "KNN"), (1, 2, 3, 4, 5))
    for group in ("g0", "g1"):
        for k in (1, 2, 3, 4, 5):
            case_row = next(
                r for r in report.rows if (r.group_id, r.kind, r.k) == (group, "CASE", k)
            )
            knn_row = next(r for r in report.rows if (r.group_id, r.kind, r.k) == (group, "KNN", k))
            assert case_row.accuracy == knn_row.accuracy
            assert case_row.standard_error == knn_row.standard_error


def test_sweep_oracle_never_below_knn():
    for seed in range(5):
        inputs = build_sweep_inputs(seed=100 + seed)
        report = run_sweep(inputs, ("KNN", "ORACLE"), (1, 3, 5))
        for group in ("g0", "g1"):
            for k in (1, 3, 5):
                by_kind = {
                    r.kind: r for r in report.rows if r.group_id == group and r.k == k
                }
                assert by_kind["ORACLE"].accuracy >= by_kind["KNN"].accuracy


def test_sweep_agreement_rows():
    inputs = build_sweep_inputs()
    report = run_sweep(inputs, ("CASE", "RULE", "KNN"), (3,))
    by_kind = {(a.group_id, a.kind): a for a in report.agreement}
    for group in ("g0", "g1"):
        case_row = by_kind[(group, "CASE")]
        assert case_row.n_annotators == 2
        assert case_row.kappa is not None
        assert case_row.kappa_final is not None  # free decisions recorded alongside
        rule_row = by_kind[(group, "RULE")]
        assert rule_row.n_annotators == 2
        assert rule_row.kappa_final is None
        knn_row = by_kind[(group, "KNN")]
        assert knn_row.n_annotators == 1
        assert knn_row.kappa is None  # single annotator: agreement undefined


def test_sweep_missing_runs():
    inputs = build_sweep_inputs()
    no_selections = SweepInputs(
        corpus=inputs.corpus, results=inputs.results, rule_records=inputs.rule_records
    )
    with pytest.raises(MissingRuns) as err:
        run_sweep(no_selections, ("CASE",), (3,))
    assert err.value.condition == "CASE"
    no_rules = SweepInputs(
        corpus=inputs.corpus, results=inputs.results, selections=inputs.selections
    )
    with pytest.raises(MissingRuns):
        run_sweep(no_rules, ("RULE",), (3,))
    with pytest.raises(ValueError):
        run_sweep(inputs, ("NOT_A_CONDITION",), (3,))


def test_sweep_case_uses_restricted_windows():
    # a selection whose only precedent sits at rank 5 must lose it at k=3
    case = Case(id="q0", text="t", group_id="g0", gold=KEEP)
    other = Case(id="q1", text="t", group_id="g0", gold=KEEP)
    rng = random.Random(14)
    r0 = random_window(rng, 5, "binary", judged_id="q0")
    r1 = random_window(rng, 5, "binary", judged_id="q1")
    selections = [
        PrecedentSelection("q0", "ann", {i: Verdict.DOES_NOT_APPLY for i in range(1, 5)} | {5: Verdict.PRECEDENT}),
        PrecedentSelection("q1", "ann", {i: Verdict.PRECEDENT for i in range(1, 6)}),
    ]
    inputs = SweepInputs(
        corpus=Corpus("mod", [case, other]),
        results={"q0": r0, "q1": r1},
        selections=selections,
    )
    wide = run_sweep(inputs, ("CASE",), (5,)).rows[0]
    narrow = run_sweep(inputs, ("CASE",), (3,)).rows[0]
    # at k=5 q0 follows its rank-5 precedent; at k=3 it falls back to window consensus
    assert wide.n == narrow.n == 2
    from clg.synthesis import knn_decision, synthesize
    from clg.retrieval import restrict_window, truncate_result

    expected_narrow = synthesize(restrict_window(selections[0], r0, 3), truncate_result(r0, 3))
    assert expected_narrow.fallback_used
    assert expected_narrow.value == knn_decision(truncate_result(r0, 3)).value


def test_write_report(tmp_path):
    inputs = build_sweep_inputs(n_per_group=4)
    report = run_sweep(inputs, ("CASE", "KNN"), (1, 3))
    out = tmp_path / "report"
    write_report(report, out)
    data = json.loads((out / "report.json").read_text())
    assert data == report.to_dict()
    accuracy_lines = (out / "accuracy.csv").read_text().strip().splitlines()
    assert len(accuracy_lines) == 1 + len(report.rows)
    assert accuracy_lines[0].startswith("group_id,kind,k,label,n,accuracy")
    tests_lines = (out / "tests.csv").read_text().strip().splitlines()
    assert len(tests_lines) == 1 + len(report.tests)
    agreement_lines = (out / "agreement.csv").read_text().strip().splitlines()
    assert len(agreement_lines) == 1 + len(report.agreement)
