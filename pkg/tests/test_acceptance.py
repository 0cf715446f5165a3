"""End-to-end gates for the package.

Each test pins one promised behavior: exact agreement between synthesize
and a brute-force second implementation, the strategy identities that make
the mock agents meaningful, oracle dominance over plain nearest-neighbour
voting, window restriction as a faithful simulation of smaller retrievals,
fixed-point metric values, byte-identical same-seed pipeline runs, and
byte-exact prompt rendering against the frozen golden files.
"""

from __future__ import annotations

import itertools
import random
import time
from pathlib import Path

import pytest

from clg.agents import GoldMatchingAgent, run_case_agent
from clg.cli import dispatch
from clg.corpus import split_and_batch
from clg.embedding import FakeEmbeddingProvider, embed_corpus
from clg.evaluation import (
    SweepInputs,
    accuracy,
    categories_for,
    fleiss_kappa,
    paired_t_test,
    run_sweep,
)
from clg.corpus import BINARY
from clg.prompts import (
    MOD_CASE_TEMPLATE,
    MOD_RULE_TEMPLATE,
    TOXICITY_CASE_TEMPLATE,
    TOXICITY_RULE_TEMPLATE,
)
from clg.retrieval import PrecedentSelection, build_index, restrict_window, retrieve, truncate_result
from clg.storage import save_corpus
from clg.synthesis import knn_decision, synthesize
from clg.synthetic import synthetic_corpus

from helpers import as_plain, random_window, selection_from_flags
from oracles import brute_force_decide

K_SET = (1, 3, 5, 10, 15)


# --- synthesis equals brute force ------------------------------------------------


def test_synthesize_matches_brute_force_on_all_assignments():
    start = time.monotonic()
    rng = random.Random(99)

    # every verdict assignment for small windows
    for i in range(200):
        kind = "binary" if i % 2 == 0 else "ordinal"
        k = 1 + i % 5
        result = random_window(rng, k, kind)
        plain = as_plain(result)
        for bits in itertools.product((False, True), repeat=k):
            decided = synthesize(selection_from_flags(result, list(bits)), result)
            value, supporting, tie_broken, fallback = brute_force_decide(plain, list(bits))
            assert decided.value.to_raw() == value
            assert list(decided.supporting) == supporting
            assert decided.tie_broken == tie_broken
            assert decided.fallback_used == fallback

    # random assignments at the widest window
    for i in range(1000):
        kind = "binary" if i % 2 == 0 else "ordinal"
        result = random_window(rng, 15, kind)
        flags = [rng.random() < 0.5 for _ in range(15)]
        decided = synthesize(selection_from_flags(result, flags), result)
        value, supporting, tie_broken, fallback = brute_force_decide(as_plain(result), flags)
        assert decided.value.to_raw() == value
        assert list(decided.supporting) == supporting
        assert decided.tie_broken == tie_broken
        assert decided.fallback_used == fallback

    assert time.monotonic() - start < 60


def test_all_precedent_verdicts_reduce_to_knn():
    rng = random.Random(98)
    for _ in range(1000):
        kind = rng.choice(["binary", "ordinal"])
        result = random_window(rng, rng.randint(1, 15), kind)
        selection = selection_from_flags(result, [True] * len(result.items))
        via_selection = synthesize(selection, result)
        via_knn = knn_decision(result)
        assert via_selection.value == via_knn.value
        assert via_selection.supporting == via_knn.supporting
        assert via_selection.tie_broken == via_knn.tie_broken


# --- pipeline identities over synthetic corpora -----------------------------------


def build_pipeline_report(seed: int):
    """Corpus -> split -> embed -> retrieve -> gold-matching selections -> sweep."""
    domain = "mod" if seed % 2 == 0 else "toxicity"
    corpus = synthetic_corpus(domain, 200, n_groups=2, seed=seed)
    split = split_and_batch(corpus, seed=seed, batch_size=10)
    vectors = embed_corpus(corpus, "fake-embedder", FakeEmbeddingProvider())
    index = build_index(corpus.subset(split.precedent_ids), vectors)
    results = {cid: retrieve(index, corpus.by_id[cid], 15) for cid in split.evaluation_ids}
    agent = GoldMatchingAgent()
    selections = []
    for batch in split.batches:
        selections += run_case_agent(batch, corpus, list(results.values()), agent)
    inputs = SweepInputs(corpus=corpus, results=results, selections=selections)
    return run_sweep(inputs, ("CASE", "KNN", "ORACLE"), K_SET)


@pytest.fixture(scope="module")
def pipeline_reports():
    return [build_pipeline_report(seed) for seed in range(20)]


def test_gold_matching_pipeline_equals_oracle(pipeline_reports):
    for report in pipeline_reports:
        by_key = {(r.group_id, r.kind, r.k): r for r in report.rows}
        for (group, kind, k), row in by_key.items():
            if kind != "CASE":
                continue
            oracle_row = by_key[(group, "ORACLE", k)]
            assert row.accuracy == oracle_row.accuracy  # exact, no tolerance
            assert row.standard_error == oracle_row.standard_error
            assert row.n == oracle_row.n


def test_oracle_dominates_knn_everywhere(pipeline_reports):
    violations = []
    for i, report in enumerate(pipeline_reports):
        by_key = {(r.group_id, r.kind, r.k): r for r in report.rows}
        for (group, kind, k), row in by_key.items():
            if kind != "KNN":
                continue
            oracle_row = by_key[(group, "ORACLE", k)]
            if oracle_row.accuracy < row.accuracy:
                violations.append((i, group, k))
    assert violations == []


# --- window restriction simulates smaller retrievals --------------------------------


def test_restrict_then_synthesize_equals_direct_synthesis():
    rng = random.Random(97)
    for _ in range(200):
        kind = rng.choice(["binary", "ordinal"])
        result = random_window(rng, 15, kind)
        flags = [rng.random() < 0.5 for _ in range(15)]
        selection = selection_from_flags(result, flags)
        for k in (1, 3, 5, 10):
            window = truncate_result(result, k)
            restricted = restrict_window(selection, result, k)
            direct = PrecedentSelection(
                judged_case_id=selection.judged_case_id,
                agent_id=selection.agent_id,
                verdicts={r: v for r, v in selection.verdicts.items() if r <= k},
            )
            assert synthesize(restricted, window) == synthesize(direct, window)


# --- metric fixed points --------------------------------------------------------------


def test_metric_fixed_points():
    keep, remove = categories_for(BINARY)

    perfect = [[keep, keep, keep], [remove, remove, remove], [keep, keep, keep]]
    assert fleiss_kappa(perfect, (keep, remove)) == pytest.approx(1.0, abs=1e-12)

    split_votes = [[keep, keep, remove], [remove, remove, keep]]
    assert fleiss_kappa(split_votes, (keep, remove)) == pytest.approx(-1 / 3, abs=1e-9)

    t, p = paired_t_test([1, 1, 0], [0, 1, 0])
    assert t == pytest.approx(1.0, abs=1e-12)
    assert p == pytest.approx(0.423, abs=0.001)

    decisions = [keep] * 9 + [remove]
    assert accuracy(decisions, [keep] * 10) == pytest.approx((0.9, 0.1), abs=1e-12)


# --- same-seed pipeline runs are byte-identical ------------------------------------------


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(path.relative_to(root)): path.read_bytes()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }


def test_same_seed_runs_are_byte_identical(tmp_path):
    start = time.monotonic()
    raw = tmp_path / "raw.jsonl"
    save_corpus(synthetic_corpus("mod", 60, n_groups=2, seed=17), raw)

    snapshots = []
    for name in ("first", "second"):
        work = str(tmp_path / name)
        steps = [
            ["ingest", "--work", work, "--input", str(raw), "--seed", "17", "--batch-size", "10"],
            ["embed", "--work", work],
            ["retrieve", "--work", work, "--k-max", "15"],
            ["run", "--work", work, "--condition", "case", "--agent", "llm"],
            ["run", "--work", work, "--condition", "case", "--agent", "mock-gold"],
            ["run", "--work", work, "--condition", "rule", "--agent", "mock"],
            [
                "evaluate",
                "--work",
                work,
                "--k",
                "1,3,5,10,15",
                "--conditions",
                "case,rule,knn,oracle",
            ],
        ]
        for argv in steps:
            assert dispatch(argv) == 0, argv
        snapshots.append(
            {
                "report": tree_bytes(Path(work) / "report"),
                "runs": tree_bytes(Path(work) / "runs"),
                "retrieval": (Path(work) / "retrieval.jsonl").read_bytes(),
            }
        )

    assert snapshots[0]["report"].keys() == snapshots[1]["report"].keys() != set()
    assert snapshots[0] == snapshots[1]
    assert time.monotonic() - start < 300


# --- prompt fidelity -----------------------------------------------------------------------


GOLDEN = Path(__file__).parent / "golden"


def test_rendered_prompts_match_golden_files_byte_for_byte():
    case_fields = {
        "input": "You're all a bunch of clowns and this thread proves it.",
        "precedent": "Honestly everyone here is an idiot and should quit.",
        "decision": "remove",
    }
    rule_fields = {
        "instructions": "1. Be respectful to other members.\n2. No advertising or self-promotion.",
        "input": "You're all a bunch of clowns and this thread proves it.",
    }
    pairs = [
        (MOD_CASE_TEMPLATE.system.encode(), "mod_case_system.txt"),
        (MOD_RULE_TEMPLATE.system.encode(), "mod_rule_system.txt"),
        (TOXICITY_CASE_TEMPLATE.system.encode(), "toxicity_case_system.txt"),
        (TOXICITY_RULE_TEMPLATE.system.encode(), "toxicity_rule_system.txt"),
        (MOD_CASE_TEMPLATE.render(**case_fields).encode(), "mod_case_item.txt"),
        (MOD_RULE_TEMPLATE.render(**rule_fields).encode(), "rule_item.txt"),
        (TOXICITY_RULE_TEMPLATE.render(**rule_fields).encode(), "rule_item.txt"),
    ]
    for rendered, name in pairs:
        assert rendered == (GOLDEN / name).read_bytes(), name
