"""Command-line pipeline: ingest -> embed -> retrieve -> run -> evaluate -> serve.

Each subcommand reads and writes plain files under a workspace directory,
is idempotent over what it has already produced, and takes its settings
from an optional key=value config file with flags overriding file values.
A single --seed determines every randomized step end to end.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agents import (
    DEFAULT_CHAT_MODEL,
    AllPrecedentAgent,
    FakeChatProvider,
    GoldMatchingAgent,
    GoldRuleAgent,
    HttpChatProvider,
    LlmCaseAgent,
    LlmRuleAgent,
    RuleDecisionRecord,
    TranscriptWriter,
    load_rules,
    run_case_agent,
    run_rule_agent,
)
from .corpus import CorpusSplit, load_corpus, select_controversial, split_and_batch
from .embedding import (
    DEFAULT_EMBED_MODEL,
    EmbeddingCache,
    FakeEmbeddingProvider,
    HttpEmbeddingProvider,
    embed_corpus,
)
from .errors import ClgError, MissingRuns, UsageError
from .evaluation import CONDITION_KINDS, SweepInputs, run_sweep, write_report
from .retrieval import PrecedentSelection, build_index, load_results, retrieve, save_results
from .storage import corpus_hash, read_json, read_jsonl, save_corpus, write_json

DEFAULTS = {
    "domain": "mod",
    "seed": 0,
    "batch_size": 10,
    "k_max": 15,
    "k_set": [1, 3, 5, 10, 15],
    "embed_model": DEFAULT_EMBED_MODEL,
    "chat_model": DEFAULT_CHAT_MODEL,
    "provider": "fake",
    "base_url": "https://api.openai.com/v1",
    "quota": 3,
    "port": 8080,
    "conditions": ["CASE", "KNN", "ORACLE"],
}


def read_config(path: str | Path) -> dict:
    """Parse a flat key = value file; values are JSON when they parse, else strings."""
    out: dict = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{line_no}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value.strip("\"'")
    return out


class Settings:
    """Layered settings: flag > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self._flags = vars(args)
        self._config = read_config(args.config) if getattr(args, "config", None) else {}

    def get(self, key: str, default=None):
        flag = self._flags.get(key)
        if flag is not None:
            return flag
        if key in self._config:
            return self._config[key]
        return DEFAULTS.get(key, default)

    def k_set(self) -> list[int]:
        raw = self.get("k_set")
        if isinstance(raw, str):
            raw = [int(part) for part in raw.split(",") if part.strip()]
        k_max = int(self.get("k_max"))
        bad = [k for k in raw if not 1 <= k <= k_max]
        if bad:
            raise UsageError(f"k values {bad} outside 1..{k_max}")
        return sorted(raw)

    def conditions(self) -> list[str]:
        raw = self.get("conditions")
        if isinstance(raw, str):
            raw = [part.strip().upper() for part in raw.split(",") if part.strip()]
        for kind in raw:
            if kind not in CONDITION_KINDS:
                raise UsageError(f"unknown condition {kind!r}; expected one of {CONDITION_KINDS}")
        return list(raw)


# --- workspace layout ---------------------------------------------------------


def _work(settings: Settings) -> Path:
    work = settings.get("work")
    if not work:
        raise UsageError("--work directory is required")
    return Path(work)


def _load_workspace(work: Path):
    meta = read_json(work / "meta.json")
    corpus = load_corpus(work / "corpus.jsonl", meta["domain"])
    split = CorpusSplit.from_dict(read_json(work / "split.json"))
    return meta, corpus, split


def _embed_provider(settings: Settings):
    if settings.get("provider") == "http":
        return HttpEmbeddingProvider(base_url=settings.get("base_url"))
    return FakeEmbeddingProvider()


def _chat_provider(settings: Settings):
    if settings.get("provider") == "http":
        return HttpChatProvider(base_url=settings.get("base_url"))
    return FakeChatProvider()


# --- subcommands ----------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    settings = Settings(args)
    work = _work(settings)
    domain = settings.get("domain")
    seed = int(settings.get("seed"))
    batch_size = int(settings.get("batch_size"))
    corpus = load_corpus(args.input, domain)
    controversial = settings.get("controversial")
    if controversial:
        corpus = select_controversial(corpus, int(controversial))
    split = split_and_batch(corpus, seed=seed, batch_size=batch_size)
    work.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, work / "corpus.jsonl")
    write_json(work / "split.json", split.to_dict())
    write_json(
        work / "meta.json",
        {"domain": domain, "seed": seed, "batch_size": batch_size, "corpus_hash": corpus_hash(corpus)},
    )
    print(
        f"ingested {len(corpus)} cases -> {work}/corpus.jsonl "
        f"({len(split.precedent_ids)} precedent, {len(split.evaluation_ids)} evaluation)"
    )
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    settings = Settings(args)
    work = _work(settings)
    _, corpus, _ = _load_workspace(work)
    model_id = settings.get("embed_model")
    cache = EmbeddingCache(work / "embeddings")
    provider = _embed_provider(settings)
    vectors = embed_corpus(corpus, model_id, provider, cache)
    print(f"embedded {len(vectors)} cases with {model_id} -> {work}/embeddings")
    return 0


def cmd_retrieve(args: argparse.Namespace) -> int:
    settings = Settings(args)
    work = _work(settings)
    _, corpus, split = _load_workspace(work)
    model_id = settings.get("embed_model")
    k_max = int(settings.get("k_max"))
    out_path = work / "retrieval.jsonl"
    digest = corpus_hash(corpus)
    if out_path.exists():
        existing, _ = load_results(out_path)
        if (
            existing["corpus_hash"] == digest
            and existing["model_id"] == model_id
            and existing["k_max"] == k_max
        ):
            print(f"{out_path} is up to date (k_max={k_max}); nothing to do")
            return 0
    cache = EmbeddingCache(work / "embeddings")
    provider = _embed_provider(settings)
    vectors = embed_corpus(corpus, model_id, provider, cache)
    index = build_index(corpus.subset(split.precedent_ids), vectors)
    results = [
        retrieve(index, corpus.by_id[cid], k_max) for cid in sorted(split.evaluation_ids)
    ]
    save_results(out_path, results, corpus_digest=digest, model_id=model_id, k_max=k_max)
    print(f"retrieved top-{k_max} for {len(results)} cases -> {out_path}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    settings = Settings(args)
    work = _work(settings)
    meta, corpus, split = _load_workspace(work)
    _, results = load_results(work / "retrieval.jsonl")
    condition = args.condition
    runs = work / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    if condition == "case":
        agent = _case_agent(settings, meta["domain"], runs)
        out_path = runs / f"selections-{agent.agent_id}.jsonl"
        count = 0
        for batch in split.batches:
            count += len(
                run_case_agent(batch, corpus, list(results.values()), agent, out_path)
            )
        print(f"collected {count} selections as {agent.agent_id} -> {out_path}")
    else:
        agent = _rule_agent(settings, meta["domain"], runs)
        out_path = runs / f"rules-{agent.agent_id}.jsonl"
        count = 0
        for batch in split.batches:
            count += len(run_rule_agent(batch, corpus, agent, out_path))
        print(f"collected {count} rule decisions as {agent.agent_id} -> {out_path}")
    return 0


def _case_agent(settings: Settings, domain: str, runs: Path):
    from .prompts import case_template

    kind = settings.get("agent", "llm")
    agent_id = settings.get("agent_id")
    if kind == "mock":
        return AllPrecedentAgent(agent_id or "mock-all-precedent")
    if kind == "mock-gold":
        return GoldMatchingAgent(agent_id or "mock-gold-matching")
    if kind == "llm":
        agent_id = agent_id or "llm-case"
        return LlmCaseAgent(
            provider=_chat_provider(settings),
            template=case_template(domain),
            model_id=settings.get("chat_model"),
            agent_id=agent_id,
            transcripts=TranscriptWriter(runs / f"transcripts-{agent_id}.jsonl"),
        )
    raise UsageError(f"unknown case agent {kind!r}; expected llm, mock, or mock-gold")


def _rule_agent(settings: Settings, domain: str, runs: Path):
    from .prompts import rule_template

    kind = settings.get("agent", "llm")
    agent_id = settings.get("agent_id")
    if kind == "mock":
        return GoldRuleAgent(agent_id or "mock-gold-rule")
    if kind == "llm":
        rules_path = settings.get("rules")
        if not rules_path:
            raise UsageError("--rules file is required for the llm rule agent")
        agent_id = agent_id or "llm-rule"
        return LlmRuleAgent(
            provider=_chat_provider(settings),
            rules=load_rules(rules_path),
            template=rule_template(domain),
            model_id=settings.get("chat_model"),
            agent_id=agent_id,
            transcripts=TranscriptWriter(runs / f"transcripts-{agent_id}.jsonl"),
        )
    raise UsageError(f"unknown rule agent {kind!r}; expected llm or mock")


def _load_runs(work: Path) -> tuple[list[PrecedentSelection], list[RuleDecisionRecord]]:
    selections: list[PrecedentSelection] = []
    rules: list[RuleDecisionRecord] = []
    runs = work / "runs"
    if runs.is_dir():
        for path in sorted(runs.glob("selections-*.jsonl")):
            selections.extend(PrecedentSelection.from_dict(row) for row in read_jsonl(path))
        for path in sorted(runs.glob("rules-*.jsonl")):
            rules.extend(RuleDecisionRecord.from_dict(row) for row in read_jsonl(path))
    return selections, rules


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    work = _work(settings)
    _, corpus, _ = _load_workspace(work)
    _, results = load_results(work / "retrieval.jsonl")
    selections, rules = _load_runs(work)
    inputs = SweepInputs(
        corpus=corpus, results=results, selections=selections, rule_records=rules
    )
    report = run_sweep(inputs, settings.conditions(), settings.k_set())
    out_dir = Path(settings.get("report") or (work / "report"))
    write_report(report, out_dir)
    print(f"wrote {len(report.rows)} accuracy rows -> {out_dir}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    settings = Settings(args)
    out_dir = Path(settings.get("report") or (_work(settings) / "report"))
    path = out_dir / "report.json"
    if not path.exists():
        raise MissingRuns("report", f"{path} does not exist; run `clg evaluate` first")
    report = read_json(path)
    print(f"{'group':<12} {'condition':<14} {'k':>3} {'n':>5} {'accuracy':>9} {'se':>7}")
    for row in report["rows"]:
        print(
            f"{row['group_id']:<12} {row['kind']:<14} {row['k']:>3} {row['n']:>5} "
            f"{row['accuracy']:>9.3f} {row['standard_error']:>7.3f}"
        )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import AnnotationService, create_app, group_batches

    settings = Settings(args)
    work = _work(settings)
    meta, corpus, split = _load_workspace(work)
    _, results = load_results(work / "retrieval.jsonl")
    rules = {}
    for path in settings.get("rules_files") or []:
        rule_set = load_rules(path)
        rules[rule_set.group_id] = rule_set
    service = AnnotationService(
        corpus=corpus,
        results=results,
        batches=group_batches(corpus, split),
        rules=rules,
        quota=int(settings.get("quota")),
        log_path=work / "sessions" / "events.jsonl",
    )
    app = create_app(service, static_dir=settings.get("ui"))
    uvicorn.run(app, host=settings.get("host", "127.0.0.1"), port=int(settings.get("port")))
    return 0


# --- dispatch -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would sys.exit(2)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> _Parser:
    parser = _Parser(prog="clg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser) -> None:
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--work", help="workspace directory")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("ingest", help="validate a JSONL corpus, split, and batch it")
    common(p)
    p.add_argument("--input", required=True, help="raw corpus JSONL")
    p.add_argument("--domain", choices=("mod", "toxicity"))
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--controversial", type=int, help="keep only the N most controversial cases")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="embed every case text into the on-disk cache")
    common(p)
    p.add_argument("--embed-model", dest="embed_model")
    p.add_argument("--provider", choices=("fake", "http"))
    p.add_argument("--base-url", dest="base_url")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("retrieve", help="rank top-k precedents for each evaluation case")
    common(p)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--embed-model", dest="embed_model")
    p.add_argument("--provider", choices=("fake", "http"))
    p.add_argument("--base-url", dest="base_url")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("run", help="collect agent selections or rule decisions")
    common(p)
    p.add_argument("--condition", choices=("case", "rule"), required=True)
    p.add_argument("--agent", choices=("llm", "mock", "mock-gold"))
    p.add_argument("--agent-id", dest="agent_id")
    p.add_argument("--chat-model", dest="chat_model")
    p.add_argument("--provider", choices=("fake", "http"))
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--rules", help="rule set JSON for the rule condition")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="score all conditions across the k sweep")
    common(p)
    p.add_argument("--report", help="output directory (default <work>/report)")
    p.add_argument("--k", dest="k_set", help="comma-separated window sizes")
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--conditions", help="comma-separated condition kinds")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="print the accuracy table from an existing report")
    common(p)
    p.add_argument("--report", help="report directory (default <work>/report)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="start the annotation HTTP service")
    common(p)
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.add_argument("--quota", type=int)
    p.add_argument("--rules-file", dest="rules_files", action="append", help="repeatable")
    p.add_argument("--ui", help="static directory with the built annotation UI")
    p.set_defaults(func=cmd_serve)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ClgError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
