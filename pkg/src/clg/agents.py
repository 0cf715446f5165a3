"""Agents that judge precedent applicability or decide cases outright.

Two kinds of agent feed the decision pipeline:

* case agents produce a ``PrecedentSelection`` per judged case (which
  retrieved candidates count as precedents), and
* rule agents decide each case directly against a written rule set.

Both have LLM-backed implementations plus deterministic stand-ins used
for testing and cross-checks. Runs persist append-only JSONL so an
interrupted run resumes where it stopped.
"""

from __future__ import annotations

import hashlib
import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import requests

from .corpus import BINARY, ORDINAL, Batch, Case, Corpus, Decision
from .errors import AuthError, ProviderUnavailable, Unparseable
from .prompts import PromptTemplate
from .retrieval import PrecedentSelection, RetrievalResult, RetrievedCase, Verdict
from .storage import append_jsonl, read_jsonl

DEFAULT_CHAT_MODEL = "gpt-4-turbo-preview"


# --- reply parsing -----------------------------------------------------------

_BINARY_TOKEN = re.compile(r"\b(keep|remove)\b", re.IGNORECASE)
_ORDINAL_TOKEN = re.compile(r"\b[1-5]\b")


def parse_verdict(text: str) -> Verdict | None:
    """Map a free-text reply to a verdict; None when no verdict is found.

    The last occurrence of "relevant" wins; if that occurrence is part of
    a "not relevant", the verdict is negative. Total: every string maps
    to exactly one of Precedent / DoesNotApply / None.
    """
    lower = text.lower()
    i_rel = lower.rfind("relevant")
    if i_rel == -1:
        return None
    i_not = lower.rfind("not relevant")
    if i_not != -1 and i_not + 4 == i_rel:
        return Verdict.DOES_NOT_APPLY
    return Verdict.PRECEDENT


def parse_decision(text: str, kind: str) -> Decision | None:
    """Extract the final decision token: last keep/remove, or last standalone 1-5."""
    if kind == BINARY:
        tokens = _BINARY_TOKEN.findall(text)
        return Decision(BINARY, tokens[-1].lower()) if tokens else None
    tokens = _ORDINAL_TOKEN.findall(text)
    return Decision(ORDINAL, int(tokens[-1])) if tokens else None


@dataclass(frozen=True)
class LlmVerdict:
    """A raw model reply plus its parse; parsed is None when unparseable."""

    raw_text: str
    parsed: Verdict | None

    @property
    def unparseable(self) -> bool:
        return self.parsed is None


@dataclass(frozen=True)
class RuleSet:
    """An ordered written constitution for one group in one domain."""

    domain: str  # "mod" | "toxicity"
    group_id: str
    rules: tuple[str, ...]

    def instructions(self) -> str:
        return "\n".join(f"{i}. {rule}" for i, rule in enumerate(self.rules, start=1))


def load_rules(path: str | Path) -> RuleSet:
    import json

    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return RuleSet(domain=raw["domain"], group_id=raw["group_id"], rules=tuple(raw["rules"]))


# --- chat providers ----------------------------------------------------------


class ChatProvider(Protocol):
    def complete(self, messages: list[dict[str, str]], model_id: str) -> str:
        ...


class FakeChatProvider:
    """Deterministic chat stand-in: the reply is a pure function of the prompt.

    Replies include a step-by-step preamble and a final token chosen by
    hashing (model_id, last user message), so downstream parsers are
    exercised on realistic text while whole runs stay bit-reproducible.
    """

    def __init__(self):
        self.calls = 0

    def complete(self, messages: list[dict[str, str]], model_id: str) -> str:
        self.calls += 1
        last_user = next(m["content"] for m in reversed(messages) if m["role"] == "user")
        system = messages[0]["content"] if messages and messages[0]["role"] == "system" else ""
        digest = hashlib.sha256(f"{model_id}\x00{last_user}".encode("utf-8")).digest()
        h = digest[0]
        if 'Answer with "relevant"' in last_user:
            token = "relevant" if h % 2 == 0 else "not relevant"
            return (
                "Comparing the two texts step by step, I looked at their topic, "
                f"target, and tone. Final answer: {token}"
            )
        if '"keep" or "remove"' in system:
            token = "keep" if h % 2 == 0 else "remove"
            return f"Assessing each rule against the content in turn. Final decision: {token}"
        return f"Weighing each indicator against the content. Final rating: {1 + h % 5}"


class HttpChatProvider:
    """OpenAI-compatible /chat/completions client, temperature 0, bounded retry."""

    def __init__(
        self,
        base_url: str = "https://api.openai.com/v1",
        api_key: str | None = None,
        max_retries: int = 3,
        backoff_seconds: float = 1.0,
        timeout: float = 120.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key or os.environ.get("CLG_API_KEY") or os.environ.get("OPENAI_API_KEY")
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        self.timeout = timeout
        self.session = requests.Session()

    def complete(self, messages: list[dict[str, str]], model_id: str) -> str:
        if not self.api_key:
            raise AuthError("no API key configured (set CLG_API_KEY or OPENAI_API_KEY)")
        payload = {"model": model_id, "messages": messages, "temperature": 0}
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = self.session.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code in (401, 403):
                    raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
                if resp.status_code == 200:
                    return resp.json()["choices"][0]["message"]["content"]
                last_error = ProviderUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if attempt < self.max_retries - 1:
                time.sleep(self.backoff_seconds * (2**attempt))
        raise ProviderUnavailable(f"chat request failed after {self.max_retries} attempts: {last_error}")


class TranscriptWriter:
    """Append-only JSONL log of every provider exchange, for audit."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def record(
        self,
        agent_id: str,
        judged_case_id: str,
        candidate_case_id: str | None,
        messages: list[dict[str, str]],
        reply: str,
    ) -> None:
        append_jsonl(
            self.path,
            {
                "agent_id": agent_id,
                "judged_case_id": judged_case_id,
                "candidate_case_id": candidate_case_id,
                "messages": messages,
                "reply": reply,
            },
        )


# --- single-call operations --------------------------------------------------


def llm_classify_precedent(
    judged: Case,
    candidate: RetrievedCase,
    template: PromptTemplate,
    provider: ChatProvider,
    model_id: str = DEFAULT_CHAT_MODEL,
    transcripts: TranscriptWriter | None = None,
    agent_id: str = "llm-case",
) -> LlmVerdict:
    """Ask the model whether one retrieved decision applies to the judged case.

    One candidate per call. An unparseable reply is retried once; if the
    retry also fails to parse, the verdict is returned unparsed and the
    caller decides the default.
    """
    messages = template.messages(
        input=judged.text,
        precedent=candidate.text,
        decision=str(candidate.gold.to_raw()),
    )
    reply = provider.complete(messages, model_id)
    parsed = parse_verdict(reply)
    if parsed is None:
        if transcripts:
            transcripts.record(agent_id, judged.id, candidate.case_id, messages, reply)
        reply = provider.complete(messages, model_id)
        parsed = parse_verdict(reply)
    if transcripts:
        transcripts.record(agent_id, judged.id, candidate.case_id, messages, reply)
    return LlmVerdict(raw_text=reply, parsed=parsed)


def llm_rule_decide(
    judged: Case,
    rules: RuleSet,
    template: PromptTemplate,
    provider: ChatProvider,
    model_id: str = DEFAULT_CHAT_MODEL,
    transcripts: TranscriptWriter | None = None,
    agent_id: str = "llm-rule",
) -> Decision:
    """Decide one case directly against the rule set.

    Unparseable replies are retried once and then surfaced as an error —
    a final decision is never silently defaulted.
    """
    if not rules.rules:
        raise ValueError("rule set is empty")
    messages = template.messages(instructions=rules.instructions(), input=judged.text)
    kind = judged.gold.kind
    reply = provider.complete(messages, model_id)
    decision = parse_decision(reply, kind)
    if decision is None:
        if transcripts:
            transcripts.record(agent_id, judged.id, None, messages, reply)
        reply = provider.complete(messages, model_id)
        decision = parse_decision(reply, kind)
    if transcripts:
        transcripts.record(agent_id, judged.id, None, messages, reply)
    if decision is None:
        raise Unparseable(reply, f"no {kind} decision token found after retry")
    return decision


# --- case agents -------------------------------------------------------------


class CaseAgent(Protocol):
    agent_id: str

    def select(self, judged: Case, result: RetrievalResult) -> PrecedentSelection:
        ...


class AllPrecedentAgent:
    """Marks every retrieved case applicable; downstream synthesis is then kNN."""

    def __init__(self, agent_id: str = "mock-all-precedent"):
        self.agent_id = agent_id

    def select(self, judged: Case, result: RetrievalResult) -> PrecedentSelection:
        verdicts = {item.rank: Verdict.PRECEDENT for item in result.items}
        return PrecedentSelection(
            judged_case_id=result.judged_case_id, agent_id=self.agent_id, verdicts=verdicts
        )


class GoldMatchingAgent:
    """Marks a candidate applicable exactly when its gold matches the judged gold."""

    def __init__(self, agent_id: str = "mock-gold-matching"):
        self.agent_id = agent_id

    def select(self, judged: Case, result: RetrievalResult) -> PrecedentSelection:
        verdicts = {
            item.rank: Verdict.PRECEDENT if item.gold == judged.gold else Verdict.DOES_NOT_APPLY
            for item in result.items
        }
        return PrecedentSelection(
            judged_case_id=result.judged_case_id, agent_id=self.agent_id, verdicts=verdicts
        )


class LlmCaseAgent:
    """Classifies each retrieved candidate with one model call apiece."""

    def __init__(
        self,
        provider: ChatProvider,
        template: PromptTemplate,
        model_id: str = DEFAULT_CHAT_MODEL,
        agent_id: str = "llm-case",
        transcripts: TranscriptWriter | None = None,
    ):
        self.provider = provider
        self.template = template
        self.model_id = model_id
        self.agent_id = agent_id
        self.transcripts = transcripts

    def select(self, judged: Case, result: RetrievalResult) -> PrecedentSelection:
        verdicts: dict[int, Verdict] = {}
        defaulted: list[int] = []
        for item in result.items:
            verdict = llm_classify_precedent(
                judged,
                item,
                self.template,
                self.provider,
                self.model_id,
                self.transcripts,
                self.agent_id,
            )
            if verdict.parsed is None:
                verdicts[item.rank] = Verdict.DOES_NOT_APPLY
                defaulted.append(item.rank)
            else:
                verdicts[item.rank] = verdict.parsed
        return PrecedentSelection(
            judged_case_id=result.judged_case_id,
            agent_id=self.agent_id,
            verdicts=verdicts,
            defaulted_ranks=tuple(defaulted),
        )


class RecordedSelectionAgent:
    """Replays selections captured elsewhere, e.g. the annotation service export."""

    def __init__(self, selections: Iterable[PrecedentSelection], agent_id: str):
        self.agent_id = agent_id
        self._by_case = {s.judged_case_id: s for s in selections if s.agent_id == agent_id}

    def select(self, judged: Case, result: RetrievalResult) -> PrecedentSelection:
        try:
            selection = self._by_case[judged.id]
        except KeyError:
            raise KeyError(f"no recorded selection for case {judged.id!r} by {self.agent_id!r}")
        stray = set(selection.verdicts) - set(result.ranks())
        if stray:
            raise ValueError(f"recorded selection covers unknown ranks {sorted(stray)}")
        return selection


def run_case_agent(
    batch: Batch,
    corpus: Corpus,
    results: Sequence[RetrievalResult],
    agent: CaseAgent,
    out_path: str | Path | None = None,
) -> list[PrecedentSelection]:
    """Collect one selection per judged case in the batch, resumably.

    Selections already persisted under this agent id are reused, not
    recomputed; each fresh selection is appended as soon as it completes,
    so a crash mid-batch loses at most the in-flight case.
    """
    by_id = {r.judged_case_id: r for r in results}
    done: dict[str, PrecedentSelection] = {}
    if out_path is not None and Path(out_path).exists():
        for row in read_jsonl(out_path):
            selection = PrecedentSelection.from_dict(row)
            if selection.agent_id == agent.agent_id:
                done[selection.judged_case_id] = selection
    out: list[PrecedentSelection] = []
    for case_id in batch.case_ids:
        if case_id in done:
            out.append(done[case_id])
            continue
        if case_id not in by_id:
            raise KeyError(f"no retrieval result for case {case_id!r}")
        selection = agent.select(corpus.by_id[case_id], by_id[case_id])
        if out_path is not None:
            append_jsonl(out_path, selection.to_dict())
        out.append(selection)
    return out


# --- rule agents -------------------------------------------------------------


@dataclass(frozen=True)
class RuleDecisionRecord:
    """One direct decision; humans also report which rules they checked."""

    judged_case_id: str
    agent_id: str
    decision: Decision
    checked_rules: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "judged_case_id": self.judged_case_id,
            "agent_id": self.agent_id,
            "decision": self.decision.to_raw(),
            "checked_rules": None if self.checked_rules is None else list(self.checked_rules),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RuleDecisionRecord":
        raw = d["decision"]
        checked = d.get("checked_rules")
        return cls(
            judged_case_id=d["judged_case_id"],
            agent_id=d["agent_id"],
            decision=Decision.from_raw(raw, BINARY if isinstance(raw, str) else ORDINAL),
            checked_rules=None if checked is None else tuple(checked),
        )


class RuleAgent(Protocol):
    agent_id: str

    def decide(self, judged: Case) -> Decision:
        ...


class LlmRuleAgent:
    """Decides each case against the rule set with one model call."""

    def __init__(
        self,
        provider: ChatProvider,
        rules: RuleSet,
        template: PromptTemplate,
        model_id: str = DEFAULT_CHAT_MODEL,
        agent_id: str = "llm-rule",
        transcripts: TranscriptWriter | None = None,
    ):
        self.provider = provider
        self.rules = rules
        self.template = template
        self.model_id = model_id
        self.agent_id = agent_id
        self.transcripts = transcripts

    def decide(self, judged: Case) -> Decision:
        return llm_rule_decide(
            judged,
            self.rules,
            self.template,
            self.provider,
            self.model_id,
            self.transcripts,
            self.agent_id,
        )


class GoldRuleAgent:
    """Returns the judged case's own gold; an upper-bound stand-in for tests."""

    def __init__(self, agent_id: str = "mock-gold-rule"):
        self.agent_id = agent_id

    def decide(self, judged: Case) -> Decision:
        return judged.gold


def run_rule_agent(
    batch: Batch,
    corpus: Corpus,
    agent: RuleAgent,
    out_path: str | Path | None = None,
) -> list[RuleDecisionRecord]:
    """Collect one direct decision per judged case, resumably (see run_case_agent)."""
    done: dict[str, RuleDecisionRecord] = {}
    if out_path is not None and Path(out_path).exists():
        for row in read_jsonl(out_path):
            record = RuleDecisionRecord.from_dict(row)
            if record.agent_id == agent.agent_id:
                done[record.judged_case_id] = record
    out: list[RuleDecisionRecord] = []
    for case_id in batch.case_ids:
        if case_id in done:
            out.append(done[case_id])
            continue
        decision = agent.decide(corpus.by_id[case_id])
        record = RuleDecisionRecord(judged_case_id=case_id, agent_id=agent.agent_id, decision=decision)
        if out_path is not None:
            append_jsonl(out_path, record.to_dict())
        out.append(record)
    return out
