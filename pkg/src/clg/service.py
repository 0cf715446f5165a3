"""HTTP annotation backend: serves grounding tasks, records human judgments.

Annotators work through a batch of judged cases in one of two conditions:
CASE (mark each retrieved past case as precedent / doesn't apply, then give
a final decision) or RULE (review the group's written rules, then decide).
All state lives in an append-only JSONL event log; restarting the service
replays the log and reconstructs identical session state.

Case lifecycle is strictly pending -> verdicts_submitted -> finalized.
Submissions are idempotent on exact resubmission, revisable until
finalized, and rejected with a conflict once finalized with different
content. Exports use the same record schemas the agent runners emit, so
evaluation treats humans and LLMs identically.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .agents import RuleDecisionRecord, RuleSet
from .corpus import Batch, Corpus, CorpusSplit, Decision
from .errors import (
    ConflictingResubmission,
    IncompleteVerdicts,
    InvalidDecisionVariant,
    OutOfOrder,
    QuotaFilled,
    UnknownCase,
    UnknownGroup,
    UnknownSession,
)
from .retrieval import PrecedentSelection, RetrievalResult, Verdict
from .storage import append_jsonl, read_jsonl
from .synthesis import synthesize

PENDING = "pending"
VERDICTS_SUBMITTED = "verdicts_submitted"
FINALIZED = "finalized"

CASE = "CASE"
RULE = "RULE"

DEFAULT_QUOTA = 3

_INSTRUCTIONS = {
    CASE: (
        "Read the new case on the left. For each past case shown on the "
        "right, mark whether its decision should apply as a precedent "
        "here. When every past case is marked, give your own final "
        "decision."
    ),
    RULE: (
        "Read the new case on the left. Check each written rule that "
        "applies to it, then give your final decision."
    ),
}


def group_batches(corpus: Corpus, split: CorpusSplit) -> dict[str, list[Batch]]:
    """Regroup the split's evaluation batches by group, re-chunked per group."""
    per_group: dict[str, list[str]] = {}
    for batch in split.batches:
        for cid in batch.case_ids:
            per_group.setdefault(corpus.by_id[cid].group_id, []).append(cid)
    out: dict[str, list[Batch]] = {}
    for group_id, ids in per_group.items():
        out[group_id] = [
            Batch(index=i, case_ids=tuple(ids[start : start + split.batch_size]))
            for i, start in enumerate(range(0, len(ids), split.batch_size))
        ]
    return out


@dataclass
class _CaseProgress:
    state: str = PENDING
    verdicts: dict[int, Verdict] | None = None  # CASE
    checked_rules: tuple[int, ...] | None = None  # RULE
    final: Decision | None = None
    derived: Decision | None = None


@dataclass
class Session:
    session_id: str
    annotator_id: str
    group_id: str
    condition: str
    batch: Batch
    progress: dict[str, _CaseProgress] = field(default_factory=dict)

    def __post_init__(self):
        if not self.progress:
            self.progress = {cid: _CaseProgress() for cid in self.batch.case_ids}

    def finalized_count(self) -> int:
        return sum(1 for p in self.progress.values() if p.state == FINALIZED)


class AnnotationService:
    """In-memory session state over an append-only event log."""

    def __init__(
        self,
        corpus: Corpus,
        results: Mapping[str, RetrievalResult],
        batches: Mapping[str, list[Batch]],
        rules: Mapping[str, RuleSet] | None = None,
        quota: int = DEFAULT_QUOTA,
        log_path: str | Path | None = None,
    ):
        self.corpus = corpus
        self.results = results
        self.batches = dict(batches)
        self.rules = dict(rules or {})
        self.quota = quota
        self.log_path = None if log_path is None else Path(log_path)
        self.sessions: dict[str, Session] = {}
        # (group_id, condition, batch_index) -> number of sessions assigned
        self.assigned: dict[tuple[str, str, int], int] = {}
        self._lock = threading.RLock()
        if self.log_path is not None and self.log_path.exists():
            for event in read_jsonl(self.log_path):
                self._apply(event)

    # -- event log ------------------------------------------------------------

    def _log(self, event: dict) -> None:
        if self.log_path is not None:
            append_jsonl(self.log_path, event)

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "session_created":
            session = Session(
                session_id=event["session_id"],
                annotator_id=event["annotator_id"],
                group_id=event["group_id"],
                condition=event["condition"],
                batch=Batch(index=event["batch_index"], case_ids=tuple(event["case_ids"])),
            )
            self.sessions[session.session_id] = session
            key = (session.group_id, session.condition, session.batch.index)
            self.assigned[key] = self.assigned.get(key, 0) + 1
        elif kind == "selection_submitted":
            session = self.sessions[event["session_id"]]
            progress = session.progress[event["case_id"]]
            if session.condition == CASE:
                progress.verdicts = {int(r): Verdict(v) for r, v in event["verdicts"].items()}
            else:
                progress.checked_rules = tuple(event["checked_rules"])
            progress.state = VERDICTS_SUBMITTED
        elif kind == "decision_submitted":
            session = self.sessions[event["session_id"]]
            progress = session.progress[event["case_id"]]
            case = self.corpus.by_id[event["case_id"]]
            progress.final = Decision.from_raw(event["decision"], case.gold.kind)
            progress.derived = self._derive(session, event["case_id"], progress)
            progress.state = FINALIZED
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _derive(self, session: Session, case_id: str, progress: _CaseProgress) -> Decision | None:
        if session.condition != CASE or progress.verdicts is None:
            return None
        selection = PrecedentSelection(
            judged_case_id=case_id, agent_id=session.annotator_id, verdicts=progress.verdicts
        )
        return synthesize(selection, self.results[case_id]).value

    # -- operations -----------------------------------------------------------

    def create_session(self, annotator_id: str, group_id: str, condition: str) -> Session:
        if condition not in (CASE, RULE):
            raise ValueError(f"condition must be {CASE!r} or {RULE!r}, got {condition!r}")
        with self._lock:
            if group_id not in self.batches:
                raise UnknownGroup(f"no batches for group {group_id!r}")
            batch = next(
                (
                    b
                    for b in self.batches[group_id]
                    if self.assigned.get((group_id, condition, b.index), 0) < self.quota
                ),
                None,
            )
            if batch is None:
                raise QuotaFilled(
                    f"every batch for group {group_id!r} condition {condition} "
                    f"already has {self.quota} annotators"
                )
            event = {
                "event": "session_created",
                "session_id": f"sess-{len(self.sessions) + 1:04d}",
                "annotator_id": annotator_id,
                "group_id": group_id,
                "condition": condition,
                "batch_index": batch.index,
                "case_ids": list(batch.case_ids),
            }
            self._log(event)
            self._apply(event)
            return self.sessions[event["session_id"]]

    def _session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(f"no session {session_id!r}")

    def next_task(self, session_id: str) -> dict:
        """Payload for the lowest-index unfinalized case, or a done marker."""
        with self._lock:
            session = self._session(session_id)
            current = next(
                (cid for cid in session.batch.case_ids if session.progress[cid].state != FINALIZED),
                None,
            )
            if current is None:
                return {"done": True, "finalized": session.finalized_count()}
            case = self.corpus.by_id[current]
            progress = session.progress[current]
            payload = {
                "done": False,
                "case_id": current,
                "text": case.text,
                "condition": session.condition,
                "decision_kind": case.gold.kind,
                "instructions": _INSTRUCTIONS[session.condition],
                "state": progress.state,
                "progress": {
                    "finalized": session.finalized_count(),
                    "total": len(session.batch.case_ids),
                },
            }
            if session.condition == CASE:
                result = self.results[current]
                payload["candidates"] = [
                    {"rank": item.rank, "text": item.text, "decision": item.gold.to_raw()}
                    for item in result.items
                ]
                payload["submitted_verdicts"] = (
                    None
                    if progress.verdicts is None
                    else {str(r): v.value for r, v in sorted(progress.verdicts.items())}
                )
            else:
                rules = self.rules.get(session.group_id)
                payload["rules"] = list(rules.rules) if rules else []
                payload["submitted_checks"] = (
                    None if progress.checked_rules is None else list(progress.checked_rules)
                )
            return payload

    def submit_selection(
        self,
        session_id: str,
        case_id: str,
        verdicts: Mapping[str, str] | None = None,
        checked_rules: list[int] | None = None,
    ) -> dict:
        """Record verdicts (CASE) or rule checks (RULE) for one case.

        Exact resubmissions ack without writing; differing content is a
        logged revision while unfinalized and a conflict afterwards.
        """
        with self._lock:
            session = self._session(session_id)
            if case_id not in session.progress:
                raise UnknownCase(f"case {case_id!r} is not in this session's batch")
            progress = session.progress[case_id]
            if session.condition == CASE:
                parsed = self._parse_verdicts(case_id, verdicts)
                same = progress.verdicts == parsed
                event = {
                    "event": "selection_submitted",
                    "session_id": session_id,
                    "case_id": case_id,
                    "verdicts": {str(r): v.value for r, v in sorted(parsed.items())},
                }
            else:
                checks = self._parse_checks(session, checked_rules)
                same = progress.checked_rules == checks
                event = {
                    "event": "selection_submitted",
                    "session_id": session_id,
                    "case_id": case_id,
                    "checked_rules": list(checks),
                }
            if progress.state == FINALIZED:
                if same:
                    return {"state": progress.state}
                raise ConflictingResubmission(
                    f"case {case_id!r} is finalized with a different selection"
                )
            if progress.state == VERDICTS_SUBMITTED and same:
                return {"state": progress.state}
            self._log(event)
            self._apply(event)
            return {"state": session.progress[case_id].state}

    def _parse_verdicts(self, case_id: str, verdicts: Mapping[str, str] | None) -> dict[int, Verdict]:
        if verdicts is None:
            raise IncompleteVerdicts("CASE submission requires a verdict per candidate")
        result = self.results[case_id]
        parsed = {int(rank): Verdict(v) for rank, v in verdicts.items()}
        expected = set(result.ranks())
        if set(parsed) != expected:
            missing = sorted(expected - set(parsed))
            stray = sorted(set(parsed) - expected)
            raise IncompleteVerdicts(
                f"verdicts must cover ranks 1..{result.k} exactly"
                + (f"; missing {missing}" if missing else "")
                + (f"; unknown {stray}" if stray else "")
            )
        return parsed

    def _parse_checks(self, session: Session, checked_rules: list[int] | None) -> tuple[int, ...]:
        checks = tuple(sorted(set(checked_rules or ())))
        rules = self.rules.get(session.group_id)
        limit = len(rules.rules) if rules else 0
        bad = [i for i in checks if not 1 <= i <= limit]
        if bad:
            raise ValueError(f"rule indices out of range 1..{limit}: {bad}")
        return checks

    def submit_final_decision(self, session_id: str, case_id: str, decision: object) -> dict:
        """Finalize one case with the annotator's own decision.

        Requires a prior selection submission; returns the derived
        precedent decision (CASE) alongside the ack for transparency.
        """
        with self._lock:
            session = self._session(session_id)
            if case_id not in session.progress:
                raise UnknownCase(f"case {case_id!r} is not in this session's batch")
            progress = session.progress[case_id]
            case = self.corpus.by_id[case_id]
            try:
                parsed = Decision.from_raw(decision, case.gold.kind)
            except ValueError as exc:
                raise InvalidDecisionVariant(str(exc))
            if progress.state == PENDING:
                raise OutOfOrder(f"case {case_id!r} has no submitted selection yet")
            if progress.state == FINALIZED:
                if progress.final == parsed:
                    return self._final_ack(progress)
                raise ConflictingResubmission(
                    f"case {case_id!r} is finalized with a different decision"
                )
            event = {
                "event": "decision_submitted",
                "session_id": session_id,
                "case_id": case_id,
                "decision": parsed.to_raw(),
            }
            self._log(event)
            self._apply(event)
            return self._final_ack(session.progress[case_id])

    @staticmethod
    def _final_ack(progress: _CaseProgress) -> dict:
        return {
            "state": progress.state,
            "derived": None if progress.derived is None else progress.derived.to_raw(),
        }

    def session_results(self, session_id: str) -> dict:
        """Finalized records in the agent-run schema; partial until all done."""
        with self._lock:
            session = self._session(session_id)
            records = []
            for cid in session.batch.case_ids:
                progress = session.progress[cid]
                if progress.state != FINALIZED:
                    continue
                if session.condition == CASE:
                    records.append(
                        PrecedentSelection(
                            judged_case_id=cid,
                            agent_id=session.annotator_id,
                            verdicts=dict(progress.verdicts or {}),
                            final_unconstrained=progress.final,
                        ).to_dict()
                    )
                else:
                    records.append(
                        RuleDecisionRecord(
                            judged_case_id=cid,
                            agent_id=session.annotator_id,
                            decision=progress.final,
                            checked_rules=progress.checked_rules,
                        ).to_dict()
                    )
            return {
                "session_id": session_id,
                "condition": session.condition,
                "partial": session.finalized_count() < len(session.batch.case_ids),
                "records": records,
            }


# --- HTTP layer ---------------------------------------------------------------


def create_app(service: AnnotationService, static_dir: str | Path | None = None):
    """FastAPI wrapper over the service; optionally hosts the UI bundle."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="clg annotation service")
    app.state.service = service

    status_for = {
        UnknownGroup: 404,
        UnknownSession: 404,
        UnknownCase: 404,
        QuotaFilled: 409,
        ConflictingResubmission: 409,
        OutOfOrder: 409,
        IncompleteVerdicts: 400,
        InvalidDecisionVariant: 400,
        ValueError: 400,
    }

    def handler(request: Request, exc: Exception) -> JSONResponse:
        status = next(
            (code for klass, code in status_for.items() if isinstance(exc, klass)), 500
        )
        return JSONResponse(
            status_code=status, content={"error": type(exc).__name__, "detail": str(exc)}
        )

    for klass in status_for:
        app.add_exception_handler(klass, handler)

    @app.post("/sessions")
    def create_session(body: dict):
        session = service.create_session(
            annotator_id=body["annotator_id"],
            group_id=body["group_id"],
            condition=body["condition"],
        )
        return {
            "session_id": session.session_id,
            "annotator_id": session.annotator_id,
            "group_id": session.group_id,
            "condition": session.condition,
            "case_ids": list(session.batch.case_ids),
        }

    @app.get("/sessions/{session_id}/next")
    def next_task(session_id: str):
        return service.next_task(session_id)

    @app.post("/sessions/{session_id}/cases/{case_id}/selection")
    def submit_selection(session_id: str, case_id: str, body: dict):
        return service.submit_selection(
            session_id,
            case_id,
            verdicts=body.get("verdicts"),
            checked_rules=body.get("checked_rules"),
        )

    @app.post("/sessions/{session_id}/cases/{case_id}/decision")
    def submit_decision(session_id: str, case_id: str, body: dict):
        return service.submit_final_decision(session_id, case_id, body.get("decision"))

    @app.get("/sessions/{session_id}/results")
    def session_results(session_id: str):
        return service.session_results(session_id)

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=str(static_dir), html=True), name="app")

    return app
