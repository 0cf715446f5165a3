"""Exception types shared across the engine.

Every operational failure maps to a distinct class so callers (CLI,
service, tests) can branch on the failure kind instead of parsing
messages.
"""

from __future__ import annotations


class ClgError(Exception):
    """Base class for all engine errors."""


# --- corpus ---------------------------------------------------------------

class MalformedRecord(ClgError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(ClgError):
    pass


class MixedDecisionVariants(ClgError):
    pass


class EmptyGroup(ClgError):
    def __init__(self, group_id: str):
        super().__init__(f"no ratings for group {group_id!r}")
        self.group_id = group_id


class TooFewCases(ClgError):
    pass


# --- embedding ------------------------------------------------------------

class EmptyText(ClgError):
    pass


class AuthError(ClgError):
    pass


class ProviderUnavailable(ClgError):
    pass


class DimensionMismatch(ClgError):
    pass


class ZeroVector(ClgError):
    pass


# --- retrieval ------------------------------------------------------------

class MissingVector(ClgError):
    def __init__(self, case_id: str):
        super().__init__(f"no embedding vector for case {case_id!r}")
        self.case_id = case_id


class EmptyIndex(ClgError):
    pass


class WindowTooLarge(ClgError):
    pass


# --- synthesis ------------------------------------------------------------

class MissingVerdict(ClgError):
    def __init__(self, rank: int):
        super().__init__(f"no verdict for rank {rank}")
        self.rank = rank


class EmptyRetrieval(ClgError):
    pass


# --- agents ---------------------------------------------------------------

class Unparseable(ClgError):
    def __init__(self, raw_text: str, reason: str = "no decision token found"):
        super().__init__(reason)
        self.raw_text = raw_text


# --- evaluation -----------------------------------------------------------

class LengthMismatch(ClgError):
    pass


class VariantMismatch(ClgError):
    pass


class RaggedMatrix(ClgError):
    pass


class UndefinedKappa(ClgError):
    pass


class MissingRuns(ClgError):
    def __init__(self, condition: str, detail: str = ""):
        super().__init__(f"missing persisted runs for {condition}" + (f": {detail}" if detail else ""))
        self.condition = condition


# --- service --------------------------------------------------------------

class QuotaFilled(ClgError):
    pass


class UnknownGroup(ClgError):
    pass


class SessionClosed(ClgError):
    pass


class IncompleteVerdicts(ClgError):
    pass


class UnknownCase(ClgError):
    pass


class ConflictingResubmission(ClgError):
    pass


class OutOfOrder(ClgError):
    pass


class InvalidDecisionVariant(ClgError):
    pass


class UnknownSession(ClgError):
    pass


# --- cli ------------------------------------------------------------------

class UsageError(ClgError):
    pass
