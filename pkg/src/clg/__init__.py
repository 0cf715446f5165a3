"""Case-law-grounded decision making.

Aligns decisions on socially contextual tasks by retrieving similar past
cases, asking an agent (human or LLM) which of them apply as precedents,
and synthesizing a decision from the selected precedents' outcomes.
"""

from .corpus import Case, Corpus, Decision, load_corpus, split_and_batch
from .embedding import cosine_similarity, embed_text
from .retrieval import PrecedentSelection, RetrievalResult, Verdict, build_index, retrieve
from .synthesis import knn_decision, oracle_decision, synthesize

__version__ = "0.1.0"

__all__ = [
    "Case",
    "Corpus",
    "Decision",
    "PrecedentSelection",
    "RetrievalResult",
    "Verdict",
    "build_index",
    "cosine_similarity",
    "embed_text",
    "knn_decision",
    "load_corpus",
    "oracle_decision",
    "retrieve",
    "split_and_batch",
    "synthesize",
]
