"""Small persistence helpers: canonical JSON, JSONL files, corpus hashing.

Everything the pipeline persists goes through these so that identical
inputs always produce identical bytes (sorted keys, no timestamps).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator

from .corpus import Corpus, case_record


def dumps_canonical(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_json(path: str | Path, obj: object, indent: int = 2) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, sort_keys=True, indent=indent) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps_canonical(row) + "\n")
    tmp.replace(path)


def append_jsonl(path: str | Path, row: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(dumps_canonical(row) + "\n")


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    write_jsonl(path, (case_record(case) for case in corpus))


def corpus_hash(corpus: Corpus) -> str:
    """Content hash over the id-sorted cases; stable across input order."""
    digest = hashlib.sha256()
    for case_id in sorted(corpus.by_id):
        case = corpus.by_id[case_id]
        digest.update(
            dumps_canonical(
                {
                    "id": case.id,
                    "text": case.text,
                    "group_id": case.group_id,
                    "gold": case.gold.to_raw(),
                }
            ).encode("utf-8")
        )
        digest.update(b"\n")
    return digest.hexdigest()
