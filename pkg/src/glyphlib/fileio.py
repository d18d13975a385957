"""Deterministic file helpers: atomic writes, canonical JSON, digests."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from typing import Any, Iterable, Iterator

__all__ = [
    "atomic_write_text", "canon_json", "sha256_file",
    "write_jsonl", "read_jsonl", "META_KEY",
]

META_KEY = "_meta"


def canon_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(", ", ": "))


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_jsonl(path, records: Iterable[dict], meta: dict | None = None) -> None:
    lines = []
    if meta is not None:
        lines.append(canon_json({META_KEY: meta}))
    lines.extend(canon_json(r) for r in records)
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (lineno, record), skipping blank and meta lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            if isinstance(rec, dict) and META_KEY in rec:
                continue
            if not isinstance(rec, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, rec
