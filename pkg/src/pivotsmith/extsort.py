"""Disk-backed sorting for row streams too large to hold in memory.

Rows are the raw tuples used across the pivot pipeline: source tokens,
target tokens, a tuple of float scores, and a tuple of alignment pairs.
Runs of ``chunk_size`` rows are sorted in memory and spilled to temp files,
then merged lazily with ``heapq.merge``.  Inputs that fit in one chunk are
sorted without touching the disk at all.
"""

from __future__ import annotations

import heapq
import os
import shutil
import tempfile
from typing import Callable, Iterable, Iterator

from .tablecore import Row

DEFAULT_CHUNK_SIZE = 250_000
TMPDIR_ENV = "PIVOTSMITH_TMPDIR"


def scratch_base(override: str | None = None) -> str | None:
    """Directory for spill files: explicit override, else the env var."""
    return override or os.environ.get(TMPDIR_ENV) or None


def encode_row(row: Row) -> str:
    src, tgt, scores, align = row
    # repr round-trips floats exactly, so spilling never perturbs scores.
    return "\t".join([
        " ".join(src),
        " ".join(tgt),
        " ".join(repr(v) for v in scores),
        " ".join(f"{i}-{j}" for i, j in align),
    ]) + "\n"


def decode_row(line: str) -> Row:
    src, tgt, scores, align = line.rstrip("\n").split("\t")
    return (
        tuple(src.split(" ")),
        tuple(tgt.split(" ")),
        tuple(float(v) for v in scores.split(" ")) if scores else (),
        tuple(tuple(int(p) for p in item.split("-", 1))
              for item in align.split(" ")) if align else (),
    )


def _read_run(path: str) -> Iterator[Row]:
    with open(path, "r", encoding="utf-8") as stream:
        for line in stream:
            yield decode_row(line)


def ext_sorted(rows: Iterable[Row], key: Callable[[Row], object],
               chunk_size: int = DEFAULT_CHUNK_SIZE,
               tmp_base: str | None = None) -> Iterator[Row]:
    """Yield rows in key order, spilling chunks to disk when needed."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be at least 1")
    tmpdir: str | None = None
    runs: list[str] = []
    chunk: list[Row] = []
    try:
        for row in rows:
            chunk.append(row)
            if len(chunk) >= chunk_size:
                chunk.sort(key=key)
                if tmpdir is None:
                    tmpdir = tempfile.mkdtemp(prefix="pivotsmith-sort-",
                                              dir=scratch_base(tmp_base))
                path = os.path.join(tmpdir, f"run{len(runs)}")
                with open(path, "w", encoding="utf-8") as out:
                    out.writelines(encode_row(r) for r in chunk)
                runs.append(path)
                chunk = []
        chunk.sort(key=key)
        if not runs:
            yield from chunk
            return
        streams = [_read_run(path) for path in runs]
        if chunk:
            streams.append(iter(chunk))
        yield from heapq.merge(*streams, key=key)
    finally:
        if tmpdir is not None:
            shutil.rmtree(tmpdir, ignore_errors=True)
