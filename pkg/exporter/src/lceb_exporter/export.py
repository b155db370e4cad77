"""Export pipeline: read token sequences, embed them, write the dumps."""

import json
import logging

import numpy as np

from .format import ExportError, sentence_id, write_lceb, write_static

logger = logging.getLogger(__name__)


def _file_sequences(path):
    """Yield token lists from one input file.

    A file whose first non-blank line starts with ``{`` is task JSONL: each
    record contributes its ``tokens`` list and, when present and non-empty,
    its ``extra`` list. Anything else is plain text, one whitespace-separated
    sentence per line.
    """
    jsonl = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if jsonl is None:
                jsonl = line.startswith("{")
            if not jsonl:
                yield line.split()
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}:{lineno}: unreadable JSON ({exc})") from None
            tokens = record.get("tokens")
            if not isinstance(tokens, list) or not tokens:
                raise ExportError(f"{path}:{lineno}: record without tokens")
            yield [str(t) for t in tokens]
            extra = record.get("extra")
            if extra:
                yield [str(t) for t in extra]


def read_sequences(paths: list[str]) -> list[list[str]]:
    """Unique token sequences across all inputs, in first-seen order.

    Sequences are deduplicated by sentence id, so a sentence shared by many
    task examples is exported exactly once.
    """
    unique: dict[str, list[str]] = {}
    for path in paths:
        for tokens in _file_sequences(path):
            unique.setdefault(sentence_id(tokens), tokens)
    return list(unique.values())


def read_vocabulary(path: str) -> list[str]:
    """Unique words from a one-word-per-line file, in first-seen order."""
    words: dict[str, None] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line:
                words.setdefault(line.split()[0])
    return list(words)


def export(backend, sequences: list[list[str]], out_path: str) -> int:
    """Embed every sequence and write one LCEB record per sentence id.

    All sentences are embedded before anything is written, so a backend
    failure (re-raised naming the offending sentence id) leaves no output
    file. Returns the number of records written.
    """
    records = []
    dim = num_layers = None
    for tokens in sequences:
        sid = sentence_id(tokens)
        try:
            layers = np.asarray(backend.embed(tokens), dtype=np.float64)
        except ExportError as exc:
            raise ExportError(f"sentence {sid}: {exc}") from None
        if layers.ndim != 3 or layers.shape[1] != len(tokens):
            raise ExportError(
                f"sentence {sid}: backend returned shape {layers.shape} "
                f"for {len(tokens)} tokens")
        if dim is None:
            num_layers, _, dim = layers.shape
        elif layers.shape[0] != num_layers or layers.shape[2] != dim:
            raise ExportError(
                f"sentence {sid}: shape {layers.shape} disagrees with "
                f"earlier records ({num_layers}, n, {dim})")
        records.append((sid, layers))
    if not records:
        raise ExportError("no sentences to export")
    write_lceb(out_path, dim, num_layers, records)
    logger.info("wrote %d records (%d layers, dim %d) to %s",
                len(records), num_layers, dim, out_path)
    return len(records)


def export_static(backend, words: list[str], out_path: str) -> int:
    """Write one static text vector per vocabulary word; returns the count."""
    if not words:
        raise ExportError("no vocabulary to export")
    vectors = [(word, backend.vector(word)) for word in words]
    write_static(out_path, vectors, backend.dim)
    logger.info("wrote %d vectors (dim %d) to %s", len(vectors), backend.dim, out_path)
    return len(vectors)
