"""On-disk formats: sentence ids, LCEB dumps, static text vectors.

Consumers key contextual vectors by a content hash of the token list, so the
dump never stores tokens. Both writers stage into a temporary file and rename
it into place, so a crashed export leaves no half-written output behind.
"""

import hashlib
import os
import struct

import numpy as np

LCEB_MAGIC = b"LCEB"
LCEB_VERSION = 1


class ExportError(Exception):
    """Raised when an export cannot produce a valid output file."""


def sentence_id(tokens: list[str]) -> str:
    """Content hash identifying a token sequence (sha1 over 0x1f-joined tokens)."""
    joined = "\x1f".join(tokens)
    return hashlib.sha1(joined.encode("utf-8")).hexdigest()


def write_lceb(path: str, dim: int, num_layers: int,
               records: list[tuple[str, np.ndarray]]) -> None:
    """Write (sentence id, layers) records; each layers array is (L, n, d).

    Layout (little-endian): magic ``LCEB``, u32 version, u32 d, u32 L, u64
    record count; then per record a u32 id length, the UTF-8 id, a u32 token
    count n, and L*n*d float32 values layer-major with the dimension
    innermost.
    """
    staged = []
    for sid, layers in records:
        layers = np.asarray(layers)
        if layers.ndim != 3 or layers.shape[0] != num_layers or layers.shape[2] != dim:
            raise ExportError(
                f"record {sid!r} has shape {layers.shape}, "
                f"expected ({num_layers}, n, {dim})")
        staged.append((sid.encode("utf-8"), layers))
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(LCEB_MAGIC)
        fh.write(struct.pack("<IIIQ", LCEB_VERSION, dim, num_layers, len(staged)))
        for sid_bytes, layers in staged:
            fh.write(struct.pack("<I", len(sid_bytes)))
            fh.write(sid_bytes)
            fh.write(struct.pack("<I", layers.shape[1]))
            fh.write(layers.astype("<f4").tobytes())
    os.replace(tmp, path)


def write_static(path: str, vectors: list[tuple[str, np.ndarray]], dim: int) -> None:
    """Write word vectors as text: a ``<count> <dim>`` header line, then one
    ``token v1 v2 ... vd`` line per word."""
    lines = [f"{len(vectors)} {dim}\n"]
    for token, vec in vectors:
        vec = np.asarray(vec)
        if vec.shape != (dim,):
            raise ExportError(f"vector for {token!r} has shape {vec.shape}, expected ({dim},)")
        lines.append(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.writelines(lines)
    os.replace(tmp, path)
