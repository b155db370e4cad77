"""Frozen word representations: static tables and layered contextual stores.

Two on-disk formats are supported:

* static text vectors: an optional ``<count> <dim>`` header line followed by
  one ``token v1 v2 ... vd`` line per word;
* LCEB, a little-endian binary dump of per-layer, per-token vectors keyed by
  sentence id (see ``read_lceb``/``write_lceb`` for the exact layout).

Sentence identity is a content hash of the token list, so a store never has
to persist the tokens themselves and lookups are order-independent. Nothing
loaded here is ever registered as a trainable parameter: embedding vectors
enter the computation graph as constants.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Parameter
from .errors import ContractError, DimensionError, FormatError, MissingEmbeddingError

logger = logging.getLogger(__name__)

LCEB_MAGIC = b"LCEB"
LCEB_VERSION = 1

LAYER_TOP = "top"
LAYER_ALL = "all"


def sentence_id(tokens: list[str]) -> str:
    """Content hash identifying a token sequence (sha1 over 0x1f-joined tokens)."""
    joined = "\x1f".join(tokens)
    return hashlib.sha1(joined.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# static text vectors


class EmbeddingTable:
    """Fixed per-word vectors of a single dimensionality."""

    def __init__(self, dim: int):
        if dim <= 0:
            raise FormatError(f"embedding dimension must be positive, got {dim}")
        self.dim = dim
        self._vectors: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def add(self, token: str, vector: np.ndarray) -> None:
        if vector.shape != (self.dim,):
            raise FormatError(f"vector for {token!r} has shape {vector.shape}, expected ({self.dim},)")
        self._vectors[token] = vector

    def lookup(self, token: str) -> np.ndarray:
        """Vector for a token; falls back to the lowercased form, then to zeros."""
        vec = self._vectors.get(token)
        if vec is None:
            vec = self._vectors.get(token.lower())
        if vec is None:
            return np.zeros(self.dim)
        return vec


def load_static(path: str, expected_dim: int | None = None) -> EmbeddingTable:
    """Load a static text vector file.

    Duplicate tokens keep their first occurrence (a warning is logged); any
    line whose vector length disagrees with the file's dimension, or whose
    values do not parse as floats, raises FormatError naming the line.
    """
    table: EmbeddingTable | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split()
            if lineno == 1 and len(fields) == 2 and all(f.isdigit() for f in fields):
                header_dim = int(fields[1])
                if expected_dim is not None and header_dim != expected_dim:
                    raise FormatError(
                        f"{path}:1: header dimension {header_dim} != expected {expected_dim}"
                    )
                table = EmbeddingTable(header_dim)
                continue
            token, values = fields[0], fields[1:]
            try:
                vector = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: unreadable float ({exc})") from None
            if table is None:
                dim = expected_dim if expected_dim is not None else len(values)
                table = EmbeddingTable(dim)
            if vector.shape != (table.dim,):
                raise FormatError(
                    f"{path}:{lineno}: vector of length {len(values)}, expected {table.dim}"
                )
            if token in table:
                logger.warning("%s:%d: duplicate token %r kept from first occurrence", path, lineno, token)
                continue
            table.add(token, vector)
    if table is None:
        if expected_dim is None:
            raise FormatError(f"{path}: empty file and no expected dimension given")
        table = EmbeddingTable(expected_dim)
    return table


def write_static(path: str, table: EmbeddingTable, header: bool = True) -> None:
    """Write a table back out in the static text format."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(table)} {table.dim}\n")
        for token, vec in table._vectors.items():
            fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")


# ---------------------------------------------------------------------------
# layered contextual vectors (LCEB)


class ContextualStore:
    """Pre-computed multi-layer vectors for a fixed set of sentences."""

    def __init__(self, dim: int, num_layers: int):
        if dim <= 0 or num_layers < 1:
            raise FormatError(f"invalid store header: d={dim}, L={num_layers}")
        self.dim = dim
        self.num_layers = num_layers
        self._records: dict[str, np.ndarray] = {}  # id -> (L, n, d) float64

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, sid: str) -> bool:
        return sid in self._records

    def add(self, sid: str, layers: np.ndarray) -> None:
        if layers.ndim != 3 or layers.shape[0] != self.num_layers or layers.shape[2] != self.dim:
            raise FormatError(
                f"record {sid!r} has shape {layers.shape}, expected ({self.num_layers}, n, {self.dim})"
            )
        self._records[sid] = layers

    def token_count(self, sid: str) -> int:
        return self._records[sid].shape[1]

    def get(self, sid: str) -> np.ndarray:
        return self._records[sid]


def load_contextual(path: str) -> ContextualStore:
    """Load an LCEB file into memory.

    Layout (little-endian): magic ``LCEB``, u32 version, u32 d, u32 L,
    u64 record count; then per record a u32 id length, the UTF-8 id, a u32
    token count n, and L*n*d float32 values ordered layer-major with the
    dimension innermost. Written by ``write_lceb`` and by the exporter.
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head != LCEB_MAGIC:
            raise FormatError(f"{path}: bad magic {head!r}")
        fixed = fh.read(4 + 4 + 4 + 8)
        if len(fixed) != 20:
            raise FormatError(f"{path}: truncated header")
        version, dim, num_layers, count = struct.unpack("<IIIQ", fixed)
        if version != LCEB_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        store = ContextualStore(dim, num_layers)
        for index in range(count):
            raw = fh.read(4)
            if len(raw) != 4:
                raise FormatError(f"{path}: truncated record {index}")
            (id_len,) = struct.unpack("<I", raw)
            sid_bytes = fh.read(id_len)
            if len(sid_bytes) != id_len:
                raise FormatError(f"{path}: truncated record {index}")
            raw = fh.read(4)
            if len(raw) != 4:
                raise FormatError(f"{path}: truncated record {index}")
            (n,) = struct.unpack("<I", raw)
            need = num_layers * n * dim
            values = np.fromfile(fh, dtype="<f4", count=need)
            if values.size != need:
                raise FormatError(
                    f"{path}: record {index} declares {n} tokens but holds "
                    f"{values.size // (num_layers * dim) if dim else 0}"
                )
            sid = sid_bytes.decode("utf-8")
            if sid in store:
                raise FormatError(f"{path}: duplicate record id {sid!r} at record {index}")
            store.add(sid, values.astype(np.float64).reshape(num_layers, n, dim))
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after {count} records")
    return store


def write_lceb(path: str, dim: int, num_layers: int, records: list[tuple[str, np.ndarray]]) -> None:
    """Write (sentence_id, layers) records to an LCEB file; layers are (L, n, d)."""
    with open(path, "wb") as fh:
        fh.write(LCEB_MAGIC)
        fh.write(struct.pack("<IIIQ", LCEB_VERSION, dim, num_layers, len(records)))
        for sid, layers in records:
            layers = np.asarray(layers)
            if layers.shape[0] != num_layers or layers.shape[2] != dim:
                raise FormatError(
                    f"record {sid!r} has shape {layers.shape}, expected ({num_layers}, n, {dim})"
                )
            sid_bytes = sid.encode("utf-8")
            fh.write(struct.pack("<I", len(sid_bytes)))
            fh.write(sid_bytes)
            fh.write(struct.pack("<I", layers.shape[1]))
            fh.write(layers.astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# embedding sequences


@dataclass
class LayeredSequence:
    """Per-token, per-layer vectors for one sentence (layers shape: L x n x d)."""

    tokens: list[str]
    layers: np.ndarray

    def __post_init__(self):
        if self.layers.ndim != 3 or self.layers.shape[1] != len(self.tokens):
            raise ContractError(
                f"layers shape {self.layers.shape} disagrees with {len(self.tokens)} tokens"
            )

    @property
    def num_layers(self) -> int:
        return self.layers.shape[0]

    @property
    def dim(self) -> int:
        return self.layers.shape[2]


def embed(
    source: EmbeddingTable | ContextualStore,
    tokens: list[str],
    sid: str | None = None,
) -> LayeredSequence:
    """Embed a token sequence with a frozen source.

    Static tables do a per-token lookup (out-of-vocabulary tokens map to the
    zero vector) and expose a single layer. Contextual stores return the
    stored block for the sequence's content hash; a missing or token-count-
    mismatched record raises MissingEmbeddingError, which means the exporter
    has to be re-run over this sentence.
    """
    if not tokens:
        raise ContractError("cannot embed an empty token sequence")
    if isinstance(source, EmbeddingTable):
        rows = np.stack([source.lookup(t) for t in tokens])
        return LayeredSequence(tokens, rows[None, :, :])
    if sid is None:
        sid = sentence_id(tokens)
    if sid not in source:
        raise MissingEmbeddingError(f"sentence {sid!r} ({' '.join(tokens[:6])}...) not in store")
    if source.token_count(sid) != len(tokens):
        raise MissingEmbeddingError(
            f"sentence {sid!r} stored with {source.token_count(sid)} tokens, requested {len(tokens)}"
        )
    return LayeredSequence(tokens, source.get(sid))


def source_dim(source: EmbeddingTable | ContextualStore) -> int:
    return source.dim


def source_layers(source: EmbeddingTable | ContextualStore) -> int:
    return source.num_layers if isinstance(source, ContextualStore) else 1


# ---------------------------------------------------------------------------
# scalar layer mix


class ScalarMix:
    """Learned softmax-weighted combination of layers, scaled by gamma."""

    def __init__(self, num_layers: int):
        if num_layers < 1:
            raise ContractError(f"scalar mix needs at least one layer, got {num_layers}")
        self.num_layers = num_layers
        self.raw_weights = Parameter("scalar_mix.raw_weights", np.zeros(num_layers))
        self.gamma = Parameter("scalar_mix.gamma", np.asarray(1.0))

    def parameters(self) -> list[Parameter]:
        return [self.raw_weights, self.gamma]

    def normalized_weights(self) -> np.ndarray:
        shifted = self.raw_weights.value - np.max(self.raw_weights.value)
        e = np.exp(shifted)
        return e / np.sum(e)


def mix_layers(seq: LayeredSequence, mode: str, mix: ScalarMix | None = None) -> list[Node]:
    """Turn a layered sequence into per-token vector nodes.

    ``top`` takes the last layer verbatim (as constants); ``all`` computes
    gamma * sum_l softmax(raw_weights)_l * layer_l per token, differentiable
    through the mix parameters so the combination trains with the task.
    """
    if mode == LAYER_TOP:
        top = seq.layers[-1]
        return [ad.constant(top[i]) for i in range(len(seq.tokens))]
    if mode != LAYER_ALL:
        raise ContractError(f"unknown layer mode {mode!r}")
    if mix is None:
        raise ContractError("layer mode 'all' requires a ScalarMix")
    if mix.num_layers != seq.num_layers:
        raise ContractError(
            f"scalar mix has {mix.num_layers} layers but sequence has {seq.num_layers}"
        )
    weights = ad.softmax(mix.raw_weights.node)
    out: list[Node] = []
    for i in range(len(seq.tokens)):
        per_layer = ad.constant(seq.layers[:, i, :])  # (L, d)
        mixed = ad.matmul(weights, per_layer)  # (d,)
        out.append(ad.scale(mixed, mix.gamma.node))
    return out
