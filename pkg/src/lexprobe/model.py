"""Embed-Encode-Predict probing models over frozen representations.

A ProbeModel owns the trainable pieces: an optional scalar layer mix, an
optional biLSTM encoder, and a classifier head. The attention encoder has no
parameters, and the "none" encoder is the identity. Span classification feeds
the classifier a concatenation of span endpoint vectors (plus the endpoints
of an optional extra sequence); tagging applies the same head independently
per token and decodes with a validity-constrained max-path search.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Parameter
from .embeddings import LayeredSequence, ScalarMix, mix_layers
from .errors import ConfigError, ContractError, FormatError, LabelError

HIDDEN_DIM = 300
DROPOUT_P = 0.2

ENC_NONE = "none"
ENC_BILSTM = "bilstm"
ENC_ATTENTION = "attention"
ENCODINGS = (ENC_NONE, ENC_BILSTM, ENC_ATTENTION)

CHECKPOINT_MAGIC = b"LPCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TaskSchema:
    """What a task feeds the classifier: label set and input arities.

    For span classification, span_arity is the number of span endpoint
    vectors (2, or 1 when every span in the task is a single token) and
    extra_arity the number of endpoint vectors of the extra sequence (0 when
    absent, 1 when the extra is always a single token, else 2). Arities are
    fixed per task so the classifier input dimension never varies across
    examples. Tagging tasks use labels as the tag inventory and no arities.
    """

    labels: tuple[str, ...]
    span_arity: int = 2
    extra_arity: int = 0
    tagging: bool = False

    def __post_init__(self):
        if not self.labels:
            raise ContractError("schema needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ContractError("duplicate labels in schema")
        if self.tagging:
            if self.span_arity or self.extra_arity:
                raise ContractError("tagging schema takes no span/extra arity")
        elif not (1 <= self.span_arity <= 2) or not (0 <= self.extra_arity <= 2):
            raise ContractError(
                f"bad arities: span={self.span_arity}, extra={self.extra_arity}"
            )

    def label_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"label {label!r} not in schema {self.labels}") from None

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "span_arity": self.span_arity,
            "extra_arity": self.extra_arity,
            "tagging": self.tagging,
        }

    @staticmethod
    def from_dict(d: dict) -> "TaskSchema":
        return TaskSchema(
            labels=tuple(d["labels"]),
            span_arity=d["span_arity"],
            extra_arity=d["extra_arity"],
            tagging=d["tagging"],
        )


def check_span(span: tuple[int, int], n: int) -> None:
    start, end = span
    if not (0 <= start <= end < n):
        raise IndexError(f"span {span} out of range for {n} tokens")


def encoder_output_dim(encoding: str, dim: int) -> int:
    if encoding == ENC_NONE:
        return dim
    if encoding in (ENC_BILSTM, ENC_ATTENTION):
        return 2 * dim
    raise ConfigError(f"unknown encoding {encoding!r}")


def _xavier(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


# ---------------------------------------------------------------------------
# encoders


class BiLSTMParams:
    """Gate parameters for both directions; hidden size equals the input size."""

    GATES = ("i", "f", "o", "c")

    def __init__(self, dim: int, rng: np.random.Generator, prefix: str = "bilstm"):
        self.dim = dim
        self.directions: dict[str, dict[str, tuple[Parameter, Parameter, Parameter]]] = {}
        for direction in ("fw", "bw"):
            gates = {}
            for gate in self.GATES:
                name = f"{prefix}.{direction}.{gate}"
                gates[gate] = (
                    Parameter(name + ".W", _xavier(rng, dim, dim)),
                    Parameter(name + ".U", _xavier(rng, dim, dim)),
                    Parameter(name + ".b", np.zeros(dim)),
                )
            self.directions[direction] = gates

    def parameters(self) -> list[Parameter]:
        out = []
        for direction in ("fw", "bw"):
            for gate in self.GATES:
                out.extend(self.directions[direction][gate])
        return out


def _lstm_run(vs: list[Node], gates: dict, dim: int) -> list[Node]:
    """One-directional LSTM over vs with zero initial state."""

    def gate_pre(gate: str, x: Node, h: Node) -> Node:
        W, U, b = gates[gate]
        return ad.add(ad.add(ad.matmul(W.node, x), ad.matmul(U.node, h)), b.node)

    h = ad.constant(np.zeros(dim))
    c = ad.constant(np.zeros(dim))
    outs = []
    for x in vs:
        i = ad.sigmoid(gate_pre("i", x, h))
        f = ad.sigmoid(gate_pre("f", x, h))
        o = ad.sigmoid(gate_pre("o", x, h))
        cand = ad.tanh(gate_pre("c", x, h))
        c = ad.add(ad.mul(f, c), ad.mul(i, cand))
        h = ad.mul(o, ad.tanh(c))
        outs.append(h)
    return outs


def encode_none(vs: list[Node]) -> list[Node]:
    if not vs:
        raise ContractError("cannot encode an empty sequence")
    return list(vs)


def encode_bilstm(vs: list[Node], params: BiLSTMParams) -> list[Node]:
    """u_i = [forward state at i ; backward state at i], both hidden size d."""
    if not vs:
        raise ContractError("cannot encode an empty sequence")
    fw = _lstm_run(vs, params.directions["fw"], params.dim)
    bw = _lstm_run(list(reversed(vs)), params.directions["bw"], params.dim)
    bw.reverse()
    return [ad.concat([f, b]) for f, b in zip(fw, bw)]


def encode_attention(vs: list[Node]) -> list[Node]:
    """u_i = [v_i ; sum_j a_ij v_j], a_i = softmax over dot products v_i . v_j.

    The softmax runs over all j including j = i, so every token attends to
    itself as well as its neighbours. No learned parameters.
    """
    if not vs:
        raise ContractError("cannot encode an empty sequence")
    V = ad.stack(vs)
    out = []
    for v in vs:
        scores = ad.matmul(V, v)
        weights = ad.softmax(scores)
        context = ad.matmul(weights, V)
        out.append(ad.concat([v, context]))
    return out


# ---------------------------------------------------------------------------
# span representation and classifier


def span_vector(u: list[Node], span: tuple[int, int], extra: list[Node] | None = None) -> Node:
    """Concatenate span endpoint vectors, then the extra sequence's endpoints.

    Single-token spans contribute one vector instead of two, and a
    single-token extra contributes one; absent extras contribute nothing.
    """
    check_span(span, len(u))
    start, end = span
    parts = [u[start]]
    if end > start:
        parts.append(u[end])
    if extra is not None:
        if not extra:
            raise ContractError("extra sequence, when present, must be non-empty")
        parts.append(extra[0])
        if len(extra) > 1:
            parts.append(extra[-1])
    return ad.concat(parts)


class ClassifierHead:
    """Affine hidden layer to 300 units, dropout, ReLU, then softmax over labels."""

    def __init__(self, input_dim: int, num_labels: int, rng: np.random.Generator,
                 prefix: str = "head"):
        if input_dim < 1 or num_labels < 1:
            raise ContractError(f"bad head dims: input={input_dim}, labels={num_labels}")
        self.input_dim = input_dim
        self.num_labels = num_labels
        self.dropout_p = DROPOUT_P
        self.hidden_W = Parameter(prefix + ".hidden.W", _xavier(rng, HIDDEN_DIM, input_dim))
        self.hidden_b = Parameter(prefix + ".hidden.b", np.zeros(HIDDEN_DIM))
        self.W = Parameter(prefix + ".W", _xavier(rng, num_labels, HIDDEN_DIM))

    def parameters(self) -> list[Parameter]:
        return [self.hidden_W, self.hidden_b, self.W]


def classify(head: ClassifierHead, x: Node, train: bool = False,
             rng: np.random.Generator | None = None) -> Node:
    """softmax(W . ReLU(Dropout(hidden(x)))); dropout only in train mode."""
    if x.value.shape != (head.input_dim,):
        raise ContractError(
            f"classifier expects input of shape ({head.input_dim},), got {x.value.shape}"
        )
    h = ad.add(ad.matmul(head.hidden_W.node, x), head.hidden_b.node)
    if train:
        if rng is None:
            raise ContractError("train-mode classification needs an RNG for dropout")
        h = ad.dropout(h, head.dropout_p, rng, train=True)
    h = ad.relu(h)
    logits = ad.matmul(head.W.node, h)
    return ad.softmax(logits)


# ---------------------------------------------------------------------------
# constrained BIO decoding


def _may_precede_i(tag: str) -> bool:
    return tag == "I" or tag.startswith("B-")


def validate_tags(tags: list[str], inventory: tuple[str, ...] | None = None) -> None:
    """Raise ContractError unless every I follows a B-X or an I."""
    prev = None
    for pos, tag in enumerate(tags):
        if inventory is not None and tag not in inventory:
            raise ContractError(f"tag {tag!r} at position {pos} not in inventory")
        if tag == "I" and (prev is None or not _may_precede_i(prev)):
            raise ContractError(f"I at position {pos} lacks a preceding B-X or I")
        prev = tag


def decode_tags(distributions: np.ndarray, inventory: tuple[str, ...]) -> list[str]:
    """Best valid tag sequence by total log probability.

    Max-path dynamic programming over positions; transitions score zero
    except that entering I from anything but B-X/I (or starting on I) is
    forbidden outright.
    """
    probs = np.asarray(distributions, dtype=np.float64)
    n, T = probs.shape
    if T != len(inventory):
        raise ContractError(f"{T} columns for {len(inventory)} tags")
    if n < 1:
        raise ContractError("cannot decode an empty sequence")
    if all(tag == "I" for tag in inventory):
        raise ContractError("inventory admits no valid start tag")
    log_p = np.log(np.maximum(probs, 1e-300))
    is_i = np.array([tag == "I" for tag in inventory])
    feeds_i = np.array([_may_precede_i(tag) for tag in inventory])

    score = np.where(is_i, -np.inf, log_p[0])
    back = np.zeros((n, T), dtype=np.int64)
    for pos in range(1, n):
        prev = np.where(feeds_i, score, -np.inf)  # candidates for entering I
        best_any = int(np.argmax(score))
        best_i = int(np.argmax(prev))
        nxt = np.empty(T)
        for t in range(T):
            src = best_i if is_i[t] else best_any
            base = prev[best_i] if is_i[t] else score[best_any]
            nxt[t] = base + log_p[pos, t]
            back[pos, t] = src
        score = nxt

    tags_idx = [int(np.argmax(score))]
    for pos in range(n - 1, 0, -1):
        tags_idx.append(int(back[pos, tags_idx[-1]]))
    tags_idx.reverse()
    return [inventory[t] for t in tags_idx]


# ---------------------------------------------------------------------------
# the bound model


@dataclass(frozen=True)
class ModelConfig:
    dim: int
    num_layers: int
    encoding: str
    layer_mode: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "num_layers": self.num_layers,
            "encoding": self.encoding,
            "layer_mode": self.layer_mode,
            "seed": self.seed,
        }


class ProbeModel:
    """Trainable pieces bound to one task schema and one representation shape."""

    def __init__(self, schema: TaskSchema, config: ModelConfig):
        if config.encoding not in ENCODINGS:
            raise ConfigError(f"unknown encoding {config.encoding!r}")
        if config.layer_mode not in ("top", "all"):
            raise ConfigError(f"unknown layer mode {config.layer_mode!r}")
        if config.dim < 1 or config.num_layers < 1:
            raise ConfigError(f"bad representation shape: d={config.dim}, L={config.num_layers}")
        self.schema = schema
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.mix = ScalarMix(config.num_layers) if config.layer_mode == "all" else None
        self.encoder = BiLSTMParams(config.dim, rng) if config.encoding == ENC_BILSTM else None
        out_dim = encoder_output_dim(config.encoding, config.dim)
        self.output_dim = out_dim
        if schema.tagging:
            head_input = out_dim
        else:
            head_input = (schema.span_arity + schema.extra_arity) * out_dim
        self.head = ClassifierHead(head_input, len(schema.labels), rng)

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        if self.mix is not None:
            params.extend(self.mix.parameters())
        if self.encoder is not None:
            params.extend(self.encoder.parameters())
        params.extend(self.head.parameters())
        return params

    def token_vectors(self, seq: LayeredSequence) -> list[Node]:
        return mix_layers(seq, self.config.layer_mode, self.mix)

    def encode(self, vs: list[Node]) -> list[Node]:
        if self.config.encoding == ENC_NONE:
            return encode_none(vs)
        if self.config.encoding == ENC_BILSTM:
            return encode_bilstm(vs, self.encoder)
        return encode_attention(vs)

    def distribution(self, seq: LayeredSequence, span: tuple[int, int],
                     extra: LayeredSequence | None = None, train: bool = False,
                     rng: np.random.Generator | None = None) -> Node:
        """Label distribution for one span-classification example."""
        if self.schema.tagging:
            raise ContractError("tagging model cannot classify spans")
        u = self.encode(self.token_vectors(seq))
        u_extra = self.encode(self.token_vectors(extra)) if extra is not None else None
        x = span_vector(u, span, u_extra)
        return classify(self.head, x, train=train, rng=rng)

    def tag_distributions(self, seq: LayeredSequence, train: bool = False,
                          rng: np.random.Generator | None = None) -> list[Node]:
        """Per-token label distributions for one tagging example."""
        if not self.schema.tagging:
            raise ContractError("span-classification model cannot tag")
        u = self.encode(self.token_vectors(seq))
        return [classify(self.head, u_i, train=train, rng=rng) for u_i in u]

    def predict_label(self, seq: LayeredSequence, span: tuple[int, int],
                      extra: LayeredSequence | None = None) -> str:
        dist = self.distribution(seq, span, extra, train=False)
        return self.schema.labels[int(np.argmax(dist.value))]

    def predict_tags(self, seq: LayeredSequence) -> list[str]:
        dists = self.tag_distributions(seq, train=False)
        matrix = np.stack([d.value for d in dists])
        return decode_tags(matrix, self.schema.labels)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str, model: ProbeModel) -> None:
    """Write config, schema, seed, and all parameters as float32 blocks."""
    params = model.parameters()
    header = {
        "config": model.config.to_dict(),
        "schema": model.schema.to_dict(),
        "params": [{"name": p.name, "shape": list(p.value.shape)} for p in params],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for p in params:
            fh.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())


def load_checkpoint(path: str) -> ProbeModel:
    """Rebuild a model from a checkpoint; parameter values are restored as f32."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: bad checkpoint magic {magic!r}")
        raw = fh.read(8)
        if len(raw) != 8:
            raise FormatError(f"{path}: truncated checkpoint header")
        version, blob_len = struct.unpack("<II", raw)
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        blob = fh.read(blob_len)
        if len(blob) != blob_len:
            raise FormatError(f"{path}: truncated checkpoint header")
        header = json.loads(blob.decode("utf-8"))
        schema = TaskSchema.from_dict(header["schema"])
        config = ModelConfig(**header["config"])
        model = ProbeModel(schema, config)
        params = model.parameters()
        manifest = header["params"]
        if [p.name for p in params] != [m["name"] for m in manifest]:
            raise FormatError(f"{path}: parameter manifest does not match model layout")
        for p, m in zip(params, manifest):
            shape = tuple(m["shape"])
            if p.value.shape != shape:
                raise FormatError(
                    f"{path}: parameter {p.name} has shape {shape}, model expects {p.value.shape}"
                )
            count = int(np.prod(shape)) if shape else 1
            values = np.fromfile(fh, dtype="<f4", count=count)
            if values.size != count:
                raise FormatError(f"{path}: truncated block for parameter {p.name}")
            p.node.value = values.astype(np.float64).reshape(shape)
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after parameter blocks")
    return model
