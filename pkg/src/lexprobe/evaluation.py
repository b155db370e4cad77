"""Training with early stopping, metrics, majority baselines, grids, ablations.

Training minimizes mean cross-entropy over the train split and watches the
task's headline metric (accuracy, or span F1 for tagging) on validation; the
best-validation parameters are restored at the end. All randomness (batch
order, dropout) flows from the config seed, so a run is a pure function of
(dataset, embeddings, config).
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .embeddings import (
    ContextualStore,
    EmbeddingTable,
    LayeredSequence,
    embed,
    source_dim,
    source_layers,
)
from .errors import ConfigError, ContractError
from .model import ModelConfig, ProbeModel, TaskSchema
from .tasks.base import Example, TaskDataset

MASK_TOKEN = "something"

ABLATION_FULL = "full"
ABLATION_MINUS_PHRASE = "minus-phrase"
ABLATION_MINUS_CONTEXT = "minus-context"
ABLATION_MINUS_BOTH = "minus-both"
ABLATION_MODES = (
    ABLATION_FULL,
    ABLATION_MINUS_PHRASE,
    ABLATION_MINUS_CONTEXT,
    ABLATION_MINUS_BOTH,
)

Source = EmbeddingTable | ContextualStore


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 500
    patience: int = 20
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32

    def __post_init__(self):
        if self.patience >= self.max_epochs:
            raise ConfigError(
                f"patience ({self.patience}) must be below max_epochs ({self.max_epochs})"
            )
        if self.max_epochs < 1 or self.batch_size < 1:
            raise ConfigError("max_epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")


@dataclass
class EvalReport:
    metric: str
    value: float
    predictions: list[dict]
    epochs_run: int | None = None
    best_epoch: int | None = None
    layer_weights: list[float] | None = None
    gamma: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "value": self.value,
            "predictions": self.predictions,
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "layer_weights": self.layer_weights,
            "gamma": self.gamma,
            "extras": self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# metrics


def accuracy(gold: list[str], pred: list[str]) -> float:
    if len(gold) != len(pred) or not gold:
        raise ContractError(f"accuracy over {len(gold)} gold vs {len(pred)} predicted labels")
    return sum(g == p for g, p in zip(gold, pred)) / len(gold)


def extract_spans(tags: list[str]) -> set[tuple[int, int, str]]:
    """Maximal (start, end, type) runs of B-X followed by Is; O forms no span."""
    spans = set()
    start, span_type = None, None
    for pos, tag in enumerate(tags):
        if tag.startswith("B-"):
            if start is not None:
                spans.add((start, pos - 1, span_type))
            start, span_type = pos, tag[2:]
        elif tag == "I":
            if start is None:
                raise ContractError(f"I at position {pos} lacks a preceding B-X or I")
        else:
            if start is not None:
                spans.add((start, pos - 1, span_type))
            start, span_type = None, None
    if start is not None:
        spans.add((start, len(tags) - 1, span_type))
    return spans


def span_f1(gold: list[list[str]], pred: list[list[str]]) -> tuple[float, float, float]:
    """Micro precision/recall/F1 over exact (boundary, type) span matches."""
    if len(gold) != len(pred):
        raise ContractError(f"{len(gold)} gold vs {len(pred)} predicted sequences")
    matched = gold_total = pred_total = 0
    for idx, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise ContractError(f"sequence {idx}: {len(g)} gold vs {len(p)} predicted tags")
        g_spans = extract_spans(g)
        p_spans = extract_spans(p)
        matched += len(g_spans & p_spans)
        gold_total += len(g_spans)
        pred_total += len(p_spans)
    precision = matched / pred_total if pred_total else 0.0
    recall = matched / gold_total if gold_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def headline_metric_name(schema: TaskSchema) -> str:
    return "span_f1" if schema.tagging else "accuracy"


# ---------------------------------------------------------------------------
# embedding preparation and losses


def _prepare_sequences(examples: list[Example], source: Source) -> dict[str, tuple]:
    """Embed every sentence (and extra) once; graphs are rebuilt per pass anyway."""
    table: dict[str, tuple] = {}
    for ex in examples:
        seq = embed(source, ex.tokens)
        extra_seq = embed(source, ex.extra) if ex.extra is not None else None
        table[ex.id] = (seq, extra_seq)
    return table


def _example_loss(model: ProbeModel, ex: Example, seqs: dict,
                  rng: np.random.Generator) -> Node:
    seq, extra_seq = seqs[ex.id]
    if model.schema.tagging:
        dists = model.tag_distributions(seq, train=True, rng=rng)
        losses = [
            ad.cross_entropy(dist, model.schema.label_index(tag))
            for dist, tag in zip(dists, ex.tags)
        ]
        total = losses[0]
        for loss in losses[1:]:
            total = ad.add(total, loss)
        return ad.scale(total, 1.0 / len(losses))
    dist = model.distribution(seq, ex.span, extra_seq, train=True, rng=rng)
    return ad.cross_entropy(dist, model.schema.label_index(ex.label))


def _predictions(model: ProbeModel, examples: list[Example], seqs: dict) -> list[dict]:
    preds = []
    for ex in examples:
        seq, extra_seq = seqs[ex.id]
        if model.schema.tagging:
            preds.append({"id": ex.id, "gold": list(ex.tags), "pred": model.predict_tags(seq)})
        else:
            preds.append({
                "id": ex.id,
                "gold": ex.label,
                "pred": model.predict_label(seq, ex.span, extra_seq),
            })
    return preds


def _metric_from_predictions(schema: TaskSchema, preds: list[dict]) -> tuple[float, dict]:
    if schema.tagging:
        precision, recall, f1 = span_f1(
            [p["gold"] for p in preds], [p["pred"] for p in preds]
        )
        return f1, {"precision": precision, "recall": recall}
    value = accuracy([p["gold"] for p in preds], [p["pred"] for p in preds])
    return value, {}


def _mix_state(model: ProbeModel) -> tuple[list[float] | None, float | None]:
    if model.mix is None:
        return None, None
    weights = [float(w) for w in model.mix.normalized_weights()]
    return weights, float(model.mix.gamma.value)


# ---------------------------------------------------------------------------
# training


def train(model: ProbeModel, dataset: TaskDataset, source: Source,
          cfg: TrainConfig) -> EvalReport:
    """Fit the model in place; returns the best-validation report."""
    if dataset.schema != model.schema:
        raise ContractError("model schema does not match dataset schema")
    if not dataset.train:
        raise ConfigError("empty train split")
    if not dataset.validation:
        raise ConfigError("empty validation split (early stopping needs one)")

    seqs = _prepare_sequences(dataset.train + dataset.validation, source)
    params = model.parameters()
    optimizer = ad.Adam(lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps)
    rng = np.random.default_rng(cfg.seed)

    best_value = -np.inf
    best_epoch = 0
    best_state: dict[str, np.ndarray] = {}
    stale = 0
    history = []
    epochs_run = 0

    for epoch in range(1, cfg.max_epochs + 1):
        epochs_run = epoch
        order = rng.permutation(len(dataset.train))
        batch_losses = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = [dataset.train[i] for i in order[lo:lo + cfg.batch_size]]
            losses = [_example_loss(model, ex, seqs, rng) for ex in batch]
            total = losses[0]
            for loss in losses[1:]:
                total = ad.add(total, loss)
            batch_loss = ad.scale(total, 1.0 / len(losses))
            ad.backward(batch_loss)
            optimizer.step(params)
            batch_losses.append(float(batch_loss.value))

        val_preds = _predictions(model, dataset.validation, seqs)
        val_value, _ = _metric_from_predictions(model.schema, val_preds)
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(batch_losses)),
            "validation": val_value,
        })
        if val_value > best_value:
            best_value = val_value
            best_epoch = epoch
            best_state = {p.name: p.value.copy() for p in params}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    for p in params:
        p.node.value = best_state[p.name].copy()

    val_preds = _predictions(model, dataset.validation, seqs)
    value, metric_extras = _metric_from_predictions(model.schema, val_preds)
    weights, gamma = _mix_state(model)
    return EvalReport(
        metric=headline_metric_name(model.schema),
        value=value,
        predictions=val_preds,
        epochs_run=epochs_run,
        best_epoch=best_epoch,
        layer_weights=weights,
        gamma=gamma,
        extras={"history": history, **metric_extras},
    )


def evaluate(model: ProbeModel, examples: list[Example], source: Source) -> EvalReport:
    """Frozen-parameter evaluation on a split."""
    if not examples:
        raise ConfigError("nothing to evaluate")
    seqs = _prepare_sequences(examples, source)
    preds = _predictions(model, examples, seqs)
    value, metric_extras = _metric_from_predictions(model.schema, preds)
    weights, gamma = _mix_state(model)
    return EvalReport(
        metric=headline_metric_name(model.schema),
        value=value,
        predictions=preds,
        layer_weights=weights,
        gamma=gamma,
        extras=metric_extras,
    )


# ---------------------------------------------------------------------------
# majority baselines


def _mode_label(counts: dict[str, int]) -> str:
    best = max(counts.values())
    return min(label for label, count in counts.items() if count == best)


def majority_baseline(variant: str, train_examples: list[Example],
                      test_examples: list[Example]) -> EvalReport:
    """Assign train-set mode labels: globally, or per first/last span token.

    Ties break toward the lexicographically smallest label; test constituents
    unseen in training fall back to the global mode.
    """
    if variant not in ("all", "first", "last"):
        raise ConfigError(f"unknown baseline variant {variant!r}")
    if not train_examples or not test_examples:
        raise ConfigError("baseline needs non-empty train and test splits")

    tagging = train_examples[0].tags is not None
    if tagging:
        if variant != "all":
            raise ConfigError("first/last baselines need span classification, not tagging")
        counts: dict[str, int] = {}
        for ex in train_examples:
            for tag in ex.tags:
                counts[tag] = counts.get(tag, 0) + 1
        mode = _mode_label(counts)
        preds = [
            {"id": ex.id, "gold": list(ex.tags), "pred": [mode] * len(ex.tokens)}
            for ex in test_examples
        ]
        precision, recall, f1 = span_f1(
            [p["gold"] for p in preds], [p["pred"] for p in preds]
        )
        return EvalReport(
            metric="span_f1", value=f1, predictions=preds,
            extras={"variant": variant, "precision": precision, "recall": recall,
                    "mode_label": mode},
        )

    global_counts: dict[str, int] = {}
    for ex in train_examples:
        global_counts[ex.label] = global_counts.get(ex.label, 0) + 1
    global_mode = _mode_label(global_counts)

    def constituent(ex: Example) -> str:
        if ex.span is None:
            raise ConfigError("first/last baselines need span examples")
        idx = ex.span[0] if variant == "first" else ex.span[1]
        return ex.tokens[idx].lower()

    if variant == "all":
        def predict(ex: Example) -> str:
            return global_mode
    else:
        per_key: dict[str, dict[str, int]] = {}
        for ex in train_examples:
            key = constituent(ex)
            per_key.setdefault(key, {})
            per_key[key][ex.label] = per_key[key].get(ex.label, 0) + 1
        key_modes = {key: _mode_label(counts) for key, counts in per_key.items()}

        def predict(ex: Example) -> str:
            return key_modes.get(constituent(ex), global_mode)

    preds = [{"id": ex.id, "gold": ex.label, "pred": predict(ex)} for ex in test_examples]
    value = accuracy([p["gold"] for p in preds], [p["pred"] for p in preds])
    return EvalReport(
        metric="accuracy", value=value, predictions=preds,
        extras={"variant": variant, "mode_label": global_mode},
    )


# ---------------------------------------------------------------------------
# experiment grid


def _cell_seed(master_seed: int, name: str) -> int:
    digest = hashlib.sha1(f"{master_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def grid_settings(source: Source) -> list[tuple[str, str]]:
    """(layer mode, encoding) rows: 6 for layered sources, 3 for static."""
    encodings = ("none", "bilstm", "attention")
    if source_layers(source) > 1:
        return [("top", e) for e in encodings] + [("all", e) for e in encodings]
    return [("top", e) for e in encodings]


def _run_cell(dataset: TaskDataset, source: Source, layer_mode: str, encoding: str,
              cfg: TrainConfig, master_seed: int) -> dict:
    seed = _cell_seed(master_seed, f"{layer_mode}:{encoding}")
    cell_cfg = replace(cfg, seed=seed)
    model = ProbeModel(dataset.schema, ModelConfig(
        dim=source_dim(source),
        num_layers=source_layers(source),
        encoding=encoding,
        layer_mode=layer_mode,
        seed=seed,
    ))
    train_report = train(model, dataset, source, cell_cfg)
    test_report = evaluate(model, dataset.test, source) if dataset.test else None
    return {
        "layer": layer_mode,
        "encoding": encoding,
        "seed": seed,
        "validation": train_report.to_dict(),
        "test": test_report.to_dict() if test_report else None,
    }


def run_grid(dataset: TaskDataset, source: Source, cfg: TrainConfig,
             master_seed: int, jobs: int = 1) -> list[dict]:
    """Train and evaluate every (layer, encoding) combination independently."""
    if not dataset.test:
        raise ConfigError("grid needs a test split")
    settings = grid_settings(source)
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_cell, dataset, source, layer, enc, cfg, master_seed)
                for layer, enc in settings
            ]
            return [f.result() for f in futures]
    return [
        _run_cell(dataset, source, layer, enc, cfg, master_seed)
        for layer, enc in settings
    ]


def grid_table(rows: list[dict]) -> str:
    """Aligned text table of grid results: one row per layer/encoding cell."""
    header = ("Layer", "Encoding", "Validation", "Test")
    body = []
    for row in rows:
        test = row["test"]
        body.append((
            row["layer"],
            row["encoding"],
            f"{row['validation']['value']:.3f}",
            f"{test['value']:.3f}" if test else "-",
        ))
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) for i in range(4)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(4)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# ablations


def _uniform_span_arity(examples: list[Example]) -> int:
    lengths = {1 if ex.span[0] == ex.span[1] else 2 for ex in examples}
    if len(lengths) != 1:
        raise ConfigError("ablation produced mixed single/multi-token spans")
    return lengths.pop()


def transform_for_ablation(dataset: TaskDataset, mode: str) -> TaskDataset:
    """Rewrite inputs per ablation mode; counts, ids, and labels are untouched."""
    if mode not in ABLATION_MODES:
        raise ConfigError(f"unknown ablation mode {mode!r}")
    schema = dataset.schema
    if schema.tagging or schema.span_arity == 0 or schema.extra_arity == 0:
        raise ConfigError("ablations need a task with both a span and an extra input")
    if mode == ABLATION_FULL:
        return dataset

    def rewrite(ex: Example) -> Example:
        start, end = ex.span
        if mode == ABLATION_MINUS_PHRASE:
            tokens = ex.tokens[:start] + [MASK_TOKEN] + ex.tokens[end + 1:]
            return Example(id=ex.id, tokens=tokens, span=(start, start), extra=ex.extra,
                           label=ex.label, anchor=ex.anchor, task=ex.task)
        if mode == ABLATION_MINUS_CONTEXT:
            tokens = ex.tokens[start:end + 1]
            return Example(id=ex.id, tokens=tokens, span=(0, end - start), extra=ex.extra,
                           label=ex.label, anchor=ex.anchor, task=ex.task)
        tokens = list(ex.extra)
        return Example(id=ex.id, tokens=tokens, span=(0, len(tokens) - 1), extra=None,
                       label=ex.label, anchor=ex.anchor, task=ex.task)

    splits = {
        name: [rewrite(ex) for ex in dataset.split(name)]
        for name in TaskDataset.SPLIT_NAMES
    }
    transformed = [ex for split in splits.values() for ex in split]
    new_schema = TaskSchema(
        labels=schema.labels,
        span_arity=_uniform_span_arity(transformed),
        extra_arity=0 if mode == ABLATION_MINUS_BOTH else schema.extra_arity,
        tagging=False,
    )
    return TaskDataset(schema=new_schema, **splits)


def run_ablation(dataset: TaskDataset, mode: str, source: Source, encoding: str,
                 layer_mode: str, cfg: TrainConfig) -> EvalReport:
    """Train on the ablated inputs and report test performance."""
    ablated = transform_for_ablation(dataset, mode)
    model = ProbeModel(ablated.schema, ModelConfig(
        dim=source_dim(source),
        num_layers=source_layers(source),
        encoding=encoding,
        layer_mode=layer_mode,
        seed=cfg.seed,
    ))
    train_report = train(model, ablated, source, cfg)
    report = evaluate(model, ablated.test, source)
    report.epochs_run = train_report.epochs_run
    report.best_epoch = train_report.best_epoch
    report.extras["mode"] = mode
    report.extras["validation_value"] = train_report.value
    return report


def inspect_layer_weights(model: ProbeModel) -> dict:
    """Normalized layer weights and gamma of an All-mode model."""
    if model.mix is None:
        raise ConfigError("layer weights exist only for layer mode 'all'")
    weights, gamma = _mix_state(model)
    return {
        "weights": [{"layer": i, "weight": w} for i, w in enumerate(weights)],
        "gamma": gamma,
    }
