"""Example and dataset containers, tokenization, and JSONL serialization."""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, FormatError, LabelError
from ..model import TaskSchema

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Whitespace and punctuation splitting; surface forms are preserved."""
    return _TOKEN_RE.findall(text)


def stable_seed(master_seed: int, key: str) -> list[int]:
    """Seed material for a per-item RNG that doesn't depend on processing order."""
    digest = hashlib.sha1(key.encode("utf-8")).digest()
    return [master_seed, int.from_bytes(digest[:8], "little")]


@dataclass
class Example:
    """One task instance: a token sequence plus what the classifier must decide.

    Classification examples carry a span (and sometimes an extra sequence)
    and a label; tagging examples carry per-token tags instead. The anchor is
    the lexical-split key keeping related examples in one split.
    """

    id: str
    tokens: list[str]
    anchor: str
    task: str
    span: tuple[int, int] | None = None
    extra: list[str] | None = None
    label: str | None = None
    tags: list[str] | None = None

    def __post_init__(self):
        if not self.tokens:
            raise ContractError(f"example {self.id}: empty token sequence")
        if self.tags is None:
            if self.label is None:
                raise ContractError(f"example {self.id}: needs a label or tags")
            if self.span is not None:
                start, end = self.span
                if not (0 <= start <= end < len(self.tokens)):
                    raise ContractError(
                        f"example {self.id}: span {self.span} outside {len(self.tokens)} tokens"
                    )
            if self.extra is not None and not self.extra:
                raise ContractError(f"example {self.id}: extra, when present, must be non-empty")
        else:
            if self.label is not None or self.span is not None or self.extra is not None:
                raise ContractError(f"example {self.id}: tags exclude span/extra/label")
            if len(self.tags) != len(self.tokens):
                raise ContractError(
                    f"example {self.id}: {len(self.tags)} tags for {len(self.tokens)} tokens"
                )

    def to_json(self) -> str:
        if self.tags is not None:
            record = {
                "id": self.id,
                "tokens": self.tokens,
                "tags": self.tags,
                "anchor": self.anchor,
                "task": self.task,
            }
        else:
            record = {
                "id": self.id,
                "tokens": self.tokens,
                "span": list(self.span) if self.span is not None else None,
                "extra": self.extra,
                "label": self.label,
                "anchor": self.anchor,
                "task": self.task,
            }
        return json.dumps(record, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(line: str) -> "Example":
        record = json.loads(line)
        span = record.get("span")
        return Example(
            id=record["id"],
            tokens=record["tokens"],
            anchor=record["anchor"],
            task=record["task"],
            span=tuple(span) if span is not None else None,
            extra=record.get("extra"),
            label=record.get("label"),
            tags=record.get("tags"),
        )


@dataclass
class TaskDataset:
    """Schema plus the three lexically disjoint splits."""

    schema: TaskSchema
    train: list[Example] = field(default_factory=list)
    validation: list[Example] = field(default_factory=list)
    test: list[Example] = field(default_factory=list)

    SPLIT_NAMES = ("train", "validation", "test")

    def split(self, name: str) -> list[Example]:
        if name not in self.SPLIT_NAMES:
            raise ContractError(f"unknown split {name!r}")
        return getattr(self, name)

    def all_examples(self) -> list[Example]:
        return self.train + self.validation + self.test

    def anchor_sets(self) -> tuple[set[str], set[str], set[str]]:
        return tuple({ex.anchor for ex in self.split(s)} for s in self.SPLIT_NAMES)

    def check_anchor_disjointness(self) -> None:
        tr, va, te = self.anchor_sets()
        overlap = (tr & va) | (tr & te) | (va & te)
        if overlap:
            raise ContractError(f"anchors cross splits: {sorted(overlap)[:5]}")

    def check_labels(self) -> None:
        for ex in self.all_examples():
            if ex.tags is not None:
                for tag in ex.tags:
                    if tag not in self.schema.labels:
                        raise LabelError(f"example {ex.id}: tag {tag!r} not in schema")
            elif ex.label not in self.schema.labels:
                raise LabelError(f"example {ex.id}: label {ex.label!r} not in schema")


def write_dataset(out_dir: str, dataset: TaskDataset) -> None:
    """Write one JSONL file per split plus the schema, deterministically."""
    os.makedirs(out_dir, exist_ok=True)
    for name in TaskDataset.SPLIT_NAMES:
        path = os.path.join(out_dir, f"{name}.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            for ex in dataset.split(name):
                fh.write(ex.to_json() + "\n")
    with open(os.path.join(out_dir, "schema.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(dataset.schema.to_dict(), sort_keys=True, separators=(",", ":")))
        fh.write("\n")


def read_dataset(data_dir: str) -> TaskDataset:
    schema_path = os.path.join(data_dir, "schema.json")
    try:
        with open(schema_path, "r", encoding="utf-8") as fh:
            schema = TaskSchema.from_dict(json.load(fh))
    except FileNotFoundError:
        raise FormatError(f"{data_dir}: missing schema.json") from None
    except (json.JSONDecodeError, KeyError) as exc:
        raise FormatError(f"{schema_path}: unreadable schema ({exc})") from None
    splits = {}
    for name in TaskDataset.SPLIT_NAMES:
        path = os.path.join(data_dir, f"{name}.jsonl")
        examples = []
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        examples.append(Example.from_json(line))
                    except (json.JSONDecodeError, KeyError, ContractError) as exc:
                        raise FormatError(f"{path}:{lineno}: bad example ({exc})") from None
        except FileNotFoundError:
            raise FormatError(f"{data_dir}: missing {name}.jsonl") from None
        splits[name] = examples
    dataset = TaskDataset(schema=schema, **splits)
    dataset.check_labels()
    return dataset


def write_report(path: str, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2))
        fh.write("\n")


def label_distribution(examples: list[Example]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for ex in examples:
        keys = ex.tags if ex.tags is not None else [ex.label]
        for key in keys:
            counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))


def item_rng(master_seed: int, key: str) -> np.random.Generator:
    return np.random.default_rng(stable_seed(master_seed, key))
