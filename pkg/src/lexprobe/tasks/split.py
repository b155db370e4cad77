"""Lexically constrained train/validation/test splitting.

All examples sharing an anchor land in one split. Anchors are shuffled with
the seed and assigned greedily: each goes to the split whose relative fill
(assigned examples plus the anchor's examples, over the split's target) is
smallest, ties favoring train, then validation. With enough anchors this
tracks the requested ratios to within anchor granularity.
"""

from __future__ import annotations

import numpy as np

from ..errors import SplitError
from ..model import TaskSchema
from .base import Example, TaskDataset

DEFAULT_RATIOS = (0.8, 0.1, 0.1)
SKEW_TOLERANCE = 0.02  # flag splits more than 2 percentage points off target


def lexical_split(
    examples: list[Example],
    schema: TaskSchema,
    seed: int,
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
) -> tuple[TaskDataset, dict]:
    """Partition examples by anchor; returns the dataset and split statistics."""
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) <= 0:
        raise SplitError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    if not examples:
        raise SplitError("nothing to split")

    groups: dict[str, list[Example]] = {}
    for ex in examples:
        groups.setdefault(ex.anchor, []).append(ex)
    anchors = list(groups)
    if len(anchors) < 3:
        raise SplitError(f"need at least 3 distinct anchors, got {len(anchors)}")

    rng = np.random.default_rng(seed)
    order = [anchors[i] for i in rng.permutation(len(anchors))]

    total = len(examples)
    targets = [r * total for r in ratios]
    assigned = [0, 0, 0]
    anchor_split: dict[str, int] = {}
    for anchor in order:
        size = len(groups[anchor])
        fills = [(assigned[s] + size) / targets[s] for s in range(3)]
        split = int(np.argmin(fills))  # argmin takes the first minimum: train, then validation
        anchor_split[anchor] = split
        assigned[split] += size

    buckets: tuple[list[Example], ...] = ([], [], [])
    for ex in examples:
        buckets[anchor_split[ex.anchor]].append(ex)
    dataset = TaskDataset(schema=schema, train=buckets[0], validation=buckets[1], test=buckets[2])
    dataset.check_anchor_disjointness()

    fractions = [len(b) / total for b in buckets]
    deviations = [abs(f - r) for f, r in zip(fractions, ratios)]
    stats = {
        "examples": {name: len(b) for name, b in zip(TaskDataset.SPLIT_NAMES, buckets)},
        "anchors": {
            name: sum(1 for s in anchor_split.values() if s == i)
            for i, name in enumerate(TaskDataset.SPLIT_NAMES)
        },
        "fractions": [round(f, 6) for f in fractions],
        "skew_flagged": bool(max(deviations) > SKEW_TOLERANCE),
    }
    return dataset, stats
