"""Train a verb-particle probe twice, over vectors that do and do not carry
the distinction, to show that the probe only surfaces what the frozen
representation already knows."""

import numpy as np

from lexprobe.embeddings import EmbeddingTable
from lexprobe.evaluation import TrainConfig, evaluate, majority_baseline, train
from lexprobe.model import ModelConfig, ProbeModel
from lexprobe.tasks.builders import build_vpc

# 30 verbs, two sentences each; even verbs form a real verb-particle pair
rows = []
for i in range(30):
    label = i % 2 == 0
    for j in range(2):
        rows.append({"line": len(rows) + 1,
                     "tokens": ["they", f"verb{i}", "up", "the", "case", f"c{i}{j}"],
                     "verb": 1, "prep": 2, "label": label})

dataset, report = build_vpc(rows, seed=0)
print("emitted", report["emitted"])
print("anchors never cross splits:", report["anchors"])

baseline = majority_baseline("all", dataset.train, dataset.test)
print(f"majority baseline        test accuracy {baseline.value:.3f}")

cfg = TrainConfig(max_epochs=80, patience=15, seed=0, learning_rate=5e-3)


def run(table, note):
    model = ProbeModel(dataset.schema, ModelConfig(dim=table.dim, num_layers=1,
                                                   encoding="none",
                                                   layer_mode="top", seed=1))
    train(model, dataset, table, cfg)
    test = evaluate(model, dataset.test, table)
    print(f"{note} test accuracy {test.value:.3f}")


# purely random vectors: the split is lexical, so memorized verbs are useless
# on the held-out ones and the probe stays near the baseline
gen = np.random.default_rng(0)
random_table = EmbeddingTable(12)
for ex in dataset.all_examples():
    for token in ex.tokens:
        if token not in random_table:
            random_table.add(token, gen.standard_normal(12))
run(random_table, "random vectors          ")

# vectors that encode the verb's class on one axis, standing in for a
# pretrained representation that has learned the distinction
informed_table = EmbeddingTable(12)
for ex in dataset.all_examples():
    for token in ex.tokens:
        if token in informed_table:
            continue
        vec = 0.1 * gen.standard_normal(12)
        if token.startswith("verb"):
            vec[0] += 2.0 if int(token[4:]) % 2 == 0 else -2.0
        informed_table.add(token, vec)
run(informed_table, "class-bearing vectors   ")
