"""Learn a scalar mix over the layers of a contextual store in which only one
layer is informative, and watch the mix concentrate on it."""

import numpy as np

from lexprobe.embeddings import ContextualStore, sentence_id
from lexprobe.evaluation import TrainConfig, inspect_layer_weights, train
from lexprobe.model import ModelConfig, ProbeModel, TaskSchema
from lexprobe.tasks import Example, TaskDataset

schema = TaskSchema(labels=("pos", "neg"), span_arity=2, extra_arity=0)
gen = np.random.default_rng(0)

# two-token phrases; layer 1 carries the label on axis 0 under mild noise,
# layers 0 and 2 are pure unit noise that a uniform mix would average in
SIGNAL_LAYER = 1
splits = {"train": 60, "validation": 8, "test": 8}
examples, store = {}, ContextualStore(8, 3)
counter = 0
for split, count in splits.items():
    examples[split] = []
    for i in range(count):
        label = "pos" if i % 2 == 0 else "neg"
        tokens = [f"{label}{counter}a", f"{label}{counter}b"]
        counter += 1
        layers = gen.standard_normal((3, 2, 8))
        layers[SIGNAL_LAYER] *= 0.3
        layers[SIGNAL_LAYER, :, 0] += 1.0 if label == "pos" else -1.0
        store.add(sentence_id(tokens), layers)
        examples[split].append(Example(id=f"{split}-{i}", tokens=tokens,
                                       span=(0, 1), label=label,
                                       anchor=tokens[0], task="demo"))
dataset = TaskDataset(schema=schema, **examples)

model = ProbeModel(schema, ModelConfig(dim=8, num_layers=3, encoding="none",
                                       layer_mode="all", seed=3))
report = train(model, dataset, store,
               TrainConfig(max_epochs=300, patience=50, seed=0,
                           learning_rate=1e-2))
print(f"validation {report.metric} {report.value:.3f} "
      f"(best epoch {report.best_epoch}, ran {report.epochs_run})")

mix = inspect_layer_weights(model)
for row in mix["weights"]:
    marker = "  <- signal lives here" if row["layer"] == SIGNAL_LAYER else ""
    print(f"layer {row['layer']} weight {row['weight']:.3f}{marker}")
print(f"gamma {mix['gamma']:.3f}")
