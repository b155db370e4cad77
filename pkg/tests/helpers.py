"""Shared fixtures-by-hand: synthetic sources and numeric test utilities."""

import numpy as np

from lexprobe import model as md
from lexprobe.embeddings import ContextualStore, EmbeddingTable, LayeredSequence, sentence_id
from lexprobe.tasks import ContextIndex, Example, TaskDataset

FILLER = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
    "india", "juliet", "kilo", "lima", "mike", "november", "oscar", "papa",
]


def phrase_sentences(phrase, k, length=16):
    """k distinct 15-20 token sentences each containing the phrase contiguously."""
    assert 15 <= length <= 20
    out = []
    for i in range(k):
        pad = length - len(phrase)
        filler = [FILLER[(i + j) % len(FILLER)] + str(i) for j in range(pad)]
        cut = (i % 3) + 2
        out.append(filler[:cut] + list(phrase) + filler[cut:])
    return out


def make_index(phrases, k_each=3):
    index = ContextIndex()
    for phrase in phrases:
        for sentence in phrase_sentences(phrase, k_each):
            index.add(phrase, sentence)
    return index


def write_corpus(path, sentences):
    with open(path, "w", encoding="utf-8") as fh:
        for tokens in sentences:
            fh.write(" ".join(tokens) + "\n")


# --- learnable synthetic classification data ---------------------------------


def marker_dataset(per_split=(8, 4, 4), with_extra=False, task="synthetic"):
    """Two-class dataset where the span tokens' identity decides the label.

    Split s, example i of class c has tokens [<c><s><i>a, <c><s><i>b] and the
    span covers both, so any encoder that passes the word vectors through can
    separate the classes once the vectors carry a class direction.
    """
    extra_arity = 1 if with_extra else 0
    schema = md.TaskSchema(labels=("pos", "neg"), span_arity=2, extra_arity=extra_arity)
    splits = {}
    for s, (name, count) in enumerate(zip(TaskDataset.SPLIT_NAMES, per_split)):
        examples = []
        for i in range(count):
            cls = "pos" if i % 2 == 0 else "neg"
            stem = f"{cls}{s}x{i}"
            tokens = [stem + "a", stem + "b"]
            examples.append(Example(
                id=f"{name}-{i}", tokens=tokens, span=(0, 1),
                extra=[stem + "a"] if with_extra else None,
                label=cls, anchor=stem, task=task))
        splits[name] = examples
    return TaskDataset(schema=schema, **splits)


def marker_table(dataset, dim=4, noise=0.05, seed=0):
    """Static vectors for a marker_dataset: +/-2 on axis 0 by class, plus noise."""
    gen = np.random.default_rng(seed)
    table = EmbeddingTable(dim)
    for ex in dataset.all_examples():
        for token in ex.tokens + (ex.extra or []):
            if token in table:
                continue
            direction = 2.0 if token.startswith("pos") else -2.0
            vec = noise * gen.standard_normal(dim)
            vec[0] += direction
            table.add(token, vec)
    return table


def store_from_table(dataset, table, num_layers=2, signal_layer=None,
                     noise=0.3, seed=0):
    """Contextual store covering a dataset's sentences.

    Every layer carries the static vector plus layer-specific noise; when
    signal_layer is given, all OTHER layers are pure noise instead, which
    makes that layer the only useful one.
    """
    gen = np.random.default_rng(seed)
    store = ContextualStore(table.dim, num_layers)
    sentences = []
    for ex in dataset.all_examples():
        sentences.append(ex.tokens)
        if ex.extra:
            sentences.append(ex.extra)
    for tokens in sentences:
        sid = sentence_id(tokens)
        if sid in store:
            continue
        rows = np.stack([table.lookup(t) for t in tokens])
        layers = []
        for layer in range(num_layers):
            if signal_layer is not None and layer != signal_layer:
                layers.append(noise * gen.standard_normal(rows.shape))
            else:
                layers.append(rows + noise * 0.1 * gen.standard_normal(rows.shape))
        store.add(sid, np.stack(layers))
    return store


def classifier_input(model, seq, span, extra=None):
    """The vector the classifier head sees for one span example."""
    u = model.encode(model.token_vectors(seq))
    u_extra = model.encode(model.token_vectors(extra)) if extra is not None else None
    return md.span_vector(u, span, u_extra).value


def token_inputs(model, seq):
    """Per-token classifier inputs for a tagging example."""
    return [u.value for u in model.encode(model.token_vectors(seq))]


def widen_relu_margins(model, inputs, margin=5e-3, bump=0.05):
    """Push hidden pre-activations away from the ReLU kink.

    Finite differences are only valid where the loss is differentiable; a
    pre-activation within `margin` of zero can flip sign under perturbation
    and poison the comparison even though the analytic gradient is correct.
    Shifting the hidden bias for the offending units keeps the check honest.
    """
    head = model.head
    for x in inputs:
        h = head.hidden_W.value @ x + head.hidden_b.value
        near = np.abs(h) < margin
        head.hidden_b.value[near] += np.where(h[near] >= 0, bump, -bump)
