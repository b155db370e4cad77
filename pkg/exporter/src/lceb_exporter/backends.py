"""Embedding backends.

Every backend exposes ``embed(tokens) -> (L, n, d) array`` aligned one-to-one
with the input tokens. ``HashStaticBackend`` additionally exposes
``vector(word)`` for static vocabulary exports.
"""

import hashlib

import numpy as np

from .format import ExportError

NGRAM_MIN = 3
NGRAM_MAX = 5


class HashStaticBackend:
    """Static vectors built from hashed character n-grams.

    A word is wrapped in boundary markers, decomposed into character 3-5
    grams plus the whole marked word, and each n-gram addresses one of
    ``buckets`` seeded Gaussian vectors; the word vector is the mean over its
    n-grams. The same (dim, seed, buckets) always reproduces the same
    vectors, and unseen or misspelled words still land on the n-grams their
    spelling shares with familiar ones.
    """

    num_layers = 1

    def __init__(self, dim: int, seed: int = 0, buckets: int = 1 << 18):
        if dim <= 0:
            raise ExportError(f"dimension must be positive, got {dim}")
        self.dim = dim
        self.seed = seed
        self.buckets = buckets
        self._gram_cache: dict[str, np.ndarray] = {}
        self._word_cache: dict[str, np.ndarray] = {}

    def _gram_vector(self, gram: str) -> np.ndarray:
        cached = self._gram_cache.get(gram)
        if cached is None:
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
            bucket = int.from_bytes(digest, "little") % self.buckets
            rng = np.random.default_rng((self.seed, bucket))
            cached = self._gram_cache[gram] = rng.standard_normal(self.dim)
        return cached

    def vector(self, word: str) -> np.ndarray:
        cached = self._word_cache.get(word)
        if cached is None:
            marked = f"<{word}>"
            grams = [marked]
            for size in range(NGRAM_MIN, NGRAM_MAX + 1):
                grams += [marked[i:i + size]
                          for i in range(len(marked) - size + 1)]
            cached = np.mean([self._gram_vector(g) for g in grams], axis=0)
            self._word_cache[word] = cached
        return cached

    def embed(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            raise ExportError("cannot embed an empty token sequence")
        return np.stack([self.vector(t) for t in tokens])[np.newaxis]


class WindowMixBackend:
    """Deterministic multi-layer vectors that mix neighbouring words.

    Layer 0 is the subword-hash vector of each word; every further layer
    replaces a word's vector with a fixed-weight average of its own and its
    immediate neighbours' previous-layer vectors. The top layers therefore
    depend on the sentence the word appears in, which makes this a
    reproducible, dependency-free stand-in for a contextual encoder in
    pipeline smoke tests. It is not a trained model.
    """

    def __init__(self, dim: int, num_layers: int = 3, seed: int = 0):
        if num_layers < 1:
            raise ExportError(f"need at least one layer, got {num_layers}")
        self.dim = dim
        self.num_layers = num_layers
        self._static = HashStaticBackend(dim, seed=seed)

    def embed(self, tokens: list[str]) -> np.ndarray:
        rows = self._static.embed(tokens)[0]
        layers = [rows]
        for _ in range(self.num_layers - 1):
            prev = layers[-1]
            left = np.vstack([prev[:1], prev[:-1]])
            right = np.vstack([prev[1:], prev[-1:]])
            layers.append(0.5 * prev + 0.25 * left + 0.25 * right)
        return np.stack(layers)


class TransformerBackend:
    """All hidden-state layers of a pretrained transformer encoder.

    Tokens are passed to the tokenizer pre-split so its word alignment maps
    every word to its subword pieces; a word's vector on each layer is the
    mean over those pieces. A word the tokenizer erases entirely (some
    normalizers drop zero-width or control characters) cannot be aligned and
    raises ExportError. Inference runs in eval mode with gradients disabled,
    so re-exports are bit-identical.
    """

    def __init__(self, model_name: str):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ExportError(
                "the transformer backend needs the 'torch' and 'transformers' "
                "packages") from exc
        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_name)
        if not getattr(self._tokenizer, "is_fast", False):
            raise ExportError(
                f"model {model_name!r} has no fast tokenizer; word alignment "
                "needs one")
        self._model = AutoModel.from_pretrained(model_name).eval()
        self.dim = int(self._model.config.hidden_size)

    def embed(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            raise ExportError("cannot embed an empty token sequence")
        enc = self._tokenizer(tokens, is_split_into_words=True,
                              return_tensors="pt")
        with self._torch.no_grad():
            out = self._model(**enc, output_hidden_states=True)
        hidden = np.stack([h[0].numpy() for h in out.hidden_states])
        word_ids = enc.word_ids(0)
        pieces: list[list[int]] = [[] for _ in tokens]
        for position, word in enumerate(word_ids):
            if word is not None:
                pieces[word].append(position)
        layers = np.empty((hidden.shape[0], len(tokens), hidden.shape[2]))
        for index, rows in enumerate(pieces):
            if not rows:
                raise ExportError(
                    f"token {index} ({tokens[index]!r}) left no subword pieces")
            layers[:, index] = hidden[:, rows].mean(axis=1)
        return layers
