"""Readers and builders for the six composition tasks.

Each reader parses one documented source format and reports per-row
rejections instead of failing; each builder turns accepted rows into
Examples, samples negatives/contexts where the task calls for it, splits
lexically, and returns the dataset together with a build report.

Source formats (tab-separated unless noted):

* verb-particle: sentence, verb index, particle index, label (1/0/true/false),
  optional verb lemma. The sentence column is whitespace-tokenized and the
  indices refer to those tokens.
* light-verb: sentence, span start, span end (inclusive), label, optional
  verb lemma; the verb is the first span token.
* compound scores: modifier, head, target word, mean literality score in [0,5].
* compound relations: modifier, head, relation label.
* compound paraphrases (JSONL): {"w1": ..., "w2": ..., "paraphrases": [...]}.
* adjective attributes: adjective, noun, attribute.
* phrase-type corpus (JSONL): {"id": ..., "tokens": [...], "mwes": [{"indices":
  [...], "type": ..., "strength": "strong"|"weak"}]}; an MWE with a gap in its
  indices is discontinuous.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import FormatError
from ..model import TaskSchema
from .base import Example, TaskDataset, item_rng, label_distribution, tokenize
from .contexts import ContextIndex, ContextItem, attach_contexts
from .split import lexical_split
from .taxonomy import Taxonomy, wu_palmer

VPC_LABELS = ("VPC", "not-VPC")
LVC_LABELS = ("LVC", "not-LVC")
LIT_LABELS = ("literal", "non-literal")
REL_LABELS = ("TRUE", "FALSE")
ATTR_LABELS = ("TRUE", "FALSE")

SCHEMA_VPC = TaskSchema(labels=VPC_LABELS, span_arity=2, extra_arity=0)
SCHEMA_LVC = TaskSchema(labels=LVC_LABELS, span_arity=2, extra_arity=0)
SCHEMA_NC_LIT = TaskSchema(labels=LIT_LABELS, span_arity=2, extra_arity=1)
SCHEMA_NC_REL = TaskSchema(labels=REL_LABELS, span_arity=2, extra_arity=2)
SCHEMA_AN = TaskSchema(labels=ATTR_LABELS, span_arity=2, extra_arity=2)

LITERAL_MIN_SCORE = 4.0
NON_LITERAL_MAX_SCORE = 2.0
MAX_LITERAL_RATIO = 4
MAX_CONTEXTS_PER_COMPOUND = 10
MAX_POSITIVE_PARAPHRASES = 5
MAX_NEGATIVE_ATTRIBUTES = 3
ATTRIBUTE_SIMILARITY_CEILING = 0.4

_IRREGULAR_LEMMAS = {
    "took": "take", "taken": "take", "takes": "take", "taking": "take",
    "made": "make", "makes": "make", "making": "make",
    "had": "have", "has": "have", "having": "have",
    "got": "get", "gotten": "get", "gets": "get", "getting": "get",
    "did": "do", "does": "do", "done": "do", "doing": "do",
    "gave": "give", "given": "give", "gives": "give", "giving": "give",
    "went": "go", "gone": "go", "goes": "go", "going": "go",
    "was": "be", "were": "be", "is": "be", "are": "be", "been": "be", "being": "be",
}

_VOWELS = set("aeiou")


def verb_lemma(token: str) -> str:
    """Heuristic lemmatizer for anchor grouping; a source lemma column wins."""
    word = token.lower()
    if word in _IRREGULAR_LEMMAS:
        return _IRREGULAR_LEMMAS[word]
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith("ied") and len(word) > 4:
        return word[:-3] + "y"
    for suffix in ("ing", "ed"):
        if word.endswith(suffix) and len(word) > len(suffix) + 2:
            stem = word[: -len(suffix)]
            if len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS:
                stem = stem[:-1]  # running -> run
            return stem
    if word.endswith("es") and len(word) > 3 and word[-3] in "sxz":
        return word[:-2]
    if word.endswith("s") and not word.endswith("ss") and len(word) > 2:
        return word[:-1]
    return word


def load_verb_lexicon(path: str) -> set[str]:
    """One verb per line, lowercased."""
    verbs = set()
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            word = raw.strip().lower()
            if word and not word.startswith("#"):
                verbs.add(word)
    if not verbs:
        raise FormatError(f"{path}: empty verb lexicon")
    return verbs


def _parse_bool(text: str) -> bool | None:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    return None


class _Rejections:
    """Per-reason rejection counter for build reports."""

    def __init__(self):
        self.counts: dict[str, int] = {}

    def add(self, reason: str) -> None:
        self.counts[reason] = self.counts.get(reason, 0) + 1

    def as_dict(self) -> dict[str, int]:
        return dict(sorted(self.counts.items()))


def _tsv_rows(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line.split("\t")


# ---------------------------------------------------------------------------
# readers


def read_vpc_source(path: str) -> tuple[list[dict], _Rejections]:
    rows, rejected = [], _Rejections()
    for lineno, fields in _tsv_rows(path):
        if len(fields) not in (4, 5):
            rejected.add("bad-columns")
            continue
        tokens = fields[0].split()
        try:
            verb, prep = int(fields[1]), int(fields[2])
        except ValueError:
            rejected.add("bad-index")
            continue
        label = _parse_bool(fields[3])
        if label is None:
            rejected.add("bad-label")
            continue
        row = {"line": lineno, "tokens": tokens, "verb": verb, "prep": prep, "label": label}
        if len(fields) == 5 and fields[4].strip():
            row["lemma"] = fields[4].strip().lower()
        rows.append(row)
    return rows, rejected


def read_lvc_source(path: str) -> tuple[list[dict], _Rejections]:
    rows, rejected = [], _Rejections()
    for lineno, fields in _tsv_rows(path):
        if len(fields) not in (4, 5):
            rejected.add("bad-columns")
            continue
        tokens = fields[0].split()
        try:
            start, end = int(fields[1]), int(fields[2])
        except ValueError:
            rejected.add("bad-index")
            continue
        label = _parse_bool(fields[3])
        if label is None:
            rejected.add("bad-label")
            continue
        row = {"line": lineno, "tokens": tokens, "start": start, "end": end, "label": label}
        if len(fields) == 5 and fields[4].strip():
            row["lemma"] = fields[4].strip().lower()
        rows.append(row)
    return rows, rejected


def read_nc_score_source(path: str) -> tuple[list[dict], _Rejections]:
    rows, rejected = [], _Rejections()
    for lineno, fields in _tsv_rows(path):
        if len(fields) != 4:
            rejected.add("bad-columns")
            continue
        w1, w2, target = (f.strip() for f in fields[:3])
        if not w1 or not w2 or not target:
            rejected.add("empty-field")
            continue
        try:
            score = float(fields[3])
        except ValueError:
            rejected.add("bad-score")
            continue
        rows.append({"line": lineno, "w1": w1, "w2": w2, "target": target, "score": score})
    return rows, rejected


def read_nc_relation_source(path: str) -> tuple[list[dict], _Rejections]:
    rows, rejected = [], _Rejections()
    for lineno, fields in _tsv_rows(path):
        if len(fields) != 3:
            rejected.add("bad-columns")
            continue
        w1, w2, relation = (f.strip() for f in fields)
        if not w1 or not w2 or not relation:
            rejected.add("empty-field")
            continue
        rows.append({"line": lineno, "w1": w1, "w2": w2, "relation": relation})
    return rows, rejected


def read_nc_paraphrase_source(path: str) -> tuple[list[dict], _Rejections]:
    rows, rejected = [], _Rejections()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                w1 = record["w1"].strip()
                w2 = record["w2"].strip()
                paraphrases = list(record["paraphrases"])
            except (json.JSONDecodeError, KeyError, TypeError, AttributeError):
                rejected.add("bad-record")
                continue
            if not w1 or not w2 or not paraphrases:
                rejected.add("empty-field")
                continue
            rows.append({"line": lineno, "w1": w1, "w2": w2, "paraphrases": paraphrases})
    return rows, rejected


def read_an_source(path: str) -> tuple[list[dict], _Rejections]:
    rows, rejected = [], _Rejections()
    for lineno, fields in _tsv_rows(path):
        if len(fields) != 3:
            rejected.add("bad-columns")
            continue
        adjective, noun, attribute = (f.strip() for f in fields)
        if not adjective or not noun or not attribute:
            rejected.add("empty-field")
            continue
        rows.append(
            {"line": lineno, "adjective": adjective, "noun": noun, "attribute": attribute}
        )
    return rows, rejected


def read_phrase_type_source(path: str) -> tuple[list[dict], _Rejections]:
    rows, rejected = [], _Rejections()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                sent_id = str(record["id"])
                tokens = list(record["tokens"])
                mwes = list(record.get("mwes", []))
            except (json.JSONDecodeError, KeyError, TypeError):
                rejected.add("bad-record")
                continue
            if not tokens:
                rejected.add("empty-sentence")
                continue
            rows.append({"line": lineno, "id": sent_id, "tokens": tokens, "mwes": mwes})
    return rows, rejected


# ---------------------------------------------------------------------------
# report assembly


def _finish(task: str, examples: list[Example], schema: TaskSchema, seed: int,
            rejected: _Rejections, dropped: dict[str, int],
            notes: dict | None = None) -> tuple[TaskDataset, dict]:
    dataset, stats = lexical_split(examples, schema, seed)
    report = {
        "task": task,
        "emitted": {**stats["examples"], "total": len(examples)},
        "rejections": rejected.as_dict(),
        "dropped": dict(sorted(dropped.items())),
        "label_distribution": label_distribution(examples),
        "anchors": stats["anchors"],
        "split_fractions": stats["fractions"],
        "split_skew_flagged": stats["skew_flagged"],
    }
    if notes:
        report.update(notes)
    return dataset, report


# ---------------------------------------------------------------------------
# builders


def build_vpc(rows: list[dict], seed: int,
              rejected: _Rejections | None = None) -> tuple[TaskDataset, dict]:
    """Verb-particle examples: span over (verb, particle), anchored by verb lemma."""
    rejected = rejected or _Rejections()
    examples = []
    for row in rows:
        n = len(row["tokens"])
        verb, prep = row["verb"], row["prep"]
        if not (0 <= verb < n and 0 <= prep < n):
            rejected.add("index-out-of-range")
            continue
        if prep != verb + 1:
            rejected.add("particle-not-adjacent")
            continue
        anchor = row.get("lemma") or verb_lemma(row["tokens"][verb])
        examples.append(Example(
            id=f"vpc-{row['line']}",
            tokens=row["tokens"],
            span=(verb, prep),
            label=VPC_LABELS[0] if row["label"] else VPC_LABELS[1],
            anchor=anchor,
            task="vpc",
        ))
    return _finish("vpc", examples, SCHEMA_VPC, seed, rejected, {})


def build_lvc(rows: list[dict], seed: int,
              rejected: _Rejections | None = None) -> tuple[TaskDataset, dict]:
    """Light-verb candidates: span over the candidate, anchored by the verb lemma."""
    rejected = rejected or _Rejections()
    examples = []
    for row in rows:
        n = len(row["tokens"])
        start, end = row["start"], row["end"]
        if not (0 <= start <= end < n):
            rejected.add("span-out-of-range")
            continue
        anchor = row.get("lemma") or verb_lemma(row["tokens"][start])
        examples.append(Example(
            id=f"lvc-{row['line']}",
            tokens=row["tokens"],
            span=(start, end),
            label=LVC_LABELS[0] if row["label"] else LVC_LABELS[1],
            anchor=anchor,
            task="lvc",
        ))
    return _finish("lvc", examples, SCHEMA_LVC, seed, rejected, {})


def build_nc_literality(scored_rows: list[dict], relation_rows: list[dict],
                        index: ContextIndex, seed: int,
                        rejected: _Rejections | None = None) -> tuple[TaskDataset, dict]:
    """Per (compound, target word) literality, in context sentences.

    Scores of 4 and above are literal, 2 and below non-literal, the middle
    band is dropped. The literal pool is augmented from the relation source
    (every non-lexicalized compound is literal in both constituents), then
    each item collects up to 10 context sentences and literal examples are
    downsampled to at most 4 per non-literal.
    """
    rejected = rejected or _Rejections()
    dropped = {"midrange_scores": 0, "no_context": 0, "downsampled_literals": 0}
    items: list[ContextItem] = []
    seen: set[tuple[str, str, str]] = set()

    for row in scored_rows:
        if not (0.0 <= row["score"] <= 5.0):
            rejected.add("score-out-of-range")
            continue
        if row["target"] not in (row["w1"], row["w2"]):
            rejected.add("target-not-in-compound")
            continue
        key = (row["w1"].lower(), row["w2"].lower(), row["target"].lower())
        if key in seen:
            rejected.add("duplicate-item")
            continue
        if row["score"] >= LITERAL_MIN_SCORE:
            label = LIT_LABELS[0]
        elif row["score"] <= NON_LITERAL_MAX_SCORE:
            label = LIT_LABELS[1]
        else:
            dropped["midrange_scores"] += 1
            continue
        seen.add(key)
        items.append(ContextItem(
            id=f"nclit-{key[0]}_{key[1]}-{key[2]}",
            phrase=[row["w1"], row["w2"]],
            payload={"target": row["target"], "label": label, "head": row["w2"]},
        ))

    augmented = 0
    for row in relation_rows:
        if row["relation"].lower() == "lexicalized":
            continue
        for target in (row["w1"], row["w2"]):
            key = (row["w1"].lower(), row["w2"].lower(), target.lower())
            if key in seen:
                continue
            seen.add(key)
            augmented += 1
            items.append(ContextItem(
                id=f"nclit-{key[0]}_{key[1]}-{key[2]}",
                phrase=[row["w1"], row["w2"]],
                payload={"target": target, "label": LIT_LABELS[0], "head": row["w2"]},
            ))

    attached, no_context = attach_contexts(items, index, MAX_CONTEXTS_PER_COMPOUND, seed)
    dropped["no_context"] = len(no_context)
    examples = []
    ordinal: dict[str, int] = {}
    for att in attached:
        k = ordinal.get(att.item.id, 0)
        ordinal[att.item.id] = k + 1
        payload = att.item.payload
        examples.append(Example(
            id=f"{att.item.id}-c{k}",
            tokens=att.sentence,
            span=att.span,
            extra=[payload["target"]],
            label=payload["label"],
            anchor=payload["head"].lower(),
            task="nc-literality",
        ))

    literal_idx = [i for i, ex in enumerate(examples) if ex.label == LIT_LABELS[0]]
    non_literal = len(examples) - len(literal_idx)
    ratio_unenforceable = non_literal == 0 and bool(literal_idx)
    if non_literal > 0 and len(literal_idx) > MAX_LITERAL_RATIO * non_literal:
        keep_count = MAX_LITERAL_RATIO * non_literal
        rng = item_rng(seed, "nclit-downsample")
        kept = set(np.asarray(literal_idx)[
            np.sort(rng.choice(len(literal_idx), size=keep_count, replace=False))
        ].tolist())
        dropped["downsampled_literals"] = len(literal_idx) - keep_count
        examples = [ex for i, ex in enumerate(examples)
                    if ex.label != LIT_LABELS[0] or i in kept]

    notes = {"augmented_literal_items": augmented, "ratio_unenforceable": ratio_unenforceable}
    return _finish("nc-literality", examples, SCHEMA_NC_LIT, seed, rejected, dropped, notes)


def build_nc_relations(rows: list[dict], index: ContextIndex, verb_lexicon: set[str],
                       seed: int,
                       rejected: _Rejections | None = None) -> tuple[TaskDataset, dict]:
    """Paraphrase validity for compounds, balanced positive/negative per compound.

    Negatives instantiate paraphrase templates taken from other compounds that
    share exactly the head or exactly the modifier, and only when the template's
    verbs never occur in this compound's own paraphrases. When eligible
    templates run short, the compound's positives are trimmed to match, so
    per-compound balance always holds.
    """
    rejected = rejected or _Rejections()
    dropped = {"no_context": 0, "trimmed_positives": 0, "compounds_without_negatives": 0}

    compounds = []
    seen_nc: set[tuple[str, str]] = set()
    for row in rows:
        key = (row["w1"].lower(), row["w2"].lower())
        if key in seen_nc:
            rejected.add("duplicate-compound")
            continue
        paraphrases = []
        for text in row["paraphrases"]:
            tokens = tokenize(str(text))
            verbs = {t.lower() for t in tokens if t.lower() in verb_lexicon}
            if not verbs:
                rejected.add("paraphrase-without-verb")
                continue
            paraphrases.append({"tokens": tokens, "verbs": verbs})
        if not paraphrases:
            rejected.add("compound-without-paraphrases")
            continue
        seen_nc.add(key)
        compounds.append({
            "w1": row["w1"], "w2": row["w2"], "key": key,
            "paraphrases": paraphrases,
            "verb_set": set().union(*(p["verbs"] for p in paraphrases)),
        })

    items: list[ContextItem] = []
    balance_trimmed = 0
    for nc in compounds:
        templates = []
        for other in compounds:
            if other["key"] == nc["key"]:
                continue
            shares_head = other["key"][1] == nc["key"][1] and other["key"][0] != nc["key"][0]
            shares_modifier = other["key"][0] == nc["key"][0] and other["key"][1] != nc["key"][1]
            if not (shares_head or shares_modifier):
                continue
            for p in other["paraphrases"]:
                if p["verbs"] & nc["verb_set"]:
                    continue
                replace_from = other["w1"] if shares_head else other["w2"]
                replace_to = nc["w1"] if shares_head else nc["w2"]
                templates.append({"tokens": p["tokens"], "from": replace_from, "to": replace_to})

        n_pos = min(MAX_POSITIVE_PARAPHRASES, len(nc["paraphrases"]))
        pos_rng = item_rng(seed, f"ncrel-pos-{nc['key'][0]}_{nc['key'][1]}")
        pos_picks = sorted(pos_rng.choice(len(nc["paraphrases"]), size=n_pos, replace=False).tolist())

        n_neg = min(n_pos, len(templates))
        if n_neg == 0:
            dropped["compounds_without_negatives"] += 1
            continue
        if n_neg < n_pos:
            dropped["trimmed_positives"] += n_pos - n_neg
            balance_trimmed += 1
            pos_picks = pos_picks[:n_neg]
        neg_rng = item_rng(seed, f"ncrel-neg-{nc['key'][0]}_{nc['key'][1]}")
        neg_picks = sorted(neg_rng.choice(len(templates), size=n_neg, replace=False).tolist())

        for i, pick in enumerate(pos_picks):
            items.append(ContextItem(
                id=f"ncrel-{nc['key'][0]}_{nc['key'][1]}-p{i}",
                phrase=[nc["w1"], nc["w2"]],
                payload={"extra": nc["paraphrases"][pick]["tokens"],
                         "label": REL_LABELS[0], "head": nc["w2"]},
            ))
        for i, pick in enumerate(neg_picks):
            template = templates[pick]
            extra = [template["to"] if t.lower() == template["from"].lower() else t
                     for t in template["tokens"]]
            items.append(ContextItem(
                id=f"ncrel-{nc['key'][0]}_{nc['key'][1]}-n{i}",
                phrase=[nc["w1"], nc["w2"]],
                payload={"extra": extra, "label": REL_LABELS[1], "head": nc["w2"]},
            ))

    attached, no_context = attach_contexts(items, index, 1, seed)
    dropped["no_context"] = len(no_context)
    examples = []
    for att in attached:
        payload = att.item.payload
        examples.append(Example(
            id=att.item.id,
            tokens=att.sentence,
            span=att.span,
            extra=payload["extra"],
            label=payload["label"],
            anchor=payload["head"].lower(),
            task="nc-relations",
        ))
    notes = {"compounds_balance_trimmed": balance_trimmed}
    return _finish("nc-relations", examples, SCHEMA_NC_REL, seed, rejected, dropped, notes)


def build_an_attributes(rows: list[dict], taxonomy: Taxonomy, index: ContextIndex,
                        seed: int,
                        rejected: _Rejections | None = None) -> tuple[TaskDataset, dict]:
    """Attribute selection for adjective-noun phrases via paraphrase templates.

    The positive paraphrase is "[A] refers to the [AT] of [N]". Negatives swap
    in attributes seen elsewhere with the same adjective or the same noun,
    kept only when dissimilar enough to the gold attribute (Wu-Palmer < 0.4),
    at most 3 per positive.
    """
    rejected = rejected or _Rejections()
    dropped = {"no_context": 0}

    accepted = []
    seen: set[tuple[str, str, str]] = set()
    for row in rows:
        if row["attribute"] not in taxonomy:
            rejected.add(f"attribute-not-in-taxonomy:{row['attribute']}")
            continue
        key = (row["adjective"].lower(), row["noun"].lower(), row["attribute"].lower())
        if key in seen:
            rejected.add("duplicate-row")
            continue
        seen.add(key)
        accepted.append(row)

    by_adjective: dict[str, set[str]] = {}
    by_noun: dict[str, set[str]] = {}
    for row in accepted:
        by_adjective.setdefault(row["adjective"].lower(), set()).add(row["attribute"])
        by_noun.setdefault(row["noun"].lower(), set()).add(row["attribute"])

    def template(adjective: str, attribute: str, noun: str) -> list[str]:
        return tokenize(f"{adjective} refers to the {attribute} of {noun}")

    items: list[ContextItem] = []
    for row in accepted:
        adjective, noun, gold = row["adjective"], row["noun"], row["attribute"]
        pair_id = f"anattr-{adjective.lower()}_{noun.lower()}"
        items.append(ContextItem(
            id=f"{pair_id}-{gold.lower()}-pos",
            phrase=[adjective, noun],
            payload={"extra": template(adjective, gold, noun),
                     "label": ATTR_LABELS[0], "adjective": adjective},
        ))
        pool = (by_adjective[adjective.lower()] | by_noun[noun.lower()]) - {gold}
        eligible = sorted(c for c in pool
                          if wu_palmer(taxonomy, c, gold) < ATTRIBUTE_SIMILARITY_CEILING)
        take = min(MAX_NEGATIVE_ATTRIBUTES, len(eligible))
        if take:
            rng = item_rng(seed, f"{pair_id}-{gold.lower()}-neg")
            picks = sorted(rng.choice(len(eligible), size=take, replace=False).tolist())
            for pick in picks:
                negative = eligible[pick]
                items.append(ContextItem(
                    id=f"{pair_id}-{gold.lower()}-neg-{negative.lower()}",
                    phrase=[adjective, noun],
                    payload={"extra": template(adjective, negative, noun),
                             "label": ATTR_LABELS[1], "adjective": adjective},
                ))

    attached, no_context = attach_contexts(items, index, 1, seed)
    dropped["no_context"] = len(no_context)
    examples = []
    for att in attached:
        payload = att.item.payload
        examples.append(Example(
            id=att.item.id,
            tokens=att.sentence,
            span=att.span,
            extra=payload["extra"],
            label=payload["label"],
            anchor=payload["adjective"].lower(),
            task="an-attributes",
        ))
    return _finish("an-attributes", examples, SCHEMA_AN, seed, rejected, dropped)


def build_phrase_type(rows: list[dict], seed: int,
                      rejected: _Rejections | None = None) -> tuple[TaskDataset, dict]:
    """Per-token typed BIO tagging of multiword expressions.

    Discontinuous expressions are excluded (their tokens stay O), weak ones
    are relabeled COMP, strong ones keep their type. Sentences with
    overlapping or out-of-range annotations are rejected.
    """
    rejected = rejected or _Rejections()
    dropped = {"discontinuous_spans": 0}
    tagged: list[tuple[str, list[str], list[str]]] = []
    types_seen: set[str] = set()

    for row in rows:
        n = len(row["tokens"])
        claimed: set[int] = set()
        spans = []
        bad = None
        for mwe in row["mwes"]:
            try:
                indices = sorted(int(i) for i in mwe["indices"])
                mwe_type = str(mwe["type"]).strip()
                strength = str(mwe["strength"]).strip().lower()
            except (KeyError, TypeError, ValueError):
                bad = "malformed-annotation"
                break
            if not indices or len(set(indices)) != len(indices):
                bad = "malformed-annotation"
                break
            if indices[0] < 0 or indices[-1] >= n:
                bad = "annotation-out-of-range"
                break
            if strength not in ("strong", "weak") or (strength == "strong" and not mwe_type):
                bad = "malformed-annotation"
                break
            if claimed & set(indices):
                bad = "overlapping-spans"
                break
            claimed.update(indices)
            spans.append({"indices": indices, "type": mwe_type, "strength": strength})
        if bad:
            rejected.add(f"{bad}:sentence-{row['id']}")
            continue

        tags = ["O"] * n
        for span in spans:
            indices = span["indices"]
            if indices != list(range(indices[0], indices[-1] + 1)):
                dropped["discontinuous_spans"] += 1
                continue  # excluded: all its tokens stay O
            label = "COMP" if span["strength"] == "weak" else span["type"]
            types_seen.add(label)
            tags[indices[0]] = f"B-{label}"
            for i in indices[1:]:
                tags[i] = "I"
        tagged.append((row["id"], row["tokens"], tags))

    inventory = ("O", "I") + tuple(f"B-{t}" for t in sorted(types_seen))
    schema = TaskSchema(labels=inventory, span_arity=0, extra_arity=0, tagging=True)
    examples = [
        Example(id=f"pt-{sent_id}", tokens=tokens, tags=tags,
                anchor=f"sent-{sent_id}", task="phrase-type")
        for sent_id, tokens, tags in tagged
    ]
    return _finish("phrase-type", examples, schema, seed, rejected, dropped)
