"""Dataset construction for the six composition tasks.

Each builder re-casts one source corpus into classification or tagging
examples, optionally attaches context sentences, and splits the result so
that no anchor word is shared between train, validation, and test.
"""

from .base import (
    Example,
    TaskDataset,
    item_rng,
    read_dataset,
    stable_seed,
    tokenize,
    write_dataset,
    write_report,
)
from .builders import (
    build_an_attributes,
    build_lvc,
    build_nc_literality,
    build_nc_relations,
    build_phrase_type,
    build_vpc,
    load_verb_lexicon,
    read_an_source,
    read_lvc_source,
    read_nc_paraphrase_source,
    read_nc_relation_source,
    read_nc_score_source,
    read_phrase_type_source,
    read_vpc_source,
    verb_lemma,
)
from .contexts import (
    AttachedContext,
    ContextIndex,
    ContextItem,
    attach_contexts,
    build_context_index,
    find_phrase,
)
from .split import lexical_split
from .taxonomy import Taxonomy, load_taxonomy, wu_palmer

__all__ = [
    "Example",
    "TaskDataset",
    "tokenize",
    "item_rng",
    "stable_seed",
    "verb_lemma",
    "read_dataset",
    "write_dataset",
    "write_report",
    "AttachedContext",
    "ContextItem",
    "ContextIndex",
    "build_context_index",
    "find_phrase",
    "attach_contexts",
    "lexical_split",
    "Taxonomy",
    "load_taxonomy",
    "wu_palmer",
    "load_verb_lexicon",
    "build_vpc",
    "build_lvc",
    "build_nc_literality",
    "build_nc_relations",
    "build_an_attributes",
    "build_phrase_type",
    "read_vpc_source",
    "read_lvc_source",
    "read_nc_score_source",
    "read_nc_relation_source",
    "read_nc_paraphrase_source",
    "read_an_source",
    "read_phrase_type_source",
]
