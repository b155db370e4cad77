"""Command-line entry point.

Subcommands: build-task, baseline, train, evaluate, grid, ablate,
inspect-layers. Exit codes: 0 success, 1 usage error, 2 data or config
error. Logs go to stderr; results go to files (and one summary line to
stdout). A JSON config file can preset any flag of the current subcommand;
explicit flags win. Relative paths are resolved against LEXPROBE_DATA_ROOT
when that variable is set.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .embeddings import ContextualStore, load_contextual, load_static, source_dim, source_layers
from .errors import ConfigError, LexprobeError
from .evaluation import (
    ABLATION_MODES,
    TrainConfig,
    evaluate,
    grid_table,
    inspect_layer_weights,
    majority_baseline,
    run_ablation,
    run_grid,
    train,
)
from .model import ENCODINGS, ModelConfig, ProbeModel, load_checkpoint, save_checkpoint
from .tasks import (
    build_an_attributes,
    build_context_index,
    build_lvc,
    build_nc_literality,
    build_nc_relations,
    build_phrase_type,
    build_vpc,
    load_taxonomy,
    load_verb_lexicon,
    read_an_source,
    read_dataset,
    read_lvc_source,
    read_nc_paraphrase_source,
    read_nc_relation_source,
    read_nc_score_source,
    read_phrase_type_source,
    read_vpc_source,
    write_dataset,
)
from .tasks.base import write_report

logger = logging.getLogger("lexprobe")

DATA_ROOT_VAR = "LEXPROBE_DATA_ROOT"
TASKS = ("vpc", "lvc", "nc-literality", "nc-relations", "an-attributes", "phrase-type")


class UsageError(Exception):
    """Bad invocation that argparse cannot catch itself (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _resolve(path: str | None) -> str | None:
    if path is None:
        return None
    root = os.environ.get(DATA_ROOT_VAR)
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def _require_file(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _require_dir(path: str, what: str) -> str:
    if not os.path.isdir(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _load_source(path: str):
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"LCEB":
        return load_contextual(path)
    return load_static(path)


def _apply_config(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill unset flags from --config, then from defaults; explicit flags win."""
    config = {}
    if getattr(args, "config", None):
        path = _resolve(args.config)
        _require_file(path, "config file")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        config = {str(k).replace("-", "_"): v for k, v in raw.items()}
    for dest, default in defaults.items():
        if getattr(args, dest, None) is None:
            setattr(args, dest, config.get(dest, default))
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        max_epochs=int(args.max_epochs),
        patience=int(args.patience),
        seed=int(args.seed),
        learning_rate=float(args.learning_rate),
        batch_size=int(args.batch_size),
    )


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file presetting flags of this subcommand")
    parser.add_argument("--quiet", action="store_true", default=None,
                        help="suppress progress logging")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int)
    parser.add_argument("--max-epochs", type=int, dest="max_epochs")
    parser.add_argument("--patience", type=int)
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--learning-rate", type=float, dest="learning_rate")


_TRAIN_DEFAULTS = {
    "seed": 0,
    "max_epochs": 500,
    "patience": 20,
    "batch_size": 32,
    "learning_rate": 1e-3,
    "quiet": False,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="lexprobe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("build-task", parents=[], help="build a task dataset from sources")
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--source", help="primary source corpus")
    p.add_argument("--relations", help="relation-labeled compounds (literality augmentation)")
    p.add_argument("--taxonomy", help="child<TAB>parent attribute taxonomy")
    p.add_argument("--contexts", help="one-sentence-per-line context corpus")
    p.add_argument("--verbs", help="verb lexicon, one verb per line")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output dataset directory")
    _add_common(p)

    p = sub.add_parser("baseline", help="majority baselines over a built dataset")
    p.add_argument("--variant", choices=("all", "first", "last"), required=True)
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--report", help="write the evaluation report JSON here")
    _add_common(p)

    p = sub.add_parser("train", help="train one probing model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--embeddings", required=True, help="static text vectors or LCEB file")
    p.add_argument("--encoding", choices=ENCODINGS)
    p.add_argument("--layer", choices=("top", "all"))
    p.add_argument("--out", help="write the model checkpoint here")
    p.add_argument("--report", help="write the validation report JSON here")
    _add_train_flags(p)
    _add_common(p)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--split", choices=("train", "validation", "test"))
    p.add_argument("--report", help="write the evaluation report JSON here")
    _add_common(p)

    p = sub.add_parser("grid", help="train every layer/encoding combination")
    p.add_argument("--dataset", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--jobs", type=int, help="parallel workers over grid cells")
    p.add_argument("--out", help="write grid rows as JSON here")
    _add_train_flags(p)
    _add_common(p)

    p = sub.add_parser("ablate", help="train with masked phrase/context inputs")
    p.add_argument("--dataset", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--mode", choices=ABLATION_MODES, required=True)
    p.add_argument("--encoding", choices=ENCODINGS)
    p.add_argument("--layer", choices=("top", "all"))
    p.add_argument("--report", help="write the test report JSON here")
    _add_train_flags(p)
    _add_common(p)

    p = sub.add_parser("inspect-layers", help="learned layer weights of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="write weights as JSON here")
    _add_common(p)

    return parser


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_build_task(args) -> int:
    args = _apply_config(args, {"seed": 0, "quiet": False})
    seed = int(args.seed)
    source = _require_file(_resolve(args.source), "--source") if args.source else None
    if source is None:
        raise UsageError("build-task requires --source")

    def need(flag_value, flag_name):
        if flag_value is None:
            raise UsageError(f"task {args.task} requires {flag_name}")
        return _require_file(_resolve(flag_value), flag_name)

    task = args.task
    if task == "vpc":
        rows, rejected = read_vpc_source(source)
        dataset, report = build_vpc(rows, seed, rejected)
    elif task == "lvc":
        rows, rejected = read_lvc_source(source)
        dataset, report = build_lvc(rows, seed, rejected)
    elif task == "nc-literality":
        contexts = need(args.contexts, "--contexts")
        rows, rejected = read_nc_score_source(source)
        relation_rows = []
        if args.relations:
            relation_rows, rel_rejected = read_nc_relation_source(
                _require_file(_resolve(args.relations), "--relations"))
            for reason, count in rel_rejected.as_dict().items():
                for _ in range(count):
                    rejected.add(f"relations:{reason}")
        phrases = [[r["w1"], r["w2"]] for r in rows]
        phrases += [[r["w1"], r["w2"]] for r in relation_rows]
        index = build_context_index(contexts, phrases)
        dataset, report = build_nc_literality(rows, relation_rows, index, seed, rejected)
    elif task == "nc-relations":
        contexts = need(args.contexts, "--contexts")
        verbs = load_verb_lexicon(need(args.verbs, "--verbs"))
        rows, rejected = read_nc_paraphrase_source(source)
        index = build_context_index(contexts, [[r["w1"], r["w2"]] for r in rows])
        dataset, report = build_nc_relations(rows, index, verbs, seed, rejected)
    elif task == "an-attributes":
        contexts = need(args.contexts, "--contexts")
        taxonomy = load_taxonomy(need(args.taxonomy, "--taxonomy"))
        rows, rejected = read_an_source(source)
        index = build_context_index(contexts, [[r["adjective"], r["noun"]] for r in rows])
        dataset, report = build_an_attributes(rows, taxonomy, index, seed, rejected)
    else:
        rows, rejected = read_phrase_type_source(source)
        dataset, report = build_phrase_type(rows, seed, rejected)

    out_dir = _resolve(args.out)
    write_dataset(out_dir, dataset)
    write_report(os.path.join(out_dir, "report.json"), report)
    logger.info("built %s: %s examples -> %s", task, report["emitted"]["total"], out_dir)
    print(f"{task} total {report['emitted']['total']} "
          f"train/validation/test {report['emitted']['train']}"
          f"/{report['emitted']['validation']}/{report['emitted']['test']}")
    return 0


def _cmd_baseline(args) -> int:
    args = _apply_config(args, {"report": None, "quiet": False})
    dataset = read_dataset(_require_dir(_resolve(args.dataset), "--dataset"))
    report = majority_baseline(args.variant, dataset.train, dataset.test)
    if args.report:
        with open(_resolve(args.report), "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    print(f"{report.metric} {report.value:.3f}")
    return 0


def _cmd_train(args) -> int:
    args = _apply_config(args, {
        **_TRAIN_DEFAULTS, "encoding": "none", "layer": "top",
        "out": None, "report": None,
    })
    dataset = read_dataset(_require_dir(_resolve(args.dataset), "--dataset"))
    source = _load_source(_require_file(_resolve(args.embeddings), "--embeddings"))
    if args.layer == "all" and source_layers(source) == 1:
        raise ConfigError("layer mode 'all' needs a multi-layer source")
    cfg = _train_config(args)
    model = ProbeModel(dataset.schema, ModelConfig(
        dim=source_dim(source),
        num_layers=source_layers(source),
        encoding=args.encoding,
        layer_mode=args.layer,
        seed=cfg.seed,
    ))
    logger.info("training %s/%s on %d examples", args.layer, args.encoding, len(dataset.train))
    report = train(model, dataset, source, cfg)
    if args.out:
        save_checkpoint(_resolve(args.out), model)
        logger.info("checkpoint written to %s", args.out)
    if args.report:
        with open(_resolve(args.report), "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    print(f"validation {report.metric} {report.value:.3f} "
          f"(best epoch {report.best_epoch}, ran {report.epochs_run})")
    return 0


def _cmd_evaluate(args) -> int:
    args = _apply_config(args, {"split": "test", "report": None, "quiet": False})
    model = load_checkpoint(_require_file(_resolve(args.checkpoint), "--checkpoint"))
    dataset = read_dataset(_require_dir(_resolve(args.dataset), "--dataset"))
    source = _load_source(_require_file(_resolve(args.embeddings), "--embeddings"))
    report = evaluate(model, dataset.split(args.split), source)
    if args.report:
        with open(_resolve(args.report), "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    print(f"{args.split} {report.metric} {report.value:.3f}")
    return 0


def _cmd_grid(args) -> int:
    args = _apply_config(args, {**_TRAIN_DEFAULTS, "jobs": 1, "out": None})
    dataset = read_dataset(_require_dir(_resolve(args.dataset), "--dataset"))
    source = _load_source(_require_file(_resolve(args.embeddings), "--embeddings"))
    cfg = _train_config(args)
    rows = run_grid(dataset, source, cfg, master_seed=cfg.seed, jobs=int(args.jobs))
    if args.out:
        with open(_resolve(args.out), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(rows, sort_keys=True, indent=2) + "\n")
    sys.stdout.write(grid_table(rows))
    return 0


def _cmd_ablate(args) -> int:
    args = _apply_config(args, {
        **_TRAIN_DEFAULTS, "encoding": "none", "layer": "top", "report": None,
    })
    dataset = read_dataset(_require_dir(_resolve(args.dataset), "--dataset"))
    source = _load_source(_require_file(_resolve(args.embeddings), "--embeddings"))
    if args.layer == "all" and source_layers(source) == 1:
        raise ConfigError("layer mode 'all' needs a multi-layer source")
    report = run_ablation(dataset, args.mode, source, args.encoding, args.layer,
                          _train_config(args))
    if args.report:
        with open(_resolve(args.report), "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    print(f"{args.mode} test {report.metric} {report.value:.3f}")
    return 0


def _cmd_inspect_layers(args) -> int:
    args = _apply_config(args, {"out": None, "quiet": False})
    model = load_checkpoint(_require_file(_resolve(args.checkpoint), "--checkpoint"))
    info = inspect_layer_weights(model)
    if args.out:
        with open(_resolve(args.out), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(info, sort_keys=True, indent=2) + "\n")
    for entry in info["weights"]:
        print(f"layer {entry['layer']} weight {entry['weight']:.6f}")
    print(f"gamma {info['gamma']:.6f}")
    return 0


_COMMANDS = {
    "build-task": _cmd_build_task,
    "baseline": _cmd_baseline,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "grid": _cmd_grid,
    "ablate": _cmd_ablate,
    "inspect-layers": _cmd_inspect_layers,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"lexprobe {args.command}: {exc}\n")
        return 1
    except FileNotFoundError as exc:
        sys.stderr.write(f"lexprobe {args.command}: {exc}\n")
        return 2
    except LexprobeError as exc:
        sys.stderr.write(f"lexprobe {args.command}: {exc}\n")
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
