"""Command-line entry point: validate, ingest, generate, train, evaluate, explore, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .codecs import build_codecs
from .dataset import MaskSpec, build_dataset, parse_policy
from .errors import GraphloomError
from .explore import export_bottlenecks, nearest_pairs, save_bottlenecks
from .model import WiringConfig, assemble_model, load_checkpoint, save_checkpoint
from .rules import apply_rules, parse_rules
from .schema import ValidationReport, parse_entities, parse_schema, validate_entity
from .synthetic import generate_arithmetic
from .tabular import ColumnHint, derive_schema_from_tabular
from .training import TrainConfig, evaluate_masked, split_dataset, train


def _load_schema(args, report: ValidationReport | None = None):
    schema = parse_schema(Path(args.schema).read_text())
    rules = parse_rules(Path(args.config).read_text()) if getattr(args, "config", None) else []
    resolved = apply_rules(schema, rules, report=report)
    resolved.warnings.extend(schema.warnings)
    return resolved


def _load_entities(path: str) -> list[dict]:
    return parse_entities(Path(path).read_text())


def _validate_records(schema, records, report: ValidationReport) -> None:
    for record in records:
        report.extend(validate_entity(schema, record))


def cmd_validate(args) -> int:
    report = ValidationReport()
    try:
        schema = _load_schema(args, report)
    except GraphloomError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for location, message in schema.warnings:
        report.warn(location, message)
    if args.entities:
        _validate_records(schema, _load_entities(args.entities), report)
    output = report.render()
    if output:
        print(output)
    if report.ok:
        print(f"ok: schema with {len(schema.entity_types)} entity-types, "
              f"{len(schema.properties)} properties, {len(schema.relationships)} relationships")
        return 0
    return 1


def cmd_ingest(args) -> int:
    hints = {}
    if args.hints:
        raw = json.loads(Path(args.hints).read_text())
        hints = {column: ColumnHint(**spec) for column, spec in raw.items()}
    result = derive_schema_from_tabular(
        Path(args.tabular).read_text(), hints, default_entity_type=args.entity_type
    )
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    from .schema import serialize_schema

    (outdir / "schema.json").write_text(serialize_schema(result.schema))
    with open(outdir / "entities.jsonl", "w") as handle:
        for record in result.records:
            handle.write(json.dumps(record) + "\n")
    print(f"wrote {outdir / 'schema.json'} and {len(result.records)} records")
    return 0


def cmd_generate_arithmetic(args) -> int:
    schema, records = generate_arithmetic(args.count, max_nodes=args.max_nodes, seed=args.seed)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    from .schema import serialize_schema

    (outdir / "schema.json").write_text(serialize_schema(schema))
    with open(outdir / "entities.jsonl", "w") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    print(f"wrote {len(records)} entities over {args.count} trees to {outdir}")
    return 0


def _mask_from_args(args) -> MaskSpec:
    rates = {}
    for spec in args.mask_property or []:
        name, _, rate = spec.partition("=")
        rates[name] = float(rate) if rate else 0.5
    return MaskSpec(
        property_rates=rates,
        entity_rate=args.mask_entities,
        relationship_rate=args.mask_relationships,
        supervise_masked=args.supervise_masked,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    report = ValidationReport()
    schema = _load_schema(args, report)
    records = _load_entities(args.entities)
    _validate_records(schema, records, report)
    if not report.ok:
        print(report.render(), file=sys.stderr)
        return 1
    probe = build_dataset(schema, records)
    splits = split_dataset(probe, seed=args.seed)
    codecs = build_codecs(schema, records, training_ids=set(splits.train.ids))
    dataset = build_dataset(schema, records, codecs)
    splits = split_dataset(dataset, seed=args.seed)
    wiring = WiringConfig(
        depth=args.depth,
        wiring=args.wiring,
        bidirectional=args.bidirectional,
        internal_loss=args.internal_loss,
    )
    model = assemble_model(schema, codecs, wiring, seed=args.seed)
    config = TrainConfig(
        max_epochs=args.epochs,
        learning_rate=args.lr,
        patience=args.patience,
        early_stop=args.early_stop,
        budget=args.budget,
        mask=_mask_from_args(args),
        policy=parse_policy(args.policy),
        seed=args.seed,
        warm_start_epochs=args.warm_start,
    )
    result = train(model, splits, config)
    save_checkpoint(
        model,
        args.checkpoint,
        extra={"train_seed": args.seed, "best_epoch": result.best_epoch,
               "best_dev_loss": result.best_dev_loss},
    )
    if args.history:
        with open(args.history, "w") as handle:
            for row in result.history:
                handle.write(json.dumps(row) + "\n")
    print(
        f"trained {len(result.history)} epochs; best dev loss "
        f"{result.best_dev_loss:.4f} at epoch {result.best_epoch}; "
        f"checkpoint -> {args.checkpoint}"
    )
    return 0


def _rebuild_splits(model, header, args):
    records = _load_entities(args.entities)
    dataset = build_dataset(model.schema, records, model.codecs)
    seed = args.seed if args.seed is not None else header["extra"].get("train_seed", 0)
    return split_dataset(dataset, seed=seed), dataset


def cmd_evaluate(args) -> int:
    model, header = load_checkpoint(args.checkpoint)
    splits, dataset = _rebuild_splits(model, header, args)
    part = {"train": splits.train, "dev": splits.dev, "test": splits.test, "all": dataset}[
        args.split
    ]
    masked = {p for spec in args.mask for p in spec.split(",") if p}
    report = evaluate_masked(model, part, masked)
    print(json.dumps(report.to_json(), indent=2))
    return 0


def cmd_neighbors(args) -> int:
    model, header = load_checkpoint(args.checkpoint)
    records = _load_entities(args.entities)
    dataset = build_dataset(model.schema, records, model.codecs)
    table = export_bottlenecks(model, dataset, depth=args.depth)
    if args.export:
        save_bottlenecks(table, args.export)
    pairs = nearest_pairs(table, entity_type=args.type, k=args.k,
                          approximate=args.approximate)
    for a, b, similarity in pairs:
        print(f"{similarity:.6f}\t{a}\t{b}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    host = args.host or os.environ.get("GRAPHLOOM_HOST", "127.0.0.1")
    port = args.port or int(os.environ.get("GRAPHLOOM_PORT", "8040"))
    serve(args.checkpoint, args.entities, host, port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphloom",
        description="Compile entity-relationship schemas into trainable "
                    "graph-autoencoder ensembles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a schema, rules, and entity file")
    p.add_argument("--schema", required=True)
    p.add_argument("--entities")
    p.add_argument("--config", help="rules file applied before validation")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ingest", help="derive a schema and entities from CSV")
    p.add_argument("--tabular", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--hints", help="JSON file of per-column hints")
    p.add_argument("--entity-type", default="record")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("generate-arithmetic", help="emit synthetic expression trees")
    p.add_argument("--count", type=int, default=5000)
    p.add_argument("--max-nodes", type=int, default=7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_generate_arithmetic)

    p = sub.add_parser("train", help="train a model on a schema + entity file")
    p.add_argument("--schema", required=True)
    p.add_argument("--entities", required=True)
    p.add_argument("--config", help="rules file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--history", help="write per-epoch records (JSONL)")
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--wiring", choices=["naive", "highway", "cul-de-sac"], default="naive")
    p.add_argument("--bidirectional", action="store_true")
    p.add_argument("--internal-loss", action="store_true")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--early-stop", type=int, default=20)
    p.add_argument("--budget", type=int, default=256)
    p.add_argument("--policy", default="component")
    p.add_argument("--mask-property", action="append", metavar="PROP=RATE")
    p.add_argument("--mask-entities", type=float, default=0.0)
    p.add_argument("--mask-relationships", type=float, default=0.0)
    p.add_argument("--supervise-masked", action="store_true",
                   help="keep dropped values in the loss (reconstruction training)")
    p.add_argument("--warm-start", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="masked-property evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--entities", required=True)
    p.add_argument("--mask", action="append", required=True, metavar="PROP[,PROP]")
    p.add_argument("--split", choices=["train", "dev", "test", "all"], default="test")
    p.add_argument("--seed", type=int, default=None,
                   help="split seed (defaults to the one stored in the checkpoint)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("neighbors", help="most-similar entity pairs by bottleneck cosine")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--entities", required=True)
    p.add_argument("--type", required=True, help="entity-type to compare within")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--approximate", action="store_true")
    p.add_argument("--export", help="also write the bottleneck table here")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("serve", help="start the inference HTTP service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--entities", required=True)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GraphloomError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
