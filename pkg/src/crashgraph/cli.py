"""Command-line pipeline: synth -> ingest -> build-graph -> train/grid-search/
compare -> evaluate.

Every subcommand reads an optional JSON config file (flags override file
values, file values override built-in defaults), emits one machine-readable
summary object on stdout, and logs line-delimited JSON records (timestamp,
stage, message) on stderr. Exit codes: 0 success, 2 config error, 3 data
error, 4 numeric failure. Partial output files are removed on failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import ConfigError, CrashGraphError, DataError, NumericError
from .features import FileEmbeddingProvider, HashEmbeddingProvider
from .graphs import build_coarse, build_fine, load_graph, save_graph, with_masks
from .metrics import full_report
from .models import ModelConfig, known_archs
from .records import balance_undersample, parse_records, write_records
from .synth import SynthParams, generate, write_sidecar
from .training import (
    SearchGrid,
    TrainConfig,
    evaluate_split,
    grid_search,
    load_checkpoint,
    save_checkpoint,
    train,
)

CONFIG_DEFAULTS: dict = {
    "seed": 0,
    "dist_km": 30.0,
    "window_h": 24.0,
    "resolution": 7,
    "ratios": [0.70, 0.20, 0.10],
    "hidden_dim": 32,
    "dropout": 0.30,
    "lr": 0.05,
    "weight_decay": 0.005,
    "epochs": 30,
    "num_blocks": 2,
    "temporal_kernel": 3,
    "embedding_provider": "hash",
    "embeddings_path": None,
    "synth": {
        "n_records": 2352,
        "bbox": [29.0, 33.0, -99.5, -95.5],
        "n_hotspots": 6,
        "hotspot_radius_km": 6.0,
        "hotspot_fraction": 0.55,
        "p_injury_in_hotspot": 0.90,
        "p_injury_background": 0.08,
        "rush_hours": [7, 8, 16, 17],
        "rush_odds_multiplier": 2.0,
        "signal_free": False,
    },
}


def _log(stage: str, message: str, **extra) -> None:
    record = {"timestamp": datetime.now(timezone.utc).isoformat(), "stage": stage, "message": message}
    record.update(extra)
    print(json.dumps(record), file=sys.stderr)


def _merge_config(path: str | None) -> dict:
    cfg = json.loads(json.dumps(CONFIG_DEFAULTS))  # deep copy
    if path is None:
        return cfg
    try:
        with open(path, "r", encoding="utf-8") as fh:
            user = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(user, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    for key, value in user.items():
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r}")
        if key == "synth":
            if not isinstance(value, dict):
                raise ConfigError("config key 'synth' must be an object")
            for skey, sval in value.items():
                if skey not in cfg["synth"]:
                    raise ConfigError(f"unknown config key 'synth.{skey}'")
                cfg["synth"][skey] = sval
        else:
            cfg[key] = value
    return cfg


def _provider(cfg: dict, override_path: str | None):
    path = override_path or cfg.get("embeddings_path")
    kind = "file" if override_path else cfg.get("embedding_provider", "hash")
    if kind == "hash":
        return HashEmbeddingProvider()
    if kind == "file":
        if not path:
            raise ConfigError("embedding_provider 'file' requires embeddings_path")
        return FileEmbeddingProvider(path)
    raise ConfigError(f"unknown embedding_provider {kind!r}")


def _seed(args, cfg) -> int:
    return args.seed if args.seed is not None else int(cfg["seed"])


def _write_history_csv(history, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["epoch", "train_loss", "val_loss", "train_acc", "val_acc", "train_f1", "val_f1"]
        )
        for rec in history.epochs:
            writer.writerow(
                [rec.epoch]
                + [f"{v:.17g}" for v in (rec.train_loss, rec.val_loss, rec.train_acc, rec.val_acc, rec.train_f1, rec.val_f1)]
            )


# -- subcommands -------------------------------------------------------------


def cmd_synth(args, cfg, outputs) -> dict:
    s = cfg["synth"]
    params = SynthParams(
        n_records=args.n if args.n is not None else int(s["n_records"]),
        bbox=tuple(s["bbox"]),
        n_hotspots=int(s["n_hotspots"]),
        hotspot_radius_km=float(s["hotspot_radius_km"]),
        hotspot_fraction=float(s["hotspot_fraction"]),
        p_injury_in_hotspot=float(s["p_injury_in_hotspot"]),
        p_injury_background=float(s["p_injury_background"]),
        rush_hours=frozenset(int(h) for h in s["rush_hours"]),
        rush_odds_multiplier=float(s["rush_odds_multiplier"]),
        seed=_seed(args, cfg),
    )
    if args.signal_free or s["signal_free"]:
        params = SynthParams.signal_free(n_records=params.n_records, seed=params.seed)
    records, truth = generate(params)
    outputs.append(args.out)
    write_records(records, args.out)
    sidecar = args.sidecar or f"{args.out}.sidecar.csv"
    outputs.append(sidecar)
    write_sidecar(truth, sidecar)
    n_injury = sum(r.severity for r in records)
    _log("synth", f"wrote {len(records)} records", out=str(args.out))
    return {
        "records": str(args.out),
        "sidecar": str(sidecar),
        "n_records": len(records),
        "class_counts": [len(records) - n_injury, n_injury],
        "seed": params.seed,
    }


def cmd_ingest(args, cfg, outputs) -> dict:
    records, report = parse_records(args.records)
    if not records:
        raise DataError(f"{args.records}: no valid records")
    before = [sum(1 for r in records if r.severity == 0), sum(1 for r in records if r.severity == 1)]
    seed = _seed(args, cfg)
    balanced = balance_undersample(records, seed)
    outputs.append(args.out)
    write_records(balanced, args.out)
    after = [sum(1 for r in balanced if r.severity == 0), sum(1 for r in balanced if r.severity == 1)]
    summary = {
        "out": str(args.out),
        "rows_read": report.total_rows,
        "rows_rejected": len(report.rejected),
        "rejected": [[row, reason] for row, reason in report.rejected],
        "class_counts_before": before,
        "class_counts_after": after,
        "n_records": len(balanced),
        "seed": seed,
    }
    if args.report:
        outputs.append(args.report)
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    _log("ingest", f"kept {len(balanced)} of {report.total_rows} rows")
    return summary


def cmd_build_graph(args, cfg, outputs) -> dict:
    records, report = parse_records(args.records)
    if report.rejected:
        _log("build-graph", f"skipping {len(report.rejected)} rejected rows")
    if not records:
        raise DataError(f"{args.records}: no valid records")
    provider = _provider(cfg, args.embeddings)
    if args.mode == "fine":
        dist_km = args.dist_km if args.dist_km is not None else float(cfg["dist_km"])
        window_h = args.window_h if args.window_h is not None else float(cfg["window_h"])
        graph = build_fine(records, provider, dist_km=dist_km, window_h=window_h)
    else:
        resolution = args.resolution if args.resolution is not None else int(cfg["resolution"])
        graph = build_coarse(records, provider, resolution=resolution)
    seed = _seed(args, cfg)
    graph = with_masks(graph, tuple(cfg["ratios"]), seed, stratified=args.stratified)
    outputs.append(args.out)
    save_graph(graph, args.out)
    _log("build-graph", f"built {args.mode} graph", nodes=graph.num_nodes, edges=graph.num_edges)
    return {
        "out": str(args.out),
        "mode": args.mode,
        "num_nodes": graph.num_nodes,
        "feature_dim": graph.feature_dim,
        "num_edges": graph.num_edges,
        "mask_sizes": [int(graph.train_mask.sum()), int(graph.val_mask.sum()), int(graph.test_mask.sum())],
        "seed": seed,
    }


def _train_config_from(args, cfg, seed: int) -> TrainConfig:
    model = ModelConfig(
        arch=args.arch,
        hidden_dim=args.hidden if args.hidden is not None else int(cfg["hidden_dim"]),
        num_blocks=args.blocks if args.blocks is not None else int(cfg["num_blocks"]),
        dropout=args.dropout if args.dropout is not None else float(cfg["dropout"]),
        temporal_kernel=args.kernel if args.kernel is not None else int(cfg["temporal_kernel"]),
    )
    return TrainConfig(
        model=model,
        lr=args.lr if args.lr is not None else float(cfg["lr"]),
        weight_decay=args.weight_decay if args.weight_decay is not None else float(cfg["weight_decay"]),
        epochs=args.epochs if args.epochs is not None else int(cfg["epochs"]),
        seed=seed,
    )


def cmd_train(args, cfg, outputs) -> dict:
    graph = load_graph(args.graph)
    config = _train_config_from(args, cfg, _seed(args, cfg))
    _log("train", f"training {config.model.arch}", nodes=graph.num_nodes)
    history = train(graph, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    history_path = out_dir / "history.csv"
    checkpoint_path = out_dir / "checkpoint.json"
    outputs.extend([history_path, checkpoint_path])
    _write_history_csv(history, history_path)
    save_checkpoint(history.best_params, config.model, graph.feature_dim, checkpoint_path)
    return {
        "history": str(history_path),
        "checkpoint": str(checkpoint_path),
        "best_epoch": history.best_epoch,
        "best_val_f1": history.best_val_f1,
        "seed": config.seed,
    }


def cmd_grid_search(args, cfg, outputs) -> dict:
    graph = load_graph(args.graph)
    grid = SearchGrid(
        hidden=tuple(args.hidden) if args.hidden else SearchGrid.hidden,
        dropout=tuple(args.dropout) if args.dropout else SearchGrid.dropout,
        lr=tuple(args.lr) if args.lr else SearchGrid.lr,
        weight_decay=tuple(args.weight_decay) if args.weight_decay else SearchGrid.weight_decay,
    )
    master_seed = _seed(args, cfg)
    workers = args.workers or os.cpu_count() or 1
    _log("grid-search", f"running {args.arch} grid", workers=workers)
    result = grid_search(
        graph,
        grid=grid,
        arch=args.arch,
        master_seed=master_seed,
        epochs=args.epochs if args.epochs is not None else int(cfg["epochs"]),
        workers=workers,
    )
    out_dir = Path(args.out_dir)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    best_path = out_dir / "best_checkpoint.json"
    outputs.extend([results_path, best_path])
    with open(results_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rank", "arch", "hidden_dim", "dropout", "lr", "weight_decay",
             "status", "best_epoch", "best_val_f1", "n_params", "error"]
        )
        for rank, r in enumerate(result.ranked):
            writer.writerow(
                [rank, r.config.model.arch, r.config.model.hidden_dim,
                 f"{r.config.model.dropout:.17g}", f"{r.config.lr:.17g}",
                 f"{r.config.weight_decay:.17g}", r.status, r.best_epoch,
                 f"{r.best_val_f1:.17g}", r.n_params, r.error]
            )
    for r in result.ranked:
        if r.history is not None:
            run_path = runs_dir / f"run-{r.index:03d}-history.csv"
            outputs.append(run_path)
            _write_history_csv(r.history, run_path)
    best = result.best
    save_checkpoint(best.history.best_params, best.config.model, graph.feature_dim, best_path)
    return {
        "results": str(results_path),
        "best_checkpoint": str(best_path),
        "runs": len(result.ranked),
        "best": {
            "hidden_dim": best.config.model.hidden_dim,
            "dropout": best.config.model.dropout,
            "lr": best.config.lr,
            "weight_decay": best.config.weight_decay,
            "best_val_f1": best.best_val_f1,
            "best_epoch": best.best_epoch,
        },
        "seed": master_seed,
    }


def cmd_compare(args, cfg, outputs) -> dict:
    from .training import compare_models

    graph_fine = load_graph(args.fine)
    graph_coarse = load_graph(args.coarse)
    if graph_fine.mode != "fine" or graph_coarse.mode != "coarse":
        raise DataError("compare expects --fine a fine graph and --coarse a coarse graph")
    archs = tuple(args.archs) if args.archs else ("gcn", "gat", "sage", "dstgcn")
    master_seed = _seed(args, cfg)
    _log("compare", f"comparing {archs}")
    rows = compare_models(
        graph_fine,
        graph_coarse,
        archs=archs,
        master_seed=master_seed,
        epochs=args.epochs if args.epochs is not None else int(cfg["epochs"]),
    )
    outputs.append(args.out)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arch", "fine_best_val_f1", "coarse_best_val_f1"])
        for row in rows:
            writer.writerow(
                [row["arch"], f"{row['fine_best_val_f1']:.17g}", f"{row['coarse_best_val_f1']:.17g}"]
            )
    return {"out": str(args.out), "rows": rows, "seed": master_seed}


def cmd_evaluate(args, cfg, outputs) -> dict:
    graph = load_graph(args.graph)
    params, model, in_dim = load_checkpoint(args.checkpoint)
    if in_dim != graph.feature_dim:
        raise DataError(
            f"checkpoint feature dim {in_dim} does not match graph dim {graph.feature_dim}"
        )
    mask = {"train": graph.train_mask, "val": graph.val_mask, "test": graph.test_mask}[args.split]
    if not mask.any():
        raise DataError(f"empty {args.split} mask")
    y_true, y_pred, scores = evaluate_split(graph, params, model, mask)
    report = full_report(y_true, y_pred, scores)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    roc_path = out_dir / "roc_points.csv"
    pr_path = out_dir / "pr_points.csv"
    outputs.extend([report_path, roc_path, pr_path])
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(roc_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "fpr", "tpr"])
        for cls in ("class0", "class1"):
            for fpr, tpr in report.roc_points[cls]:
                writer.writerow([cls, f"{fpr:.17g}", f"{tpr:.17g}"])
    with open(pr_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["recall", "precision"])
        for recall, precision in report.pr_points:
            writer.writerow([f"{recall:.17g}", f"{precision:.17g}"])
    _log("evaluate", f"evaluated {args.split} split", accuracy=report.accuracy)
    return {
        "report": str(report_path),
        "roc_points": str(roc_path),
        "pr_points": str(pr_path),
        "split": args.split,
        "accuracy": report.accuracy,
        "weighted_f1": report.weighted_f1,
        "auc": report.auc,
        "average_precision": report.average_precision,
        "confusion": report.confusion.tolist(),
    }


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crashgraph",
        description="Crash severity graph pipeline (synth, ingest, graphs, GNN training, metrics).",
        epilog=(
            "Config keys (JSON file via --config; flags override): "
            "seed=0, dist_km=30, window_h=24, resolution=7, ratios=[0.7,0.2,0.1], "
            "hidden_dim=32, dropout=0.30, lr=0.05, weight_decay=0.005, epochs=30, "
            "num_blocks=2, temporal_kernel=3, embedding_provider=hash, embeddings_path=null, "
            "synth={n_records, bbox, n_hotspots, hotspot_radius_km, hotspot_fraction, "
            "p_injury_in_hotspot, p_injury_background, rush_hours, rush_odds_multiplier, signal_free}."
        ),
    )
    parser.add_argument("--version", action="version", version=f"crashgraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override file values")
        p.add_argument("--seed", type=int, default=None, help="master seed (default: config seed=0)")

    p = sub.add_parser("synth", help="generate a synthetic crash-records file")
    common(p)
    p.add_argument("--out", required=True, help="output records CSV")
    p.add_argument("--sidecar", help="ground-truth sidecar CSV (default: <out>.sidecar.csv)")
    p.add_argument("--n", type=int, default=None, help="record count (default 2352)")
    p.add_argument("--signal-free", action="store_true", help="null dataset: no planted signal")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="validate and class-balance a records file")
    common(p)
    p.add_argument("--records", required=True, help="input records CSV")
    p.add_argument("--out", required=True, help="balanced records CSV")
    p.add_argument("--report", help="optional JSON ingest report path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-graph", help="build a fine or coarse graph file")
    common(p)
    p.add_argument("--mode", required=True, choices=("fine", "coarse"))
    p.add_argument("--records", required=True, help="records CSV (normally the ingest output)")
    p.add_argument("--out", required=True, help="output graph file")
    p.add_argument("--embeddings", help="embedding CSV (switches provider to 'file')")
    p.add_argument("--dist-km", type=float, default=None, help="fine spatial threshold (default 30)")
    p.add_argument("--window-h", type=float, default=None, help="fine temporal threshold (default 24)")
    p.add_argument("--resolution", type=int, default=None, help="coarse cell resolution (default 7)")
    p.add_argument("--stratified", action="store_true", help="stratify the split by label")
    p.set_defaults(func=cmd_build_graph)

    def train_flags(p):
        p.add_argument("--hidden", type=int, default=None, help="hidden-layer size (default 32)")
        p.add_argument("--dropout", type=float, default=None, help="dropout probability (default 0.30)")
        p.add_argument("--lr", type=float, default=None, help="Adam learning rate (default 0.05)")
        p.add_argument("--weight-decay", type=float, default=None, help="L2 weight decay (default 0.005)")
        p.add_argument("--epochs", type=int, default=None, help="training epochs (default 30)")
        p.add_argument("--blocks", type=int, default=None, help="number of blocks (default 2)")
        p.add_argument("--kernel", type=int, default=None, help="temporal kernel size (default 3)")

    p = sub.add_parser("train", help="train one architecture on a graph")
    common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--arch", required=True, choices=known_archs())
    p.add_argument("--out-dir", required=True)
    train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid-search", help="hyperparameter grid search on a graph")
    common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--arch", default="dstgcn", choices=known_archs())
    p.add_argument("--out-dir", required=True)
    p.add_argument("--hidden", type=int, nargs="+", help="grid values (default 32 64)")
    p.add_argument("--dropout", type=float, nargs="+", help="grid values (default 0.3 0.4)")
    p.add_argument("--lr", type=float, nargs="+", help="grid values (default 0.10 0.07 0.04 0.001)")
    p.add_argument("--weight-decay", type=float, nargs="+", help="grid values (default 5e-3 5e-4 5e-5)")
    p.add_argument("--epochs", type=int, default=None, help="epochs per run (default 30)")
    p.add_argument("--workers", type=int, default=None, help="parallel workers (default: cores)")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("compare", help="fine-vs-coarse comparison across architectures")
    common(p)
    p.add_argument("--fine", required=True, help="fine graph file")
    p.add_argument("--coarse", required=True, help="coarse graph file")
    p.add_argument("--out", required=True, help="output comparison CSV")
    p.add_argument("--archs", nargs="+", default=None, help="architectures (default: all built-ins)")
    p.add_argument("--epochs", type=int, default=None, help="epochs per run (default 30)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser(
        "evaluate",
        help="evaluate a checkpoint on one split",
        description=(
            "Writes report.json (confusion, accuracy, weighted F1, per-class AUC, AP) and "
            "two plot-data tables: roc_points.csv with columns class,fpr,tpr and "
            "pr_points.csv with columns recall,precision."
        ),
    )
    common(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    return parser


def _exit_code(exc: CrashGraphError) -> int:
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, NumericError):
        return 4
    return 3


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    outputs: list = []
    try:
        cfg = _merge_config(args.config)
        summary = args.func(args, cfg, outputs)
    except (CrashGraphError, OSError) as exc:
        code = _exit_code(exc) if isinstance(exc, CrashGraphError) else 3
        error = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
        print(json.dumps(error), file=sys.stderr)
        for path in outputs:  # never leave partial outputs behind
            try:
                os.unlink(path)
            except OSError:
                pass
        return code
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
