"""Batch entry points: synth, analyze, train, evaluate, export-graph, ablate.

Every subcommand derives all randomness from one --seed, writes a manifest
next to its artifacts, and embeds the manifest's stable identity in each
report so outputs are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional

import numpy as np
import torch

from . import __version__
from .analysis import analyze_all
from .checkpoint import load_checkpoint
from .config import ABLATIONS, TrainConfig
from .data import (
    GenConfig,
    InteractionGraph,
    SocialGraph,
    _parse_pair_file,
    dataset_hash,
    generate_synthetic,
    label_activity,
    load_dataset,
    save_dataset,
    split_train_test,
    write_id_map,
)
from .errors import (
    ConfigError,
    DataError,
    NumericalError,
    ShapeError,
    SocialRecError,
)
from .evaluation import evaluate_model
from .figures import (
    save_ablation_figure,
    save_degree_distribution_figure,
    save_jaccard_delta_figure,
    save_loss_curve_figure,
    save_metrics_figure,
    save_relation_quality_figure,
)
from .manifest import MANIFEST_FILENAME, new_manifest
from .model import GraphBundle, build_model
from .training import train
from .utils import atomic_write_text, canonical_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        raise SystemExit(self.exit_with_usage(message))

    def exit_with_usage(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return EXIT_USAGE


def _write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_tsv(path: str, header: list[str], rows: list[list]) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(str(x) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _load_data_dir(data_dir: str) -> tuple[InteractionGraph, SocialGraph]:
    inter = os.path.join(data_dir, "interactions.tsv")
    social = os.path.join(data_dir, "social.tsv")
    for path in (inter, social):
        if not os.path.exists(path):
            raise DataError(f"{path} not found; expected a dataset directory")
    user_feat = os.path.join(data_dir, "user_features.tsv")
    item_feat = os.path.join(data_dir, "item_features.tsv")
    return load_dataset(
        inter,
        social,
        user_feat if os.path.exists(user_feat) else None,
        item_feat if os.path.exists(item_feat) else None,
    )


def _load_snapshot(data_dir: str, graph: InteractionGraph):
    """Optional first-snapshot files for the new-edge analysis."""
    snap_inter = os.path.join(data_dir, "snapshots", "interactions_t1.tsv")
    snap_social = os.path.join(data_dir, "snapshots", "social_t1.tsv")
    if not (os.path.exists(snap_inter) and os.path.exists(snap_social)):
        return None
    u_index = {int(orig): k for k, orig in enumerate(graph.user_ids)}
    i_index = {int(orig): k for k, orig in enumerate(graph.item_ids)}
    per_user = [[] for _ in range(graph.num_users)]
    for u, i in _parse_pair_file(snap_inter):
        if u not in u_index or i not in i_index:
            raise DataError(f"snapshot references unknown id pair ({u}, {i})")
        per_user[u_index[u]].append(i_index[i])
    interactions_t1 = [np.unique(np.array(v, dtype=np.int64)) for v in per_user]
    edges = []
    for u, v in _parse_pair_file(snap_social):
        if u not in u_index or v not in u_index:
            raise DataError(f"snapshot references unknown user in edge ({u}, {v})")
        edges.append((u_index[u], u_index[v]))
    social_t1 = SocialGraph.from_edges(graph.num_users, np.array(edges, dtype=np.int64).reshape(-1, 2))
    return interactions_t1, social_t1


def _labels_from_args(graph: InteractionGraph, args) -> "label_activity":
    if getattr(args, "inactive_percentile", None) is not None:
        return label_activity(graph, percentile=args.inactive_percentile)
    return label_activity(graph, threshold=args.inactive_threshold)


def _base_config(args) -> TrainConfig:
    cfg = TrainConfig.from_json_file(args.config) if args.config else TrainConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    if getattr(args, "ablation", None) is not None:
        overrides["ablation"] = args.ablation
    return cfg.replace(**overrides) if overrides else cfg


def _prepare_split(graph, config: TrainConfig):
    split = split_train_test(graph, config.holdout_fraction, config.seed)
    labels = label_activity(
        split.train,
        threshold=config.inactive_threshold,
        percentile=config.inactive_percentile,
    )
    return split, labels


def _restore_model(ckpt, graph):
    model = build_model(
        ckpt.config, graph.user_features.shape[1], graph.item_features.shape[1]
    )
    model.load_state_arrays(ckpt.model_state)
    return model


def _check_hash(ckpt, graph, social, data_dir: str) -> str:
    found = dataset_hash(graph, social)
    if ckpt.dataset_hash and ckpt.dataset_hash != found:
        raise DataError(
            f"checkpoint was trained on dataset {ckpt.dataset_hash[:12]}... but "
            f"{data_dir} hashes to {found[:12]}...; refusing to evaluate across datasets"
        )
    return found


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    gen = GenConfig.from_dict(json.load(open(args.gen_config))) if args.gen_config else GenConfig()
    if args.no_snapshots:
        gen.snapshots = False
    gen.validate()
    manifest = new_manifest("synth", args.seed)
    ds = generate_synthetic(gen, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    save_dataset(args.out, ds)
    manifest.dataset_hash = dataset_hash(ds.graph, ds.social)
    _write_json(os.path.join(args.out, "gen_config.json"), gen.to_dict())
    manifest.write(os.path.join(args.out, MANIFEST_FILENAME))
    print(
        f"wrote synthetic dataset: {ds.graph.num_users} users, "
        f"{ds.graph.num_items} items, {ds.graph.num_interactions()} interactions, "
        f"{ds.social.num_edges()} social edges -> {args.out}"
    )
    return EXIT_OK


def cmd_analyze(args) -> int:
    graph, social = _load_data_dir(args.data)
    labels = _labels_from_args(graph, args)
    manifest = new_manifest("analyze", args.seed, dataset_hash=dataset_hash(graph, social))
    bounds = tuple(int(x) for x in args.buckets.split(",")) if args.buckets else (20, 50)
    snapshot = _load_snapshot(args.data, graph)
    report = analyze_all(
        graph, social, labels, seed=args.seed, bucket_bounds=bounds, snapshot=snapshot
    )
    report["manifest"] = manifest.reference()
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "analysis.json"), report)

    rq = report["relation_quality"]["classes"]
    _write_tsv(
        os.path.join(args.out, "relation_quality.tsv"),
        ["class", "pair_count", "nonzero_jaccard_rate"],
        [[c, rq[c]["pair_count"], rq[c]["value"]] for c in rq],
    )
    dd = report["degree_distribution"]
    rows = []
    for cls, stats in dd["classes"].items():
        for bucket, frac in zip(dd["buckets"], stats["fractions"]):
            rows.append([cls, bucket, frac])
    _write_tsv(os.path.join(args.out, "degree_distribution.tsv"),
               ["class", "bucket", "fraction"], rows)
    if report["new_edge_jaccard_delta"] is not None:
        jd = report["new_edge_jaccard_delta"]["classes"]
        _write_tsv(
            os.path.join(args.out, "new_edge_delta.tsv"),
            ["class", "pair_count", "mean", "q25", "median", "q75"],
            [
                [c, jd[c]["pair_count"], jd[c]["value"],
                 jd[c].get("q25"), jd[c].get("median"), jd[c].get("q75")]
                for c in jd
            ],
        )
    if not args.no_figures:
        save_relation_quality_figure(report["relation_quality"],
                                     os.path.join(args.out, "relation_quality.png"))
        save_degree_distribution_figure(dd, os.path.join(args.out, "degree_distribution.png"))
        if report["new_edge_jaccard_delta"] is not None:
            save_jaccard_delta_figure(report["new_edge_jaccard_delta"],
                                      os.path.join(args.out, "new_edge_delta.png"))
    manifest.write(os.path.join(args.out, MANIFEST_FILENAME))
    print(f"analysis report -> {os.path.join(args.out, 'analysis.json')}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _base_config(args)
    graph, social = _load_data_dir(args.data)
    ds_hash = dataset_hash(graph, social)
    manifest = new_manifest("train", config.seed, config_hash=config.config_hash(),
                            dataset_hash=ds_hash)
    split, labels = _prepare_split(graph, config)
    os.makedirs(args.out, exist_ok=True)
    write_id_map(os.path.join(args.out, "id_map.tsv"), graph)
    result = train(split.train, social, labels, config, out_dir=args.out,
                   dataset_hash_value=ds_hash)
    _write_json(os.path.join(args.out, "config.json"), config.to_dict())
    _write_tsv(
        os.path.join(args.out, "loss_curve.tsv"),
        ["epoch", "bpr", "mimic", "total"],
        [[h["epoch"], h["bpr"], h["mimic"], h["total"]] for h in result.loss_history],
    )
    if not args.no_figures and result.loss_history:
        save_loss_curve_figure(result.loss_history, os.path.join(args.out, "loss_curve.png"))
    manifest.write(os.path.join(args.out, MANIFEST_FILENAME))
    final = result.loss_history[-1]["total"] if result.loss_history else float("nan")
    print(f"trained {config.epochs} epoch(s); final loss {final:.4f}; "
          f"checkpoint -> {result.checkpoint_path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    graph, social = _load_data_dir(args.data)
    ds_hash = _check_hash(ckpt, graph, social, args.data)
    seed = args.seed if args.seed is not None else ckpt.config.seed
    manifest = new_manifest("evaluate", seed, config_hash=ckpt.config.config_hash(),
                            dataset_hash=ds_hash)
    split, labels = _prepare_split(graph, ckpt.config)
    model = _restore_model(ckpt, graph)
    bundle = GraphBundle.build(split.train, social)
    k_values = [int(k) for k in args.k.split(",")]
    report = evaluate_model(
        model, bundle, ckpt.clusters.anchor_users, split, labels,
        k_values=k_values, seed=seed, num_negatives=args.num_negatives,
    )
    payload = report.to_dict()
    payload["manifest"] = manifest.reference()
    _write_json(args.report, payload)
    out_dir = os.path.dirname(os.path.abspath(args.report))
    rows = []
    for cohort, stats in payload["cohorts"].items():
        for key in sorted(stats):
            rows.append([cohort, key, stats[key]])
    _write_tsv(os.path.join(out_dir, "metrics.tsv"), ["cohort", "metric", "value"], rows)
    if not args.no_figures:
        save_metrics_figure(payload, os.path.join(out_dir, "metrics.png"))
    manifest.write(os.path.join(out_dir, MANIFEST_FILENAME))
    for cohort in ("inactive", "active", "overall"):
        stats = payload["cohorts"][cohort]
        shown = ", ".join(f"{m}@{k}={stats[f'{m}@{k}']:.4f}"
                          for k in k_values for m in ("ndcg", "hr"))
        print(f"{cohort:>8} ({stats['user_count']} users): {shown}")
    print(f"report -> {args.report}")
    return EXIT_OK


def cmd_export_graph(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    graph, social = _load_data_dir(args.data)
    ds_hash = _check_hash(ckpt, graph, social, args.data)
    manifest = new_manifest("export-graph", ckpt.config.seed,
                            config_hash=ckpt.config.config_hash(), dataset_hash=ds_hash)
    split, labels = _prepare_split(graph, ckpt.config)
    model = _restore_model(ckpt, graph)
    bundle = GraphBundle.build(split.train, social)
    with torch.no_grad():
        out = model.forward(bundle, ckpt.clusters.anchor_users, collect_graphs=True)
    final = out.iterations[-1]
    lines = ["# user\tneighbor_or_anchor\tweight\tkind"]
    for u, v, w in zip(final.retained_src, final.retained_dst, final.retained_weight):
        lines.append(f"{int(u)}\t{int(v)}\t{float(w)!r}\tU")
    for u, a, w in zip(final.anchor_src, final.anchor_user, final.anchor_weight):
        lines.append(f"{int(u)}\t{int(a)}\t{float(w)!r}\tC")
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    manifest.write(os.path.join(os.path.dirname(os.path.abspath(args.out)),
                                MANIFEST_FILENAME))
    print(f"refined graph ({final.retained_src.size} kept edges, "
          f"{final.anchor_src.size} anchor links) -> {args.out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    base = _base_config(args)
    seeds = [int(s) for s in args.seeds.split(",")]
    if not seeds:
        raise ConfigError("need at least one seed")
    variants = args.variants.split(",") if args.variants else list(ABLATIONS)
    for v in variants:
        if v not in ABLATIONS:
            raise ConfigError(f"unknown variant {v!r}")
    graph, social = _load_data_dir(args.data)
    ds_hash = dataset_hash(graph, social)
    manifest = new_manifest("ablate", seeds[0], config_hash=base.config_hash(),
                            dataset_hash=ds_hash)
    k_values = [int(k) for k in args.k.split(",")]
    runs = []
    failures = []
    for variant in variants:
        for seed in seeds:
            cfg = base.replace(ablation=variant, seed=seed)
            try:
                split, labels = _prepare_split(graph, cfg)
                result = train(split.train, social, labels, cfg,
                               dataset_hash_value=ds_hash)
                report = evaluate_model(
                    result.model, result.bundle, result.clusters.anchor_users,
                    split, labels, k_values=k_values, seed=seed,
                    num_negatives=args.num_negatives,
                )
                row = {"variant": variant, "seed": seed}
                for k in k_values:
                    row[f"inactive_ndcg@{k}"] = report.value("inactive", "ndcg", k)
                    row[f"overall_ndcg@{k}"] = report.value("overall", "ndcg", k)
                runs.append(row)
                print(f"[done] {variant} seed={seed} "
                      + " ".join(f"inactive_ndcg@{k}={row[f'inactive_ndcg@{k}']:.4f}"
                                 for k in k_values))
            except SocialRecError as e:
                failures.append({"variant": variant, "seed": seed, "error": str(e)})
                print(f"[fail] {variant} seed={seed}: {e}", file=sys.stderr)
    summary = []
    for variant in variants:
        rows = [r for r in runs if r["variant"] == variant]
        if not rows:
            continue
        entry = {"variant": variant, "runs": len(rows)}
        for k in k_values:
            vals = np.array([r[f"inactive_ndcg@{k}"] for r in rows])
            entry[f"inactive_ndcg@{k}_mean"] = float(vals.mean())
            entry[f"inactive_ndcg@{k}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        summary.append(entry)
    os.makedirs(args.out, exist_ok=True)
    payload = {
        "seeds": seeds,
        "variants": variants,
        "k_values": k_values,
        "runs": runs,
        "summary": summary,
        "failures": failures,
        "manifest": manifest.reference(),
    }
    _write_json(os.path.join(args.out, "ablation_report.json"), payload)
    header = ["variant", "seed"] + [f"inactive_ndcg@{k}" for k in k_values] \
        + [f"overall_ndcg@{k}" for k in k_values]
    _write_tsv(
        os.path.join(args.out, "ablation.tsv"),
        header,
        [[r["variant"], r["seed"]] + [r[f"inactive_ndcg@{k}"] for k in k_values]
         + [r[f"overall_ndcg@{k}"] for k in k_values] for r in runs],
    )
    if not args.no_figures and summary:
        k0 = k_values[0]
        save_ablation_figure(
            [{"variant": s["variant"], "mean": s[f"inactive_ndcg@{k0}_mean"],
              "std": s[f"inactive_ndcg@{k0}_std"]} for s in summary],
            f"inactive ndcg@{k0}",
            os.path.join(args.out, "ablation.png"),
        )
    manifest.write(os.path.join(args.out, MANIFEST_FILENAME))
    for s in summary:
        k0 = k_values[0]
        print(f"{s['variant']:>8}: inactive ndcg@{k0} = "
              f"{s[f'inactive_ndcg@{k0}_mean']:.4f} +/- {s[f'inactive_ndcg@{k0}_std']:.4f}")
    if failures:
        print(f"{len(failures)} run(s) failed; see ablation_report.json", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="socialrec",
                     description="social-graph refinement recommender pipeline")
    parser.add_argument("--version", action="version", version=f"socialrec {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted-community dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gen-config", help="JSON file of generator fields")
    p.add_argument("--no-snapshots", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="relation-quality observation tables")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inactive-threshold", type=int, default=5)
    p.add_argument("--inactive-percentile", type=float, default=None)
    p.add_argument("--buckets", default="20,50",
                   help="comma-separated degree bucket upper bounds")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="fit the model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file of training config fields")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--ablation", choices=ABLATIONS, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="top-K metrics for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", default="10,20")
    p.add_argument("--report", required=True, help="output JSON path")
    p.add_argument("--seed", type=int, default=None,
                   help="negative-sampling seed (default: the training seed)")
    p.add_argument("--num-negatives", type=int, default=1000)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-graph", help="dump the refined social graph as TSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_graph)

    p = sub.add_parser("ablate", help="train and compare ablation variants")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="base training config JSON")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--variants", default=None,
                   help=f"comma-separated subset of {','.join(ABLATIONS)}")
    p.add_argument("--k", default="10,20")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--num-negatives", type=int, default=1000)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    torch.set_num_threads(1)  # schedule-independent, reproducible reductions
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ShapeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
