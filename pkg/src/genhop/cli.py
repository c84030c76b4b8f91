"""Command-line entry point: ``genhop <verb> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import (
    FIXTURE_NAMES,
    Dataset,
    builtin_fixture,
    csl_dataset,
    enumerate_csl_classes,
    generate_csl,
    load_dataset_json,
    read_graph6_file,
    save_dataset_json,
    write_graph6,
)
from .evaluate import distinguish_report, embed_dataset, linear_probe, load_dataset_spec, run_experiment
from .features import featurize
from .graph import Graph, from_edge_list
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .train import TrainConfig, pretrain, write_trace_csv
from .wl import profile_relation_search, wl_distinguish

log = logging.getLogger("genhop")


def _read_graphs(path: str) -> Dataset:
    p = Path(path)
    if p.suffix == ".json":
        return load_dataset_json(p)
    graphs = read_graph6_file(p)
    return Dataset(graphs, [0] * len(graphs), name=p.stem, class_count=1)


def _pair(args) -> tuple[Graph, Graph]:
    if args.fixture:
        return builtin_fixture(args.fixture)
    graphs = _read_graphs(args.graphs).graphs
    if len(graphs) < 2:
        raise SystemExit(f"{args.graphs}: need at least two graphs")
    return graphs[args.first], graphs[args.second]


def _load_config(path: str | None) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8")) if path else {}


def cmd_gen_csl(args) -> int:
    if args.classes:
        print(" ".join(map(str, enumerate_csl_classes(args.m, args.max_R))))
        return 0
    if args.dataset:
        ds = csl_dataset(args.m, args.max_R, args.copies, args.seed)
        save_dataset_json(ds, args.dataset)
        print(f"wrote {len(ds)} graphs in {ds.class_count} classes to {args.dataset}")
        return 0
    skips = [args.R] if args.R else enumerate_csl_classes(args.m, args.max_R)
    for R in skips:
        print(write_graph6(generate_csl(args.m, R)))
    return 0


def cmd_parse_g6(args) -> int:
    for i, g in enumerate(read_graph6_file(args.file)):
        deg = g.degrees
        print(f"{i}\tm={g.num_nodes}\te={g.num_edges}\tdeg=[{deg.min() if len(deg) else 0},{deg.max() if len(deg) else 0}]")
    return 0


def cmd_featurize(args) -> int:
    ds = _read_graphs(args.file)
    work = lambda g: featurize(g, args.K, args.p)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        feats = list(pool.map(work, ds.graphs))
    if args.out:
        arrays = {}
        for i, f in enumerate(feats):
            arrays[f"g{i}_walks"] = f.walk.values.astype(np.int64)
            arrays[f"g{i}_centrality"] = f.centrality.raw
            arrays[f"g{i}_pe"] = f.pe.pe
        np.savez(args.out, **arrays)
        print(f"wrote features of {len(feats)} graphs to {args.out}")
    else:
        for i, f in enumerate(feats):
            print(f"{i}\twalks={sorted(set(f.walk.rows()))}\teb_max={f.centrality.eb.max(initial=0):.6g}")
    return 0


def cmd_wl_test(args) -> int:
    g1, g2 = _pair(args)
    same = not wl_distinguish(g1, g2)
    print("1-WL: same" if same else "1-WL: different")
    return 0


def cmd_distinguish(args) -> int:
    g1, g2 = _pair(args)
    rep = distinguish_report(g1, g2, K=args.K, p=args.p, seeds=range(args.seed, args.seed + args.model_seeds))
    print(rep.table())
    if rep.embedding_distances:
        print(f"embedding_distance_min,{min(rep.embedding_distances):.6g}")
    return 0


def _dataset_from_args(args, cfg: dict) -> Dataset:
    if args.dataset:
        return _read_graphs(args.dataset)
    if "dataset" in cfg:
        base = Path(args.config).parent if args.config else Path(".")
        return load_dataset_spec(cfg["dataset"], base)
    raise SystemExit("no dataset: pass --dataset or a config with a 'dataset' entry")


def cmd_pretrain(args) -> int:
    cfg = _load_config(args.config)
    ds = _dataset_from_args(args, cfg)
    edge_dim = ds.graphs[0].edge_attr.shape[1] if ds.graphs[0].edge_attr is not None else 0
    mcfg = ModelConfig.variant(cfg.get("variant", "full"), **{"in_dim": ds.feature_dim, "edge_dim": edge_dim, **cfg.get("model", {})})
    tkw = dict(cfg.get("train", {}))
    setting, ratio = tkw.pop("setting", "mixed"), tkw.pop("ratio", 0.2)
    if args.epochs:
        tkw["epochs"] = args.epochs
    tcfg = TrainConfig.setting(setting, ratio=ratio, **tkw)
    res = pretrain(ds.graphs, tcfg, mcfg, seed=args.seed,
                   on_epoch=lambda r: print(f"epoch {r.epoch}\tloss {r.mean_loss:.6f}", flush=True))
    save_checkpoint(res.params, args.out, extra={"train": asdict(tcfg), "seed": args.seed})
    if args.trace:
        write_trace_csv(res.trace, args.trace)
    print(f"saved {args.out}")
    return 0


def cmd_embed(args) -> int:
    params, _ = load_checkpoint(args.checkpoint)
    ds = _read_graphs(args.dataset)
    emb = embed_dataset(ds, params)
    np.savez(args.out, embeddings=emb, labels=np.asarray(ds.labels))
    print(f"wrote {emb.shape[0]}x{emb.shape[1]} embeddings to {args.out}")
    return 0


def cmd_probe(args) -> int:
    data = np.load(args.embeddings)
    res = linear_probe(data["embeddings"], data["labels"], folds=args.folds, seed=args.seed)
    for k, a in enumerate(res.fold_accuracies):
        print(f"fold {k}\t{a:.4f}")
    print(f"mean {res.mean:.4f}\tstd {res.std:.4f}")
    return 0


def cmd_run(args) -> int:
    if not args.config:
        raise SystemExit("run needs --config <spec.json>")
    res = run_experiment(args.config, args.out)
    sys.stdout.write(res.csv_text())
    return 0


def cmd_profile_search(args) -> int:
    import networkx as nx

    corpus = []
    for h in nx.graph_atlas_g():
        if 1 <= h.number_of_nodes() <= args.max_nodes:
            corpus.append(from_edge_list(h.number_of_nodes(), list(h.edges())))
    rep = profile_relation_search(corpus, args.K)
    print(f"graphs,{len(corpus)}")
    print(rep.table())
    if args.witnesses:
        Path(args.witnesses).write_text(rep.witness_csv(), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="genhop", description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--config", help="JSON spec with dataset/model/train entries")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen-csl", help="circular skip-link graphs as graph6")
    p.add_argument("--m", type=int, default=41)
    p.add_argument("--R", type=int)
    p.add_argument("--max-R", dest="max_R", type=int, default=20)
    p.add_argument("--classes", action="store_true", help="print class representatives only")
    p.add_argument("--dataset", help="write a labelled JSON dataset here")
    p.add_argument("--copies", type=int, default=10)
    p.set_defaults(fn=cmd_gen_csl)

    p = sub.add_parser("parse-g6", help="summarise a graph6 file")
    p.add_argument("file")
    p.set_defaults(fn=cmd_parse_g6)

    p = sub.add_parser("featurize", help="closed walks, centralities and PE")
    p.add_argument("file")
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--p", type=int, default=6)
    p.add_argument("--out", help=".npz output")
    p.set_defaults(fn=cmd_featurize)

    for verb, fn in (("wl-test", cmd_wl_test), ("distinguish", cmd_distinguish)):
        p = sub.add_parser(verb)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--fixture", choices=FIXTURE_NAMES)
        src.add_argument("--graphs", help="graph6 or JSON file")
        p.add_argument("--first", type=int, default=0)
        p.add_argument("--second", type=int, default=1)
        if verb == "distinguish":
            p.add_argument("--K", type=int, default=3)
            p.add_argument("--p", type=int, default=2)
            p.add_argument("--model-seeds", dest="model_seeds", type=int, default=10)
        p.set_defaults(fn=fn)

    p = sub.add_parser("pretrain")
    p.add_argument("--dataset", help="graph6 or JSON dataset (overrides the config)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", default="model.ckpt")
    p.add_argument("--trace", help="CSV loss trace path")
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("embed")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default="embeddings.npz")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("probe")
    p.add_argument("embeddings", help=".npz from 'embed'")
    p.add_argument("--folds", type=int, default=10)
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("run", help="pretrain, embed and probe per the --config spec")
    p.add_argument("--out", help="directory for metrics CSV, checkpoints and traces")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("profile-search", help="cycle vs closed-walk profile table over small graphs")
    p.add_argument("--max-nodes", dest="max_nodes", type=int, default=6)
    p.add_argument("--K", type=int, default=6)
    p.add_argument("--witnesses", help="CSV path for witness node pairs")
    p.set_defaults(fn=cmd_profile_search)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
