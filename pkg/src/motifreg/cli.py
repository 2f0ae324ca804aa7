"""Command-line pipeline: motif counting, training, evaluation, benchmarks.

Subcommands: motifs, train, eval, bench, gradcheck. Configuration comes from
an optional JSON file of flat dotted keys (e.g. {"gnn.hidden": 64}) with
command-line flags taking precedence. All outputs land under --out together
with a manifest recording the config hash, graph content hash, and artifact
names. Exit codes: 0 success, 1 assertion/acceptance failure, 2 usage or IO
error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

DATA_ROOT_ENV = "MOTIFREG_DATA"


class UsageError(Exception):
    pass


def _resolve(path):
    p = Path(path)
    if not p.is_absolute() and not p.exists():
        root = os.environ.get(DATA_ROOT_ENV)
        if root and (Path(root) / p).exists():
            return Path(root) / p
    return p


def _require(path, what):
    p = _resolve(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


_KNOWN_KEYS = {
    "Q", "max_epochs", "batch_size", "lr", "patience", "seed", "regularize",
    "gnn.arch", "gnn.layers", "gnn.hidden", "gnn.heads", "gnn.dropout", "gnn.out_dim",
}


def load_config(path, overrides=None):
    """Flat dotted-key JSON -> TrainConfig; CLI overrides win."""
    from .trainer import TrainConfig

    flat = {}
    if path is not None:
        with open(_require(path, "config file")) as fh:
            flat.update(json.load(fh))
    unknown = set(flat) - _KNOWN_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    flat.update(overrides or {})
    kwargs = {}
    gnn = {}
    for k, v in flat.items():
        if k.startswith("gnn."):
            gnn[k[4:]] = v
        else:
            kwargs[k] = v
    if gnn:
        kwargs["gnn"] = gnn
    return TrainConfig(**kwargs)


def config_hash(config) -> str:
    from dataclasses import asdict

    return hashlib.sha256(
        json.dumps(asdict(config), sort_keys=True).encode()
    ).hexdigest()[:16]


def write_manifest(out_dir, entries, cfg_hash, graph_hash):
    manifest = {
        "config_hash": cfg_hash,
        "graph_hash": graph_hash,
        "artifacts": sorted(entries),
    }
    with open(Path(out_dir) / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c) for c in columns})


def _load_dataset(args):
    from .graphs import load_features, load_graph, load_labels

    g = load_graph(_require(args.graph, "graph"), directed=args.directed,
                   node_type_path=_resolve(args.node_types) if args.node_types else None)
    X = load_features(_require(args.features, "features"), g) if args.features else None
    labels = load_labels(_require(args.labels, "labels"), g) if args.labels else None
    return g, X, labels


def _select_catalog(name, g):
    from .motifs import Schema, builtin_catalog, typed_catalog

    if name == "undirected":
        return builtin_catalog(directed=False), None
    if name == "directed-full":
        return builtin_catalog(directed=True, variant="full"), None
    if name == "directed-paper":
        return builtin_catalog(directed=True, variant="paper"), None
    if name.startswith("typed:"):
        schema = Schema.from_json(_require(name[6:], "schema"))
        base = builtin_catalog(directed=g.directed, variant="full" if g.directed else None) \
            if g.directed else builtin_catalog(directed=False)
        return typed_catalog(schema, base), schema
    raise UsageError(f"unknown catalog {name!r}")


def cmd_motifs(args):
    from .motifs import build_index, load_index, save_index

    g, _, _ = _load_dataset(args)
    catalog, schema = _select_catalog(args.catalog, g)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cache = out / "index.bin"
    index = None
    if args.cache and cache.exists():
        try:
            index = load_index(cache, expect_graph=g)
        except ValueError:
            index = None
    if index is None:
        index = build_index(g, catalog, schema=schema)
        if args.cache:
            save_index(index, cache)

    totals = index.total_counts()
    for spec, count in zip(catalog, totals):
        print(f"{spec.name}: {int(count)}")
    counts = index.counts_matrix()
    rows = [
        {"node": v, **{spec.name: int(counts[t, v]) for t, spec in enumerate(catalog)}}
        for v in range(g.n_nodes)
    ]
    write_csv(out / "node_counts.csv", rows, ["node"] + [s.name for s in catalog])
    totals_rows = [{"motif": s.name, "instances": int(c)} for s, c in zip(catalog, totals)]
    write_csv(out / "motif_totals.csv", totals_rows, ["motif", "instances"])
    artifacts = ["node_counts.csv", "motif_totals.csv"] + (["index.bin"] if args.cache else [])
    write_manifest(out, artifacts, "-", g.content_hash())
    return 0


def cmd_train(args):
    from .graphs import make_splits
    from .trainer import save_checkpoint, strip_timing, train

    g, X, labels = _load_dataset(args)
    if X is None or labels is None:
        raise UsageError("train requires --features and --labels")
    config = load_config(args.config, _train_overrides(args))
    catalog, schema = _select_catalog(args.catalog, g)
    split = make_splits(labels, args.train_ratio, args.val_ratio, seed=config.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model, report = train(g, X, labels, split, catalog, config)
    save_checkpoint(model, out / "checkpoint.bin", extra={"rng_states": report["rng_states"]})
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    with open(out / "report_stable.json", "w") as fh:
        json.dump(strip_timing(report), fh, indent=2, sort_keys=True)
    write_manifest(out, ["checkpoint.bin", "report.json", "report_stable.json"],
                   config_hash(config), g.content_hash())
    print(f"best_val_acc={report['best_val_acc']:.4f} test_acc={report['test_acc']:.4f}")
    return 0


def _train_overrides(args):
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.lr is not None:
        over["lr"] = args.lr
    if args.epochs is not None:
        over["max_epochs"] = args.epochs
    if args.arch is not None:
        over["gnn.arch"] = args.arch
    if args.base_only:
        over["regularize"] = False
    flat = {}
    for k, v in over.items():
        flat[k] = v
    return flat


def cmd_eval(args):
    from .evaluation import (
        accuracy,
        attribute_diversity_report,
        degree_report,
        label_fraction_report,
    )
    from .gnn import predict_classes
    from .graphs import make_splits
    from .trainer import load_checkpoint, predict

    g, X, labels = _load_dataset(args)
    if X is None or labels is None:
        raise UsageError("eval requires --features and --labels")
    model = load_checkpoint(_require(args.checkpoint, "checkpoint"), g)
    split = make_splits(labels, args.train_ratio, args.val_ratio,
                        seed=args.seed if args.seed is not None else model.config.seed)
    probs = predict(model, g, X)
    y = labels.as_array(g.n_nodes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    deg_rows = degree_report(g, probs, labels, split.test)
    lf_rows = label_fraction_report(g, split, probs, labels)
    div_rows = attribute_diversity_report(g, X, split, probs, labels)
    write_csv(out / "degree_report.csv", deg_rows, list(deg_rows[0].keys()))
    write_csv(out / "label_fraction_report.csv", lf_rows, list(lf_rows[0].keys()))
    write_csv(out / "attribute_diversity_report.csv", div_rows, list(div_rows[0].keys()))

    summary = {
        "test_acc": accuracy(predict_classes(probs), y, split.test),
        "val_acc": accuracy(predict_classes(probs), y, split.val),
        "degree": deg_rows,
        "label_fraction": lf_rows,
        "attribute_diversity": div_rows,
    }
    with open(out / "eval.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    write_manifest(
        out,
        ["degree_report.csv", "label_fraction_report.csv",
         "attribute_diversity_report.csv", "eval.json"],
        config_hash(model.config), g.content_hash(),
    )
    print(f"test_acc={summary['test_acc']:.4f}")
    return 0


def cmd_bench(args):
    from .evaluation import linear_fit_r2, runtime_bench
    from .bench import ba_problem, train_for_bench

    sizes = [int(s) for s in args.sizes.split(",")]
    rows = runtime_bench(
        sizes, args.m,
        make_problem=lambda n: ba_problem(n, args.m, seed=args.seed or 0),
        train_fn=train_for_bench(epochs=args.epochs, seed=args.seed or 0),
        epochs=args.epochs,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "bench.csv", rows, list(rows[0].keys()))
    r2 = linear_fit_r2([r["n"] for r in rows], [r["reg_overhead_s"] for r in rows])
    summary = {"rows": rows, "overhead_r2": r2}
    with open(out / "bench.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    write_manifest(out, ["bench.csv", "bench.json"], "-", "-")
    for r in rows:
        print(f"n={r['n']}: base {r['base_epoch_s']:.3f}s/epoch, overhead {r['reg_overhead_s']:.3f}s/epoch")
    print(f"overhead_vs_n_r2={r2:.4f}")
    return 0


def cmd_gradcheck(args):
    from .optim import run_gradient_checks

    results = run_gradient_checks(n_configs=args.configs, seed=args.seed or 0)
    failures = [(n, e) for n, e in results if e > 1.0]
    for name, err in results:
        status = "ok" if err <= 1.0 else "FAIL"
        print(f"{name}: worst violation {err:.3g} [{status}]")
    return 1 if failures else 0


def _cap_threads(n):
    # model math is sequential; the cap applies to BLAS worker pools
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be >= 1")
    import threadpoolctl

    threadpoolctl.threadpool_limits(limits=n)


def build_parser():
    p = argparse.ArgumentParser(prog="motifreg", description=__doc__)
    p.add_argument("--threads", type=int, help="cap numeric worker threads")
    sub = p.add_subparsers(dest="command", required=True)

    def add_dataset_flags(sp):
        sp.add_argument("--graph", required=True)
        sp.add_argument("--directed", action="store_true")
        sp.add_argument("--features")
        sp.add_argument("--labels")
        sp.add_argument("--node-types", dest="node_types")
        sp.add_argument("--out", required=True)

    mp = sub.add_parser("motifs", help="enumerate motif instances")
    mp.add_argument("action", choices=["enumerate"])
    add_dataset_flags(mp)
    mp.add_argument("--catalog", default="undirected")
    mp.add_argument("--cache", action="store_true", help="persist/reuse the index")
    mp.set_defaults(fn=cmd_motifs)

    tp = sub.add_parser("train", help="train a motif-regularized model")
    add_dataset_flags(tp)
    tp.add_argument("--catalog", default="undirected")
    tp.add_argument("--config", help="JSON config with flat dotted keys")
    tp.add_argument("--seed", type=int)
    tp.add_argument("--lr", type=float)
    tp.add_argument("--epochs", type=int)
    tp.add_argument("--arch", choices=["gcn", "gat"])
    tp.add_argument("--base-only", action="store_true", dest="base_only")
    tp.add_argument("--train-ratio", type=float, default=0.4)
    tp.add_argument("--val-ratio", type=float, default=0.1)
    tp.set_defaults(fn=cmd_train)

    ep = sub.add_parser("eval", help="evaluate a checkpoint and emit reports")
    add_dataset_flags(ep)
    ep.add_argument("--checkpoint", required=True)
    ep.add_argument("--seed", type=int)
    ep.add_argument("--train-ratio", type=float, default=0.4)
    ep.add_argument("--val-ratio", type=float, default=0.1)
    ep.set_defaults(fn=cmd_eval)

    bp = sub.add_parser("bench", help="runtime benchmark on synthetic graphs")
    bp.add_argument("--sizes", default="1000,2000,4000,8000")
    bp.add_argument("--m", type=int, default=3)
    bp.add_argument("--epochs", type=int, default=3)
    bp.add_argument("--seed", type=int)
    bp.add_argument("--out", required=True)
    bp.set_defaults(fn=cmd_bench)

    gp = sub.add_parser("gradcheck", help="finite-difference check of all ops")
    gp.add_argument("--configs", type=int, default=20)
    gp.add_argument("--seed", type=int)
    gp.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _cap_threads(args.threads)
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
