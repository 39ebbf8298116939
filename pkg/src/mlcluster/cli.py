"""``mlcluster`` command line: synth, pipeline, predict, evaluate.

Exit codes: 0 success, 1 numerical/runtime failure, 2 usage or validation error.
Logs go to stderr; results go to files or stdout.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .aggregate import METHODS, AggregationConfig, save_matrix_csv
from .cluster import DEFAULT_RESTARTS, classify, save_centers_csv, save_partition_csv
from .data import SyntheticSpec, generate_synthetic, load_bundle_dir, read_features, read_labels, save_bundle
from .embed import TrainConfig, load_model, save_model
from .errors import NumericalError
from .metrics import metrics_report
from .pipeline import DEFAULT_HIDDEN, feature_knn_graph, run_generalization, run_pipeline

logger = logging.getLogger("mlcluster")

# --config keys and their defaults; flags that are left unset fall back to these
PIPELINE_DEFAULTS = {
    "k": None,
    "method": "geometric",
    "beta": 1.0,
    "agg_iterations": 1,
    "agg_tol": 1e-8,
    "epsilon": None,
    "literal_update": False,
    "lr": 1e-3,
    "max_steps": 2000,
    "plateau_tol": 1e-7,
    "hidden": list(DEFAULT_HIDDEN),
    "seed": 0,
    "restarts": DEFAULT_RESTARTS,
    "train_fraction": 1.0,
    "repeats": 1,
    "clusterer": "network",
    "graph": "layers",
    "knn_k": 20,
}


class UsageError(ValueError):
    pass


def dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _hidden(text):
    if text.strip() == "":
        return []
    try:
        sizes = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in sizes):
        raise argparse.ArgumentTypeError("hidden layer sizes must be positive")
    return sizes


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mlcluster", description="Multilayer graph clustering via SPD aggregation and an orthogonal embedding network."
    )
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    # also accepted after the subcommand; SUPPRESS keeps a top-level --quiet intact
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="only log warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic Gaussian-mixture multilayer dataset")
    p.add_argument("--n", type=int, default=100, help="number of nodes N (default 100)")
    p.add_argument("--k", type=int, default=4, help="number of clusters K (default 4)")
    p.add_argument("--s", type=int, default=3, help="number of layers S (default 3)")
    p.add_argument("--d", type=int, default=2, help="dimension per layer d (default 2)")
    p.add_argument("--knn-k", type=int, default=20, help="neighbours per node in each layer (default 20)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--sigma", type=float, default=1.0, help="within-cluster standard deviation (default 1)")
    p.add_argument("--separation", type=float, default=4.0,
                   help="distance between neighbouring means in units of sigma (default 4)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("pipeline", parents=[common], help="aggregate, embed, cluster and score a dataset directory")
    p.add_argument("dataset", help="directory written by 'synth' (or with the same layout)")
    p.add_argument("--config", help="JSON file of settings; explicit flags override it")
    p.add_argument("--k", type=int, help="number of clusters (default: k_true from the manifest)")
    p.add_argument("--method", choices=METHODS, help="layer aggregation (default geometric)")
    p.add_argument("--beta", type=float, help="Karcher flow step size (default 1)")
    p.add_argument("--agg-iterations", type=int, help="Karcher flow iterations (default 1)")
    p.add_argument("--agg-tol", type=float, help="relative change that stops the flow early (default 1e-8)")
    p.add_argument("--epsilon", type=float, help="Laplacian shift (default 1e-6 x mean degree, per layer)")
    p.add_argument("--literal-update", action="store_true", default=None,
                   help="sum the layer logarithms without dividing by S")
    p.add_argument("--lr", type=float, help="AMSGrad learning rate (default 1e-3)")
    p.add_argument("--max-steps", type=int, help="training step cap (default 2000)")
    p.add_argument("--plateau-tol", type=float, help="relative loss change over 50 steps that stops training (default 1e-7)")
    p.add_argument("--hidden", type=_hidden, help="hidden layer sizes, comma-separated (default 400,200,100)")
    p.add_argument("--seed", type=int, help="seed for initialization, K-means and subsets (default 0)")
    p.add_argument("--restarts", type=int, help="K-means restarts (default 10)")
    p.add_argument("--train-fraction", type=float, help="fraction of nodes used for training (default 1)")
    p.add_argument("--repeats", type=int, help="number of random training subsets (default 1)")
    p.add_argument("--clusterer", choices=("network", "spectral"), help="embedding network or spectral baseline")
    p.add_argument("--graph", choices=("layers", "features-knn"),
                   help="use the dataset layers or a single k-NN layer on the features")
    p.add_argument("--knn-k", type=int, help="neighbours for --graph features-knn (default 20)")
    p.add_argument("--export-aggregate", action="store_true", help="also write the aggregated matrix as CSV")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("predict", parents=[common], help="assign clusters to new feature rows")
    p.add_argument("--model", required=True, help="model JSON written by 'pipeline'")
    p.add_argument("--centers", required=True, help="centers CSV written by 'pipeline'")
    p.add_argument("--features", required=True, help="feature CSV, one row per item")
    p.add_argument("--header", action="store_true", help="feature CSV has a header line")
    p.add_argument("--out", help="assignment CSV (default stdout)")

    p = sub.add_parser("evaluate", parents=[common], help="score predicted against true labels")
    p.add_argument("pred", help="predicted labels CSV")
    p.add_argument("truth", help="true labels CSV")
    p.add_argument("--out", help="metrics JSON (default stdout)")
    return parser


def cmd_synth(args):
    spec = SyntheticSpec(
        n_points=args.n, n_clusters=args.k, n_layers=args.s, dim_per_layer=args.d,
        knn_k=args.knn_k, seed=args.seed, sigma=args.sigma, separation=args.separation,
    )
    bundle = generate_synthetic(spec)
    save_bundle(bundle, args.out)
    with open(os.path.join(args.out, "manifest.json"), encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    return 0


def resolve_settings(args):
    """Defaults, then the --config file, then explicit flags."""
    settings = dict(PIPELINE_DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("--config must hold a JSON object")
        unknown = sorted(set(cfg) - set(settings))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        settings.update(cfg)
    for key in PIPELINE_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if not 0 < settings["train_fraction"] <= 1:
        raise UsageError(f"train fraction must be in (0, 1], got {settings['train_fraction']}")
    if settings["repeats"] < 1:
        raise UsageError("repeats must be >= 1")
    if settings["restarts"] < 1:
        raise UsageError("restarts must be >= 1")
    return settings


def cmd_pipeline(args):
    st = resolve_settings(args)
    bundle = load_bundle_dir(args.dataset)
    k = st["k"] if st["k"] is not None else bundle.k_true
    if k is None or k < 1:
        raise UsageError("--k is required when the dataset has no labels")
    agg_cfg = AggregationConfig(
        epsilon=st["epsilon"], beta=st["beta"], max_iterations=st["agg_iterations"],
        convergence_tol=st["agg_tol"], normalize=not st["literal_update"],
    )
    train_cfg = TrainConfig(
        learning_rate=st["lr"], max_steps=st["max_steps"], loss_plateau_tol=st["plateau_tol"], seed=st["seed"]
    )
    graph = feature_knn_graph(bundle.features, st["knn_k"]) if st["graph"] == "features-knn" else None
    common = dict(
        method=st["method"], agg_cfg=agg_cfg, train_cfg=train_cfg, hidden=tuple(st["hidden"]),
        restarts=st["restarts"], clusterer=st["clusterer"],
    )
    os.makedirs(args.out, exist_ok=True)

    if st["train_fraction"] < 1 or st["repeats"] > 1:
        if st["clusterer"] != "network":
            raise UsageError("subset training needs --clusterer network")
        if graph is not None:
            raise UsageError("subset training uses the dataset layers")
        summary, _ = run_generalization(bundle, k, st["train_fraction"], st["repeats"], seed=st["seed"], **common)
        dump_json(summary, os.path.join(args.out, "generalization.json"))

    result = run_pipeline(bundle, k, seed=st["seed"], graph=graph, **common)
    save_partition_csv(result.partition.assignments, os.path.join(args.out, "assignments.csv"))
    save_centers_csv(result.partition.centers, os.path.join(args.out, "centers.csv"))
    if result.model is not None:
        save_model(result.model, result.cholesky_factor, os.path.join(args.out, "model.json"))
    if args.export_aggregate:
        save_matrix_csv(result.aggregated.array, os.path.join(args.out, "aggregate.csv"))
    report = {"k": k, "settings": st, "metrics": result.metrics}
    if result.embedding is not None:
        report["training"] = {"steps": result.embedding.steps, "final_loss": result.embedding.final_loss}
    dump_json(report, os.path.join(args.out, "metrics.json"))
    if result.metrics is not None:
        logger.info("purity %.4f  nmi %.4f  ari %.4f", result.metrics["purity"], result.metrics["nmi"],
                    result.metrics["ari"])
    return 0


def cmd_predict(args):
    model, R = load_model(args.model)
    centers = np.loadtxt(args.centers, delimiter=",", ndmin=2)
    X = read_features(args.features, header=args.header)
    if X.size == 0:
        ids = np.zeros(0, dtype=np.int64)
    else:
        ids = classify(model, R, centers, X)
    if args.out:
        save_partition_csv(ids, args.out)
    else:
        sys.stdout.write("node_index,cluster_id\n")
        for i, c in enumerate(ids):
            sys.stdout.write(f"{i},{int(c)}\n")
    return 0


def cmd_evaluate(args):
    report = metrics_report(read_labels(args.pred), read_labels(args.truth))
    dump_json(report, args.out)
    return 0


COMMANDS = {"synth": cmd_synth, "pipeline": cmd_pipeline, "predict": cmd_predict, "evaluate": cmd_evaluate}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        # ValueError covers FormatError, UsageError and json.JSONDecodeError
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
