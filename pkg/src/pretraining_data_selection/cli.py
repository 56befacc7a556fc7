"""
Command line front end: centroids -> cluster -> select -> recall for data selection, and simulate for the SGD
theory checks. Every command that writes a file also writes <out>.manifest.json beside it.

Exit codes are 0 on success, 2 for usage and validation errors and 3 for numerical failures.
"""
import argparse
import logging
import sys
from contextlib import ExitStack
from importlib import resources

from pretraining_data_selection import (
    __version__,
    clustering,
    defaults,
    feature_store,
    manifest,
    ot_core,
    selection,
    theory_sim,
)
from pretraining_data_selection.custom_errors import NumericalError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _class_list(text):
    try:
        return [int(token) for token in text.split(",") if token.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} not a comma separated list of integers".format(text))


def cmd_centroids(args):
    features = feature_store.load_features(args.features, args.format)
    labels = feature_store.load_labels(args.labels)
    centroids = feature_store.compute_centroids(features, labels)
    feature_store.save_centroids(centroids, args.out)
    manifest.write_manifest(
        manifest.build_manifest(
            "centroids",
            {"format": args.format},
            {"features": args.features, "labels": args.labels},
            results={"K": centroids.K, "dims": centroids.dims},
        ),
        args.out,
    )
    logger.info("wrote %d centroids of dimension %d", centroids.K, centroids.dims)
    return EXIT_OK


def cmd_cluster(args):
    features = feature_store.load_features(args.features, args.format)
    cfg = clustering.KMeansConfig(
        n_clusters=args.k,
        max_iters=args.max_iters,
        seed=args.seed,
        n_init=args.n_init,
        min_cluster_size=args.min_cluster_size,
    )
    labels, report = clustering.run_spherical_kmeans(features, cfg)
    feature_store.save_labels(labels, args.out)
    manifest.write_manifest(
        manifest.build_manifest(
            "cluster",
            {
                "format": args.format,
                "k": args.k,
                "max_iters": args.max_iters,
                "n_init": args.n_init,
                "min_cluster_size": args.min_cluster_size,
            },
            {"features": args.features},
            seed=args.seed,
            results=report.to_dict(),
        ),
        args.out,
    )
    logger.info("clustered %d rows into %d clusters, inertia %.6f", features.rows, args.k, report.inertia)
    return EXIT_OK


def cmd_select(args):
    pre = feature_store.load_centroids(args.pre)
    inputs = {"pre": args.pre}
    parameters = {"method": args.method, "k": args.k}
    seed = None
    if args.method in ("uot", "greedy_ot"):
        if args.target is None:
            raise ValueError("--target is required for method {}".format(args.method))
        target = feature_store.load_centroids(args.target)
        inputs["target"] = args.target
    if args.method == "uot":
        metric = args.metric or defaults.uot_metric
        params = ot_core.UotParams(
            epsilon=args.epsilon,
            tau1=args.tau1,
            tau2=args.tau2,
            max_iters=args.max_iters,
            tol=args.tol,
        )
        result = selection.select_uot(pre, target, params, metric, args.epsilon_c, args.k)
        parameters.update(
            {
                "metric": metric,
                "epsilon": args.epsilon,
                "tau1": args.tau1,
                "tau2": args.tau2,
                "epsilon_c": args.epsilon_c,
                "max_iters": args.max_iters,
                "tol": args.tol,
            }
        )
        if not result.transport_plan.converged:
            logger.warning("transport plan did not converge, ranking the last iterate")
    elif args.method == "greedy_ot":
        metric = args.metric or defaults.greedy_ot_metric
        result = selection.select_greedy_ot(pre, target, metric, args.k, args.gamma)
        parameters.update({"metric": metric, "gamma": result.parameters["gamma"]})
    elif args.method == "random":
        seed = args.seed
        result = selection.select_random(pre.K, args.k, args.seed)
    else:
        if args.classes is None:
            raise ValueError("--classes is required for method label")
        result = selection.select_by_label(args.classes, pre.K)
        parameters["classes"] = list(args.classes)

    selection.save_selection(result, args.out)
    results = {"selected": list(result.selected)}
    if result.transport_plan is not None:
        results["converged"] = result.transport_plan.converged
        results["iterations"] = result.transport_plan.iterations_used
        results["objective"] = result.transport_plan.objective
    manifest.write_manifest(
        manifest.build_manifest("select", parameters, inputs, seed=seed, results=results),
        args.out,
    )
    logger.info("selected %d of %d classes by %s", len(result.selected), pre.K, args.method)
    return EXIT_OK


def cmd_recall(args):
    result = selection.load_selection(args.selection)
    relevant = selection.load_relevant(args.relevant)
    spec = selection.RecallSpec(relevant=relevant, top_k=args.top_k)
    recall = selection.recall_rate(result, spec)
    print("recall={:.4f} top_k={} relevant={}".format(recall, spec.top_k, len(spec.relevant)))
    return EXIT_OK


def cmd_simulate(args):
    with ExitStack() as stack:
        if args.config is None:
            config_path = stack.enter_context(
                resources.as_file(
                    resources.files("pretraining_data_selection") / "data" / "default_sweep.cfg"
                )
            )
        else:
            config_path = args.config
        config = theory_sim.load_sweep_config(config_path)
        inputs = {"config": config_path}
        results = theory_sim.run_sweep(config)
        theory_sim.save_sweep_results(results, args.out)
        summary = theory_sim.summarise_sweep(results)
        applicable = summary[summary["BOUND"].notna()]
        within = int(applicable["WITHIN_BOUND"].sum())
        manifest.write_manifest(
            manifest.build_manifest(
                "simulate",
                config,
                inputs,
                results={
                    "points": len(summary),
                    "points_with_bound": len(applicable),
                    "within_bound": within,
                },
            ),
            args.out,
        )
    print(
        "points={} runs={} within_bound={}/{}".format(
            len(summary), len(results), within, len(applicable)
        )
    )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pretraining-data-selection",
        description="Select pre-training classes similar to a target dataset and check fine-tuning theory by simulation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("centroids", help="mean feature vector of every class")
    p.add_argument("--features", required=True)
    p.add_argument("--format", choices=defaults.feature_formats, default="binary")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_centroids)

    p = subparsers.add_parser("cluster", help="spherical k-means labels for unlabeled features")
    p.add_argument("--features", required=True)
    p.add_argument("--format", choices=defaults.feature_formats, default="binary")
    p.add_argument("--k", type=int, default=defaults.cluster_count)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-init", type=int, default=defaults.kmeans_n_init)
    p.add_argument("--max-iters", type=int, default=defaults.kmeans_max_iters)
    p.add_argument("--min-cluster-size", type=int, default=defaults.kmeans_min_cluster_size)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = subparsers.add_parser("select", help="rank and select pre-training classes")
    p.add_argument("--method", choices=defaults.selection_methods, required=True)
    p.add_argument("--pre", required=True, help="pre-training centroid file")
    p.add_argument("--target", help="target centroid file")
    p.add_argument("--k", type=int, default=defaults.classes_to_select)
    p.add_argument("--epsilon", type=float, default=defaults.epsilon)
    p.add_argument("--tau1", type=float, default=defaults.tau1)
    p.add_argument("--tau2", type=float, default=defaults.tau2)
    p.add_argument("--epsilon-c", type=float, default=defaults.epsilon_c)
    p.add_argument("--metric", choices=defaults.metrics, default=None)
    p.add_argument("--max-iters", type=int, default=defaults.sinkhorn_max_iters)
    p.add_argument("--tol", type=float, default=defaults.sinkhorn_tol)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=_class_list, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = subparsers.add_parser("recall", help="recall of a selection against relevant classes")
    p.add_argument("--selection", required=True)
    p.add_argument("--relevant", required=True)
    p.add_argument("--top-k", type=int, default=defaults.classes_to_select)
    p.set_defaults(func=cmd_recall)

    p = subparsers.add_parser("simulate", help="SGD fine-tuning sweep against the excess risk bounds")
    p.add_argument("--config", default=None, help="sweep config, defaults to the bundled sweep")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        logger.error("%s", e)
        return EXIT_INVALID
    except NumericalError as e:
        logger.error("%s", e)
        return EXIT_NUMERICAL


def run():
    sys.exit(main())
