"""Command-line surface: each pipeline stage as a subcommand over files,
plus ``run`` for the fused pipeline driven by a manifest.

Exit codes: 0 success, 2 malformed input file, 3 matrix not translatable or
completable, 4 diverged training.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import chain, extraction, pose_net, robots
from . import topology as tp
from .completion import complete, is_unique_completion
from .correction import correct_partial, hamming, trellis_correct
from .errors import (
    NotATreeError,
    NotCompletableError,
    SchemaError,
    TrainingDivergedError,
)
from .pipeline import ExperimentManifest, load_manifest, run_pipeline, train_sensor

EXIT_SCHEMA = 2
EXIT_NOT_A_TREE = 3
EXIT_DIVERGED = 4


def _load_matrix(path) -> tp.DependencyMatrix:
    try:
        with open(path) as f:
            return tp.DependencyMatrix.from_json_dict(json.load(f))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def cmd_generate(args) -> int:
    spec = robots.builtin_robot(args.robot, sensors_per_link=args.sensors_per_link)
    chain.save_robot(spec, args.out)
    print(f"wrote {args.out}: {args.robot} with {len(spec.sensor_ids)} sensors")
    return 0


def cmd_simulate(args) -> int:
    spec = chain.load_robot(args.spec)
    samples = chain.gen_trajectory(
        spec,
        mode=args.trajectory_mode,
        duration=args.duration,
        rate=args.rate,
        seed=args.seed,
    )
    if args.sigma_alpha or args.sigma_beta:
        samples = chain.add_noise(samples, args.sigma_alpha, args.sigma_beta, args.seed)
    chain.save_trajectory(samples, spec, args.out)
    print(f"wrote {args.out}: {len(samples)} samples at {args.rate} Hz")
    return 0


def cmd_train(args) -> int:
    spec = chain.load_robot(args.spec)
    samples, _ = chain.load_trajectory(args.traj)
    manifest = ExperimentManifest(
        seed=args.seed,
        rate=args.rate,
        gravity=args.gravity == "on",
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        hidden_width=args.width,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sensors = [args.sensor] if args.sensor else list(spec.sensor_ids)
    for sid in sensors:
        result = train_sensor(spec, samples, sid, manifest)
        path = out_dir / f"{sid.replace(':', '_')}.json"
        pose_net.save_net(result.net, path)
        print(f"{sid}: final loss {result.final_loss:.4f} -> {path}")
    return 0


def cmd_extract(args) -> int:
    spec = chain.load_robot(args.spec)
    rng = np.random.default_rng(args.seed)
    if args.nets_dir:
        if not args.traj:
            raise SchemaError("--nets-dir requires --traj to sample configurations")
        samples, _ = chain.load_trajectory(args.traj)
        idx = rng.choice(
            len(samples), size=min(args.theta_samples, len(samples)), replace=False
        )
        thetas = [samples[i].theta for i in sorted(idx)]
        jac_fns = {}
        for sid in spec.sensor_ids:
            net = pose_net.load_net(
                Path(args.nets_dir) / f"{sid.replace(':', '_')}.json"
            )
            jac_fns[sid] = lambda th, net=net: pose_net.pose_jacobian(net, th)
    else:
        thetas = [
            rng.uniform(-np.pi, np.pi, spec.n_joints)
            for _ in range(args.theta_samples)
        ]
        jac_fns = {
            sid: (lambda th, s=sid: chain.analytic_jacobian(spec, th, s))
            for sid in spec.sensor_ids
        }
    features, labels = [], []
    for sid, jac_fn in sorted(jac_fns.items()):
        dprime = extraction.feature_raw(
            extraction.tij_aggregate(jac_fn, thetas, method=args.aggregate)
        )
        features.append(extraction.threshold(dprime, args.delta))
        labels.append(sid)
    matrix = extraction.build_matrix(features, labels, spec.joint_order)
    _write_json(args.out, matrix.to_json_dict())
    print(f"wrote {args.out}: {matrix.shape[0]}x{matrix.shape[1]} at delta={args.delta}")
    return 0


def cmd_to_tree(args) -> int:
    matrix = _load_matrix(args.matrix)
    tree = tp.matrix_to_tree(matrix)
    if args.out_json:
        _write_json(args.out_json, tree.to_json_dict())
    if args.out_dot:
        Path(args.out_dot).write_text(tree.to_dot())
    print(tree.to_dot())
    return 0


def cmd_complete(args) -> int:
    matrix = _load_matrix(args.matrix)
    labels = args.labels.split(",") if args.labels else [
        f"u{i + 1}" for i in range(matrix.shape[1] - matrix.shape[0])
    ]
    unique = is_unique_completion(matrix)
    full = complete(matrix, labels, seed=args.seed)
    _write_json(args.out, full.to_json_dict())
    print(f"wrote {args.out} (unique filling: {unique})")
    return 0


def cmd_correct(args) -> int:
    matrix = _load_matrix(args.matrix)
    k, n = matrix.shape
    result = correct_partial(matrix) if k < n else trellis_correct(matrix)
    _write_json(args.out, result.to_json_dict())
    print(
        f"wrote {args.out}: {len(result.candidates)} candidate(s) "
        f"at distance {result.distance}"
    )
    return 0


def cmd_compare(args) -> int:
    a = _load_matrix(args.matrix_a)
    b = _load_matrix(args.matrix_b)
    try:
        dist = hamming(a, b)
    except ValueError as exc:
        print(f"not comparable: {exc}")
        return EXIT_SCHEMA
    match = a == b
    print(f"hamming: {dist}")
    print(f"exact match: {match}")
    return 0


def cmd_run(args) -> int:
    if args.manifest:
        manifest = load_manifest(args.manifest)
    else:
        manifest = ExperimentManifest()
    if args.robot:
        manifest.robot = args.robot
    if args.mode:
        manifest.mode = args.mode
    if args.seed is not None:
        manifest.seed = args.seed
    if args.out:
        manifest.out_dir = args.out
    if args.workers is not None:
        manifest.workers = args.workers
    if args.delta is not None:
        manifest.delta = args.delta
    if args.gravity:
        manifest.gravity = args.gravity == "on"
    report = run_pipeline(manifest)
    print(json.dumps(
        {
            "robot": manifest.robot,
            "mode": manifest.mode,
            "delta_used": report.delta_used,
            "exact_match": report.exact_match,
            "structure_match": report.structure_match,
            "hamming_to_truth": report.hamming_to_truth,
            "cluster_purity": report.cluster_purity,
            "completed": report.completed,
            "corrected": report.corrected,
            "timings": {k: round(v, 2) for k, v in report.timings.items()},
        },
        indent=1,
    ))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bodyschema",
        description="Recover an open-chain robot's body topology from "
        "on-body inertial sensing and joint encoders",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a built-in robot spec")
    p.add_argument("--robot", default="robot1", choices=robots.BUILTIN_NAMES)
    p.add_argument("--sensors-per-link", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="sample a trajectory with measurements")
    p.add_argument("--spec", required=True)
    p.add_argument("--trajectory-mode", default="sinusoidal",
                   choices=("sinusoidal", "smooth_random"))
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-alpha", type=float, default=0.0)
    p.add_argument("--sigma-beta", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train per-sensor pose nets")
    p.add_argument("--spec", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--sensor", help="train a single sensor (default: all)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--gravity", choices=("on", "off"), default="on")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="extract a dependency matrix")
    p.add_argument("--spec", required=True)
    p.add_argument("--traj", help="required with --nets-dir")
    p.add_argument("--nets-dir", help="trained nets; omit to use the analytic oracle")
    p.add_argument("--theta-samples", type=int, default=64)
    p.add_argument("--aggregate", default="rms",
                   choices=("rms", "variance", "mean", "second_moment"))
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("to-tree", help="translate a matrix file to a tree")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out-json")
    p.add_argument("--out-dot")
    p.set_defaults(func=cmd_to_tree)

    p = sub.add_parser("complete", help="fill a partial matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", help="comma-separated fresh row labels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("correct", help="repair a contradictory matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("compare", help="compare two matrix files")
    p.add_argument("matrix_a")
    p.add_argument("matrix_b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("run", help="fused pipeline from a manifest")
    p.add_argument("--manifest")
    p.add_argument("--robot")
    p.add_argument("--mode", choices=("learned", "oracle-fk"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--gravity", choices=("on", "off"))
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (NotATreeError, NotCompletableError) as exc:
        report = getattr(exc, "report", None)
        detail = f" (failed conditions: {report.failed()})" if report else ""
        print(f"invalid topology: {exc}{detail}", file=sys.stderr)
        return EXIT_NOT_A_TREE
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
