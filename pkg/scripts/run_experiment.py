#!/usr/bin/env python3
"""Run the full recovery pipeline on one robot and print the report.

Examples:
    python scripts/run_experiment.py --robot robot1 --mode oracle-fk
    python scripts/run_experiment.py --robot robot3 --mode learned --out results/r3
    python scripts/run_experiment.py --manifest my_manifest.json
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from bodyschema.pipeline import ExperimentManifest, load_manifest, run_pipeline


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--manifest", help="manifest JSON; flags below override it")
    parser.add_argument("--robot", default=None)
    parser.add_argument("--mode", choices=("oracle-fk", "learned"), default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--duration", type=float, default=None)
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--gravity", choices=("on", "off"), default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    manifest = load_manifest(args.manifest) if args.manifest else ExperimentManifest()
    for field in ("robot", "mode", "seed", "duration", "delta"):
        value = getattr(args, field)
        if value is not None:
            setattr(manifest, field, value)
    if args.gravity is not None:
        manifest.gravity = args.gravity == "on"
    if args.out is not None:
        manifest.out_dir = args.out

    report = run_pipeline(manifest)
    print(json.dumps(report.to_json_dict(), indent=1))
    return 0 if report.exact_match else 1


if __name__ == "__main__":
    sys.exit(main())
