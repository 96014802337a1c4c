"""Run every study for one or more configs and print the summaries.

    python3 scripts/run_studies.py configs/gaussian.json configs/clusters.json
"""
import argparse
import sys
import time

from sca.config import ExperimentConfig
from sca.errors import SCAError
from sca.experiments import STUDIES, run_study


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("configs", nargs="+")
    p.add_argument("--study", action="append", choices=STUDIES,
                   help="restrict to these studies (repeatable)")
    p.add_argument("--seed", type=int)
    args = p.parse_args(argv)

    status = 0
    for path in args.configs:
        cfg = ExperimentConfig.load(path, args.seed)
        for name in args.study or STUDIES:
            if name == "clustering-leakage" and cfg.data.kind != "clusters":
                continue
            start = time.perf_counter()
            try:
                out, summary = run_study(name, cfg)
            except SCAError as exc:
                print(f"{path} {name}: {exc}", file=sys.stderr)
                status = 1
                continue
            print(f"{path} {name}: {summary} ({time.perf_counter() - start:.1f}s) -> {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
