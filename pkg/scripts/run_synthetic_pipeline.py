"""Full synthetic run through the command line: power, calibrate, monitor, evaluate.

Writes the generated CSVs and every command output into ``--out`` and prints
the per-kind confusion table.

    python3 scripts/run_synthetic_pipeline.py --out runs/synthetic --dim 5
"""

import argparse
from pathlib import Path

import numpy as np

from scopemon import cli
from scopemon.features import FeatureMatrix, write_csv
from scopemon.synthetic import gaussian, labelled_mix, ramp_stream


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/synthetic")
    parser.add_argument("--dim", type=int, default=5)
    parser.add_argument("--shift", type=float, default=3.0)
    parser.add_argument("--windows", type=int, default=41, help="ramp stream length in windows")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    d = args.dim
    write_csv(out / "train.csv", FeatureMatrix(gaussian(rng, 1000, d)))
    write_csv(out / "ood.csv", FeatureMatrix(gaussian(rng, 1000, d, args.shift)))
    write_csv(out / "cal.csv", labelled_mix(rng, 1000, 1000, d, args.shift))
    write_csv(out / "stream.csv", ramp_stream(rng, args.windows, 50, d, args.shift))

    seed = str(args.seed)
    steps = [
        ["power", str(out / "train.csv"), str(out / "ood.csv"), "--seed", seed,
         "--out", str(out / "power.json"), "--csv", str(out / "power.csv")],
        ["calibrate", str(out / "cal.csv"), str(out / "train.csv"), "--seed", seed,
         "--out", str(out / "model.json"), "--points-dir", str(out / "points")],
        ["monitor", str(out / "stream.csv"), str(out / "model.json"),
         "--out", str(out / "reports.jsonl"), "--truth-out", str(out / "truth.csv")],
        ["evaluate", str(out / "reports.jsonl"), str(out / "truth.csv"), "--sweep",
         "--out", str(out / "confusion.csv"), "--sweep-out", str(out / "sweep.csv")],
    ]
    for argv in steps:
        print(f"$ scopemon {' '.join(argv)}")
        code = cli.main(argv)
        if code not in (0, 2):
            raise SystemExit(code)
    print((out / "confusion.csv").read_text(), end="")


if __name__ == "__main__":
    main()
