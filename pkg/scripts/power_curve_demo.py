"""Power curves for a few mean shifts, to see how the chosen window size moves.

    python3 scripts/power_curve_demo.py --kind KS --shifts 0.25,0.5,1,3
"""

import argparse

import numpy as np

from scopemon.resampling import POWER_KINDS, power_analysis


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--kind", default="KS", choices=[k.value for k in POWER_KINDS])
    parser.add_argument("--shifts", default="0.25,0.5,1,3")
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--sizes", default="10:200:10")
    parser.add_argument("--alpha", type=float, default=0.1)
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    start, stop, step = (int(v) for v in args.sizes.split(":"))
    sizes = list(range(start, stop + 1, step))
    rng = np.random.default_rng(args.seed)
    ref = rng.normal(size=(500, args.dim))
    in_scope = rng.normal(size=(1000, args.dim))
    print("shift," + ",".join(str(s) for s in sizes) + ",n_star")
    for shift in (float(v) for v in args.shifts.split(",")):
        out_scope = rng.normal(shift, 1.0, size=(1000, args.dim))
        curve = power_analysis(in_scope, out_scope, ref, sizes, args.kind, args.alpha,
                               args.trials, seed=args.seed)
        cells = ",".join(f"{p:.2f}" for p in curve.power)
        print(f"{shift},{cells},{curve.n_star if curve.n_star is not None else 'none'}")


if __name__ == "__main__":
    main()
