#!/usr/bin/env python3
"""Sensitivity of held-out V2S rank-1 to the balancing weights lambda1 and lambda2."""
import argparse
import itertools
import warnings

from cerml.experiments import FixtureConfig, recognition_report


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--model-type", choices=["subspace", "affine", "spd"], default="affine")
    p.add_argument("--lambda1", type=float, nargs="+", default=[0.0, 0.001, 0.01, 0.1, 1.0])
    p.add_argument("--lambda2", type=float, nargs="+", default=[0.01, 0.1, 1.0])
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    fx = FixtureConfig(seed=a.seed)
    print(f"{'lambda1':>8} {'lambda2':>8} {'v2s':>6} {'v2v':>6}")
    for l1, l2 in itertools.product(a.lambda1, a.lambda2):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = recognition_report(fx, [a.model_type], lambda1=l1, lambda2=l2)
        print(f"{l1:8g} {l2:8g} {r[a.model_type + '_v2s']:6.2f} {r[a.model_type + '_v2v']:6.2f}")


if __name__ == "__main__":
    main()
