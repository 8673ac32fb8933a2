"""Per-instance mean latency of Greedy-SP against its static tree on 40-node graphs.

Prints path length, both means and the relative reduction for each instance.
"""

import argparse

import numpy as np

from epdist import bench
from epdist.policies import PolicyConfig, build_policy
from epdist.simulator import run_episode


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--episodes", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--adaptive", default="greedy-sp")
    ap.add_argument("--static", default="static-tree")
    args = ap.parse_args()
    spec = bench.ExperimentSpec(param="nodes", values=[40], policies=[args.adaptive, args.static],
                                reps=args.instances, episodes=args.episodes, master_seed=args.seed)
    print(f"{'inst':>4} {'hops':>4} {args.adaptive:>12} {args.static:>18} {'reduction':>9}")
    for rep in range(spec.reps):
        inst = bench.make_instance(spec, 0, rep)
        means, hops = [], 0
        for kind in spec.policies:
            policy = build_policy(inst.net, PolicyConfig(kind), inst.s, inst.d)
            hops = len(policy.paths[0]) - 1
            lat = [run_episode(inst.net, policy, inst.s, inst.d, bench.episode_seed(spec, 0, rep, e)).latency
                   for e in range(spec.episodes)]
            means.append(float(np.nanmean(lat)))
        red = bench.reduction(means[1], means[0])
        shown = "n/a" if red is None else f"{100 * red:.1f}%"
        print(f"{rep:>4} {hops:>4} {means[0] * 1e3:>10.3f}ms {means[1] * 1e3:>16.3f}ms {shown:>9}")


if __name__ == "__main__":
    main()
