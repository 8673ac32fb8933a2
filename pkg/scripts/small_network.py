"""Delivered fraction and latency on the 5-node chain with tau = 150 us, swept over gp."""

from epdist import bench


def main() -> None:
    spec = bench.preset("small")
    print(f"{'gp':>5} {'policy':<12} {'delivered':>9} {'mean_us':>9}")
    for r in bench.run_sweep(spec):
        print(f"{r.param_value:>5} {r.policy:<12} {r.delivered / r.episodes:>9.3f} {r.mean * 1e6:>9.1f}")


if __name__ == "__main__":
    main()
