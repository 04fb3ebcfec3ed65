"""Compare the compiled and pure-Python obstruction-loss kernels.

    python3 benchmarks/bench_kernels.py --grid 128 --obstructions 50
"""

import argparse
import statistics
import time

import numpy as np

from loraplan import kernels
from loraplan.planner import _node_array, obstruction_losses, plan_site
from loraplan.site import site_from_dict


def synthetic_site(n_grid, n_obs, seed=0, cell=10.0):
    rng = np.random.default_rng(seed)
    extent = n_grid * cell
    obstructions = []
    for k in range(n_obs):
        cx, cy = rng.uniform(0.05 * extent, 0.95 * extent, 2)
        n = int(rng.integers(4, 9))
        ang = (np.arange(n) + rng.uniform(0, 0.5, n)) * (2 * np.pi / n)
        rad = rng.uniform(0.005, 0.03, n) * extent
        fp = [{"x": float(cx + r * np.cos(a)), "y": float(cy + r * np.sin(a))} for a, r in zip(ang, rad)]
        if k % 5 == 4:
            obstructions.append({"id": f"v{k}", "kind": "vegetation", "footprint": fp, "height_m": 12.0})
        else:
            obstructions.append({"id": f"b{k}", "kind": "building", "footprint": fp,
                                 "height_m": float(rng.uniform(6, 40)), "material": "concrete",
                                 "floor_count": int(rng.integers(0, 8))})
    return site_from_dict({
        "grid": {"cell_size_m": cell, "nx": n_grid, "ny": n_grid},
        "config": {"environment": "urban"},
        "gateways": [{"id": "gw-a", "position": {"x": 0.3 * extent, "y": 0.3 * extent, "z": 30}},
                     {"id": "gw-b", "position": {"x": 0.7 * extent, "y": 0.7 * extent, "z": 25}}],
        "obstructions": obstructions,
    })


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=128, help="cells per side")
    ap.add_argument("--obstructions", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    site = synthetic_site(args.grid, args.obstructions)
    _, _, nodes = _node_array(site.grid)
    gw = site.gateways[0].position
    print(f"{len(nodes)} links x {args.obstructions} obstructions, workers={args.workers}")

    results, best_times = {}, {}
    for name in sorted(kernels.BACKENDS):
        best, median = best_of(lambda: obstruction_losses(nodes, gw, site, args.workers, name), args.repeat)
        results[name] = obstruction_losses(nodes, gw, site, args.workers, name)
        best_times[name] = best
        print(f"  kernel {name:7s} best {best * 1000:9.1f} ms  median {median * 1000:9.1f} ms  "
              f"{len(nodes) / best:12.0f} links/s")

    if "cython" in results:
        diff = float(np.max(np.abs(results["cython"] - results["python"])))
        print(f"  speedup {best_times['python'] / best_times['cython']:.1f}x, "
              f"max |cython - python| = {diff:.1e} dB")
        best, _ = best_of(lambda: plan_site(site, workers=args.workers), args.repeat)
        print(f"  full plan_site ({len(site.gateways)} gateways, cython): {best:.3f} s")
    else:
        print("  compiled kernel not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
