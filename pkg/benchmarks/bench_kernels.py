"""Compare the pure-Python and compiled kernels.

Times graph construction and a fixed number of epidemic ticks on the same
synthetic city for every importable backend, checks that both produce the
same edges and trajectories, and prints a small table.

    python3 benchmarks/bench_kernels.py --nodes 20000 --steps 500
"""

import argparse
import math
import time

import numpy as np

from wifiworm import _backend, epidemic as ep, ingest, spatialnet as sn


def city(nodes: int, seed: int):
    width = math.sqrt(nodes * math.pi * 45.0 ** 2 / 20.0)
    recs = ingest.synth_city(nodes, ingest.city_bbox(41.88, -87.63, width),
                             encrypted_fraction=0.337, rng=np.random.default_rng(seed))
    return ingest.assign_profiles(recs, ingest.IngestConfig(), np.random.default_rng(seed + 1))


def best_of(repeat: int, fn):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=500, help="epidemic ticks to time")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    profiles = city(args.nodes, args.seed)
    lat = np.array([p.lat for p in profiles])
    lon = np.array([p.lon for p in profiles])
    backends = _backend.available()

    rows, graphs, series = [], {}, {}
    for name, kernels in sorted(backends.items()):
        t_graph, g = best_of(args.repeat, lambda: sn.build_graph(lat, lon, 45.0, kernels))
        giant = sn.giant_component(g)

        def simulate():
            st = ep.init_state(giant, profiles, ep.EpidemicParams(), np.random.default_rng(1))
            return ep.run(st, args.steps, kernels)

        t_sim, ts = best_of(args.repeat, simulate)
        graphs[name], series[name] = g, ts
        rows.append((name, t_graph, t_sim))

    print(f"N={args.nodes}, giant={giant.n}, <k>={sn.degree_stats(giant).mean_degree:.1f}, "
          f"{args.steps} ticks, best of {args.repeat}")
    print(f"{'backend':<8} {'graph s':>9} {'ticks s':>9} {'ticks/s':>9}")
    for name, tg, ts_ in rows:
        print(f"{name:<8} {tg:9.3f} {ts_:9.3f} {args.steps / ts_:9.0f}")
    if len(rows) == 2:
        by = {name: (tg, ts_) for name, tg, ts_ in rows}
        (gp, sp), (gc, sc) = by["python"], by["cython"]
        print(f"speedup  {gp / gc:9.1f} {sp / sc:9.1f}")
        same = (np.array_equal(graphs["python"].indices, graphs["cython"].indices)
                and np.array_equal(series["python"].counts, series["cython"].counts))
        print("outputs identical:", same)
        return 0 if same else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
