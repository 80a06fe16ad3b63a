"""Follow a geodesic to a fixed target while the penalty grows.

At q = 1 the geodesic to U is exp(-i H t) with H the principal logarithm.
Raising q deforms the metric; the geodesic derivative predicts how the
initial dual moves and a Newton corrector pins the endpoint back on U.
The run prints the length, endpoint error and the smallest singular value
of the endpoint map at every node; a near-singular map marks a q where
the endpoints become conjugate.

    python demos/deform_to_target.py --target qft --q-end 16
    python demos/deform_to_target.py --target haar --seed 0 --q-end 64
"""

import argparse
import time

from qcgeom.deform import DeformationFailed, builtin_target, continue_in_q


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--target", choices=("qft", "haar"), default="qft")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--q-end", type=float, default=16.0)
    ap.add_argument("--nodes-per-decade", type=int, default=64)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--csv", default=None, help="write the full trace here")
    args = ap.parse_args()

    U = builtin_target("qft" if args.target == "qft" else "haar_random", n=3, seed=args.seed)
    start = time.perf_counter()
    try:
        trace = continue_in_q(U, 1.0, args.q_end, nodes_per_decade=args.nodes_per_decade, steps=args.steps)
    except DeformationFailed as exc:
        print(f"continuation stopped: {exc}")
        trace = exc.trace
    elapsed = time.perf_counter() - start

    print(f"{'q':>10} {'length':>10} {'error':>9} {'sigma_min':>9}")
    for nd in trace.nodes[:: max(1, len(trace.nodes) // 25)]:
        flag = "  near-singular" if nd.near_singular else ""
        print(f"{nd.q:10.4f} {nd.length:10.5f} {nd.endpoint_error:9.1e} {nd.sigma_min:9.1e}{flag}")
    print(f"{len(trace.nodes)} nodes in {elapsed:.0f} s; final endpoint error {trace.final_error:.2e}")
    print(f"first near-singular q: {trace.first_flag_q}")

    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(trace.to_csv())
        print(f"wrote {args.csv}")


if __name__ == "__main__":
    main()
