"""Compare the compiled and numpy BCJR kernels on a full-size codeword.

Usage: ``python benchmarks/bench_bcjr.py [--repeat 5] [--steps 2816]``
"""

import argparse
import timeit

import numpy as np

from opmimo import _bcjr_py, kernels
from opmimo.coding import trellis
from opmimo.config import CodeSpec


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=2816, help="trellis steps (one frame = 2816)")
    ap.add_argument("--constraint-length", type=int, default=7)
    args = ap.parse_args()

    spec = CodeSpec() if args.constraint_length == 7 else CodeSpec(args.constraint_length, (0o5, 0o7))
    tr = trellis(spec)
    llr = np.random.default_rng(0).normal(0, 3, (args.steps, tr.n_out))

    backends = {"numpy": _bcjr_py.bcjr_logmap}
    if kernels.BACKEND == "cython":
        backends["cython"] = kernels.bcjr_logmap
    else:
        print("compiled extension not built; timing the numpy kernel only")

    ref = None
    times = {}
    for name, fn in backends.items():
        out = fn(llr, tr.next_state, tr.outputs, 1)
        if ref is None:
            ref = out
        else:
            # forced tail bits are +-inf in both; compare finite entries
            with np.errstate(invalid="ignore"):
                err = max(float(np.max(np.abs(np.where(a == b, 0.0, a - b)))) for a, b in zip(out, ref))
            print(f"max |{name} - numpy| = {err:.2e}")
        times[name] = min(timeit.repeat(lambda: fn(llr, tr.next_state, tr.outputs, 1),
                                        number=1, repeat=args.repeat))
        print(f"{name:>7}: {times[name] * 1e3:8.2f} ms per codeword "
              f"({tr.num_states} states, {args.steps} steps)")
    if len(times) == 2:
        print(f"speed-up: {times['numpy'] / times['cython']:.1f}x")


if __name__ == "__main__":
    main()
