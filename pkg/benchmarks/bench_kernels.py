"""Compare the compiled and numpy kernels.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from mldrbeam import _kernels_py
from mldrbeam.roomsim.rir import HALF_WIDTH, SPEED_OF_SOUND, reflection_coefficient, rir_length

try:
    from mldrbeam import _kernels_ext
except ImportError:
    _kernels_ext = None


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    room = np.array([6.0, 10.0, 4.0])
    src = np.array([3.0, 7.0, 2.0])
    mic = np.array([3.02, 5.0, 2.0])
    fs = 16000.0
    rng = np.random.default_rng(0)
    frames = rng.standard_normal((257, 6, 500)) + 1j * rng.standard_normal((257, 6, 500))
    weights = rng.random((257, 500)) + 0.1

    cases = []
    for rt60 in (0.16, 0.64):
        beta = np.full(6, reflection_coefficient(room, rt60))
        n = rir_length(room, src, mic, rt60, fs)
        call = (room, src, mic, beta, fs, SPEED_OF_SOUND, n, -1, 0.0, HALF_WIDTH)
        cases.append((f"image_source_rir rt60={rt60}", "image_source_rir", call))
    cases.append(("weighted_outer_sum 257x6x500", "weighted_outer_sum", (frames, weights)))

    print(f"{'kernel':34s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for label, name, call in cases:
        tp, ref = _best(lambda: getattr(_kernels_py, name)(*call), args.repeat)
        if _kernels_ext is None:
            print(f"{label:34s} {tp:11.4f} {'n/a':>11s}")
            continue
        tc, out = _best(lambda: getattr(_kernels_ext, name)(*call), args.repeat)
        diff = float(np.max(np.abs(np.asarray(out) - ref)))
        print(f"{label:34s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
