"""Compare the compiled and pure-numpy kernel backends.

Runs the two hot kernels (pairwise overlap sums, bilinear resize) on
synthetic workloads under each backend and prints median wall times plus
the speedup. Both backends must agree on the results; the benchmark
asserts that before it reports anything.

Usage:
    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --size 300x112x112 --repeats 5
    python3 benchmarks/bench_kernels.py --workers 8 --skip-numpy
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from camscore import kernels


def parse_size(text: str) -> tuple[int, int, int]:
    try:
        n, h, w = (int(p) for p in text.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected NxHxW, got {text!r}") from exc
    if n < 2 or h < 1 or w < 1:
        raise argparse.ArgumentTypeError(f"size out of range: {text!r}")
    return n, h, w


def timed(fn, repeats: int, warmup: int) -> tuple[float, object]:
    result = None
    for _ in range(warmup):
        result = fn()
    samples = []
    for _ in range(repeats):
        started = time.perf_counter()
        result = fn()
        samples.append(time.perf_counter() - started)
    return statistics.median(samples), result


def bench_overlap(n: int, h: int, w: int, repeats: int, warmup: int, backends: list[str]):
    rng = np.random.default_rng(7)
    stack = rng.random((n, h * w), dtype=np.float32)
    rows = {}
    for backend in backends:
        kernels.set_backend(backend)
        rows[backend] = timed(lambda: kernels.pair_overlap_sums(stack), repeats, warmup)
    return rows


def bench_resize(h: int, w: int, repeats: int, warmup: int, backends: list[str]):
    rng = np.random.default_rng(11)
    src = rng.random((h, w), dtype=np.float32)
    out_h, out_w = 224, 224

    def many():
        for _ in range(64):
            out = kernels.bilinear_resize_raw(src, out_h, out_w)
        return out

    rows = {}
    for backend in backends:
        kernels.set_backend(backend)
        rows[backend] = timed(many, repeats, warmup)
    return rows


def check_agreement(rows: dict, label: str) -> None:
    if len(rows) < 2:
        return
    (_, a), (_, b) = rows["numba"], rows["numpy"]
    if isinstance(a, tuple):
        for part_a, part_b in zip(a, b):
            worst = float(np.max(np.abs(part_a - part_b))) if part_a.size else 0.0
            assert worst <= 1e-9, f"{label}: backends disagree by {worst:g}"
    else:
        assert np.array_equal(a, b), f"{label}: backends disagree"


def report(label: str, rows: dict) -> None:
    numba_t = rows.get("numba", (None,))[0]
    numpy_t = rows.get("numpy", (None,))[0]
    cells = [f"{label:<34}"]
    cells.append(f"numba {numba_t * 1e3:9.2f} ms" if numba_t is not None else "numba      --  ")
    cells.append(f"numpy {numpy_t * 1e3:9.2f} ms" if numpy_t is not None else "numpy      --  ")
    if numba_t is not None and numpy_t is not None and numba_t > 0:
        cells.append(f"x{numpy_t / numba_t:6.1f}")
    print("  ".join(cells))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--size",
        type=parse_size,
        action="append",
        metavar="NxHxW",
        help="heatmap stack shape for the overlap kernel (repeatable; "
        "default 120x64x64 and 300x112x112)",
    )
    parser.add_argument("--repeats", type=int, default=3, help="timed runs per case (default 3)")
    parser.add_argument("--warmup", type=int, default=1, help="untimed runs per case (default 1)")
    parser.add_argument("--workers", type=int, default=None, help="thread count for the compiled backend")
    parser.add_argument("--skip-numpy", action="store_true", help="time only the compiled backend")
    args = parser.parse_args()

    backends = []
    if kernels.HAVE_NUMBA:
        backends.append("numba")
    else:
        print("numba is not importable; timing the numpy fallback only")
    if not args.skip_numpy:
        backends.append("numpy")
    if not backends:
        parser.error("nothing to benchmark: numba missing and numpy skipped")

    if args.workers is not None and kernels.HAVE_NUMBA:
        kernels.set_backend("numba")
        effective = kernels.set_workers(args.workers)
        print(f"compiled backend uses {effective} worker thread(s)")

    sizes = args.size or [(120, 64, 64), (300, 112, 112)]
    for n, h, w in sizes:
        rows = bench_overlap(n, h, w, args.repeats, args.warmup, backends)
        check_agreement(rows, "pair_overlap_sums")
        report(f"pair_overlap_sums {n}x{h}x{w}", rows)

    rows = bench_resize(64, 64, args.repeats, args.warmup, backends)
    check_agreement(rows, "bilinear_resize")
    report("bilinear_resize 64x64->224x224 x64", rows)


if __name__ == "__main__":
    main()
