"""Benchmark the compiled kernels against the pure-numpy fallback.

Run with ``python benchmarks/bench_kernels.py``. Also verifies that both
backends produce bitwise-identical results on random inputs.
"""

import time

import numpy as np

from dockgame.kernels import _pykern

try:
    from dockgame.kernels import _ckern
except ImportError:
    _ckern = None


def _time(fn, repeats=20):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, py_fn, c_fn, check):
    t_py = _time(py_fn)
    if c_fn is None:
        print(f"{name:24s} python {t_py * 1e3:8.3f} ms   (no compiled backend)")
        return
    t_c = _time(c_fn)
    identical = check()
    print(f"{name:24s} python {t_py * 1e3:8.3f} ms   cython {t_c * 1e3:8.3f} ms"
          f"   speedup {t_py / t_c:5.2f}x   bitwise-equal={identical}")


def main():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((2000, 3))
    b = rng.standard_normal((1500, 3))
    src = rng.standard_normal((20000, 64))
    idx = rng.integers(0, 2000, size=20000).astype(np.int64)

    def py_scatter():
        out = np.zeros((2000, 64))
        _pykern.scatter_add(out, idx, src)
        return out

    def c_scatter():
        out = np.zeros((2000, 64))
        _ckern.scatter_add(out, idx, src)
        return out

    bench("scatter_add", py_scatter,
          c_scatter if _ckern else None,
          lambda: np.array_equal(py_scatter(), c_scatter()))

    bench("pairwise_distances",
          lambda: _pykern.pairwise_distances(a, b),
          (lambda: _ckern.pairwise_distances(a, b)) if _ckern else None,
          lambda: np.array_equal(_pykern.pairwise_distances(a, b),
                                 _ckern.pairwise_distances(a, b)))

    bench("radius_pairs",
          lambda: _pykern.radius_pairs(a, b, 1.5),
          (lambda: _ckern.radius_pairs(a, b, 1.5)) if _ckern else None,
          lambda: all(np.array_equal(x, y) for x, y in
                      zip(_pykern.radius_pairs(a, b, 1.5),
                          _ckern.radius_pairs(a, b, 1.5))))


if __name__ == "__main__":
    main()
