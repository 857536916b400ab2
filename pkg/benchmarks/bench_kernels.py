"""Compare the compiled kernels against the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py``.  Both backends run the
same sweeps on the same inputs; the script reports wall time per backend
and the max absolute deviation between their outputs.
"""

from __future__ import annotations

import time

import numpy as np

from mfglab.kernels import _fallback

try:
    from mfglab.kernels import _core
except ImportError:
    _core = None


def _timed(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(n_cells=64, n_steps=20000, nu=1.0, dt=5e-3, seed=0):
    rng = np.random.default_rng(seed)
    h = 1.0 / n_cells
    m0 = rng.random(n_cells)
    m0 /= m0.sum()
    alpha = 0.5 * np.sin(2 * np.pi * (np.arange(n_cells) + 0.5) * h
                         + rng.random((n_steps, 1)))
    f_path = rng.standard_normal((n_steps, n_cells)) * 0.1
    v_pot = np.cos(2 * np.pi * (np.arange(n_cells) + 0.5) * h)
    a_kin = np.ones(n_cells)
    u_t = np.zeros(n_cells)

    rows = []
    for label, args in (
            ("fp_sweep", (m0, alpha, nu, dt, h)),
            ("hjb_sweep", (u_t, f_path, v_pot, a_kin, nu, dt, h, 0.1))):
        t_py, out_py = _timed(getattr(_fallback, label), *args)
        row = {"kernel": label, "fallback_s": t_py}
        if _core is not None:
            t_c, out_c = _timed(getattr(_core, label), *args)
            row["compiled_s"] = t_c
            row["speedup"] = t_py / t_c
            row["max_dev"] = float(np.abs(out_py - out_c).max())
        rows.append(row)
    return rows


def main():
    print(f"compiled backend available: {_core is not None}")
    for row in bench():
        parts = [f"{row['kernel']:<10} fallback {row['fallback_s'] * 1e3:8.1f} ms"]
        if "compiled_s" in row:
            parts.append(f"compiled {row['compiled_s'] * 1e3:8.1f} ms")
            parts.append(f"speedup {row['speedup']:6.1f}x")
            parts.append(f"max dev {row['max_dev']:.2e}")
        print("  ".join(parts))


if __name__ == "__main__":
    main()
