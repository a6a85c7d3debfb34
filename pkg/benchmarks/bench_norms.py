"""Benchmark: windowed fast norm path vs the full-grid reference path.

The per-box norms dominate solver runtime. The fast path exploits that a
box piece is band-limited to a small frequency window: L^2 norms become
Plancherel sums over the window and even-p norms are evaluated exactly on
a reduced grid. This script measures both paths on solver-scale inputs
and checks they agree to roundoff.

Run:  python benchmarks/bench_norms.py
"""

import math
import time

import numpy as np

from modnls import dispersion as dsp, modspace as ms, spectral as sp


def bench(label, fn, repeat=3):
    best = math.inf
    value = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    print(f"{label:<44s} {best * 1e3:10.1f} ms   value = {value:.9e}")
    return value


def main():
    rng = np.random.default_rng(0)
    for d, L_mult, n, k_max, nt in ((2, 4, 128, 5, 65), (2, 8, 256, 7, 65)):
        grid = sp.make_grid(d, L_mult * math.pi, n)
        partition = ms.build_partition(
            ms.PartitionSpec("trigonometric-window", k_max), grid)
        w = 2 * grid.M
        c = grid.n // 2
        spec = np.zeros(grid.shape, dtype=complex)
        spec[c - w:c + w + 1, c - w:c + w + 1] = (
            rng.standard_normal((2 * w + 1,) * d)
            + 1j * rng.standard_normal((2 * w + 1,) * d))
        f = sp.SpectralField(grid, spectrum=spec)
        coeffs = dsp.EquationCoeffs(1.0, 0.0, 1.0)
        times = np.linspace(0.0, 8.0, nt)
        traj = dsp.propagate_trajectory(coeffs, times, f)

        print(f"\n== grid n={n}, L={L_mult}pi, k_max={k_max}, "
              f"{len(partition.boxes)} boxes, {nt} time samples ==")
        for p in (2, 6):
            spec_m = ms.ModNormSpec(p, 1, 0.5)
            a = bench(f"mod_norm p={p} fast",
                      lambda: ms.mod_norm(f, spec_m, partition, "fast").value)
            b = bench(f"mod_norm p={p} reference",
                      lambda: ms.mod_norm(f, spec_m, partition, "reference").value)
            assert abs(a - b) <= 1e-11 * max(a, 1e-300), "paths disagree"
        spec_p = ms.PlanchonNormSpec(0.0, 1, 4, 6)
        a = bench("planchon_norm (r=4,p=6) fast",
                  lambda: ms.planchon_norm(traj, spec_p, partition, "fast").value)
        b = bench("planchon_norm (r=4,p=6) reference",
                  lambda: ms.planchon_norm(traj, spec_p, partition, "reference").value,
                  repeat=1)
        assert abs(a - b) <= 1e-11 * max(a, 1e-300), "paths disagree"
        bench("x_norm fast",
              lambda: ms.x_norm(traj, 0.0, 1, 4, 6, partition, "fast").value)


if __name__ == "__main__":
    main()
