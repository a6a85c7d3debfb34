"""Frequency-uniform decomposition and the modulation / Planchon norms.

A partition of unity (sigma_k) adapted to the unit boxes Q_k is realized
as a tensor product of one-dimensional windows w with supp w = [-1, 1],
w >= 1/2 on [-1/2, 1/2] and sum_j w(xi - j) = 1. Two window families are
shipped (a normalized polynomial bump and a cos^2 window) so that the
equivalence of the resulting norms can be measured instead of assumed.

Norm evaluation is exact but avoids full-grid inverse transforms where
possible: a box piece is band-limited to a (2M+1)-wide frequency window,
so its L^2 norm is a Plancherel sum over the window, and for even p its
L^p quadrature can be evaluated on a reduced grid of R >= p*M + 1 points
per axis, where the Riemann sum of the trigonometric polynomial |g|^p is
already the exact integral (hence equal to the full-grid sum). Odd,
fractional and infinite p fall back to the full grid. The `reference`
method forces the full-grid path everywhere; it exists to validate and
benchmark the fast path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .spectral import (
    GridSpec,
    SpectralField,
    Trajectory,
    time_lp_norm,
)

__all__ = [
    "PartitionSpec",
    "Partition",
    "ModNormSpec",
    "PlanchonNormSpec",
    "NormResult",
    "XNormResult",
    "build_partition",
    "box",
    "mod_norm",
    "planchon_norm",
    "x_norm",
    "x_norm_diff",
    "japanese_bracket",
]

PARTITION_KINDS = ("piecewise-smooth-bump", "trigonometric-window")


@dataclass(frozen=True)
class PartitionSpec:
    kind: str = "trigonometric-window"
    k_max: int = 2

    def __post_init__(self):
        if self.kind not in PARTITION_KINDS:
            raise ValueError(f"unknown partition kind {self.kind!r}")
        if self.k_max < 2:
            raise ValueError(f"k_max must be >= 2, got {self.k_max}")


def _window_trig(offsets: np.ndarray) -> np.ndarray:
    """cos^2(pi xi / 2) on [-1, 1]; adjacent translates sum to one."""
    w = np.where(np.abs(offsets) < 1.0, np.cos(np.pi * offsets / 2.0) ** 2, 0.0)
    return w


def _window_bump(offsets: np.ndarray) -> np.ndarray:
    """(1 - xi^2)^4 bump normalized by the sum over integer translates."""

    def b(x):
        return np.where(np.abs(x) < 1.0, (1.0 - x**2) ** 4, 0.0)

    num = b(offsets)
    den = num + b(offsets - 1.0) + b(offsets + 1.0)
    out = np.zeros_like(num)
    inside = num > 0.0
    out[inside] = num[inside] / den[inside]
    return out


_WINDOWS = {
    "trigonometric-window": _window_trig,
    "piecewise-smooth-bump": _window_bump,
}


def japanese_bracket(k) -> float:
    k = np.asarray(k, dtype=np.float64)
    return float(np.sqrt(1.0 + np.sum(k * k)))


class Partition:
    """A partition of unity realized on one grid.

    Stores the single 1-d window sample vector (identical for every box up
    to translation, which is what makes the windowed norm path cheap) and
    the per-axis coverage sum used for truncation residuals.
    """

    def __init__(self, spec: PartitionSpec, grid: GridSpec):
        M, n, K = grid.M, grid.n, spec.k_max
        if n < 2 * M * (2 * K + 2):
            raise ValueError(
                f"Nyquist overflow: k_max = {K} needs n >= {2 * M * (2 * K + 2)}, got {n}"
            )
        self.spec = spec
        self.grid = grid
        self.k_max = K
        offsets = (np.arange(2 * M + 1) - M) / M  # (-1 .. 1) at lattice spacing
        self.window_1d = _WINDOWS[spec.kind](offsets)
        # window must vanish at the ends so supp sigma_k stays inside B_sqrt(d)(k)
        if self.window_1d[0] != 0.0 or self.window_1d[-1] != 0.0:
            raise AssertionError("window does not vanish at |offset| = 1")
        self._validate_partition_of_unity()
        # achieved lower bound of sigma_k on Q_k (attained at box corners)
        half = slice(M // 2, 3 * M // 2 + 1)  # offsets in [-1/2, 1/2]
        self.achieved_C = float(np.min(self.window_1d[half])) ** grid.d
        # per-axis coverage: sum of retained translates at every lattice frequency
        cov = np.zeros(n)
        for j in range(-K, K + 1):
            lo = n // 2 + (j - 1) * M
            cov[lo : lo + 2 * M + 1] += self.window_1d
        self.coverage_1d = cov
        self.boxes = [k for k in product(range(-K, K + 1), repeat=grid.d)]

    def _validate_partition_of_unity(self):
        # 1-d translates must sum to one on the covered lattice range; the
        # tensor structure then gives the d-dimensional identity.
        M = self.grid.M
        K = self.k_max
        n_inner = (2 * (K - 1)) * M + 1
        total = np.zeros(n_inner)
        base = (np.arange(n_inner) - (n_inner - 1) / 2) / M  # xi in [-(K-1), K-1]
        for j in range(-K, K + 1):
            total += _WINDOWS[self.spec.kind](base - j)
        residual = float(np.max(np.abs(total - 1.0)))
        if residual > 1e-12:
            raise ValueError(f"partition-of-unity residual {residual:.3e} > 1e-12")
        self.pou_residual = residual

    # -- per-box geometry ---------------------------------------------------

    def box_slices(self, k) -> tuple[slice, ...]:
        n, M = self.grid.n, self.grid.M
        out = []
        for ki in k:
            lo = n // 2 + (int(ki) - 1) * M
            out.append(slice(lo, lo + 2 * M + 1))
        return tuple(out)

    def window_nd(self) -> np.ndarray:
        w = self.window_1d
        out = w
        for _ in range(self.grid.d - 1):
            out = np.multiply.outer(out, w)
        return out

    def sigma_table(self, k) -> np.ndarray:
        """sigma_k sampled on the full frequency lattice (math order)."""
        self._check_k(k)
        table = np.zeros(self.grid.shape)
        table[self.box_slices(k)] = self.window_nd()
        return table

    def _check_k(self, k):
        if len(k) != self.grid.d:
            raise ValueError(f"box index {k} has wrong length for d = {self.grid.d}")
        if max(abs(int(ki)) for ki in k) > self.k_max:
            raise ValueError(f"box index {k} outside |k| <= {self.k_max}")

    def residual_multiplier(self) -> np.ndarray:
        """1 - sum_k sigma_k on the lattice (tensor product of coverages)."""
        cov = self.coverage_1d
        total = cov
        for _ in range(self.grid.d - 1):
            total = np.multiply.outer(total, cov)
        return 1.0 - total


def build_partition(spec: PartitionSpec, grid: GridSpec) -> Partition:
    return Partition(spec, grid)


def box(partition: Partition, k, f: SpectralField) -> SpectralField:
    """Box operator: inverse transform of sigma_k times the spectrum."""
    partition._check_k(k)
    if f.grid != partition.grid:
        raise ValueError("field grid does not match partition grid")
    spec = np.zeros(partition.grid.shape, dtype=np.complex128)
    sl = partition.box_slices(k)
    spec[sl] = f.spectrum[sl] * partition.window_nd()
    return SpectralField(partition.grid, spectrum=spec)


# ---------------------------------------------------------------------------
# norm specifications and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModNormSpec:
    p: object = 2
    q: object = 1
    s: float = 0.0


@dataclass(frozen=True)
class PlanchonNormSpec:
    s: float = 0.0
    q: object = 1
    r: object = math.inf
    p: object = 2


@dataclass(frozen=True)
class NormResult:
    value: float
    truncation_residual: float

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class XNormResult:
    value: float
    part_l2: float  # l^{s,q}(L^inf_t L^2_x) component
    part_lp: float  # l^{s,q}(L^r_t L^p_x) component
    truncation_residual: float

    def __float__(self):
        return self.value


def _next_fast_len(target: int) -> int:
    """Smallest 5-smooth integer >= target (pocketfft is fast for these)."""
    if target <= 1:
        return 1
    best = 1 << (target - 1).bit_length()  # power of two always works
    p5 = 1
    while p5 < best:
        p35 = p5
        while p35 < best:
            q = -(-target // p35)  # ceil(target / p35)
            cand = p35 * (1 << max(0, (q - 1).bit_length()))
            if target <= cand < best:
                best = cand
            p35 *= 3
        p5 *= 5
    return best


def _lq_aggregate(values: np.ndarray, q) -> float:
    if q == math.inf:
        return float(values.max()) if values.size else 0.0
    q = float(q)
    if q == 1.0:
        return float(values.sum())
    return float(np.sum(values**q) ** (1.0 / q))


class _BoxNormEngine:
    """Per-box L^p norms of (stacks of) spectra for one partition.

    method: "fast" uses the Plancherel / reduced-grid paths where they are
    exact and falls back to the full grid otherwise; "reference" always
    takes the full grid. Both agree to FFT roundoff.
    """

    def __init__(self, partition: Partition, method: str = "fast"):
        if method not in ("fast", "reference"):
            raise ValueError(f"unknown method {method!r}")
        self.partition = partition
        self.method = method
        grid = partition.grid
        self._l2_factor = (grid.dxi / (2.0 * math.pi)) ** grid.d
        self._wnd = partition.window_nd()

    # choose the reduced grid size for even p, or None for full grid
    def _reduced_size(self, p) -> int | None:
        if self.method == "reference":
            return None
        if p == math.inf:
            return None
        p = float(p)
        if p != int(p) or int(p) % 2:
            return None
        grid = self.partition.grid
        # |g|^p = (g conj(g))^(p/2) for a window-limited g has index bandwidth
        # (p/2) * 2M per axis, so R >= p*M + 1 points integrate it exactly
        need = int(p) * grid.M + 1
        if need > grid.n:
            return None  # the n-point sum is the defining quadrature; keep it
        return _next_fast_len(need)

    def box_series(self, k, stacks, p) -> np.ndarray:
        """L^p norms of the box-k piece for every sample in the stack(s).

        `stacks` is a spectra array (T, n, ..) or a pair (A, B) whose
        difference is measured; subtraction happens inside the small
        window so the full difference stack is never materialized.
        Returns the (T,) array of norms; all zeros are detected early.
        """
        part = self.partition
        sl = (slice(None),) + part.box_slices(k)
        if isinstance(stacks, tuple):
            block = stacks[0][sl] - stacks[1][sl]
        else:
            block = stacks[sl]
        if not np.any(block):
            T = block.shape[0]
            return np.zeros(T)
        block = block * self._wnd
        if p == 2:
            sq = np.sum(np.abs(block) ** 2, axis=tuple(range(1, block.ndim)))
            return np.sqrt(self._l2_factor * sq)
        R = self._reduced_size(p)
        if R is None:
            return self._full_grid_norms(k, block, p)
        return self._reduced_grid_norms(k, block, p, R)

    def _reduced_grid_norms(self, k, block, p, R) -> np.ndarray:
        grid = self.partition.grid
        d, M, n = grid.d, grid.M, grid.n
        T = block.shape[0]
        # fold window frequency indices kappa = idx - n/2 into Z_R per axis
        idx = [
            np.mod((int(ki) - 1) * M + np.arange(2 * M + 1), R) for ki in k
        ]
        A = np.zeros((T,) + (R,) * d, dtype=np.complex128)
        A[(slice(None),) + np.ix_(*idx)] = block
        vals = np.fft.ifftn(A, axes=tuple(range(1, d + 1)))
        # ifftn divides by R^d; undo it and apply the synthesis factor
        vals *= (R**d) * self._l2_factor
        hR = 2.0 * grid.L / R
        p = float(p)
        s = np.sum(np.abs(vals) ** p, axis=tuple(range(1, d + 1)))
        return s ** (1.0 / p) * hR ** (d / p)

    def _full_grid_norms(self, k, block, p) -> np.ndarray:
        grid = self.partition.grid
        d, n = grid.d, grid.n
        T = block.shape[0]
        sl = self.partition.box_slices(k)
        out = np.empty(T)
        full = np.zeros(grid.shape, dtype=np.complex128)
        axes = tuple(range(d))
        for j in range(T):
            full[sl] = block[j]
            vals = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(full)))
            vals *= (n**d) * self._l2_factor
            a = np.abs(vals)
            if p == math.inf:
                out[j] = a.max()
            else:
                out[j] = np.sum(a ** float(p)) ** (1.0 / float(p)) * grid.h ** (
                    d / float(p)
                )
            full[sl] = 0.0
        return out

    def truncation_residual(self, stacks) -> float:
        """max_t L^2 norm of the part of the spectrum outside all boxes."""
        mult = self.partition.residual_multiplier()
        if isinstance(stacks, tuple):
            a, b = stacks
            worst = 0.0
            for j in range(a.shape[0]):  # avoid materializing the difference stack
                sq = float(np.sum(np.abs((a[j] - b[j]) * mult) ** 2))
                worst = max(worst, sq)
        else:
            worst = 0.0
            for j in range(stacks.shape[0]):
                sq = float(np.sum(np.abs(stacks[j] * mult) ** 2))
                worst = max(worst, sq)
        return float(np.sqrt(self._l2_factor * worst))


def _as_stack(obj) -> np.ndarray:
    if isinstance(obj, SpectralField):
        return obj.spectrum[None, ...]
    if isinstance(obj, Trajectory):
        return obj.spectra
    raise TypeError(f"expected SpectralField or Trajectory, got {type(obj)}")


def mod_norm(f: SpectralField, spec: ModNormSpec, partition: Partition,
             method: str = "fast") -> NormResult:
    """Weighted l^q over boxes of per-box L^p norms of a single field."""
    engine = _BoxNormEngine(partition, method)
    stack = _as_stack(f)
    per_box = np.empty(len(partition.boxes))
    for i, k in enumerate(partition.boxes):
        per_box[i] = engine.box_series(k, stack, spec.p)[0]
    weights = np.array([japanese_bracket(k) ** spec.s for k in partition.boxes])
    value = _lq_aggregate(weights * per_box, spec.q)
    return NormResult(value, engine.truncation_residual(stack))


def planchon_norm(u: Trajectory, spec: PlanchonNormSpec, partition: Partition,
                  method: str = "fast") -> NormResult:
    """l^{s,q} over boxes of (L^r in time of (L^p in space)) of a trajectory."""
    engine = _BoxNormEngine(partition, method)
    stack = _as_stack(u)
    times = u.times
    per_box = np.empty(len(partition.boxes))
    for i, k in enumerate(partition.boxes):
        series = engine.box_series(k, stack, spec.p)
        per_box[i] = time_lp_norm(series, times, spec.r)
    weights = np.array([japanese_bracket(k) ** spec.s for k in partition.boxes])
    value = _lq_aggregate(weights * per_box, spec.q)
    return NormResult(value, engine.truncation_residual(stack))


def _x_norm_impl(stacks, times, s, q, r, p, partition, method) -> XNormResult:
    engine = _BoxNormEngine(partition, method)
    boxes = partition.boxes
    per_box_l2 = np.empty(len(boxes))
    per_box_lp = np.empty(len(boxes))
    for i, k in enumerate(boxes):
        series2 = engine.box_series(k, stacks, 2)
        per_box_l2[i] = float(series2.max())
        if p == 2 and r == math.inf:
            per_box_lp[i] = per_box_l2[i]
        else:
            series_p = series2 if p == 2 else engine.box_series(k, stacks, p)
            per_box_lp[i] = time_lp_norm(series_p, times, r)
    weights = np.array([japanese_bracket(k) ** s for k in boxes])
    part_l2 = _lq_aggregate(weights * per_box_l2, q)
    part_lp = _lq_aggregate(weights * per_box_lp, q)
    return XNormResult(
        value=part_l2 + part_lp,
        part_l2=part_l2,
        part_lp=part_lp,
        truncation_residual=engine.truncation_residual(stacks),
    )


def x_norm(u: Trajectory, s, q, r, p, partition: Partition,
           method: str = "fast") -> XNormResult:
    """Solution-space norm: l^{s,q}(L^inf L^2) part plus l^{s,q}(L^r L^p) part."""
    return _x_norm_impl(u.spectra, u.times, s, q, r, p, partition, method)


def x_norm_diff(u: Trajectory, v: Trajectory, s, q, r, p, partition: Partition,
                method: str = "fast") -> XNormResult:
    """X norm of u - v without materializing the difference trajectory."""
    if u.grid != v.grid or u.n_samples != v.n_samples:
        raise ValueError("trajectories not aligned")
    return _x_norm_impl((u.spectra, v.spectra), u.times, s, q, r, p,
                        partition, method)
