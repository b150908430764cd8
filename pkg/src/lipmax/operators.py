"""Maximal-type operators on grid functions.

Every operator has a brute-force version (explicit loop over cubes) used as an
oracle, and a fast kernel.  The fast kernels work on arrays with arbitrary
leading batch axes so that a whole test-function dictionary can be pushed
through one call.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import maximum_filter1d

from .grid import Cube, Grid, GridFunction, enumerate_cubes, indicator, same_grid


@dataclass(frozen=True)
class ScaleSet:
    """Cube side lengths (in cells) over which maxima are taken."""

    sides: tuple[int, ...]
    mode: str = "all"

    def __post_init__(self):
        sides = tuple(sorted(set(int(s) for s in self.sides)))
        if not sides or sides[0] < 1:
            raise ValueError(f"scale set must be a nonempty set of positive sides, got {self.sides}")
        object.__setattr__(self, "sides", sides)

    @classmethod
    def exhaustive(cls, N: int) -> "ScaleSet":
        return cls(tuple(range(1, N + 1)), "all")

    @classmethod
    def geometric(cls, N: int) -> "ScaleSet":
        sides = {N}
        s = 1
        while s < N:
            sides.add(s)
            s *= 2
        return cls(tuple(sides), "geo")

    @classmethod
    def from_mode(cls, mode: str, N: int) -> "ScaleSet":
        if mode == "all":
            return cls.exhaustive(N)
        if mode == "geo":
            return cls.geometric(N)
        raise ValueError(f"unknown scale mode {mode!r}; expected 'all' or 'geo'")

    def check(self, grid: Grid) -> None:
        if self.sides[-1] > grid.N:
            raise ValueError(f"scale {self.sides[-1]} exceeds N = {grid.N}")


def _resolve(scales: ScaleSet | None, grid: Grid) -> ScaleSet:
    if scales is None:
        return ScaleSet.exhaustive(grid.N)
    scales.check(grid)
    return scales


# ---------------------------------------------------------------------------
# Array kernels


def window_sums(a: np.ndarray, s: int, n: int) -> np.ndarray:
    """Sums over every ``s**n`` window of the trailing ``n`` axes.

    Separable summed-area table: one prefix sum and one difference per axis.
    Output trailing shape is ``(N - s + 1,) * n``.
    """
    if s == 1:
        # exact cell values; prefix-sum differences would round
        return np.array(a, dtype=float, copy=True)
    out = a
    for ax in range(a.ndim - n, a.ndim):
        pad = [(0, 0)] * out.ndim
        pad[ax] = (1, 0)
        c = np.cumsum(np.pad(out, pad), axis=ax)
        hi = [slice(None)] * out.ndim
        lo = [slice(None)] * out.ndim
        hi[ax] = slice(s, None)
        lo[ax] = slice(None, -s)
        out = c[tuple(hi)] - c[tuple(lo)]
    return out


def spread_max(windows: np.ndarray, s: int, n: int) -> np.ndarray:
    """Per-cell maximum over all windows of side ``s`` containing the cell.

    ``windows`` holds one value per window offset (trailing shape
    ``(N - s + 1,) * n``).  Each axis is one sliding-window maximum of width
    ``s`` over the ``-inf``-padded offsets, so the cost is linear per axis.
    """
    if s == 1:
        return windows
    out = windows
    for ax in range(out.ndim - n, out.ndim):
        pad = [(0, 0)] * out.ndim
        pad[ax] = (s - 1, s - 1)
        padded = np.pad(out, pad, constant_values=-np.inf)
        filt = maximum_filter1d(padded, size=s, axis=ax, mode="constant", cval=-np.inf)
        N = out.shape[ax] + s - 1
        idx = [slice(None)] * out.ndim
        idx[ax] = slice(s // 2, s // 2 + N)
        out = filt[tuple(idx)]
    return out


def maximal_kernel(a: np.ndarray, grid: Grid, sides, alpha: float = 0.0) -> np.ndarray:
    """``sup_{Q containing x} |Q|**(alpha/n) * mean_Q |a|`` over the trailing grid axes."""
    n = grid.n
    a = np.abs(a)
    out = np.zeros_like(a)
    for s in sides:
        avg = window_sums(a, s, n) / s ** n
        if alpha:
            avg = avg * (s * grid.h) ** alpha
        np.maximum(out, spread_max(avg, s, n), out=out)
    return out


def _windows(a: np.ndarray, s: int, n: int) -> np.ndarray:
    """View of shape ``lead + (W,)*n + (s,)*n``."""
    return sliding_window_view(a, (s,) * n, axis=tuple(range(a.ndim - n, a.ndim)))


def _scatter_max(out: np.ndarray, vals: np.ndarray, s: int, n: int) -> None:
    """``out[..., o + p] = max(out, vals[..., o, p])`` for every window offset ``o``
    and in-window position ``p``."""
    W = vals.shape[-2 * n:-n]
    lead = (slice(None),) * (out.ndim - n)
    for pos in itertools.product(range(s), repeat=n):
        dst = lead + tuple(slice(p, p + w) for p, w in zip(pos, W))
        src = vals[(Ellipsis,) + pos]
        np.maximum(out[dst], src, out=out[dst])


def commutator_kernel(b: np.ndarray, f: np.ndarray, grid: Grid, sides, chunk: int = 64) -> np.ndarray:
    """``M_b`` for a batch ``f`` of shape ``lead + grid.shape`` and a fixed ``b``.

    Per cube the cells are sorted by ``b`` once.  With ``d = b - min_Q b`` and
    prefix sums ``W`` of ``|f|`` and ``V`` of ``d |f|`` in sorted order, the inner
    sum at ``x`` is ``d(x) (W_below - W_above) - (V_below - V_above)``.  Ties are
    broken by in-cube cell index; tied cells contribute nothing either way.
    """
    n = grid.n
    f = np.abs(np.asarray(f, dtype=float))
    lead = f.shape[: f.ndim - n]
    flat = f.reshape((-1,) + grid.shape)
    out = np.zeros_like(flat)
    for s in sides:
        k = s ** n
        bw = _windows(b, s, n)
        W = bw.shape[:n]
        bw = bw.reshape(-1, k)
        order = np.argsort(bw, axis=1, kind="stable")
        bs = np.take_along_axis(bw, order, axis=1)
        d = bs - bs[:, :1]
        for start in range(0, flat.shape[0], chunk):
            fw = _windows(flat[start:start + chunk], s, n)
            m = fw.shape[0]
            fw = fw.reshape(m, -1, k)
            ws = np.take_along_axis(fw, order[None], axis=2)
            cw = np.cumsum(ws, axis=2)
            cv = np.cumsum(ws * d[None], axis=2)
            tw = cw[..., -1:]
            tv = cv[..., -1:]
            inner = d[None] * (2 * cw - tw) - (2 * cv - tv)
            np.maximum(inner, 0.0, out=inner)
            vals = np.empty_like(inner)
            np.put_along_axis(vals, np.broadcast_to(order[None], inner.shape), inner, axis=2)
            vals = (vals / k).reshape((m,) + W + (s,) * n)
            _scatter_max(out[start:start + chunk], vals, s, n)
    return out.reshape(lead + grid.shape)


# ---------------------------------------------------------------------------
# Public operators


def mf_brute(f: GridFunction, scales: ScaleSet | None = None) -> GridFunction:
    """Hardy-Littlewood maximal function by explicit enumeration of cubes."""
    grid = f.grid
    scales = _resolve(scales, grid)
    a = np.abs(f.values)
    out = np.zeros(grid.shape)
    for Q in enumerate_cubes(grid, scales.sides):
        sl = Q.slices
        v = np.sum(a[sl]) / Q.cell_count
        np.maximum(out[sl], v, out=out[sl])
    return f.like(out)


def mf_fast(f: GridFunction, scales: ScaleSet | None = None) -> GridFunction:
    """Hardy-Littlewood maximal function via window sums and sliding maxima.

    Cost ``O(N**n * |scales| * n)``.
    """
    scales = _resolve(scales, f.grid)
    return f.like(maximal_kernel(f.values, f.grid, scales.sides))


def _check_alpha(alpha: float, n: int) -> None:
    if not 0 < alpha < n:
        raise ValueError(f"alpha must lie in (0, n) = (0, {n}), got {alpha}")


def frac_mf(f: GridFunction, alpha: float, scales: ScaleSet | None = None) -> GridFunction:
    """Fractional maximal function ``sup_Q |Q|**(alpha/n - 1) * int_Q |f|``."""
    _check_alpha(alpha, f.grid.n)
    scales = _resolve(scales, f.grid)
    return f.like(maximal_kernel(f.values, f.grid, scales.sides, alpha))


def frac_mf_brute(f: GridFunction, alpha: float, scales: ScaleSet | None = None) -> GridFunction:
    _check_alpha(alpha, f.grid.n)
    grid = f.grid
    scales = _resolve(scales, grid)
    a = np.abs(f.values)
    out = np.zeros(grid.shape)
    for Q in enumerate_cubes(grid, scales.sides):
        sl = Q.slices
        v = Q.measure(grid) ** (alpha / grid.n - 1) * np.sum(a[sl]) * grid.cell_volume
        np.maximum(out[sl], v, out=out[sl])
    return f.like(out)


def local_mf(b: GridFunction, Q0: Cube) -> GridFunction:
    """Maximal function relative to ``Q0``: sup of ``mean_Q |b|`` over subcubes
    ``Q`` of ``Q0`` containing ``x``.

    Returned on the ``side**n`` sub-grid of ``Q0`` (same spacing), so evaluation
    outside ``Q0`` is not representable.
    """
    return mf_fast(b.restrict(Q0))


def local_mf_all(b: np.ndarray, grid: Grid, max_side: int | None = None):
    """Yield ``(s, L)`` where ``L[o + p]`` is ``local_mf(b, Cube(o, s))`` at ``p``.

    ``L`` has shape ``(N - s + 1,)*n + (s,)*n``.  Every proper subcube of a cube
    of side ``s`` lies in one of its ``2**n`` corner subcubes of side ``s - 1``,
    so each level is the elementwise max of the cube's own mean and the
    shifted previous level.
    """
    n, N = grid.n, grid.N
    a = np.abs(b)
    prev = None
    for s in range(1, (max_side or N) + 1):
        W = N - s + 1
        mean = window_sums(a, s, n) / s ** n
        cur = np.broadcast_to(mean[(Ellipsis,) + (None,) * n], (W,) * n + (s,) * n).copy()
        if prev is not None:
            for e in itertools.product((0, 1), repeat=n):
                src = prev[tuple(slice(ei, ei + W) for ei in e)]
                dst = (slice(None),) * n + tuple(slice(ei, ei + s - 1) for ei in e)
                np.maximum(cur[dst], src, out=cur[dst])
        yield s, cur
        prev = cur


def maximal_commutator_brute(b: GridFunction, f: GridFunction, scales: ScaleSet | None = None) -> GridFunction:
    """``M_b(f)`` with the ``O(s**(2n))`` inner sum per cube."""
    grid = same_grid(b, f)
    scales = _resolve(scales, grid)
    bv, fa = b.values, np.abs(f.values)
    out = np.zeros(grid.shape)
    for Q in enumerate_cubes(grid, scales.sides):
        sl = Q.slices
        bq = bv[sl].reshape(-1)
        fq = fa[sl].reshape(-1)
        inner = np.abs(bq[:, None] - bq[None, :]) @ fq / Q.cell_count
        np.maximum(out[sl], inner.reshape(bv[sl].shape), out=out[sl])
    return f.like(out)


def maximal_commutator(b: GridFunction, f: GridFunction, scales: ScaleSet | None = None) -> GridFunction:
    """Maximal commutator ``M_b(f)(x) = sup_Q mean_{y in Q} |b(x) - b(y)| |f(y)|``."""
    grid = same_grid(b, f)
    scales = _resolve(scales, grid)
    return f.like(commutator_kernel(b.values, f.values, grid, scales.sides))


def nonlinear_commutator(b: GridFunction, f: GridFunction, scales: ScaleSet | None = None) -> GridFunction:
    """``[b, M](f) = b M(f) - M(b f)``, both maxima over the same scales."""
    grid = same_grid(b, f)
    scales = _resolve(scales, grid)
    return f.like(nonlinear_kernel(b.values, f.values, grid, scales.sides))


def nonlinear_kernel(b: np.ndarray, f: np.ndarray, grid: Grid, sides) -> np.ndarray:
    return b * maximal_kernel(f, grid, sides) - maximal_kernel(b * f, grid, sides)


def subsampling_error(f: GridFunction) -> float:
    """Largest shortfall of the geometric-scale maximal function against the exhaustive one."""
    N = f.grid.N
    full = mf_fast(f, ScaleSet.exhaustive(N)).values
    geo = mf_fast(f, ScaleSet.geometric(N)).values
    return float(np.max(full - geo))


def indicator_identity_gap(grid: Grid, Q: Cube) -> float:
    """``max_{x in Q} |M(chi_Q)(x) - 1|``; zero in exact arithmetic."""
    m = mf_fast(indicator(Q, grid)).values[Q.slices]
    return float(np.max(np.abs(m - 1.0)))
