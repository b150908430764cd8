"""Norm and seminorm functionals on grid functions.

Functionals that are a supremum over cubes accept ``argmax=True`` and then
return ``(value, cube)``; ties go to the first cube in enumeration order
(side ascending, offsets row-major).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Cube, Grid, GridFunction
from .operators import ScaleSet, _resolve, _windows, local_mf_all, window_sums


def _offset(flat_index: int, W: int, n: int) -> tuple[int, ...]:
    return tuple(int(i) for i in np.unravel_index(flat_index, (W,) * n))


class _CubeSup:
    """Running supremum over cubes with first-wins tie breaking."""

    def __init__(self, n: int, N: int):
        self.n, self.N = n, N
        self.value = 0.0
        self.cube: Cube | None = None

    def offer(self, s: int, per_window: np.ndarray) -> None:
        i = int(np.argmax(per_window))
        v = float(per_window.reshape(-1)[i])
        if self.cube is None or v > self.value:
            self.value = v
            self.cube = Cube(_offset(i, self.N - s + 1, self.n), s)

    def result(self, argmax: bool):
        return (self.value, self.cube) if argmax else self.value


def lp_norm(f: GridFunction, p: float) -> float:
    if not p >= 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return float(lp_norm_batch(f.values, f.grid, p))


def lp_norm_batch(a: np.ndarray, grid: Grid, p: float) -> np.ndarray:
    a = np.abs(a)
    axes = tuple(range(a.ndim - grid.n, a.ndim))
    if math.isinf(p):
        return np.max(a, axis=axes)
    return (np.sum(a ** p, axis=axes) * grid.cell_volume) ** (1 / p)


@dataclass(frozen=True)
class DistributionFunction:
    """Right-continuous step function ``lam -> |{x : |g(x)| > lam}|``.

    ``thresholds`` are the distinct nonzero values of ``|g|`` in decreasing
    order; ``measures[k]`` is the value on ``[thresholds[k+1], thresholds[k])``
    (with ``thresholds[K] = 0``).
    """

    thresholds: np.ndarray
    measures: np.ndarray

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        # measure{|g| > lam} = measures[k] for the last k with thresholds[k] > lam
        k = np.searchsorted(-self.thresholds, -lam, side="left") - 1
        vals = np.where(k >= 0, self.measures[np.clip(k, 0, None)] if len(self.measures) else 0.0, 0.0)
        return vals if vals.ndim else float(vals)

    def integral(self) -> float:
        """``int_0^inf`` of the step function, in closed form."""
        if len(self.thresholds) == 0:
            return 0.0
        widths = self.thresholds - np.append(self.thresholds[1:], 0.0)
        return float(np.sum(self.measures * widths))


def distribution(g: GridFunction) -> DistributionFunction:
    a = np.abs(g.flat)
    a = a[a > 0]
    levels, counts = np.unique(a, return_counts=True)
    levels, counts = levels[::-1], counts[::-1]
    return DistributionFunction(levels, np.cumsum(counts) * g.grid.cell_volume)


def weak_constant(g: GridFunction, f: GridFunction, beta: float) -> float:
    """Best constant ``sup_lam lam * |{|g| > lam}|**((n - beta)/n) / ||f||_1``.

    The step function is constant on ``[t_{k+1}, t_k)``, so the supremum is the
    left limit at one of the thresholds: ``max_k t_k m_k**((n-beta)/n)``.
    """
    n = g.grid.n
    if not 0 < beta < n:
        raise ValueError(f"beta must lie in (0, n), got {beta}")
    mass = lp_norm(f, 1)
    if mass == 0:
        raise ValueError("weak-type constant needs a nonzero f")
    dist = distribution(g)
    if len(dist.thresholds) == 0:
        return 0.0
    return float(np.max(dist.thresholds * dist.measures ** ((n - beta) / n)) / mass)


def _check_p_lambda(p: float, lam: float, n: int) -> None:
    if not 1 <= p < math.inf:
        raise ValueError(f"Morrey exponent p must lie in [1, inf), got {p}")
    if not 0 <= lam <= n:
        raise ValueError(f"Morrey lambda must lie in [0, n], got {lam}")


def morrey_norm(f: GridFunction, p: float, lam: float, scales: ScaleSet | None = None, argmax: bool = False):
    """``sup_Q (|Q|**(-lam/n) * int_Q |f|**p)**(1/p)`` over enumerated cubes."""
    grid = f.grid
    _check_p_lambda(p, lam, grid.n)
    scales = _resolve(scales, grid)
    vals, cubes = morrey_norm_batch(f.values[None], grid, p, lam, scales.sides)
    return (float(vals[0]), cubes[0]) if argmax else float(vals[0])


def morrey_norm_batch(a: np.ndarray, grid: Grid, p: float, lam: float, sides):
    """Morrey norms of each function in the batch ``a`` (shape ``(B,) + grid.shape``)."""
    n, N = grid.n, grid.N
    a = np.abs(a) ** p
    best = np.full(a.shape[0], -np.inf)
    where: list[Cube | None] = [None] * a.shape[0]
    for s in sides:
        meas = grid.cube_measure(s)
        per = (window_sums(a, s, n) * grid.cell_volume * meas ** (-lam / n)).reshape(a.shape[0], -1)
        idx = np.argmax(per, axis=1)
        top = per[np.arange(a.shape[0]), idx]
        for j in np.nonzero(top > best)[0]:
            best[j] = top[j]
            where[j] = Cube(_offset(idx[j], N - s + 1, n), s)
    return best ** (1 / p), where


def lipschitz_pairwise(b: GridFunction, beta: float, chunk: int = 4096) -> float:
    """``max_{x != y} |b(x) - b(y)| / |x - y|**beta`` over cell centers."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    x = b.grid.centers().reshape(-1, b.grid.n)
    v = b.flat
    best = 0.0
    for start in range(0, len(v), chunk):
        xi, vi = x[start:start + chunk], v[start:start + chunk]
        dist = np.linalg.norm(xi[:, None, :] - x[None, :, :], axis=-1)
        diff = np.abs(vi[:, None] - v[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, diff / dist ** beta, 0.0)
        best = max(best, float(np.max(ratio)))
    return best


def lipschitz_pairwise_sampled(b: GridFunction, beta: float, pairs: int, seed: int) -> float:
    """Lower bound on :func:`lipschitz_pairwise` from ``pairs`` random cell pairs."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    rng = np.random.default_rng(seed)
    x = b.grid.centers().reshape(-1, b.grid.n)
    v = b.flat
    i = rng.integers(len(v), size=pairs)
    j = rng.integers(len(v), size=pairs)
    keep = i != j
    i, j = i[keep], j[keep]
    if len(i) == 0:
        return 0.0
    dist = np.linalg.norm(x[i] - x[j], axis=-1)
    return float(np.max(np.abs(v[i] - v[j]) / dist ** beta))


def _window_oscillation(bw: np.ndarray, q: float) -> np.ndarray:
    """``(mean_Q |b - b_Q|**q)**(1/q)`` for windows flattened on the last axis."""
    dev = np.abs(bw - bw.mean(axis=-1, keepdims=True))
    if q == 1:
        return dev.mean(axis=-1)
    return np.mean(dev ** q, axis=-1) ** (1 / q)


def _check_beta_q(beta: float, q: float) -> None:
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not 1 <= q < math.inf:
        raise ValueError(f"q must lie in [1, inf), got {q}")


def lipschitz_oscillation(b: GridFunction, beta: float, q: float = 1.0,
                          scales: ScaleSet | None = None, argmax: bool = False):
    """``sup_Q |Q|**(-beta/n) (mean_Q |b - b_Q|**q)**(1/q)``."""
    _check_beta_q(beta, q)
    grid = b.grid
    scales = _resolve(scales, grid)
    sup = _CubeSup(grid.n, grid.N)
    for s in scales.sides:
        bw = _windows(b.values, s, grid.n).reshape(-1, s ** grid.n)
        sup.offer(s, _window_oscillation(bw, q) * (s * grid.h) ** (-beta))
    return sup.result(argmax)


def bmo_norm(b: GridFunction, scales: ScaleSet | None = None, argmax: bool = False):
    """``sup_Q mean_Q |b - b_Q|``."""
    grid = b.grid
    scales = _resolve(scales, grid)
    sup = _CubeSup(grid.n, grid.N)
    for s in scales.sides:
        bw = _windows(b.values, s, grid.n).reshape(-1, s ** grid.n)
        sup.offer(s, _window_oscillation(bw, 1.0))
    return sup.result(argmax)


def mq_deviation(b: GridFunction, beta: float, q: float = 1.0,
                 scales: ScaleSet | None = None, argmax: bool = False):
    """``sup_Q |Q|**(-beta/n) (mean_Q |b - M_Q(b)|**q)**(1/q)`` with ``M_Q`` the
    maximal function relative to ``Q``."""
    _check_beta_q(beta, q)
    grid = b.grid
    scales = _resolve(scales, grid)
    wanted = set(scales.sides)
    sup = _CubeSup(grid.n, grid.N)
    k_axes = tuple(range(grid.n, 2 * grid.n))
    for s, L in local_mf_all(b.values, grid, max(wanted)):
        if s not in wanted:
            continue
        dev = np.abs(_windows(b.values, s, grid.n) - L)
        val = dev.mean(axis=k_axes) if q == 1 else np.mean(dev ** q, axis=k_axes) ** (1 / q)
        sup.offer(s, val * (s * grid.h) ** (-beta))
    return sup.result(argmax)


def negativity_defect(b: GridFunction, beta: float, scales: ScaleSet | None = None, argmax: bool = False):
    """``sup_Q |Q|**(-beta/n) mean_Q b^-`` with ``b^- = -min(b, 0)``."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    grid = b.grid
    scales = _resolve(scales, grid)
    neg = -np.minimum(b.values, 0.0)
    sup = _CubeSup(grid.n, grid.N)
    for s in scales.sides:
        mean = window_sums(neg, s, grid.n) / s ** grid.n
        sup.offer(s, mean * (s * grid.h) ** (-beta))
    return sup.result(argmax)
