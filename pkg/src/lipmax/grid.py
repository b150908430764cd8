"""Discretized cube domains, sub-cubes, grid functions and exponent bundles.

A ``Grid`` is ``N**n`` cells of side ``h``; every function lives on cell
centers.  Cubes are axis-aligned blocks of whole cells that never leave the
domain.  Values are stored as read-only ``numpy`` arrays of shape ``(N,)*n``
(row-major, last axis fastest).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping

import numpy as np

REL_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    n: int
    N: int
    h: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"dimension n must be a positive integer, got {self.n!r}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"cells per axis N must be a positive integer, got {self.N!r}")
        h = 1.0 / self.N if self.h is None else float(self.h)
        if not (h > 0 and math.isfinite(h)):
            raise ValueError(f"spacing h must be positive, got {self.h!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "h", h)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def cell_count(self) -> int:
        return self.N ** self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def measure(self) -> float:
        return (self.N * self.h) ** self.n

    @property
    def side_length(self) -> float:
        return self.N * self.h

    def cube_measure(self, s: int) -> float:
        return (s * self.h) ** self.n

    def axis_centers(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """Cell centers, shape ``(N,)*n + (n,)``."""
        axes = np.meshgrid(*([self.axis_centers()] * self.n), indexing="ij")
        return np.stack(axes, axis=-1)

    def whole(self) -> "Cube":
        return Cube((0,) * self.n, self.N)

    def describe(self) -> dict[str, Any]:
        return {"n": self.n, "N": self.N, "h": self.h}


def make_grid(n: int, N: int, h: float | None = None) -> Grid:
    """Grid of ``N**n`` cells; ``h`` defaults to ``1/N`` (unit cube)."""
    return Grid(n, N, h)


@dataclass(frozen=True)
class Cube:
    offset: tuple[int, ...]
    side: int

    def __post_init__(self):
        object.__setattr__(self, "offset", tuple(int(o) for o in self.offset))
        if int(self.side) < 1:
            raise ValueError(f"cube side must be >= 1, got {self.side}")
        object.__setattr__(self, "side", int(self.side))

    @property
    def n(self) -> int:
        return len(self.offset)

    @property
    def cell_count(self) -> int:
        return self.side ** self.n

    def measure(self, grid: Grid) -> float:
        return grid.cube_measure(self.side)

    def check(self, grid: Grid) -> None:
        if self.n != grid.n:
            raise ValueError(f"cube {self} has dimension {self.n}, grid has {grid.n}")
        if self.side > grid.N or any(o < 0 or o + self.side > grid.N for o in self.offset):
            raise ValueError(f"cube {self} does not fit in a grid with N={grid.N}")

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(o, o + self.side) for o in self.offset)

    def contains(self, index: Iterable[int]) -> bool:
        return all(o <= i < o + self.side for o, i in zip(self.offset, index))

    def __str__(self) -> str:
        return ",".join(str(o) for o in self.offset) + f":{self.side}"

    @classmethod
    def parse(cls, text: str) -> "Cube":
        """Parse the literal ``"o0,o1,...:s"``."""
        try:
            offsets, side = text.strip().split(":")
            return cls(tuple(int(t) for t in offsets.split(",")), int(side))
        except ValueError as exc:
            raise ValueError(f"bad cube literal {text!r}; expected 'o0,o1,...:s'") from exc


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.size != self.grid.cell_count:
            raise ValueError(
                f"expected {self.grid.cell_count} values for grid {self.grid.describe()}, got {arr.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid function values must be finite")
        arr = arr.reshape(self.grid.shape)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def like(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def restrict(self, Q: Cube) -> "GridFunction":
        """The values on ``Q`` as a function on an ``s**n`` grid with the same spacing."""
        Q.check(self.grid)
        return GridFunction(Grid(self.grid.n, Q.side, self.grid.h), self.values[Q.slices])

    def __eq__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


def same_grid(*fs: GridFunction) -> Grid:
    grid = fs[0].grid
    for g in fs[1:]:
        if g.grid != grid:
            raise ValueError(f"grid mismatch: {grid.describe()} vs {g.grid.describe()}")
    return grid


def indicator(Q: Cube, grid: Grid) -> GridFunction:
    Q.check(grid)
    values = np.zeros(grid.shape)
    values[Q.slices] = 1.0
    return GridFunction(grid, values)


def average(f: GridFunction, Q: Cube) -> float:
    """Mean of ``f`` over ``Q``.

    Computed as ``sum / cell_count``, which equals ``sum * h**n / |Q|`` but is
    exact for indicator data.
    """
    Q.check(f.grid)
    return float(np.sum(f.values[Q.slices]) / Q.cell_count)


def enumerate_cubes(grid: Grid, scales: Iterable[int] | None = None) -> Iterator[Cube]:
    """All contained cubes with side in ``scales``, by side then row-major offset."""
    sides = sorted(set(range(1, grid.N + 1) if scales is None else scales))
    if not sides:
        raise ValueError("scale set must be nonempty")
    for s in sides:
        if not 1 <= s <= grid.N:
            raise ValueError(f"scale {s} outside [1, {grid.N}]")
    for s in sides:
        for offset in itertools.product(range(grid.N - s + 1), repeat=grid.n):
            yield Cube(offset, s)


def cube_count(grid: Grid, scales: Iterable[int]) -> int:
    return sum((grid.N - s + 1) ** grid.n for s in set(scales))


# ---------------------------------------------------------------------------
# Function families


FAMILIES = ("constant", "affine", "power", "cone_min", "log", "random_smooth")


@dataclass(frozen=True)
class FunctionFamily:
    """A named, parameterized function on the physical domain.

    Parameters are given in physical coordinates so that the same family can
    be sampled on successively finer grids.  Anything not fixed by ``params``
    and needing randomness is drawn from ``seed``.
    """

    name: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise ValueError(f"unknown function family {self.name!r}; known: {', '.join(FAMILIES)}")
        object.__setattr__(self, "params", dict(self.params))
        beta = self.params.get("beta")
        if beta is not None and not 0 < beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {beta}")
        if self.name == "random_smooth" and self.seed is None:
            raise ValueError("random_smooth family requires a seed")
        if self.name == "cone_min" and "anchors" not in self.params and self.seed is None:
            raise ValueError("cone_min family without explicit anchors requires a seed")

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "params": _jsonable(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FunctionFamily":
        return cls(d["name"], d.get("params", {}), d.get("seed"))


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _point(value, n: int, default: float) -> np.ndarray:
    if value is None:
        return np.full(n, default)
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(n, arr.item())
    if arr.size != n:
        raise ValueError(f"point {value!r} has wrong dimension for n={n}")
    return arr


def cone_min_parameters(family: FunctionFamily, n: int, side: float = 1.0):
    """Resolve (anchors, offsets, K, beta) for a cone-min family."""
    p = family.params
    beta = p.get("beta", 0.5)
    K = float(p.get("K", 1.0))
    rng = np.random.default_rng(family.seed)
    m = int(p.get("m", 3))
    if "anchors" in p:
        anchors = np.asarray(p["anchors"], dtype=float).reshape(-1, n)
    else:
        anchors = rng.uniform(0.0, side, size=(m, n))
    if "offsets" in p:
        offsets = np.asarray(p["offsets"], dtype=float).reshape(-1)
    else:
        offsets = rng.uniform(0.0, 1.0, size=len(anchors))
    if len(offsets) != len(anchors):
        raise ValueError("cone_min needs one offset per anchor")
    return anchors, offsets, K, beta


def sample(family: FunctionFamily, grid: Grid) -> GridFunction:
    """Evaluate ``family`` at the cell centers of ``grid``.

    Families:

    ``constant``       ``value``
    ``affine``         ``coef . x + intercept``
    ``power``          ``scale * |x - x0|**beta``
    ``cone_min``       ``min_i (c_i + K |x - a_i|**beta) + shift``
    ``log``            ``amplitude * log(max(|x - x0|, h)) + offset``
    ``random_smooth``  random cosine series, ``exp`` of it if ``positive``
    """
    p = family.params
    n = grid.n
    x = grid.centers()
    side = grid.side_length
    if family.name == "constant":
        values = np.full(grid.shape, float(p.get("value", 1.0)))
    elif family.name == "affine":
        coef = _point(p.get("coef"), n, 1.0)
        values = x @ coef + float(p.get("intercept", 0.0))
    elif family.name == "power":
        x0 = _point(p.get("x0"), n, side / 2)
        r = np.linalg.norm(x - x0, axis=-1)
        values = float(p.get("scale", 1.0)) * r ** p.get("beta", 0.5)
    elif family.name == "cone_min":
        anchors, offsets, K, beta = cone_min_parameters(family, n, side)
        cones = [c + K * np.linalg.norm(x - a, axis=-1) ** beta for a, c in zip(anchors, offsets)]
        values = np.min(cones, axis=0) + float(p.get("shift", 0.0))
    elif family.name == "log":
        if "x0" in p:
            x0 = _point(p["x0"], n, 0.0)
        else:
            x0 = np.random.default_rng(family.seed).uniform(0.0, side, size=n)
        r = np.maximum(np.linalg.norm(x - x0, axis=-1), grid.h)
        values = float(p.get("amplitude", 1.0)) * np.log(r) + float(p.get("offset", 0.0))
    else:  # random_smooth
        rng = np.random.default_rng(family.seed)
        modes = int(p.get("modes", 4))
        values = np.zeros(grid.shape)
        for k in range(1, modes + 1):
            freq = rng.integers(-k, k + 1, size=n)
            freq[rng.integers(n)] = k
            phase = rng.uniform(0, 2 * np.pi)
            values += rng.normal() / k * np.cos(2 * np.pi * (x @ freq) / side + phase)
        values = values * float(p.get("scale", 1.0))
        if p.get("positive", False):
            values = np.exp(values)
    return GridFunction(grid, values)


# ---------------------------------------------------------------------------
# Exponents


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=REL_TOL)


def _inv(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


@dataclass(frozen=True)
class Exponents:
    """Exponent bundle; the ``lebesgue``/``morrey_a``/``morrey_b`` helpers solve
    for ``q`` (and ``mu``) from the index relations."""

    n: int
    beta: float
    p: float
    q: float
    lam: float = 0.0
    mu: float = 0.0
    alpha: float | None = None

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        for name in ("p", "q"):
            v = getattr(self, name)
            if not v >= 1:
                raise ValueError(f"{name} must lie in [1, inf], got {v}")
        for name in ("lam", "mu"):
            v = getattr(self, name)
            if not 0 <= v <= self.n:
                raise ValueError(f"{name} must lie in [0, n], got {v}")
        if self.alpha is not None and not 0 < self.alpha < self.n:
            raise ValueError(f"alpha must lie in (0, n), got {self.alpha}")

    @property
    def p_conjugate(self) -> float:
        return math.inf if self.p == 1 else self.p / (self.p - 1)

    @classmethod
    def lebesgue(cls, n: int, beta: float, p: float) -> "Exponents":
        e = cls(n, beta, p, _from_inverse(1 / p - beta / n))
        e.check_lebesgue()
        return e

    @classmethod
    def morrey_a(cls, n: int, beta: float, p: float, lam: float) -> "Exponents":
        e = cls(n, beta, p, _from_inverse(1 / p - beta / (n - lam)), lam=lam, mu=lam)
        e.check_morrey_a()
        return e

    @classmethod
    def morrey_b(cls, n: int, beta: float, p: float, lam: float) -> "Exponents":
        q = _from_inverse(1 / p - beta / n)
        e = cls(n, beta, p, q, lam=lam, mu=lam * q / p)
        e.check_morrey_b()
        return e

    def check_lebesgue(self) -> None:
        n, beta, p = self.n, self.beta, self.p
        if not 1 < p < n / beta:
            raise ValueError(f"need 1 < p < n/beta = {n / beta}, got p = {p}")
        if not _close(_inv(self.q), 1 / p - beta / n):
            raise ValueError(f"need 1/q = 1/p - beta/n; got q = {self.q}")

    def check_morrey_a(self) -> None:
        n, beta, p, lam = self.n, self.beta, self.p, self.lam
        if not 1 < p < n / beta:
            raise ValueError(f"need 1 < p < n/beta = {n / beta}, got p = {p}")
        if not 0 < lam < n - beta * p:
            raise ValueError(f"need 0 < lambda < n - beta*p = {n - beta * p}, got {lam}")
        if not _close(_inv(self.q), 1 / p - beta / (n - lam)):
            raise ValueError(f"need 1/q = 1/p - beta/(n - lambda); got q = {self.q}")

    def check_morrey_b(self) -> None:
        n, beta, p, lam = self.n, self.beta, self.p, self.lam
        if not 1 < p < n / beta:
            raise ValueError(f"need 1 < p < n/beta = {n / beta}, got p = {p}")
        if not 0 < lam < n - beta * p:
            raise ValueError(f"need 0 < lambda < n - beta*p = {n - beta * p}, got {lam}")
        if not _close(_inv(self.q), 1 / p - beta / n):
            raise ValueError(f"need 1/q = 1/p - beta/n; got q = {self.q}")
        if not _close(lam / p, self.mu / self.q):
            raise ValueError(f"need lambda/p = mu/q; got {lam / p} vs {self.mu / self.q}")

    def check(self, regime: str) -> None:
        checks = {"lebesgue": self.check_lebesgue, "A": self.check_morrey_a, "B": self.check_morrey_b}
        if regime not in checks:
            raise ValueError(f"unknown exponent regime {regime!r}")
        checks[regime]()

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n, "beta": self.beta, "p": self.p, "q": self.q,
            "lam": self.lam, "mu": self.mu, "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Exponents":
        return cls(
            int(d["n"]), float(d["beta"]), float(d["p"]), float(d["q"]),
            float(d.get("lam", 0.0)), float(d.get("mu", 0.0)),
            None if d.get("alpha") is None else float(d["alpha"]),
        )


def _from_inverse(inv: float) -> float:
    if inv < 0:
        raise ValueError(f"exponent relation gives 1/q = {inv} < 0")
    return math.inf if inv == 0 else 1.0 / inv
