"""Refinement scans, empirical operator-norm lower bounds and theorem suites.

A scan samples a symbol family on grids ``N in grid_sizes`` (unit cube,
``h = 1/N``), evaluates a functional on each grid and fits the growth
exponent ``d log(value) / d log(N)`` by least squares.  A slope below
``bounded_slope`` reads as bounded, above ``diverging_slope`` (default
``beta/2``) as diverging, anything between as inconclusive.

Operator norms reported here are lower bounds over a finite dictionary of
test functions.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from . import __version__
from .grid import (Cube, Exponents, FunctionFamily, Grid, GridFunction, average, enumerate_cubes,
                   make_grid, sample)
from .norms import (distribution, lipschitz_oscillation, lp_norm_batch, morrey_norm_batch,
                    mq_deviation, negativity_defect, weak_constant, bmo_norm)
from .operators import (ScaleSet, commutator_kernel, maximal_commutator, maximal_kernel,
                        nonlinear_commutator, nonlinear_kernel)

THREADS_ENV = "LIPMAX_THREADS"


def default_threads() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


# ---------------------------------------------------------------------------
# Operators and dictionaries


@dataclass(frozen=True)
class OperatorSpec:
    kind: str
    symbol: GridFunction | None = None
    alpha: float | None = None
    scales: ScaleSet | None = None

    KINDS = ("M", "frac_M", "M_b", "nonlinear")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind in ("M_b", "nonlinear") and self.symbol is None:
            raise ValueError(f"operator {self.kind} needs a symbol")
        if self.kind == "frac_M" and self.alpha is None:
            raise ValueError("frac_M needs alpha")

    def apply(self, F: np.ndarray, grid: Grid) -> np.ndarray:
        if self.symbol is not None and self.symbol.grid != grid:
            raise ValueError("operator symbol lives on a different grid")
        sides = (self.scales or ScaleSet.exhaustive(grid.N)).sides
        if self.kind == "M":
            return maximal_kernel(F, grid, sides)
        if self.kind == "frac_M":
            return maximal_kernel(F, grid, sides, self.alpha)
        if self.kind == "M_b":
            return commutator_kernel(self.symbol.values, F, grid, sides)
        return nonlinear_kernel(self.symbol.values, F, grid, sides)


@dataclass(frozen=True, eq=False)
class Dictionary:
    grid: Grid
    labels: tuple[str, ...]
    functions: np.ndarray

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("test-function dictionary must be nonempty")
        if self.functions.shape != (len(self.labels),) + self.grid.shape:
            raise ValueError("dictionary shape does not match its labels and grid")
        if np.any(np.all(self.functions.reshape(len(self.labels), -1) == 0, axis=1)):
            raise ValueError("dictionary members must be nonzero")

    @classmethod
    def from_functions(cls, fs: list[GridFunction], labels: list[str] | None = None) -> "Dictionary":
        if not fs:
            raise ValueError("test-function dictionary must be nonempty")
        labels = labels or [f"f{i}" for i in range(len(fs))]
        return cls(fs[0].grid, tuple(labels), np.stack([f.values for f in fs]))


def indicator_dictionary(grid: Grid, scales: ScaleSet | None = None) -> Dictionary:
    sides = (scales or ScaleSet.exhaustive(grid.N)).sides
    cubes = list(enumerate_cubes(grid, sides))
    F = np.zeros((len(cubes),) + grid.shape)
    for i, Q in enumerate(cubes):
        F[(i,) + Q.slices] = 1.0
    return Dictionary(grid, tuple(f"chi[{Q}]" for Q in cubes), F)


def default_dictionary(grid: Grid, seed: int = 0, random: int = 32) -> Dictionary:
    """All cube indicators plus ``random`` seeded smooth positive functions."""
    ind = indicator_dictionary(grid)
    rnd = [sample(FunctionFamily("random_smooth", {"positive": True, "modes": 4}, seed + i), grid)
           for i in range(random)]
    labels = ind.labels + tuple(f"random[{seed + i}]" for i in range(random))
    F = np.concatenate([ind.functions] + [f.values[None] for f in rnd]) if rnd else ind.functions
    return Dictionary(grid, labels, F)


def operator_norm_lower(spec: OperatorSpec, p: float, q: float, dictionary: Dictionary,
                        argmax: bool = False):
    """``max_f ||T f||_q / ||f||_p`` over the dictionary (a lower bound)."""
    grid = dictionary.grid
    F = dictionary.functions
    ratios = lp_norm_batch(spec.apply(F, grid), grid, q) / lp_norm_batch(F, grid, p)
    i = int(np.argmax(ratios))
    return (float(ratios[i]), dictionary.labels[i]) if argmax else float(ratios[i])


def morrey_norm_lower(spec: OperatorSpec, exps: Exponents, regime: str, dictionary: Dictionary,
                      argmax: bool = False):
    """``max_f ||T f||_{L^{q,lam_out}} / ||f||_{L^{p,lam}}`` over the dictionary.

    ``lam_out`` is ``lam`` for regime ``"A"`` and ``mu`` for regime ``"B"``.
    """
    if regime not in ("A", "B"):
        raise ValueError(f"Morrey regime must be 'A' or 'B', got {regime!r}")
    exps.check(regime)
    grid = dictionary.grid
    sides = (spec.scales or ScaleSet.exhaustive(grid.N)).sides
    F = dictionary.functions
    lam_out = exps.lam if regime == "A" else exps.mu
    top, _ = morrey_norm_batch(spec.apply(F, grid), grid, exps.q, lam_out, sides)
    bottom, _ = morrey_norm_batch(F, grid, exps.p, exps.lam, sides)
    ratios = top / bottom
    i = int(np.argmax(ratios))
    return (float(ratios[i]), dictionary.labels[i]) if argmax else float(ratios[i])


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class ScanConfig:
    """Everything a scan needs; round-trips through :meth:`to_dict`."""

    family: FunctionFamily
    exponents: Exponents
    grid_sizes: list[int]
    theorem: str | None = None
    functional: str | None = None
    scale_mode: str = "all"
    functional_q: float = 1.0
    mass_point: list[float] | None = None
    dictionary_seed: int = 0
    dictionary_random: int = 32
    tolerances: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if (self.theorem is None) == (self.functional is None):
            raise ValueError("scan config needs exactly one of 'theorem' or 'functional'")
        if self.theorem is not None and self.theorem not in THEOREMS:
            raise ValueError(f"unknown theorem id {self.theorem!r}; known: {', '.join(THEOREMS)}")
        if self.functional is not None and self.functional not in FUNCTIONALS:
            raise ValueError(f"unknown functional {self.functional!r}; known: {', '.join(FUNCTIONALS)}")
        self.grid_sizes = [int(N) for N in self.grid_sizes]
        if not self.grid_sizes or any(b <= a for a, b in zip(self.grid_sizes, self.grid_sizes[1:])):
            raise ValueError(f"grid sizes must be nonempty and strictly increasing, got {self.grid_sizes}")
        if self.scale_mode not in ("all", "geo"):
            raise ValueError(f"unknown scale mode {self.scale_mode!r}")

    @property
    def n(self) -> int:
        return self.exponents.n

    @property
    def beta(self) -> float:
        return self.exponents.beta

    @property
    def seed(self) -> int | None:
        return self.family.seed

    @property
    def bounded_slope(self) -> float:
        return float(self.tolerances.get("bounded_slope", 0.05))

    @property
    def diverging_slope(self) -> float:
        return float(self.tolerances.get("diverging_slope", self.beta / 2))

    @property
    def weak_ratio(self) -> float:
        return float(self.tolerances.get("weak_ratio", 3.0))

    def to_dict(self) -> dict[str, Any]:
        return {
            "theorem": self.theorem,
            "functional": self.functional,
            "family": self.family.to_dict(),
            "exponents": self.exponents.to_dict(),
            "grid_sizes": list(self.grid_sizes),
            "scale_mode": self.scale_mode,
            "functional_q": self.functional_q,
            "mass_point": self.mass_point,
            "dictionary_seed": self.dictionary_seed,
            "dictionary_random": self.dictionary_random,
            "tolerances": dict(self.tolerances),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScanConfig":
        known = {"theorem", "functional", "family", "exponents", "grid_sizes", "scale_mode",
                 "functional_q", "mass_point", "dictionary_seed", "dictionary_random", "tolerances"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scan config keys: {sorted(unknown)}")
        return cls(
            family=FunctionFamily.from_dict(d["family"]),
            exponents=Exponents.from_dict(d["exponents"]),
            grid_sizes=list(d["grid_sizes"]),
            theorem=d.get("theorem"),
            functional=d.get("functional"),
            scale_mode=d.get("scale_mode", "all"),
            functional_q=float(d.get("functional_q", 1.0)),
            mass_point=d.get("mass_point"),
            dictionary_seed=int(d.get("dictionary_seed", 0)),
            dictionary_random=int(d.get("dictionary_random", 32)),
            tolerances=dict(d.get("tolerances", {})),
        )


# ---------------------------------------------------------------------------
# Functionals of a sampled symbol


def single_cell_mass(grid: Grid, point=None) -> GridFunction:
    """Unit-mass function on the cell containing ``point`` (default: domain center)."""
    point = np.full(grid.n, grid.side_length / 2) if point is None else np.asarray(point, float)
    idx = tuple(int(min(grid.N - 1, max(0, math.floor(c / grid.h)))) for c in point)
    values = np.zeros(grid.shape)
    values[idx] = 1.0 / grid.cell_volume
    return GridFunction(grid, values)


def _scales(cfg: ScanConfig, grid: Grid) -> ScaleSet:
    return ScaleSet.from_mode(cfg.scale_mode, grid.N)


def _cube_sup(fn):
    def run(b: GridFunction, cfg: ScanConfig):
        value, cube = fn(b, cfg)
        return value, None if cube is None else str(cube)
    return run


def _dictionary(cfg: ScanConfig, grid: Grid) -> Dictionary:
    return default_dictionary(grid, cfg.dictionary_seed, cfg.dictionary_random)


def _opnorm(kind: str, p_of, q_of):
    def run(b: GridFunction, cfg: ScanConfig):
        spec = OperatorSpec(kind, b, scales=_scales(cfg, b.grid))
        return operator_norm_lower(spec, p_of(cfg), q_of(cfg), _dictionary(cfg, b.grid), argmax=True)
    return run


def _morrey(kind: str, regime: str):
    def run(b: GridFunction, cfg: ScanConfig):
        spec = OperatorSpec(kind, b, scales=_scales(cfg, b.grid))
        return morrey_norm_lower(spec, cfg.exponents, regime, _dictionary(cfg, b.grid), argmax=True)
    return run


def _weak(op):
    def run(b: GridFunction, cfg: ScanConfig):
        f = single_cell_mass(b.grid, cfg.mass_point)
        return weak_constant(op(b, f, _scales(cfg, b.grid)), f, cfg.beta), None
    return run


Functional = Callable[[GridFunction, ScanConfig], tuple[float, Any]]

FUNCTIONALS: dict[str, Functional] = {
    "lipschitz_oscillation": _cube_sup(lambda b, c: lipschitz_oscillation(
        b, c.beta, c.functional_q, _scales(c, b.grid), argmax=True)),
    "mq_deviation": _cube_sup(lambda b, c: mq_deviation(
        b, c.beta, c.functional_q, _scales(c, b.grid), argmax=True)),
    "negativity_defect": _cube_sup(lambda b, c: negativity_defect(
        b, c.beta, _scales(c, b.grid), argmax=True)),
    "bmo_norm": _cube_sup(lambda b, c: bmo_norm(b, _scales(c, b.grid), argmax=True)),
    "weak_constant_mb": _weak(maximal_commutator),
    "weak_constant_nonlinear": _weak(nonlinear_commutator),
    "opnorm_mb_lebesgue": _opnorm("M_b", lambda c: c.exponents.p, lambda c: c.exponents.q),
    "opnorm_mb_endpoint": _opnorm("M_b", lambda c: c.n / c.beta, lambda c: math.inf),
    "opnorm_nonlinear_lebesgue": _opnorm("nonlinear", lambda c: c.exponents.p, lambda c: c.exponents.q),
    "morrey_mb_A": _morrey("M_b", "A"),
    "morrey_mb_B": _morrey("M_b", "B"),
    "morrey_nonlinear_A": _morrey("nonlinear", "A"),
    "morrey_nonlinear_B": _morrey("nonlinear", "B"),
}

WEAK_TYPE = {"weak_constant_mb", "weak_constant_nonlinear"}

LOWER_BOUNDS = {name for name in FUNCTIONALS if name.startswith(("opnorm", "morrey"))}


# ---------------------------------------------------------------------------
# Reports


@dataclass
class ScanItem:
    item: str
    functional: str
    label: str
    grid_sizes: list[int]
    values: list[float]
    argmax: list[str | None]
    slope: float | None = None
    residual: float | None = None
    classification: str = "inconclusive"

    @property
    def lower_bound(self) -> bool:
        return self.functional in LOWER_BOUNDS

    @property
    def holds(self) -> bool | None:
        return {"bounded": True, "diverging": False}.get(self.classification)

    def to_dict(self) -> dict[str, Any]:
        d = {
            "item": self.item,
            "functional": self.functional,
            "label": self.label,
            "lower_bound": self.lower_bound,
            "series": [{"N": N, "value": v, "argmax": a}
                       for N, v, a in zip(self.grid_sizes, self.values, self.argmax)],
        }
        if self.slope is not None:
            d["slope"] = self.slope
            d["residual"] = self.residual
        d["classification"] = self.classification
        return d


@dataclass
class ScanReport:
    config: ScanConfig
    items: list[ScanItem]
    flags: dict[str, bool | None] = field(default_factory=dict)
    consistent: bool | None = None

    def item(self, name: str) -> ScanItem:
        for it in self.items:
            if it.item == name:
                return it
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        grids = [make_grid(self.config.n, N).describe() for N in self.config.grid_sizes]
        return {
            "config": self.config.to_dict(),
            "results": {
                "grids": grids,
                "items": [it.to_dict() for it in self.items],
                "flags": dict(self.flags),
                "consistent": self.consistent,
            },
            "provenance": {"tool": "lipmax", "version": __version__, "seed": self.config.seed},
        }


def fit_slope(Ns, values) -> tuple[float | None, float | None]:
    """Least-squares slope of ``log(value)`` against ``log(N)`` and its RMS residual."""
    if len(Ns) < 3:
        return None, None
    v = np.asarray(values, dtype=float)
    if np.all(v == 0):
        return 0.0, 0.0
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        return None, None
    x, y = np.log(np.asarray(Ns, float)), np.log(v)
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return float(coef[0]), float(np.sqrt(np.mean(resid ** 2)))


def classify(slope: float | None, cfg: ScanConfig, functional: str | None = None, values=None) -> str:
    """Bounded / diverging / inconclusive from the fitted slope.

    Weak-type constants on a single-cell mass approach their limit slowly from
    below, so they count as bounded when ``max/min < weak_ratio`` instead.
    """
    if functional in WEAK_TYPE and values is not None and min(values) > 0:
        if max(values) / min(values) < cfg.weak_ratio:
            return "bounded"
    if slope is None:
        return "inconclusive"
    if slope < cfg.bounded_slope:
        return "bounded"
    if slope > cfg.diverging_slope:
        return "diverging"
    return "inconclusive"


def _evaluate(task):
    name, cfg, N = task
    b = sample(cfg.family, make_grid(cfg.n, N))
    value, where = FUNCTIONALS[name](b, cfg)
    return float(value), where


def _run_items(cfg: ScanConfig, items: list[tuple[str, str, str]], threads: int | None) -> list[ScanItem]:
    tasks = [(fn, cfg, N) for _, fn, _ in items for N in cfg.grid_sizes]
    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_evaluate, tasks))
    else:
        results = [_evaluate(t) for t in tasks]
    out = []
    k = len(cfg.grid_sizes)
    for i, (item, fn, label) in enumerate(items):
        chunk = results[i * k:(i + 1) * k]
        values = [v for v, _ in chunk]
        slope, resid = fit_slope(cfg.grid_sizes, values)
        out.append(ScanItem(item, fn, label, list(cfg.grid_sizes), values,
                            [None if w is None else str(w) for _, w in chunk],
                            slope, resid, classify(slope, cfg, fn, values)))
    return out


def refinement_scan(family: FunctionFamily, functional: str, Ns, exps: Exponents,
                    threads: int | None = None, **options) -> ScanReport:
    """Evaluate ``functional`` on ``family`` sampled at each ``N`` and fit the growth slope."""
    Ns = list(Ns)
    if len(Ns) < 3:
        raise ValueError(f"refinement scan needs at least 3 grid sizes, got {len(Ns)}")
    cfg = ScanConfig(family, exps, Ns, functional=functional, **options)
    return run_config(cfg, threads)


# ---------------------------------------------------------------------------
# Theorem suites

LIP = ("(1)", "lipschitz_oscillation", "b Lipschitz: normalized mean oscillation bounded")
NONNEG = ("(1b)", "negativity_defect", "b >= 0: negativity defect bounded")
LIP_NONNEG = ("(1a)",) + LIP[1:]

THEOREMS: dict[str, dict[str, Any]] = {
    "1.2": {"regime": "lebesgue", "kind": "equivalence", "items": [
        LIP,
        ("(2)-(3)", "opnorm_mb_lebesgue", "M_b: L^p -> L^q bounded"),
        ("(4)", "weak_constant_mb", "M_b weak type (1, n/(n-beta)) on a single-cell mass"),
        ("(5)", "opnorm_mb_endpoint", "M_b: L^(n/beta) -> L^inf bounded"),
    ]},
    "1.4": {"regime": "A", "kind": "equivalence", "items": [
        LIP, ("(2)", "morrey_mb_A", "M_b: L^(p,lam) -> L^(q,lam) bounded")]},
    "1.5": {"regime": "B", "kind": "equivalence", "items": [
        LIP, ("(2)", "morrey_mb_B", "M_b: L^(p,lam) -> L^(q,mu) bounded")]},
    "1.6": {"regime": "lebesgue", "kind": "equivalence", "items": [
        LIP_NONNEG, NONNEG,
        ("(2)", "opnorm_nonlinear_lebesgue", "[b,M]: L^p -> L^q bounded"),
        ("(3)", "mq_deviation", "normalized deviation of b from M_Q(b) bounded"),
    ]},
    "1.7": {"regime": "lebesgue", "kind": "implication", "items": [
        LIP_NONNEG, NONNEG,
        ("(weak)", "weak_constant_nonlinear", "[b,M] weak type (1, n/(n-beta)) on a single-cell mass"),
    ]},
    "1.8": {"regime": "A", "kind": "equivalence", "items": [
        LIP_NONNEG, NONNEG, ("(2)", "morrey_nonlinear_A", "[b,M]: L^(p,lam) -> L^(q,lam) bounded")]},
    "1.9": {"regime": "B", "kind": "equivalence", "items": [
        LIP_NONNEG, NONNEG, ("(2)", "morrey_nonlinear_B", "[b,M]: L^(p,lam) -> L^(q,mu) bounded")]},
}


def _and(*flags):
    if any(f is False for f in flags):
        return False
    if any(f is None for f in flags):
        return None
    return True


def _flags(theorem: str, items: list[ScanItem]) -> tuple[dict[str, bool | None], bool | None]:
    by = {it.item: it.holds for it in items}
    if "(1b)" in by:
        by["(1)"] = _and(by["(1a)"], by["(1b)"])
    statements = [k for k in by if k not in ("(1a)", "(1b)")]
    flags = {k: by[k] for k in sorted(by)}
    if THEOREMS[theorem]["kind"] == "implication":
        premise, conclusion = by["(1)"], by["(weak)"]
        consistent = None if premise is None or conclusion is None else (not premise or conclusion)
        return flags, consistent
    vals = [by[k] for k in statements]
    known = [v for v in vals if v is not None]
    if len(set(known)) > 1:
        return flags, False
    return flags, None if len(known) < len(vals) else True


def theorem_suite(theorem: str, config: ScanConfig, threads: int | None = None) -> ScanReport:
    """Run the desk-scale checks for one theorem on the symbol family of ``config``."""
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem id {theorem!r}; known: {', '.join(THEOREMS)}")
    spec = THEOREMS[theorem]
    config.exponents.check(spec["regime"])
    items = _run_items(config, spec["items"], threads)
    flags, consistent = _flags(theorem, items)
    return ScanReport(config, items, flags, consistent)


def run_config(cfg: ScanConfig, threads: int | None = None) -> ScanReport:
    if cfg.theorem is not None:
        return theorem_suite(cfg.theorem, cfg, threads)
    items = _run_items(cfg, [("scan", cfg.functional, cfg.functional)], threads)
    return ScanReport(cfg, items, {"scan": items[0].holds}, None)


# ---------------------------------------------------------------------------
# Layer-cake check


def layer_cake_check(b: GridFunction, Q: Cube, beta: float = 0.5) -> dict[str, Any]:
    """Compare ``int_Q |b - b_Q|`` with the layer-cake integral of its distribution
    function, and with the split bound at ``t = |Q|**(beta/n)``.

    The split bound is ``t |Q| + C |Q|**g t**(1-g) / (g - 1)``, ``g = n/(n-beta)``,
    with ``C`` the smallest weak-type constant of ``M_b(chi_Q)`` on ``Q``.  Since
    ``|b - b_Q| <= M_b(chi_Q)`` on ``Q`` the bound dominates the integral.
    """
    grid = b.grid
    Q.check(grid)
    n = grid.n
    mask = np.zeros(grid.shape, dtype=bool)
    mask[Q.slices] = True
    dev = b.like(np.where(mask, np.abs(b.values - average(b, Q)), 0.0))
    direct = float(np.sum(dev.values[Q.slices]) * grid.cell_volume)
    layer = distribution(dev).integral()
    meas = Q.measure(grid)
    chi = b.like(mask.astype(float))
    g = n / (n - beta)
    mb = b.like(np.where(mask, maximal_commutator(b, chi).values, 0.0))
    C = weak_constant(mb, chi, beta) ** g
    t = meas ** (beta / n)
    split = t * meas + C * meas ** g * t ** (1 - g) / (g - 1)
    return {
        "cube": str(Q),
        "direct": direct,
        "layer_cake": layer,
        "exact": math.isclose(direct, layer, rel_tol=1e-12, abs_tol=1e-300),
        "t": t,
        "weak_constant": C,
        "split_bound": split,
        "dominated": direct <= split * (1 + 1e-12),
    }
