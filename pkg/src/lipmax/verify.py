"""Desk-scale verification suite.

Each check returns an :class:`Outcome`; ``run`` executes a selection and
reports one line per check.  Checks 1-11 are the acceptance criteria: 1-7
and the two named extras are exact invariants (``verify``), 8-11 are
refinement scans (``verify --all``).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fixtures
from .grid import GridFunction, enumerate_cubes, indicator, make_grid, sample
from .norms import lipschitz_pairwise, morrey_norm, weak_constant
from .operators import frac_mf, local_mf, maximal_commutator, mf_brute, mf_fast, nonlinear_commutator
from .report_io import write_report
from .scan import ScanConfig, layer_cake_check, refinement_scan, single_cell_mass, theorem_suite

RTOL = 1e-12
NS = [8, 16, 32, 64]


@dataclass
class Outcome:
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass(frozen=True)
class Check:
    id: str
    title: str
    fn: Callable[[], Outcome]
    budget: float
    scan: bool = False

    def run(self) -> Outcome:
        start = time.perf_counter()
        out = self.fn()
        out.seconds = time.perf_counter() - start
        if out.seconds > self.budget:
            out.passed = False
            out.detail += f"; runtime {out.seconds:.1f}s exceeds {self.budget:.0f}s"
        return out


def _random(grid, seed: int, nonneg: bool = False) -> GridFunction:
    v = np.random.default_rng(seed).normal(size=grid.shape)
    return GridFunction(grid, np.abs(v) if nonneg else v)


def check_oracle_equivalence() -> Outcome:
    worst = 0.0
    exact = 0
    total = 0
    for n, N in [(1, 64), (2, 16)]:
        grid = make_grid(n, N)
        for seed in range(200):
            f = _random(grid, seed)
            brute, fast = mf_brute(f).values, mf_fast(f).values
            worst = max(worst, float(np.max(np.abs(fast - brute) / np.abs(brute))))
            exact += int(np.array_equal(fast, brute))
            total += 1
    return Outcome(worst <= RTOL, f"max relative difference {worst:.2e} ({exact}/{total} bit-identical)")


def check_hand_fixtures() -> Outcome:
    f, b = fixtures.f4(), fixtures.b4()
    m = mf_brute(f).values
    mb = maximal_commutator(b, f).values
    lc = layer_cake_check(b, make_grid(1, 4, 0.25).whole())
    ok = (np.allclose(m, fixtures.MF_F4, rtol=RTOL, atol=0)
          and np.allclose(mb, fixtures.MB_B4_F4, rtol=RTOL, atol=RTOL)
          and math.isclose(lc["direct"], 1.0, rel_tol=RTOL)
          and math.isclose(lc["layer_cake"], 1.0, rel_tol=RTOL))
    return Outcome(ok, f"M f = {m.tolist()}, M_b f = {mb.tolist()}, "
                       f"layer cake {lc['direct']!r} = {lc['layer_cake']!r}")


def check_indicator_identities() -> Outcome:
    grid = make_grid(1, 16)
    worst_ind = worst_loc = 0.0
    cubes = list(enumerate_cubes(grid))
    for Q in cubes:
        worst_ind = max(worst_ind, float(np.max(np.abs(mf_brute(indicator(Q, grid)).values[Q.slices] - 1))))
    for seed in range(20):
        b = _random(grid, seed)
        for Q in cubes:
            glob = mf_brute(b.like(b.values * indicator(Q, grid).values)).values[Q.slices]
            worst_loc = max(worst_loc, float(np.max(np.abs(glob - local_mf(b, Q).values))))
    ok = worst_ind <= RTOL and worst_loc <= RTOL
    return Outcome(ok, f"|M(chi_Q) - 1| <= {worst_ind:.1e}, |M(b chi_Q) - M_Q b| <= {worst_loc:.1e} "
                       f"over {len(cubes)} cubes x 20 symbols")


def _domination_pairs():
    for beta in (0.3, 0.5, 0.7):
        for n, N in [(1, 32), (2, 8)]:
            grid = make_grid(n, N)
            for i in range(50):
                b = sample(fixtures.cone_family(i, beta=beta), grid)
                f = _random(grid, 1000 + i, nonneg=True)
                yield beta, b, f


def check_domination() -> Outcome:
    violations = 0
    worst = 0.0
    count = 0
    for beta, b, f in _domination_pairs():
        n = b.grid.n
        lhs = maximal_commutator(b, f).values
        rhs = n ** (beta / 2) * lipschitz_pairwise(b, beta) * frac_mf(f, beta).values
        violations += int(np.sum(lhs > rhs * (1 + RTOL)))
        worst = max(worst, float(np.max(lhs / rhs)))
        count += 1
    return Outcome(violations == 0, f"{violations} violations over {count} pairs; max lhs/rhs = {worst:.4f}")


def check_nonlinear_bound() -> Outcome:
    violations = 0
    worst = 0.0
    count = 0
    for _, b, f in _domination_pairs():
        assert np.all(b.values >= 0)
        lhs = np.abs(nonlinear_commutator(b, f).values)
        rhs = maximal_commutator(b, f).values
        violations += int(np.sum(lhs > rhs * (1 + RTOL) + RTOL * np.max(rhs)))
        worst = max(worst, float(np.max(lhs - rhs)))
        count += 1
    return Outcome(violations == 0, f"{violations} violations over {count} pairs; max |[b,M]f| - M_b f = {worst:.2e}")


def check_pointwise_necessity() -> Outcome:
    grid = make_grid(1, 16)
    worst = -math.inf
    for seed in range(20):
        b = _random(grid, seed)
        for Q in enumerate_cubes(grid):
            mb = maximal_commutator(b, indicator(Q, grid)).values[Q.slices]
            dev = np.abs(b.values[Q.slices] - np.mean(b.values[Q.slices]))
            worst = max(worst, float(np.max(dev - mb)))
    return Outcome(worst <= RTOL, f"max (|b - b_Q| - M_b(chi_Q)) over Q = {worst:.2e}")


def check_morrey_indicator() -> Outcome:
    worst = 0.0
    count = 0
    for n, N in [(1, 16), (2, 8)]:
        grid = make_grid(n, N)
        for Q in enumerate_cubes(grid):
            chi = indicator(Q, grid)
            for p in (1, 2):
                for lam in (0.25, 0.5):
                    expected = Q.measure(grid) ** ((n - lam) / (n * p))
                    worst = max(worst, abs(morrey_norm(chi, p, lam) - expected) / expected)
                    count += 1
    return Outcome(worst <= 1e-10, f"max relative error {worst:.2e} over {count} cases")


def _slopes(families, functional: str, beta: float = 0.5) -> list[float]:
    exps = fixtures.exponents(beta)
    return [refinement_scan(fam, functional, NS, exps, threads=1).items[0].slope for fam in families]


def _fmt(slopes) -> str:
    return f"[{min(slopes):.3f}, {max(slopes):.3f}]"


def check_discrimination() -> Outcome:
    beta = 0.5
    cones = [fixtures.cone_family(i) for i in range(20)]
    logs = [fixtures.log_family(i) for i in range(20)]
    parts, ok = [], True
    for name in ("lipschitz_oscillation", "mq_deviation"):
        lip = _slopes(cones, name, beta)
        bmo = _slopes(logs, name, beta)
        good = sum(s < 0.05 for s in lip) + sum(s > beta / 2 for s in bmo)
        ok &= good == 40
        parts.append(f"{name}: {good}/40 correct, cone-min slopes {_fmt(lip)}, log slopes {_fmt(bmo)}")
    return Outcome(ok, "; ".join(parts))


def check_sign_necessity() -> Outcome:
    beta = 0.5
    neg = [fixtures.sign_violating_family(i) for i in range(20)]
    pos = [fixtures.cone_family(i) for i in range(20)]
    parts, ok = [], True
    for name in ("negativity_defect", "mq_deviation"):
        div = _slopes(neg, name, beta)
        bnd = _slopes(pos, name, beta)
        good_div = sum(s >= 0.8 * beta for s in div)
        good_bnd = sum(s < 0.05 for s in bnd)
        ok &= good_div == 20 and good_bnd == 20
        parts.append(f"{name}: diverging {good_div}/20 {_fmt(div)}, bounded {good_bnd}/20 {_fmt(bnd)}")
    return Outcome(ok, "; ".join(parts))


def check_weak_type() -> Outcome:
    beta = 0.5
    worst = {"M_b": 0.0, "[b,M]": 0.0}
    for i in range(20):
        fam = fixtures.cone_family(i)
        consts = {"M_b": [], "[b,M]": []}
        for N in NS:
            b = sample(fam, make_grid(1, N))
            f = single_cell_mass(b.grid)
            consts["M_b"].append(weak_constant(maximal_commutator(b, f), f, beta))
            consts["[b,M]"].append(weak_constant(nonlinear_commutator(b, f), f, beta))
        for k, v in consts.items():
            worst[k] = max(worst[k], max(v) / min(v))
    ok = all(r < 3 for r in worst.values())
    return Outcome(ok, ", ".join(f"{k} max/min ratio {v:.3f}" for k, v in worst.items()))


def check_determinism() -> Outcome:
    leb = fixtures.exponents()
    configs = [
        ScanConfig(fixtures.sign_violating_family(3), leb, [8, 16, 32], theorem="1.6"),
        ScanConfig(fixtures.log_family(3), leb, [8, 16, 32], theorem="1.2"),
    ]
    blobs = {}
    for threads in (1, 4, 1):
        out = []
        for cfg in configs:
            rep = theorem_suite(cfg.theorem, cfg, threads=threads)
            out += [write_report(rep, "json"), write_report(rep, "csv")]
        rep = refinement_scan(fixtures.log_family(4), "mq_deviation", [8, 16, 32], leb, threads=threads)
        out += [write_report(rep, "json"), write_report(rep, "csv")]
        blobs.setdefault(threads, []).append(b"".join(out))
    runs = [b for v in blobs.values() for b in v]
    ok = all(r == runs[0] for r in runs)
    return Outcome(ok, f"{len(runs)} runs (threads 1, 4, 1) {'byte-identical' if ok else 'DIFFER'}")


def check_layer_cake() -> Outcome:
    inexact = undominated = 0
    count = 0
    for i in range(50):
        for n, N in [(1, 16), (2, 6)]:
            grid = make_grid(n, N)
            b = sample(fixtures.cone_family(i, beta=0.5), grid)
            for Q in enumerate_cubes(grid):
                rec = layer_cake_check(b, Q, beta=0.5)
                inexact += int(not rec["exact"])
                undominated += int(not rec["dominated"])
                count += 1
    return Outcome(inexact == 0 and undominated == 0,
                   f"{count} (symbol, cube) cases: {inexact} inexact, {undominated} split bound violations")


def check_ef_split() -> Outcome:
    worst_mean = worst_split = 0.0
    for n, N in [(1, 16), (2, 6)]:
        grid = make_grid(n, N)
        for seed in range(20):
            b = _random(grid, seed)
            for Q in enumerate_cubes(grid):
                v = b.values[Q.slices]
                dev = (v - np.sum(v) / v.size) * grid.cell_volume
                e, f = -np.sum(dev[dev <= 0]), np.sum(dev[dev > 0])
                scale = max(e, f, 1e-300)
                worst_mean = max(worst_mean, abs(np.sum(dev)) / (np.sum(np.abs(dev)) + 1e-300))
                worst_split = max(worst_split, abs(e - f) / scale)
    return Outcome(worst_split <= 1e-9, f"relative E/F gap {worst_split:.2e}, mean-zero residual {worst_mean:.2e}")


CHECKS = [
    Check("1", "oracle equivalence mf_fast == mf_brute", check_oracle_equivalence, 30),
    Check("2", "hand fixtures", check_hand_fixtures, 1),
    Check("3", "M(chi_Q) = 1 on Q and local identity", check_indicator_identities, 10),
    Check("4", "pointwise domination by the fractional maximal function", check_domination, 60),
    Check("5", "|[b,M] f| <= M_b f for b >= 0", check_nonlinear_bound, 60),
    Check("6", "|b - b_Q| <= M_b(chi_Q) on Q", check_pointwise_necessity, 60),
    Check("7", "Morrey norm of cube indicators", check_morrey_indicator, 60),
    Check("8", "Lipschitz vs log discrimination by refinement slope", check_discrimination, 300, True),
    Check("9", "sign necessity of b >= 0", check_sign_necessity, 300, True),
    Check("10", "weak-type constants bounded under refinement", check_weak_type, 120, True),
    Check("11", "determinism across reruns and thread counts", check_determinism, 300, True),
    Check("layer-cake", "layer-cake identity and split-bound domination", check_layer_cake, 120),
    Check("ef-split", "E/F split of the mean oscillation", check_ef_split, 60),
]


def select(include_scans: bool = False, ids=None) -> list[Check]:
    if ids is not None:
        known = {c.id for c in CHECKS}
        unknown = [i for i in ids if i not in known]
        if unknown:
            raise ValueError(f"unknown check id(s) {', '.join(unknown)}; known: {', '.join(known)}")
        return [c for c in CHECKS if c.id in ids]
    return [c for c in CHECKS if include_scans or not c.scan]


def format_line(check: Check, out: Outcome) -> str:
    return f"[{'PASS' if out.passed else 'FAIL'}] {check.id:>10} {check.title} ({out.seconds:.1f}s): {out.detail}"


def run(include_scans: bool = False, ids=None, echo=print) -> bool:
    ok = True
    for check in select(include_scans, ids):
        out = check.run()
        ok &= out.passed
        echo(format_line(check, out))
    return ok
