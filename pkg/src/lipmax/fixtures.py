"""Hand-computed fixtures and the symbol families used by the verification suite."""
from __future__ import annotations

import math
from pathlib import Path

from .grid import Exponents, FunctionFamily, GridFunction, cone_min_parameters, make_grid
from .scan import ScanConfig

# cone exponent of the Lipschitz fixtures; > 0.5 keeps the symbols in the
# beta = 0.5 class with cusps the coarsest grids still resolve
CONE_EXPONENT = 0.75


def f4() -> GridFunction:
    return GridFunction(make_grid(1, 4, 0.25), [1.0, 0.0, 0.0, 0.0])


def b4() -> GridFunction:
    return GridFunction(make_grid(1, 4, 0.25), [0.0, 1.0, 2.0, 3.0])


MF_F4 = [1.0, 1 / 2, 1 / 3, 1 / 4]
MB_B4_F4 = [0.0, 1 / 2, 2 / 3, 3 / 4]


def cone_family(seed: int, beta: float = CONE_EXPONENT, m: int = 3, K: float = 1.0,
                shift: float = 0.0) -> FunctionFamily:
    params = {"beta": beta, "K": K, "m": m}
    if shift:
        params["shift"] = shift
    return FunctionFamily("cone_min", params, seed)


def sign_violating_family(seed: int, depth: float = 0.25) -> FunctionFamily:
    """Cone-min symbol pushed down so that ``{b < 0}`` has macroscopic size.

    The minimum of the unshifted symbol is the smallest cone offset, so the
    shift ``-(min offset + depth)`` makes ``b <= -depth`` near that anchor.
    """
    base = cone_family(seed)
    _, offsets, _, _ = cone_min_parameters(base, 1)
    return cone_family(seed, shift=-(float(offsets.min()) + depth))


def log_family(seed: int, n: int = 1) -> FunctionFamily:
    """``-log(max(|x - x0|, h)) + log(sqrt(n))``: nonnegative on the unit cube, BMO-type."""
    return FunctionFamily("log", {"amplitude": -1.0, "offset": 0.5 * math.log(n)}, seed)


def exponents(beta: float = 0.5, p: float = 1.5, n: int = 1, lam: float | None = None,
              regime: str = "lebesgue") -> Exponents:
    if regime == "lebesgue":
        return Exponents.lebesgue(n, beta, p)
    if regime == "A":
        return Exponents.morrey_a(n, beta, p, lam)
    return Exponents.morrey_b(n, beta, p, lam)


def scan_configs() -> dict[str, ScanConfig]:
    Ns = [8, 16, 32, 64]
    leb = exponents()
    return {
        "lipschitz.json": ScanConfig(cone_family(1), leb, Ns, theorem="1.6"),
        "sign-violation.json": ScanConfig(sign_violating_family(1), leb, Ns, theorem="1.6"),
        "log.json": ScanConfig(log_family(1), leb, Ns, theorem="1.2"),
        "weak.json": ScanConfig(cone_family(1), leb, Ns, theorem="1.7"),
        "morrey.json": ScanConfig(cone_family(1), exponents(0.4, 1.5, lam=0.2, regime="A"), [8, 16, 32],
                                  theorem="1.4"),
    }


def write_fixtures(out_dir) -> list[Path]:
    from .operators import maximal_commutator, mf_brute
    from .report_io import write_config, write_grid_function

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    grids = {
        "f4.gf": f4(),
        "b4.gf": b4(),
        "m4.gf": mf_brute(f4()),
        "mb4.gf": maximal_commutator(b4(), f4()),
    }
    for name, f in grids.items():
        write_grid_function(f, out / name)
        written.append(out / name)
    for name, cfg in scan_configs().items():
        write_config(cfg, out / name)
        written.append(out / name)
    return written
