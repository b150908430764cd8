import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipmax import fixtures
from lipmax.grid import Exponents, FunctionFamily, GridFunction, make_grid, sample
from lipmax.norms import lp_norm
from lipmax.operators import maximal_commutator
from lipmax.scan import (FUNCTIONALS, THEOREMS, Dictionary, OperatorSpec, ScanConfig, classify, default_dictionary,
                         fit_slope, indicator_dictionary, morrey_norm_lower, operator_norm_lower, refinement_scan,
                         single_cell_mass, theorem_suite)

LEB = fixtures.exponents()


def test_fit_slope_exact_power():
    Ns = [8, 16, 32, 64]
    slope, resid = fit_slope(Ns, [3 * N ** 0.4 for N in Ns])
    assert slope == pytest.approx(0.4, abs=1e-12)
    assert resid == pytest.approx(0.0, abs=1e-12)
    assert fit_slope([8, 16], [1, 2]) == (None, None)
    assert fit_slope(Ns, [0, 0, 0, 0]) == (0.0, 0.0)


def test_classify_thresholds():
    cfg = ScanConfig(fixtures.cone_family(0), LEB, [8, 16, 32], functional="lipschitz_oscillation")
    assert cfg.diverging_slope == 0.25
    assert classify(0.01, cfg) == "bounded"
    assert classify(0.3, cfg) == "diverging"
    assert classify(0.1, cfg) == "inconclusive"
    assert classify(None, cfg) == "inconclusive"
    assert classify(0.2, cfg, "weak_constant_mb", [1.0, 1.5, 2.0]) == "bounded"
    assert classify(0.6, cfg, "weak_constant_mb", [1.0, 4.0, 9.0]) == "diverging"


def test_tolerance_overrides():
    cfg = ScanConfig(fixtures.cone_family(0), LEB, [8, 16, 32], functional="lipschitz_oscillation",
                     tolerances={"bounded_slope": 0.2})
    assert classify(0.1, cfg) == "bounded"


def test_config_validation():
    fam = fixtures.cone_family(0)
    with pytest.raises(ValueError):
        ScanConfig(fam, LEB, [8, 16, 32])
    with pytest.raises(ValueError):
        ScanConfig(fam, LEB, [8, 16, 32], theorem="1.6", functional="mq_deviation")
    with pytest.raises(ValueError):
        ScanConfig(fam, LEB, [8, 16, 32], theorem="2.1")
    with pytest.raises(ValueError):
        ScanConfig(fam, LEB, [16, 8], functional="mq_deviation")
    with pytest.raises(ValueError):
        ScanConfig.from_dict({**ScanConfig(fam, LEB, [8], theorem="1.6").to_dict(), "extra": 1})


def test_config_round_trip():
    cfg = ScanConfig(fixtures.sign_violating_family(2), Exponents.morrey_b(1, 0.4, 1.5, 0.2), [8, 16, 32],
                     theorem="1.9", scale_mode="geo", tolerances={"weak_ratio": 4.0})
    assert ScanConfig.from_dict(cfg.to_dict()) == cfg


def test_single_cell_mass():
    f = single_cell_mass(make_grid(2, 8))
    assert lp_norm(f, 1) == pytest.approx(1.0)
    assert f.values[4, 4] == 64.0


def test_dictionaries():
    grid = make_grid(1, 4)
    assert len(indicator_dictionary(grid).labels) == 10
    d = default_dictionary(grid, seed=3, random=2)
    assert d.labels[-1] == "random[4]"
    assert np.all(d.functions[-2:] > 0)
    with pytest.raises(ValueError):
        Dictionary.from_functions([])
    with pytest.raises(ValueError):
        Dictionary.from_functions([GridFunction(grid, np.zeros(4))])


def test_operator_norm_lower_on_indicators():
    grid = make_grid(1, 8)
    d = indicator_dictionary(grid)
    # M chi_Q >= chi_Q, so the L^2 -> L^2 ratio is at least 1
    assert operator_norm_lower(OperatorSpec("M"), 2, 2, d) >= 1.0
    with pytest.raises(ValueError):
        OperatorSpec("M_b")
    with pytest.raises(ValueError):
        OperatorSpec("T")


def test_operator_norm_lower_matches_direct():
    grid = make_grid(1, 8)
    b = sample(fixtures.cone_family(1), grid)
    d = default_dictionary(grid, random=4)
    value, label = operator_norm_lower(OperatorSpec("M_b", b), 1.5, LEB.q, d, argmax=True)
    i = d.labels.index(label)
    f = GridFunction(grid, d.functions[i])
    direct = lp_norm(maximal_commutator(b, f), LEB.q) / lp_norm(f, 1.5)
    assert value == pytest.approx(direct, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.floats(0.1, 10))
def test_operator_norm_homogeneity(seed, c):
    grid = make_grid(1, 8)
    b = sample(fixtures.cone_family(seed), grid)
    d = default_dictionary(grid, random=4)
    base = operator_norm_lower(OperatorSpec("M_b", b), 1.5, LEB.q, d)
    scaled_b = operator_norm_lower(OperatorSpec("M_b", b.like(c * b.values)), 1.5, LEB.q, d)
    assert scaled_b == pytest.approx(c * base, rel=1e-10)
    scaled_f = Dictionary(grid, d.labels, c * d.functions)
    assert operator_norm_lower(OperatorSpec("M_b", b), 1.5, LEB.q, scaled_f) == pytest.approx(base, rel=1e-10)


def test_morrey_norm_lower_regime_checks():
    grid = make_grid(1, 8)
    b = sample(fixtures.cone_family(1), grid)
    d = indicator_dictionary(grid)
    a = Exponents.morrey_a(1, 0.4, 1.5, 0.2)
    assert morrey_norm_lower(OperatorSpec("M_b", b), a, "A", d) > 0
    with pytest.raises(ValueError):
        morrey_norm_lower(OperatorSpec("M_b", b), a, "B", d)
    with pytest.raises(ValueError):
        morrey_norm_lower(OperatorSpec("M_b", b), a, "C", d)


def test_refinement_scan_constant_negative_slope_is_beta():
    fam = FunctionFamily("constant", {"value": -1.0})
    rep = refinement_scan(fam, "negativity_defect", [8, 16, 32, 64], LEB)
    it = rep.items[0]
    assert it.slope == pytest.approx(0.5, abs=1e-12)
    assert it.classification == "diverging"
    assert it.argmax == ["0:1"] * 4


def test_refinement_scan_needs_three_sizes():
    with pytest.raises(ValueError):
        refinement_scan(fixtures.cone_family(0), "mq_deviation", [8, 16], LEB)


def test_refinement_scan_separates_fixture_families():
    lip = refinement_scan(fixtures.cone_family(0), "lipschitz_oscillation", [8, 16, 32, 64], LEB)
    log = refinement_scan(fixtures.log_family(0), "lipschitz_oscillation", [8, 16, 32, 64], LEB)
    assert lip.items[0].classification == "bounded"
    assert log.items[0].classification == "diverging"


def test_every_functional_runs():
    for name in FUNCTIONALS:
        regime = name[-1] if name.startswith("morrey") else "lebesgue"
        exps = fixtures.exponents(0.4, 1.5, lam=0.2, regime=regime)
        rep = refinement_scan(fixtures.cone_family(0), name, [4, 6, 8], exps)
        assert all(math.isfinite(v) for v in rep.items[0].values)


@pytest.mark.parametrize("theorem", sorted(THEOREMS))
def test_every_theorem_suite_runs(theorem):
    regime = THEOREMS[theorem]["regime"]
    exps = fixtures.exponents(0.4, 1.5, lam=0.2, regime=regime)
    cfg = ScanConfig(fixtures.cone_family(1), exps, [4, 8, 16], theorem=theorem)
    rep = theorem_suite(theorem, cfg, threads=2)
    assert [it.item for it in rep.items] == [i[0] for i in THEOREMS[theorem]["items"]]
    assert set(rep.flags) >= {it.item for it in rep.items}


def test_theorem_suite_rejects_wrong_regime():
    cfg = ScanConfig(fixtures.cone_family(1), LEB, [8, 16, 32], theorem="1.4")
    with pytest.raises(ValueError):
        theorem_suite("1.4", cfg)
    with pytest.raises(ValueError):
        theorem_suite("3.1", cfg)


def test_sign_violating_suite_reports_failures():
    cfg = ScanConfig(fixtures.sign_violating_family(1), LEB, [8, 16, 32, 64], theorem="1.6")
    rep = theorem_suite("1.6", cfg)
    assert rep.flags["(1b)"] is False
    assert rep.flags["(3)"] is False
    assert rep.flags["(2)"] is False
    assert rep.consistent is True


def test_log_suite_all_diverge():
    cfg = ScanConfig(fixtures.log_family(1), LEB, [8, 16, 32, 64], theorem="1.6")
    rep = theorem_suite("1.6", cfg)
    assert rep.flags["(1)"] is False
    assert rep.flags["(3)"] is False


def test_weak_suite_on_lipschitz_symbol():
    cfg = ScanConfig(fixtures.cone_family(1), LEB, [8, 16, 32, 64], theorem="1.7")
    rep = theorem_suite("1.7", cfg)
    assert rep.item("(weak)").classification == "bounded"
    assert rep.consistent is True


def test_two_grid_sizes_omit_slope():
    cfg = ScanConfig(fixtures.cone_family(1), LEB, [8, 16], theorem="1.6")
    rep = theorem_suite("1.6", cfg)
    for it in rep.items:
        assert it.slope is None
        assert "slope" not in it.to_dict()
        assert it.classification == "inconclusive"


def test_report_is_thread_independent():
    cfg = ScanConfig(fixtures.cone_family(2), LEB, [8, 16, 32], theorem="1.2")
    assert theorem_suite("1.2", cfg, threads=1).to_dict() == theorem_suite("1.2", cfg, threads=4).to_dict()
