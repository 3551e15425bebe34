import pytest

from bubbleblue.analysis import (
    CSV_COLUMNS,
    SweepError,
    SweepRow,
    SweepSpec,
    check_valve_ratio,
    rows_from_csv,
    rows_to_csv,
    shape_checks,
    sweep,
    slope_fit,
)
from bubbleblue.cds import MPR_CDS, OPTIMAL, WU_LI


def row(lam, algo, degsum, flood=0.0, dim=1, ell=10.0):
    return SweepRow(dim, ell, lam, algo, 1, 0.0, 0.0, degsum, flood, flood, 0.0)


def test_fit_recovers_exact_slope():
    rows = [row(x, WU_LI, 40 * x - 7) for x in (10, 15, 20, 25)] + [row(x, MPR_CDS, 30 * x + 2) for x in (10, 15, 20)]
    fits = slope_fit(rows)
    assert fits[WU_LI].slope == pytest.approx(40)
    assert fits[WU_LI].intercept == pytest.approx(-7)
    assert fits[WU_LI].relative_error == pytest.approx(0, abs=1e-12)
    assert fits[MPR_CDS].expected == 30


def test_fit_needs_three_points():
    with pytest.raises(SweepError):
        slope_fit([row(10, WU_LI, 1), row(20, WU_LI, 2)])
    with pytest.raises(SweepError):
        slope_fit([row(x, WU_LI, x, dim=2) for x in (1, 2, 3)])


@pytest.mark.parametrize("kwargs", [
    {"trials": 0}, {"lambdas": ()}, {"lambdas": (-1,)}, {"dim": 3}, {"algorithms": ()},
    {"algorithms": (OPTIMAL,), "lambdas": (30,)}, {"workers": 0}, {"placement": "grid"},
])
def test_spec_validation(kwargs):
    with pytest.raises(SweepError):
        sweep(SweepSpec(**kwargs))


def test_sweep_rows_and_csv_round_trip():
    spec = SweepSpec(dim=1, ell=6, lambdas=(2, 3), trials=5)
    rows = sweep(spec)
    assert [(r.lam, r.algorithm) for r in rows] == [(2, WU_LI), (2, MPR_CDS), (3, WU_LI), (3, MPR_CDS)]
    for r in rows:
        assert r.flood_measured == r.flood_formula
        assert r.trials == 5 and r.mean_size >= 1
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert rows_to_csv(rows_from_csv(text)) == text


def test_sweep_is_deterministic_and_worker_independent():
    spec = SweepSpec(dim=2, ell=1, lambdas=(6, 9), trials=6, algorithms=(WU_LI, MPR_CDS, OPTIMAL), cap=12)
    a = rows_to_csv(sweep(spec))
    assert a == rows_to_csv(sweep(spec))
    b = rows_to_csv(sweep(SweepSpec(**{**spec.__dict__, "workers": 2})))
    assert a == b
    other = rows_to_csv(sweep(SweepSpec(**{**spec.__dict__, "seed_base": 1})))
    assert other != a


def test_optimal_rows_are_minimal():
    rows = sweep(SweepSpec(dim=2, ell=1, lambdas=(8, 12), trials=8, algorithms=(WU_LI, MPR_CDS, OPTIMAL)))
    rep = shape_checks(rows)
    assert rep.ok, rep.failures
    assert len(rep.notes) == 2


def test_shape_checks_catch_violations():
    rows = [row(5, OPTIMAL, 10, 3.0), row(5, WU_LI, 9, 4.0), row(10, OPTIMAL, 8, 2.0), row(10, WU_LI, 20, 5.0)]
    rep = shape_checks(rows)
    assert not rep.ok
    assert any("optimal degsum" in f for f in rep.failures)
    assert any("not increasing" in f for f in rep.failures)


def test_interior_density_on_segment():
    rows = sweep(SweepSpec(dim=1, ell=10, lambdas=(10,), trials=20))
    wl = next(r for r in rows if r.algorithm == WU_LI)
    assert 1.0 < wl.mean_density < 3.0
    assert wl.mean_size > wl.mean_density * 8 - 1e-9


def test_valve_ratio_report():
    rows = check_valve_ratio(SweepSpec(dim=1, ell=6, lambdas=(4,), trials=4))
    assert [r.algorithm for r in rows] == [WU_LI, MPR_CDS]
    assert all(0 < r.mean_ratio <= 1 for r in rows)
