import numpy as np
import pytest

from capmax import (DomainError, Grid, RadialProfile, boundedness_check, delta_measure,
                    geometric_schedule, scaling_convergence, limit_estimate, make_field,
                    theorem_check, two_atom_measure, weaktype_curve)
from capmax.sampling import sample_gaussian_atoms
from capmax.setcap import ray_directions

PROFILES = [RadialProfile.lebesgue(2), RadialProfile.power_law(1, 1.5),
            RadialProfile.wobble(1, 2, 0.2)]
DIRS = ray_directions(2, 16)


def test_geometric_schedule():
    lams = geometric_schedule(1e-1, 1e-4, 10)
    assert len(lams) == 31
    assert lams[0] == pytest.approx(0.1) and lams[-1] == pytest.approx(1e-4)
    assert np.all(np.diff(lams) < 0)
    with pytest.raises(DomainError):
        geometric_schedule(1e-4, 1e-1)


@pytest.mark.parametrize("profile", PROFILES, ids=repr)
def test_delta_curve_is_one(profile):
    curve = weaktype_curve(delta_measure(2), profile, geometric_schedule(1e-1, 1e-4, 2),
                           directions=DIRS)
    np.testing.assert_allclose(curve.h_lower, 1.0, rtol=1e-4)
    np.testing.assert_allclose(curve.h_upper, 1.0, rtol=1e-4)
    est = limit_estimate(curve)
    assert est.value == pytest.approx(1.0, rel=1e-4)
    assert 0 <= est.spread < 1e-4
    assert theorem_check(curve)["passed"]
    bc = boundedness_check(curve, 0.05)
    assert bc["A_emp"] == pytest.approx(1.0, rel=1e-4)
    assert bc["gamma_emp"] == pytest.approx(1.0, rel=1e-4)


def test_indicator_1d_curve_tends_to_mass():
    f = make_field("indicator_ball", Grid.centered(1, 1.5, 0.01), R=1.0)
    curve = weaktype_curve(f, RadialProfile.lebesgue(1), [1e-1, 1e-2, 1e-3, 1e-4])
    # centered operator, 1-D: h(lam) = 2 - 2 lam exactly for the unit indicator
    np.testing.assert_allclose(curve.h_upper, 2 - 2 * curve.lambdas, rtol=1e-5)
    assert limit_estimate(curve).value == pytest.approx(2.0, rel=0.05)
    bc = boundedness_check(curve, 0.05)
    assert 0 < bc["A_emp"] <= bc["gamma_emp"] <= 6.0 and bc["passed"]


def test_curve_invariants():
    curve = weaktype_curve(two_atom_measure(2), RadialProfile.wobble(1, 2, 0.2),
                           [1e-1, 1e-2, 1e-3], directions=DIRS)
    assert np.all(curve.h_lower <= curve.h_upper)
    assert np.all(curve.h_lower > 0)
    assert np.all(np.diff(curve.lambdas) < 0)


def test_curve_rejects_unsorted_schedule():
    with pytest.raises(DomainError):
        weaktype_curve(delta_measure(1), RadialProfile.lebesgue(1), [1e-2, 1e-1])
    with pytest.raises(DomainError):
        weaktype_curve(delta_measure(1), RadialProfile.lebesgue(1), [1e-1, -1.0])


def test_mass_scaling_of_curve():
    nu = two_atom_measure(2)
    p = RadialProfile.lebesgue(2)
    lams = np.array([1e-1, 1e-2, 1e-3])
    a = weaktype_curve(nu, p, lams, directions=DIRS)
    b = weaktype_curve(nu.scaled(5.0), p, 5.0 * lams, directions=DIRS)
    np.testing.assert_allclose(b.h_lower, 5.0 * a.h_lower, rtol=1e-9)
    np.testing.assert_allclose(b.h_upper, 5.0 * a.h_upper, rtol=1e-9)


def test_limit_estimate_needs_three_entries():
    curve = weaktype_curve(delta_measure(1), RadialProfile.lebesgue(1), [1e-1, 1e-2])
    with pytest.raises(DomainError):
        limit_estimate(curve)


def test_theorem_check_power_law_two_atoms():
    curve = weaktype_curve(two_atom_measure(2), RadialProfile.power_law(1, 1.5),
                           [1e-2, 1e-4, 1e-6], directions=DIRS)
    rep = theorem_check(curve)
    assert 0.95 <= rep["ratio_lower"] and rep["ratio_upper"] <= 1.05
    assert rep["passed"]


def test_theorem_check_wobble_bracket():
    curve = weaktype_curve(two_atom_measure(2), RadialProfile.wobble(1, 2, 0.2),
                           [1e-2, 1e-3, 1e-4], directions=DIRS)
    rep = theorem_check(curve)
    assert rep["tau"] == pytest.approx(2.25)
    assert rep["passed"]


def test_theorem_check_fails_outside_bracket():
    curve = weaktype_curve(delta_measure(2), RadialProfile.power_law(1, 1), [1e-1, 1e-2, 1e-3],
                           directions=DIRS)
    curve.mass = 2.0  # pretend the mass were twice as large
    assert not theorem_check(curve)["passed"]


def test_scaling_convergence_delta_exact():
    rep = scaling_convergence(delta_measure(2), RadialProfile.power_law(1, 1), 0.1,
                              [1.0, 0.1, 0.01], directions=DIRS)
    for row in rep["rows"]:
        assert row["rel_err"] < 1e-5
    assert rep["passed"]


def test_scaling_convergence_two_atoms():
    rep = scaling_convergence(two_atom_measure(2), RadialProfile.power_law(1, 1), 0.1,
                              [1.0, 0.5, 0.1, 0.01], directions=ray_directions(2, 32))
    assert rep["monotone"]
    last = rep["rows"][-1]
    assert last["rel_err_lower"] <= 0.05 and last["rel_err_upper"] <= 0.05


def test_scaling_convergence_gaussian_atoms():
    nu = sample_gaussian_atoms(100, 2, 1.0, rng=7)
    rep = scaling_convergence(nu, RadialProfile.lebesgue(2), 0.05, [1.0, 0.1, 0.01, 0.001],
                              directions=ray_directions(2, 32))
    last = rep["rows"][-1]
    assert last["lower"] == pytest.approx(20, rel=0.05)
    assert last["upper"] == pytest.approx(20, rel=0.05)


def test_scaling_convergence_needs_unit_mass():
    with pytest.raises(DomainError):
        scaling_convergence(two_atom_measure(2).scaled(2.0), RadialProfile.lebesgue(2), 0.1, [1.0])


def test_boundedness_insufficient_data():
    curve = weaktype_curve(delta_measure(1), RadialProfile.lebesgue(1), [1e-1, 1e-2, 1e-3])
    rep = boundedness_check(curve, 1e-3)
    assert rep["insufficient_data"] and not rep["passed"]


def test_cells_and_auto_modes_agree_with_rays():
    p = RadialProfile.lebesgue(2)
    nu = two_atom_measure(2)
    g = Grid.centered(2, 8.0, 0.05)
    rays = weaktype_curve(nu, p, [0.1, 0.05], directions=ray_directions(2, 64))
    cells = weaktype_curve(nu, p, [0.1, 0.05], mode="cells", eval_grid=g)
    auto = weaktype_curve(nu, p, [0.1, 0.05, 1e-3], mode="auto", eval_grid=g,
                          directions=ray_directions(2, 32))
    assert [e.set_mode for e in cells.entries] == ["cells", "cells"]
    assert [e.set_mode for e in auto.entries] == ["cells", "cells", "rays"]
    # both modes bracket the same set; the brackets must overlap
    for r, c in zip(rays.entries, cells.entries):
        assert c.h_lower <= r.h_upper * (1 + 1e-9) and r.h_lower <= c.h_upper * (1 + 1e-9)


def test_curve_csv_columns(tmp_path):
    curve = weaktype_curve(delta_measure(1), RadialProfile.lebesgue(1), [1e-1, 1e-2, 1e-3])
    path = tmp_path / "curve.csv"
    curve.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "lambda,h_lower,h_upper,set_mode,inscribed_radius,enclosing_radius"
    assert len(lines) == 4


def test_threaded_curve_is_identical():
    f = make_field("gaussian", Grid.centered(2, 6.0, 0.25), sigma=1.0)
    p = RadialProfile.lebesgue(2)
    a = weaktype_curve(f, p, [1e-1, 1e-2, 1e-3], directions=DIRS, workers=1)
    b = weaktype_curve(f, p, [1e-1, 1e-2, 1e-3], directions=DIRS, workers=3)
    assert np.array_equal(a.h_lower, b.h_lower) and np.array_equal(a.h_upper, b.h_upper)
