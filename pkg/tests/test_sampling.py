import math

import numpy as np
import pytest

from capmax import (AtomicMeasure, ConfigurationError, DomainError, Grid, delta_measure,
                    field_mass, field_to_measure, make_field, normalize_measure,
                    scale_measure, two_atom_measure)
from capmax.sampling import ScalarField, read_field_csv, write_field_csv


def test_grid_geometry():
    g = Grid.centered(2, 1.0, 0.25)
    assert g.shape == (8, 8)
    assert g.size == 64
    assert g.cell_volume == 0.0625
    c = g.cell_centers()
    assert c.shape == (64, 2)
    np.testing.assert_allclose(c[0], [-0.875, -0.875])
    np.testing.assert_allclose(c[1], [-0.875, -0.625])  # axis-major (C) order


def test_grid_budget_and_validation():
    with pytest.raises(ConfigurationError):
        Grid.centered(2, 10.0, 0.001, budget=1000)
    with pytest.raises(ConfigurationError):
        Grid(1, (0.0,), -0.1, (10,))
    with pytest.raises(ConfigurationError):
        Grid(3, (0, 0, 0), 0.1, (2, 2, 2))


def test_grid_from_dict_forms():
    a = Grid.from_dict({"n": 1, "half_width": 1.0, "h": 0.5})
    b = Grid.from_dict({"n": 1, "origin": [-1.0], "h": 0.5, "extents": [4]})
    assert a == b


def test_indicator_mass_1d():
    f = make_field("indicator_ball", Grid.centered(1, 1.5, 0.01), R=1.0)
    assert field_mass(f) == pytest.approx(2.0, abs=0.02)
    assert f.analytic_mass == 2.0


def test_gaussian_mass_2d():
    f = make_field("gaussian", Grid.centered(2, 8.0, 0.1), sigma=1.0)
    assert field_mass(f) == pytest.approx(1.0, abs=0.01)


def test_indicator_mass_2d():
    f = make_field("indicator_ball", Grid.centered(2, 1.2, 0.01), R=1.0)
    assert field_mass(f) == pytest.approx(math.pi, rel=0.01)


def test_two_bumps_mass():
    f = make_field("two_bumps", Grid.centered(2, 3.0, 0.01), R=0.5, separation=4.0)
    assert f.analytic_mass == pytest.approx(math.pi / 2)
    assert field_mass(f) == pytest.approx(math.pi / 2, rel=0.01)


def test_zero_field_mass():
    g = Grid.centered(1, 1.0, 0.1)
    assert field_mass(ScalarField(g, np.zeros(g.shape))) == 0


def test_preset_support_must_fit():
    with pytest.raises(ConfigurationError):
        make_field("indicator_ball", Grid.centered(1, 0.5, 0.01), R=1.0)
    with pytest.raises(ConfigurationError):
        make_field("gaussian", Grid.centered(2, 3.0, 0.1), sigma=1.0)
    with pytest.raises(ConfigurationError):
        make_field("two_bumps", Grid.centered(2, 3.0, 0.1), R=1.0, separation=1.0)


@pytest.mark.parametrize("preset", ["indicator_ball", "gaussian"])
def test_presets_mirror_symmetric(preset):
    f = make_field(preset, Grid.centered(2, 6.0, 0.1), R=1.0, sigma=1.0)
    s = f.samples
    assert np.array_equal(s, s[::-1, :])
    assert np.array_equal(s, s[:, ::-1])
    assert np.array_equal(s, s.T)


def test_samples_nonnegative():
    with pytest.raises(DomainError):
        ScalarField(Grid.centered(1, 1.0, 0.5), np.array([1.0, -1.0, 0.0, 0.0]))


def test_delta_measure():
    d = delta_measure()
    assert d.size == 1 and d.total_mass == 1.0
    assert np.array_equal(d.positions, [[0.0]])
    n = normalize_measure(d)
    assert np.array_equal(n.positions, d.positions) and np.array_equal(n.weights, d.weights)
    for t in (0.1, 1.0, 7.0):
        assert np.array_equal(scale_measure(d, t).positions, d.positions)


def test_scale_measure_examples():
    nu = two_atom_measure(1)
    assert np.array_equal(scale_measure(nu, 1.0).positions, nu.positions)
    np.testing.assert_array_equal(scale_measure(nu, 0.5).positions, [[-0.5], [0.5]])
    t, s = 0.3, 1.5
    assert scale_measure(nu, t).mass_in_ball([0.0], t * s) == nu.mass_in_ball([0.0], s) == 1.0
    with pytest.raises(DomainError):
        scale_measure(nu, 0.0)


def test_scale_composition(rng):
    nu = AtomicMeasure(rng.normal(size=(20, 2)), rng.uniform(size=20))
    a = scale_measure(scale_measure(nu, 0.3), 0.7)
    b = scale_measure(nu, 0.3 * 0.7)
    np.testing.assert_allclose(a.positions, b.positions, rtol=0, atol=1e-12)
    assert a.total_mass == nu.total_mass


def test_normalize_examples(rng):
    nu = AtomicMeasure([[0.0], [1.0]], [2.0, 2.0])
    np.testing.assert_array_equal(normalize_measure(nu).weights, [0.5, 0.5])
    for _ in range(50):
        k = int(rng.integers(1, 40))
        nu = AtomicMeasure(rng.normal(size=(k, 2)), rng.uniform(0, 10, size=k))
        once = normalize_measure(nu)
        assert once.total_mass == 1.0
        twice = normalize_measure(once)
        assert np.array_equal(twice.weights, once.weights)
    with pytest.raises(DomainError):
        normalize_measure(AtomicMeasure([[0.0]], [0.0]))


def test_field_to_measure():
    g = Grid.centered(1, 1.5, 0.01)
    f = make_field("indicator_ball", g, R=1.0)
    nu = field_to_measure(f)
    centers = g.cell_centers()[:, 0]
    assert nu.size == int(np.sum(np.abs(centers) <= 1.0))
    assert nu.total_mass == field_mass(f)
    assert normalize_measure(nu).total_mass == 1.0


def test_field_to_measure_single_cell():
    g = Grid.centered(2, 1.0, 0.5)
    s = np.zeros(g.shape)
    s[1, 2] = 3.0
    nu = field_to_measure(ScalarField(g, s))
    assert nu.size == 1
    assert nu.weights[0] == 3.0 * 0.25
    np.testing.assert_allclose(nu.positions[0], g.cell_centers()[1 * 4 + 2])
    with pytest.raises(DomainError):
        field_to_measure(ScalarField(g, np.zeros(g.shape)))


def test_field_csv_round_trip(tmp_path):
    f = make_field("gaussian", Grid.centered(2, 5.5, 0.25), sigma=1.0)
    path = tmp_path / "f.csv"
    write_field_csv(f, path)
    g = read_field_csv(path)
    assert g.grid.shape == f.grid.shape
    assert g.grid.h == pytest.approx(f.grid.h)
    np.testing.assert_allclose(g.grid.origin, f.grid.origin)
    assert np.array_equal(g.samples, f.samples)


def test_atomic_measure_validation():
    with pytest.raises(DomainError):
        AtomicMeasure([[0.0]], [-1.0])
    with pytest.raises(DomainError):
        AtomicMeasure([[0.0], [1.0]], [1.0])
    nu = AtomicMeasure.from_atoms([([0.0, 1.0], 0.25), ([2.0, 0.0], 0.75)])
    assert nu.n == 2 and nu.total_mass == 1.0
    np.testing.assert_allclose(nu.centroid, [1.5, 0.25])
