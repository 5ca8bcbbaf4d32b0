import json

import numpy as np
import pytest

from particle_limits.lattice import (
    Configuration,
    density_field,
    empirical_measure,
    sample_initial_density,
    sample_initial_exclusion,
    site,
    sup_norm_distance,
)
from particle_limits.profiles import ConstantProfile, profile_from_dict
from particle_limits.rng import RngStream


def test_site_wraps_modulo_n():
    assert site(0, 5) == site(5, 5) == 0
    assert site(-1, 5) == 4


def test_configuration_rejects_bad_values():
    with pytest.raises(ValueError):
        Configuration([0, 2, 1], "exclusion")
    with pytest.raises(ValueError):
        Configuration([0, -1], "unbounded")
    with pytest.raises(ValueError):
        Configuration([1, 0], "weird")


def test_configuration_json_round_trip():
    c = Configuration([3, 0, 7], "unbounded")
    d = json.loads(json.dumps(c.to_dict(ell=2.0)))
    assert d["ell"] == 2.0
    assert Configuration.from_dict(d) == c


@pytest.mark.parametrize("value, expected", [(0.0, 0), (1.0, 1)])
def test_exclusion_sampler_degenerate_profiles(value, expected):
    c = sample_initial_exclusion(8, ConstantProfile(value), RngStream(1))
    assert c.kind == "exclusion"
    assert c.occupations.tolist() == [expected] * 8


def test_exclusion_sampler_concentrates():
    # binomial sd at n = 1e4 is 0.005, so 0.02 is four sd
    c = sample_initial_exclusion(10**4, ConstantProfile(0.5), RngStream(11))
    assert abs(c.occupations.mean() - 0.5) <= 0.02


def test_exclusion_sampler_rejects_out_of_range_profile():
    with pytest.raises(ValueError):
        sample_initial_exclusion(8, ConstantProfile(1.2), RngStream(1))


def test_exclusion_marginals_within_three_standard_errors():
    phi = profile_from_dict({"name": "cosine", "mean": 0.5, "amp": 0.4})
    n, reps = 4, 10**5
    draws = np.array([sample_initial_exclusion(n, phi, RngStream(3, r, "marginals")).occupations
                      for r in range(reps)])
    p = phi(np.arange(n) / n)
    se = np.sqrt(p * (1 - p) / reps)
    assert np.all(np.abs(draws.mean(axis=0) - p) <= 3 * se)


def test_density_sampler_zero_profile():
    c = sample_initial_density(8, 100, ConstantProfile(0.0), RngStream(1))
    assert c.kind == "unbounded"
    assert c.total == 0


def test_density_sampler_sup_error_at_high_density():
    # Poisson(1e4) per site: sd/ell = 0.01, sixteen sites, 0.05 is five sd
    c = sample_initial_density(16, 10**4, ConstantProfile(1.0), RngStream(5))
    assert sup_norm_distance(density_field(c, 10**4), ConstantProfile(1.0)) <= 0.05


def test_density_sampler_mean_matches_poisson():
    phi = ConstantProfile(3.0)
    draws = np.array([sample_initial_density(4, 1, phi, RngStream(9, r, "mean")).occupations
                      for r in range(10**5)])
    assert np.all(np.abs(draws.mean(axis=0) - 3.0) <= 0.05)
    assert abs(draws.var() - 3.0) < 0.1


def test_density_sampler_rejects_negative_profile():
    with pytest.raises(ValueError):
        sample_initial_density(8, 10, ConstantProfile(-0.1), RngStream(1))


def test_samplers_are_deterministic():
    phi = profile_from_dict({"name": "cosine", "mean": 0.5, "amp": 0.25})
    a = sample_initial_exclusion(64, phi, RngStream(42, 3, "init"))
    b = sample_initial_exclusion(64, phi, RngStream(42, 3, "init"))
    c = sample_initial_exclusion(64, phi, RngStream(42, 4, "init"))
    assert a == b
    assert a != c


def test_empirical_measure_examples():
    assert empirical_measure(Configuration([0] * 5)).mass == 0.0
    full = empirical_measure(Configuration([1] * 10, "exclusion"))
    assert full.mass == pytest.approx(1.0, abs=1e-15)
    assert full.atoms() == [(x / 10, 0.1) for x in range(10)]
    mu = empirical_measure(Configuration([2, 0, 1]))
    assert mu.integrate(lambda u: np.ones_like(u)) == pytest.approx(1.0)


def test_empirical_measure_integrates_test_function():
    mu = empirical_measure(Configuration([1, 2, 0, 3]))
    expected = (1 * 0.0 + 2 * 0.25 + 0 * 0.5 + 3 * 0.75) / 4
    assert mu.integrate(lambda u: u) == pytest.approx(expected)


def test_density_field_examples():
    assert np.all(density_field(Configuration([0, 0, 0]), 1.0)(np.linspace(0, 1, 9)) == 0)
    const = density_field(Configuration([4] * 6), 2.0)
    assert np.allclose(const(np.linspace(0, 1, 31)), 2.0)
    assert density_field(Configuration([0, 2]), 1.0)(0.25) == pytest.approx(1.0)


def test_density_field_wraps_and_is_exact_at_grid():
    X = density_field(Configuration([0, 4, 8, 2]), 2.0)
    assert X(np.arange(4) / 4).tolist() == [0.0, 2.0, 4.0, 1.0]
    # last segment runs from X(3/4) = 1 back to X(0) = 0
    assert X(0.875) == pytest.approx(0.5)
    assert X(1.25) == X(0.25)


def test_density_field_rejects_small_ell():
    with pytest.raises(ValueError):
        density_field(Configuration([1, 1]), 0.5)


def test_sup_norm_examples():
    X = density_field(Configuration([1, 3, 2, 5]), 1.0)
    assert sup_norm_distance(X, X) == 0.0
    c = density_field(Configuration([3] * 8), 2.0)
    assert sup_norm_distance(c, ConstantProfile(0.25)) == pytest.approx(1.25)
    assert sup_norm_distance(density_field(Configuration([0, 2]), 1.0), ConstantProfile(1.0)) == 1.0
