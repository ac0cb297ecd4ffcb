import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridless_doa.errors import ConfigurationError, DomainError, InvalidFrequencyError
from gridless_doa.model import (GeometryConfig, SourceSet, collision_scan, manifold_vector,
                                random_doas, realized_snr_db, synthesize, theta_to_w,
                                w_theta_convert, w_to_theta, w_to_z, z_to_theta)


def test_geometry_derived_sets():
    g = GeometryConfig((3, 0, 1, 4), (4, 1, 3))
    assert g.sensor_indices == (0, 1, 3, 4)
    assert g.n_m == 4 and g.n_M == 5 and g.n_f == 3 and g.n_F == 4
    assert list(g.U) == [0, 1, 3, 4, 9, 12, 16]
    assert g.N == 17 and g.n_u == 7
    assert not g.is_uniform
    assert GeometryConfig.uniform(4, 2).is_uniform


def test_spacing_is_half_wavelength_of_lowest_frequency():
    g = GeometryConfig.uniform(4, 2, base_freq_hz=100.0, speed=1500.0)
    assert g.spacing == 1500.0 / 200.0


@pytest.mark.parametrize('sensors, freqs', [((), (1,)), ((0, 0), (1,)), ((-1, 0), (1,)),
                                            ((0, 1), (0, 1)), ((0, 1), ())])
def test_geometry_rejects_bad_indices(sensors, freqs):
    with pytest.raises(ConfigurationError):
        GeometryConfig(sensors, freqs)


def test_geometry_dict_roundtrip():
    g = GeometryConfig((0, 2, 3, 4, 6, 9), (1, 3, 4), base_freq_hz=50.0, speed=343.0)
    assert GeometryConfig.from_dict(g.to_dict()) == g
    assert GeometryConfig.from_dict({'sensors': 3, 'freq_indices': 2}) == GeometryConfig.uniform(3, 2)


def test_manifold_examples():
    g = GeometryConfig.uniform(4, 1)
    np.testing.assert_allclose(manifold_vector(g, 1, 0.0), np.ones(4))
    g2 = GeometryConfig((0, 1), (1, 2))
    np.testing.assert_allclose(manifold_vector(g2, 2, 0.25), [1, -1], atol=1e-15)
    # broadside gives all ones at every frequency
    g3 = GeometryConfig.uniform(5, 3)
    for f in g3.freq_indices:
        np.testing.assert_allclose(manifold_vector(g3, f, theta_to_w(90.0)), np.ones(5), atol=1e-15)
    with pytest.raises(InvalidFrequencyError):
        manifold_vector(g2, 3, 0.0)


@pytest.mark.parametrize('theta, w', [(87.7076, 0.02), (93.4398, -0.03), (154.1581, -0.45)])
def test_caption_directional_cosines(theta, w):
    assert w_theta_convert(theta, 'theta->w') == pytest.approx(w, abs=5e-6)


def test_conversion_examples():
    assert w_theta_convert(90.0, 'theta->w') == pytest.approx(0.0, abs=1e-16)
    assert w_theta_convert(0.0, 'w->z') == 1.0
    z = w_to_z(-0.45)
    assert z == pytest.approx(np.exp(1j * 0.9 * np.pi))
    assert z_to_theta(z) == pytest.approx(154.1581, abs=1e-3)
    with pytest.raises(DomainError):
        theta_to_w(180.0)
    with pytest.raises(DomainError):
        w_to_theta(0.6)
    with pytest.raises(DomainError):
        w_theta_convert(1.5, 'z->w')
    with pytest.raises(ValueError):
        w_theta_convert(1.0, 'deg->rad')


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.01, max_value=179.99))
def test_theta_w_roundtrip(theta):
    w = theta_to_w(theta)
    assert abs(w) <= 0.5
    assert w == pytest.approx(np.cos(np.deg2rad(theta)) / 2, abs=1e-12)
    assert w_to_theta(w) == pytest.approx(theta, abs=1e-6)
    assert w_theta_convert(w_theta_convert(theta, 'theta->z'), 'z->theta') == pytest.approx(theta, abs=1e-6)


def test_amplitudes_have_unit_norm(rng):
    m = synthesize(GeometryConfig.uniform(6, 3), SourceSet([40.0, 100.0]), 4, rng_seed=3)
    amps = m.truth.amplitudes
    np.testing.assert_allclose(np.linalg.norm(amps.reshape(2, -1), axis=1), 1.0)


def test_single_broadside_source_is_rank_one():
    g = GeometryConfig.uniform(5, 3)
    m = synthesize(g, SourceSet([90.0]), 3, amplitude='deterministic')
    for f in g.freq_indices:
        S = m.slice(f)
        assert np.linalg.matrix_rank(S, tol=1e-10) == 1
        np.testing.assert_allclose(S[:, 0], S[0, 0] * np.ones(5))


def test_snr_is_exact():
    g = GeometryConfig.uniform(16, 2)
    m = synthesize(g, SourceSet([88.0, 93.0, 155.0]), 1, snr_db=20.0, rng_seed=7)
    assert realized_snr_db(m) == pytest.approx(20.0, abs=1e-10)
    assert m.data.shape == (16, 1, 2) and np.all(np.isfinite(m.data))


def test_synthesis_is_seeded():
    g = GeometryConfig.uniform(8, 2)
    a = synthesize(g, SourceSet([60.0]), 2, snr_db=0.0, rng_seed=11).data
    b = synthesize(g, SourceSet([60.0]), 2, snr_db=0.0, rng_seed=11).data
    np.testing.assert_array_equal(a, b)
    # the clean part does not depend on the noise level
    c = synthesize(g, SourceSet([60.0]), 2, snr_db=30.0, rng_seed=11).clean
    np.testing.assert_array_equal(synthesize(g, SourceSet([60.0]), 2, snr_db=0.0, rng_seed=11).clean, c)


def test_near_collision_at_700hz():
    s = SourceSet([93.0, 155.0])
    rep = collision_scan(s, GeometryConfig.uniform(16, 7), near_tol=0.002)
    assert [(c.f, c.k) for c in rep] == [(7, 3)]
    assert abs(s.w[0] - s.w[1]) == pytest.approx(3 / 7, abs=0.002)
    assert len(collision_scan(s, GeometryConfig.uniform(16, 6), near_tol=0.002)) == 0


def test_collision_edge_cases():
    assert len(collision_scan(SourceSet([70.0]), GeometryConfig.uniform(4, 8))) == 0
    # w = 0.25 and -0.25 differ by exactly 1/2
    s = SourceSet(np.rad2deg(np.arccos([0.5, -0.5])))
    rep = collision_scan(s, GeometryConfig.uniform(4, 2), near_tol=0.0)
    assert [(c.f, c.k) for c in rep.exact] == [(2, 1)]


def test_random_doas_separation_and_determinism():
    a = random_doas(3, min_sep_cos=0.25, rng_seed=5)
    b = random_doas(3, min_sep_cos=0.25, rng_seed=5)
    np.testing.assert_array_equal(a.thetas_deg, b.thetas_deg)
    c = np.sort(np.cos(np.deg2rad(a.thetas_deg)))
    assert np.all(np.diff(c) >= 0.25)
    assert np.all((a.thetas_deg >= 15) & (a.thetas_deg <= 165))
    assert random_doas(1, rng_seed=0).count == 1
    with pytest.raises(ConfigurationError):
        random_doas(10, min_sep_cos=0.5, rng_seed=0)


def test_source_set_validation():
    with pytest.raises(ConfigurationError):
        SourceSet([30.0, 60.0], powers=[1.0])
    with pytest.raises(DomainError):
        SourceSet([0.0])
