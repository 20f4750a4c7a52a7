import numpy as np
import pytest

from capa_multicast.errors import DegenerateGeometryError
from capa_multicast.field import (
    Aperture,
    Radio,
    UserGeometry,
    channel_scalar,
    green_dyadic,
    inner_product,
    make_grid,
    sample_channel,
)

RADIO = Radio(wavelength=0.125)


def test_on_axis_projector_is_diag_1_1_0():
    g = green_dyadic([0.0, 0.0, 15.0], [0.0, 0.0, 0.0], RADIO)
    pref = g[0, 0]
    proj = g / pref
    assert np.allclose(proj, np.diag([1.0, 1.0, 0.0]), atol=1e-12)


def test_prefactor_magnitude_hand_value():
    # |prefactor| = eta / (2 lambda d) = 120*pi / 3.75 at d = 15 m, lambda = 0.125 m
    g = green_dyadic([0.0, 0.0, 15.0], [0.0, 0.0, 0.0], RADIO)
    assert abs(abs(g[0, 0]) - 120.0 * np.pi / 3.75) < 1e-9
    assert abs(abs(g[0, 0]) - 100.53096491487338) < 1e-6


def test_doubling_distance_halves_amplitude_and_advances_phase():
    d = 7.3
    g1 = green_dyadic([0.0, 0.0, d], [0.0, 0.0, 0.0], RADIO)[1, 1]
    g2 = green_dyadic([0.0, 0.0, 2 * d], [0.0, 0.0, 0.0], RADIO)[1, 1]
    assert abs(abs(g2) / abs(g1) - 0.5) < 1e-12
    # the extra path length d advances phase by k*d: g1/g2 = 2 exp(+j k d)
    assert abs(g1 / g2 - 2.0 * np.exp(1j * RADIO.wavenumber * d)) < 1e-9


def test_projector_idempotent_rank_two():
    rng = np.random.default_rng(3)
    for _ in range(10):
        r = rng.normal(size=3) + np.array([0.0, 0.0, 20.0])
        s = np.array([*rng.uniform(-0.25, 0.25, size=2), 0.0])
        g = green_dyadic(r, s, RADIO)
        diff = r - s
        u = diff / np.linalg.norm(diff)
        proj = np.eye(3) - np.outer(u, u)
        assert np.max(np.abs(proj @ proj - proj)) < 1e-12
        assert abs(np.trace(proj) - 2.0) < 1e-12
        # green_dyadic embeds exactly this projector
        assert np.max(np.abs(g / (-1j * RADIO.impedance * np.exp(-1j * RADIO.wavenumber * np.linalg.norm(diff)) / (2 * RADIO.wavelength * np.linalg.norm(diff))) - proj)) < 1e-10


def test_degenerate_distance_raises():
    with pytest.raises(DegenerateGeometryError):
        green_dyadic([0.0, 0.0, 1e-12], [0.0, 0.0, 0.0], RADIO)


def test_channel_scalar_on_axis_values():
    user_x = UserGeometry([0.0, 0.0, 15.0], [1.0, 0.0, 0.0])
    # x-polarized receiver picks the (x, y) projector entry, zero on axis
    assert abs(channel_scalar(user_x, [0.0, 0.0, 0.0], RADIO)) < 1e-14
    user_y = UserGeometry([0.0, 0.0, 15.0])
    h = channel_scalar(user_y, [0.0, 0.0, 0.0], RADIO)
    assert abs(abs(h) - RADIO.impedance / (2 * RADIO.wavelength * 15.0)) < 1e-9
    # phase is -(k d) plus the -j prefactor rotation
    expected = -1j * RADIO.impedance / (2 * RADIO.wavelength * 15.0) * np.exp(-1j * RADIO.wavenumber * 15.0)
    assert abs(h - expected) < 1e-9


def test_sample_channel_single_node_matches_scalar():
    grid = make_grid(Aperture(0.5, 0.5), 1)
    user = UserGeometry([0.3, -0.2, 18.0])
    sample = sample_channel(user, grid, RADIO)
    assert sample.values.shape == (1,)
    assert abs(sample.values[0] - channel_scalar(user, grid.nodes[0], RADIO)) < 1e-13


def test_sample_channel_matches_scalar_loop():
    grid = make_grid(Aperture(0.5, 0.5), 5)
    user = UserGeometry([1.0, 2.0, 16.0])
    sample = sample_channel(user, grid, RADIO)
    direct = np.array([channel_scalar(user, node, RADIO) for node in grid.nodes])
    assert np.max(np.abs(sample.values - direct)) < 1e-12


def test_mirror_symmetric_users_give_permuted_samples():
    grid = make_grid(Aperture(0.5, 0.5), 20)
    m = grid.order_per_axis
    right = sample_channel(UserGeometry([2.0, 1.0, 20.0]), grid, RADIO)
    left = sample_channel(UserGeometry([-2.0, 1.0, 20.0]), grid, RADIO)
    # mirror node (x, y) -> (-x, y): reverse the x-axis ordering of the tensor grid
    mirrored = left.values.reshape(m, m)[::-1, :].ravel()
    scale = np.max(np.abs(right.values))
    assert np.max(np.abs(right.values - mirrored)) < 1e-13 * scale


def test_on_axis_mean_amplitude_near_inverse_distance_law():
    grid = make_grid(Aperture(0.5, 0.5), 20)
    user = UserGeometry([0.0, 0.0, 15.0])
    sample = sample_channel(user, grid, RADIO)
    dbar = np.mean(np.linalg.norm(user.position[None, :] - grid.nodes, axis=1))
    ref = RADIO.impedance / (2 * RADIO.wavelength * dbar)
    assert abs(np.mean(np.abs(sample.values)) - ref) / ref < 0.01


def test_inner_product_norm_and_area():
    grid = make_grid(Aperture(0.5, 0.5), 20)
    ones = np.ones(grid.size, dtype=complex)
    area = inner_product(ones, ones, grid)
    assert abs(area - 0.25) < 1e-13
    rng = np.random.default_rng(0)
    f = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    nn = inner_product(f, f, grid)
    assert abs(nn.imag) < 1e-14 * abs(nn)
    assert nn.real >= 0


def test_inner_product_unit_modulus_wave():
    grid = make_grid(Aperture(0.5, 0.5), 20)
    for k in [0.0, 3.0, 17.0]:
        wave = np.exp(1j * k * grid.nodes[:, 0])
        val = inner_product(wave, wave, grid)
        assert abs(val - 0.25) < 1e-12


def test_inner_product_conjugate_symmetry_and_sesquilinearity():
    grid = make_grid(Aperture(0.5, 0.5), 8)
    rng = np.random.default_rng(1)
    a = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    b = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    c = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    fwd = inner_product(a, b, grid)
    rev = np.conj(inner_product(b, a, grid))
    # exact up to FMA/reassociation differences in the complex products
    assert abs(fwd - rev) <= 4 * np.finfo(float).eps * abs(fwd)
    alpha = 0.7 - 1.3j
    lhs = inner_product(alpha * a + c, b, grid)
    rhs = alpha * inner_product(a, b, grid) + inner_product(c, b, grid)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_inner_product_length_mismatch():
    grid = make_grid(Aperture(0.5, 0.5), 4)
    with pytest.raises(ValueError):
        inner_product(np.ones(3), np.ones(grid.size), grid)


def test_channel_gram_grid_refinement_converges():
    # default-geometry channels: M=20 vs M=40 inner products agree to 0.1%
    from capa_multicast.scenario import ScenarioConfig, generate
    from capa_multicast.problem import from_scenario, gram_from_samples
    from capa_multicast.field import sample_channel as sample

    cfg = ScenarioConfig(num_groups=3, users_per_group=3, rng_seed=11)
    scn = generate(cfg)
    coarse = from_scenario(scn).gram
    fine_grid = make_grid(cfg.aperture, 40)
    fine_samples = np.array(
        [sample(geo, fine_grid, cfg.radio).values for _, _, geo in scn.users]
    )
    fine = gram_from_samples(fine_samples, fine_grid.weights)
    rel = np.abs(coarse - fine) / np.abs(fine)
    assert np.max(rel) < 1e-3
