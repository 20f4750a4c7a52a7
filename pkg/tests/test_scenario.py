import numpy as np
import pytest

from capa_multicast.errors import ScenarioGenerationError, ScenarioParseError
from capa_multicast.scenario import (
    Scenario,
    ScenarioConfig,
    dumps,
    generate,
    load,
    loads,
    save,
)


def test_generation_is_deterministic_bitwise():
    cfg = ScenarioConfig(num_groups=1, users_per_group=1, rng_seed=42)
    a = generate(cfg)
    b = generate(cfg)
    assert np.array_equal(a.group_centers, b.group_centers)
    for (_, _, ga), (_, _, gb) in zip(a.users, b.users):
        assert np.array_equal(ga.position, gb.position)
    for ca, cb in zip(a.channels, b.channels):
        assert np.array_equal(ca.values, cb.values)


def test_zero_spread_collapses_group_positions():
    cfg = ScenarioConfig(num_groups=3, users_per_group=3, spread_radius=0.0, rng_seed=5)
    scn = generate(cfg)
    for g in range(3):
        base = scn.users[scn.user_index(g, 0)][2].position
        base_ch = scn.channels[scn.user_index(g, 0)].values
        for k in range(1, 3):
            assert np.array_equal(scn.users[scn.user_index(g, k)][2].position, base)
            assert np.array_equal(scn.channels[scn.user_index(g, k)].values, base_ch)


@pytest.mark.parametrize("seed", range(100))
def test_group_distance_constraints_hold(seed):
    cfg = ScenarioConfig(num_groups=3, users_per_group=2, rng_seed=seed, grid_order=2)
    scn = generate(cfg)
    assert scn.num_users == 6
    centers = scn.group_centers
    for i in range(3):
        for j in range(i + 1, 3):
            d = np.linalg.norm(centers[i] - centers[j])
            assert 1.0 <= d <= 5.0
    for g, k, geo in scn.users:
        assert np.linalg.norm(geo.position - centers[g]) <= cfg.spread_radius + 1e-12
        assert geo.position[2] == centers[g][2]


def test_groups_are_disjoint_by_construction():
    cfg = ScenarioConfig(num_groups=4, users_per_group=2, rng_seed=1, grid_order=2)
    scn = generate(cfg)
    seen = {(g, k) for g, k, _ in scn.users}
    assert len(seen) == 8


def test_rejection_sampling_failure_is_reported():
    # 4 centers, pairwise >= 1 m, all inside a 0.1 m box: impossible
    cfg = ScenarioConfig(
        num_groups=4,
        users_per_group=1,
        group_box=(-0.05, 0.05, -0.05, 0.05, 15.0, 15.1),
        rng_seed=0,
        grid_order=2,
    )
    with pytest.raises(ScenarioGenerationError):
        generate(cfg)


def test_save_load_save_round_trip_is_byte_identical(tmp_path):
    cfg = ScenarioConfig(num_groups=2, users_per_group=3, rng_seed=9, grid_order=4)
    scn = generate(cfg)
    p1 = tmp_path / "a.scn"
    p2 = tmp_path / "b.scn"
    save(scn, p1)
    loaded = load(p1)
    save(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    # channels recomputed on load match the originals exactly
    for ca, cb in zip(scn.channels, loaded.channels):
        assert np.array_equal(ca.values, cb.values)


def test_load_rejects_zero_groups():
    text = "[config]\nnum_groups = 0\nusers_per_group = 1\n"
    with pytest.raises(ScenarioParseError):
        loads(text)


def test_parse_error_carries_line_number():
    cfg = ScenarioConfig(num_groups=1, users_per_group=1, rng_seed=3, grid_order=2)
    text = dumps(generate(cfg))
    broken = text.replace("spread_radius = 1", "spread_radius = banana")
    with pytest.raises(ScenarioParseError) as err:
        loads(broken)
    assert "line" in str(err.value)
    assert "spread_radius" in str(err.value)


def test_hand_written_file_matches_direct_generation():
    text = """
[config]
num_groups = 2
users_per_group = 2
group_box = -5 5 -5 5 15 30
spread_radius = 1
min_group_distance = 1
max_group_distance = 5
transmit_power_budget = 1000
noise_variance = 0.0056
rate_floors = 1 1
rng_seed = 0
grid_order = 6
aperture_len = 0.5 0.5
wavelength = 0.125
impedance = 376.99111843077515

[group 1]
center: 1.0 2.0 20.0
user 1: 1.5 2.0 20.0
user 2: 1.0 2.5 20.0

[group 2]
center: -2.0 0.0 22.0
user 1: -2.0 0.5 22.0
user 2: -1.5 0.0 22.0
"""
    scn = loads(text)
    assert scn.num_users == 4
    # channels must equal a direct sampling of the same positions
    from capa_multicast.field import Aperture, Radio, UserGeometry, make_grid, sample_channel

    grid = make_grid(Aperture(0.5, 0.5), 6)
    radio = Radio(0.125, 376.99111843077515)
    expected = sample_channel(UserGeometry([1.5, 2.0, 20.0]), grid, radio).values
    assert np.array_equal(scn.channels[0].values, expected)


def test_load_rejects_user_outside_spread(tmp_path):
    text = """
[config]
num_groups = 1
users_per_group = 1
group_box = -5 5 -5 5 15 30
spread_radius = 1
min_group_distance = 1
max_group_distance = 5
transmit_power_budget = 1000
noise_variance = 0.0056
rate_floors = 1
rng_seed = 0
grid_order = 2
aperture_len = 0.5 0.5
wavelength = 0.125
impedance = 376.99111843077515

[group 1]
center: 0.0 0.0 20.0
user 1: 3.0 0.0 20.0
"""
    with pytest.raises(ScenarioParseError):
        loads(text)


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(num_groups=0)
    with pytest.raises(ValueError):
        ScenarioConfig(noise_variance=0.0)
    with pytest.raises(ValueError):
        ScenarioConfig(rate_floors=(1.0,))  # wrong length for 3 groups
    with pytest.raises(ValueError):
        ScenarioConfig(min_group_distance=3.0, max_group_distance=2.0)
