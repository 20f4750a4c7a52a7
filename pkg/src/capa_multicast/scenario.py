"""Reproducible multi-group multicast scenarios: generation and text round-trip.

Group centers are rejection-sampled inside a box until every pairwise distance
falls inside [min_group_distance, max_group_distance]; users are placed
uniformly in a horizontal disk around their center. Everything downstream is a
pure function of the seeded draw, so a (config, seed) pair pins the scenario
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ScenarioGenerationError, ScenarioParseError
from .field import (
    Aperture,
    ApertureGrid,
    ChannelSample,
    Radio,
    UserGeometry,
    make_grid,
    sample_channel,
)

MAX_PLACEMENT_ATTEMPTS = 10_000

DEFAULT_GROUP_BOX = (-5.0, 5.0, -5.0, 5.0, 15.0, 30.0)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    num_groups: int = 3
    users_per_group: int = 3
    group_box: tuple = DEFAULT_GROUP_BOX  # (xmin, xmax, ymin, ymax, zmin, zmax)
    spread_radius: float = 1.0
    min_group_distance: float = 1.0
    max_group_distance: float = 5.0
    transmit_power_budget: float = 1000.0  # mA^2
    noise_variance: float = 5.6e-3         # V^2/m^2, uniform across users
    rate_floors: tuple = ()                # bit/s/Hz per group; () means 1.0 each
    rng_seed: int = 0
    grid_order: int = 20
    aperture: Aperture = field(default_factory=Aperture)
    radio: Radio = field(default_factory=Radio)

    def __post_init__(self):
        if self.num_groups < 1 or self.users_per_group < 1:
            raise ValueError("need at least one group and one user per group")
        if self.transmit_power_budget <= 0:
            raise ValueError("power budget must be positive")
        if self.noise_variance <= 0:
            raise ValueError("noise variance must be positive")
        if self.spread_radius < 0:
            raise ValueError("spread radius must be nonnegative")
        if self.min_group_distance < 0 or self.max_group_distance < self.min_group_distance:
            raise ValueError("need 0 <= min_group_distance <= max_group_distance")
        floors = self.rate_floors if self.rate_floors else (1.0,) * self.num_groups
        if np.isscalar(floors):
            floors = (float(floors),) * self.num_groups
        floors = tuple(float(f) for f in floors)
        if len(floors) != self.num_groups:
            raise ValueError(f"expected {self.num_groups} rate floors, got {len(floors)}")
        if any(f < 0 for f in floors):
            raise ValueError("rate floors must be nonnegative")
        object.__setattr__(self, "rate_floors", floors)
        box = tuple(float(v) for v in self.group_box)
        if len(box) != 6 or box[0] > box[1] or box[2] > box[3] or box[4] > box[5]:
            raise ValueError("group_box must be (xmin, xmax, ymin, ymax, zmin, zmax)")
        if box[4] <= 0:
            raise ValueError("group box must sit in front of the aperture (zmin > 0)")
        object.__setattr__(self, "group_box", box)

    @property
    def total_users(self) -> int:
        return self.num_groups * self.users_per_group


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    group_centers: np.ndarray       # (G, 3)
    users: list                     # [(g, k, UserGeometry)] with g, k zero-based
    channels: list                  # ChannelSample aligned with users
    grid: ApertureGrid

    @property
    def num_users(self) -> int:
        return len(self.users)

    def user_index(self, g: int, k: int) -> int:
        """Flat index of user k of group g (both zero-based)."""
        return g * self.config.users_per_group + k


def _draw_centers(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    xmin, xmax, ymin, ymax, zmin, zmax = config.group_box
    lo = np.array([xmin, ymin, zmin])
    hi = np.array([xmax, ymax, zmax])
    g = config.num_groups
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        centers = lo + rng.random((g, 3)) * (hi - lo)
        if g == 1:
            return centers
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        iu = np.triu_indices(g, k=1)
        pair = dist[iu]
        if np.all(pair >= config.min_group_distance) and np.all(pair <= config.max_group_distance):
            return centers
    raise ScenarioGenerationError(
        f"could not place {g} group centers with pairwise distance in "
        f"[{config.min_group_distance}, {config.max_group_distance}] m "
        f"after {MAX_PLACEMENT_ATTEMPTS} attempts"
    )


def _build_from_positions(config: ScenarioConfig, centers: np.ndarray, positions: np.ndarray) -> Scenario:
    grid = make_grid(config.aperture, config.grid_order)
    users = []
    channels = []
    for g in range(config.num_groups):
        for k in range(config.users_per_group):
            i = g * config.users_per_group + k
            geo = UserGeometry(position=positions[i])
            users.append((g, k, geo))
            channels.append(
                sample_channel(geo, grid, config.radio, config.noise_variance, group=g, index=k)
            )
    return Scenario(config, centers, users, channels, grid)


def generate(config: ScenarioConfig) -> Scenario:
    """Draw a scenario from the seeded stream and sample all user channels."""
    rng = np.random.default_rng(config.rng_seed)
    centers = _draw_centers(config, rng)
    positions = np.empty((config.total_users, 3))
    for g in range(config.num_groups):
        for k in range(config.users_per_group):
            u, v = rng.random(2)
            rad = config.spread_radius * np.sqrt(u)
            ang = 2.0 * np.pi * v
            i = g * config.users_per_group + k
            positions[i] = centers[g] + np.array([rad * np.cos(ang), rad * np.sin(ang), 0.0])
    return _build_from_positions(config, centers, positions)


# --- text format -----------------------------------------------------------
#
# [config]
#   key = value            (floats printed with 17 significant digits)
# [group 1]
#   center: x y z
#   user 1: x y z
#
# Channels are recomputed on load, never stored.

def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _fmt_vec(v) -> str:
    return " ".join(_fmt(x) for x in v)


def dumps(scenario: Scenario) -> str:
    c = scenario.config
    lines = ["[config]"]
    lines.append(f"num_groups = {c.num_groups}")
    lines.append(f"users_per_group = {c.users_per_group}")
    lines.append(f"group_box = {_fmt_vec(c.group_box)}")
    lines.append(f"spread_radius = {_fmt(c.spread_radius)}")
    lines.append(f"min_group_distance = {_fmt(c.min_group_distance)}")
    lines.append(f"max_group_distance = {_fmt(c.max_group_distance)}")
    lines.append(f"transmit_power_budget = {_fmt(c.transmit_power_budget)}")
    lines.append(f"noise_variance = {_fmt(c.noise_variance)}")
    lines.append(f"rate_floors = {_fmt_vec(c.rate_floors)}")
    lines.append(f"rng_seed = {c.rng_seed}")
    lines.append(f"grid_order = {c.grid_order}")
    lines.append(f"aperture_len = {_fmt(c.aperture.len_x)} {_fmt(c.aperture.len_y)}")
    lines.append(f"wavelength = {_fmt(c.radio.wavelength)}")
    lines.append(f"impedance = {_fmt(c.radio.impedance)}")
    for g in range(c.num_groups):
        lines.append("")
        lines.append(f"[group {g + 1}]")
        lines.append(f"center: {_fmt_vec(scenario.group_centers[g])}")
        for k in range(c.users_per_group):
            _, _, geo = scenario.users[scenario.user_index(g, k)]
            lines.append(f"user {k + 1}: {_fmt_vec(geo.position)}")
    return "\n".join(lines) + "\n"


def save(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(scenario))


def _parse_floats(text: str, count: int, line_no: int, what: str) -> list:
    parts = text.split()
    if len(parts) != count:
        raise ScenarioParseError(f"{what}: expected {count} numbers, got {len(parts)}", line_no)
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ScenarioParseError(f"{what}: {exc}", line_no) from None


def loads(text: str) -> Scenario:
    cfg: dict = {}
    groups: dict = {}
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name == "config":
                section = "config"
            elif name.startswith("group "):
                try:
                    gid = int(name.split(None, 1)[1])
                except ValueError:
                    raise ScenarioParseError(f"bad group header {line!r}", line_no) from None
                section = ("group", gid)
                groups[gid] = {"center": None, "users": {}, "line": line_no}
            else:
                raise ScenarioParseError(f"unknown section {name!r}", line_no)
            continue
        if section == "config":
            if "=" not in line:
                raise ScenarioParseError(f"expected 'key = value', got {line!r}", line_no)
            key, _, value = line.partition("=")
            cfg[key.strip()] = (value.strip(), line_no)
        elif isinstance(section, tuple):
            gid = section[1]
            if ":" not in line:
                raise ScenarioParseError(f"expected 'center:' or 'user k:' line, got {line!r}", line_no)
            head, _, value = line.partition(":")
            head = head.strip()
            if head == "center":
                groups[gid]["center"] = _parse_floats(value, 3, line_no, "center")
            elif head.startswith("user"):
                try:
                    uid = int(head.split(None, 1)[1])
                except (IndexError, ValueError):
                    raise ScenarioParseError(f"bad user line {line!r}", line_no) from None
                groups[gid]["users"][uid] = _parse_floats(value, 3, line_no, f"user {uid}")
            else:
                raise ScenarioParseError(f"unknown field {head!r}", line_no)
        else:
            raise ScenarioParseError(f"content before any section: {line!r}", line_no)

    def need(key: str) -> tuple:
        if key not in cfg:
            raise ScenarioParseError(f"missing config key {key!r}")
        return cfg[key]

    def as_int(key: str) -> int:
        value, line_no = need(key)
        try:
            return int(value)
        except ValueError:
            raise ScenarioParseError(f"{key}: expected integer, got {value!r}", line_no) from None

    def as_float(key: str) -> float:
        value, line_no = need(key)
        try:
            return float(value)
        except ValueError:
            raise ScenarioParseError(f"{key}: expected float, got {value!r}", line_no) from None

    def as_floats(key: str, count: int) -> list:
        value, line_no = need(key)
        return _parse_floats(value, count, line_no, key)

    num_groups = as_int("num_groups")
    users_per_group = as_int("users_per_group")
    if num_groups < 1:
        raise ScenarioParseError(f"num_groups must be >= 1, got {num_groups}", need("num_groups")[1])
    if users_per_group < 1:
        raise ScenarioParseError(
            f"users_per_group must be >= 1, got {users_per_group}", need("users_per_group")[1]
        )
    ap = as_floats("aperture_len", 2)
    try:
        config = ScenarioConfig(
            num_groups=num_groups,
            users_per_group=users_per_group,
            group_box=tuple(as_floats("group_box", 6)),
            spread_radius=as_float("spread_radius"),
            min_group_distance=as_float("min_group_distance"),
            max_group_distance=as_float("max_group_distance"),
            transmit_power_budget=as_float("transmit_power_budget"),
            noise_variance=as_float("noise_variance"),
            rate_floors=tuple(as_floats("rate_floors", num_groups)),
            rng_seed=as_int("rng_seed"),
            grid_order=as_int("grid_order"),
            aperture=Aperture(ap[0], ap[1]),
            radio=Radio(as_float("wavelength"), as_float("impedance")),
        )
    except ValueError as exc:
        raise ScenarioParseError(str(exc)) from None

    centers = np.empty((num_groups, 3))
    positions = np.empty((config.total_users, 3))
    for g in range(num_groups):
        gid = g + 1
        if gid not in groups:
            raise ScenarioParseError(f"missing section [group {gid}]")
        entry = groups[gid]
        if entry["center"] is None:
            raise ScenarioParseError(f"[group {gid}] has no center line", entry["line"])
        centers[g] = entry["center"]
        for k in range(users_per_group):
            if k + 1 not in entry["users"]:
                raise ScenarioParseError(f"[group {gid}] missing user {k + 1}", entry["line"])
            positions[g * users_per_group + k] = entry["users"][k + 1]

    scenario = _build_from_positions(config, centers, positions)
    _validate_positions(scenario)
    return scenario


def load(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def _validate_positions(scenario: Scenario) -> None:
    c = scenario.config
    for g, k, geo in scenario.users:
        offset = geo.position - scenario.group_centers[g]
        if np.linalg.norm(offset) > c.spread_radius * (1 + 1e-9) + 1e-12:
            raise ScenarioParseError(
                f"user {k + 1} of group {g + 1} lies outside the spread radius"
            )
    g = c.num_groups
    if g > 1:
        diff = scenario.group_centers[:, None, :] - scenario.group_centers[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        iu = np.triu_indices(g, k=1)
        if np.any(dist[iu] < c.min_group_distance * (1 - 1e-9)):
            raise ScenarioParseError("group centers closer than min_group_distance")


def with_seed(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(config, rng_seed=seed)
