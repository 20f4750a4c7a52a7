"""Continuous-aperture-array multi-group multicast: channels, optimizers, harness."""

from .field import (
    Aperture,
    ApertureGrid,
    ChannelSample,
    Radio,
    UserGeometry,
    channel_scalar,
    green_dyadic,
    inner_product,
    make_grid,
    sample_channel,
)
from .scenario import Scenario, ScenarioConfig, generate, load, save

__all__ = [
    "Aperture",
    "ApertureGrid",
    "ChannelSample",
    "Radio",
    "UserGeometry",
    "channel_scalar",
    "green_dyadic",
    "inner_product",
    "make_grid",
    "sample_channel",
    "Scenario",
    "ScenarioConfig",
    "generate",
    "load",
    "save",
]
