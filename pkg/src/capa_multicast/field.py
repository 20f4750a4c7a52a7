"""Aperture geometry, free-space dyadic field evaluation, and channel sampling.

The transmit surface is a rectangle centered at the origin with normal along
z. A y-polarized source current radiates toward point users in the z > 0
half-space; each user's scalar channel is the projection of the dyadic field
onto that user's (unit) polarization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError
from .quadrature import interval_rule

MIN_SOURCE_DISTANCE = 1e-9  # meters

FREE_SPACE_IMPEDANCE = 120.0 * np.pi  # ohms

# Source polarization: only the y-component of the surface current is excited.
SOURCE_POLARIZATION = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class Aperture:
    """Rectangular radiating surface centered at the origin, normal along z."""

    len_x: float = 0.5
    len_y: float = 0.5

    def __post_init__(self):
        if self.len_x <= 0 or self.len_y <= 0:
            raise ValueError("aperture side lengths must be positive")

    @property
    def area(self) -> float:
        return self.len_x * self.len_y


@dataclass(frozen=True)
class Radio:
    """Narrowband carrier description: wavelength and medium impedance."""

    wavelength: float = 0.125
    impedance: float = FREE_SPACE_IMPEDANCE

    def __post_init__(self):
        if self.wavelength <= 0 or self.impedance <= 0:
            raise ValueError("wavelength and impedance must be positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength


@dataclass(frozen=True, eq=False)
class UserGeometry:
    """A point receiver: position in front of the aperture plus unit polarization."""

    position: np.ndarray
    polarization: np.ndarray = field(default_factory=lambda: SOURCE_POLARIZATION.copy())

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        pol = np.asarray(self.polarization, dtype=float).reshape(3)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "polarization", pol)
        if abs(np.linalg.norm(pol) - 1.0) > 1e-12:
            raise ValueError("polarization must be a unit vector")
        if pos[2] <= 0:
            raise ValueError("user must sit in front of the aperture (z > 0)")


@dataclass(frozen=True, eq=False)
class ApertureGrid:
    """Tensor-product Gauss-Legendre sampling of the aperture surface."""

    aperture: Aperture
    order_per_axis: int
    nodes: np.ndarray    # (M*M, 3)
    weights: np.ndarray  # (M*M,) product weights, units m^2

    @property
    def size(self) -> int:
        return self.nodes.shape[0]


def make_grid(aperture: Aperture, order_per_axis: int = 20) -> ApertureGrid:
    """Build the shared quadrature grid: M nodes per axis, product weights."""
    xs, wx = interval_rule(order_per_axis, aperture.len_x / 2.0)
    ys, wy = interval_rule(order_per_axis, aperture.len_y / 2.0)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    weights = np.outer(wx, wy).ravel()
    return ApertureGrid(aperture, order_per_axis, nodes, weights)


def green_dyadic(r: np.ndarray, s: np.ndarray, radio: Radio) -> np.ndarray:
    """Dyadic field kernel between source point s and observation point r.

    Returns -(j*eta*exp(-j*k*d) / (2*lambda*d)) * (I - uu^T) with d = |r - s|
    and u the unit direction; the rank-2 projector removes the radial field
    component.
    """
    r = np.asarray(r, dtype=float).reshape(3)
    s = np.asarray(s, dtype=float).reshape(3)
    diff = r - s
    d = float(np.linalg.norm(diff))
    if d < MIN_SOURCE_DISTANCE:
        raise DegenerateGeometryError(f"source-observer distance {d:.3e} m below {MIN_SOURCE_DISTANCE} m")
    u = diff / d
    projector = np.eye(3) - np.outer(u, u)
    prefactor = -1j * radio.impedance * np.exp(-1j * radio.wavenumber * d) / (2.0 * radio.wavelength * d)
    return prefactor * projector


def channel_scalar(user: UserGeometry, s: np.ndarray, radio: Radio) -> complex:
    """Scalar channel at one surface point: u_user^T G(r, s) u_src."""
    g = green_dyadic(user.position, s, radio)
    return complex(user.polarization @ g @ SOURCE_POLARIZATION)


@dataclass(frozen=True, eq=False)
class ChannelSample:
    """One user's channel tabulated on the quadrature grid, in node order."""

    values: np.ndarray  # (grid.size,) complex
    noise_variance: float
    group: int = 0
    index: int = 0


def sample_channel(
    user: UserGeometry,
    grid: ApertureGrid,
    radio: Radio,
    noise_variance: float = 0.0,
    group: int = 0,
    index: int = 0,
) -> ChannelSample:
    """Tabulate the user's channel on all grid nodes (vectorized).

    Identical to evaluating `channel_scalar` node by node; the projector is
    applied in scalar form: (u_p . u_s) - (u_p . u)(u . u_s).
    """
    diff = user.position[None, :] - grid.nodes  # (N, 3)
    d = np.linalg.norm(diff, axis=1)
    if np.any(d < MIN_SOURCE_DISTANCE):
        raise DegenerateGeometryError("grid node coincides with user position")
    u = diff / d[:, None]
    up, us = user.polarization, SOURCE_POLARIZATION
    proj = float(up @ us) - (u @ up) * (u @ us)
    pref = -1j * radio.impedance * np.exp(-1j * radio.wavenumber * d) / (2.0 * radio.wavelength * d)
    return ChannelSample(pref * proj, noise_variance, group, index)


def inner_product(a: np.ndarray, b: np.ndarray, grid: ApertureGrid) -> complex:
    """Surface inner product <a, b> = sum_n w_n a_n conj(b_n)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (grid.size,) or b.shape != (grid.size,):
        raise ValueError(f"samples must have shape ({grid.size},); got {a.shape} and {b.shape}")
    # multiply a*conj(b) first so swapping arguments conjugates bitwise
    return complex(np.sum(grid.weights * (a * np.conj(b))))
