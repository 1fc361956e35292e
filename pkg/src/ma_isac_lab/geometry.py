"""Planar movable-antenna geometry and line-of-sight channel primitives.

Arrays live in a square region [0, A]^2 with a minimum inter-antenna spacing D.
Directions are carried as spatial wavevector pairs (alpha, beta) with
alpha = sin(theta)cos(phi) and beta = cos(theta), so every antenna at (x, y)
contributes the phase exp(j*(2*pi/lambda)*(x*alpha + y*beta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "Wavevector",
    "ArrayLayout",
    "SceneConstants",
    "PathGain",
    "wavevector_from_angles",
    "field_response",
    "path_gain",
    "echo_channel",
    "comm_channel",
]


@dataclass(frozen=True)
class Wavevector:
    """Spatial angle pair (alpha, beta), each confined to [-1, 1]."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (-1.0 <= self.alpha <= 1.0) or not (-1.0 <= self.beta <= 1.0):
            raise ConfigError(
                f"wavevector components must lie in [-1, 1], got "
                f"({self.alpha}, {self.beta})"
            )


def wavevector_from_angles(theta: float, phi: float) -> Wavevector:
    """Map elevation/azimuth (radians) to the (alpha, beta) wavevector."""
    return Wavevector(math.sin(theta) * math.cos(phi), math.cos(theta))


@dataclass(frozen=True)
class ArrayLayout:
    """Antenna coordinates (K, 2) inside a square region with a spacing floor.

    Validity (box membership, pairwise spacing) is checked by ``validate``
    on demand, never at construction: optimizer intermediates may pass
    through slightly infeasible points.
    """

    positions: np.ndarray
    region_side: float
    min_spacing: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ConfigError(f"positions must be (K, 2), got shape {pos.shape}")
        if not (self.region_side > 0.0) or self.min_spacing < 0.0:
            raise ConfigError("region_side must be > 0 and min_spacing >= 0")
        pos = pos.copy()
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.positions[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.positions[:, 1]

    def with_axis(self, axis: int, coords: np.ndarray) -> "ArrayLayout":
        """Copy of the layout with one coordinate axis replaced."""
        pos = np.array(self.positions)
        pos[:, axis] = coords
        return ArrayLayout(pos, self.region_side, self.min_spacing)

    def translated(self, dx: float, dy: float) -> "ArrayLayout":
        return ArrayLayout(
            self.positions + np.array([dx, dy]), self.region_side, self.min_spacing
        )

    def min_pairwise_distance(self) -> float:
        if self.count < 2:
            return math.inf
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        iu = np.triu_indices(self.count, k=1)
        return float(dist[iu].min())

    def validate(self, tol: float = 1e-9) -> None:
        """Raise ConfigError if any antenna leaves the box or sits too close."""
        pos = self.positions
        if pos.min() < -tol or pos.max() > self.region_side + tol:
            raise ConfigError(
                f"antenna outside [0, {self.region_side}]^2 region "
                f"(coords span [{pos.min()}, {pos.max()}])"
            )
        if self.count >= 2:
            dmin = self.min_pairwise_distance()
            if dmin < self.min_spacing - tol:
                raise ConfigError(
                    f"minimum pairwise distance {dmin:.6g} below spacing floor "
                    f"{self.min_spacing:.6g}"
                )


@dataclass(frozen=True)
class SceneConstants:
    """Physical constants of the two-stage scene (SI units, linear scale)."""

    wavelength: float
    sensing_power: float
    comm_power: float
    noise_sensing: float
    noise_comm: float
    noise_eve: float
    snapshots: int
    rcs: float
    dist_bc: float
    dist_be: float
    crb_threshold: float = 1e-3

    def __post_init__(self):
        positives = {
            "wavelength": self.wavelength,
            "sensing_power": self.sensing_power,
            "comm_power": self.comm_power,
            "noise_sensing": self.noise_sensing,
            "noise_comm": self.noise_comm,
            "noise_eve": self.noise_eve,
            "rcs": self.rcs,
            "dist_bc": self.dist_bc,
            "dist_be": self.dist_be,
            "crb_threshold": self.crb_threshold,
        }
        for name, value in positives.items():
            if not (value > 0.0) or not math.isfinite(value):
                raise ConfigError(f"{name} must be positive and finite, got {value}")
        if int(self.snapshots) != self.snapshots or self.snapshots < 1:
            raise ConfigError(f"snapshots must be a positive integer, got {self.snapshots}")


@dataclass(frozen=True)
class PathGain:
    """Complex link gain together with the link kind that produced it."""

    value: complex
    kind: str


_GAIN_KINDS = ("sensing", "legit", "eve")


def path_gain(kind: str, constants: SceneConstants) -> PathGain:
    """Closed-form LoS gain for one of the three links.

    "sensing" is the round-trip base -> eavesdropper -> base reflection
    (amplitude ~ d^-2 through the radar cross section), "legit" and "eve" are
    the one-way downlink gains (~ d^-1).
    """
    lam = constants.wavelength
    if kind == "sensing":
        d = constants.dist_be
        amp = math.sqrt(lam**2 * constants.rcs / (64.0 * math.pi**3 * d**4))
        phase = 4.0 * math.pi * d / lam
    elif kind == "legit":
        d = constants.dist_bc
        amp = lam / (4.0 * math.pi * d)
        phase = 2.0 * math.pi * d / lam
    elif kind == "eve":
        d = constants.dist_be
        amp = lam / (4.0 * math.pi * d)
        phase = 2.0 * math.pi * d / lam
    else:
        raise ConfigError(f"unknown path gain kind {kind!r}, expected one of {_GAIN_KINDS}")
    return PathGain(amp * complex(math.cos(phase), math.sin(phase)), kind)


def field_response(layout: ArrayLayout, wv: Wavevector, wavelength: float) -> np.ndarray:
    """Unit-modulus field-response vector of the array toward (alpha, beta)."""
    k = 2.0 * math.pi / wavelength
    return np.exp(1j * k * (layout.x * wv.alpha + layout.y * wv.beta))


def _gain_value(zeta) -> complex:
    return zeta.value if isinstance(zeta, PathGain) else complex(zeta)


def echo_channel(
    tx: ArrayLayout, rx: ArrayLayout, wv: Wavevector, zeta, wavelength: float
) -> np.ndarray:
    """Rank-one round-trip sensing channel zeta * f g^H, shape (M, N)."""
    g = field_response(tx, wv, wavelength)
    f = field_response(rx, wv, wavelength)
    return _gain_value(zeta) * np.outer(f, g.conj())


def comm_channel(tx: ArrayLayout, wv: Wavevector, zeta, wavelength: float) -> np.ndarray:
    """Downlink channel vector zeta * g, shape (N,); zeta may be a PathGain."""
    return _gain_value(zeta) * field_response(tx, wv, wavelength)
