"""Rotated subarray geometry, steering vectors, and multipath channel synthesis.

The base station is a uniform linear array of N antennas centered at the
origin, split into Q independently rotatable subarrays.  Rotating subarray q
by phi_q pivots each of its elements about the origin, so the element that
sits at signed offset delta along the x axis moves to
(delta cos phi_q, delta sin phi_q).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SPEED_OF_LIGHT",
    "ArrayConfig",
    "ChannelSet",
    "FarUser",
    "NearUser",
    "RotationState",
    "Scenario",
    "ScenarioValidationError",
    "element_position",
    "far_steering",
    "near_steering",
    "rayleigh_distance",
    "synthesize_channels",
]

SPEED_OF_LIGHT = 299792458.0


def rayleigh_distance(n_antennas: int, spacing_m: float, wavelength_m: float) -> float:
    """Near/far-field boundary 2 D^2 / lambda for aperture D = (N-1) d."""
    aperture = (n_antennas - 1) * spacing_m
    return 2.0 * aperture * aperture / wavelength_m


@dataclass(frozen=True)
class ArrayConfig:
    """Rotatable uniform linear array.

    N and Q must be odd.  Each subarray holds floor(N/Q) elements, with the
    (always even) remainder split between the two outermost subarrays.
    """

    n_antennas: int
    n_subarrays: int = 1
    carrier_hz: float = 24e9
    spacing_m: float | None = None  # None selects half-wavelength spacing

    def __post_init__(self):
        n, q = self.n_antennas, self.n_subarrays
        if n < 1 or n % 2 == 0:
            raise ValueError(f"n_antennas must be odd and positive, got {n}")
        if q < 1 or q % 2 == 0:
            raise ValueError(f"n_subarrays must be odd and positive, got {q}")
        if q > n:
            raise ValueError(f"n_subarrays ({q}) cannot exceed n_antennas ({n})")
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")
        if self.spacing_m is None:
            object.__setattr__(self, "spacing_m", 0.5 * self.wavelength_m)
        if self.spacing_m <= 0:
            raise ValueError("spacing_m must be positive")
        if self.subarray_size % 2 == 0:
            raise ValueError(
                f"per-subarray element count floor({n}/{q}) = {self.subarray_size} "
                "must be odd"
            )

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def aperture_m(self) -> float:
        return (self.n_antennas - 1) * self.spacing_m

    @property
    def rayleigh_m(self) -> float:
        return rayleigh_distance(self.n_antennas, self.spacing_m, self.wavelength_m)

    @property
    def half_span(self) -> int:
        """Largest element index: elements run -half_span .. half_span."""
        return (self.n_antennas - 1) // 2

    @property
    def half_subarrays(self) -> int:
        return (self.n_subarrays - 1) // 2

    @property
    def subarray_size(self) -> int:
        """Nominal elements per subarray (outermost two absorb the remainder)."""
        return self.n_antennas // self.n_subarrays

    def element_subarrays(self) -> np.ndarray:
        """Subarray index (-half_subarrays..half_subarrays) of every element."""
        n = np.arange(-self.half_span, self.half_span + 1)
        q = np.rint(n / self.subarray_size).astype(int)
        return np.clip(q, -self.half_subarrays, self.half_subarrays)

    def element_offsets_m(self) -> np.ndarray:
        """Signed element offsets delta along the unrotated axis, in meters."""
        n = np.arange(-self.half_span, self.half_span + 1)
        return n * self.spacing_m


@dataclass(frozen=True)
class RotationState:
    """Per-subarray rotation angles with their admissible ranges."""

    angles_rad: np.ndarray
    range_rad: np.ndarray  # shape (Q, 2) of [min, max] per subarray

    def __post_init__(self):
        angles = np.atleast_1d(np.asarray(self.angles_rad, dtype=float))
        ranges = np.asarray(self.range_rad, dtype=float)
        if ranges.ndim == 1:
            ranges = np.tile(ranges, (angles.size, 1))
        if ranges.shape != (angles.size, 2):
            raise ValueError(f"range_rad shape {ranges.shape} does not match {angles.size} angles")
        if np.any(ranges[:, 0] > ranges[:, 1]):
            raise ValueError("rotation range has min > max")
        bad = (angles < ranges[:, 0] - 1e-12) | (angles > ranges[:, 1] + 1e-12)
        if np.any(bad):
            idx = np.flatnonzero(bad)
            raise ValueError(f"rotation angles out of admissible range at subarrays {idx.tolist()}")
        object.__setattr__(self, "angles_rad", angles)
        object.__setattr__(self, "range_rad", ranges)

    @classmethod
    def uniform(cls, n_subarrays: int, angle_rad: float, range_rad=(-math.pi / 6, math.pi / 6)):
        """All subarrays share one rotation angle."""
        return cls(np.full(n_subarrays, float(angle_rad)), np.asarray(range_rad, dtype=float))

    @classmethod
    def zeros(cls, n_subarrays: int, range_rad=(-math.pi / 6, math.pi / 6)):
        return cls.uniform(n_subarrays, 0.0, range_rad)

    @property
    def n_subarrays(self) -> int:
        return self.angles_rad.size

    def obtuse_violations(self) -> int:
        """Number of unordered subarray pairs with |phi_p - phi_q| < pi/2."""
        a = self.angles_rad
        diff = np.abs(a[:, None] - a[None, :])
        viol = (diff < math.pi / 2) & ~np.eye(a.size, dtype=bool)
        return int(viol.sum() // 2)

    def obtuse_pairs_ok(self) -> bool:
        return self.obtuse_violations() == 0


def element_position(cfg: ArrayConfig, rot: RotationState, q: int, n_bar: int) -> tuple[float, float]:
    """Rotated (x, y) position in meters of element n_bar within subarray q.

    n_bar indexes elements relative to the subarray center; the two
    outermost subarrays extend outward to absorb the element remainder.
    """
    if rot.n_subarrays != cfg.n_subarrays:
        raise ValueError("rotation state does not match array config")
    hq = cfg.half_subarrays
    if not -hq <= q <= hq:
        raise IndexError(f"subarray index {q} outside [-{hq}, {hq}]")
    half = (cfg.subarray_size - 1) // 2
    extra = (cfg.n_antennas - cfg.n_subarrays * cfg.subarray_size) // 2
    lo, hi = -half, half
    if q == -hq:
        lo -= extra
    if q == hq:
        hi += extra
    if not lo <= n_bar <= hi:
        raise IndexError(f"element index {n_bar} outside [{lo}, {hi}] for subarray {q}")
    delta = (q * cfg.subarray_size + n_bar) * cfg.spacing_m
    phi = rot.angles_rad[q + hq]
    return (delta * math.cos(phi), delta * math.sin(phi))


def _element_phis(cfg: ArrayConfig, rot: RotationState) -> np.ndarray:
    if rot.n_subarrays != cfg.n_subarrays:
        raise ValueError("rotation state does not match array config")
    return rot.angles_rad[cfg.element_subarrays() + cfg.half_subarrays]


def near_steering(
    cfg: ArrayConfig,
    rot: RotationState,
    theta_rad: float,
    range_m: float,
    exact: bool = False,
) -> np.ndarray:
    """Near-field steering vector (length N, norm 1) for a user at (theta, r).

    The per-element path difference uses the second-order expansion
    -delta cos(phi - theta) + delta^2 sin^2(phi - theta) / (2 r); pass
    ``exact=True`` to use the exact square-root distance instead.
    """
    if range_m <= 0:
        raise ValueError(f"range_m must be positive, got {range_m!r}")
    delta = cfg.element_offsets_m()
    phi = _element_phis(cfg, rot)
    rel = phi - theta_rad
    if exact:
        dr = np.sqrt(range_m**2 + delta**2 - 2.0 * range_m * delta * np.cos(rel)) - range_m
    else:
        dr = -delta * np.cos(rel) + delta**2 * np.sin(rel) ** 2 / (2.0 * range_m)
    k = 2.0 * math.pi / cfg.wavelength_m
    return np.exp(-1j * k * dr) / math.sqrt(cfg.n_antennas)


def far_steering(cfg: ArrayConfig, rot: RotationState, psi_rad: float) -> np.ndarray:
    """Far-field (planar wave) steering vector, length N, norm 1.

    Uses the same path-difference convention as ``near_steering``
    (r_n - r = -delta cos(psi - phi)), so the near-field vector converges
    to this one as the user distance grows at any angle.
    """
    delta = cfg.element_offsets_m()
    phi = _element_phis(cfg, rot)
    dr = -delta * np.cos(psi_rad - phi)
    k = 2.0 * math.pi / cfg.wavelength_m
    return np.exp(-1j * k * dr) / math.sqrt(cfg.n_antennas)


@dataclass(frozen=True)
class NearUser:
    """Spherical-wave user with an optional set of scattered paths."""

    theta_rad: float
    range_m: float
    los_gain: complex
    scatterers: tuple = ()  # (theta_rad, range_m, complex gain) per path

    def __post_init__(self):
        if not 0.0 < self.theta_rad < math.pi:
            raise ValueError(f"theta_rad must lie in (0, pi), got {self.theta_rad!r}")
        if self.range_m <= 0:
            raise ValueError(f"range_m must be positive, got {self.range_m!r}")


@dataclass(frozen=True)
class FarUser:
    """Planar-wave user with a preconfigured transmit power."""

    psi_rad: float
    los_gain: complex
    tx_power_w: float
    scatterers: tuple = ()  # (psi_rad, complex gain) per path
    range_m: float | None = None  # nominal distance used for path loss

    def __post_init__(self):
        if not 0.0 < self.psi_rad < math.pi:
            raise ValueError(f"psi_rad must lie in (0, pi), got {self.psi_rad!r}")
        if self.tx_power_w <= 0:
            raise ValueError(f"tx_power_w must be positive, got {self.tx_power_w!r}")


class ScenarioValidationError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class Scenario:
    """Full problem instance: array, users, powers, noise, rotation limits."""

    cfg: ArrayConfig
    near_users: tuple
    far_users: tuple
    power_budget_w: float
    noise_w: float
    rotation_range_rad: tuple = (-math.pi / 6, math.pi / 6)
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "near_users", tuple(self.near_users))
        object.__setattr__(self, "far_users", tuple(self.far_users))
        if self.power_budget_w <= 0:
            raise ValueError("power_budget_w must be positive")
        if self.noise_w <= 0:
            raise ValueError("noise_w must be positive")

    @property
    def n_near(self) -> int:
        return len(self.near_users)

    @property
    def n_far(self) -> int:
        return len(self.far_users)

    def rotation_ranges(self) -> np.ndarray:
        return np.tile(np.asarray(self.rotation_range_rad, dtype=float), (self.cfg.n_subarrays, 1))

    def validate(self) -> None:
        """Check field classification; raises listing every offending user."""
        zray = self.cfg.rayleigh_m
        problems = []
        for k, u in enumerate(self.near_users):
            if u.range_m >= zray:
                problems.append(
                    f"near user {k} at r={u.range_m:.2f} m is beyond the Rayleigh "
                    f"distance {zray:.2f} m"
                )
        for m, u in enumerate(self.far_users):
            if u.range_m is not None and u.range_m < zray:
                problems.append(
                    f"far user {m} at r={u.range_m:.2f} m is inside the Rayleigh "
                    f"distance {zray:.2f} m"
                )
        if problems:
            raise ScenarioValidationError(problems)


@dataclass(frozen=True)
class ChannelSet:
    """Realized channel vectors for one rotation state (rows are users)."""

    near: np.ndarray  # (K, N) complex
    far: np.ndarray  # (M, N) complex

    def __post_init__(self):
        self.near.setflags(write=False)
        self.far.setflags(write=False)


def synthesize_channels(cfg: ArrayConfig, rot: RotationState, scenario: Scenario) -> ChannelSet:
    """Multipath channels sqrt(N) * sum of gain-weighted steering vectors."""
    scenario.validate()
    root_n = math.sqrt(cfg.n_antennas)
    near = np.zeros((scenario.n_near, cfg.n_antennas), dtype=complex)
    for k, u in enumerate(scenario.near_users):
        h = u.los_gain * near_steering(cfg, rot, u.theta_rad, u.range_m)
        for theta_l, r_l, g_l in u.scatterers:
            h = h + g_l * near_steering(cfg, rot, theta_l, r_l)
        near[k] = root_n * h
    far = np.zeros((scenario.n_far, cfg.n_antennas), dtype=complex)
    for m, u in enumerate(scenario.far_users):
        h = u.los_gain * far_steering(cfg, rot, u.psi_rad)
        for psi_l, g_l in u.scatterers:
            h = h + g_l * far_steering(cfg, rot, psi_l)
        far[m] = root_n * h
    return ChannelSet(near=near, far=far)
