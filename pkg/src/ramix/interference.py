"""Rotation-aware normalized inter-user interference under uniform rotation.

Two correlation kinds are analyzed for a uniformly rotated array (scalar
phi): near-near (two spherical-wave users) and mixed-field (a spherical-wave
user against a planar-wave beam).  Each kind has an exact summation form and
a Fresnel closed form driven by two parameters: a linear-phase ``mismatch``
and a quadratic-phase ``curvature``.  Subarray-wise (non-uniform) rotation
has no closed form and is always handled through full steering vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayConfig
from .numerics import fresnel_kernel

__all__ = [
    "DegenerateCurvatureError",
    "InterferenceReport",
    "ZoneParams",
    "flat_phase_correlation",
    "kernel_value",
    "mixed_exact",
    "mixed_fresnel",
    "mixed_params",
    "near_near_exact",
    "near_near_fresnel",
    "near_near_params",
    "optimal_same_angle_rotation",
]

# Relative curvature below which the quadratic phase is treated as cancelled.
_DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class ZoneParams:
    """Arguments of the Fresnel correlation kernel.

    mismatch : linear-phase offset between the two steering vectors.
    curvature : aperture-curvature parameter; nonnegative.
    """

    mismatch: float
    curvature: float

    def __post_init__(self):
        if not (math.isfinite(self.mismatch) and math.isfinite(self.curvature)):
            raise ValueError("zone parameters must be finite")
        if self.curvature < 0:
            raise ValueError("curvature must be nonnegative")


class DegenerateCurvatureError(ValueError):
    """Quadratic phase terms cancel; the Fresnel form divides by zero.

    Carries the residual linear mismatch ``u`` so callers can fall back to
    ``flat_phase_correlation``.
    """

    def __init__(self, u: float):
        super().__init__("curvature difference is zero; use the flat-phase correlation")
        self.u = u


def _exact_sum(cfg: ArrayConfig, quad_per_m: np.ndarray, lin: np.ndarray) -> np.ndarray:
    # (1/N) |sum_n exp(j 2pi/lambda (n^2 d^2 quad + n d lin))| over the ULA.
    n = np.arange(-cfg.half_span, cfg.half_span + 1)
    d = cfg.spacing_m
    k = 2.0 * math.pi / cfg.wavelength_m
    phase = k * (
        np.multiply.outer(quad_per_m, n.astype(float) ** 2) * d * d
        + np.multiply.outer(lin, n.astype(float)) * d
    )
    return np.abs(np.exp(1j * phase).sum(axis=-1)) / cfg.n_antennas


def near_near_exact(cfg, phi, theta_a, range_a, theta_b, range_b):
    """Exact |b(theta_a, r_a)^H b(theta_b, r_b)| under uniform rotation phi.

    Direct summation over all N elements; phi may be a scalar or 1-D array.
    """
    if range_a <= 0 or range_b <= 0:
        raise ValueError("user distances must be positive")
    phi_arr = np.asarray(phi, dtype=float)
    quad = np.sin(phi_arr - theta_a) ** 2 / (2.0 * range_a) - np.sin(phi_arr - theta_b) ** 2 / (
        2.0 * range_b
    )
    lin = np.cos(phi_arr - theta_b) - np.cos(phi_arr - theta_a)
    out = _exact_sum(cfg, quad, lin)
    return float(out) if np.isscalar(phi) or phi_arr.ndim == 0 else out


def mixed_exact(cfg, phi, theta, range_m, psi):
    """Exact |b(theta, r)^H a(psi)| under uniform rotation phi."""
    if range_m <= 0:
        raise ValueError("user distance must be positive")
    phi_arr = np.asarray(phi, dtype=float)
    quad = np.sin(phi_arr - theta) ** 2 / (2.0 * range_m) + np.zeros_like(phi_arr)
    lin = np.cos(psi - phi_arr) - np.cos(phi_arr - theta)
    out = _exact_sum(cfg, quad, lin)
    return float(out) if np.isscalar(phi) or phi_arr.ndim == 0 else out


def _params(cfg: ArrayConfig, curvature_per_m: float, dcos: float, degenerate_scale: float):
    # curvature_per_m = |sum of quadratic 1/r terms|; dcos = linear mismatch.
    # The closed form assumes half-wavelength spacing; written via d and
    # lambda separately it stays consistent with the exact sum for any d.
    d = cfg.spacing_m
    lam = cfg.wavelength_m
    if curvature_per_m <= _DEGENERATE_RTOL * degenerate_scale:
        raise DegenerateCurvatureError(u=dcos)
    curvature = 0.5 * cfg.n_antennas * d * math.sqrt(2.0 * curvature_per_m / lam)
    mismatch = dcos * math.sqrt(2.0 / (lam * curvature_per_m))
    return ZoneParams(mismatch=mismatch, curvature=curvature)


def near_near_params(cfg, phi, theta_a, range_a, theta_b, range_b) -> ZoneParams:
    """Fresnel kernel parameters for a near-near pair.

    Raises DegenerateCurvatureError when the two users' quadratic phase
    profiles cancel (then the correlation is flat-phase and the caller
    should use ``flat_phase_correlation``).
    """
    if range_a <= 0 or range_b <= 0:
        raise ValueError("user distances must be positive")
    sa = math.sin(phi - theta_a) ** 2 / range_a
    sb = math.sin(phi - theta_b) ** 2 / range_b
    dcos = math.cos(phi - theta_a) - math.cos(phi - theta_b)
    return _params(cfg, abs(sa - sb), dcos, sa + sb)


def mixed_params(cfg, phi, theta, range_m, psi) -> ZoneParams:
    """Fresnel kernel parameters for a near-far (mixed-field) pair."""
    if range_m <= 0:
        raise ValueError("user distance must be positive")
    s = math.sin(phi - theta) ** 2 / range_m
    dcos = math.cos(phi - theta) - math.cos(psi - phi)
    return _params(cfg, s, dcos, 1.0 / range_m)


def kernel_value(params: ZoneParams) -> float:
    """Closed-form correlation from kernel parameters."""
    return fresnel_kernel(params.mismatch, params.curvature)


def flat_phase_correlation(cfg: ArrayConfig, u: float) -> float:
    """Exact correlation when the quadratic phase cancels.

    The sum collapses to a geometric series with magnitude
    |sin(N x / 2) / (N sin(x / 2))| for per-element phase step
    x = 2 pi d u / lambda.
    """
    x = 2.0 * math.pi * cfg.spacing_m * u / cfg.wavelength_m
    half = 0.5 * x
    n = cfg.n_antennas
    s = math.sin(half)
    if abs(s) < 1e-15:
        return 1.0
    return abs(math.sin(n * half) / (n * s))


def near_near_fresnel(cfg, phi, theta_a, range_a, theta_b, range_b) -> float:
    """Closed-form near-near correlation, with the flat-phase fallback."""
    try:
        return kernel_value(near_near_params(cfg, phi, theta_a, range_a, theta_b, range_b))
    except DegenerateCurvatureError as e:
        return flat_phase_correlation(cfg, e.u)


def mixed_fresnel(cfg, phi, theta, range_m, psi) -> float:
    """Closed-form mixed-field correlation, with the flat-phase fallback."""
    try:
        return kernel_value(mixed_params(cfg, phi, theta, range_m, psi))
    except DegenerateCurvatureError as e:
        return flat_phase_correlation(cfg, e.u)


def optimal_same_angle_rotation(angle_rad: float, phi_min: float, phi_max: float) -> float:
    """Interference-minimizing uniform rotation for two users at one angle.

    Pushes |phi - angle| toward pi/2 within [phi_min, phi_max]; at boresight
    (angle = pi/2) rotation cannot help and 0 is returned.  Serves both the
    near-near (equal theta) and mixed-field (psi = theta) cases.
    """
    if not phi_min <= 0.0 <= phi_max:
        raise ValueError("admissible range must contain 0")
    if angle_rad == math.pi / 2:
        return 0.0
    if angle_rad > math.pi / 2:
        return min(angle_rad - math.pi / 2, phi_max)
    return max(angle_rad - math.pi / 2, phi_min)


@dataclass(frozen=True)
class InterferenceReport:
    """One exact-vs-closed-form comparison row."""

    kind: str  # "near-near" or "near-far"
    phi: float
    theta_k: float
    r_k: float
    other_angle: float  # theta_i for near-near, psi for near-far
    r_i: float  # nan for near-far rows
    exact: float
    fresnel_approx: float
    mismatch: float
    curvature: float

    CSV_COLUMNS = (
        "kind",
        "phi_rad",
        "theta_k_rad",
        "r_k_m",
        "other_angle_rad",
        "r_i_m",
        "exact",
        "approx",
        "mismatch",
        "curvature",
    )

    def csv_row(self) -> tuple:
        return (
            self.kind,
            self.phi,
            self.theta_k,
            self.r_k,
            self.other_angle,
            self.r_i,
            self.exact,
            self.fresnel_approx,
            self.mismatch,
            self.curvature,
        )


def near_near_report(cfg, phi, theta_a, range_a, theta_b, range_b) -> InterferenceReport:
    exact = near_near_exact(cfg, phi, theta_a, range_a, theta_b, range_b)
    try:
        p = near_near_params(cfg, phi, theta_a, range_a, theta_b, range_b)
        approx = kernel_value(p)
    except DegenerateCurvatureError as e:
        p = ZoneParams(0.0, 0.0)
        approx = flat_phase_correlation(cfg, e.u)
    return InterferenceReport(
        "near-near", phi, theta_a, range_a, theta_b, range_b, exact, approx, p.mismatch, p.curvature
    )


def mixed_report(cfg, phi, theta, range_m, psi) -> InterferenceReport:
    exact = mixed_exact(cfg, phi, theta, range_m, psi)
    try:
        p = mixed_params(cfg, phi, theta, range_m, psi)
        approx = kernel_value(p)
    except DegenerateCurvatureError as e:
        p = ZoneParams(0.0, 0.0)
        approx = flat_phase_correlation(cfg, e.u)
    return InterferenceReport(
        "near-far", phi, theta, range_m, psi, math.nan, exact, approx, p.mismatch, p.curvature
    )
