"""Special functions, small linear algebra, and seeded random streams."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "FresnelPair",
    "RngStream",
    "SingularMatrixError",
    "fresnel",
    "fresnel_array",
    "fresnel_kernel",
    "pseudo_inverse",
]

# Below this curvature the kernel ratio is evaluated by its analytic limit.
KERNEL_CURVATURE_FLOOR = 1e-6

_SERIES_CUTOFF = 1.5
_EPS = 1e-17
_MAXIT = 200


class FresnelPair(NamedTuple):
    """Cosine and sine Fresnel integrals evaluated at a common point."""

    c: float
    s: float


def _fresnel_series(x: float) -> FresnelPair:
    # Alternating Taylor series; converges rapidly for |x| <= 1.5.
    f = 0.5 * math.pi * x * x
    u = x  # running magnitude (pi/2)^(2k) x^(4k+1) / (2k)!
    v = x * f  # running magnitude (pi/2)^(2k+1) x^(4k+3) / (2k+1)!
    c = u
    s = v / 3.0
    sign = 1.0
    for k in range(1, _MAXIT):
        u *= f * f / ((2 * k - 1) * (2 * k))
        v *= f * f / ((2 * k) * (2 * k + 1))
        sign = -sign
        c += sign * u / (4 * k + 1)
        s += sign * v / (4 * k + 3)
        if u < _EPS * abs(c) and v < _EPS * abs(s):
            break
    return FresnelPair(c, s)


def _fresnel_continued_fraction(x: float) -> FresnelPair:
    # Lentz evaluation of the complex continued fraction for the tail
    # auxiliary function; accurate to near machine precision for |x| > 1.5.
    pix2 = math.pi * x * x
    b = complex(1.0, -pix2)
    cc = complex(1e300, 0.0)
    d = 1.0 / b
    h = d
    n = -1
    for _ in range(2, _MAXIT):
        n += 2
        a = -n * (n + 1)
        b += 4.0
        d = 1.0 / (a * d + b)
        cc = b + a / cc
        delta = cc * d
        h *= delta
        if abs(delta.real - 1.0) + abs(delta.imag) < 5e-17:
            break
    h *= complex(x, -x)
    phase = complex(math.cos(0.5 * pix2), math.sin(0.5 * pix2))
    cs = complex(0.5, 0.5) * (1.0 - phase * h)
    return FresnelPair(cs.real, cs.imag)


def fresnel(x: float) -> FresnelPair:
    """Fresnel integrals C(x) = int_0^x cos(pi t^2/2) dt and the sine analogue.

    Power series below |x| = 1.5, continued fraction above; absolute error
    is far below the 1e-10 target everywhere on the real line.

    Parameters
    ----------
    x : float
        Evaluation point; must be finite.

    Returns
    -------
    FresnelPair
        (C(x), S(x)); both are odd functions of x.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"fresnel requires a finite argument, got {x!r}")
    ax = abs(x)
    if ax == 0.0:
        return FresnelPair(0.0, 0.0)
    if ax <= _SERIES_CUTOFF:
        pair = _fresnel_series(ax)
    else:
        pair = _fresnel_continued_fraction(ax)
    if x < 0.0:
        return FresnelPair(-pair.c, -pair.s)
    return pair


def fresnel_array(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the Fresnel integrals over an array; returns (C, S)."""
    flat = np.asarray(x, dtype=float).ravel()
    c = np.empty_like(flat)
    s = np.empty_like(flat)
    for i, xi in enumerate(flat):
        c[i], s[i] = fresnel(xi)
    shape = np.shape(x)
    return c.reshape(shape), s.reshape(shape)


def fresnel_kernel(mismatch: float, curvature: float) -> float:
    """Normalized Fresnel-integral correlation kernel.

    Evaluates |dC + j dS| / (2*curvature) where dC and dS are the Fresnel
    integral differences across [mismatch - curvature, mismatch + curvature].
    For curvature below ``KERNEL_CURVATURE_FLOOR`` the ratio is a 0/0 form
    whose analytic limit has unit modulus, so 1.0 is returned.

    Parameters
    ----------
    mismatch : float
        Linear-phase offset of the window center.
    curvature : float
        Half-width of the integration window; must be nonnegative.
    """
    if not (math.isfinite(mismatch) and math.isfinite(curvature)):
        raise ValueError("fresnel_kernel requires finite arguments")
    if curvature < 0.0:
        raise ValueError(f"curvature must be nonnegative, got {curvature!r}")
    if curvature < KERNEL_CURVATURE_FLOOR:
        # lim dC/(2b) = cos(pi a^2 / 2), lim dS/(2b) = sin(pi a^2 / 2)
        return 1.0
    cp, sp = fresnel(mismatch + curvature)
    cm, sm = fresnel(mismatch - curvature)
    return abs(complex(cp - cm, sp - sm)) / (2.0 * curvature)


class SingularMatrixError(ValueError):
    """Raised when a pseudo-inverse is requested for a rank-deficient matrix."""

    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


def pseudo_inverse(m: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a full-row-rank complex matrix.

    Raises SingularMatrixError (carrying the offending singular value) when
    the smallest singular value falls below ``rcond`` times the largest.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError("pseudo_inverse expects a 2-D matrix")
    u, sv, vh = np.linalg.svd(m, full_matrices=False)
    if sv[0] == 0.0 or sv[-1] < rcond * sv[0]:
        raise SingularMatrixError(
            f"matrix is rank deficient (smallest singular value {sv[-1]:.3e})",
            smallest_singular_value=float(sv[-1]),
        )
    return (vh.conj().T * (1.0 / sv)) @ u.conj().T


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    if isinstance(label, str):
        return zlib.crc32(label.encode("utf-8"))
    raise TypeError(f"stream labels must be int or str, got {type(label)!r}")


@dataclass(frozen=True)
class RngStream:
    """Seeded, hierarchically derivable random stream.

    Identical (seed, path) pairs always reproduce the same draw sequence;
    every report records the seed it consumed.
    """

    seed: int
    path: tuple = field(default_factory=tuple)

    def derive(self, *labels) -> "RngStream":
        """Child stream; labels may be ints or stable string tags."""
        return RngStream(self.seed, self.path + tuple(_label_to_int(l) for l in labels))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=self.path))
