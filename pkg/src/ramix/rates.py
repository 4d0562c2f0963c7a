"""Precoder construction and achievable-rate evaluation.

The base station points one analog beam per spherical-wave user
(matched filter w = h / ||h||) while planar-wave users keep preconfigured
matched-filter beams.  The digital stage is either the identity or a
zero-forcing combiner that nulls the in-group cross terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ChannelSet, Scenario
from .numerics import pseudo_inverse

__all__ = [
    "DegenerateChannelError",
    "PowerAllocation",
    "PrecoderSet",
    "RateBreakdown",
    "build_precoders",
    "evaluate_rates",
    "interference_free_bound",
]

DIGITAL_MODES = ("identity", "zero-forcing")


class DegenerateChannelError(ValueError):
    """A channel vector is numerically zero; no beam direction exists."""


@dataclass(frozen=True)
class PrecoderSet:
    """Unit-norm transmit beams, one row per user."""

    near: np.ndarray  # (K, N) complex
    far: np.ndarray  # (M, N) complex
    digital_mode: str = "identity"

    def __post_init__(self):
        if self.digital_mode not in DIGITAL_MODES:
            raise ValueError(f"digital_mode must be one of {DIGITAL_MODES}")
        self.near.setflags(write=False)
        self.far.setflags(write=False)


def _normalize_rows(h: np.ndarray, label: str) -> np.ndarray:
    norms = np.linalg.norm(h, axis=1)
    if np.any(norms < 1e-300):
        bad = np.flatnonzero(norms < 1e-300).tolist()
        raise DegenerateChannelError(f"zero {label} channel for users {bad}")
    return h / norms[:, None]


def build_precoders(channels: ChannelSet, mode: str = "identity") -> PrecoderSet:
    """Per-user transmit beams from realized channels.

    identity mode: w_k = h_k / ||h_k|| for every user.  zero-forcing mode:
    the near-user beams are combined digitally so each near user's channel
    is orthogonal to every other near beam, then renormalized; far beams
    stay matched-filter in both modes.
    """
    if mode not in DIGITAL_MODES:
        raise ValueError(f"mode must be one of {DIGITAL_MODES}")
    far = _normalize_rows(channels.far, "far") if channels.far.size else channels.far.copy()
    analog = _normalize_rows(channels.near, "near")
    if mode == "identity" or channels.near.shape[0] == 1:
        return PrecoderSet(near=analog, far=far, digital_mode=mode)
    # H^H F_A is K x K for K analog beams; its inverse nulls cross terms.
    f_a = analog.T  # (N, K)
    eff = channels.near.conj() @ f_a  # (K, K)
    f_d = pseudo_inverse(eff)  # (K, K)
    w = (f_a @ f_d).T  # (K, N), row k serves near user k
    return PrecoderSet(near=_normalize_rows(w, "zero-forced"), far=far, digital_mode=mode)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-near-user transmit powers under a total budget."""

    near_powers_w: np.ndarray
    budget_w: float

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.near_powers_w, dtype=float))
        if np.any(p < -1e-15):
            raise ValueError("powers must be nonnegative")
        if p.sum() > self.budget_w + 1e-12 * max(1.0, self.budget_w):
            raise ValueError(
                f"allocation {p.sum():.6g} W exceeds the budget {self.budget_w:.6g} W"
            )
        object.__setattr__(self, "near_powers_w", np.clip(p, 0.0, None))

    @classmethod
    def equal(cls, budget_w: float, n_users: int) -> "PowerAllocation":
        return cls(np.full(n_users, budget_w / n_users), budget_w)


@dataclass(frozen=True)
class RateBreakdown:
    """Per-user SINRs and rates with the interference terms split out."""

    per_user_rate: np.ndarray  # bits/s/Hz
    per_user_sinr: np.ndarray
    near_interference_w: np.ndarray
    mixed_interference_w: np.ndarray
    sum_rate: float


def cross_gains(channels: ChannelSet, precoders: PrecoderSet) -> tuple[np.ndarray, np.ndarray]:
    """(|h_k^H w_i|^2, |h_k^H w_F,m|^2) gain matrices, shapes (K,K) and (K,M)."""
    near_gain = np.abs(channels.near.conj() @ precoders.near.T) ** 2
    far_gain = np.abs(channels.near.conj() @ precoders.far.T) ** 2
    return near_gain, far_gain


def _far_powers(scenario: Scenario) -> np.ndarray:
    return np.array([u.tx_power_w for u in scenario.far_users])


def evaluate_rates(
    channels: ChannelSet,
    precoders: PrecoderSet,
    alloc: PowerAllocation,
    scenario: Scenario,
) -> RateBreakdown:
    """SINR and log2(1 + SINR) rate of every near user.

    The denominator stacks in-group cross-beam power, power leaked from the
    preconfigured far beams, and thermal noise.
    """
    k_users = channels.near.shape[0]
    p = alloc.near_powers_w
    if p.size != k_users:
        raise ValueError(f"allocation has {p.size} entries for {k_users} users")
    g_near, g_far = cross_gains(channels, precoders)
    p_far = _far_powers(scenario)
    signal = p * np.diag(g_near)
    near_inter = g_near @ p - signal
    mixed_inter = g_far @ p_far if p_far.size else np.zeros(k_users)
    sinr = signal / (near_inter + mixed_inter + scenario.noise_w)
    rate = np.log2(1.0 + sinr)
    return RateBreakdown(
        per_user_rate=rate,
        per_user_sinr=sinr,
        near_interference_w=near_inter,
        mixed_interference_w=mixed_inter,
        sum_rate=float(rate.sum()),
    )


def interference_free_bound(channels: ChannelSet, alloc: PowerAllocation, scenario: Scenario) -> float:
    """Sum-rate with every cross term zeroed; upper reference for plots."""
    gains = np.linalg.norm(channels.near, axis=1) ** 2
    sinr = alloc.near_powers_w * gains / scenario.noise_w
    return float(np.log2(1.0 + sinr).sum())
