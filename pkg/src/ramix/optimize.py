"""Double-layer sum-rate optimizer and benchmark schemes.

Inner layer: power allocation by successive convex approximation (SCA) of
the difference-of-convex negative sum-rate, each surrogate minimized by
projected gradient descent on the capped simplex {p >= 0, sum p <= P}.
Outer layer: particle swarm search over the per-subarray rotation angles,
with an optional penalty for subarray pairs closer than pi/2.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import ChannelSet, RotationState, Scenario, synthesize_channels
from .numerics import RngStream
from .rates import PowerAllocation, PrecoderSet, build_precoders, cross_gains, evaluate_rates

__all__ = [
    "BENCHMARK_SCHEMES",
    "FitnessResult",
    "GainModel",
    "OptimizerReport",
    "PsoConfig",
    "ScaConfig",
    "SubsolverError",
    "inner_convex_solve",
    "obtuse_penalty_active",
    "project_capped_simplex",
    "pso_fitness",
    "pso_optimize",
    "run_benchmark",
    "sca_power_allocation",
]

_LN2 = math.log(2.0)


def project_capped_simplex(v: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum p <= budget} (sort-based)."""
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    w = np.clip(np.asarray(v, dtype=float), 0.0, None)
    if w.sum() <= budget:
        return w
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - budget
    idx = np.arange(1, u.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.clip(v - tau, 0.0, None)


class SubsolverError(RuntimeError):
    """Inner convex solve hit its iteration cap; carries the last iterate."""

    def __init__(self, message: str, last_iterate: np.ndarray):
        super().__init__(message)
        self.last_iterate = last_iterate


def inner_convex_solve(
    objective,
    gradient,
    budget: float,
    x0: np.ndarray,
    tol: float = 1e-9,
    max_iters: int = 2000,
) -> tuple[np.ndarray, int]:
    """Minimize a smooth convex objective over {p >= 0, sum p <= budget}.

    Projected gradient descent with Armijo backtracking; descent is
    monotone from x0.  Returns (solution, iterations); stationarity is
    declared when the projected-gradient step shrinks below ``tol``
    relative to the budget scale.
    """
    x0 = np.asarray(x0, dtype=float)
    if budget <= 0.0:
        return np.zeros_like(x0), 0
    x = project_capped_simplex(x0, budget)
    fx = objective(x)
    step = budget
    scale = max(1.0, budget)
    iters = 0
    for iters in range(1, max_iters + 1):
        g = gradient(x)
        probe = x - project_capped_simplex(x - scale * g, budget)
        if np.abs(probe).max() <= tol * scale:
            return x, iters
        accepted = False
        for _ in range(60):
            cand = project_capped_simplex(x - step * g, budget)
            diff = cand - x
            fc = objective(cand)
            if fc <= fx + 1e-4 * float(g @ diff) + 1e-15 * abs(fx):
                accepted = True
                break
            step *= 0.5
        if not accepted or not np.any(diff):
            # line search stalled at numerical resolution: stationary enough
            return x, iters
        x, fx = cand, fc
        step *= 2.0
    g = gradient(x)
    probe = x - project_capped_simplex(x - scale * g, budget)
    if np.abs(probe).max() <= 1e3 * tol * scale:
        return x, max_iters
    raise SubsolverError(
        f"projected gradient did not reach tol={tol} in {max_iters} iterations",
        last_iterate=x,
    )


@dataclass(frozen=True)
class GainModel:
    """Fixed-beam gain data entering the power-allocation objective.

    gain[k, i] = |h_k^H w_i|^2 and floor_w[k] collects the far-beam leakage
    plus noise, so user k's SINR denominator is sum_i!=k p_i gain[k,i]
    + floor_w[k].
    """

    gain: np.ndarray  # (K, K)
    floor_w: np.ndarray  # (K,)
    budget_w: float

    @classmethod
    def from_problem(cls, channels: ChannelSet, precoders: PrecoderSet, scenario: Scenario):
        g_near, g_far = cross_gains(channels, precoders)
        p_far = np.array([u.tx_power_w for u in scenario.far_users])
        floor = (g_far @ p_far if p_far.size else np.zeros(g_near.shape[0])) + scenario.noise_w
        return cls(gain=g_near, floor_w=floor, budget_w=scenario.power_budget_w)

    def _dens(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        full = self.gain @ p + self.floor_w
        return full, full - p * np.diag(self.gain)

    def sum_rate(self, p: np.ndarray) -> float:
        full, part = self._dens(p)
        return float(np.log2(full / part).sum())

    def concave_part(self, p: np.ndarray) -> float:
        """A1: negative log-sum over the full received power (convex)."""
        full, _ = self._dens(p)
        return float(-np.log2(full).sum())

    def convex_shift(self, p: np.ndarray) -> float:
        """B1: negative log-sum over the interference-plus-noise power."""
        _, part = self._dens(p)
        return float(-np.log2(part).sum())

    def grad_concave_part(self, p: np.ndarray) -> np.ndarray:
        full, _ = self._dens(p)
        return -(self.gain / full[:, None]).sum(axis=0) / _LN2

    def grad_convex_shift(self, p: np.ndarray) -> np.ndarray:
        """Gradient of B1: -(1/ln 2) sum_{j != k} gain[j, k] / part_j."""
        _, part = self._dens(p)
        ratio = self.gain / part[:, None]
        np.fill_diagonal(ratio, 0.0)
        return -ratio.sum(axis=0) / _LN2


@dataclass(frozen=True)
class ScaConfig:
    """Stopping rules for the successive convex approximation loop."""

    max_iters: int = 50
    tol_bits: float = 1e-4
    subsolver_tol: float = 1e-9
    subsolver_max_iters: int = 2000

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol_bits <= 0:
            raise ValueError("tol_bits must be positive")


def sca_power_allocation(
    channels: ChannelSet,
    precoders: PrecoderSet,
    scenario: Scenario,
    cfg: ScaConfig,
    warm_start: np.ndarray | None = None,
) -> tuple[PowerAllocation, list[float]]:
    """Power allocation maximizing the sum-rate for fixed beams.

    Minimizes the difference-of-convex objective A1 - B1 by linearizing B1
    at the current iterate and solving each convex surrogate exactly.  The
    returned trace holds the true objective (negative sum-rate, bits/s/Hz)
    per iteration and is non-increasing.
    """
    model = GainModel.from_problem(channels, precoders, scenario)
    k = model.gain.shape[0]
    budget = model.budget_w
    if warm_start is not None:
        p = project_capped_simplex(np.asarray(warm_start, dtype=float), budget)
    else:
        p = np.full(k, budget / k)
    trace = [-model.sum_rate(p)]
    for _ in range(cfg.max_iters):
        slope = model.grad_convex_shift(p)

        def surrogate(x):
            return model.concave_part(x) - float(slope @ x)

        def surrogate_grad(x):
            return model.grad_concave_part(x) - slope

        p, _ = inner_convex_solve(
            surrogate,
            surrogate_grad,
            budget,
            x0=p,
            tol=cfg.subsolver_tol,
            max_iters=cfg.subsolver_max_iters,
        )
        trace.append(-model.sum_rate(p))
        if trace[-2] - trace[-1] < cfg.tol_bits:
            break
    return PowerAllocation(p, budget), trace


@dataclass(frozen=True)
class PsoConfig:
    """Swarm search hyperparameters for the rotation-angle layer."""

    swarm: int = 100
    iters: int = 100
    inertia: float = 0.7298
    c1: float = 1.4962
    c2: float = 1.4962
    penalty: float = 100.0
    velocity_clamp_rad: float | None = None  # None: half the range width
    seed: int = 1
    strict_obtuse: bool = False
    cache_quantum_rad: float = 1e-4

    def __post_init__(self):
        if self.swarm < 1 or self.iters < 0:
            raise ValueError("swarm must be >= 1 and iters >= 0")
        if not 0.0 < self.inertia < 1.0:
            raise ValueError("inertia must lie in (0, 1)")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("learning factors must be positive")
        if self.penalty < 0:
            raise ValueError("penalty must be nonnegative")


def obtuse_penalty_active(ranges: np.ndarray, strict: bool) -> bool:
    """Whether the pairwise-separation penalty applies.

    Ranges confined to [-pi/6, pi/6] cannot separate any pair by more than
    pi/3, so the penalty would simply forbid Q > 1; it is disabled there
    unless strict enforcement is requested.
    """
    if strict:
        return True
    tol = 1e-12
    return bool(np.any(ranges[:, 0] < -math.pi / 6 - tol) or np.any(ranges[:, 1] > math.pi / 6 + tol))


@dataclass(frozen=True)
class FitnessResult:
    """One fitness evaluation: rate outcome plus the penalty bookkeeping."""

    fitness: float
    sum_rate: float
    powers_w: np.ndarray
    per_user_rate: np.ndarray
    sca_iters: int
    violations: int
    error: str | None = None


def pso_fitness(
    angles: np.ndarray,
    scenario: Scenario,
    sca_cfg: ScaConfig,
    pso_cfg: PsoConfig,
    power_mode: str = "sca",
    warm_start: np.ndarray | None = None,
) -> FitnessResult:
    """Sum-rate at the given rotation angles minus the separation penalty.

    Synthesizes channels, builds matched-filter beams, allocates power by
    SCA (or equally), and subtracts penalty * (number of subarray pairs
    closer than pi/2) when the penalty is active.  Solver failures map to
    -inf fitness with a diagnostic instead of raising.
    """
    ranges = scenario.rotation_ranges()
    rot = RotationState(np.asarray(angles, dtype=float), ranges)
    channels = synthesize_channels(scenario.cfg, rot, scenario)
    precoders = build_precoders(channels, "identity")
    try:
        if power_mode == "equal":
            alloc = PowerAllocation.equal(scenario.power_budget_w, scenario.n_near)
            sca_iters = 0
        elif power_mode == "sca":
            alloc, trace = sca_power_allocation(channels, precoders, scenario, sca_cfg, warm_start)
            sca_iters = len(trace) - 1
        else:
            raise ValueError(f"unknown power_mode {power_mode!r}")
    except SubsolverError as e:
        nan = np.full(scenario.n_near, math.nan)
        return FitnessResult(-math.inf, -math.inf, nan, nan, 0, 0, error=str(e))
    rates = evaluate_rates(channels, precoders, alloc, scenario)
    violations = 0
    if obtuse_penalty_active(ranges, pso_cfg.strict_obtuse):
        violations = rot.obtuse_violations()
    fitness = rates.sum_rate - pso_cfg.penalty * violations
    return FitnessResult(
        fitness=fitness,
        sum_rate=rates.sum_rate,
        powers_w=alloc.near_powers_w,
        per_user_rate=rates.per_user_rate,
        sca_iters=sca_iters,
        violations=violations,
    )


@dataclass
class OptimizerReport:
    """Outcome of one optimization run, seeded and reproducible."""

    scheme: str
    best_angles: np.ndarray
    best_alloc: PowerAllocation
    per_user_rate: np.ndarray
    sum_rate: float
    fitness: float
    sum_rate_trace: list
    inner_iters_used: list
    seed: int
    wall_time_s: float
    evaluations: int = 0
    cache_hits: int = 0
    sca_objective_trace: list = field(default_factory=list)


def pso_optimize(
    scenario: Scenario,
    sca_cfg: ScaConfig,
    pso_cfg: PsoConfig,
    power_mode: str = "sca",
    seed_particles: tuple = (),
    include_zero_particle: bool = True,
    scheme: str = "proposed",
) -> OptimizerReport:
    """Swarm search over subarray rotation angles.

    Each particle is one feasible angle vector; velocities follow the
    standard inertia + personal-best + global-best update with per-particle
    uniform weights, positions are clamped into the admissible ranges, and
    the global-best fitness trace is non-decreasing by construction.

    ``seed_particles`` entries are (angles, warm_power | None) pairs
    injected into the initial swarm (used for sweep continuation); a
    zero-rotation particle is included by default so the fixed-antenna
    operating point is always part of the search.
    """
    t_start = time.perf_counter()
    q = scenario.cfg.n_subarrays
    ranges = scenario.rotation_ranges()
    lo, hi = ranges[:, 0], ranges[:, 1]
    clamp = pso_cfg.velocity_clamp_rad
    vmax = np.full(q, clamp) if clamp is not None else (hi - lo) / 2.0
    rng = RngStream(pso_cfg.seed).derive("pso").generator()

    s = pso_cfg.swarm
    x = lo + rng.random((s, q)) * (hi - lo)
    slot = 0
    if include_zero_particle and slot < s:
        x[slot] = np.clip(0.0, lo, hi)
        slot += 1
    warm_by_particle = {}
    for angles, warm in seed_particles:
        if slot >= s:
            break
        x[slot] = np.clip(np.asarray(angles, dtype=float), lo, hi)
        if warm is not None:
            warm_by_particle[slot] = np.asarray(warm, dtype=float)
        slot += 1
    v = rng.uniform(-vmax, vmax, size=(s, q))

    cache: dict = {}
    counters = {"evals": 0, "hits": 0}

    def evaluate(pos: np.ndarray, particle: int) -> FitnessResult:
        counters["evals"] += 1
        key = tuple(np.round(pos / pso_cfg.cache_quantum_rad).astype(np.int64).tolist())
        if key in cache:
            counters["hits"] += 1
            return cache[key]
        res = pso_fitness(
            pos, scenario, sca_cfg, pso_cfg, power_mode, warm_start=warm_by_particle.get(particle)
        )
        cache[key] = res
        return res

    results = [evaluate(x[i], i) for i in range(s)]
    pbest = x.copy()
    pbest_fit = np.array([r.fitness for r in results])
    g_idx = int(np.argmax(pbest_fit))
    gbest = x[g_idx].copy()
    gbest_res = results[g_idx]
    trace = [gbest_res.fitness]
    inner_iters = [sum(r.sca_iters for r in results)]

    for _ in range(pso_cfg.iters):
        tau1 = rng.random((s, q))
        tau2 = rng.random((s, q))
        v = pso_cfg.inertia * v + pso_cfg.c1 * tau1 * (pbest - x) + pso_cfg.c2 * tau2 * (gbest - x)
        v = np.clip(v, -vmax, vmax)
        x = np.clip(x + v, lo, hi)
        iter_inner = 0
        for i in range(s):
            res = evaluate(x[i], i)
            iter_inner += res.sca_iters
            if res.fitness > pbest_fit[i]:
                pbest_fit[i] = res.fitness
                pbest[i] = x[i]
            if res.fitness > gbest_res.fitness:
                gbest_res = res
                gbest = x[i].copy()
        trace.append(gbest_res.fitness)
        inner_iters.append(iter_inner)

    return OptimizerReport(
        scheme=scheme,
        best_angles=gbest,
        best_alloc=PowerAllocation(gbest_res.powers_w, scenario.power_budget_w),
        per_user_rate=gbest_res.per_user_rate,
        sum_rate=gbest_res.sum_rate,
        fitness=gbest_res.fitness,
        sum_rate_trace=trace,
        inner_iters_used=inner_iters,
        seed=pso_cfg.seed,
        wall_time_s=time.perf_counter() - t_start,
        evaluations=counters["evals"],
        cache_hits=counters["hits"],
    )


BENCHMARK_SCHEMES = ("fa+zf", "fa+opa", "ra+epa", "proposed")


def normalize_scheme(name: str) -> str:
    key = name.strip().lower().replace("_", "+").replace("-", "+")
    if key not in BENCHMARK_SCHEMES:
        raise ValueError(f"unknown scheme {name!r}; expected one of {BENCHMARK_SCHEMES}")
    return key


def run_benchmark(
    scheme: str,
    scenario: Scenario,
    sca_cfg: ScaConfig,
    pso_cfg: PsoConfig,
    seed_particles: tuple = (),
) -> OptimizerReport:
    """Run one scheme end to end.

    fa+zf: zero rotation, zero-forcing beams, equal power.
    fa+opa: zero rotation, matched-filter beams, SCA power.
    ra+epa: swarm-optimized rotation, equal power.
    proposed: full double layer (swarm rotation + SCA power).
    """
    key = normalize_scheme(scheme)
    if key in ("ra+epa", "proposed"):
        mode = "equal" if key == "ra+epa" else "sca"
        return pso_optimize(
            scenario, sca_cfg, pso_cfg, power_mode=mode, seed_particles=seed_particles, scheme=key
        )

    t_start = time.perf_counter()
    rot = RotationState.zeros(scenario.cfg.n_subarrays, scenario.rotation_range_rad)
    channels = synthesize_channels(scenario.cfg, rot, scenario)
    sca_trace: list = []
    if key == "fa+zf":
        precoders = build_precoders(channels, "zero-forcing")
        alloc = PowerAllocation.equal(scenario.power_budget_w, scenario.n_near)
        inner = [0]
    else:  # fa+opa
        precoders = build_precoders(channels, "identity")
        warm = seed_particles[0][1] if seed_particles and seed_particles[0][1] is not None else None
        alloc, sca_trace = sca_power_allocation(channels, precoders, scenario, sca_cfg, warm)
        inner = [len(sca_trace) - 1]
    rates = evaluate_rates(channels, precoders, alloc, scenario)
    trace = [-o for o in sca_trace] if sca_trace else [rates.sum_rate]
    return OptimizerReport(
        scheme=key,
        best_angles=rot.angles_rad,
        best_alloc=alloc,
        per_user_rate=rates.per_user_rate,
        sum_rate=rates.sum_rate,
        fitness=rates.sum_rate,
        sum_rate_trace=trace,
        inner_iters_used=inner,
        seed=pso_cfg.seed,
        wall_time_s=time.perf_counter() - t_start,
        evaluations=1,
        sca_objective_trace=sca_trace,
    )
