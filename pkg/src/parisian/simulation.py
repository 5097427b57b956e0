"""Exact event-driven Monte Carlo for the reserve with deficit-dependent delays.

Between claims the reserve moves linearly with slope ``c``, so every crossing
time is solved exactly; nothing is discretised in time. Each path draws its
uniforms from its own Philox stream keyed by ``(seed, tag)`` with the path
index in the counter, in this order:

* per claim: inter-arrival time, mixture component (mixtures with more than
  one component only), then one uniform per Erlang phase of the size;
* per excursion below 0: one delay uniform, right after the claim that
  starts it.

A path's outcome therefore depends only on ``(seed, path index)``, never on
how paths are spread over threads.

Paths that climb above an absorption level ``u*`` with no excursion pending
are counted as surviving. ``u*`` is chosen so the classical ruin probability
from ``u*`` (an upper bound on the bias this introduces) is below ``bias_tol``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import DomainError, SimulationAborted
from .kernels import DelayKernel, quantile_core
from .model import Exponential, RiskModel
from .rng import next_uniform, stream_init

# numba falls back to another threading layer when the installed TBB is too old
warnings.filterwarnings("ignore", message=".*TBB threading layer.*", category=nb.NumbaWarning)

__all__ = [
    "SimConfig",
    "RuinEstimate",
    "FirstPassageEstimate",
    "simulate_ruin",
    "simulate_joint_lt",
    "simulate_first_passage",
    "simulate_marginal",
    "survival_level",
]

TAG_RUIN = 0
TAG_FIRST_PASSAGE = 1
TAG_MARGINAL = 2

STATUS_SURVIVED = 0
STATUS_RUINED = 1
STATUS_GUARD = 2

MAX_FLAGGED_FRACTION = 1e-6


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run description.

    ``b`` adds an upper exit barrier: paths reaching ``b`` before Parisian
    ruin contribute 0. ``v`` and ``w`` are the transform arguments used by
    :func:`simulate_joint_lt`. ``survival_level=None`` derives ``u*`` from
    ``bias_tol``.
    """

    u: float = 0.0
    n_paths: int = 1_000_000
    seed: int = 0
    bias_tol: float = 1e-9
    survival_level: float | None = None
    max_events: int = 100_000_000
    b: float | None = None
    v: float = 0.0
    w: float = 0.0
    workers: int | None = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError(f"n_paths must be at least 1, got {self.n_paths}")
        if self.u < 0:
            raise DomainError(f"initial reserve must be nonnegative, got {self.u}")
        if not (0 <= self.seed < 2**64):
            raise DomainError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if not self.bias_tol > 0:
            raise DomainError("bias_tol must be positive")
        if self.max_events < 1:
            raise DomainError("max_events must be positive")
        if self.b is not None and not (self.b > 0 and self.u <= self.b):
            raise DomainError(f"need 0 <= u <= b with b > 0, got u={self.u}, b={self.b}")
        if self.v < 0 or self.w < 0:
            raise DomainError("v and w must be nonnegative")


@dataclass(frozen=True)
class RuinEstimate:
    value: float
    stderr: float
    n_paths: int
    seed: int
    bias_bound: float
    wall_time: float = field(compare=False)
    n_flagged: int = 0
    survival_level: float = math.inf


@dataclass(frozen=True)
class FirstPassageEstimate:
    t_grid: np.ndarray
    cdf: np.ndarray
    stderr: np.ndarray
    n_paths: int
    seed: int


def survival_level(model: RiskModel, bias_tol: float) -> tuple[float, float]:
    """Absorption level ``u*`` and the classical ruin bound from it."""
    if isinstance(model.claims, Exponential):
        a = model.claims.alpha
        coef = model.lam / (a * model.c)
        decay = a - model.lam / model.c
        level = max(0.0, math.log(coef / bias_tol) / decay)
        return level, coef * math.exp(-decay * level)
    r = model.lundberg_exponent()
    level = math.log(1.0 / bias_tol) / r
    return level, math.exp(-r * level)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def _draw_claim(s, kind, cw, ck, cr, size):
    if kind == 2:
        return size
    j = 0
    if cw.size > 1:
        u = next_uniform(s)
        acc = 0.0
        j = cw.size - 1
        for i in range(cw.size):
            acc += cw[i]
            if u < acc:
                j = i
                break
    logsum = 0.0
    for _ in range(ck[j]):
        logsum += math.log(next_uniform(s))
    return -logsum / cr[j]


@nb.njit(cache=True)
def _one_path(
    s, u, c, lam, ckind, cw, ck, cr, csize,
    kkind, kbps, kw, kk, kr, kimm, kdelay, level, max_events,
):
    """Returns (status, ruin time, reserve at ruin time)."""
    x = u
    t = 0.0
    pending = -1.0  # residual time to the next claim, if already drawn
    events = 0
    while True:
        events += 1
        if events > max_events:
            return STATUS_GUARD, 0.0, 0.0
        if x >= level:
            return STATUS_SURVIVED, 0.0, 0.0
        e = pending if pending >= 0.0 else -math.log(next_uniform(s)) / lam
        pending = -1.0
        if x + c * e >= level:
            return STATUS_SURVIVED, 0.0, 0.0
        t += e
        x += c * e - _draw_claim(s, ckind, cw, ck, cr, csize)
        if x >= 0.0:
            continue
        # excursion below 0 with deficit x; its delay is drawn now
        eta = quantile_core(kkind, kbps, kw, kk, kr, kimm, kdelay, x, next_uniform(s))
        elapsed = 0.0
        while True:
            events += 1
            if events > max_events:
                return STATUS_GUARD, 0.0, 0.0
            need = -x / c
            e = -math.log(next_uniform(s)) / lam
            if e >= need:
                # back to 0 before the next claim; ruin iff the delay ran out first
                if eta < elapsed + need:
                    return STATUS_RUINED, t + eta, x + c * (eta - elapsed)
                t += elapsed + need
                x = 0.0
                pending = e - need  # memoryless: the residual is the next inter-arrival
                break
            if elapsed + e >= eta:
                return STATUS_RUINED, t + eta, x + c * (eta - elapsed)
            elapsed += e
            x += c * e - _draw_claim(s, ckind, cw, ck, cr, csize)


@nb.njit(cache=True, parallel=True)
def _run_paths(
    u, c, lam, ckind, cw, ck, cr, csize,
    kkind, kbps, kw, kk, kr, kimm, kdelay, level, max_events, seed, n,
):
    status = np.zeros(n, dtype=np.int8)
    t_ruin = np.zeros(n)
    x_ruin = np.zeros(n)
    for i in nb.prange(n):
        s = stream_init(seed, TAG_RUIN, i)
        st, tt, xx = _one_path(
            s, u, c, lam, ckind, cw, ck, cr, csize,
            kkind, kbps, kw, kk, kr, kimm, kdelay, level, max_events,
        )
        status[i] = st
        t_ruin[i] = tt
        x_ruin[i] = xx
    return status, t_ruin, x_ruin


@nb.njit(cache=True, parallel=True)
def _run_first_passage(y, c, lam, ckind, cw, ck, cr, csize, t_max, max_events, seed, n):
    out = np.full(n, np.inf)
    for i in nb.prange(n):
        s = stream_init(seed, TAG_FIRST_PASSAGE, i)
        x = 0.0
        t = 0.0
        for _ in range(max_events):
            e = -math.log(next_uniform(s)) / lam
            if x + c * e >= y:
                out[i] = t + (y - x) / c
                break
            t += e
            if t > t_max:
                break
            x += c * e - _draw_claim(s, ckind, cw, ck, cr, csize)
    return out


@nb.njit(cache=True, parallel=True)
def _run_marginal(t_end, c, lam, ckind, cw, ck, cr, csize, seed, n):
    out = np.empty(n)
    for i in nb.prange(n):
        s = stream_init(seed, TAG_MARGINAL, i)
        t = -math.log(next_uniform(s)) / lam
        total = 0.0
        while t <= t_end:
            total += _draw_claim(s, ckind, cw, ck, cr, csize)
            t += -math.log(next_uniform(s)) / lam
        out[i] = c * t_end - total
    return out


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


class _threads:
    """Temporarily set the numba thread count (clamped to what is available)."""

    def __init__(self, workers: int | None):
        self.workers = workers

    def __enter__(self):
        self.saved = nb.get_num_threads()
        if self.workers is not None:
            nb.set_num_threads(max(1, min(int(self.workers), nb.config.NUMBA_NUM_THREADS)))

    def __exit__(self, *exc):
        nb.set_num_threads(self.saved)


def _claim_args(model: RiskModel):
    kind, w, k, r, size = model.claims.sim_params()
    return (
        np.int64(kind),
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(k, dtype=np.int64),
        np.ascontiguousarray(r, dtype=np.float64),
        float(size),
    )


def _kernel_args(kernel: DelayKernel):
    a = kernel.arrays
    return (
        np.int64(a.kind),
        np.ascontiguousarray(a.breakpoints, dtype=np.float64),
        np.ascontiguousarray(a.weights, dtype=np.float64),
        np.ascontiguousarray(a.shapes, dtype=np.int64),
        np.ascontiguousarray(a.rates, dtype=np.float64),
        np.ascontiguousarray(a.immediate, dtype=np.bool_),
        float(a.delay),
    )


def _paths(model: RiskModel, kernel: DelayKernel, cfg: SimConfig):
    level, bias = survival_level(model, cfg.bias_tol)
    if cfg.survival_level is not None:
        level = float(cfg.survival_level)
        bias = float(survival_level_bound(model, level))
    if cfg.b is not None:
        level = min(level, float(cfg.b))
    with _threads(cfg.workers):
        status, t_ruin, x_ruin = _run_paths(
            float(cfg.u), model.c, model.lam, *_claim_args(model), *_kernel_args(kernel),
            level, np.int64(cfg.max_events), np.uint64(cfg.seed), np.int64(cfg.n_paths),
        )
    flagged = int(np.count_nonzero(status == STATUS_GUARD))
    if flagged > MAX_FLAGGED_FRACTION * cfg.n_paths:
        raise SimulationAborted(
            f"{flagged} of {cfg.n_paths} paths exceeded max_events={cfg.max_events}"
        )
    return status, t_ruin, x_ruin, level, bias, flagged


def survival_level_bound(model: RiskModel, level: float) -> float:
    """Upper bound on the classical ruin probability from ``level``."""
    if isinstance(model.claims, Exponential):
        a = model.claims.alpha
        return model.lam / (a * model.c) * math.exp(-(a - model.lam / model.c) * level)
    return math.exp(-model.lundberg_exponent() * level)


def _estimate(samples: np.ndarray, cfg: SimConfig, bias, flagged, level, start) -> RuinEstimate:
    n = samples.size
    value = float(np.sum(samples) / n)
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return RuinEstimate(
        value=value,
        stderr=stderr,
        n_paths=n,
        seed=cfg.seed,
        bias_bound=bias,
        wall_time=time.perf_counter() - start,
        n_flagged=flagged,
        survival_level=level,
    )


def simulate_ruin(model: RiskModel, kernel: DelayKernel, cfg: SimConfig) -> RuinEstimate:
    """Estimate ``P_u(Parisian ruin)``, or ``P_u(T < tau_b^+)`` when ``cfg.b`` is set."""
    start = time.perf_counter()
    status, _, _, level, bias, flagged = _paths(model, kernel, cfg)
    samples = (status == STATUS_RUINED).astype(np.float64)
    return _estimate(samples, cfg, bias, flagged, level, start)


def simulate_joint_lt(model: RiskModel, kernel: DelayKernel, cfg: SimConfig) -> RuinEstimate:
    """Estimate ``E_u(e^{-v T + w X_T}; T < tau_b^+)``."""
    start = time.perf_counter()
    status, t_ruin, x_ruin, level, bias, flagged = _paths(model, kernel, cfg)
    ruined = status == STATUS_RUINED
    samples = np.where(ruined, np.exp(-cfg.v * t_ruin + cfg.w * x_ruin), 0.0)
    return _estimate(samples, cfg, bias, flagged, level, start)


def simulate_first_passage(model: RiskModel, y: float, t_grid, cfg: SimConfig) -> FirstPassageEstimate:
    """Empirical CDF of the upward passage time of ``y`` from 0 on ``t_grid``."""
    if not y > 0:
        raise DomainError(f"level must be positive, got {y}")
    t_grid = np.asarray(t_grid, dtype=float)
    with _threads(cfg.workers):
        tau = _run_first_passage(
            float(y), model.c, model.lam, *_claim_args(model), float(t_grid.max()),
            np.int64(cfg.max_events), np.uint64(cfg.seed), np.int64(cfg.n_paths),
        )
    tau.sort()
    n = tau.size
    p = np.searchsorted(tau, t_grid, side="right") / n
    stderr = np.sqrt(p * (1.0 - p) / max(n - 1, 1))
    return FirstPassageEstimate(t_grid, p, stderr, n, cfg.seed)


def simulate_marginal(model: RiskModel, t: float, cfg: SimConfig) -> np.ndarray:
    """Independent draws of ``X_t`` started from 0."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    with _threads(cfg.workers):
        return _run_marginal(
            float(t), model.c, model.lam, *_claim_args(model), np.uint64(cfg.seed), np.int64(cfg.n_paths)
        )
