"""Deficit-dependent delay kernels ``x -> P_x``.

For a deficit ``x < 0`` the delay window length has distribution function
``F_x``. Piecewise kernels are constant on the cells ``(a_{k-1}, a_k]`` of a
partition ``-inf = a_0 < a_1 < ... < a_n = 0``; only the interior
breakpoints ``a_1, ..., a_{n-1}`` are stored.

Every kernel is lowered to a padded array form (weights, shapes, rates and
an ``immediate`` flag per cell and component) shared by the analytic code and
the numba simulator. Infinite rates (immediate ruin) only ever appear as the
flag, never as a float inside arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numba as nb
import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "DelayKernel",
    "PiecewiseExponential",
    "PiecewiseErlangMixture",
    "DeterministicDelay",
    "KernelArrays",
    "Component",
]

KIND_PIECEWISE = 0
KIND_DETERMINISTIC = 1


class Component(NamedTuple):
    weight: float
    shape: int
    rate: float  # math.inf means a point mass at 0

    @property
    def immediate(self) -> bool:
        return math.isinf(self.rate)


class KernelArrays(NamedTuple):
    kind: int
    breakpoints: np.ndarray  # interior breakpoints, strictly increasing, < 0
    weights: np.ndarray  # (cells, comps)
    shapes: np.ndarray  # (cells, comps) int64
    rates: np.ndarray  # (cells, comps), 1.0 where immediate
    immediate: np.ndarray  # (cells, comps) bool
    delay: float


# ---------------------------------------------------------------------------
# numba core, shared with the simulator
# ---------------------------------------------------------------------------


@nb.njit(cache=True)
def cell_index(breakpoints, x):
    """Index of the cell ``(a_{k-1}, a_k]`` containing ``x``."""
    k = 0
    while k < breakpoints.size and breakpoints[k] < x:
        k += 1
    return k


@nb.njit(cache=True)
def _erlang_tail(shape, rate, t):
    # P(Erlang(shape, rate) > t) = sum_{l < shape} (rt)^l e^{-rt} / l!
    rt = rate * t
    term = math.exp(-rt)
    total = term
    for ell in range(1, shape):
        term *= rt / ell
        total += term
    return total


@nb.njit(cache=True)
def _erlang_pdf(shape, rate, t):
    if t <= 0.0:
        return rate if shape == 1 else 0.0
    return math.exp(shape * math.log(rate) + (shape - 1) * math.log(t) - rate * t - math.lgamma(shape))


@nb.njit(cache=True)
def _cell_tail(weights, shapes, rates, immediate, k, t):
    total = 0.0
    for j in range(weights.shape[1]):
        if weights[k, j] > 0.0 and not immediate[k, j]:
            total += weights[k, j] * _erlang_tail(shapes[k, j], rates[k, j], t)
    return total


@nb.njit(cache=True)
def _cell_pdf(weights, shapes, rates, immediate, k, t):
    total = 0.0
    for j in range(weights.shape[1]):
        if weights[k, j] > 0.0 and not immediate[k, j]:
            total += weights[k, j] * _erlang_pdf(shapes[k, j], rates[k, j], t)
    return total


@nb.njit(cache=True)
def quantile_core(kind, breakpoints, weights, shapes, rates, immediate, delay, x, y):
    """Generalised inverse ``inf{s >= 0 : F_x(s) >= y}`` for ``y`` in (0, 1)."""
    if kind == KIND_DETERMINISTIC:
        return delay
    k = cell_index(breakpoints, x)
    p_imm = 0.0
    n_cont = 0
    j_cont = 0
    for j in range(weights.shape[1]):
        if weights[k, j] > 0.0:
            if immediate[k, j]:
                p_imm += weights[k, j]
            else:
                n_cont += 1
                j_cont = j
    if y <= p_imm or n_cont == 0:
        return 0.0
    if n_cont == 1 and shapes[k, j_cont] == 1:
        # single exponential: closed form
        if p_imm == 0.0:
            return -math.log1p(-y) / rates[k, j_cont]
        return math.log((1.0 - p_imm) / (1.0 - y)) / rates[k, j_cont]
    # target: tail(t) == 1 - y; tail is decreasing in t
    target = 1.0 - y
    t_hi = 0.0
    for j in range(weights.shape[1]):
        if weights[k, j] > 0.0 and not immediate[k, j]:
            nu = shapes[k, j]
            t_hi = max(t_hi, (nu + 10.0 * math.sqrt(nu)) / rates[k, j])
    while _cell_tail(weights, shapes, rates, immediate, k, t_hi) > target:
        t_hi *= 2.0
    lo = 0.0
    hi = t_hi
    width = 1e-9 * t_hi
    for _ in range(200):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        if _cell_tail(weights, shapes, rates, immediate, k, mid) > target:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    for _ in range(2):
        dens = _cell_pdf(weights, shapes, rates, immediate, k, t)
        if dens <= 0.0:
            break
        step = t + (_cell_tail(weights, shapes, rates, immediate, k, t) - target) / dens
        if lo <= step <= hi:
            t = step
    return t


@nb.njit(cache=True)
def _quantile_many(kind, breakpoints, weights, shapes, rates, immediate, delay, x, y):
    out = np.empty(x.size)
    for i in range(x.size):
        out[i] = quantile_core(kind, breakpoints, weights, shapes, rates, immediate, delay, x[i], y[i])
    return out


# ---------------------------------------------------------------------------
# kernel classes
# ---------------------------------------------------------------------------


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x < 0)):
        raise DomainError("delay kernels are indexed by deficits x < 0")
    return x


class DelayKernel:
    """Common interface; subclasses provide :meth:`arrays`."""

    arrays: KernelArrays

    # -- distribution function -------------------------------------------------
    def _component_arrays(self, x):
        a = self.arrays
        idx = np.searchsorted(a.breakpoints, x, side="left")
        return a.weights[idx], a.shapes[idx], a.rates[idx], a.immediate[idx]

    def cdf(self, x, t):
        """``F_x(t) = P_x([0, t])``."""
        x, t = np.broadcast_arrays(_check_x(x), np.asarray(t, dtype=float))
        if np.any(t < 0):
            raise DomainError("delay times are nonnegative")
        a = self.arrays
        if a.kind == KIND_DETERMINISTIC:
            out = np.where(t >= a.delay, 1.0, 0.0)
        else:
            w, k, r, imm = self._component_arrays(x)
            cont = special.gammainc(k, r * t[..., None])
            out = np.sum(w * np.where(imm, 1.0, cont), axis=-1)
        return out if out.ndim else float(out)

    def tail(self, x, t):
        """``1 - F_x(t)``, evaluated directly rather than by subtraction."""
        x, t = np.broadcast_arrays(_check_x(x), np.asarray(t, dtype=float))
        if np.any(t < 0):
            raise DomainError("delay times are nonnegative")
        a = self.arrays
        if a.kind == KIND_DETERMINISTIC:
            out = np.where(t >= a.delay, 0.0, 1.0)
        else:
            w, k, r, imm = self._component_arrays(x)
            cont = special.gammaincc(k, r * t[..., None])
            out = np.sum(w * np.where(imm, 0.0, cont), axis=-1)
        return out if out.ndim else float(out)

    def tail_left(self, x, t):
        """``P_x((t, inf)) `` limit from the left, i.e. ``P(eta >= t)``."""
        a = self.arrays
        if a.kind == KIND_DETERMINISTIC:
            t = np.asarray(t, dtype=float)
            out = np.where(t > a.delay, 0.0, 1.0) * np.ones_like(_check_x(x))
            return out if out.ndim else float(out)
        t = np.asarray(t, dtype=float)
        out = self.tail(x, t)
        # the only possible atom of a piecewise kernel sits at 0
        at0 = np.asarray(t == 0.0)
        if np.any(at0):
            out = np.where(at0, 1.0, out)
        return out if np.ndim(out) else float(out)

    def pdf(self, x, t):
        """Density of the continuous part of ``P_x``."""
        x, t = np.broadcast_arrays(_check_x(x), np.asarray(t, dtype=float))
        a = self.arrays
        if a.kind == KIND_DETERMINISTIC:
            return np.zeros(x.shape) if x.ndim else 0.0
        w, k, r, imm = self._component_arrays(x)
        tt = np.maximum(t[..., None], 0.0)
        dens = np.exp(k * np.log(r) + special.xlogy(k - 1, tt) - r * tt - special.gammaln(k))
        out = np.sum(w * np.where(imm, 0.0, dens), axis=-1)
        return out if out.ndim else float(out)

    def atoms(self, x: float) -> list[tuple[float, float]]:
        """Point masses ``(location, mass)`` of ``P_x``."""
        x = float(_check_x(x))
        a = self.arrays
        if a.kind == KIND_DETERMINISTIC:
            return [(a.delay, 1.0)]
        k = int(np.searchsorted(a.breakpoints, x, side="left"))
        mass = float(np.sum(a.weights[k] * a.immediate[k]))
        return [(0.0, mass)] if mass > 0 else []

    # -- inverse and sampling ------------------------------------------------
    def quantile(self, x, y):
        """Generalised inverse ``F_x^{<-}(y) = inf{s >= 0 : F_x(s) >= y}``."""
        x, y = np.broadcast_arrays(_check_x(x), np.asarray(y, dtype=float))
        if np.any(~((y > 0) & (y < 1))):
            raise DomainError("quantile levels must lie in the open interval (0, 1)")
        a = self.arrays
        out = _quantile_many(
            a.kind, a.breakpoints, a.weights, a.shapes, a.rates, a.immediate, a.delay,
            np.ascontiguousarray(x.ravel()), np.ascontiguousarray(y.ravel()),
        ).reshape(x.shape)
        return out if out.ndim else float(out)

    def sample(self, x, u):
        """Delay length driven by the uniform ``u``; identical to :meth:`quantile`."""
        return self.quantile(x, u)

    def horizon(self, x: float, mass: float) -> float:
        """A time beyond which ``P_x`` puts less than ``mass``."""
        return float(self.quantile(x, 1.0 - mass))

    # -- piecewise structure ---------------------------------------------------
    def cells(self) -> list[tuple[float, float, list[Component]]]:
        """``(lower, upper, components)`` for every cell, ``lower = -inf`` first."""
        a = self.arrays
        edges = [-math.inf, *a.breakpoints.tolist(), 0.0]
        out = []
        for k in range(len(edges) - 1):
            comps = []
            for j in range(a.weights.shape[1]):
                if a.weights[k, j] > 0:
                    rate = math.inf if a.immediate[k, j] else float(a.rates[k, j])
                    comps.append(Component(float(a.weights[k, j]), int(a.shapes[k, j]), rate))
            out.append((edges[k], edges[k + 1], comps))
        return out

    def components(self, x: float) -> list[Component]:
        """Mixture components that apply at deficit ``x``."""
        x = float(_check_x(x))
        k = int(np.searchsorted(self.arrays.breakpoints, x, side="left"))
        return self.cells()[k][2]

    @property
    def is_continuous(self) -> bool:
        a = self.arrays
        return a.kind != KIND_DETERMINISTIC and not bool(np.any(a.immediate & (a.weights > 0)))


def _check_breakpoints(breakpoints: Sequence[float]) -> np.ndarray:
    bps = np.asarray([float(b) for b in breakpoints], dtype=float)
    if bps.size and (np.any(bps >= 0) or np.any(np.diff(bps) <= 0) or not np.all(np.isfinite(bps))):
        raise DomainError(f"breakpoints must be finite, negative and strictly increasing, got {list(breakpoints)}")
    return bps


def _rate(r) -> float:
    if isinstance(r, str) and r.lower() in ("inf", "infinity"):
        return math.inf
    r = float(r)
    if not r > 0:
        raise DomainError(f"delay rates must be positive (or inf), got {r}")
    return r


def _lower(bps: np.ndarray, cells: list[list[Component]]) -> KernelArrays:
    n, m = len(cells), max(len(c) for c in cells)
    weights = np.zeros((n, m))
    shapes = np.ones((n, m), dtype=np.int64)
    rates = np.ones((n, m))
    imm = np.zeros((n, m), dtype=np.bool_)
    for k, comps in enumerate(cells):
        for j, comp in enumerate(comps):
            weights[k, j] = comp.weight
            shapes[k, j] = comp.shape
            if comp.immediate:
                imm[k, j] = True
            else:
                rates[k, j] = comp.rate
    return KernelArrays(KIND_PIECEWISE, bps, weights, shapes, rates, imm, 0.0)


@dataclass(frozen=True)
class PiecewiseExponential(DelayKernel):
    """Exponential delay with rate ``rates[k]`` on the ``k``-th deficit cell.

    ``rates`` has one more entry than ``breakpoints``; ``math.inf`` (or the
    string ``"inf"``) means immediate ruin on that cell.
    """

    breakpoints: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        bps = _check_breakpoints(self.breakpoints)
        rates = tuple(_rate(r) for r in self.rates)
        if len(rates) != bps.size + 1:
            raise DomainError(f"need {bps.size + 1} rates for {bps.size} breakpoints, got {len(rates)}")
        object.__setattr__(self, "breakpoints", tuple(bps.tolist()))
        object.__setattr__(self, "rates", rates)
        cells = [[Component(1.0, 1, r)] for r in rates]
        object.__setattr__(self, "arrays", _lower(bps, cells))

    @classmethod
    def constant(cls, rate) -> "PiecewiseExponential":
        return cls((), (rate,))


@dataclass(frozen=True)
class PiecewiseErlangMixture(DelayKernel):
    """Finite Erlang mixture per deficit cell.

    ``cells[k]`` is a sequence of ``(weight, shape, rate)`` triples; weights in a
    cell sum to one and a rate of ``inf`` is a point mass at 0.
    """

    breakpoints: tuple[float, ...]
    cells_spec: tuple[tuple[tuple[float, int, float], ...], ...]

    def __post_init__(self):
        bps = _check_breakpoints(self.breakpoints)
        if len(self.cells_spec) != bps.size + 1:
            raise DomainError(f"need {bps.size + 1} cells for {bps.size} breakpoints, got {len(self.cells_spec)}")
        cells = []
        for k, spec in enumerate(self.cells_spec):
            comps = []
            for w, nu, r in spec:
                w = float(w)
                if int(nu) != nu or int(nu) < 1:
                    raise DomainError(f"Erlang shapes must be positive integers, got {nu} in cell {k}")
                if w < 0 or w > 1:
                    raise DomainError(f"mixture weights must lie in [0, 1], got {w} in cell {k}")
                comps.append(Component(w, int(nu), _rate(r)))
            if not comps or abs(sum(c.weight for c in comps) - 1.0) > 1e-12:
                raise DomainError(f"weights in cell {k} must sum to 1")
            cells.append(comps)
        frozen = tuple(tuple((c.weight, c.shape, c.rate) for c in comps) for comps in cells)
        object.__setattr__(self, "breakpoints", tuple(bps.tolist()))
        object.__setattr__(self, "cells_spec", frozen)
        object.__setattr__(self, "arrays", _lower(bps, cells))


@dataclass(frozen=True)
class DeterministicDelay(DelayKernel):
    """The classical fixed delay: ``P_x`` is a point mass at ``delay`` for all ``x``."""

    delay: float

    def __post_init__(self):
        d = float(self.delay)
        if not (d >= 0 and math.isfinite(d)):
            raise DomainError(f"deterministic delay must be finite and nonnegative, got {self.delay}")
        object.__setattr__(self, "delay", d)
        arrays = KernelArrays(
            KIND_DETERMINISTIC,
            np.zeros(0),
            np.ones((1, 1)),
            np.ones((1, 1), dtype=np.int64),
            np.ones((1, 1)),
            np.zeros((1, 1), dtype=np.bool_),
            d,
        )
        object.__setattr__(self, "arrays", arrays)
