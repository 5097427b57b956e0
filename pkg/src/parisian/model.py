"""Cramer-Lundberg type risk reserve: linear premium drift minus compound Poisson claims.

The reserve is ``X_t = X_0 + c t - sum_{j <= A_t} xi_j`` with ``A`` a Poisson
process of rate ``lam`` and positive i.i.d. claims ``xi``. The Levy measure of
``X`` lives on ``(-inf, 0)``: jumps are ``-xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numba as nb
import numpy as np
from scipy import optimize, special, stats

from .errors import CapabilityError, DomainError, ModelInvalidError
from .jets import Jet, base_value, jexp, jsqrt

__all__ = [
    "ClaimLaw",
    "Exponential",
    "ErlangMixture",
    "Deterministic",
    "RiskModel",
    "MarginalLaw",
    "poisson_cutoff",
]

POISSON_TAIL = 1e-12


def poisson_cutoff(mean: float, tail: float = POISSON_TAIL) -> int:
    """An ``n`` with ``P(Poisson(mean) > n) < tail``.

    The mean is rounded up to a geometric grid (ratio ``2**(1/16)``) so the
    result is cached and remains conservative.
    """
    if mean <= 0:
        return 0
    grid = 2.0 ** (math.ceil(16.0 * math.log2(mean)) / 16.0)
    return _poisson_cutoff_exact(grid, tail)


@lru_cache(maxsize=4096)
def _poisson_cutoff_exact(mean: float, tail: float) -> int:
    n = int(mean + 10 * math.sqrt(mean) + 10)
    while stats.poisson.sf(n, mean) >= tail:
        n *= 2
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        if stats.poisson.sf(mid, mean) < tail:
            hi = mid
        else:
            lo = mid + 1
    return lo


# ---------------------------------------------------------------------------
# claim-size laws
# ---------------------------------------------------------------------------


class ClaimLaw:
    """Law of a single (positive) claim size."""

    #: True when the law has a Lebesgue density on (0, inf)
    has_density = True

    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def laplace(self, theta):
        """``E exp(-theta xi)``; accepts floats, arrays and jets."""
        raise NotImplementedError

    def laplace_prime(self, theta):
        """Derivative of :meth:`laplace` in ``theta``."""
        raise NotImplementedError

    def theta_min(self) -> float:
        """``laplace`` is finite for ``theta > theta_min``."""
        raise NotImplementedError

    def survival(self, s):
        """``P(xi >= s)``."""
        raise NotImplementedError

    def pdf(self, s):
        raise CapabilityError(f"{type(self).__name__} claims have no density")

    def stop_loss(self, s):
        """``E (xi - s)^+``."""
        raise NotImplementedError

    def sim_params(self):
        """(kind, weights, shapes, rates, size) arrays for the simulator."""
        raise NotImplementedError


@dataclass(frozen=True)
class ErlangMixture(ClaimLaw):
    """Finite mixture of Erlang laws ``sum_j p_j Erlang(shape_j, rate_j)``."""

    weights: tuple[float, ...]
    shapes: tuple[int, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        k = tuple(int(x) for x in self.shapes)
        r = tuple(float(x) for x in self.rates)
        if not (len(w) == len(k) == len(r) >= 1):
            raise ModelInvalidError("mixture weights, shapes and rates must have equal nonzero length")
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
            raise ModelInvalidError(f"mixture weights must be nonnegative and sum to 1, got {w}")
        if any(s < 1 for s in k) or any(s != s0 for s, s0 in zip(k, self.shapes)):
            raise ModelInvalidError(f"Erlang shapes must be positive integers, got {self.shapes}")
        if any(not (x > 0 and math.isfinite(x)) for x in r):
            raise ModelInvalidError(f"Erlang rates must be positive and finite, got {r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "shapes", k)
        object.__setattr__(self, "rates", r)

    @property
    def components(self):
        return list(zip(self.weights, self.shapes, self.rates))

    def mean(self) -> float:
        return sum(p * k / r for p, k, r in self.components)

    def second_moment(self) -> float:
        return sum(p * k * (k + 1) / r**2 for p, k, r in self.components)

    def laplace(self, theta):
        total = 0.0
        for p, k, r in self.components:
            total = total + p * (r / (r + theta)) ** k
        return total

    def laplace_prime(self, theta):
        total = 0.0
        for p, k, r in self.components:
            total = total - p * k * r**k / (r + theta) ** (k + 1)
        return total

    def theta_min(self) -> float:
        return -min(self.rates)

    def survival(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return sum(p * special.gammaincc(k, r * s) for p, k, r in self.components)

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        out = sum(p * stats.gamma.pdf(s, k, scale=1.0 / r) for p, k, r in self.components)
        return np.where(s > 0, out, 0.0)

    def stop_loss(self, s):
        # E(xi - s)^+ = E xi P(xi* > s) - s P(xi > s), xi* the size-biased law
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        total = 0.0
        for p, k, r in self.components:
            total = total + p * (k / r * special.gammaincc(k + 1, r * s) - s * special.gammaincc(k, r * s))
        return total

    @property
    def common_rate(self) -> float | None:
        r0 = self.rates[0]
        return r0 if all(r == r0 for r in self.rates) else None

    def sim_params(self):
        return (
            1,
            np.array(self.weights, dtype=np.float64),
            np.array(self.shapes, dtype=np.int64),
            np.array(self.rates, dtype=np.float64),
            0.0,
        )


@dataclass(frozen=True)
class Exponential(ErlangMixture):
    """Exponential claims with rate ``alpha`` (the case with closed forms)."""

    alpha: float = field(default=1.0)
    weights: tuple[float, ...] = field(init=False, repr=False)
    shapes: tuple[int, ...] = field(init=False, repr=False)
    rates: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        a = float(self.alpha)
        if not (a > 0 and math.isfinite(a)):
            raise ModelInvalidError(f"exponential claim rate must be positive, got {self.alpha}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "weights", (1.0,))
        object.__setattr__(self, "shapes", (1,))
        object.__setattr__(self, "rates", (a,))

    def laplace(self, theta):
        return self.alpha / (self.alpha + theta)

    def laplace_prime(self, theta):
        return -self.alpha / (self.alpha + theta) ** 2

    def survival(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return np.exp(-self.alpha * s)

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s > 0, self.alpha * np.exp(-self.alpha * np.maximum(s, 0.0)), 0.0)

    def stop_loss(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return np.exp(-self.alpha * s) / self.alpha


@dataclass(frozen=True)
class Deterministic(ClaimLaw):
    """Every claim has the same size ``size``."""

    size: float
    has_density = False

    def __post_init__(self):
        d = float(self.size)
        if not (d > 0 and math.isfinite(d)):
            raise ModelInvalidError(f"deterministic claim size must be positive, got {self.size}")
        object.__setattr__(self, "size", d)

    def mean(self) -> float:
        return self.size

    def second_moment(self) -> float:
        return self.size**2

    def laplace(self, theta):
        return jexp(-self.size * theta)

    def laplace_prime(self, theta):
        return -self.size * jexp(-self.size * theta)

    def theta_min(self) -> float:
        return -math.inf

    def survival(self, s):
        return np.where(np.asarray(s, dtype=float) <= self.size, 1.0, 0.0)

    def stop_loss(self, s):
        return np.maximum(self.size - np.maximum(np.asarray(s, dtype=float), 0.0), 0.0)

    def sim_params(self):
        return 2, np.ones(1), np.ones(1, dtype=np.int64), np.ones(1), self.size


# ---------------------------------------------------------------------------
# risk model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalLaw:
    """Law of ``X_t`` started at 0: an atom ``exp(-lam t)`` at ``c t`` plus a density."""

    model: "RiskModel"
    t: float

    @property
    def atom_location(self) -> float:
        return self.model.c * self.t

    @property
    def atom_weight(self) -> float:
        return math.exp(-self.model.lam * self.t)

    def density(self, z):
        z = np.asarray(z, dtype=float)
        return self.model.ac_density(np.full(z.shape, self.t), z)

    def cdf(self, z):
        """``P(X_t <= z)`` including the atom."""
        z = np.asarray(z, dtype=float)
        m = self.model
        law = m._gamma_mixture_law()
        lt = m.lam * self.t
        n = np.arange(1, poisson_cutoff(lt) + 1)
        pois = stats.poisson.pmf(n, lt)
        shape_w = pois @ law.shape_pmf_matrix(n.size)  # weights on Gamma(k, rate)
        k = np.arange(shape_w.size)
        gap = np.maximum(self.atom_location - z, 0.0)  # claim total needed
        sf = special.gammaincc(np.maximum(k, 1)[None, :], law.rate * gap.ravel()[:, None])
        sf[:, 0] = 0.0
        out = (sf @ shape_w).reshape(z.shape)
        return np.where(z >= self.atom_location, out + self.atom_weight, out)


class _GammaMixtureLaw:
    """Claim laws whose n-fold convolutions are Gamma(k, rate) mixtures."""

    def __init__(self, claims: ErlangMixture):
        rate = claims.common_rate
        if rate is None:
            raise CapabilityError(
                "marginal law of X_t needs Erlang claims with a common rate"
            )
        self.rate = rate
        kmax = max(claims.shapes)
        pmf = np.zeros(kmax + 1)
        for p, k, _ in claims.components:
            pmf[k] += p
        self.shape_pmf = pmf

    @lru_cache(maxsize=8)
    def shape_pmf_matrix(self, n_max: int) -> np.ndarray:
        """Row ``n-1`` holds the pmf of the total shape of ``n`` claims."""
        kmax = self.shape_pmf.size - 1
        out = np.zeros((n_max, n_max * kmax + 1))
        cur = np.array([1.0])
        for n in range(n_max):
            cur = np.convolve(cur, self.shape_pmf)
            out[n, : cur.size] = cur
        out.setflags(write=False)
        return out


@dataclass(frozen=True)
class RiskModel:
    """Premium rate ``c``, claim arrival rate ``lam`` and claim law."""

    c: float
    lam: float
    claims: ClaimLaw

    def __post_init__(self):
        c, lam = float(self.c), float(self.lam)
        if not (c > 0 and math.isfinite(c)):
            raise ModelInvalidError(f"premium rate must be positive and finite, got {self.c}")
        if not (lam > 0 and math.isfinite(lam)):
            raise ModelInvalidError(f"claim rate must be positive and finite, got {self.lam}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "lam", lam)
        self.mean_x1()

    # -- cumulant and friends ----------------------------------------------
    def mean_x1(self) -> float:
        """``E_0 X_1 = c - lam E xi``; raises unless strictly positive."""
        m = self.c - self.lam * self.claims.mean()
        if not m > 0:
            raise ModelInvalidError(
                f"safety loading violated: E X_1 = {m:.6g} <= 0", mean=m
            )
        return m

    def _check_theta(self, theta):
        t0 = np.min(base_value(theta))
        if t0 <= self.claims.theta_min():
            raise DomainError(
                f"cumulant undefined for theta <= {self.claims.theta_min()}, got {t0}"
            )

    def cumulant(self, theta):
        """``psi(theta) = log E exp(theta X_1)``; jets are accepted."""
        self._check_theta(theta)
        return self.c * theta + self.lam * (self.claims.laplace(theta) - 1.0)

    def cumulant_prime(self, theta):
        self._check_theta(theta)
        return self.c + self.lam * self.claims.laplace_prime(theta)

    def phi_inverse(self, q):
        """Right inverse ``Phi(q) = sup{theta >= 0 : psi(theta) = q}``.

        Jets are accepted: with ``q = q0 + eps`` the result carries the Taylor
        coefficients of ``Phi`` around ``q0``.
        """
        if isinstance(q, Jet):
            return self._phi_jet(q)
        q = float(q)
        if q < 0:
            raise DomainError(f"Phi needs q >= 0, got {q}")
        return _phi_scalar(self, q)

    def _phi_jet(self, q: Jet) -> Jet:
        q0 = float(np.asarray(q.value))
        if q0 < 0:
            raise DomainError(f"Phi needs q >= 0, got {q0}")
        if isinstance(self.claims, Exponential):
            return _phi_closed_form(self.c, self.lam, self.claims.alpha, q)
        # Newton on jets doubles the number of exact coefficients per step
        theta = Jet.constant(_phi_scalar(self, q0), q.order)
        for _ in range(max(1, q.order).bit_length() + 2):
            theta = theta - (self.cumulant(theta) - q) / self.cumulant_prime(theta)
        return theta

    def levy_tail(self, x):
        """``Pi((-inf, x])`` for ``x < 0``: rate of jumps of size at most ``x``."""
        x = np.asarray(x, dtype=float)
        if np.any(x >= 0):
            raise DomainError("levy_tail needs x < 0")
        out = self.lam * self.claims.survival(-x)
        return out if out.ndim else float(out)

    def levy_density(self, x):
        """Density of the Levy measure at ``x < 0`` (claims with a density only)."""
        x = np.asarray(x, dtype=float)
        return self.lam * self.claims.pdf(-x)

    # -- law of X_t ----------------------------------------------------------
    def marginal_law(self, t: float) -> MarginalLaw:
        if not t > 0:
            raise DomainError(f"marginal law needs t > 0, got {t}")
        self._gamma_mixture_law()
        return MarginalLaw(self, float(t))

    def _gamma_mixture_law(self) -> _GammaMixtureLaw:
        if not isinstance(self.claims, ErlangMixture):
            raise CapabilityError(
                f"{type(self.claims).__name__} claims make X_t purely atomic; no density"
            )
        return _gamma_law(self.claims)

    def ac_density(self, t, z):
        """Absolutely continuous part of ``P_0(X_t in dz)``, elementwise in ``(t, z)``.

        The number of exponential phases in the claim total up to ``t`` is
        compound Poisson, so its pmf follows from the Panjer recursion; the
        density is then a Gamma mixture evaluated at ``c t - z``.
        """
        t, z = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(z, dtype=float))
        law = self._gamma_mixture_law()
        out = _ac_density_kernel(
            np.ascontiguousarray(t.ravel()),
            np.ascontiguousarray(z.ravel()),
            self.c,
            self.lam,
            law.shape_pmf,
            law.rate,
        )
        return out.reshape(t.shape)

    def lundberg_exponent(self) -> float:
        """Adjustment coefficient ``R > 0`` with ``psi(-R) = 0``.

        Classical ruin from ``u`` is at most ``exp(-R u)``.
        """
        top = -self.claims.theta_min()
        if not math.isfinite(top):
            top = 1.0
            while float(self.cumulant(-top)) <= 0:
                top *= 2.0
        else:
            top *= 1.0 - 1e-12
        lo = top
        while float(self.cumulant(-lo)) >= 0:
            lo *= 0.5
        return optimize.brentq(lambda r: float(self.cumulant(-r)), lo, top, xtol=1e-14, rtol=1e-14)

    def chernoff_lower(self, t: float, level: float) -> float:
        """Upper bound on ``P_0(X_t <= level)`` for ``level < t E X_1``."""
        thetas = self._chernoff_thetas()
        expo = thetas * level + t * np.asarray(self.cumulant(-thetas), dtype=float)
        return math.exp(min(0.0, float(np.min(expo))))

    def _chernoff_thetas(self) -> np.ndarray:
        top = -self.claims.theta_min()
        top = 20.0 / self.claims.mean() if not math.isfinite(top) else 0.999 * top
        return np.geomspace(top * 1e-4, top, 400)


@lru_cache(maxsize=64)
def _gamma_law(claims: ErlangMixture) -> _GammaMixtureLaw:
    return _GammaMixtureLaw(claims)


def _phi_closed_form(c, lam, alpha, q):
    a = alpha * c - lam - q
    disc = jsqrt(a * a + 4.0 * q * alpha * c)
    if np.all(base_value(a) > 0):
        # rationalised form avoids cancellation for small q
        return 2.0 * q * alpha / (disc + a)
    return (disc - a) / (2.0 * c)


@lru_cache(maxsize=4096)
def _phi_scalar(model: RiskModel, q: float) -> float:
    if q == 0.0:
        return 0.0
    if isinstance(model.claims, Exponential):
        return float(_phi_closed_form(model.c, model.lam, model.claims.alpha, q))
    psi = model.cumulant
    lo, hi = 0.0, 1.0
    while psi(hi) <= q:
        lo, hi = hi, 2.0 * hi
    theta = 0.5 * (lo + hi)
    for _ in range(200):
        val = psi(theta) - q
        if val > 0:
            hi = theta
        else:
            lo = theta
        if abs(val) <= 1e-15 * max(1.0, q) or hi - lo <= 4 * np.finfo(float).eps * hi:
            break
        step = theta - val / model.cumulant_prime(theta)
        theta = step if lo < step < hi else 0.5 * (lo + hi)
    return float(theta)


@nb.njit(cache=True)
def _ac_density_kernel(t, z, c, lam, shape_pmf, rate):
    out = np.zeros(t.size)
    kmax = shape_pmf.size - 1
    log_rate = math.log(rate)
    rescale = 200.0 * math.log(10.0)
    for i in range(t.size):
        ti = t[i]
        gap = c * ti - z[i]
        if ti <= 0.0 or gap <= 0.0:
            continue
        mu = lam * ti
        # Poisson(mu) mass beyond mu + 12 sqrt(mu) + 30 is far below 1e-12
        n_cut = int(mu + 12.0 * math.sqrt(mu) + 30.0)
        k_top = n_cut * kmax
        p = np.zeros(k_top + 1)  # phase-count pmf times exp(-log_scale)
        p[0] = 1.0
        log_scale = -mu
        log_gap = math.log(gap)
        total = 0.0
        for k in range(1, k_top + 1):
            acc = 0.0
            for j in range(1, min(k, kmax) + 1):
                acc += j * shape_pmf[j] * p[k - j]
            pk = mu / k * acc
            p[k] = pk
            if pk > 1e200:
                for m in range(k + 1):
                    p[m] *= 1e-200
                log_scale += rescale
                pk = p[k]
            if pk > 0.0:
                total += math.exp(
                    math.log(pk) + log_scale + k * log_rate + (k - 1) * log_gap - rate * gap - math.lgamma(k)
                )
        out[i] = total
    return out
