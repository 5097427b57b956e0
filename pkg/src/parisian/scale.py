"""Scale functions and first-passage laws of the risk reserve.

``W^{(q)}`` is characterised by its Laplace transform
``int_0^inf e^{-beta x} W^{(q)}(x) dx = 1 / (psi(beta) - q)`` for
``beta > Phi(q)``, and vanishes on ``(-inf, 0)``. Three exact backends are
used:

* exponential claims: the Esscher-tilted process is again of the same type,
  so ``W^{(q)}(x) = e^{Phi(q) x} W_{Phi(q)}(x)`` with an elementary ``W_Phi``;
* Erlang mixtures: ``1 / (psi - q)`` is rational, inverted by partial
  fractions over the complex roots of its denominator;
* fixed-size claims: an alternating series in ``x - k d``, summed in
  multiprecision so the cancellation between terms is harmless.

``Lambda^{(q)}(x, t)`` and the upward first-passage law ``G_y`` are built on
the law of ``X_t``, whose atom at ``c t`` is always handled separately.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from numpy.polynomial import polynomial as P

from .errors import CapabilityError, DomainError
from .model import Deterministic, ErlangMixture, Exponential, RiskModel
from .quadrature import DEFAULT_SPEC, QuadratureSpec, batched_integral, integrate

__all__ = ["ScaleEvaluator"]


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


# ---------------------------------------------------------------------------
# backends: each returns W^{(q)} and its right derivative on x >= 0
# ---------------------------------------------------------------------------


class _ExponentialBackend:
    def __init__(self, model: RiskModel):
        self.c, self.lam, self.alpha = model.c, model.lam, model.claims.alpha
        self.model = model

    def _tilted(self, q):
        phi = self.model.phi_inverse(q)
        a = self.alpha + phi
        lam = self.lam * self.alpha / a
        return phi, a, lam

    def value(self, q, x):
        phi, a, lam = self._tilted(q)
        c = self.c
        decay = a - lam / c
        inner = (a / (a * c - lam)) * (1.0 - (lam / (a * c)) * np.exp(-decay * x))
        return np.exp(phi * x) * inner

    def prime(self, q, x):
        phi, a, lam = self._tilted(q)
        c = self.c
        decay = a - lam / c
        inner = (a / (a * c - lam)) * (1.0 - (lam / (a * c)) * np.exp(-decay * x))
        inner_prime = (lam / c**2) * np.exp(-decay * x)
        return np.exp(phi * x) * (phi * inner + inner_prime)

    def limit(self, q):
        _, a, lam = self._tilted(q)
        return a / (a * self.c - lam)

    def residual(self, q, x):
        phi, a, lam = self._tilted(q)
        c = self.c
        return self.limit(q) * (lam / (a * c)) * np.exp((phi - (a - lam / c)) * np.asarray(x, dtype=float))


class _RationalBackend:
    """Partial fractions of ``D(beta) / N_q(beta)`` for Erlang-mixture claims."""

    def __init__(self, model: RiskModel):
        self.model = model
        claims: ErlangMixture = model.claims
        mult: dict[float, int] = {}
        for _, k, r in claims.components:
            mult[r] = max(mult.get(r, 0), k)
        self.mult = mult
        denom = np.array([1.0])
        for r, m in mult.items():
            denom = P.polymul(denom, P.polypow([r, 1.0], m))
        numer = np.array([0.0])
        for p, k, r in claims.components:
            term = np.array([p * r**k])
            term = P.polymul(term, P.polypow([r, 1.0], mult[r] - k))
            for r2, m2 in mult.items():
                if r2 != r:
                    term = P.polymul(term, P.polypow([r2, 1.0], m2))
            numer = P.polyadd(numer, term)
        self.denom = denom
        self.numer = numer
        self._lock = threading.Lock()
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def poles(self, q: float):
        with self._lock:
            hit = self._cache.get(q)
        if hit is not None:
            return hit
        m = self.model
        lin = np.array([-(m.lam + q), m.c])
        n_q = P.polyadd(P.polymul(lin, self.denom), m.lam * self.numer)
        dn_q = P.polyder(n_q)
        roots = P.polyroots(n_q).astype(complex)
        for _ in range(3):
            roots = roots - P.polyval(roots, n_q) / P.polyval(roots, dn_q)
        gaps = np.abs(roots[:, None] - roots[None, :]) + np.eye(roots.size)
        if roots.size > 1 and gaps.min() < 1e-7 * max(1.0, np.abs(roots).max()):
            raise CapabilityError(f"repeated pole in 1/(psi - q) at q={q}; partial fractions unavailable")
        residues = P.polyval(roots, self.denom) / P.polyval(roots, dn_q)
        # the largest real root is Phi(q); pin it to the accurate scalar value
        i = int(np.argmax(roots.real))
        roots[i] = m.phi_inverse(q)
        residues[i] = P.polyval(roots[i], self.denom) / P.polyval(roots[i], dn_q)
        out = (roots, residues)
        with self._lock:
            self._cache[q] = out
        return out

    def value(self, q, x):
        roots, res = self.poles(q)
        x = np.asarray(x, dtype=float)
        terms = res[None, :] * np.exp(np.multiply.outer(x.ravel(), roots))
        return terms.sum(axis=1).real.reshape(x.shape)

    def prime(self, q, x):
        roots, res = self.poles(q)
        x = np.asarray(x, dtype=float)
        terms = (res * roots)[None, :] * np.exp(np.multiply.outer(x.ravel(), roots))
        return terms.sum(axis=1).real.reshape(x.shape)

    def limit(self, q):
        roots, res = self.poles(q)
        return float(res[int(np.argmax(roots.real))].real)

    def residual(self, q, x):
        roots, res = self.poles(q)
        keep = np.arange(roots.size) != int(np.argmax(roots.real))
        x = np.asarray(x, dtype=float)
        terms = res[keep][None, :] * np.exp(np.multiply.outer(x.ravel(), roots[keep]))
        return -terms.sum(axis=1).real.reshape(x.shape)


class _DeterministicBackend:
    """Series ``(1/c) sum_k (-lam/c)^k (x-kd)^k e^{kappa (x-kd)} / k!``."""

    def __init__(self, model: RiskModel):
        self.model = model
        self.c, self.lam, self.d = model.c, model.lam, model.claims.size

    @lru_cache(maxsize=200_000)
    def _point(self, q: float, x: float, derivative: bool) -> float:
        c, lam, d = self.c, self.lam, self.d
        kappa = (lam + q) / c
        digits = int((lam / c + kappa) * x / math.log(10.0)) + 20
        with mpmath.workdps(digits):
            mx, md, mk, ml = mpmath.mpf(x), mpmath.mpf(d), mpmath.mpf(kappa), -mpmath.mpf(lam) / c
            total = mpmath.mpf(0)
            k = 0
            while k * d <= x:
                s = mx - k * md
                e = mpmath.exp(mk * s)
                if derivative:
                    term = mk * s**k / mpmath.factorial(k)
                    if k >= 1:
                        term += s ** (k - 1) / mpmath.factorial(k - 1)
                else:
                    term = s**k / mpmath.factorial(k)
                total += ml**k * term * e
                k += 1
            return float(total / c)

    def value(self, q, x):
        x = np.asarray(x, dtype=float)
        flat = [self._point(float(q), float(v), False) for v in x.ravel()]
        return np.asarray(flat).reshape(x.shape)

    def prime(self, q, x):
        x = np.asarray(x, dtype=float)
        flat = [self._point(float(q), float(v), True) for v in x.ravel()]
        return np.asarray(flat).reshape(x.shape)

    def _phi(self, q):
        return self.model.phi_inverse(q)

    def limit(self, q):
        return 1.0 / float(self.model.cumulant_prime(self._phi(q)))

    @lru_cache(maxsize=200_000)
    def _residual_point(self, q: float, x: float) -> float:
        c, lam, d = self.c, self.lam, self.d
        phi = self._phi(q)
        kappa = (lam + q) / c
        digits = int((lam / c + kappa + phi) * x / math.log(10.0)) + 30
        with mpmath.workdps(digits):
            mx, md, ml = mpmath.mpf(x), mpmath.mpf(d), -mpmath.mpf(lam) / c
            mk = (mpmath.mpf(lam) + q) / c
            # Phi and L to working precision; float values would leave an e^{Phi x} sized error
            mphi = mpmath.findroot(lambda th: c * th + lam * (mpmath.exp(-th * md) - 1) - q, mpmath.mpf(phi))
            lim = 1 / (c - lam * md * mpmath.exp(-mphi * md))
            total = mpmath.mpf(0)
            k = 0
            while k * d <= x:
                sk = mx - k * md
                total += ml**k * sk**k / mpmath.factorial(k) * mpmath.exp(mk * sk)
                k += 1
            return float(lim * mpmath.exp(mphi * mx) - total / c)

    def residual(self, q, x):
        x = np.asarray(x, dtype=float)
        flat = [self._residual_point(float(q), float(v)) for v in x.ravel()]
        return np.asarray(flat).reshape(x.shape)


def _backend(model: RiskModel):
    if isinstance(model.claims, Exponential):
        return _ExponentialBackend(model)
    if isinstance(model.claims, ErlangMixture):
        return _RationalBackend(model)
    if isinstance(model.claims, Deterministic):
        return _DeterministicBackend(model)
    raise CapabilityError(f"no scale-function backend for {type(model.claims).__name__} claims")


# ---------------------------------------------------------------------------
# evaluator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScaleEvaluator:
    """Scale functions, ``Lambda^{(q)}`` and first-passage quantities for one model."""

    model: RiskModel
    quadrature: QuadratureSpec = DEFAULT_SPEC
    backend: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "backend", _backend(self.model))

    @property
    def backend_name(self) -> str:
        return {
            _ExponentialBackend: "tilted-closed-form",
            _RationalBackend: "partial-fractions",
            _DeterministicBackend: "multiprecision-series",
        }[type(self.backend)]

    # -- W and W^{(q)} ---------------------------------------------------------
    def w_scale(self, x):
        """``W = W^{(0)}``."""
        return self.wq_scale(0.0, x)

    def wq_scale(self, q: float, x):
        """``W^{(q)}(x)``; zero for ``x < 0`` and ``1/c`` at ``x = 0``."""
        if q < 0:
            raise DomainError(f"W^(q) needs q >= 0, got {q}")
        xa = np.asarray(x, dtype=float)
        out = np.zeros(xa.shape)
        pos = xa >= 0
        if np.any(pos):
            out[pos] = self.backend.value(float(q), xa[pos])
        return _scalar_or_array(out, x)

    def wq_prime(self, q: float, x):
        """Right derivative of ``W^{(q)}`` on ``x >= 0``; zero for ``x < 0``."""
        if q < 0:
            raise DomainError(f"W^(q) needs q >= 0, got {q}")
        xa = np.asarray(x, dtype=float)
        out = np.zeros(xa.shape)
        pos = xa >= 0
        if np.any(pos):
            out[pos] = self.backend.prime(float(q), xa[pos])
        return _scalar_or_array(out, x)

    def wq_split(self, q: float, x):
        """``(L, R(x))`` with ``W^{(q)}(x) = L e^{Phi(q) x} - R(x)`` on ``x >= 0``.

        ``L = 1/psi'(Phi(q))`` and ``R`` is computed directly, so quantities
        that cancel the leading exponential stay accurate.
        """
        if q < 0:
            raise DomainError(f"W^(q) needs q >= 0, got {q}")
        xa = np.asarray(x, dtype=float)
        if np.any(xa < 0):
            raise DomainError("the split form is defined on x >= 0")
        return float(self.backend.limit(float(q))), _scalar_or_array(self.backend.residual(float(q), xa), x)

    def exit_weight(self, q: float, u: float, b: float, y):
        """``W^{(q)}(u) W^{(q)}(b-y) / W^{(q)}(b) - W^{(q)}(u-y)`` for ``0 <= y <= b``.

        It weights the claim that first takes the reserve below 0 before it
        reaches ``b``. Written
        through :meth:`wq_split` every exponential has a nonpositive
        exponent, which removes the cancellation that the direct form
        suffers once ``Phi(q) (u - y)`` is large.
        """
        phi = self.model.phi_inverse(q)
        ya = np.atleast_1d(np.asarray(y, dtype=float))
        lim, _ = self.wq_split(q, 0.0)

        def res(x):
            return np.asarray(self.backend.residual(float(q), np.asarray(x, dtype=float)), dtype=float)

        def scaled(x):
            return lim - np.exp(-phi * x) * res(x)

        r_b = float(res(b))
        wphi_b = float(scaled(b))
        out = np.zeros(ya.shape)
        above = ya > u
        if np.any(above):
            yy = ya[above]
            out[above] = np.exp(phi * (u - yy)) * float(scaled(u)) * scaled(b - yy) / wphi_b
        below = ~above
        if np.any(below):
            yy = ya[below]
            r_u = float(res(u))
            r_uy, r_by = res(u - yy), res(b - yy)
            core = lim * (
                r_uy + np.exp(-phi * (b - u + yy)) * r_b - np.exp(-phi * (b - u)) * r_by - np.exp(-phi * yy) * r_u
            ) + math.exp(-phi * b) * (r_u * r_by - r_uy * r_b)
            out[below] = core / wphi_b
        return _scalar_or_array(out.reshape(np.shape(y)) if np.ndim(y) else out[0], y)

    def wq_laplace(self, q: float, beta: float) -> float:
        """Numerical ``int_0^inf e^{-beta x} W^{(q)}(x) dx`` (for identity checks)."""
        phi = self.model.phi_inverse(q)
        if not beta > phi:
            raise DomainError(f"transform needs beta > Phi(q) = {phi}, got {beta}")
        gap = beta - phi
        # W^{(q)}(x) e^{-Phi x} <= 1 / psi'(Phi), so the tail past X is below that / gap * e^{-gap X}
        bound = 1.0 / (float(self.model.cumulant_prime(phi)) * gap)
        upper = max(1.0, math.log(bound / self.quadrature.truncation_mass) / gap)
        points = ()
        if isinstance(self.model.claims, Deterministic):
            d = self.model.claims.size
            points = tuple(np.arange(d, upper, d))
        val, _ = integrate(
            lambda x: np.exp(-beta * x) * self.wq_scale(q, x),
            0.0,
            upper,
            self.quadrature.tighter(1e-3),
            points=points,
        )
        return val

    # -- law of X_t helpers ----------------------------------------------------
    def _is_atomic(self) -> bool:
        return isinstance(self.model.claims, Deterministic)

    def kendall_density(self, y, s):
        """``(y / s) f_s(y)``: density of the upward passage time of ``y`` at ``s``."""
        y, s = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(s, dtype=float))
        if self._is_atomic():
            raise CapabilityError("fixed-size claims give X_s no density")
        out = np.where(s > 0, y / np.where(s > 0, s, 1.0) * self.model.ac_density(s, y), 0.0)
        return _scalar_or_array(out, y + s)

    def upcross_horizon(self, y: float, mass: float | None = None) -> float:
        """A time ``S`` with ``P_0(tau_y^+ > S) <= mass`` (Chernoff bound on ``X_S <= y``)."""
        mass = self.quadrature.truncation_mass if mass is None else mass
        m = self.model
        s = max(2.0 * y / m.mean_x1(), 2.0 * y / m.c, 1.0)
        while m.chernoff_lower(s, y) > mass:
            s *= 1.5
        return s

    # -- Lambda ----------------------------------------------------------------
    def lambda_q(self, q: float, x: float, t):
        """``Lambda^{(q)}(x, t) = int_0^inf W^{(q)}(x+z) (z/t) P_0(X_t in dz)``."""
        if q < 0:
            raise DomainError(f"Lambda^(q) needs q >= 0, got {q}")
        ta = np.asarray(t, dtype=float)
        if np.any(ta <= 0):
            raise DomainError("Lambda^(q)(x, t) needs t > 0")
        out = self._lambda_many(float(q), float(x), ta.ravel()).reshape(ta.shape)
        return _scalar_or_array(out, t)

    def _lambda_many(self, q: float, x: float, t: np.ndarray) -> np.ndarray:
        m = self.model
        c, lam = m.c, m.lam
        out = np.zeros(t.size)
        live = x + c * t >= 0
        if not np.any(live):
            return out
        tl = t[live]
        if self._is_atomic():
            out[live] = self._lambda_atomic(q, x, tl)
            return out
        atom = np.exp(-lam * tl) * c * self.wq_scale(q, x + c * tl)
        lo = np.full(tl.shape, max(0.0, -x))
        hi = c * tl
        panels = int(min(64, max(2, math.ceil(float(np.max(hi - lo)) / (2.0 * m.claims.mean())))))
        out[live] = atom + batched_integral(
            lambda z, i: self.wq_scale(q, x + z) * (z / tl[i]) * m.ac_density(tl[i], z),
            lo,
            hi,
            self.quadrature,
            panels=panels,
        )
        return out

    def _lambda_atomic(self, q, x, t):
        d, lam, c = self.model.claims.size, self.model.lam, self.model.c
        out = np.zeros(t.size)
        for i, ti in enumerate(t):
            n = np.arange(0, int(math.floor(c * ti / d)) + 1)
            z = c * ti - n * d
            keep = (z > 0) & (x + z >= 0)
            n, z = n[keep], z[keep]
            logp = n * math.log(lam * ti) - lam * ti - np.array([math.lgamma(k + 1) for k in n])
            out[i] = float(np.sum(np.exp(logp) * self.wq_scale(q, x + z) * z / ti))
        return out

    # -- upward first passage ------------------------------------------------
    def g_upcross(self, y: float, t: float) -> float:
        """``G_y(t) = P_0(tau_y^+ <= t)`` by the Kendall identity."""
        return self.upcross_transform(0.0, y, t)

    def upcross_transform(self, q: float, y: float, t: float) -> float:
        """Incomplete transform ``E_0(e^{-q tau_y^+}; tau_y^+ <= t)``."""
        y, t = float(y), float(t)
        if not (y > 0 and t > 0):
            raise DomainError(f"upward passage needs y > 0 and t > 0, got y={y}, t={t}")
        m = self.model
        t0 = y / m.c
        if t < t0:
            return 0.0
        if self._is_atomic():
            return math.exp(-q * t) * float(self._lambda_atomic(q, -y, np.array([t]))[0])
        atom = math.exp(-(q + m.lam) * t0)
        upper = min(t, self.upcross_horizon(y))
        if upper <= t0:
            return atom
        val, _ = integrate(
            lambda s: np.exp(-q * s) * self.kendall_density(y, s),
            t0,
            upper,
            self.quadrature.tighter(1e-2),
        )
        return atom + val

    def upcross_atoms(self, y: float, t_max: float) -> tuple[np.ndarray, np.ndarray]:
        """Atoms of ``tau_y^+`` on ``[y/c, t_max]`` for fixed-size claims.

        With claims of size ``d`` the level ``y`` is reached by drifting at
        ``t_n = (y + n d) / c`` only, with probability
        ``(y / (c t_n)) P(N_{t_n} = n)``.
        """
        if not self._is_atomic():
            raise CapabilityError("upward passage has no atoms for claims with a density")
        m = self.model
        d = m.claims.size
        n = np.arange(0, int(math.floor((m.c * t_max - y) / d)) + 1)
        t = (y + n * d) / m.c
        log_pois = n * np.log(m.lam * t) - m.lam * t - np.array([math.lgamma(k + 1) for k in n])
        return t, y / (m.c * t) * np.exp(log_pois)
