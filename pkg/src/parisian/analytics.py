"""Parisian ruin with deficit-dependent delays: probabilities and transforms.

Notation: a negative excursion that starts with deficit ``x < 0`` is granted a
delay ``eta ~ P_x``; ruin happens when ``eta`` runs out before the reserve
climbs back to 0, i.e. when ``eta < tau``, with ``tau`` the upward passage
time over ``|x|``.

* ``h_u``: defective density of the first deficit when starting from ``u``;
* ``K(x) = E F̄_x(tau)``: probability that a delay outlasts the excursion;
* ``H(v) = int K h_v``: probability of a first excursion that recovers;
* ``M_1, M_2``: transforms of the end-of-delay position and of the recovery
  time for one excursion, and ``Q_1, Q_2`` their averages over the first
  excursion before ``b`` is reached.

Three routes evaluate ``K``, ``H`` and ``M``. Exponential delays per deficit
cell give the closed forms ``e^{Phi(r) x}``; Erlang mixtures give finite sums
of derivatives of ``e^{Phi(r) x}`` in ``r`` (``phi_ell``, via jets); any
kernel can go through direct quadrature against the first-passage law.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import CapabilityError, DomainError, InternalConsistencyError
from .jets import Jet
from .kernels import DelayKernel, DeterministicDelay
from .model import Deterministic, Exponential, RiskModel
from .quadrature import DEFAULT_SPEC, QuadratureSpec, batched_integral, gauss_legendre_panels, integrate
from .scale import ScaleEvaluator

__all__ = [
    "ParisianProblem",
    "ROUTE_CASE1",
    "ROUTE_CASE2",
    "ROUTE_QUADRATURE",
]

ROUTE_CASE1 = "exponential-delay-closed-form"
ROUTE_CASE2 = "erlang-delay-sums"
ROUTE_QUADRATURE = "quadrature"

MAX_JET_ORDER = 16


def _as_array(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def _shape_like(out, like):
    return float(out[0]) if np.ndim(like) == 0 else out.reshape(np.shape(like))


def _check_deficit(x):
    if np.any(~(np.asarray(x, dtype=float) < 0)):
        raise DomainError("deficits must be strictly negative")


@dataclass(frozen=True)
class ParisianProblem:
    """A risk model paired with a delay kernel."""

    model: RiskModel
    kernel: DelayKernel
    quadrature: QuadratureSpec = DEFAULT_SPEC
    scale: ScaleEvaluator = field(init=False, repr=False, compare=False)
    _cache: dict = field(init=False, repr=False, compare=False, default_factory=dict)
    _lock: threading.Lock = field(init=False, repr=False, compare=False, default_factory=threading.Lock)

    def __post_init__(self):
        object.__setattr__(self, "scale", ScaleEvaluator(self.model, self.quadrature))

    # -- routing -----------------------------------------------------------------
    @property
    def kernel_route(self) -> str:
        """Fastest route the kernel supports."""
        if isinstance(self.kernel, DeterministicDelay):
            return ROUTE_QUADRATURE
        for _, _, comps in self.kernel.cells():
            if any(c.shape > 1 and not c.immediate for c in comps):
                return ROUTE_CASE2
        return ROUTE_CASE1

    def resolve_route(self, route: str | None) -> str:
        """Map ``None``/``"auto"``, ``"closed"`` or ``"quadrature"`` to a concrete route."""
        if route in (None, "auto"):
            return self.kernel_route
        if route == "closed":
            if self.kernel_route == ROUTE_QUADRATURE:
                raise CapabilityError("no closed-form route for a deterministic delay kernel")
            return self.kernel_route
        if route in (ROUTE_QUADRATURE, ROUTE_CASE1, ROUTE_CASE2):
            if route != ROUTE_QUADRATURE and self.kernel_route == ROUTE_QUADRATURE:
                raise CapabilityError(f"route {route!r} needs a piecewise kernel")
            if route == ROUTE_CASE1 and self.kernel_route == ROUTE_CASE2:
                raise CapabilityError("kernel has Erlang components of shape > 1")
            return route
        raise DomainError(f"unknown route {route!r}")

    @property
    def _exp_claims(self) -> bool:
        return isinstance(self.model.claims, Exponential)

    def _cached(self, key, make):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        val = make()
        with self._lock:
            self._cache[key] = val
        return val

    # -- jets of exp(Phi(p) x) ---------------------------------------------------
    def _phi_jet(self, p: float, order: int) -> Jet:
        return self._cached(("phi-jet", float(p), order), lambda: self.model.phi_inverse(Jet.variable(p, order)))

    def _exp_phi_jet(self, p: float, x: np.ndarray, order: int) -> np.ndarray:
        """Taylor coefficients in ``eps`` of ``exp(Phi(p + eps) x)``, shape ``(order+1, len(x))``."""
        return (self._phi_jet(p, order) * x).exp().coeffs

    def phi_ell(self, ell: int, r: float, x):
        """``((-1)^ell / ell!) d^ell/dr^ell exp(Phi(r) x)``."""
        if int(ell) != ell or ell < 0:
            raise DomainError(f"ell must be a nonnegative integer, got {ell}")
        if ell > MAX_JET_ORDER:
            raise CapabilityError(f"phi_ell supports ell <= {MAX_JET_ORDER}, got {ell}")
        if not r > 0:
            raise DomainError(f"phi_ell needs r > 0, got {r}")
        _check_deficit(x)
        xs = _as_array(x)
        coef = self._exp_phi_jet(float(r), xs, int(ell))[int(ell)]
        return _shape_like((-1) ** int(ell) * coef, x)

    def _erlang_sum(self, p0: float, shape: int, rate: float, xs: np.ndarray) -> np.ndarray:
        """``sum_{l < shape} rate^l phi_l(p0, x)``."""
        if shape - 1 > MAX_JET_ORDER:
            raise CapabilityError(f"Erlang delay shapes above {MAX_JET_ORDER + 1} are not supported")
        coefs = self._exp_phi_jet(p0, xs, shape - 1)
        total = np.zeros(xs.size)
        for ell in range(shape):
            total += rate**ell * (-1) ** ell * coefs[ell]
        return total

    def _per_cell(self, xs: np.ndarray, fn) -> np.ndarray:
        """Apply ``fn(components, x_subset)`` cell by cell."""
        out = np.zeros(xs.size)
        idx = np.searchsorted(self.kernel.arrays.breakpoints, xs, side="left")
        for k, (_, _, comps) in enumerate(self.kernel.cells()):
            sel = idx == k
            if np.any(sel):
                out[sel] = fn(comps, xs[sel])
        return out

    # -- first deficit -----------------------------------------------------------
    def first_deficit_density(self, u: float, x, route: str | None = None):
        """Defective density ``h_u(x)`` of the first deficit below 0 from ``X_0 = u``.

        ``route="closed"`` (exponential claims only) uses the elementary form;
        otherwise ``W(0) Pi((-inf, x-u]) + int_0^u Pi((-inf, x+z-u]) W'(z) dz``.
        """
        if u < 0:
            raise DomainError(f"initial reserve must be nonnegative, got {u}")
        _check_deficit(x)
        xs = _as_array(x)
        m = self.model
        if route in (None, "auto", "closed") and self._exp_claims:
            a = m.claims.alpha
            out = (m.lam / m.c) * np.exp(a * xs - (a - m.lam / m.c) * u)
            return _shape_like(out, x)
        if route == "closed":
            raise CapabilityError("the elementary first-deficit density needs exponential claims")
        return _shape_like(self._h_general(float(u), xs), x)

    def _h_general(self, u: float, xs: np.ndarray) -> np.ndarray:
        m, ev = self.model, self.scale
        if isinstance(m.claims, Deterministic):
            s = u - xs - m.claims.size
            wu = ev.w_scale(u)
            inner = np.where(s <= 0, wu, wu - ev.w_scale(np.maximum(s, 0.0)))
            return m.lam * np.where(s > u, 0.0, inner)
        out = ev.w_scale(0.0) * m.levy_tail(xs - u)
        if u > 0:
            out = out + batched_integral(
                lambda z, i: m.levy_tail(xs[i] + z - u) * ev.wq_prime(0.0, z),
                np.zeros(xs.size),
                np.full(xs.size, u),
                self.quadrature,
                panels=max(2, int(math.ceil(u / m.claims.mean()))),
            )
        return out

    def _deficit_cutoff(self, scale_factor: float) -> float:
        """``X`` with ``scale_factor * lam * E(xi - X)^+`` below the truncation mass."""
        m = self.model
        target = self.quadrature.truncation_mass
        hi = m.claims.mean()
        while scale_factor * m.lam * float(m.claims.stop_loss(hi)) > target:
            hi *= 2.0
        return hi

    # -- K -----------------------------------------------------------------------
    def k_fn(self, x, route: str | None = None):
        """``K(x)``: probability that the delay granted at deficit ``x`` outlasts the excursion."""
        _check_deficit(x)
        route = self.resolve_route(route)
        xs = _as_array(x)
        if route == ROUTE_QUADRATURE:
            out = np.array([self._k_quadrature(float(v)) for v in xs])
        else:
            def cell(comps, sub):
                total = np.zeros(sub.size)
                for comp in comps:
                    if not comp.immediate:
                        total += comp.weight * self._erlang_sum(comp.rate, comp.shape, comp.rate, sub)
                return total

            out = self._per_cell(xs, cell)
        return _shape_like(out, x)

    def _k_quadrature(self, x: float) -> float:
        ev, m, ker = self.scale, self.model, self.kernel
        y = -x
        horizon = ev.upcross_horizon(y)
        if isinstance(m.claims, Deterministic):
            ts, masses = ev.upcross_atoms(y, horizon)
            return float(np.sum(masses * ker.tail(x, ts)))
        t0 = y / m.c
        points = (ker.delay,) if isinstance(ker, DeterministicDelay) else ()
        val, _ = integrate(
            lambda s: ker.tail(x, s) * ev.kendall_density(y, s),
            t0,
            horizon,
            self.quadrature.tighter(1e-2),
            points=points,
        )
        return float(ker.tail(x, t0)) * math.exp(-m.lam * t0) + val

    # -- H and the survival probability ---------------------------------------
    def h_fn(self, v, route: str | None = None):
        """``H(v) = int_{-inf}^0 K(x) h_v(x) dx``."""
        vs = _as_array(v)
        if np.any(vs < 0):
            raise DomainError("H(v) needs v >= 0")
        route = self.resolve_route(route)
        if route != ROUTE_QUADRATURE and self._exp_claims:
            m = self.model
            decay = m.claims.alpha - m.lam / m.c
            out = self._h0_exponential_claims() * np.exp(-decay * vs)
        else:
            out = np.array([self._h_quadrature(float(s), route) for s in vs])
        return _shape_like(out, v)

    def _h0_exponential_claims(self) -> float:
        """``H(0)`` for exponential claims: ``int_a^b e^{alpha x} phi_l(r, x) dx`` in closed form per cell."""
        def make():
            m = self.model
            alpha = m.claims.alpha
            total = 0.0
            for lo, hi, comps in self.kernel.cells():
                for comp in comps:
                    if comp.immediate:
                        continue
                    order = comp.shape - 1
                    if order > MAX_JET_ORDER:
                        raise CapabilityError(f"Erlang delay shapes above {MAX_JET_ORDER + 1} are not supported")
                    beta = self._phi_jet(comp.rate, order) + alpha
                    upper = (beta * hi).exp()
                    cell = upper if math.isinf(lo) else upper - (beta * lo).exp()
                    cell = cell / beta
                    for ell in range(comp.shape):
                        total += comp.weight * comp.rate**ell * (-1) ** ell * float(cell.coeffs[ell])
            return (m.lam / m.c) * total

        return self._cached(("H0-exp",), make)

    def _h_quadrature(self, v: float, route: str) -> float:
        def make():
            ev = self.scale
            cutoff = -self._deficit_cutoff(float(ev.w_scale(v)))
            points = [b for b in self.kernel.arrays.breakpoints if b > cutoff]
            h_route = "general" if route == ROUTE_QUADRATURE else None
            if isinstance(self.model.claims, Deterministic):
                d = self.model.claims.size
                points += [p for p in np.arange(v - d, cutoff, -d) if cutoff < p < 0]
                points.append(-d)
            val, _ = integrate(
                lambda x: self.k_fn(x, route) * self.first_deficit_density(v, x, h_route),
                cutoff,
                0.0,
                self.quadrature,
                points=points,
            )
            return val

        return self._cached(("H-quad", v, route), make)

    def survival_prob(self, u, route: str | None = None):
        """Probability that Parisian ruin never occurs from ``X_0 = u``."""
        us = _as_array(u)
        if np.any(us < 0):
            raise DomainError("initial reserve must be nonnegative")
        h0 = float(self.h_fn(0.0, route))
        if not h0 < 1.0:
            raise InternalConsistencyError(
                f"H(0) = {h0} >= 1, impossible since H(0) <= P_0(ruin) < 1; numerical failure"
            )
        ev = self.scale
        hu = np.asarray(self.h_fn(us, route))
        out = self.model.mean_x1() * (ev.w_scale(us) + ev.w_scale(0.0) * hu / (1.0 - h0))
        return _shape_like(np.asarray(out), u)

    def ruin_prob(self, u, route: str | None = None):
        """Parisian ruin probability ``1 - survival_prob(u)``."""
        return _shape_like(1.0 - _as_array(self.survival_prob(u, route)), u)

    def ruin_prob_cl(self, u):
        """Closed form for exponential claims (and piecewise delay kernels)."""
        if not self._exp_claims:
            raise CapabilityError("closed-form Parisian ruin needs exponential claims; use survival_prob")
        m = self.model
        a = m.claims.alpha
        h0 = float(self.h_fn(0.0))
        us = _as_array(u)
        if np.any(us < 0):
            raise DomainError("initial reserve must be nonnegative")
        bracket = 1.0 - (a * m.c - m.lam) * h0 / (m.lam * (1.0 - h0))
        out = (m.lam / (a * m.c)) * bracket * np.exp(-(a - m.lam / m.c) * us)
        return _shape_like(out, u)

    def classical_ruin(self, u):
        """``P_u(tau_0^- < inf) = 1 - E X_1 W(u)``; elementary for exponential claims."""
        us = _as_array(u)
        m = self.model
        if self._exp_claims:
            a = m.claims.alpha
            out = (m.lam / (a * m.c)) * np.exp(-(a - m.lam / m.c) * us)
        else:
            out = 1.0 - m.mean_x1() * np.asarray(self.scale.w_scale(us))
        return _shape_like(out, u)

    def default_b(self, eps: float = 1e-6) -> float:
        """Smallest ``b`` whose classical ruin probability is below ``eps``."""
        m = self.model
        if self._exp_claims:
            a = m.claims.alpha
            return max(0.0, math.log(m.lam / (a * m.c) / eps) / (a - m.lam / m.c))
        hi = 1.0
        while float(self.classical_ruin(hi)) >= eps:
            hi *= 2.0
        return optimize.brentq(lambda b: float(self.classical_ruin(b)) - eps, 0.0, hi, xtol=1e-10)

    # -- M_1 and M_2 ----------------------------------------------------------------
    def m2(self, v: float, x, route: str | None = None):
        """``M_2(v, x) = E(e^{-v tau}; tau <= eta)`` for an excursion from deficit ``x``."""
        if v < 0:
            raise DomainError(f"v must be nonnegative, got {v}")
        _check_deficit(x)
        route = self.resolve_route(route)
        xs = _as_array(x)
        if route == ROUTE_QUADRATURE:
            out = np.array([self._m_quadrature(2, float(v), 0.0, float(s)) for s in xs])
        else:
            def cell(comps, sub):
                total = np.zeros(sub.size)
                for comp in comps:
                    if not comp.immediate:
                        total += comp.weight * self._erlang_sum(v + comp.rate, comp.shape, comp.rate, sub)
                return total

            out = self._per_cell(xs, cell)
        return _shape_like(out, x)

    def m1(self, v: float, w: float, x, route: str | None = None):
        """``M_1(v, w, x) = E(e^{-v eta + w X_eta}; eta < tau)`` for an excursion from deficit ``x``."""
        if v < 0 or w < 0:
            raise DomainError(f"v and w must be nonnegative, got v={v}, w={w}")
        _check_deficit(x)
        route = self.resolve_route(route)
        xs = _as_array(x)
        if route == ROUTE_QUADRATURE:
            out = np.array([self._m_quadrature(1, float(v), float(w), float(s)) for s in xs])
        else:
            def cell(comps, sub):
                total = np.zeros(sub.size)
                for comp in comps:
                    if comp.immediate:
                        total += comp.weight * np.exp(w * sub)
                    else:
                        total += comp.weight * self._m1_erlang(float(v), float(w), comp.shape, comp.rate, sub)
                return total

            out = self._per_cell(xs, cell)
        return _shape_like(out, x)

    def _m1_erlang(self, v, w, shape, rate, xs):
        """One Erlang(shape, rate) delay component of ``M_1``.

        Equals ``rate^shape (-1)^(shape-1)`` times coefficient ``shape-1`` of the
        expansion of ``L(p) = (e^{wx} - e^{Phi(p) x}) / (p - psi(w))`` at
        ``p = v + rate``. ``L`` is analytic across ``p = psi(w)``; close to
        that point the expansion is re-centred there to avoid cancellation.
        """
        n = shape - 1
        if n > MAX_JET_ORDER:
            raise CapabilityError(f"Erlang delay shapes above {MAX_JET_ORDER + 1} are not supported")
        a = float(self.model.cumulant(w))
        p0 = v + rate
        delta = p0 - a
        if abs(delta) ** shape >= 1e-8:
            num = np.exp(w * xs) - Jet(self._exp_phi_jet(p0, xs, n))
            den = Jet.variable(p0, n) - a
            coef = (num / den).coeffs[n]
        else:
            extra = 40
            big = self._exp_phi_jet(a, xs, n + extra + 1)
            b = -big[1:]  # coefficients of L around psi(w)
            coef = np.zeros(xs.size)
            for k in range(n, b.shape[0]):
                coef = coef + b[k] * special.comb(k, n) * delta ** (k - n)
        return rate**shape * (-1) ** n * coef

    def _m_quadrature(self, which: int, v: float, w: float, x: float) -> float:
        """``M_1`` or ``M_2`` as Stieltjes integrals against the up-crossing law.

        With ``y = -x`` and ``tau`` the time to climb back to 0,
        ``M_2 = E(e^{-v tau} P(eta >= tau))``. For ``M_1``, optional stopping of
        ``exp(w X_t - psi(w) t)`` at ``tau`` gives
        ``E_x(e^{w X_t}; t < tau) = E(e^{-psi(w)(tau - t)}; tau > t)``, hence
        ``M_1 = E(psi_tilde(tau))`` with
        ``psi_tilde(s) = E(e^{-v eta - psi(w)(s - eta)}; eta < s)``.
        Both integrands stay in [0, 1].
        """
        ev, ker, m = self.scale, self.kernel, self.model
        y = -x
        a = float(m.cumulant(w))
        if isinstance(ker, DeterministicDelay):
            atoms, comps = ker.atoms(x), []
        else:
            atoms, comps = [], [c for c in ker.components(x) if c.weight > 0]

        def erlang_part(comp, s):
            # E(e^{-v eta - a(s - eta)}; eta < s) for one Erlang component
            n, r = comp.shape, comp.rate
            kappa = r + v - a
            if kappa > 1e-12 * r:
                log_scale = -a * s + n * math.log(r / kappa)
                return np.exp(log_scale) * special.gammainc(n, kappa * s)
            dens = lambda t, i: np.exp(  # noqa: E731
                n * math.log(r) + special.xlogy(n - 1, t) - special.gammaln(n) - r * t - v * t - a * (s[i] - t)
            )
            return batched_integral(dens, np.zeros(s.size), s, self.quadrature)

        def weight(s):
            s = np.atleast_1d(np.asarray(s, dtype=float))
            if which == 2:
                return np.exp(-v * s) * np.asarray(ker.tail_left(x, s), dtype=float)
            out = np.zeros(s.size)
            for loc, mass in atoms:
                hit = loc < s
                out[hit] += mass * np.exp(-v * loc - a * (s[hit] - loc))
            for comp in comps:
                if comp.immediate:
                    out += comp.weight * np.where(s > 0, np.exp(-a * s), 0.0)
                else:
                    out += comp.weight * erlang_part(comp, s)
            return out

        horizon = ev.upcross_horizon(y)
        if isinstance(m.claims, Deterministic):
            ts, masses = ev.upcross_atoms(y, horizon)
            return float(np.sum(masses * weight(ts)))
        t0 = y / m.c
        points = (ker.delay,) if isinstance(ker, DeterministicDelay) else ()
        val, _ = integrate(
            lambda s: weight(s) * ev.kendall_density(y, s),
            t0,
            horizon,
            self.quadrature.tighter(1e-2),
            points=points,
        )
        return float(weight(t0)[0]) * math.exp(-m.lam * t0) + val

    # -- Q_1, Q_2 and the joint transform -------------------------------------
    def _x_nodes(self):
        """Gauss-Legendre nodes on ``(-X, 0)`` with panel edges at kernel breakpoints."""
        def make():
            m = self.model
            cutoff = m.claims.mean()
            while m.lam * float(m.claims.survival(cutoff)) > self.quadrature.truncation_mass * 1e-2:
                cutoff *= 1.5
            step = 0.5 * m.claims.mean()
            cuts = sorted({-cutoff, 0.0} | {b for b in self.kernel.arrays.breakpoints if b > -cutoff})
            edges = [cuts[0]]
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                k = max(1, int(math.ceil((hi - lo) / step)))
                edges.extend(np.linspace(lo, hi, k + 1)[1:])
            return gauss_legendre_panels(edges, 20)

        return self._cached(("x-nodes",), make)

    def _m_values(self, which: int, v: float, w: float, xs: np.ndarray, route: str | None):
        if which == 1:
            return np.asarray(self.m1(v, w, xs, route))
        return np.asarray(self.m2(v, xs, route))

    def q_generic(self, u: float, v: float, b: float, m_fn) -> float:
        """``int_0^b w_u(y) int_{x<0} M(x) Pi(dx - y) dy`` for an arbitrary ``M``.

        ``m_fn`` maps an array of deficits to values of ``M``. With ``M = 1``
        and ``v = 0`` this is the two-sided exit probability ``P_u(tau_0^- < tau_b^+)``.
        """
        if not (0 <= u <= b):
            raise DomainError(f"need 0 <= u <= b, got u={u}, b={b}")
        if u == b:
            return 0.0
        ev, m = self.scale, self.model

        def weight(y):
            return np.asarray(ev.exit_weight(v, u, b, y))

        points = [u] if 0 < u < b else []
        if isinstance(m.claims, Deterministic):
            d = m.claims.size

            def jump_part(y):
                y = np.asarray(y, dtype=float)
                out = np.zeros(y.shape)
                live = y < d
                if np.any(live):
                    out[live] = m.lam * np.asarray(m_fn(y[live] - d))
                return out

            if d < b:
                points.append(d)
            points += [u - k * d for k in range(1, int(u / d) + 1) if 0 < u - k * d < b]
            points += [b - k * d for k in range(1, int(b / d) + 1) if 0 < b - k * d < b]
        else:
            xn, xw = self._x_nodes()
            mx = xw * np.asarray(m_fn(xn))

            def jump_part(y):
                y = np.asarray(y, dtype=float)
                dens = m.levy_density(xn[None, :] - y[:, None])
                return dens @ mx

        val, _ = integrate(lambda y: weight(y) * jump_part(y), 0.0, b, self.quadrature, points=points)
        return val

    def _q(self, which: int, u: float, v: float, w: float, b: float, route: str | None) -> float:
        if isinstance(self.model.claims, Deterministic):
            return self.q_generic(u, v, b, lambda xs: self._m_values(which, v, w, xs, route))
        key = ("M-nodes", which, v, w, self.resolve_route(route))
        xn, _ = self._x_nodes()
        vals = self._cached(key, lambda: self._m_values(which, v, w, xn, route))
        return self.q_generic(u, v, b, lambda xs: vals)

    def q1(self, u: float, v: float, w: float, b: float, route: str | None = None) -> float:
        """``Q_1(u, v, w)``: first excursion below 0 before ``b`` ends in ruin, transformed."""
        self._check_transform_args(u, v, w, b)
        return self._q(1, float(u), float(v), float(w), float(b), route)

    def q2(self, u: float, v: float, b: float, route: str | None = None) -> float:
        """``Q_2(u, v)``: first excursion below 0 before ``b`` recovers, transformed."""
        self._check_transform_args(u, v, 0.0, b)
        return self._q(2, float(u), float(v), 0.0, float(b), route)

    def joint_lt(self, u: float, v: float, w: float, b: float | None = None, route: str | None = None) -> float:
        """``E_u(e^{-v T + w X_T}; T < tau_b^+)`` with ``T`` the Parisian ruin time."""
        b = self.default_b() if b is None else float(b)
        self._check_transform_args(u, v, w, b)
        if u == b:
            return 0.0
        q2_0 = self.q2(0.0, v, b, route)
        if not q2_0 < 1.0:
            raise InternalConsistencyError(f"Q_2(0) = {q2_0} >= 1; the renewal series diverges")
        q1_u = self.q1(u, v, w, b, route)
        q1_0 = q1_u if u == 0 else self.q1(0.0, v, w, b, route)
        q2_u = q2_0 if u == 0 else self.q2(u, v, b, route)
        return q1_u + q1_0 * q2_u / (1.0 - q2_0)

    @staticmethod
    def _check_transform_args(u, v, w, b):
        if not b > 0:
            raise DomainError(f"b must be positive, got {b}")
        if not (0 <= u <= b):
            raise DomainError(f"need 0 <= u <= b, got u={u}, b={b}")
        if v < 0 or w < 0:
            raise DomainError(f"v and w must be nonnegative, got v={v}, w={w}")
