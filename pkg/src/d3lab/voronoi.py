"""Mellin-Barnes kernel, smooth windows, and the dual-sum transform.

The kernel is

    U(X) = (1/2 pi i) int_{(c)} (Gamma(s/2)/Gamma((1-s)/2))^3 X^{-s} ds,
    0 < c < 1/6,

whose integrand decays only like |t|^{3(c-1/2)} on the vertical line but
oscillates with phase ~ 3t log(t/2) - t log X, stationary at
t* = 2 X^{1/3} (whence the sin/cos(6 X^{1/3}) behaviour).  The contour
used here runs up the line Re s = c to height T = 2e X^{1/3} (through
the stationary point), then turns onto the ray s = c + iT + (-1+i)u.
The integrand is analytic off the real axis, the swept sector is
pole-free, and on the ray the modulus decays at least like e^{-3u}, so
truncation is certified by the last evaluated magnitudes.

The window transform int_0^infty w(t) U(Nt) dt is evaluated on the same
contour after exchanging the absolutely convergent integrals:

    w_hat = (1/2 pi i) int_{(c)} G(s) N^{-s} W(s) ds,
    W(s) = int w(t) t^{-s} dt,

where W(s) splits into an exact plateau term and two short smooth ramp
integrals.  A direct t-space quadrature of w(t) U(Nt) is retained as an
oracle for moderate N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import loggamma

from .arith import ReducedFraction
from .laurent import LaurentExpansion
from .mainterm import mainterm_expsum, restricted_series_laurent

__all__ = [
    "KernelQuadrature",
    "QuadratureError",
    "SmoothWindow",
    "dual_sum_eval",
    "gamma_ratio_cubed",
    "kernel_U",
    "smoothed_delta_direct",
    "w_transform",
    "w_transform_direct",
]


class QuadratureError(ArithmeticError):
    """Requested tolerance was not reached; carries the achieved estimate."""


@dataclass(frozen=True)
class KernelQuadrature:
    """Contour parameters: abscissa c in (0, 1/6), turn height scale, tolerances."""

    c: float = 0.10
    rtol: float = 1e-9
    nodes_per_osc: float = 8.0
    t_floor: float = 40.0
    u_max: float = 14.0
    max_refinements: int = 3

    def __post_init__(self):
        if not 0.0 < self.c < 1.0 / 6.0:
            raise ValueError("abscissa must lie strictly inside (0, 1/6)")

    def tail_bound(self, last_magnitude: float) -> float:
        """Certified remainder beyond the truncated ray: the integrand
        decays at least like e^{-3u} there, so the tail is bounded by
        the last magnitude / 3."""
        return last_magnitude / 3.0


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gamma_ratio_cubed(s: complex | np.ndarray) -> complex | np.ndarray:
    """(Gamma(s/2) / Gamma((1-s)/2))^3 via complex log-gamma.

    Scalar calls closer than 1e-8 to a pole s in {0, -2, -4, ...} are
    rejected.
    """
    if np.isscalar(s) or isinstance(s, complex):
        sc = complex(s)
        nearest = -2.0 * max(0, round(-sc.real / 2.0))
        if abs(sc - nearest) < 1e-8:
            raise ValueError(f"s = {sc} is within 1e-8 of a pole of Gamma(s/2)")
        return complex(np.exp(3.0 * (loggamma(sc / 2.0) - loggamma((1.0 - sc) / 2.0))))
    return np.exp(3.0 * (loggamma(s / 2.0) - loggamma((1.0 - s) / 2.0)))


def _vertical_panels(T: float, rate_fn, nodes_per_osc: float, order: int = 16):
    """Panel edges on [0, T] sized so each panel spans a bounded phase."""
    edges = [0.0]
    t = 0.0
    max_phase = 2.0 * math.pi * order / nodes_per_osc
    while t < T:
        width = max_phase / max(rate_fn(t), 1e-3)
        t = min(T, t + max(width, T * 1e-6))
        edges.append(t)
    return np.array(edges)


def _contour_nodes(c: float, T: float, rate_fn, quad: KernelQuadrature, density: float):
    """Gauss-Legendre nodes and complex ds-weights for the contour.

    Vertical part: s = c + it, t in [0, T], ds = i dt.
    Diagonal part: s = c + iT + (-1 + i)u, u in [0, u_max], ds = (-1+i) du.
    """
    order = 16
    xg, wg = _leggauss(order)
    npo = quad.nodes_per_osc * density
    edges = _vertical_panels(T, rate_fn, npo)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t_nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    t_weights = (half[:, None] * wg[None, :]).ravel()
    s_vert = c + 1j * t_nodes
    w_vert = 1j * t_weights

    n_diag = max(24, int(8 * quad.u_max * density))
    xe = np.linspace(0.0, quad.u_max, n_diag + 1)
    midu = 0.5 * (xe[1:] + xe[:-1])
    halfu = 0.5 * (xe[1:] - xe[:-1])
    u_nodes = (midu[:, None] + halfu[:, None] * xg[None, :]).ravel()
    u_weights = (halfu[:, None] * wg[None, :]).ravel()
    s_diag = c + 1j * T + (-1.0 + 1j) * u_nodes
    w_diag = (-1.0 + 1j) * u_weights
    return np.concatenate([s_vert, s_diag]), np.concatenate([w_vert, w_diag])


def _upper_half_integral(c, T, rate_fn, integrand_fn, quad: KernelQuadrature):
    """Im(int_upper F ds)/pi with refinement-based error control.

    The full line integral is 2i Im of the upper path by conjugate
    symmetry of the integrand, so the result is Im(W)/pi; the error
    estimate is the change under a 1.4x node-density refinement.
    """
    prev = None
    density = 1.0
    for _ in range(quad.max_refinements + 1):
        s, w = _contour_nodes(c, T, rate_fn, quad, density)
        vals = integrand_fn(s)
        total = np.sum(w * vals)
        tail = quad.tail_bound(float(np.abs(vals[-16:]).max(initial=0.0)))
        result = total.imag / math.pi
        if prev is not None:
            err = abs(result - prev) + tail
            if err <= quad.rtol * max(abs(result), 1e-300) + 1e-15:
                return result, err
        prev = result
        density *= 1.4
    err = abs(result - prev) + tail if prev is not None else math.inf
    if err > 100 * (quad.rtol * max(abs(result), 1e-300) + 1e-15):
        raise QuadratureError(f"tolerance {quad.rtol} not reached; estimate {err:g}")
    return result, err


def kernel_U(X: float, quad: KernelQuadrature = KernelQuadrature()) -> float:
    """U(X) by contour quadrature; real by conjugate symmetry."""
    if X <= 0:
        raise ValueError("X must be positive")
    logX = math.log(X)
    T = max(quad.t_floor, 2.0 * math.e * X ** (1.0 / 3.0))
    c = quad.c

    def rate(t: float) -> float:
        # 3/|s| resolves the spike of the cubed s = 0 pole next to the line
        return abs(3.0 * math.log(max(t, 2.0) / 2.0) - logX) + 1.0 + 3.0 / math.hypot(c, t)

    def integrand(s: np.ndarray) -> np.ndarray:
        return gamma_ratio_cubed(s) * np.exp(-s * logX)

    value, _ = _upper_half_integral(quad.c, T, rate, integrand, quad)
    return value


# ---------------------------------------------------------------------------
# smooth window with exact derivative jets
# ---------------------------------------------------------------------------

_JET_ORDER = 4


def _jet_var(v: float) -> np.ndarray:
    out = np.zeros(_JET_ORDER + 1)
    out[0] = v
    out[1] = 1.0
    return out


def _jet_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros(_JET_ORDER + 1)
    for n in range(_JET_ORDER + 1):
        out[n] = sum(a[i] * b[n - i] for i in range(n + 1))
    return out


def _jet_recip(a: np.ndarray) -> np.ndarray:
    out = np.zeros(_JET_ORDER + 1)
    out[0] = 1.0 / a[0]
    for n in range(1, _JET_ORDER + 1):
        out[n] = -sum(a[i] * out[n - i] for i in range(1, n + 1)) / a[0]
    return out


def _jet_exp(a: np.ndarray) -> np.ndarray:
    out = np.zeros(_JET_ORDER + 1)
    out[0] = math.exp(a[0])
    for n in range(1, _JET_ORDER + 1):
        out[n] = sum(i * a[i] * out[n - i] for i in range(1, n + 1)) / n
    return out


def _ramp_jet(v: float) -> np.ndarray:
    """Taylor jet of r(v) = f(v)/(f(v)+f(1-v)), f(v) = exp(-1/v)."""
    if v <= 0.0:
        return np.zeros(_JET_ORDER + 1)
    if v >= 1.0:
        out = np.zeros(_JET_ORDER + 1)
        out[0] = 1.0
        return out
    jv = _jet_var(v)
    one_minus = -jv.copy()
    one_minus[0] += 1.0
    f1 = _jet_exp(-_jet_recip(jv))
    f2 = _jet_exp(-_jet_recip(one_minus))
    return _jet_mul(f1, _jet_recip(f1 + f2))


def _ramp_value(v: np.ndarray) -> np.ndarray:
    """Vectorized r(v); exp underflow past the cut points is exact 0/1."""
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    out[v >= 1.0] = 1.0
    inside = (v > 0.0) & (v < 1.0)
    vi = v[inside]
    with np.errstate(over="ignore"):
        f1 = np.exp(-1.0 / vi)
        f2 = np.exp(-1.0 / (1.0 - vi))
    out[inside] = f1 / (f1 + f2)
    return out


@lru_cache(maxsize=8)
def _ramp_derivative_bound(j: int, samples: int = 8001) -> float:
    """max_v |r^(j)(v)| by dense sampling; static scale constants C_j.

    Inflated 1% to certify values between sample points.
    """
    vs = np.linspace(0.0, 1.0, samples)
    fac = math.factorial(j)
    return 1.01 * float(max(abs(_ramp_jet(v)[j]) * fac for v in vs))


@dataclass(frozen=True)
class SmoothWindow:
    """C-infinity cutoff: 0 on [0,Y], 1 on [2Y, x-Y], 0 on [x, inf).

    Ramps are the standard exp(-1/u) partition-of-unity quotient, so the
    knot values are exact and every derivative scales like Y^{-j}.
    """

    x: float
    Y: float

    def __post_init__(self):
        if self.Y < 1.0 or 3.0 * self.Y > self.x:
            raise ValueError("window geometry requires 1 <= Y and 3Y <= x")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        plateau = (t >= 2.0 * self.Y) & (t <= self.x - self.Y)
        out[plateau] = 1.0
        up = (t > self.Y) & (t < 2.0 * self.Y)
        out[up] = _ramp_value((t[up] - self.Y) / self.Y)
        down = (t > self.x - self.Y) & (t < self.x)
        out[down] = _ramp_value((self.x - t[down]) / self.Y)
        return out if out.ndim else float(out)

    def derivative(self, t: float, j: int) -> float:
        """w^(j)(t) for 0 <= j <= 4, exact to roundoff via Taylor jets."""
        if not 0 <= j <= _JET_ORDER:
            raise ValueError(f"derivatives supported to order {_JET_ORDER}")
        if j == 0:
            return float(self(t))
        fac = math.factorial(j)
        if self.Y < t < 2.0 * self.Y:
            return _ramp_jet((t - self.Y) / self.Y)[j] * fac / self.Y**j
        if self.x - self.Y < t < self.x:
            return _ramp_jet((self.x - t) / self.Y)[j] * fac * (-1.0 / self.Y) ** j
        return 0.0

    def derivative_bound(self, j: int) -> float:
        """Certified |w^(j)| <= C_j / Y^j with sampled C_j."""
        if j == 0:
            return 1.0
        return _ramp_derivative_bound(j) / self.Y**j

    # -- integral transforms ------------------------------------------------

    def mellin(self, s: np.ndarray, nodes_hint: float = 0.0) -> np.ndarray:
        """W(s) = int w(t) t^{-s} dt, vectorized over s.

        Exact plateau antiderivative plus Gauss-Legendre ramps; the ramp
        node counts resolve oscillation up to |Im s| = nodes_hint.
        """
        s = np.atleast_1d(s)
        one_minus_s = 1.0 - s
        plateau = ((self.x - self.Y) ** one_minus_s - (2.0 * self.Y) ** one_minus_s) / one_minus_s
        tmax = float(nodes_hint) if nodes_hint else float(np.max(np.abs(s.imag)))
        out = plateau.astype(np.complex128)
        for lo, hi in ((self.Y, 2.0 * self.Y), (self.x - self.Y, self.x)):
            osc = tmax * abs(math.log(hi / lo)) / (2.0 * math.pi)
            n = int(min(1 << 14, max(48, 10 * osc)))
            xg, wg = _leggauss(n)
            tn = 0.5 * (hi + lo) + 0.5 * (hi - lo) * xg
            wn = 0.5 * (hi - lo) * wg * self(tn)
            logt = np.log(tn)
            # chunk the (s, t) outer product to bound memory
            chunk = max(1, (1 << 22) // n)
            for i in range(0, len(s), chunk):
                out[i : i + chunk] += np.exp(-np.outer(s[i : i + chunk], logt)) @ wn
        return out

    def log_moments(self, j_max: int = 3) -> list[float]:
        """m_j = int w(t) log^j t dt for j = 0..j_max.

        Plateau part via the exact antiderivative of log^j, ramps by
        64-point Gauss-Legendre (smooth, non-oscillatory).
        """

        def antideriv(j: int, t: float) -> float:
            # int log^j t dt = t * sum_{i<=j} (-1)^(j-i) j!/i! log^i t
            return t * math.fsum(
                (-1.0) ** (j - i) * math.factorial(j) / math.factorial(i) * math.log(t) ** i
                for i in range(j + 1)
            )

        xg, wg = _leggauss(64)
        out = []
        for j in range(j_max + 1):
            val = antideriv(j, self.x - self.Y) - antideriv(j, 2.0 * self.Y)
            for lo, hi in ((self.Y, 2.0 * self.Y), (self.x - self.Y, self.x)):
                tn = 0.5 * (hi + lo) + 0.5 * (hi - lo) * xg
                val += float(np.sum(0.5 * (hi - lo) * wg * self(tn) * np.log(tn) ** j))
            out.append(val)
        return out


def smooth_window(x: float, Y: float) -> SmoothWindow:
    return SmoothWindow(x=float(x), Y=float(Y))


# ---------------------------------------------------------------------------
# the transform w_hat_q(n) and the dual sum
# ---------------------------------------------------------------------------


@lru_cache(maxsize=200_000)
def w_transform(
    q: int, n: int, window: SmoothWindow, quad: KernelQuadrature = KernelQuadrature()
) -> float:
    """w_hat_q(n) = int w(t) U(N t) dt with N = pi^3 n / q^3.

    Evaluated as the contour integral of G(s) N^{-s} W(s): identical to
    quadrature of w(t) U(Nt) sampled at Gauss nodes after the two
    absolutely convergent integrals are exchanged, but every s-node's
    t-integral is the exact plateau term plus short ramp quadratures.
    Values are cached per (q, n, window, quad).
    """
    if n < 1 or q < 1:
        raise ValueError("need n >= 1 and q >= 1")
    N = math.pi**3 * n / q**3
    logN = math.log(N)
    T = max(quad.t_floor, 2.0 * math.e * (N * window.x) ** (1.0 / 3.0))
    log_lo, log_hi = math.log(N * window.Y), math.log(N * window.x)
    c = quad.c

    def rate(t: float) -> float:
        g = 3.0 * math.log(max(t, 2.0) / 2.0)
        return max(abs(g - log_lo), abs(g - log_hi)) + 1.0 + 3.0 / math.hypot(c, t)

    hint = T + quad.u_max * 1.05

    def integrand(s: np.ndarray) -> np.ndarray:
        return gamma_ratio_cubed(s) * np.exp(-s * logN) * window.mellin(s, nodes_hint=hint)

    value, _ = _upper_half_integral(quad.c, T, rate, integrand, quad)
    return value


def w_transform_direct(
    q: int,
    n: int,
    window: SmoothWindow,
    quad: KernelQuadrature = KernelQuadrature(),
    nodes_per_osc: float = 10.0,
) -> float:
    """Oracle: direct t-space quadrature of w(t) U(Nt), panels sized to
    the kernel oscillation 6 (Nt)^{1/3}.  Cost grows like (N x)^{1/3}
    kernel evaluations; intended for moderate N cross-checks only."""
    N = math.pi**3 * n / q**3
    xg, wg = _leggauss(16)
    total = 0.0
    t = window.Y
    while t < window.x:
        theta_rate = 2.0 * N ** (1.0 / 3.0) * t ** (-2.0 / 3.0)
        width = min(
            (2.0 * math.pi / max(theta_rate, 1e-12)) * 16.0 / nodes_per_osc,
            (window.x - window.Y) / 8.0,
        )
        hi = min(window.x, t + width)
        tn = 0.5 * (hi + t) + 0.5 * (hi - t) * xg
        vals = np.array([kernel_U(N * tv, quad) for tv in tn])
        total += float(np.sum(0.5 * (hi - t) * wg * window(tn) * vals))
        t = hi
    return total


def smoothed_delta_direct(
    point: ReducedFraction, window: SmoothWindow, table
) -> complex:
    """Window-smoothed exponential-sum error at a reduced point h/q:

    sum_n d_3(n) e(nh/q) w(n) minus the smoothed main term, where the
    main term pairs the Mellin moments of w (Laurent-expanded around
    s = 1) with the same Moebius-weighted polar data used by
    mainterm_expsum.
    """
    h, q = point.h, point.q
    xmax = int(window.x)
    if table.limit < xmax:
        raise ValueError("divisor table too short for the window support")
    n = np.arange(1, xmax + 1)
    wn = window(n.astype(float))
    weighted = table.values[1 : xmax + 1] * wn
    residues = np.bincount(n % q, weights=weighted, minlength=q)
    phases = np.exp(2j * np.pi * h * np.arange(q) / q)
    sum_part = complex(np.dot(residues, phases))

    m = window.log_moments(3)
    mellin_exp = LaurentExpansion(0, tuple(m[j] / math.factorial(j) for j in range(4)))
    from .arith import divisors, euler_phi, mobius

    main = 0.0
    for delta in divisors(q):
        D = restricted_series_laurent(q, delta, 3)
        main += mobius(q // delta) / euler_phi(q // delta) * (D * mellin_exp).residue()
    return sum_part - main


def dual_sum_eval(
    point: ReducedFraction,
    window: SmoothWindow,
    n_max: int | None = None,
    quad: KernelQuadrature = KernelQuadrature(),
    *,
    q_guard: int = 20,
) -> tuple[complex, float]:
    """Leading dual-sum term (pi^{3/2}/q^3) sum_{n <= n_max} A_{h/q}(n) w_hat_q(n).

    n_max defaults to the decay cutoff (x^2 q^3 / Y^3)^{1.1}.  Returns
    (value, tail_estimate) where the tail estimate is the magnitude of
    the last quarter of the range; the transform decays superpolynomially
    past the cutoff, so this dominates the true remainder.  The similar
    dual terms of the underlying summation formula are not synthesized:
    callers compare magnitudes only.
    """
    from .expsum import GuardError, a_sum

    q = point.q
    if q > q_guard:
        raise GuardError(f"q={q} exceeds dual-sum guard {q_guard}")
    if n_max is None:
        cutoff = (window.x**2 * q**3 / window.Y**3) ** 1.1
        n_max = max(8, math.ceil(cutoff))
    pref = math.pi ** 1.5 / q**3
    total = 0j
    tail = 0.0
    for n in range(1, n_max + 1):
        term = a_sum(point, n) * w_transform(q, n, window, quad)
        total += term
        if n > 0.75 * n_max:
            tail += abs(term)
    return pref * total, pref * tail
