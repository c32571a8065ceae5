"""Analytic functionals of a branching model.

``H_a(u)``  jump contribution ``int [(1+z/u)**(1-a) - 1 - (1-a) z/u] pi(dz)``
``G_a(u)``  ``(a-1) gamma0(u)/u - a(a-1)/2 gamma1(u)/u**2 - gamma2(u) H_a(u)``
``L g(y)``  generator of the SDE applied to a C^2 test function

For the stable measure ``H_a(u) = a(a-1) c_{alpha,a} u**(-alpha)`` where
``c_{alpha,a}`` is a double integral evaluated here by adaptive quadrature.
Everything else falls back on quadrature against the measure density.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .exceptions import ParameterError, QuadratureError
from .model import BranchingModel, PowerLawRates, StableJumpMeasure, eval_rates

__all__ = [
    "QuadratureConfig",
    "GaValue",
    "LyapunovCheck",
    "gamma",
    "c_alpha_a",
    "taylor_kernel",
    "h_a",
    "h_a_first_line",
    "h_a_second_line",
    "g_a",
    "ga_function",
    "generator_apply",
    "check_lyapunov",
    "phi",
]


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 500

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ParameterError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ParameterError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureConfig()
# Inner integrals feed outer ones; run them tighter so their error is invisible.
_INNER = QuadratureConfig(abs_tol=1e-14, rel_tol=1e-12, max_subdivisions=500)


def _quad(f, lo, hi, cfg: QuadratureConfig, **kwargs) -> float:
    out = integrate.quad(
        f, lo, hi, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions,
        full_output=1, **kwargs,
    )
    val, err = out[0], out[1]
    if len(out) > 3:
        # ier 1: subdivision limit, 3: bad integrand, 4: no convergence, 5: divergent
        budget = 1e3 * max(cfg.abs_tol, cfg.rel_tol * abs(val))
        if not math.isfinite(val) or err > budget:
            raise QuadratureError(f"quadrature failed on [{lo}, {hi}]: {out[3].strip()}")
    return val


def gamma(x: float) -> float:
    """Euler Gamma function (Lanczos-class implementation from libm)."""
    return math.gamma(x)


def _x_taylor_kernel(lx: float, a: float, cfg: QuadratureConfig) -> float:
    """``x * taylor_kernel(x, a)`` for ``x = exp(lx) > 1``; tends to ``1/a``."""
    inv = math.exp(-lx)
    near = _quad(lambda s: (1.0 + s) ** (-1.0 - a) * (1.0 - s * inv), 0.0, 1.0, cfg)
    far = _quad(
        lambda q: math.exp(-a * q) * (1.0 + math.exp(-q)) ** (-1.0 - a) * (1.0 - math.exp(q - lx)),
        0.0, lx, cfg,
    )
    return near + far


def taylor_kernel(x: float, a: float, cfg: QuadratureConfig = _INNER) -> float:
    """``int_0^1 (1 + x v)**(-1-a) (1 - v) dv`` for ``x >= 0``.

    For ``x > 1`` the integrand is concentrated on ``v < 1/x``; the integral
    is rewritten in ``s = x v`` and the range ``s > 1`` in ``log s``.
    """
    if x <= 1.0:
        return _quad(lambda v: (1.0 + x * v) ** (-1.0 - a) * (1.0 - v), 0.0, 1.0, cfg)
    return _x_taylor_kernel(math.log(x), a, cfg) / x


def _check_a(a: float) -> None:
    if not (a > 0 and a != 1.0 and math.isfinite(a)):
        raise ParameterError(f"need a > 0, a != 1; got {a}")


@functools.lru_cache(maxsize=4096)
def _c_alpha_a_cached(alpha: float, a: float, cfg: QuadratureConfig) -> float:
    const = alpha * (alpha - 1.0) / gamma(2.0 - alpha)
    # y in (0, 1]: algebraic weight y**(1-alpha) handled by QAWS.
    head = _quad(lambda y: taylor_kernel(y, a), 0.0, 1.0, cfg, weight="alg", wvar=(1.0 - alpha, 0.0))
    # y in (1, inf): y = e^x, integrand e^{(1-alpha)x} * y*K(y); y*K(y) -> 1/a.
    x_hi = min((40.0 + abs(math.log(a))) / (alpha - 1.0), 700.0)
    body = _quad(lambda x: math.exp((1.0 - alpha) * x) * _x_taylor_kernel(x, a, _INNER), 0.0, x_hi, cfg)
    tail = math.exp((1.0 - alpha) * x_hi) / (a * (alpha - 1.0))
    return const * (head + body + tail)


def c_alpha_a(alpha: float, a: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Stable-measure constant ``c_{alpha,a}`` by adaptive quadrature (cached)."""
    if not 1.0 < alpha < 2.0:
        raise ParameterError(f"alpha must lie in (1, 2), got {alpha}")
    if not (a > 0 and math.isfinite(a)):
        raise ParameterError(f"need a > 0, got {a}")
    return _c_alpha_a_cached(float(alpha), float(a), quad)


def _bracket(x: float, a: float) -> float:
    """``(1+x)**(1-a) - 1 - (1-a) x`` without cancellation for small x."""
    b = 1.0 - a
    if x < 1e-3:
        # binomial series up to x**5
        c2 = b * (b - 1.0) / 2.0
        c3 = c2 * (b - 2.0) / 3.0
        c4 = c3 * (b - 3.0) / 4.0
        c5 = c4 * (b - 4.0) / 5.0
        return x * x * (c2 + x * (c3 + x * (c4 + x * c5)))
    return math.expm1(b * math.log1p(x)) - b * x


def _jump_support(jumps) -> tuple[float, float]:
    if isinstance(jumps, StableJumpMeasure):
        return 0.0, math.inf
    return jumps.z_min, jumps.z_max


def _integrate_scaled(f: Callable[[float], float], u: float, jumps, lo_x: float, hi_x: float,
                      cfg: QuadratureConfig) -> float:
    """``int f(z/u) pi(dz)`` over ``z/u in [lo_x, hi_x]``.

    ``f`` must vanish like ``x**2`` at the origin when ``lo_x = 0``.
    """
    z_min, z_max = _jump_support(jumps)
    lo_x = max(lo_x, z_min / u)
    hi_x = min(hi_x, z_max / u)
    if lo_x >= hi_x:
        return 0.0

    if isinstance(jumps, StableJumpMeasure):
        alpha = jumps.alpha
        scale = jumps.constant * u ** (-alpha)
        total = 0.0
        if lo_x == 0.0:
            # f(x) x**(-1-alpha) = (f(x)/x**2) * x**(1-alpha): let QAWS take the singular weight
            head_hi = min(hi_x, 1.0)

            def reduced(x: float) -> float:
                x = max(x, 1e-150)
                return f(x) / (x * x)

            total += _quad(reduced, 0.0, head_hi, cfg, weight="alg", wvar=(1.0 - alpha, 0.0))
            lo_x = head_hi
        if lo_x < hi_x:
            s_hi = math.inf if math.isinf(hi_x) else math.log(hi_x)

            def body(s: float) -> float:
                if s > 700.0:
                    return 0.0
                return f(math.exp(s)) * math.exp(-alpha * s)

            total += _quad(body, math.log(lo_x), s_hi, cfg)
        return scale * total

    s_lo = -math.inf if lo_x <= 0 else math.log(lo_x)
    s_hi = math.inf if math.isinf(hi_x) else math.log(hi_x)
    density = jumps.density

    def integrand(s: float) -> float:
        if s > 700.0 or s < -700.0:
            return 0.0
        x = math.exp(s)
        with np.errstate(over="ignore"):
            w = float(density(u * x)) * u * x
        if not math.isfinite(w):
            return 0.0
        return f(x) * w

    if s_lo < 0.0 < s_hi:
        # split at z = u so each piece has a single decaying end
        return _quad(integrand, s_lo, 0.0, cfg) + _quad(integrand, 0.0, s_hi, cfg)
    return _quad(integrand, s_lo, s_hi, cfg)


def h_a_first_line(jumps, u: float, a: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``H_a(u)`` by direct quadrature of the compensated integrand."""
    _check_a(a)
    if u <= 0:
        raise ParameterError("u must be > 0")
    return _integrate_scaled(lambda x: _bracket(x, a), u, jumps, 0.0, math.inf, quad)


def _x2_taylor(x: float, a: float) -> float:
    if x <= 1.0:
        return x * x * taylor_kernel(x, a)
    return x * _x_taylor_kernel(math.log(x), a, _INNER)


def h_a_second_line(jumps, u: float, a: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """``H_a(u)`` through the Taylor-remainder double integral."""
    _check_a(a)
    if u <= 0:
        raise ParameterError("u must be > 0")
    return a * (a - 1.0) * _integrate_scaled(lambda x: _x2_taylor(x, a), u, jumps, 0.0, math.inf, quad)


def h_a(model: BranchingModel, u: float, a: float, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    _check_a(a)
    if not u > 0:
        raise ParameterError("u must be > 0")
    jumps = model.jumps
    if isinstance(jumps, StableJumpMeasure):
        return a * (a - 1.0) * c_alpha_a(jumps.alpha, a, quad) * u ** (-jumps.alpha)
    # Taylor form where z/u <= 1 (avoids cancellation), direct form beyond.
    near = a * (a - 1.0) * _integrate_scaled(lambda x: _x2_taylor(x, a), u, jumps, 0.0, 1.0, quad)
    far = _integrate_scaled(lambda x: _bracket(x, a), u, jumps, 1.0, math.inf, quad)
    return near + far


@dataclass(frozen=True)
class GaValue:
    u: float
    a: float
    value: float
    parts: tuple[float, float, float]  # (drift, diffusion, jump)


def g_a(model: BranchingModel, u: float, a: float, quad: QuadratureConfig = DEFAULT_QUAD) -> GaValue:
    _check_a(a)
    if not u > 0:
        raise ParameterError("u must be > 0")
    g0, g1, g2 = eval_rates(model, u)
    drift = (a - 1.0) * g0 / u
    diffusion = 0.5 * a * (a - 1.0) * g1 / (u * u)
    jump = g2 * h_a(model, u, a, quad) if g2 != 0 else 0.0
    return GaValue(u=u, a=a, value=drift - diffusion - jump, parts=(drift, diffusion, jump))


def ga_function(model: BranchingModel, a: float, quad: QuadratureConfig = DEFAULT_QUAD) -> Callable:
    """Vectorized ``u -> G_a(u)``; closed form for power-law rates with stable jumps."""
    _check_a(a)
    if model.is_power_law and model.is_stable:
        b0, r0, b1, r1, b2, r2 = model.rates.as_tuple()
        alpha = model.alpha
        kj = a * (a - 1.0) * c_alpha_a(alpha, a, quad) * b2

        def G(u):
            u = np.asarray(u, dtype=float)
            return (a - 1.0) * b0 * u ** (r0 - 1.0) - 0.5 * a * (a - 1.0) * b1 * u ** (r1 - 2.0) - kj * u ** (r2 - alpha)

        return G
    return np.vectorize(lambda u: g_a(model, float(u), a, quad).value, otypes=[float])


def generator_apply(
    model: BranchingModel,
    g: Callable[[float], float],
    g1: Callable[[float], float],
    g2: Callable[[float], float],
    y: float,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> float:
    """``L g(y)`` given ``g`` and its first two derivatives.

    The compensated jump integral uses the Taylor remainder
    ``z**2 int_0^1 g''(y + z v)(1 - v) dv`` for ``z <= y`` and the
    difference ``g(y+z) - g(y) - z g'(y)`` directly for ``z > y``.
    """
    if not y > 0:
        raise ParameterError("y must be > 0")
    r0, r1, r2 = eval_rates(model, y)
    gy, dgy = g(y), g1(y)
    out = r0 * dgy + 0.5 * r1 * g2(y)
    if r2 == 0:
        return out

    def remainder(x: float) -> float:
        z = x * y
        inner = _quad(lambda v: g2(y + z * v) * (1.0 - v), 0.0, 1.0, _INNER)
        return z * z * inner

    def direct(x: float) -> float:
        z = x * y
        return g(y + z) - gy - z * dgy

    jump = _integrate_scaled(remainder, y, model.jumps, 0.0, 1.0, quad)
    jump += _integrate_scaled(direct, y, model.jumps, 1.0, math.inf, quad)
    return out + r2 * jump


@dataclass(frozen=True)
class LyapunovCheck:
    holds: bool
    first_violation: float | None
    worst_margin: float


def check_lyapunov(
    model: BranchingModel,
    g: Callable[[float], float],
    g1: Callable[[float], float],
    g2: Callable[[float], float],
    interval: tuple[float, float],
    d: float,
    grid_n: int = 50,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> LyapunovCheck:
    """Grid probe of ``L g(y) >= d g(y)`` on ``interval`` (not a proof)."""
    lo, hi = map(float, interval)
    if not (0 <= lo < hi):
        raise ParameterError("need 0 <= a < b")
    if d <= 0:
        raise ParameterError("d must be > 0")
    if grid_n < 2:
        raise ParameterError("grid_n must be >= 2")
    ys = np.linspace(lo, hi, grid_n)
    if ys[0] <= 0:
        # the generator is only defined for y > 0
        ys[0] = ys[1] * 1e-3
    worst = math.inf
    first = None
    for y in ys:
        margin = generator_apply(model, g, g1, g2, float(y), quad) - d * g(float(y))
        worst = min(worst, margin)
        if margin < 0 and first is None:
            first = float(y)
    return LyapunovCheck(holds=first is None, first_violation=first, worst_margin=worst)


def phi(model: BranchingModel, a: float, b: float, grid_n: int = 2001) -> float:
    """``inf gamma1 + inf gamma2 * 1{int_0^1 z pi(dz) = inf}`` over ``[a, b]``."""
    if not (0 < a <= b):
        raise ParameterError("need 0 < a <= b")
    indicator = 1.0 if model.jumps.small_first_moment_infinite else 0.0
    rates = model.rates
    if isinstance(rates, PowerLawRates):
        # b_i x**r_i with b_i, r_i >= 0 is nondecreasing: infimum at the left end
        inf1 = rates.b1 * a ** rates.r1
        inf2 = rates.b2 * a ** rates.r2
    else:
        ys = np.linspace(a, b, grid_n)
        vals = np.array([rates(float(y)) for y in ys])
        inf1, inf2 = float(vals[:, 1].min()), float(vals[:, 2].min())
    return inf1 + inf2 * indicator
