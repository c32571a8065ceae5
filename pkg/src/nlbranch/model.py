"""Branching models: rate functions plus the jump (Levy) measure.

A model describes the SDE

    dX = gamma0(X) dt + sqrt(gamma1(X)) dB + (jumps driven by gamma2(X) * pi)

where ``pi`` is either the one-sided alpha-stable measure
``alpha (alpha - 1) / Gamma(2 - alpha) * z**(-1 - alpha) dz`` or a user
supplied density on ``(0, inf)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np
from scipy import integrate

from .exceptions import ConfigError, ParameterError

__all__ = [
    "PowerLawRates",
    "GeneralRates",
    "StableJumpMeasure",
    "TabulatedJumpMeasure",
    "BranchingModel",
    "make_power_law",
    "eval_rates",
    "model_to_dict",
    "model_from_dict",
    "POWER_LAW_KEYS",
]

POWER_LAW_KEYS = ("b0", "r0", "b1", "r1", "b2", "r2", "alpha")


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class PowerLawRates:
    """Rates ``gamma_i(x) = b_i * x**r_i``.

    At ``x = 0`` a zero exponent gives ``b_i`` (continuous extension) and a
    positive exponent gives 0.
    """

    b0: float
    r0: float
    b1: float
    r1: float
    b2: float
    r2: float

    def __post_init__(self) -> None:
        for name in ("b0", "r0", "b1", "r1", "b2", "r2"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))
        for name in ("r0", "r1", "r2"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.b1 < 0:
            raise ParameterError(f"b1 must be >= 0, got {self.b1}")
        if self.b2 < 0:
            raise ParameterError(f"b2 must be >= 0, got {self.b2}")
        if self.b1 + self.b2 <= 0:
            raise ParameterError("b1 + b2 must be > 0 (some noise is required)")

    def __call__(self, x: float) -> tuple[float, float, float]:
        # Python defines 0.0 ** 0 == 1.0, which is the continuous extension.
        return (
            self.b0 * x ** self.r0,
            self.b1 * x ** self.r1,
            self.b2 * x ** self.r2,
        )

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.b0, self.r0, self.b1, self.r1, self.b2, self.r2)


@dataclass(frozen=True)
class GeneralRates:
    """Caller supplied rate callables.

    Local Lipschitz continuity on ``(0, inf)`` is assumed, not checked.
    ``gamma1`` and ``gamma2`` must be nonnegative; this is verified at every
    evaluation.
    """

    gamma0: Callable[[float], float]
    gamma1: Callable[[float], float]
    gamma2: Callable[[float], float]

    def __call__(self, x: float) -> tuple[float, float, float]:
        g0 = float(self.gamma0(x))
        g1 = float(self.gamma1(x))
        g2 = float(self.gamma2(x))
        if g1 < 0 or g2 < 0:
            raise ParameterError(f"gamma1/gamma2 must be >= 0; got {g1}, {g2} at x={x}")
        return g0, g1, g2


@dataclass(frozen=True)
class StableJumpMeasure:
    """One-sided alpha-stable Levy measure, normalized so that the Laplace
    exponent of the compensated driver is exactly ``lambda**alpha``."""

    alpha: float

    def __post_init__(self) -> None:
        alpha = _finite("alpha", self.alpha)
        if not 1.0 < alpha < 2.0:
            raise ParameterError(f"alpha must lie in (1, 2), got {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def constant(self) -> float:
        a = self.alpha
        return a * (a - 1.0) / math.gamma(2.0 - a)

    def density(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(over="ignore"):
            out = np.where(z > 0, self.constant * np.power(np.where(z > 0, z, 1.0), -1.0 - self.alpha), 0.0)
        return float(out) if out.ndim == 0 else out

    def tail_mass(self, delta: float) -> float:
        return self.constant / self.alpha * delta ** (-self.alpha)

    def first_moment_above(self, delta: float) -> float:
        return self.constant / (self.alpha - 1.0) * delta ** (1.0 - self.alpha)

    def second_moment_below(self, delta: float) -> float:
        return self.constant / (2.0 - self.alpha) * delta ** (2.0 - self.alpha)

    @property
    def small_first_moment_infinite(self) -> bool:
        return True

    def sample_above(self, rng: np.random.Generator, delta: float, size: int) -> np.ndarray:
        # Pareto tail: P(Z > z | Z > delta) = (z / delta)**(-alpha)
        return delta * rng.random(size) ** (-1.0 / self.alpha)


def _log_quad(f: Callable[[float], float], lo: float, hi: float) -> float:
    """Integrate ``f`` over ``[lo, hi]`` in the variable ``s = log z``."""
    s_lo = -math.inf if lo <= 0 else math.log(lo)
    s_hi = math.inf if math.isinf(hi) else math.log(hi)
    if s_lo >= s_hi:
        return 0.0

    def g(s: float) -> float:
        if abs(s) > 700.0:
            return 0.0
        z = math.exp(s)
        try:
            with np.errstate(over="ignore"):
                v = f(z) * z
        except OverflowError:
            return 0.0
        return v if math.isfinite(v) else 0.0

    pieces = [(s_lo, 0.0), (0.0, s_hi)] if s_lo < 0.0 < s_hi else [(s_lo, s_hi)]
    total = 0.0
    for a, b in pieces:
        out = integrate.quad(g, a, b, limit=500, epsabs=1e-13, epsrel=1e-11, full_output=1)
        val, err = out[0], out[1]
        if len(out) > 3 and err > 1e-6 * max(1.0, abs(val)):
            # quadpack gave up with a large error estimate: treat as divergent
            return math.inf
        total += val
    return total


@dataclass(frozen=True, eq=False)
class TabulatedJumpMeasure:
    """A jump measure given by a density on ``(z_min, z_max)``.

    The integrability witnesses ``int_0^1 z^2 pi(dz)`` and
    ``int_1^inf z pi(dz)`` are computed by quadrature when not supplied.
    """

    density: Callable[[float], float]
    z_min: float = 0.0
    z_max: float = math.inf
    small_second_moment: float | None = None
    large_first_moment: float | None = None
    small_first_moment_finite: bool | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False)
    _lock: Any = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.z_min < 0 or not self.z_max > self.z_min:
            raise ParameterError("need 0 <= z_min < z_max")
        if self.small_second_moment is None:
            object.__setattr__(
                self, "small_second_moment", self._moment(2, 0.0, 1.0)
            )
        if self.large_first_moment is None:
            object.__setattr__(self, "large_first_moment", self._moment(1, 1.0, math.inf))
        for name in ("small_second_moment", "large_first_moment"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ParameterError(f"jump measure fails integrability: {name} = {v}")
        if self.small_first_moment_finite is None:
            object.__setattr__(self, "small_first_moment_finite", self._probe_small_first_moment())

    @classmethod
    def from_table(cls, z, values, **kwargs) -> "TabulatedJumpMeasure":
        """Density from samples, log-log interpolated; zero outside the table."""
        z = np.asarray(z, dtype=float)
        values = np.asarray(values, dtype=float)
        if z.ndim != 1 or z.shape != values.shape or np.any(np.diff(z) <= 0) or z[0] <= 0:
            raise ParameterError("table needs strictly increasing positive abscissae")
        if np.any(values <= 0):
            raise ParameterError("tabulated density values must be positive")
        lz, lv = np.log(z), np.log(values)

        def density(x):
            x = np.asarray(x, dtype=float)
            inside = (x >= z[0]) & (x <= z[-1])
            out = np.where(inside, np.exp(np.interp(np.log(np.where(x > 0, x, 1.0)), lz, lv)), 0.0)
            return float(out) if out.ndim == 0 else out

        kwargs.setdefault("z_min", float(z[0]))
        kwargs.setdefault("z_max", float(z[-1]))
        return cls(density=density, **kwargs)

    def _clip(self, lo: float, hi: float) -> tuple[float, float]:
        return max(lo, self.z_min), min(hi, self.z_max)

    def _moment(self, k: int, lo: float, hi: float) -> float:
        lo, hi = self._clip(lo, hi)
        return _log_quad(lambda z: z ** k * float(self.density(z)), lo, hi)

    def _probe_small_first_moment(self) -> bool:
        # int_eta^1 z pi(dz) for shrinking eta; growth signals divergence.
        i8 = self._moment(1, 1e-8, 1.0)
        i12 = self._moment(1, 1e-12, 1.0)
        return (i12 - i8) <= 1e-3 * max(1.0, i8)

    @property
    def small_first_moment_infinite(self) -> bool:
        return not self.small_first_moment_finite

    def _memo(self, key, compute):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        val = compute()
        with self._lock:
            self._cache[key] = val
        return val

    def tail_mass(self, delta: float) -> float:
        return self._memo(("mass", delta), lambda: self._moment(0, delta, math.inf))

    def first_moment_above(self, delta: float) -> float:
        val = self._memo(("first", delta), lambda: self._moment(1, delta, math.inf))
        if not math.isfinite(val):
            raise ParameterError("jump measure has no finite first moment above delta")
        return val

    def second_moment_below(self, delta: float) -> float:
        return self._memo(("second", delta), lambda: self._moment(2, 0.0, delta))

    def _sampling_table(self, delta: float) -> tuple[np.ndarray, np.ndarray]:
        with self._lock:
            table = self._cache.get(("table", delta))
        if table is not None:
            return table
        lo, hi = self._clip(delta, math.inf)
        if math.isinf(hi):
            total = self.tail_mass(lo)
            hi = max(10.0 * lo, 1.0)
            while hi < 1e15 and self._moment(0, hi, math.inf) > 1e-13 * total:
                hi *= 10.0
        s = np.linspace(math.log(lo), math.log(hi), 16385)
        zs = np.exp(s)
        try:
            dens = np.asarray(self.density(zs), dtype=float)
        except (TypeError, ValueError):
            dens = np.empty(0)
        if dens.shape != zs.shape:
            dens = np.array([float(self.density(v)) for v in zs])
        cum = integrate.cumulative_trapezoid(dens * zs, s, initial=0.0)
        table = (cum / cum[-1], s)
        with self._lock:
            self._cache[("table", delta)] = table
        return table

    def sample_above(self, rng: np.random.Generator, delta: float, size: int) -> np.ndarray:
        cdf, s = self._sampling_table(delta)
        return np.exp(np.interp(rng.random(size), cdf, s))


JumpMeasure = StableJumpMeasure | TabulatedJumpMeasure
Rates = PowerLawRates | GeneralRates


@dataclass(frozen=True)
class BranchingModel:
    rates: Rates
    jumps: JumpMeasure

    @property
    def alpha(self) -> float | None:
        return self.jumps.alpha if isinstance(self.jumps, StableJumpMeasure) else None

    @property
    def is_power_law(self) -> bool:
        return isinstance(self.rates, PowerLawRates)

    @property
    def is_stable(self) -> bool:
        return isinstance(self.jumps, StableJumpMeasure)


def make_power_law(
    b0: float, r0: float, b1: float, r1: float, b2: float, r2: float, alpha: float
) -> BranchingModel:
    """Validated model with ``gamma_i(x) = b_i x**r_i`` and stable jumps."""
    return BranchingModel(PowerLawRates(b0, r0, b1, r1, b2, r2), StableJumpMeasure(alpha))


def eval_rates(model: BranchingModel, x: float) -> tuple[float, float, float]:
    x = float(x)
    if not math.isfinite(x):
        raise ParameterError(f"state must be finite, got {x}")
    if x < 0:
        raise ParameterError(f"state must be >= 0, got {x}")
    return model.rates(x)


def model_to_dict(model: BranchingModel) -> dict[str, float]:
    if not (model.is_power_law and model.is_stable):
        raise ConfigError("only power-law rates with stable jumps are serializable")
    r = model.rates
    return {
        "b0": r.b0, "r0": r.r0, "b1": r.b1, "r1": r.r1,
        "b2": r.b2, "r2": r.r2, "alpha": model.jumps.alpha,
    }


def model_from_dict(data: Mapping[str, Any]) -> BranchingModel:
    if not isinstance(data, Mapping):
        raise ConfigError("model config must be a JSON object")
    unknown = set(data) - set(POWER_LAW_KEYS)
    if unknown:
        raise ConfigError(f"unknown model keys: {sorted(unknown)}")
    missing = [k for k in POWER_LAW_KEYS if k not in data]
    if missing:
        raise ConfigError(f"missing model keys: {missing}")
    values = {}
    for k in POWER_LAW_KEYS:
        v = data[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"model key {k!r} must be a number, got {v!r}")
        values[k] = float(v)
    return make_power_law(**values)
