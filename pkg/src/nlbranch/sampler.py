"""Driving-noise increments: Gaussian, spectrally positive stable, truncated jumps.

Random streams are NumPy Philox generators keyed by ``(master_seed,
stream_index)`` through ``SeedSequence``; each Monte Carlo path owns one
stream, so results do not depend on how paths are split across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import ParameterError
from .model import StableJumpMeasure, TabulatedJumpMeasure

__all__ = [
    "RngStream",
    "StableIncrementParams",
    "make_rng",
    "gaussian_increment",
    "stable_increment",
    "stable_unit_from_uniforms",
    "truncated_jumps",
    "truncated_increment",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int

    def __post_init__(self) -> None:
        if not (0 <= self.master_seed <= _MASK64):
            raise ParameterError("master_seed must be an unsigned 64-bit integer")
        if self.stream_index < 0:
            raise ParameterError("stream_index must be >= 0")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(seq))


def make_rng(master_seed: int, stream_index: int = 0) -> np.random.Generator:
    return RngStream(int(master_seed), int(stream_index)).generator()


@dataclass(frozen=True)
class StableIncrementParams:
    """Constants of the Chambers-Mallows-Stuck map for skewness +1.

    ``scale_sigma = |cos(pi alpha / 2)|**(1/alpha)`` turns the standard
    totally skewed variable into one with ``E exp(-lam L_1) = exp(lam**alpha)``.
    """

    alpha: float

    def __post_init__(self) -> None:
        if not 1.0 < self.alpha < 2.0:
            raise ParameterError(f"alpha must lie in (1, 2), got {self.alpha}")

    @property
    def scale_sigma(self) -> float:
        return abs(math.cos(math.pi * self.alpha / 2.0)) ** (1.0 / self.alpha)

    @property
    def shift_b(self) -> float:
        return math.atan(math.tan(math.pi * self.alpha / 2.0)) / self.alpha

    @property
    def factor_s(self) -> float:
        t = math.tan(math.pi * self.alpha / 2.0)
        return (1.0 + t * t) ** (1.0 / (2.0 * self.alpha))

    def constants(self) -> tuple[float, float, float, float]:
        """``(alpha, B, S * sigma, (1-alpha)/alpha)`` as consumed by the kernels."""
        a = self.alpha
        return a, self.shift_b, self.factor_s * self.scale_sigma, (1.0 - a) / a


@numba.njit(cache=True, nogil=True)
def _cms(v, w, alpha, shift_b, scale, expo):
    # v ~ U(-pi/2, pi/2), w ~ Exp(1)
    av = alpha * (v + shift_b)
    return scale * math.sin(av) / math.cos(v) ** (1.0 / alpha) * (math.cos(v - av) / w) ** expo


@numba.njit(cache=True, nogil=True)
def _cms_array(v, w, alpha, shift_b, scale, expo, out):
    for i in range(v.shape[0]):
        out[i] = _cms(v[i], w[i], alpha, shift_b, scale, expo)


def stable_unit_from_uniforms(v, w, alpha: float) -> np.ndarray:
    """Map ``V ~ U(-pi/2, pi/2)``, ``W ~ Exp(1)`` to samples of ``L_1``."""
    v = np.ascontiguousarray(v, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    out = np.empty_like(v)
    _cms_array(v.ravel(), w.ravel(), *StableIncrementParams(alpha).constants(), out.ravel())
    return out


def gaussian_increment(rng: np.random.Generator, dt: float, size=None):
    """``N(0, dt)`` sample(s); ``dt = 0`` gives exact zeros."""
    if dt < 0:
        raise ParameterError("dt must be >= 0")
    return math.sqrt(dt) * rng.standard_normal(size)


def stable_increment(rng: np.random.Generator, alpha: float, dt: float, size=None):
    """Sample(s) of ``L_dt`` with ``E exp(-lam L_t) = exp(t lam**alpha)``.

    Uses self-similarity ``L_dt = dt**(1/alpha) L_1``.
    """
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    n = 1 if size is None else int(np.prod(size))
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, n)
    w = rng.standard_exponential(n)
    out = dt ** (1.0 / alpha) * stable_unit_from_uniforms(v, w, alpha)
    return float(out[0]) if size is None else out.reshape(size)


def _large_jump_moments(measure, delta: float) -> tuple[float, float, float]:
    if delta <= 0:
        raise ParameterError("delta must be > 0")
    mass = measure.tail_mass(delta)
    first = measure.first_moment_above(delta)
    if not (math.isfinite(mass) and math.isfinite(first)):
        raise ParameterError("jump measure lacks a finite first moment above delta")
    return mass, first, measure.second_moment_below(delta)


def truncated_jumps(
    rng: np.random.Generator,
    measure: TabulatedJumpMeasure | StableJumpMeasure,
    rate_scale: float,
    dt: float,
    delta: float,
) -> tuple[float, float, float]:
    """One step of the jump integral with jumps below ``delta`` moment-matched.

    Returns ``(jump_sum, compensation_drift, small_jump_variance)``: the sum
    of the compound Poisson jumps above ``delta``, their compensator
    ``-rate_scale dt int_delta^inf z pi(dz)``, and the variance of the
    Gaussian that stands in for the jumps below ``delta``.
    """
    if rate_scale < 0:
        raise ParameterError("rate_scale must be >= 0")
    if rate_scale == 0 or dt == 0:
        return 0.0, 0.0, 0.0
    mass, first, second = _large_jump_moments(measure, delta)
    count = rng.poisson(rate_scale * mass * dt)
    jump_sum = float(measure.sample_above(rng, delta, count).sum()) if count else 0.0
    return jump_sum, -rate_scale * dt * first, rate_scale * dt * second


def truncated_increment(rng, measure, rate_scale: float, dt: float, delta: float) -> float:
    """Jump increment over ``dt``: large jumps, compensator and Gaussian small jumps."""
    jump_sum, drift, var = truncated_jumps(rng, measure, rate_scale, dt, delta)
    if var == 0:
        return jump_sum + drift
    return jump_sum + drift + math.sqrt(var) * rng.standard_normal()
