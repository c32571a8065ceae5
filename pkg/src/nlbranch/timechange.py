"""Random time change of simulated paths by a positive weight ``gamma``.

The new clock is ``U_t = int_0^t gamma(X_s) ds`` and the transformed path
keeps the states but reads them at times ``U_{t_k}``.  The weighted total
population ``S`` is ``U`` evaluated at the absorption time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .exceptions import ParameterError
from .simulator import Path, Status

__all__ = [
    "WeightFunction",
    "WeightedPopulation",
    "weighted_population",
    "lamperti_transform",
    "realized_variance_rate",
]


@dataclass(frozen=True)
class WeightFunction:
    """A weight strictly positive on ``(0, inf)``, checked on every evaluation."""

    gamma: Callable

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        try:
            vals = np.asarray(self.gamma(x), dtype=float)
            if vals.shape != x.shape:
                raise ValueError
        except (TypeError, ValueError):
            vals = np.array([float(self.gamma(float(v))) for v in x.ravel()]).reshape(x.shape)
        # an absorbed path may sit at exactly 0, where e.g. x**p vanishes
        bad = np.where(x > 0, ~(vals > 0), vals < 0)
        if np.any(bad) or not np.all(np.isfinite(vals)):
            raise ParameterError("weight must be finite and strictly positive on the path")
        return vals

    @classmethod
    def constant(cls, c: float) -> "WeightFunction":
        if not c > 0:
            raise ParameterError("constant weight must be > 0")
        return cls(lambda x: np.full(np.shape(x), float(c)))

    @classmethod
    def power(cls, p: float, floor: float = 0.0) -> "WeightFunction":
        """``max(x, floor)**p``; a positive floor keeps the weight positive at 0."""
        return cls(lambda x: np.maximum(np.asarray(x, dtype=float), floor) ** p)


@dataclass(frozen=True)
class WeightedPopulation:
    value: float
    censored: bool  # True: value is only a lower bound


def _as_weight(weight) -> WeightFunction:
    return weight if isinstance(weight, WeightFunction) else WeightFunction(weight)


def _step_weights(path: Path, weight: WeightFunction) -> np.ndarray:
    """Per-interval weight: trapezoid, except left endpoint on an exploding step."""
    if path.states.size < 2:
        return np.zeros(0)
    if path.status is Status.EXPLODED:
        # the final state sits past the explosion cap; only its left value is meaningful
        g = weight(path.states[:-1])
        mid = 0.5 * (g[:-1] + g[1:])
        return np.append(mid, g[-1])
    g = weight(path.states)
    return 0.5 * (g[:-1] + g[1:])


def weighted_population(path: Path, weight) -> WeightedPopulation:
    """``S = int_0^T gamma(X_s) ds`` up to absorption (or censoring, flagged)."""
    w = _as_weight(weight)
    t, s = path.times, path.states
    if t.size < 2:
        return WeightedPopulation(0.0, censored=path.status is Status.CENSORED)
    if path.status is Status.EXPLODED:
        value = integrate.trapezoid(w(s[:-1]), t[:-1]) + float(w(s[-2:-1])[0]) * (t[-1] - t[-2])
    else:
        value = integrate.trapezoid(w(s), t)
    return WeightedPopulation(float(value), censored=path.status is Status.CENSORED)


def lamperti_transform(path: Path, weight) -> Path:
    """The path on the clock ``U``; states and status are unchanged."""
    w = _as_weight(weight)
    clock = np.concatenate(([0.0], np.cumsum(_step_weights(path, w) * np.diff(path.times))))
    crossings = {key: float(np.interp(t, path.times, clock)) for key, t in path.crossings.items()}
    return Path(
        times=clock,
        states=path.states.copy(),
        steps=path.steps.copy(),
        status=path.status,
        t_end=float(clock[-1]),
        x0=path.x0,
        dt=math.nan,  # the new clock has no uniform step
        crossings=crossings,
    )


def realized_variance_rate(path: Path) -> float:
    """``sum (dX)**2 / elapsed time`` over the recorded grid, absorbing step excluded."""
    s, t = path.states, path.times
    if path.absorbed:
        s, t = s[:-1], t[:-1]
    if s.size < 2 or t[-1] <= 0:
        raise ParameterError("path too short for a variance estimate")
    return float(np.sum(np.diff(s) ** 2) / (t[-1] - t[0]))
