"""Euler-Maruyama paths of the branching SDE with absorption at 0 and at a cap.

One step reads

    X <- X + g0(X) dt + sqrt(g1(X)) dB + g2(X)**(1/alpha) dL

with every rate evaluated at the left endpoint.  For tabulated jump
measures the last term is replaced by the truncated compound-Poisson
increment with intensity ``g2(X) pi(dz)``.

Power-law rates with stable jumps run through a compiled kernel; any other
model runs through a plain Python loop that consumes the random stream in
the same order, so the two routes produce identical paths for power-law
models (tested).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .exceptions import NonFiniteStateError, ParameterError
from .model import BranchingModel, PowerLawRates, eval_rates
from .sampler import StableIncrementParams, _cms, truncated_increment

__all__ = [
    "Status", "SimConfig", "Path", "simulate_path", "simulate_until_exit", "simulate_coupled", "hitting_time",
]

CHUNK = 1024

_RUNNING, _EXTINCT, _EXPLODED, _NONFINITE = 0, 1, 2, 3


class Status(str, enum.Enum):
    EXTINCT = "ExtinctAt"
    EXPLODED = "ExplodedAt"
    CENSORED = "Censored"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_max: float = 1.0
    eps_zero: float = 1e-6
    cap_explosion: float = 1e9
    jump_delta: float = 1e-3
    record_stride: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.dt > 0 and self.t_max > 0 and math.isfinite(self.t_max)):
            raise ParameterError("dt and t_max must be positive and finite")
        if self.dt > self.t_max:
            raise ParameterError("dt must not exceed t_max")
        if not (0 < self.eps_zero < 1 < self.cap_explosion):
            raise ParameterError("need 0 < eps_zero < 1 < cap_explosion")
        if not self.jump_delta > 0:
            raise ParameterError("jump_delta must be > 0")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ParameterError("record_stride must be an integer >= 1")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ParameterError("seed must be an unsigned 64-bit integer")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_max / self.dt)))

    @property
    def step(self) -> float:
        """Effective step: ``t_max / n_steps`` so the grid lands on ``t_max``."""
        return self.t_max / self.n_steps

    def to_dict(self) -> dict:
        return {
            "dt": self.dt, "t_max": self.t_max, "eps_zero": self.eps_zero,
            "cap_explosion": self.cap_explosion, "jump_delta": self.jump_delta,
            "record_stride": self.record_stride, "seed": int(self.seed),
        }


@dataclass
class Path:
    """A recorded trajectory.

    ``steps`` holds the Euler step index of every record, so
    ``times = steps * dt``.  ``t_end`` is the absorption time for absorbed
    paths and the censoring time otherwise.
    """

    times: np.ndarray
    states: np.ndarray
    steps: np.ndarray
    status: Status
    t_end: float
    x0: float
    dt: float
    crossings: dict = field(default_factory=dict)

    @property
    def absorbed(self) -> bool:
        return self.status is not Status.CENSORED

    @property
    def absorption_time(self) -> float | None:
        return self.t_end if self.absorbed else None

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "absorption_time": self.absorption_time,
            "t_end": self.t_end,
            "x0": self.x0,
            "final_state": float(self.states[-1]),
            "crossings": {
                f"{lvl!r}:{d}": t for (lvl, d), t in sorted(self.crossings.items())
            },
        }


@numba.njit(cache=True, nogil=True)
def _euler_chunk(x, n, dt, sqdt, dt_a, b0, r0, b1, r1, b2, r2,
                 alpha, shift_b, scale, expo, use_gauss, use_jump,
                 z, v, w, eps, cap, out):
    """Advance ``n`` steps from ``x``; returns ``(steps_done, code)``.

    ``out[k]`` receives the state after step ``k+1``.  The first
    absorbing step stops the chunk.
    """
    inv_a = 1.0 / alpha
    for k in range(n):
        g0 = b0 * x ** r0
        dx = g0 * dt
        if use_gauss:
            dx += math.sqrt(b1 * x ** r1) * sqdt * z[k]
        if use_jump:
            dx += (b2 * x ** r2) ** inv_a * dt_a * _cms(v[k], w[k], alpha, shift_b, scale, expo)
        x = x + dx
        if not math.isfinite(x):
            out[k] = x
            return k + 1, 3
        if x < 0.0:
            # undershoot of the exact nonnegative process
            x = 0.0
        out[k] = x
        if x <= eps:
            return k + 1, 1
        if x >= cap:
            return k + 1, 2
    return n, 0


@numba.njit(cache=True, nogil=True)
def _euler_chunk_coupled(x, y, n, dt, sqdt, dt_a, b0, r0, b1, r1, b2, r2,
                         alpha, shift_b, scale, expo, use_gauss, use_jump,
                         z, v, w, eps, cap, out_x, out_y):
    """Two states driven by the same increments; stops at the first absorption."""
    inv_a = 1.0 / alpha
    for k in range(n):
        dl = 0.0
        if use_jump:
            dl = dt_a * _cms(v[k], w[k], alpha, shift_b, scale, expo)
        db = 0.0
        if use_gauss:
            db = sqdt * z[k]
        nx = x + b0 * x ** r0 * dt + math.sqrt(b1 * x ** r1) * db + (b2 * x ** r2) ** inv_a * dl
        ny = y + b0 * y ** r0 * dt + math.sqrt(b1 * y ** r1) * db + (b2 * y ** r2) ** inv_a * dl
        if not (math.isfinite(nx) and math.isfinite(ny)):
            out_x[k] = nx
            out_y[k] = ny
            return k + 1, 3, 0
        x = nx if nx > 0.0 else 0.0
        y = ny if ny > 0.0 else 0.0
        out_x[k] = x
        out_y[k] = y
        cx = 1 if x <= eps else (2 if x >= cap else 0)
        cy = 1 if y <= eps else (2 if y >= cap else 0)
        if cx != 0 or cy != 0:
            return k + 1, cx, cy
    return n, 0, 0


class _Noise:
    """Per-chunk draws in a fixed order: normals, then V, then W."""

    def __init__(self, rng: np.random.Generator, use_gauss: bool, use_jump: bool):
        self.rng = rng
        self.use_gauss = use_gauss
        self.use_jump = use_jump
        self._empty = np.zeros(0)

    def draw(self, n: int):
        rng = self.rng
        z = rng.standard_normal(n) if self.use_gauss else self._empty
        if self.use_jump:
            v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, n)
            w = rng.standard_exponential(n)
        else:
            v = w = self._empty
        return z, v, w


class _Recorder:
    """Collects strided records plus crossing and absorption events."""

    def __init__(self, x0: float, stride: int, levels):
        self.stride = stride
        self.levels = tuple(float(l) for l in levels)
        self.steps = [np.array([0], dtype=np.int64)]
        self.states = [np.array([x0])]
        self.crossings: dict = {}
        self._pending = {(l, d) for l in self.levels for d in ("down", "up")}
        for lvl in self.levels:
            if x0 < lvl:
                self._pending.discard((lvl, "down"))
                self.crossings[(lvl, "down")] = 0
            if x0 > lvl:
                self._pending.discard((lvl, "up"))
                self.crossings[(lvl, "up")] = 0

    def add(self, k0: int, block: np.ndarray, final: bool) -> None:
        """``block[j]`` is the state after step ``k0 + j + 1``."""
        idx = np.arange(k0 + 1, k0 + 1 + block.size, dtype=np.int64)
        keep = idx % self.stride == 0
        if final:
            keep[-1] = True
        for key in list(self._pending):
            lvl, d = key
            hit = block < lvl if d == "down" else block > lvl
            if hit.any():
                j = int(np.argmax(hit))
                keep[j] = True
                self.crossings[key] = int(idx[j])
                self._pending.discard(key)
        self.steps.append(idx[keep])
        self.states.append(block[keep])

    def build(self, status: Status, k_end: int, x0: float, dt: float) -> Path:
        steps = np.concatenate(self.steps)
        states = np.concatenate(self.states)
        crossings = {key: k * dt for key, k in self.crossings.items()}
        return Path(steps * dt, states, steps, status, k_end * dt, x0, dt, crossings)


_STATUS = {_EXTINCT: Status.EXTINCT, _EXPLODED: Status.EXPLODED, _RUNNING: Status.CENSORED}


def _initial_status(x0: float, config: SimConfig) -> Status | None:
    if x0 <= config.eps_zero:
        return Status.EXTINCT
    if x0 >= config.cap_explosion:
        return Status.EXPLODED
    return None


def _kernel_args(model: BranchingModel, config: SimConfig):
    r = model.rates
    sp = StableIncrementParams(model.alpha)
    h = config.step
    return (h, math.sqrt(h), h ** (1.0 / model.alpha), r.b0, r.r0, r.b1, r.r1, r.b2, r.r2,
            *sp.constants(), r.b1 > 0, r.b2 > 0)


def _noise_flags(model: BranchingModel) -> tuple[bool, bool]:
    if isinstance(model.rates, PowerLawRates):
        return model.rates.b1 > 0, model.rates.b2 > 0
    return True, True


def _check_x0(x0: float) -> float:
    x0 = float(x0)
    if not (x0 > 0 and math.isfinite(x0)):
        raise ParameterError("x0 must be positive and finite")
    return x0


def simulate_path(model: BranchingModel, x0: float, config: SimConfig, rng: np.random.Generator,
                  levels=(), compiled: bool | None = None) -> Path:
    """Simulate one path until absorption or ``t_max``.

    ``levels`` lists states whose first down- and up-crossings are always
    recorded, whatever ``record_stride`` is.  ``compiled=False`` forces the
    Python loop (power-law stable models default to the compiled kernel).
    """
    return simulate_until_exit(model, x0, config, rng, config.eps_zero, config.cap_explosion,
                               levels=levels, compiled=compiled)


def simulate_until_exit(model: BranchingModel, x0: float, config: SimConfig, rng: np.random.Generator,
                        lower: float, upper: float, levels=(), compiled: bool | None = None) -> Path:
    """Like :func:`simulate_path` but stopping at the first exit from ``(lower, upper)``.

    A stop at ``lower`` is reported as ``ExtinctAt`` and one at ``upper`` as
    ``ExplodedAt``; with the default thresholds these are the absorptions.
    """
    x0 = _check_x0(x0)
    if not 0 < lower < upper:
        raise ParameterError("need 0 < lower < upper")
    n_total = config.n_steps
    rec = _Recorder(x0, int(config.record_stride), levels)
    if x0 <= lower:
        return rec.build(Status.EXTINCT, 0, x0, config.step)
    if x0 >= upper:
        return rec.build(Status.EXPLODED, 0, x0, config.step)
    fast = model.is_power_law and model.is_stable
    if compiled is None:
        compiled = fast
    if compiled and not fast:
        raise ParameterError("compiled kernel needs power-law rates with stable jumps")
    use_gauss, use_jump = _noise_flags(model)
    noise = _Noise(rng, use_gauss, use_jump and model.is_stable)
    step = _compiled_chunk if compiled else _python_chunk

    x, k, code = x0, 0, _RUNNING
    buf = np.empty(CHUNK)
    while k < n_total and code == _RUNNING:
        n = min(CHUNK, n_total - k)
        done, code = step(model, config, x, n, noise, buf, lower, upper)
        block = buf[:done].copy()
        if code == _NONFINITE:
            raise NonFiniteStateError(f"non-finite state after step {k + done} (t = {(k + done) * config.step:g})")
        k_prev, k = k, k + done
        rec.add(k_prev, block, final=code != _RUNNING or k == n_total)
        x = float(block[-1])
    return rec.build(_STATUS[code], k, x0, config.step)


def _compiled_chunk(model, config, x, n, noise, buf, lower, upper):
    z, v, w = noise.draw(n)
    args = _kernel_args(model, config)
    h, sqh, ha, b0, r0, b1, r1, b2, r2, alpha, sb, sc, ex, ug, uj = args
    done, code = _euler_chunk(x, n, h, sqh, ha, b0, r0, b1, r1, b2, r2, alpha, sb, sc, ex,
                              ug, uj, z, v, w, lower, upper, buf)
    return int(done), int(code)


def _python_chunk(model, config, x, n, noise, buf, lower, upper):
    z, v, w = noise.draw(n)
    h = config.step
    sqh = math.sqrt(h)
    stable = model.is_stable
    if stable:
        alpha = model.alpha
        consts = StableIncrementParams(alpha).constants()
        ha = h ** (1.0 / alpha)
    for j in range(n):
        g0, g1, g2 = eval_rates(model, x)
        dx = g0 * h
        if noise.use_gauss:
            dx += math.sqrt(g1) * sqh * z[j]
        if stable:
            if noise.use_jump:
                dx += g2 ** (1.0 / alpha) * ha * _cms(v[j], w[j], *consts)
        elif g2 > 0:
            dx += truncated_increment(noise.rng, model.jumps, g2, h, config.jump_delta)
        x = x + dx
        if not math.isfinite(x):
            buf[j] = x
            return j + 1, _NONFINITE
        if x < 0.0:
            x = 0.0
        buf[j] = x
        if x <= lower:
            return j + 1, _EXTINCT
        if x >= upper:
            return j + 1, _EXPLODED
    return n, _RUNNING


def simulate_coupled(model: BranchingModel, x0: float, y0: float, config: SimConfig,
                     rng: np.random.Generator) -> tuple[Path, Path]:
    """Two paths from ``x0 <= y0`` driven by one noise realization.

    Both stop at the earlier absorption; the path that did not absorb is
    reported as censored at that time.  Every step is recorded.
    """
    x0, y0 = _check_x0(x0), _check_x0(y0)
    if x0 > y0:
        raise ParameterError("need x0 <= y0")
    if not (model.is_power_law and model.is_stable):
        raise ParameterError("coupled simulation needs power-law rates with stable jumps")
    r = model.rates
    if r.b2 > 0 and r.r2 < 0:
        raise ParameterError("comparison needs a non-decreasing gamma2")
    h = config.step
    n_total = config.n_steps
    ex, ey = _initial_status(x0, config), _initial_status(y0, config)
    if ex is not None or ey is not None:
        one = np.zeros(1, dtype=np.int64)
        px = Path(one * h, np.array([x0]), one, ex or Status.CENSORED, 0.0, x0, h)
        py = Path(one * h, np.array([y0]), one, ey or Status.CENSORED, 0.0, y0, h)
        return px, py
    use_gauss, use_jump = _noise_flags(model)
    noise = _Noise(rng, use_gauss, use_jump)
    args = _kernel_args(model, config)
    hh, sqh, ha, b0, r0, b1, r1, b2, r2, alpha, sb, sc, expo, ug, uj = args
    xs, ys = [np.array([x0])], [np.array([y0])]
    x, y, k = x0, y0, 0
    cx = cy = _RUNNING
    bx, by = np.empty(CHUNK), np.empty(CHUNK)
    while k < n_total and cx == _RUNNING and cy == _RUNNING:
        n = min(CHUNK, n_total - k)
        z, v, w = noise.draw(n)
        done, cx, cy = _euler_chunk_coupled(x, y, n, hh, sqh, ha, b0, r0, b1, r1, b2, r2, alpha, sb,
                                            sc, expo, ug, uj, z, v, w, config.eps_zero,
                                            config.cap_explosion, bx, by)
        if cx == _NONFINITE:
            raise NonFiniteStateError(f"non-finite state after step {k + done}")
        xs.append(bx[:done].copy())
        ys.append(by[:done].copy())
        k += done
        x, y = float(bx[done - 1]), float(by[done - 1])
    steps = np.arange(k + 1, dtype=np.int64)
    px = Path(steps * h, np.concatenate(xs), steps, _STATUS[int(cx)], k * h, x0, h)
    py = Path(steps * h, np.concatenate(ys), steps.copy(), _STATUS[int(cy)], k * h, y0, h)
    return px, py


def hitting_time(path: Path, level: float, direction: str) -> float | None:
    """First recorded time with state ``< level`` (down) or ``> level`` (up).

    An exploded path counts as exceeding every level up to its final state.
    """
    if not level > 0:
        raise ParameterError("level must be > 0")
    if direction not in ("down", "up"):
        raise ParameterError("direction must be 'down' or 'up'")
    key = (float(level), direction)
    if key in path.crossings:
        return path.crossings[key]
    s = path.states
    hit = s < level if direction == "down" else s > level
    if direction == "up" and path.status is Status.EXPLODED and s[-1] >= level:
        hit[-1] = True
    if not hit.any():
        return None
    return float(path.times[int(np.argmax(hit))])
