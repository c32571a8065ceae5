"""Monte Carlo estimation and the classical-CSBP oracles it is checked against.

Every path ``i`` of an experiment draws from its own stream
``(seed, stream_offset + i)``.  Paths are farmed out to threads in
contiguous index blocks and results are put back in index order before
any reduction, so estimates are bit-identical for any worker count.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .analytics import DEFAULT_QUAD, QuadratureConfig, ga_function
from .exceptions import NumericalError, ParameterError
from .model import BranchingModel, make_power_law
from .sampler import make_rng
from .simulator import SimConfig, Status, simulate_path, simulate_until_exit

__all__ = [
    "Estimate",
    "PsiSpec",
    "solve_ut",
    "feller_ut",
    "stable_ut",
    "run_paths",
    "ExtinctBy",
    "ExplodedBy",
    "HitsBelow",
    "HitsAbove",
    "estimate_event_prob",
    "explosion_report",
    "MartingaleReport",
    "martingale_drift_test",
    "CdiRow",
    "cdi_probe",
    "cdi_consistency",
    "BranchingCheck",
    "branching_property_test",
]


# ---------------------------------------------------------------- estimates

@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError("an estimate needs n >= 1")
        if not self.stderr >= 0:
            raise ParameterError("stderr must be >= 0")

    @property
    def ci95(self) -> tuple[float, float]:
        half = 1.96 * self.stderr
        return self.mean - half, self.mean + half

    @classmethod
    def from_samples(cls, values) -> "Estimate":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            raise ParameterError("no samples")
        se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return cls(float(v.mean()), se, int(v.size))

    @classmethod
    def from_bernoulli(cls, hits: int, n: int) -> "Estimate":
        p = hits / n
        return cls(p, math.sqrt(p * (1.0 - p) / n), int(n))

    def to_dict(self) -> dict:
        lo, hi = self.ci95
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "ci95": [lo, hi]}


# ------------------------------------------------------------------ oracles

@dataclass(frozen=True)
class PsiSpec:
    """``psi(lam) = drift lam + sigma2/2 lam**2 + jump lam**alpha``.

    For linear rates ``gamma_i(x) = c_i x`` the branching mechanism is
    ``drift = -c0``, ``sigma2 = c1``, ``jump = c2``.
    """

    drift: float = 0.0
    sigma2: float = 0.0
    jump: float = 0.0
    alpha: float = 1.5
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.sigma2 < 0 or self.jump < 0:
            raise ParameterError("sigma2 and jump must be >= 0")
        if self.jump > 0 and not 1.0 < self.alpha < 2.0:
            raise ParameterError("alpha must lie in (1, 2)")

    @classmethod
    def feller(cls) -> "PsiSpec":
        return cls(sigma2=1.0, name="feller")

    @classmethod
    def stable(cls, alpha: float) -> "PsiSpec":
        return cls(jump=1.0, alpha=alpha, name="stable")

    @classmethod
    def from_linear_rates(cls, c0: float, c1: float, c2: float, alpha: float) -> "PsiSpec":
        return cls(drift=-c0, sigma2=c1, jump=c2, alpha=alpha)

    def __call__(self, lam: float) -> float:
        return self.drift * lam + 0.5 * self.sigma2 * lam * lam + self.jump * lam ** self.alpha

    def over_lam(self, lam: float) -> float:
        """``psi(lam) / lam`` without overflow at large ``lam``."""
        return self.drift + 0.5 * self.sigma2 * lam + self.jump * lam ** (self.alpha - 1.0)


def feller_ut(theta: float, t: float) -> float:
    """Closed form for ``psi(lam) = lam**2 / 2``."""
    if math.isinf(theta):
        return 2.0 / t
    return theta / (1.0 + 0.5 * theta * t)


def stable_ut(theta: float, t: float, alpha: float) -> float:
    """Closed form for ``psi(lam) = lam**alpha``."""
    k = alpha - 1.0
    if math.isinf(theta):
        return (k * t) ** (-1.0 / k)
    return (theta ** (-k) + k * t) ** (-1.0 / k)


def _ut_infinite(t: float, psi: PsiSpec) -> float:
    """Solve ``int_u^inf dlam / psi(lam) = t`` for ``u``."""
    if psi.sigma2 == 0 and psi.jump == 0:
        raise NumericalError("u_t(inf) is infinite without a superlinear psi")

    def integrand(s: float, u: float) -> float:
        if s > 700.0:
            return 0.0
        return 1.0 / psi.over_lam(u * math.exp(s))

    def remaining(u: float) -> float:
        # lam = u e^s turns the algebraic tail into a geometric one
        val, _ = integrate.quad(integrand, 0.0, math.inf, args=(u,), epsabs=1e-14, epsrel=1e-12, limit=500)
        return val - t

    # remaining() decreases from +inf at the largest zero of psi (or at 0)
    roots = _positive_roots(psi)
    lo = roots[-1] if roots else 0.0
    hi = max(1.0, 2.0 * lo)
    while remaining(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise NumericalError("could not bracket u_t(inf)")
    a = hi
    while remaining(a) <= 0:
        a = lo + 0.5 * (a - lo)
        if a - lo <= 4 * np.finfo(float).eps * max(lo, 1.0):
            return a  # within rounding of the fixed point
    if a == hi:
        return hi
    return optimize.brentq(remaining, a, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _positive_roots(psi: PsiSpec) -> list[float]:
    if psi.drift >= 0:
        return []
    # psi(lam)/lam is increasing, so psi has at most one positive zero
    f = psi.over_lam
    hi = 1.0
    while f(hi) <= 0:
        hi *= 2.0
    return [optimize.brentq(f, 0.0, hi, xtol=1e-15)]


def solve_ut(theta: float, t: float, psi: PsiSpec) -> float:
    """``u_t(theta)`` solving ``du/dt = -psi(u)``, ``u_0 = theta``.

    ``theta = inf`` is handled through ``int_u^inf dlam/psi = t``.  Finite
    ``theta`` integrates the ODE in ``log u`` with DOP853; if that fails
    the named specs fall back to their closed forms.
    """
    if not theta >= 0:
        raise ParameterError("theta must be >= 0")
    if t < 0:
        raise ParameterError("t must be >= 0")
    if t == 0:
        return float(theta)
    if theta == 0:
        return 0.0
    if math.isinf(theta):
        # invert the integral only over a short time, where it is well
        # conditioned, then follow the flow: u_t = u_{t - t0}(u_{t0})
        t0 = min(t, 1.0)
        u0 = _ut_infinite(t0, psi)
        return u0 if t0 == t else solve_ut(u0, t - t0, psi)

    def rhs(_, v):
        return [-psi.over_lam(math.exp(v[0]))]

    sol = integrate.solve_ivp(rhs, (0.0, t), [math.log(theta)], method="DOP853",
                              rtol=1e-13, atol=1e-13)
    if sol.success and np.isfinite(sol.y[0, -1]):
        return float(math.exp(sol.y[0, -1]))
    if psi.name == "feller":
        return feller_ut(theta, t)
    if psi.name == "stable":
        return stable_ut(theta, t, psi.alpha)
    raise NumericalError(f"u_t ODE failed: {sol.message}")


# ------------------------------------------------------------ parallel map

def run_paths(task: Callable[[int, np.random.Generator], object], n_paths: int, seed: int,
              workers: int = 1, stream_offset: int = 0) -> list:
    """``[task(i, rng_i) for i in range(n_paths)]`` over a thread pool.

    ``rng_i`` is the stream ``(seed, stream_offset + i)``; the output order
    is the index order whatever ``workers`` is.
    """
    if n_paths < 1:
        raise ParameterError("n_paths must be >= 1")
    workers = max(1, int(workers))

    def block(lo: int, hi: int) -> list:
        return [task(i, make_rng(seed, stream_offset + i)) for i in range(lo, hi)]

    if workers == 1:
        return block(0, n_paths)
    n_blocks = min(n_paths, 8 * workers)
    edges = np.linspace(0, n_paths, n_blocks + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(block, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]
        out = []
        for f in futures:
            out.extend(f.result())
    return out


# ------------------------------------------------------------------ events

@dataclass(frozen=True)
class ExtinctBy:
    t: float


@dataclass(frozen=True)
class ExplodedBy:
    t: float


@dataclass(frozen=True)
class HitsBelow:
    level: float
    t: float


@dataclass(frozen=True)
class HitsAbove:
    level: float
    t: float


Event = ExtinctBy | ExplodedBy | HitsBelow | HitsAbove


def _horizon(config: SimConfig, t: float) -> SimConfig:
    if not t > 0:
        raise ParameterError("event time must be > 0")
    return dataclasses.replace(config, t_max=float(t), dt=min(config.dt, float(t)),
                               record_stride=max(int(config.record_stride), 1 << 30))


def _event_indicator(model, x0, config, event) -> Callable[[int, np.random.Generator], bool]:
    cfg = _horizon(config, event.t)
    if isinstance(event, ExtinctBy):
        return lambda i, rng: simulate_path(model, x0, cfg, rng).status is Status.EXTINCT
    if isinstance(event, ExplodedBy):
        return lambda i, rng: simulate_path(model, x0, cfg, rng).status is Status.EXPLODED
    if isinstance(event, HitsBelow):
        key = (float(event.level), "down")
        return lambda i, rng: key in simulate_path(model, x0, cfg, rng, levels=(event.level,)).crossings
    if isinstance(event, HitsAbove):
        key = (float(event.level), "up")
        return lambda i, rng: key in simulate_path(model, x0, cfg, rng, levels=(event.level,)).crossings
    raise ParameterError(f"unknown event {event!r}")


def estimate_event_prob(model: BranchingModel, x0: float, config: SimConfig, event, n_paths: int,
                        workers: int = 1, seed: int | None = None) -> Estimate:
    """Bernoulli estimate of ``P_x0(event)`` over independent paths.

    The simulation horizon is the event time; ``config.t_max`` is ignored.
    """
    if n_paths < 100:
        raise ParameterError("n_paths must be >= 100")
    seed = config.seed if seed is None else seed
    hits = run_paths(_event_indicator(model, x0, config, event), n_paths, seed, workers)
    return Estimate.from_bernoulli(int(sum(bool(h) for h in hits)), n_paths)


def explosion_report(model: BranchingModel, x0: float, config: SimConfig, t: float, n_paths: int,
                     workers: int = 1, seed: int | None = None) -> dict:
    """Explosion probability by ``t`` with the cap at ``M`` and at ``M/10``.

    One run serves both: a path reaching ``M`` has crossed ``M/10`` first.
    """
    if n_paths < 100:
        raise ParameterError("n_paths must be >= 100")
    seed = config.seed if seed is None else seed
    cfg = _horizon(config, t)
    low = cfg.cap_explosion / 10.0
    key = (low, "up")

    def task(i, rng):
        p = simulate_path(model, x0, cfg, rng, levels=(low,))
        return p.status is Status.EXPLODED, key in p.crossings

    res = run_paths(task, n_paths, seed, workers)
    at_cap = sum(a for a, _ in res)
    at_tenth = sum(b for _, b in res)
    return {
        "t": float(t),
        "cap": cfg.cap_explosion,
        "estimate_at_cap": Estimate.from_bernoulli(at_cap, n_paths).to_dict(),
        "cap_tenth": low,
        "estimate_at_cap_tenth": Estimate.from_bernoulli(at_tenth, n_paths).to_dict(),
    }


# -------------------------------------------------------- martingale test

@dataclass(frozen=True)
class MartingaleReport:
    a: float
    initial_value: float
    checkpoints: list  # [(t, Estimate)]
    passed: bool
    band: tuple[float, float]
    median_exit_time: float | None

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "initial_value": self.initial_value,
            "band": list(self.band),
            "median_exit_time": self.median_exit_time,
            "checkpoints": [{"t": t, **e.to_dict()} for t, e in self.checkpoints],
            "pass": self.passed,
        }


def _stopped_functional(path, G, a: float, checkpoints_steps: np.ndarray, shift: float) -> np.ndarray:
    """``X_{t^T}**(1-a) exp(int_0^{t^T} (G_a(X) + shift) ds)`` at the given step indices."""
    h = path.dt
    g = G(path.states) + shift
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (g[:-1] + g[1:]) * h)))
    last = path.states.size - 1  # the record of the exit step (or of t_max)
    idx = np.minimum(checkpoints_steps, last)
    expo = cum[idx]
    if np.any(expo > 700.0):
        raise NumericalError("exponential weight overflows; shrink the band")
    return path.states[idx] ** (1.0 - a) * np.exp(expo)


def martingale_drift_test(model: BranchingModel, x0: float, a: float, band: tuple[float, float],
                          checkpoints: Sequence[float] | None, n_paths: int, config: SimConfig,
                          workers: int = 1, seed: int | None = None, ga_shift: float = 0.0,
                          quad: QuadratureConfig = DEFAULT_QUAD) -> MartingaleReport:
    """Monte Carlo check that ``E[M_t]`` stays at ``x0**(1-a)``.

    ``M_t = X_{t^T}**(1-a) exp(int_0^{t^T} G_a(X_s) ds)`` with ``T`` the first
    exit from the band.  Without explicit checkpoints a first pass over the
    same paths measures the median exit time and the checkpoints become
    ``{0.1, 0.5, 1} x median`` snapped to the step grid.  ``ga_shift`` adds
    a constant to ``G_a`` (a deliberately wrong functional, for controls).
    """
    c, b = map(float, band)
    if not (0 < c < x0 < b):
        raise ParameterError("need 0 < c < x0 < b")
    if not (a > 0 and a != 1):
        raise ParameterError("need a > 0, a != 1")
    seed = config.seed if seed is None else seed
    G = ga_function(model, a, quad)
    init = x0 ** (1.0 - a)
    h = config.step
    median_t = None

    if checkpoints is None:
        # pilot pass over the very same streams: exit times only
        cfg1 = dataclasses.replace(config, record_stride=1 << 30)
        exits = np.array(run_paths(
            lambda i, rng: simulate_until_exit(model, x0, cfg1, rng, c, b).t_end, n_paths, seed, workers))
        median_t = float(np.median(exits))
        if median_t >= cfg1.t_max:
            raise NumericalError("median exit time beyond t_max; widen t_max or shrink the band")
        checkpoints = [f * median_t for f in (0.1, 0.5, 1.0)]

    ts = np.asarray(checkpoints, dtype=float)
    if np.any(ts < 0):
        raise ParameterError("checkpoints must be >= 0")
    steps = np.rint(ts / h).astype(np.int64)
    t_sim = max(float(steps.max()) * h, h)
    cfg = dataclasses.replace(config, t_max=t_sim, dt=min(h, t_sim), record_stride=1)

    def task(i, rng):
        path = simulate_until_exit(model, x0, cfg, rng, c, b)
        return _stopped_functional(path, G, a, steps, ga_shift)

    values = np.array(run_paths(task, n_paths, seed, workers))
    rows = []
    ok = True
    for j, k in enumerate(steps):
        if k == 0:
            est = Estimate(init, 0.0, n_paths)
        else:
            est = Estimate.from_samples(values[:, j])
        ok &= abs(est.mean - init) <= 3.0 * est.stderr
        rows.append((float(k * h), est))
    return MartingaleReport(float(a), init, rows, bool(ok), (c, b), median_t)


# ---------------------------------------------------------------- CDI probe

@dataclass(frozen=True)
class CdiRow:
    b: float
    x0: float
    p_hit: Estimate  # P_x0(tau_b^- < t)
    mean_time: Estimate  # E_x0[tau_b^-], censored paths counted at t_max
    censored_fraction: float

    def to_dict(self) -> dict:
        return {
            "b": self.b, "x0": self.x0, "p_hit": self.p_hit.to_dict(),
            "mean_time": self.mean_time.to_dict(), "censored_fraction": self.censored_fraction,
        }


def cdi_probe(model: BranchingModel, b_levels: Sequence[float], x0_sequence: Sequence[float], t: float,
              n_paths: int, config: SimConfig, workers: int = 1, seed: int | None = None) -> list[CdiRow]:
    """Estimates of ``P_x(tau_b^- < t)`` and ``E_x[tau_b^-]`` over a grid of starts.

    Paths run to ``tau_b^-`` or ``config.t_max`` (which must be ``>= t``);
    the mean hitting time is a lower bound when some paths are censored.
    """
    xs = np.asarray(x0_sequence, dtype=float)
    if xs.size < 2 or np.any(np.diff(xs) <= 0):
        raise ParameterError("x0_sequence must be strictly increasing")
    if xs[-1] / xs[0] < 100.0:
        raise ParameterError("x0_sequence must span at least two decades")
    if min(b_levels) <= 0 or max(b_levels) >= xs[0]:
        raise ParameterError("every b level must lie in (0, min x0)")
    if config.t_max < t:
        raise ParameterError("config.t_max must be >= t")
    seed = config.seed if seed is None else seed
    cfg = dataclasses.replace(config, record_stride=1 << 30)
    rows = []
    offset = 0
    for bl in b_levels:
        for x0 in xs:
            def task(i, rng, x0=float(x0), bl=float(bl)):
                p = simulate_until_exit(model, x0, cfg, rng, bl, cfg.cap_explosion)
                hit = p.status is Status.EXTINCT
                return hit, p.t_end
            res = run_paths(task, n_paths, seed, workers, stream_offset=offset)
            offset += n_paths
            hit = np.array([r[0] for r in res])
            times = np.array([r[1] for r in res])
            p_hit = Estimate.from_bernoulli(int(np.sum(hit & (times < t))), n_paths)
            rows.append(CdiRow(float(bl), float(x0), p_hit, Estimate.from_samples(times),
                               float(1.0 - hit.mean())))
    return rows


def cdi_consistency(rows: Sequence[CdiRow], verdict: str, z: float = 2.0) -> dict:
    """Trend checks of a CDI table against a classifier verdict.

    ``ComesDown``: the mean hitting time of the two largest starts agrees
    within ``z`` combined stderr and the hitting probability stays positive.
    ``StaysInfinite``: the hitting probability never rises by more than ``z``
    combined stderr along the starts and ends ``z`` combined stderr below
    where it began.  Each level of ``b`` is checked separately.
    """
    by_b: dict[float, list[CdiRow]] = {}
    for r in rows:
        by_b.setdefault(r.b, []).append(r)
    checks = []
    for bl, rs in sorted(by_b.items()):
        rs = sorted(rs, key=lambda r: r.x0)
        if verdict == "ComesDown":
            m1, m2 = rs[-2].mean_time, rs[-1].mean_time
            comb = math.hypot(m1.stderr, m2.stderr)
            ok = abs(m2.mean - m1.mean) < z * comb and rs[-1].p_hit.mean > 0 and rs[-1].censored_fraction == 0
        elif verdict == "StaysInfinite":
            ps = [r.p_hit for r in rs]
            steps_ok = all(q.mean <= p.mean + z * math.hypot(p.stderr, q.stderr) for p, q in zip(ps, ps[1:]))
            ok = steps_ok and ps[-1].mean < ps[0].mean - z * math.hypot(ps[0].stderr, ps[-1].stderr)
        else:
            raise ParameterError("verdict must be 'ComesDown' or 'StaysInfinite'")
        checks.append({"b": bl, "pass": bool(ok)})
    passed = all(c["pass"] for c in checks)
    return {
        "verdict": verdict,
        "checks": checks,
        "pass": passed,
        "label": ("consistent with " if passed else "inconsistent with ") + verdict,
    }


# -------------------------------------------------------- branching property

@dataclass(frozen=True)
class BranchingCheck:
    theta: float
    from_x: Estimate
    from_y: Estimate
    from_xy: Estimate
    product: float
    product_stderr: float
    oracle: float
    passed: bool
    oracle_passed: bool

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "from_x": self.from_x.to_dict(),
            "from_y": self.from_y.to_dict(),
            "from_xy": self.from_xy.to_dict(),
            "product": self.product,
            "product_stderr": self.product_stderr,
            "oracle": self.oracle,
            "pass": self.passed,
            "oracle_pass": self.oracle_passed,
        }


def branching_property_test(c0: float, c1: float, c2: float, alpha: float, x: float, y: float,
                            theta_list: Sequence[float], t: float, n_paths: int, config: SimConfig,
                            workers: int = 1, seed: int | None = None) -> list[BranchingCheck]:
    """Empirical ``E_{x+y} e^{-theta X_t}`` against ``E_x[...] E_y[...]``.

    Three independent batches (from ``x``, ``y`` and ``x+y``) on disjoint
    streams.  Each side is also compared with ``exp(-(x+y) u_t(theta))``.
    """
    model = make_power_law(c0, 1.0, c1, 1.0, c2, 1.0, alpha)
    psi = PsiSpec.from_linear_rates(c0, c1, c2, alpha)
    seed = config.seed if seed is None else seed
    cfg = _horizon(config, t)

    def finals(start: float, offset: int) -> np.ndarray:
        def task(i, rng):
            p = simulate_path(model, start, cfg, rng)
            # an exploded path has X_t = inf, so exp(-theta X_t) = 0
            return math.inf if p.status is Status.EXPLODED else float(p.states[-1])
        return np.array(run_paths(task, n_paths, seed, workers, stream_offset=offset))

    fx, fy, fxy = finals(x, 0), finals(y, n_paths), finals(x + y, 2 * n_paths)
    out = []
    for th in theta_list:
        th = float(th)
        ex, ey, exy = (Estimate.from_samples(np.exp(-th * f)) for f in (fx, fy, fxy))
        prod = ex.mean * ey.mean
        prod_se = math.hypot(ey.mean * ex.stderr, ex.mean * ey.stderr)
        comb = math.hypot(prod_se, exy.stderr)
        oracle = math.exp(-(x + y) * solve_ut(th, t, psi)) if th > 0 else 1.0
        passed = abs(exy.mean - prod) <= 3.0 * comb
        oracle_ok = (abs(exy.mean - oracle) <= 3.0 * exy.stderr and abs(prod - oracle) <= 3.0 * prod_se)
        out.append(BranchingCheck(th, ex, ey, exy, prod, prod_se, oracle, passed, oracle_ok))
    return out
