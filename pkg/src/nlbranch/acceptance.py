"""Built-in acceptance suite: eleven end-to-end checks with fixed seeds.

Each ``criterion_N`` returns a :class:`CriterionResult`; ``run_suite``
runs a selection of them.  The same functions back ``nlbranch validate``
and ``tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analytics import c_alpha_a, gamma, h_a_first_line, h_a_second_line
from .classifier import Verdict, classify_all, classify_cdi, classify_explosion, classify_extinction
from .model import PowerLawRates, StableJumpMeasure, make_power_law
from .montecarlo import (
    ExtinctBy,
    PsiSpec,
    branching_property_test,
    cdi_consistency,
    cdi_probe,
    estimate_event_prob,
    martingale_drift_test,
    solve_ut,
)
from .sampler import make_rng, stable_increment
from .simulator import SimConfig, simulate_coupled, simulate_path
from .timechange import WeightFunction, lamperti_transform, weighted_population

__all__ = ["CriterionResult", "CRITERIA", "run_suite", "CLASSIFIER_FIXTURES", "li_reduction_check"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    budget_s: float
    runtime_s: float = 0.0
    detail: dict = field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.runtime_s <= self.budget_s

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"criterion {self.number:2d} {verdict}  {self.name}  "
                f"({self.runtime_s:.1f}s of {self.budget_s:.0f}s budget)")

    def to_dict(self) -> dict:
        return {
            "number": self.number, "name": self.name, "pass": self.passed,
            "runtime_s": round(self.runtime_s, 3), "budget_s": self.budget_s, "detail": self.detail,
        }


FELLER = (0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.5)
STABLE_CSBP = (0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.5)


def criterion_1(workers: int = 1) -> CriterionResult:
    alphas = np.round(np.arange(1.05, 1.951, 0.05), 2)
    errs = {float(al): abs(c_alpha_a(float(al), 1.0 + 1e-9) - gamma(float(al))) for al in alphas}
    worst = max(errs.values())
    return CriterionResult(1, "c_{alpha,a->1} equals Gamma(alpha)", worst <= 1e-6, 10,
                           detail={"max_abs_error": worst, "n_alpha": len(errs)})


def criterion_2(workers: int = 1) -> CriterionResult:
    jumps = StableJumpMeasure(1.5)
    worst = 0.0
    for a in (0.25, 0.5, 1.5, 2.0, 3.0):
        for u in np.logspace(-3, 3, 7):
            l1 = h_a_first_line(jumps, float(u), a)
            l2 = h_a_second_line(jumps, float(u), a)
            worst = max(worst, abs(l1 - l2) / max(abs(l1), abs(l2)))
    return CriterionResult(2, "H_a direct and Taylor-remainder forms agree", worst <= 1e-6, 30,
                           detail={"max_rel_diff": worst, "grid": "5 a x 7 u"})


def criterion_3(workers: int = 1) -> CriterionResult:
    rng = make_rng(20240301, 0)
    rows = []
    ok = True
    times = {0.5: 1.0, 1.0: 1.0, 2.0: 0.25}
    for alpha in (1.2, 1.5, 1.8):
        for lam, t in times.items():
            x = stable_increment(rng, alpha, t, 100_000)
            e = np.exp(-lam * x)
            se = e.std(ddof=1) / math.sqrt(e.size)
            target = math.exp(t * lam ** alpha)
            z = (e.mean() - target) / se
            ok &= abs(z) <= 3.0
            rows.append({"alpha": alpha, "lambda": lam, "t": t, "z": float(z)})
    return CriterionResult(3, "stable driver Laplace transform", bool(ok), 60, detail={"cases": rows})


def _extinction(params, t, tol, seed, name, number, workers, oracle) -> CriterionResult:
    model = make_power_law(*params)
    est = estimate_event_prob(model, 1.0, SimConfig(dt=1e-3, t_max=t, seed=seed), ExtinctBy(t), 10_000,
                              workers=workers)
    ok = abs(est.mean - oracle) <= tol
    return CriterionResult(number, name, ok, 120,
                           detail={"estimate": est.to_dict(), "oracle": oracle, "tolerance": tol})


def criterion_4(workers: int = 1) -> CriterionResult:
    oracle = math.exp(-solve_ut(math.inf, 4.0, PsiSpec.feller()))
    return _extinction(FELLER, 4.0, 0.03, 4004, "Feller extinction by t=4", 4, workers, oracle)


def criterion_5(workers: int = 1) -> CriterionResult:
    oracle = math.exp(-solve_ut(math.inf, 2.0, PsiSpec.stable(1.5)))
    return _extinction(STABLE_CSBP, 2.0, 0.04, 5005, "stable CSBP extinction by t=2", 5, workers, oracle)


def criterion_6(workers: int = 1) -> CriterionResult:
    feller = make_power_law(*FELLER)
    jump = make_power_law(0.0, 0.0, 0.0, 0.0, 1.0, 1.5, 1.5)
    cfg = SimConfig(dt=1e-3, t_max=20.0, seed=6006)
    runs = [
        ("feller a=2", feller, 2.0, (0.1, 0.5, 1.0)),
        ("jump a=0.5", jump, 0.5, None),
    ]
    detail = {}
    ok = True
    for name, model, a, cps in runs:
        main = martingale_drift_test(model, 1.0, a, (0.25, 4.0), cps, 10_000, cfg, workers=workers)
        ctrl = martingale_drift_test(model, 1.0, a, (0.25, 4.0), cps, 10_000, cfg, workers=workers,
                                     ga_shift=0.1)
        ok &= main.passed and not ctrl.passed
        detail[name] = {"report": main.to_dict(), "control_shift_0.1": ctrl.to_dict()}
    return CriterionResult(6, "stopped martingale has constant mean; shifted control fails", bool(ok), 180,
                           detail=detail)


def criterion_7(workers: int = 1) -> CriterionResult:
    cases = [("feller", FELLER, 1.0, 2.0), ("jump", STABLE_CSBP, 1.0, 1.5)]
    cfg = SimConfig(dt=1e-3, t_max=1.0)
    detail = {}
    ok = True
    for name, params, x0, y0 in cases:
        model = make_power_law(*params)
        violations = steps = 0
        for i in range(1000):
            px, py = simulate_coupled(model, x0, y0, cfg, make_rng(7007, i))
            violations += int(np.sum(py.states < px.states))
            steps += px.states.size
        ok &= violations == 0
        detail[name] = {"violations": violations, "steps_checked": steps}
    return CriterionResult(7, "coupled paths stay ordered", bool(ok), 60, detail=detail)


# (rates, alpha, component, expected verdict, expected citation or None)
CLASSIFIER_FIXTURES = [
    (PowerLawRates(0, 0, 1, 1, 0, 0), 1.5, "extinction", Verdict.ALMOST_SURE, "ext-(i)(ib)"),
    (PowerLawRates(-1, 1, 1, 2, 0, 0), 1.5, "extinction", Verdict.NEVER, "nonext-(i)"),
    (PowerLawRates(-1, 1, 1, 2, 0, 0), 1.5, "extinguishing", True, None),
    (PowerLawRates(gamma(1.5), 0.5, 0, 0, 1, 1.0), 1.5, "extinction", Verdict.INDETERMINATE, None),
    (PowerLawRates(1, 0.5, 0, 0, 1, 1.0), 1.5, "extinction", Verdict.NEVER, "nonext-(ii)"),
    (PowerLawRates(-1, 0, 1, 1, 0, 0), 1.5, "explosion", Verdict.NEVER, "nonexp-(b0<=0)"),
    (PowerLawRates(1, 1, 1, 1, 0, 0), 1.5, "explosion", Verdict.NEVER, "nonexp-(i)"),
    (PowerLawRates(1, 2, 1, 2, 0, 0), 1.5, "explosion", Verdict.POSITIVE_PROBABILITY, "exp-(i)(ii)(iii)"),
    (PowerLawRates(1, 2, 2, 3, 0, 0), 1.5, "explosion", Verdict.INDETERMINATE, None),
    (PowerLawRates(0, 0, 0, 0, 1, 2), 1.5, "cdi", Verdict.ALMOST_SURE, "cdi-(i)(ic)"),
    (PowerLawRates(0, 0, 1, 2, 0, 0), 1.5, "cdi", Verdict.NEVER, "stay-(i)"),
    (PowerLawRates(-1, 2, 0, 0, 1, 1.5), 1.5, "cdi", Verdict.ALMOST_SURE, "cdi-(i)(ia)"),
    # composed reports
    (PowerLawRates(0, 0, 1, 1, 0, 0), 1.5, "all",
     (Verdict.ALMOST_SURE, Verdict.NEVER, Verdict.NEVER), None),
    (PowerLawRates(0, 0, 0, 0, 1, 1), 1.5, "all",
     (Verdict.ALMOST_SURE, Verdict.NEVER, Verdict.NEVER), None),
    (PowerLawRates(1, 2, 0, 0, 1, 3), 1.5, "all",
     (Verdict.NEVER, Verdict.NEVER, Verdict.ALMOST_SURE), "cdi-(ii)(iib)"),
]


def _fixture_ok(rates, alpha, component, expected, label) -> bool:
    if component == "extinguishing":
        return classify_extinction(rates, alpha)[1] is expected
    if component == "extinction":
        verdict, _, cites = classify_extinction(rates, alpha)
    elif component == "explosion":
        verdict, cites = classify_explosion(rates, alpha)
    elif component == "cdi":
        verdict, cites = classify_cdi(rates, alpha)
    else:
        rep = classify_all(rates, alpha)
        if (rep.extinction, rep.explosion, rep.comes_down) != expected:
            return False
        return label is None or label in rep.citations
    if verdict is not expected:
        return False
    if label is not None and label not in cites:
        return False
    return verdict is Verdict.INDETERMINATE or len(cites) >= 1


def _li_predictions(b0, b1, b2, r, alpha):
    ext = 2.0 * (b1 != 0) + alpha * (b1 == 0 and b2 != 0) > r
    exp_ = b0 > 0 and r > 1
    cdi = b0 <= 0 and (1.0 * (b0 != 0) + alpha * (b0 == 0 and b2 != 0)
                       + 2.0 * (b0 == 0 and b1 != 0 and b2 == 0)) < r
    return ext, exp_, cdi


def li_reduction_check(n: int, seed: int) -> tuple[int, list]:
    """Draw ``n`` equal-exponent models and compare with the linear-theory rules."""
    rng = np.random.default_rng(seed)
    failures = []
    drawn = 0
    while drawn < n:
        alpha = float(rng.uniform(1.05, 1.95))
        r = float(rng.uniform(0.0, 4.0))
        if min(abs(r - 1), abs(r - 2), abs(r - alpha)) < 1e-6:
            continue
        b0 = float(rng.choice([-1.0, 0.0, 1.0]) * rng.uniform(0.1, 3.0))
        b1 = float(rng.choice([0.0, 1.0]) * rng.uniform(0.1, 3.0))
        b2 = float(rng.choice([0.0, 1.0]) * rng.uniform(0.1, 3.0))
        if b1 + b2 == 0:
            continue
        drawn += 1
        rep = classify_all(PowerLawRates(b0, r, b1, r, b2, r), alpha)
        got = (
            rep.extinction in (Verdict.ALMOST_SURE, Verdict.POSITIVE_PROBABILITY),
            rep.explosion is Verdict.POSITIVE_PROBABILITY,
            rep.comes_down is Verdict.ALMOST_SURE,
        )
        if got != _li_predictions(b0, b1, b2, r, alpha):
            failures.append({"b": [b0, b1, b2], "r": r, "alpha": alpha, "got": got})
    return drawn, failures


def criterion_8(workers: int = 1) -> CriterionResult:
    bad = [i for i, fx in enumerate(CLASSIFIER_FIXTURES) if not _fixture_ok(*fx)]
    drawn, failures = li_reduction_check(500, 8008)
    ok = not bad and not failures
    return CriterionResult(8, "classifier fixtures and equal-exponent reduction", ok, 5,
                           detail={"fixture_failures": bad, "random_draws": drawn,
                                   "reduction_failures": failures[:10]})


def criterion_9(workers: int = 1) -> CriterionResult:
    cfg = SimConfig(dt=1e-3, seed=9009)
    runs = {
        "feller x=y=1": (0.0, 1.0, 0.0, 1.5, 1.0, 1.0),
        "stable x=1 y=2": (0.0, 0.0, 1.0, 1.5, 1.0, 2.0),
    }
    detail = {}
    ok = True
    for name, (c0, c1, c2, alpha, x, y) in runs.items():
        checks = branching_property_test(c0, c1, c2, alpha, x, y, [0.5, 1.0], 1.0, 10_000, cfg, workers=workers)
        ok &= all(c.passed and c.oracle_passed for c in checks)
        detail[name] = [c.to_dict() for c in checks]
    return CriterionResult(9, "branching property and u_t oracle", bool(ok), 120, detail=detail)


def criterion_10(workers: int = 1) -> CriterionResult:
    model = make_power_law(*FELLER)
    cfg = SimConfig(dt=1e-3, t_max=40.0)
    weight = WeightFunction.power(0.5)
    worst = 0.0
    censored = 0
    ok = True
    for i in range(100):
        path = simulate_path(model, 1.0, cfg, make_rng(10010, i))
        s = weighted_population(path, weight)
        moved = lamperti_transform(path, weight)
        tol = 2.0 * cfg.step * float(weight(path.states).max())
        gap = abs(s.value - moved.t_end)
        worst = max(worst, gap / tol)
        ok &= gap <= tol and s.censored == (not moved.absorbed)
        censored += int(s.censored)
    return CriterionResult(10, "weighted population equals time-changed absorption time", bool(ok), 30,
                           detail={"worst_gap_over_tolerance": worst, "censored_paths": censored})


def criterion_11(workers: int = 1) -> CriterionResult:
    comes_down = make_power_law(0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.5)
    feller = make_power_law(*FELLER)
    rows_cd = cdi_probe(comes_down, [1.0], [1e2, 1e3, 1e4], 1.0, 4000,
                        SimConfig(dt=1e-3, t_max=20.0, seed=11011), workers=workers)
    rows_f = cdi_probe(feller, [0.02], [0.05, 0.5, 5.0], 1.0, 4000,
                       SimConfig(dt=1e-3, t_max=1.0, seed=11012), workers=workers)
    v_cd = classify_all(comes_down.rates, 1.5).comes_down
    v_f = classify_all(feller.rates, 1.5).comes_down
    res_cd = cdi_consistency(rows_cd, "ComesDown")
    res_f = cdi_consistency(rows_f, "StaysInfinite")
    ok = (v_cd is Verdict.ALMOST_SURE and v_f is Verdict.NEVER and res_cd["pass"] and res_f["pass"])
    return CriterionResult(11, "coming-down probes consistent with classifier", bool(ok), 180, detail={
        "comes_down": {"rows": [r.to_dict() for r in rows_cd], "check": res_cd},
        "feller": {"rows": [r.to_dict() for r in rows_f], "check": res_f},
    })


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_criterion(number: int, workers: int = 1) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[number](workers=workers)
    res.runtime_s = time.perf_counter() - t0
    return res


def run_suite(numbers=None, workers: int = 1, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    out = []
    for k in numbers or sorted(CRITERIA):
        res = run_criterion(int(k), workers)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
