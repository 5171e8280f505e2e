"""Closed-form bounds on the Lyapunov gap and the combined verification report."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .cocycle import LyapunovEstimate, expected_log_det, lyapunov_spectrum
from .errors import DegenerateDeterminant
from .memloss import (
    RateEstimate,
    best_rate,
    delta_curve,
    delta_tilde_curve,
    estimate_rate,
    matched_gap,
)
from .model import HmmModel, check_hypotheses
from .simulate import derive_seed, past_window, sample_path

DEFAULT_TOL = 0.05
ATTAIN_FRACTION = 0.9
# absolute slack for the sum rule when the per-step sum is (nearly) constant
ROUNDING_SLACK = 1e-12
KINDS = ("delta", "delta_tilde")


def proposition_lower_bound(model: HmmModel) -> float:
    """``(1/(k-1)) log|det p| - (k/(k-1)) log R``."""
    k = model.k
    det = abs(np.linalg.det(model.p))
    if k < 2 or det == 0:
        raise DegenerateDeterminant("the bound needs det p != 0 and k >= 2")
    R = check_hypotheses(model).R
    return float(np.log(det) / (k - 1) - k / (k - 1) * np.log(R))


@dataclass(frozen=True)
class BoundsReport:
    lyap_gap: float
    lyap_gap_std_error: float
    prop_lower_bound: float
    prop_bound_holds: bool | None
    det_identity_residual: float
    det_identity_tolerance: float
    det_identity_holds: bool | None
    theorem1_violations: tuple = ()
    theorem2_attained: bool | None = None
    tol: float = DEFAULT_TOL
    h1: bool = True
    h2: bool = True

    def to_dict(self):
        d = asdict(self)
        d["theorem1_violations"] = list(self.theorem1_violations)
        return d


def _label(rate: RateEstimate) -> str:
    return f"{rate.kind}:" + "-".join(str(x) for x in rate.triple)


def verify_all(model: HmmModel, lyap: LyapunovEstimate, rates, tol=DEFAULT_TOL,
               gaps=None) -> BoundsReport:
    """Combine a Lyapunov estimate and rate estimates into a report.

    ``gaps`` optionally maps each triple to the gap it should be compared with
    (e.g. a window-matched gap); otherwise ``lyap.gap`` is used for all.
    """
    hyp = check_hypotheses(model)
    gap = lyap.gap
    gap_se = lyap.gap_std_error
    try:
        prop = proposition_lower_bound(model)
    except DegenerateDeterminant:
        prop = float("-inf")
    prop_holds = None
    if hyp.h1_holds and hyp.h2_holds and np.isfinite(gap):
        slack = 3 * gap_se if np.isfinite(gap_se) else 0.0
        prop_holds = bool(prop <= gap + slack)

    resid, dtol, dholds = float("nan"), float("nan"), None
    if len(lyap.lambdas) == model.k and not lyap.underflow_flags.any():
        resid = float(abs(lyap.lambdas.sum() - expected_log_det(model)))
        se = lyap.sum_std_error if np.isfinite(lyap.sum_std_error) else 0.0
        dtol = 3 * se + ROUNDING_SLACK
        dholds = bool(resid <= dtol)

    rates = list(rates)
    violations = []
    for r in sorted(rates, key=lambda r: (r.kind, r.triple)):
        g = gap if gaps is None else gaps[(r.kind, r.triple)]
        if np.isfinite(r.tau_hat) and r.tau_hat > g + tol:
            violations.append(_label(r))

    attained = None
    if hyp.h1_holds and hyp.h2_holds and rates:
        best = best_rate(rates)
        g = gap if gaps is None else gaps[(best.kind, best.triple)]
        attained = bool(np.isfinite(best.tau_hat) and abs(best.tau_hat - g) <= tol)
    return BoundsReport(float(gap), float(gap_se), prop, prop_holds, resid, dtol, dholds,
                        tuple(violations), attained, float(tol), hyp.h1_holds, hyp.h2_holds)


@dataclass(frozen=True)
class WindowResult:
    index: int
    seed: int
    kind: str
    best_triple: tuple
    best_tau: float
    matched_gap: float
    attained: bool | None
    attained_global: bool | None
    violations: tuple
    rates: tuple = field(repr=False, default=())

    def to_dict(self):
        d = asdict(self)
        d["best_triple"] = list(self.best_triple)
        d["violations"] = list(self.violations)
        d["rates"] = [r.to_dict() for r in self.rates]
        return d


def window_rates(model, window, n_max, kind="delta", method="regression"):
    make = delta_curve if kind == "delta" else delta_tilde_curve
    return [estimate_rate(c, method=method) for c in make(model, window, n_max=n_max)]


def verify_window(model: HmmModel, window, n_max, global_gap, tol=DEFAULT_TOL,
                  kind="delta", method="regression", index=0, seed=0) -> WindowResult:
    """Rate bound and attainment on one window, each triple against its window-matched gap."""
    rates = window_rates(model, window, n_max, kind, method)
    cache = {}
    gaps = {}
    for r in rates:
        if np.isfinite(r.tau_hat):
            if r.window not in cache:
                cache[r.window] = matched_gap(model, window, r)
            gaps[(r.kind, r.triple)] = cache[r.window]
    violations = tuple(_label(r) for r in rates
                       if np.isfinite(r.tau_hat) and r.tau_hat > gaps[(r.kind, r.triple)] + tol)
    best = best_rate(rates)
    hyp = check_hypotheses(model)
    applicable = hyp.h1_holds and hyp.h2_holds and np.isfinite(best.tau_hat)
    mg = gaps.get((best.kind, best.triple), float("nan"))
    attained = bool(abs(best.tau_hat - mg) <= tol) if applicable else None
    attained_global = bool(abs(best.tau_hat - global_gap) <= tol) if applicable else None
    return WindowResult(index, int(seed), kind, best.triple, float(best.tau_hat), float(mg),
                        attained, attained_global, violations, tuple(rates))


@dataclass(frozen=True)
class Verification:
    report: BoundsReport
    lyapunov: LyapunovEstimate = field(repr=False)
    windows: tuple
    attainment: dict  # kind -> fraction of windows attaining the matched gap
    attainment_global: dict  # kind -> same against the global gap (informational)
    passed: bool

    def to_dict(self):
        return {
            "report": self.report.to_dict(),
            "lambdas": [float(x) for x in self.lyapunov.lambdas],
            "lambda_std_errors": [float(x) for x in self.lyapunov.std_errors],
            "n_steps": int(self.lyapunov.n_steps),
            "windows": [w.to_dict() for w in self.windows],
            "attainment_fraction": self.attainment,
            "attainment_fraction_global_gap": self.attainment_global,
            "passed": self.passed,
        }


def verify_model(model: HmmModel, seed: int, n_windows=20, n_max=400, N_lyap=10**6,
                 tol=DEFAULT_TOL, method="regression", kinds=KINDS) -> Verification:
    """Global exponents from one long path plus per-window rate checks.

    Task 0 of ``seed`` drives the long path; window ``i`` uses task ``i + 1``.
    """
    hyp = check_hypotheses(model)
    path = sample_path(model, N_lyap, derive_seed(seed, 0))
    lyap = lyapunov_spectrum(model, path, r=model.k, permissive=True)
    results = []
    for i in range(n_windows):
        wseed = derive_seed(seed, i + 1)
        window = past_window(sample_path(model, n_max - 1, wseed), n_max - 1)
        for kind in kinds:
            results.append(verify_window(model, window, n_max, lyap.gap, tol, kind, method, i, wseed))
    attain, attain_g = {}, {}
    applicable = hyp.h1_holds and hyp.h2_holds
    for kind in kinds:
        rs = [w for w in results if w.kind == kind]
        if applicable and rs and all(w.attained is not None for w in rs):
            attain[kind] = sum(w.attained for w in rs) / len(rs)
            attain_g[kind] = sum(w.attained_global for w in rs) / len(rs)
    violations = tuple(f"window{w.index}:{v}" for w in results for v in w.violations)
    attained = (all(f >= ATTAIN_FRACTION for f in attain.values()) if attain else None)
    base = verify_all(model, lyap, [], tol)
    report = BoundsReport(base.lyap_gap, base.lyap_gap_std_error, base.prop_lower_bound,
                          base.prop_bound_holds, base.det_identity_residual,
                          base.det_identity_tolerance, base.det_identity_holds, violations,
                          attained, base.tol, base.h1, base.h2)
    passed = (not violations and attained is not False and base.prop_bound_holds is not False
              and base.det_identity_holds is not False)
    return Verification(report, lyap, tuple(results), attain, attain_g, bool(passed))
