"""Conditional-probability differences and their exponential decay rates.

``delta_curve`` never subtracts two nearly equal probabilities.  Writing
``A_b = <theta_b, U psi_a>`` and ``N_b = <theta_b, U 1>`` for the product
``U = L(z_{-n+1}) ... L(z_{-1})``, the difference of conditionals is

    (A_b N_c - A_c N_b) / (N_b N_c) = <theta_b, U W_a U^T theta_c> / (N_b N_c)

with the antisymmetric ``W_a = psi_a 1^T - 1 psi_a^T``.  Propagating ``W_a``
as a 2-form (``W <- L W L^T``) keeps full relative precision, so ``log|Delta|``
stays accurate long after ``|Delta|`` drops below machine epsilon.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._stats import ols
from .cocycle import _require_positive, _stream, wedge_step, lyapunov_spectrum
from .errors import (
    DegenerateDirection,
    InsufficientData,
    SymbolOutOfRange,
    TooLarge,
    WindowTooShort,
)
from .model import HmmModel, observation_matrices
from .simulate import ObservationWindow

UNDERFLOW_FLOOR = 1e-290
BRUTEFORCE_MAX_N = 14
MIN_FIT_POINTS = 5


@dataclass(frozen=True, eq=False)
class FilterVectors:
    theta: np.ndarray  # theta[b-1, i-1] = pi(i) q(b|i)
    psi: np.ndarray  # psi[a-1, i-1] = p(a|i)


def filter_vectors(model: HmmModel) -> FilterVectors:
    return FilterVectors(model.pi[None, :] * model.q.T, model.p.T.copy())


@dataclass(frozen=True, eq=False)
class DecayCurve:
    triple: tuple
    kind: str  # "delta" (a, b, c) or "delta_tilde" (e, b, c)
    n: np.ndarray
    values: np.ndarray
    log_abs: np.ndarray
    censored: np.ndarray
    floor: float = UNDERFLOW_FLOOR

    @property
    def label(self):
        return "-".join(str(t) for t in self.triple)


@dataclass(frozen=True)
class RateEstimate:
    triple: tuple
    tau_hat: float
    window: tuple
    r_squared: float
    method: str
    n_points: int
    all_censored: bool = False
    kind: str = "delta"

    def to_dict(self):
        return {
            "triple": list(self.triple),
            "kind": self.kind,
            "tau_hat": self.tau_hat,
            "method": self.method,
            "window": list(self.window),
            "r2": self.r_squared,
            "n_points": self.n_points,
            "all_censored": self.all_censored,
        }


def _check_past_window(window: ObservationWindow, need: int):
    if len(window) and window.origin + len(window) - 1 != -1:
        raise ValueError("window must end at time -1")
    if len(window) < need:
        raise WindowTooShort(f"window has {len(window)} symbols, need {need}")


@dataclass
class _ForwardState:
    """Log-scaled forward quantities at one n: ``U 1`` and the 2-forms ``U W U^T``."""

    v: np.ndarray
    log_v: float
    forms: np.ndarray
    log_forms: float


def _forward(model, stream, n_max, psis, rescale=None):
    """Yield the state for n = 1..n_max; ``stream[j]`` is the 0-based symbol of ``z_{-j-1}``.

    ``rescale``, if given, is a sequence of positive factors multiplying the
    carried product after each step (``U 1`` by c, the 2-forms by c**2);
    used to test scale invariance.
    """
    mats = observation_matrices(model)
    k = model.k
    ones = np.ones(k)
    v = ones.copy()
    forms = np.array([np.outer(s, ones) - np.outer(ones, s) for s in psis]).reshape(-1, k, k)
    log_v = log_f = 0.0
    for n in range(1, n_max + 1):
        yield _ForwardState(v, log_v, forms, log_f)
        if n == n_max:
            return
        L = mats[stream[n - 1]]
        v = L @ v
        forms = wedge_step(L, forms)
        if rescale is not None:
            v = v * rescale[n - 1]
            forms = forms * rescale[n - 1] ** 2
        cv = v.max()
        cf = np.abs(forms).max() if len(forms) else 0.0
        v = v / cv
        log_v += np.log(cv)
        if cf > 0:
            forms = forms / cf
            log_f += np.log(cf)


def _pair_weights(theta_b, theta_c):
    # <theta_b, X theta_c> = sum_{i<j} X_ij (tb_i tc_j - tb_j tc_i) for antisymmetric X
    iu = np.triu_indices(len(theta_b), 1)
    return iu, theta_b[iu[0]] * theta_c[iu[1]] - theta_b[iu[1]] * theta_c[iu[0]]


def _all_triples(first, l):
    return [(a, b, c) for a in range(1, first + 1) for b in range(1, l + 1) for c in range(1, l + 1)]


def _log_delta_table(model, window, n_max, psis, rescale=None):
    """sign and log|.| of the difference for every (psi index, b, c) and every n."""
    _require_positive(model)
    _check_past_window(window, n_max - 1)
    stream = _stream(model, window)
    theta = filter_vectors(model).theta
    l = model.l
    A = len(psis)
    sign = np.zeros((n_max, A, l, l))
    logabs = np.full((n_max, A, l, l), -np.inf)
    weights = {(b, c): _pair_weights(theta[b], theta[c]) for b in range(l) for c in range(l)}
    for idx, st in enumerate(_forward(model, stream, n_max, psis, rescale)):
        log_norm = np.log(theta @ st.v) + st.log_v  # log N_b
        for (b, c), (iu, w) in weights.items():
            if b == c:
                continue
            num = st.forms[:, iu[0], iu[1]] @ w
            nz = num != 0
            with np.errstate(divide="ignore"):
                la = np.log(np.abs(num)) + st.log_forms - log_norm[b] - log_norm[c]
            sign[idx, :, b, c] = np.sign(num)
            logabs[idx, :, b, c] = np.where(nz, la, -np.inf)
    return sign, logabs


def _make_curve(triple, kind, sign, logabs, floor):
    n = np.arange(1, len(sign) + 1)
    with np.errstate(over="ignore", under="ignore"):
        values = sign * np.exp(logabs)
    censored = ~np.isfinite(logabs) | (logabs < np.log(floor))
    return DecayCurve(tuple(triple), kind, n, values, logabs, censored, floor)


def _validate_triples(triples, first, l):
    for t in triples:
        x, b, c = t
        if not (1 <= x <= first and 1 <= b <= l and 1 <= c <= l):
            raise SymbolOutOfRange(f"triple {t} out of range")


def delta_curve(model: HmmModel, window: ObservationWindow, triples=None, n_max=None,
                floor=UNDERFLOW_FLOOR, rescale=None) -> list[DecayCurve]:
    """``Delta_{a,b,c}[n]`` for n = 1..n_max along the past window.

    The window's last symbol is ``z_{-1}``; it must hold at least ``n_max - 1``
    symbols.  Triples default to all ``(a, b, c)`` in lexicographic order.
    """
    n_max = len(window) + 1 if n_max is None else n_max
    triples = _all_triples(model.k, model.l) if triples is None else [tuple(t) for t in triples]
    _validate_triples(triples, model.k, model.l)
    psis = filter_vectors(model).psi
    sign, logabs = _log_delta_table(model, window, n_max, psis, rescale)
    return [_make_curve((a, b, c), "delta", sign[:, a - 1, b - 1, c - 1],
                        logabs[:, a - 1, b - 1, c - 1], floor) for a, b, c in triples]


def delta_tilde_curve(model: HmmModel, window: ObservationWindow, triples=None, n_max=None,
                      floor=UNDERFLOW_FLOOR) -> list[DecayCurve]:
    """``Delta~_{e,b,c}[n] = sum_a q(e|a) Delta_{a,b,c}[n]``, summed in log-scaled form."""
    n_max = len(window) + 1 if n_max is None else n_max
    triples = _all_triples(model.l, model.l) if triples is None else [tuple(t) for t in triples]
    _validate_triples(triples, model.l, model.l)
    sign, logabs = _log_delta_table(model, window, n_max, filter_vectors(model).psi)
    out = []
    for e, b, c in triples:
        s = sign[:, :, b - 1, c - 1]
        la = logabs[:, :, b - 1, c - 1]
        top = la.max(axis=1)
        safe = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(under="ignore"):
            mix = (model.q[:, e - 1][None, :] * s * np.exp(la - safe[:, None])).sum(axis=1)
        with np.errstate(divide="ignore"):
            lt = np.where((mix != 0) & np.isfinite(top), np.log(np.abs(mix)) + safe, -np.inf)
        out.append(_make_curve((e, b, c), "delta_tilde", np.sign(mix), lt, floor))
    return out


def gamma_ratios(model: HmmModel, window: ObservationWindow, n_max=None, b0=1) -> np.ndarray:
    """``<theta_{b0}, U 1> / <theta_b, U 1>`` for every n (rows) and b (columns)."""
    _require_positive(model)
    n_max = len(window) + 1 if n_max is None else n_max
    _check_past_window(window, n_max - 1)
    theta = filter_vectors(model).theta
    rows = []
    for st in _forward(model, _stream(model, window), n_max, np.zeros((0, model.k))):
        nb = theta @ st.v
        rows.append(nb[b0 - 1] / nb)
    return np.array(rows)


# -- exact enumeration oracle -------------------------------------------------


def _to_scaled_ints(arrays):
    """Exact integers ``x * 2**D`` for every float in ``arrays`` (shared D)."""
    ratios = [[[x.as_integer_ratio() for x in row] for row in np.atleast_2d(a).tolist()]
              for a in arrays]
    D = max(den.bit_length() - 1 for a in ratios for row in a for _, den in row)
    ints = [[[num << (D - (den.bit_length() - 1)) for num, den in row] for row in a]
            for a in ratios]
    return D, ints


def _joint_exact(model, past, b):
    """``2**(D*(2n+1)) * P(X_0=a, Z_{-n+1..-1} = past, Z_{-n} = b)`` for every a, by path enumeration.

    ``past[j]`` is the 0-based symbol at time ``-(j+1)``; ``n = len(past) + 1``.
    """
    k = model.k
    D, (pi_i, p_i, q_i) = _to_scaled_ints([model.pi, model.p, model.q])
    pi_i = pi_i[0]
    n = len(past) + 1
    out = [0] * k
    for xs in itertools.product(range(k), repeat=n):
        # xs[0] = x_{-n}, xs[-1] = x_{-1}
        w = pi_i[xs[0]] * q_i[xs[0]][b]
        for t in range(1, n):
            w *= p_i[xs[t - 1]][xs[t]] * q_i[xs[t]][past[n - 1 - t]]
        for a in range(k):
            out[a] += w * p_i[xs[-1]][a]
    return out


def _bruteforce_setup(model, window, n):
    if n > BRUTEFORCE_MAX_N:
        raise TooLarge(f"n = {n} exceeds {BRUTEFORCE_MAX_N} (cost k**n)")
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_past_window(window, n - 1)
    return [int(z) for z in _stream(model, window)[: n - 1]]


def delta_bruteforce(model: HmmModel, window: ObservationWindow, a, b, c, n) -> float:
    """Oracle for ``delta_curve``: exact rational sum over all ``k**n`` hidden paths."""
    past = _bruteforce_setup(model, window, n)
    if b == c:
        return 0.0
    Jb = _joint_exact(model, past, b - 1)
    Jc = _joint_exact(model, past, c - 1)
    Nb, Nc = sum(Jb), sum(Jc)
    return float(Fraction(Jb[a - 1] * Nc - Jc[a - 1] * Nb, Nb * Nc))


def delta_tilde_bruteforce(model: HmmModel, window: ObservationWindow, e, b, c, n) -> float:
    """Direct ``P(Z_0=e | ..., Z_{-n}=b) - P(Z_0=e | ..., Z_{-n}=c)`` by enumeration."""
    past = _bruteforce_setup(model, window, n)
    if b == c:
        return 0.0
    Dq, (q_i,) = _to_scaled_ints([model.q])
    weights = [q_i[x][e - 1] for x in range(model.k)]
    Jb = _joint_exact(model, past, b - 1)
    Jc = _joint_exact(model, past, c - 1)
    Nb, Nc = sum(Jb), sum(Jc)
    num = sum(w * (x * Nc - y * Nb) for w, x, y in zip(weights, Jb, Jc))
    return float(Fraction(num, Nb * Nc << Dq))


# -- rates ----------------------------------------------------------------------


def estimate_rate(curve: DecayCurve, n_min=None, n_max=None, method="regression") -> RateEstimate:
    """Exponential decay rate of ``|Delta[n]|``.

    ``regression``: least-squares slope of ``log|Delta|`` on n over the
    uncensored points of ``[n_min, n_max]`` (default: the upper half of the
    uncensored range).
    ``tail-max``: ``max_n (log|Delta[n]| - log|Delta[n0]|) / (n - n0)`` with
    ``n0`` the first uncensored point at or after ``n_min``.
    """
    if n_max is None:
        # the upper half of what survives the underflow floor
        live = curve.n[~curve.censored]
        n_max = int(live[-1]) if len(live) else int(curve.n[-1])
    n_min = max(2, n_max // 2) if n_min is None else max(2, n_min)
    sel = (curve.n >= n_min) & (curve.n <= n_max) & ~curve.censored
    n = curve.n[sel]
    y = curve.log_abs[sel]
    if len(n) == 0:
        return RateEstimate(curve.triple, float("-inf"), (n_min, n_max), float("nan"), method,
                            0, True, curve.kind)
    if len(n) < MIN_FIT_POINTS:
        raise InsufficientData(f"only {len(n)} uncensored points in [{n_min}, {n_max}]")
    window = (int(n[0]), int(n[-1]))
    if method == "regression":
        slope, _, r2 = ols(n, y)
    elif method == "tail-max":
        slope = float(np.max((y[1:] - y[0]) / (n[1:] - n[0])))
        r2 = float("nan")
    else:
        raise ValueError(f"unknown method {method!r}")
    return RateEstimate(curve.triple, slope, window, r2, method, len(n), False, curve.kind)


def best_rate(rates):
    """Slowest decay (largest tau); lexicographic order breaks ties, first wins."""
    best = None
    for r in sorted(rates, key=lambda r: r.triple):
        if best is None or r.tau_hat > best.tau_hat:
            best = r
    return best


def matched_gap(model: HmmModel, window: ObservationWindow, rate: RateEstimate) -> float:
    """Lyapunov gap of the same product the curve was built on, over the same n-range.

    ``Delta[n]`` uses ``n - 1`` matrices, so curve index n maps to step ``n - 1``
    of the running QR log-norms; both sides are least-squares slopes.
    """
    est = lyapunov_spectrum(model, window, r=2, keep_running=True)
    return est.local(rate.window[0] - 1, rate.window[1] - 1).gap


def decompose_psi(model: HmmModel, a: int, f) -> tuple[float, np.ndarray]:
    """``psi_a = u_a 1 + xi_a`` with ``xi_a`` orthogonal to ``f``."""
    f = np.asarray(f, dtype=float)
    psi = filter_vectors(model).psi[a - 1]
    denom = f.sum()
    if abs(denom) < 1e-12 * np.linalg.norm(f) * np.sqrt(len(f)):
        raise DegenerateDirection("<f, 1> vanishes; f is not a valid fast direction")
    u = float(f @ psi / denom)
    return u, psi - u


def write_curves_csv(curves, fh):
    fh.write("triple,n,delta,log_abs_delta,censored\n")
    for cv in curves:
        for n, v, la, c in zip(cv.n.tolist(), cv.values.tolist(), cv.log_abs.tolist(),
                               cv.censored.tolist()):
            fh.write(f"{cv.label},{n},{v!r},{la!r},{int(c)}\n")
