"""Observation matrices, their renormalised products and Lyapunov spectra.

Product convention
------------------
For a past-ordered symbol stream ``z_{-1}, z_{-2}, ...`` step ``n`` multiplies
by the matrix of ``z_{-n}`` on the left, so after ``n`` steps the frame carries
``L(z_{-n}) ... L(z_{-1})``.  A window with times ``-n..-1`` is read from its
last symbol backwards; a ``SamplePath`` is read the same way, its last
observation playing ``z_{-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._stats import batch_means_se, ols
from .errors import (
    HmmError,
    NonPositiveInput,
    SymbolOutOfRange,
    WindowTooShort,
)
from .model import HmmModel, observation_marginal, observation_matrices
from .simulate import ObservationWindow, SamplePath

CLUSTER_MIN_GAP = 0.05


class HypothesisFailure(HmmError):
    """An operation that needs strictly positive matrices got a model without them."""


@dataclass(frozen=True, eq=False)
class ObservationMatrix:
    entries: np.ndarray
    symbol: int

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))


def observation_matrix(model: HmmModel, z0: int) -> ObservationMatrix:
    if not 1 <= z0 <= model.l:
        raise SymbolOutOfRange(f"symbol {z0} not in 1..{model.l}")
    return ObservationMatrix(model.q[:, z0 - 1][None, :] * model.p, int(z0))


def _require_positive(model: HmmModel):
    if model.p.min() <= 0 or model.q.min() <= 0:
        raise HypothesisFailure("observation matrices must be strictly positive (min p > 0, min q > 0)")


def _stream(model, z_source, N=None):
    if isinstance(z_source, SamplePath):
        s = np.asarray(z_source.z)[::-1]
    elif isinstance(z_source, ObservationWindow):
        s = z_source.past_stream()
    else:
        s = np.asarray(z_source)
    s = np.ascontiguousarray(s, dtype=np.int64)
    if N is not None:
        if N > len(s):
            raise WindowTooShort(f"need {N} symbols, source has {len(s)}")
        s = s[:N]
    if len(s) and (s.min() < 1 or s.max() > model.l):
        raise SymbolOutOfRange("stream contains symbols outside 1..l")
    return s - 1


def default_frame(k: int, r: int) -> np.ndarray:
    """Orthonormal k x r frame whose first column is the normalised all-ones vector."""
    A = np.eye(k)
    A[:, 0] = 1.0
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    return np.ascontiguousarray(Q[:, :r])


@dataclass(frozen=True, eq=False)
class LyapunovEstimate:
    lambdas: np.ndarray
    n_steps: int
    std_errors: np.ndarray
    underflow_flags: np.ndarray
    running: np.ndarray | None = field(default=None, repr=False)
    frame: np.ndarray | None = field(default=None, repr=False)
    sum_std_error: float = float("nan")  # batch-means error of the per-step sum of logs

    def distinct(self, min_gap=CLUSTER_MIN_GAP):
        """Distinct exponents, merging neighbours closer than ``max(min_gap, 5 se)``."""
        out = []
        prev, prev_se = None, 0.0
        for lam, se in zip(self.lambdas, self.std_errors):
            se = 0.0 if not np.isfinite(se) else se
            if prev is None:
                out.append(lam)
            elif np.isneginf(lam):
                if not np.isneginf(prev):
                    out.append(lam)
            elif prev - lam > max(min_gap, 5 * max(se, prev_se)):
                out.append(lam)
            prev, prev_se = lam, se
        return np.array(out)

    @property
    def gap(self) -> float:
        """Second distinct exponent minus the first (nan when there is only one)."""
        d = self.distinct()
        if len(d) < 2:
            return float("nan")
        return float(d[1] - d[0])

    @property
    def gap_std_error(self) -> float:
        se = self.std_errors
        return float(np.hypot(se[0], se[1])) if len(se) > 1 else float("nan")

    def local(self, j_min: int, j_max: int) -> "LyapunovEstimate":
        """Exponents as least-squares slopes of the running log-norms over steps ``j_min..j_max``."""
        if self.running is None:
            raise ValueError("estimate was computed without keep_running=True")
        j = np.arange(j_min, j_max + 1)
        S = self.running[j]
        lam = np.array([ols(j, S[:, c])[0] if np.all(np.isfinite(S[:, c])) else -np.inf
                        for c in range(S.shape[1])])
        return LyapunovEstimate(lam, j_max - j_min, np.full(len(lam), np.nan),
                                ~np.isfinite(lam))


def lyapunov_spectrum(model: HmmModel, z_source, r=None, N=None, frame=None,
                      transient=0, permissive=False, keep_running=False) -> LyapunovEstimate:
    """Benettin/QR estimate of the leading ``r`` Lyapunov exponents.

    ``permissive`` admits models with zero entries (e.g. identity emissions);
    directions whose pivot vanishes get exponent ``-inf`` and a set flag.
    ``transient`` steps are applied but left out of the average.
    """
    if not permissive:
        _require_positive(model)
    k = model.k
    r = min(k, 2) if r is None else int(r)
    if not 1 <= r <= k:
        raise ValueError(f"r must be in 1..{k}")
    s = _stream(model, z_source, N)
    if len(s) <= transient:
        raise WindowTooShort("no steps left after the transient")
    Q0 = default_frame(k, r) if frame is None else np.ascontiguousarray(frame, dtype=float)
    Q, logs = _kernels.qr_sweep(observation_matrices(model), s, Q0, False)
    used = np.ascontiguousarray(logs[transient:].T)  # rows are contiguous: pairwise summation
    flags = np.isneginf(used).any(axis=1)
    with np.errstate(invalid="ignore"):
        lam = used.mean(axis=1)
    lam[flags] = -np.inf
    se = batch_means_se(np.where(np.isneginf(used), 0.0, used).T)
    se[flags] = np.nan
    sum_se = float("nan") if flags.any() else float(batch_means_se(used.sum(axis=0))[0])
    order = np.argsort(-lam, kind="stable")
    running = None
    if keep_running:
        running = np.vstack([np.zeros((1, r)), np.cumsum(logs, axis=0)])[:, order]
    return LyapunovEstimate(lam[order], used.shape[1], se[order], flags[order], running, Q[:, order],
                            sum_se)


def expected_log_det(model: HmmModel) -> float:
    """Exact stationary mean of ``log|det L|``; ``-inf`` when it diverges."""
    det_p = abs(np.linalg.det(model.p))
    marg = observation_marginal(model)
    if det_p == 0:
        return float("-inf")
    with np.errstate(divide="ignore"):
        lq = np.log(model.q).sum(axis=0)  # sum_i log q(m|i), per symbol m
    live = marg > 0
    if np.any(np.isneginf(lq[live])):
        return float("-inf")
    return float(marg[live] @ lq[live] + np.log(det_p))


def estimate_codim1_direction(model: HmmModel, window: ObservationWindow) -> np.ndarray:
    """Unit normal to the slow Oseledec subspace at the window's end.

    Leading right-singular direction of ``L(z_{-n}) ... L(z_{-1})``, obtained by
    sweeping the transposed matrices from ``z_{-n}`` back to ``z_{-1}``.
    """
    _require_positive(model)
    if len(window) < 2:
        raise WindowTooShort("need at least two symbols")
    s = _stream(model, window)[::-1].copy()  # z_{-n} first
    Q, _ = _kernels.qr_sweep(observation_matrices(model), s,
                             default_frame(model.k, 1), True)
    f = Q[:, 0]
    if f[np.argmax(np.abs(f))] < 0:
        f = -f
    return f


def slow_basis(f: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of ``f``."""
    k = len(f)
    Q, _ = np.linalg.qr(np.column_stack([f, np.eye(k)]))
    return Q[:, 1:k]


@dataclass(frozen=True, eq=False)
class ProjectiveCurve:
    """``gamma[n]`` / ``delta[n]``: max / min componentwise ratio after ``n`` matrices."""

    n: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    log_excess: np.ndarray  # log(gamma/delta - 1), computed without cancellation


def wedge_step(L, W):
    """``L W L^T`` for a stack of antisymmetric matrices, re-antisymmetrised."""
    X = np.einsum("ij,ajk,lk->ail", L, W, L)
    return 0.5 * (X - np.swapaxes(X, 1, 2))


def projective_ratio_curve(model: HmmModel, w1, w2, window: ObservationWindow) -> ProjectiveCurve:
    _require_positive(model)
    a = np.asarray(w1, dtype=float)
    b = np.asarray(w2, dtype=float)
    if a.shape != (model.k,) or b.shape != (model.k,):
        raise ValueError("vectors must have length k")
    if a.min() <= 0 or b.min() <= 0:
        raise NonPositiveInput("w1 and w2 must be strictly positive")
    mats = observation_matrices(model)
    W = (np.outer(a, b) - np.outer(b, a))[None]
    sa = sb = sw = 0.0
    s = _stream(model, window)
    n_steps = len(s)
    gamma = np.empty(n_steps + 1)
    delta = np.empty(n_steps + 1)
    excess = np.empty(n_steps + 1)
    for n in range(n_steps + 1):
        if n:
            L = mats[s[n - 1]]
            a, b, W = L @ a, L @ b, wedge_step(L, W)
            ca, cb, cw = a.max(), b.max(), np.abs(W).max()
            a, b = a / ca, b / cb
            sa, sb = sa + np.log(ca), sb + np.log(cb)
            if cw > 0:
                W, sw = W / cw, sw + np.log(cw)
        ratio = a / b
        gamma[n] = ratio.max() * np.exp(sa - sb)
        delta[n] = ratio.min() * np.exp(sa - sb)
        # gamma/delta - 1 = max_{i,j} W_ij / (a_j b_i)
        Wn = W[0]
        pos = Wn > 0
        if pos.any():
            with np.errstate(divide="ignore"):
                terms = np.log(np.where(pos, Wn, 1.0)) + sw - np.log(a)[None, :] - sa \
                    - np.log(b)[:, None] - sb
            excess[n] = terms[pos].max()
        else:
            excess[n] = -np.inf
    return ProjectiveCurve(np.arange(n_steps + 1), gamma, delta, excess)


def write_running_csv(est: LyapunovEstimate, fh, stride=1):
    if est.running is None:
        raise ValueError("estimate was computed without keep_running=True")
    r = est.running.shape[1]
    fh.write("n," + ",".join(f"lambda{i + 1}" for i in range(r)) + "\n")
    rows = list(range(stride, est.running.shape[0], stride))
    if rows[-1:] != [est.running.shape[0] - 1]:
        rows.append(est.running.shape[0] - 1)
    for n in rows:
        vals = est.running[n] / n
        fh.write(f"{n}," + ",".join(repr(float(v)) for v in vals) + "\n")
