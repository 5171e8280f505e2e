"""Hidden Markov model parameters, stationary law and hypothesis checks.

States and observation symbols are 1-indexed at the public surface
(``A = {1..k}``, ``B = {1..l}``); arrays are stored 0-indexed, so
``p[i - 1, j - 1]`` is the probability of moving from state ``i`` to ``j``
and ``q[i - 1, m - 1]`` the probability of emitting ``m`` from state ``i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NonStochastic, NotIrreducible

ROW_SUM_TOL = 1e-9
DEFAULT_RANK_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HmmModel:
    """Transition matrix ``p`` (k x k), emission matrix ``q`` (k x l), stationary ``pi``."""

    p: np.ndarray
    q: np.ndarray
    pi: np.ndarray

    @property
    def k(self) -> int:
        return self.p.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.q.shape[1]

    def to_dict(self):
        return {"p": self.p.tolist(), "q": self.q.tolist()}

    def __repr__(self):
        return f"HmmModel(k={self.k}, l={self.l}, pi={np.round(self.pi, 6).tolist()})"


@dataclass(frozen=True)
class HypothesisReport:
    h1_holds: bool
    h2_holds: bool
    min_p: float
    min_q: float
    det_p: float
    sigma_min_q: float
    R: float
    phi: float
    alpha: float

    def to_dict(self):
        return dict(self.__dict__)


def stationary_distribution(p, tol=1e-14, maxiter=10**6):
    """Stationary vector of the row-stochastic matrix ``p``.

    Solves ``(p^T - I) x = 0`` together with ``sum(x) = 1``; if that system is
    ill-conditioned, falls back to power iteration.
    """
    p = np.asarray(p, dtype=float)
    k = p.shape[0]
    A = np.vstack([p.T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    if np.linalg.matrix_rank(p.T - np.eye(k), tol=1e-12) < k - 1:
        raise NotIrreducible("stationary distribution is not unique")
    if np.linalg.cond(A) < 1e12:
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
    else:
        x = _power_iteration(p, tol, maxiter)
    if np.any(x < -1e-12):
        raise NotIrreducible("stationary solve produced negative mass")
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def _power_iteration(p, tol, maxiter):
    k = p.shape[0]
    x = np.full(k, 1.0 / k)
    for _ in range(maxiter):
        y = x @ p
        if np.abs(y - x).max() < tol:
            return y
        x = y
    raise NotIrreducible("power iteration did not converge (periodic chain?)")


def build_model(p, q) -> HmmModel:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DimensionMismatch(f"p must be square, got shape {p.shape}")
    if q.ndim != 2 or q.shape[0] != p.shape[0]:
        raise DimensionMismatch(f"q must have {p.shape[0]} rows, got shape {q.shape}")
    if p.shape[0] < 2:
        raise DimensionMismatch("need at least two hidden states")
    if q.shape[1] < p.shape[0]:
        raise DimensionMismatch("observation alphabet must be at least as large as the state alphabet")
    for name, m in (("p", p), ("q", q)):
        if not np.all(np.isfinite(m)):
            raise NonStochastic(f"{name} has non-finite entries")
        if m.min() < 0 or m.max() > 1:
            raise NonStochastic(f"{name} has entries outside [0, 1]")
        dev = np.abs(m.sum(axis=1) - 1.0).max()
        if dev > ROW_SUM_TOL:
            raise NonStochastic(f"a row of {name} deviates from 1 by {dev:.3g}")
    # renormalise away sub-tolerance drift so downstream identities hold to 1e-12
    p = p / p.sum(axis=1, keepdims=True)
    q = q / q.sum(axis=1, keepdims=True)
    pi = stationary_distribution(p)
    return HmmModel(_frozen(p), _frozen(q), _frozen(pi))


def birkhoff_phi(model: HmmModel) -> float:
    """Exhaustive minimum of ``L[r,j] L[s,i] / (L[s,j] L[r,i])`` over symbols and indices."""
    L = observation_matrices(model)
    if L.min() <= 0:
        return 0.0
    lg = np.log(L)  # (l, k, k), lg[z, r, j]
    # ratio[z, r, s, i, j] = lg[z,r,j] + lg[z,s,i] - lg[z,s,j] - lg[z,r,i]
    a = lg[:, :, None, None, :]
    b = lg[:, None, :, :, None]
    c = lg[:, None, :, None, :]
    d = lg[:, :, None, :, None]
    return float(np.exp((a + b - c - d).min()))


def observation_matrices(model: HmmModel) -> np.ndarray:
    """Stack of all observation matrices, shape (l, k, k); entry [z, i, j] = q(z|j) p(j|i)."""
    return model.q.T[:, None, :] * model.p[None, :, :]


def check_hypotheses(model: HmmModel, rank_tol=DEFAULT_RANK_TOL) -> HypothesisReport:
    min_p = float(model.p.min())
    min_q = float(model.q.min())
    det_p = float(np.linalg.det(model.p))
    sigma_min_q = float(np.linalg.svd(model.q, compute_uv=False)[model.k - 1])
    h1 = min_p > 0 and min_q > 0
    h2 = abs(det_p) > rank_tol and sigma_min_q > rank_tol
    phi = birkhoff_phi(model)
    sq = np.sqrt(phi)
    alpha = (1 - sq) / (1 + sq)
    R = 1.0 / min_q if min_q > 0 else float("inf")
    return HypothesisReport(h1, h2, min_p, min_q, det_p, sigma_min_q, R, phi, float(alpha))


def observation_marginal(model: HmmModel) -> np.ndarray:
    """Stationary law of one observation: ``P(Z_0 = m) = sum_i pi(i) q(m|i)``."""
    return model.pi @ model.q


def read_model(path) -> HmmModel:
    with open(path) as fh:
        data = json.load(fh)
    return model_from_dict(data)


def model_from_dict(data) -> HmmModel:
    if not isinstance(data, dict) or set(data) != {"p", "q"}:
        raise DimensionMismatch('model JSON must be an object with exactly the keys "p" and "q"')
    return build_model(data["p"], data["q"])


def write_model(model: HmmModel, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n")
