"""Two-state chain observed through a binary symmetric channel with flip rate eps.

States and symbols are ``{0, 1}`` throughout this module.  ``to_hmm`` and
``to_binary`` convert to and from the 1-indexed conventions used elsewhere.

The observation matrix splits as ``L(z0) = M[z0] + eps A[z0]``.  Along a
forward symbol sequence ``z1, z2, ...`` the vector ``g = e[z1] + eps h f[z1]``
satisfies ``L(z1) g(next) = rho g`` where ``h`` is the fixed point of

    h = (u1 + eps u2 h') / (u3 + eps u4 h'),      h' = h at the next position,

and the coefficients ``u1..u4`` depend only on ``(z1, z2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._stats import batch_means_se
from .errors import (
    ContractionFailure,
    DegenerateParameters,
    InvalidEpsilon,
    OutsideValidity,
    WindowTooShort,
)
from .model import HmmModel, build_model
from .simulate import ObservationWindow, sample_path

DEFAULT_DEPTH = 40
MODES = ("rigorous", "empirical")
NOISE_ULPS = 1024


def binary_entropy(x):
    """``x log x + (1 - x) log(1 - x)`` (non-positive; note the sign convention)."""
    return x * np.log(x) + (1 - x) * np.log1p(-x)


@dataclass(frozen=True, eq=False)
class PerturbModel:
    p0: float
    p1: float
    epsilon: float
    beta: float
    D: float
    eps0: float
    P: np.ndarray
    Q: np.ndarray
    M: np.ndarray  # M[b] (2x2)
    A: np.ndarray  # A[b] (2x2)
    e: np.ndarray  # e[b] (2,)
    f: np.ndarray  # f[b] (2,)
    pi: np.ndarray
    U: np.ndarray = field(repr=False)  # U[z1, z2] = (u1, u2, u3, u4)

    def L(self, z0: int) -> np.ndarray:
        return self.M[z0] + self.epsilon * self.A[z0]

    @property
    def det_P(self) -> float:
        return self.p0 - self.p1


def rigorous_eps0(beta: float, tol=1e-30) -> float:
    """Largest eps meeting both fixed-point inequalities, by bisection.

    Self-map:     (2/beta^2) (4 + 4 eps D) / den <= D
    Contraction:  eps (2/beta^2) 16 / den^2 <= 1/2
    with ``den = beta^3 - 4 eps D - 4 eps - 4 eps^2 > 0`` and ``D = 16 beta^-5``.
    """
    D = 16.0 / beta**5

    def ok(eps):
        den = beta**3 - 4 * eps * D - 4 * eps - 4 * eps**2
        if den <= 0:
            return False
        self_map = (2 / beta**2) * (4 + 4 * eps * D) / den <= D
        contraction = eps * (2 / beta**2) * 16 / den**2 <= 0.5
        return self_map and contraction

    lo, hi = 0.0, beta**3 / (4 * D + 4)
    while ok(hi):  # pragma: no cover - hi already violates den > 0 or a bound
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(hi, 1e-300):
            break
    return lo


def build_perturb(p0, p1, epsilon) -> PerturbModel:
    p0, p1, eps = float(p0), float(p1), float(epsilon)
    beta = min(p0, p1, 1 - p0, 1 - p1)
    if not beta > 0:
        raise DegenerateParameters("need 0 < p0, p1 < 1")
    if p0 == p1:
        raise DegenerateParameters("p0 == p1 makes the chain i.i.d.")
    if not (0 <= eps < 1) or eps == 0.5:
        raise InvalidEpsilon(f"epsilon must lie in [0, 1) and differ from 1/2, got {eps}")
    P = np.array([[p0, 1 - p0], [p1, 1 - p1]])
    Q = np.array([[1 - eps, eps], [eps, 1 - eps]])
    M = np.array([[[p0, 0.0], [p1, 0.0]],
                  [[0.0, 1 - p0], [0.0, 1 - p1]]])
    base = np.array([[p0, -(1 - p0)], [p1, -(1 - p1)]])
    A = np.array([-base, base])
    e = np.array([[p0, p1], [1 - p0, 1 - p1]])
    f = np.array([[-p1, p0], [-(1 - p1), 1 - p0]])
    pi = np.array([p1, 1 - p0]) / (1 - p0 + p1)
    U = np.empty((2, 2, 4))
    for z1 in range(2):
        ratio = (e[z1] @ e[z1]) / (f[z1] @ f[z1])
        for z2 in range(2):
            Ae, Af = A[z1] @ e[z2], A[z1] @ f[z2]
            U[z1, z2] = (ratio * (Ae @ f[z1]),
                         ratio * (Af @ f[z1]),
                         (M[z1] @ e[z2]) @ e[z1] + eps * (Ae @ e[z1]),
                         (M[z1] @ f[z2]) @ e[z1] + eps * (Af @ e[z1]))
    return PerturbModel(p0, p1, eps, beta, 16.0 / beta**5, rigorous_eps0(beta), P, Q, M, A,
                        e, f, pi, U)


def to_hmm(pm: PerturbModel) -> HmmModel:
    """Same chain as an :class:`HmmModel`: state/symbol ``b`` becomes ``b + 1``."""
    return build_model(pm.P, pm.Q)


def to_binary(symbols) -> np.ndarray:
    s = np.asarray(symbols, dtype=np.int64) - 1
    if s.size and (s.min() < 0 or s.max() > 1):
        raise ValueError("symbols must be 1 or 2")
    return s


def fixed_point_map(pm: PerturbModel, z1, z2, h_next):
    u1, u2, u3, u4 = pm.U[z1, z2].T if np.ndim(z1) else pm.U[z1, z2]
    eps = pm.epsilon
    return (u1 + eps * u2 * h_next) / (u3 + eps * u4 * h_next)


def rho_eval(pm: PerturbModel, z1, z2, h_next):
    """Eigenvalue ``rho`` for the symbol pair (z1, z2) given ``h`` at the next position."""
    e1, e2, f2 = pm.e[z1], pm.e[z2], pm.f[z2]
    M, A, eps = pm.M[z1], pm.A[z1], pm.epsilon
    bracket = ((M @ e2) @ e1 + eps * h_next * ((M @ f2) @ e1)
               + eps * ((A @ e2) @ e1) + eps**2 * h_next * ((A @ f2) @ e1))
    return bracket / (e1 @ e1)


def rho_zeroth(pm: PerturbModel, z1, z2) -> float:
    e1 = pm.e[z1]
    return float((pm.M[z1] @ pm.e[z2]) @ e1 / (e1 @ e1))


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    h_value: float
    iterations: int
    error_bound: float
    window_used: np.ndarray
    contraction_estimate: float
    iterates: np.ndarray  # h after 0..m iterations, at the first position
    max_abs_iterate: float
    mode: str


def _check_mode(pm, mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "rigorous" and pm.epsilon > pm.eps0:
        raise OutsideValidity(f"epsilon {pm.epsilon:g} exceeds the provable threshold {pm.eps0:.3g}")


def solve_h(pm: PerturbModel, forward_window: ObservationWindow, m=DEFAULT_DEPTH,
            mode="empirical") -> FixedPointResult:
    """Iterate the fixed-point map ``m`` times from ``h = 0`` along ``z_1 .. z_{m+1}``.

    ``H[j, i]`` is the j-th iterate at position ``i`` (symbols ``z_{i+1}, z_{i+2}``).
    The contraction estimate is the largest ratio ``d[j+1] / d[j]`` where ``d[j]``
    is the sup over positions of ``|H[j] - H[j-1]|``.
    """
    _check_mode(pm, mode)
    if len(forward_window) < m + 1:
        raise WindowTooShort(f"need {m + 1} symbols, got {len(forward_window)}")
    z = to_binary(forward_window.symbols[: m + 1])
    H = np.zeros((m + 1, m + 1))
    for j in range(1, m + 1):
        i = np.arange(0, m - j + 1)
        H[j, i] = fixed_point_map(pm, z[i], z[i + 1], H[j - 1, i + 1])
    # sup-norm distance between successive iterates; rounding-level values carry no information
    d = np.array([np.abs(H[j, : m - j + 1] - H[j - 1, : m - j + 1]).max() for j in range(1, m + 1)])
    noise = NOISE_ULPS * np.finfo(float).eps * max(1.0, float(np.abs(H).max()))
    ratios = [0.0] + [d[j + 1] / d[j] for j in range(m - 1) if d[j] > noise]
    c = max(ratios)
    if mode == "rigorous":
        bound = pm.D * 0.5**m
    else:
        if c >= 1:
            raise ContractionFailure(f"observed contraction factor {c:.3g} >= 1")
        bound = pm.D * c**m
    iterates = H[:, 0].copy()
    return FixedPointResult(float(H[m, 0]), m, float(bound), np.asarray(forward_window.symbols[: m + 1]),
                            float(c), iterates, float(np.abs(H).max()), mode)


@dataclass(frozen=True)
class EigenCheck:
    residual: float
    error_bound: float
    constant: float  # residual / (error_bound * eps)
    rho: float
    g: tuple
    g_next: tuple


def verify_eigenrelation(pm: PerturbModel, window: ObservationWindow, m=DEFAULT_DEPTH,
                         mode="empirical") -> EigenCheck:
    """Residual of ``L(z1) g(next) = rho g`` with ``h`` solved independently at offsets 0 and 1."""
    if len(window) < m + 2:
        raise WindowTooShort(f"need {m + 2} symbols, got {len(window)}")
    here = solve_h(pm, window, m, mode)
    there = solve_h(pm, ObservationWindow(window.symbols[1:], window.origin + 1), m, mode)
    z1, z2 = to_binary(window.symbols[:2])
    eps = pm.epsilon
    g = pm.e[z1] + eps * here.h_value * pm.f[z1]
    g_next = pm.e[z2] + eps * there.h_value * pm.f[z2]
    rho = rho_eval(pm, z1, z2, there.h_value)
    residual = float(np.linalg.norm(pm.L(z1) @ g_next - rho * g))
    err = max(here.error_bound, there.error_bound)
    const = residual / (err * eps) if err * eps > 0 else float("nan")
    return EigenCheck(residual, err, const, float(rho), tuple(g), tuple(g_next))


@dataclass(frozen=True)
class BirkhoffEstimate:
    value: float
    std_error: float
    n_steps: int
    min_rho: float
    max_abs_h: float


def lambda1_birkhoff(pm: PerturbModel, N: int, seed: int, m=DEFAULT_DEPTH,
                     mode="empirical") -> BirkhoffEstimate:
    """Top exponent as the path average of ``log rho`` with ``h`` truncated at depth ``m``."""
    _check_mode(pm, mode)
    path = sample_path(to_hmm(pm), N + m + 1, seed)
    z = to_binary(path.z)
    # runtime contraction check on the leading stretch of the path
    solve_h(pm, ObservationWindow(path.z[: m + 1], 1), m, mode)
    h_next = _kernels.h_truncated(pm.U, pm.epsilon, np.ascontiguousarray(z[1:]), m)[:N]
    z1, z2 = z[:N], z[1:N + 1]
    e1 = pm.e[z1]
    Me2 = np.einsum("nij,nj->ni", pm.M[z1], pm.e[z2])
    Mf2 = np.einsum("nij,nj->ni", pm.M[z1], pm.f[z2])
    Ae2 = np.einsum("nij,nj->ni", pm.A[z1], pm.e[z2])
    Af2 = np.einsum("nij,nj->ni", pm.A[z1], pm.f[z2])
    eps = pm.epsilon

    def dot(x, y):
        return np.einsum("ni,ni->n", x, y)

    rho = (dot(Me2, e1) + eps * h_next * dot(Mf2, e1) + eps * dot(Ae2, e1)
           + eps**2 * h_next * dot(Af2, e1)) / dot(e1, e1)
    if rho.min() <= 0:
        raise ContractionFailure("rho is not positive along the path; eps too large")
    lr = np.log(rho)
    return BirkhoffEstimate(float(lr.mean()), float(batch_means_se(lr)[0]), N,
                            float(rho.min()), float(np.abs(h_next).max()))


def lambda1_zeroth(pm: PerturbModel) -> float:
    """``pi(0) H(p0) + pi(1) H(p1)``, the eps -> 0 limit of the top exponent."""
    return float(pm.pi[0] * binary_entropy(pm.p0) + pm.pi[1] * binary_entropy(pm.p1))


@dataclass(frozen=True)
class RateBound:
    bound: float  # leading term of the gap, without the O(eps) remainder
    ledet: float  # exact lambda1 + lambda2


def binary_rate_bound(pm: PerturbModel) -> RateBound:
    eps = pm.epsilon
    with np.errstate(divide="ignore"):
        log_eps = np.log(eps)
    logdet = np.log(abs(pm.det_P))
    return RateBound(float(log_eps + logdet - 2 * lambda1_zeroth(pm)),
                     float(log_eps + np.log1p(-eps) + logdet))
