"""Stationary sample paths of the hidden chain and its observations.

Seeding contract
----------------
Generator: numpy's ``PCG64`` bit generator seeded with the 64-bit integer seed;
only its raw 64-bit output stream is consumed (``random_raw``), which numpy
keeps stable across versions and platforms.  A raw word ``w`` becomes the
double ``(w >> 11) * 2**-53`` in ``[0, 1)``.

Draw layout for a path of length ``T`` (2T words): word 0 picks ``x_0`` from
``pi``, words ``1..T-1`` the transitions, words ``T..2T-1`` the emissions
``z_0..z_{T-1}``.  Every draw is an inverse-CDF lookup, so two models sharing
``p`` and a seed share the hidden path exactly.

Stream split: task ``i`` of an experiment with master seed ``s`` uses
``derive_seed(s, i)``, the SplitMix64 finaliser applied to
``s + (i + 1) * 0x9E3779B97F4A7C15 (mod 2**64)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import WindowTooLong
from .model import HmmModel

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, task: int) -> int:
    return splitmix64(int(master_seed) + (int(task) + 1) * GOLDEN)


def uniforms(seed: int, n: int) -> np.ndarray:
    raw = np.random.PCG64(int(seed) & MASK64).random_raw(n)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True, eq=False)
class ObservationWindow:
    """Observation symbols (1-indexed); element ``j`` sits at time ``origin + j``."""

    symbols: np.ndarray
    origin: int

    def __len__(self):
        return len(self.symbols)

    @property
    def times(self):
        return np.arange(self.origin, self.origin + len(self.symbols))

    def at(self, t: int) -> int:
        j = t - self.origin
        if not 0 <= j < len(self.symbols):
            raise IndexError(f"time {t} outside window")
        return int(self.symbols[j])

    def shifted(self, steps: int) -> "ObservationWindow":
        """Same symbols re-timed ``steps`` later (positive) or earlier."""
        return ObservationWindow(self.symbols, self.origin + steps)

    def past_stream(self) -> np.ndarray:
        """Symbols in decreasing time order, starting from the last one."""
        return np.ascontiguousarray(self.symbols[::-1])


@dataclass(frozen=True, eq=False)
class SamplePath:
    x: np.ndarray
    z: np.ndarray
    seed: int

    def __len__(self):
        return len(self.z)


def _cdf(rows):
    c = np.cumsum(rows, axis=-1)
    c[..., -1] = 1.0
    return c


def sample_path(model: HmmModel, T: int, seed: int) -> SamplePath:
    """Stationary path of length ``T``: ``x_0 ~ pi``, then Markov transitions and emissions."""
    if T < 1:
        raise ValueError("T must be at least 1")
    u = uniforms(seed, 2 * T)
    x, z = _kernels.sample_chain(_cdf(model.pi), _cdf(model.p), _cdf(model.q), u)
    return SamplePath(x + 1, z + 1, int(seed))


def past_window(path: SamplePath, n: int) -> ObservationWindow:
    """The last ``n`` observations, re-timed to ``-n, ..., -1``."""
    if n < 1 or n > len(path):
        raise WindowTooLong(f"window length {n} not in [1, {len(path)}]")
    return ObservationWindow(np.array(path.z[-n:]), -n)


def future_window(path: SamplePath, n: int) -> ObservationWindow:
    """The first ``n`` observations, re-timed to ``1, ..., n``."""
    if n < 1 or n > len(path):
        raise WindowTooLong(f"window length {n} not in [1, {len(path)}]")
    return ObservationWindow(np.array(path.z[:n]), 1)


def write_path_csv(path: SamplePath, fh):
    fh.write("t,x,z\n")
    for t, (x, z) in enumerate(zip(path.x.tolist(), path.z.tolist())):
        fh.write(f"{t},{x},{z}\n")
