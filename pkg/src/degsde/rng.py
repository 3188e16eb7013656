"""Reproducible Brownian driving noise.

Streams are counter-based (Philox) and keyed by ``(master_seed, path_index)``,
so any path can be regenerated bit-identically no matter how many other paths
were generated in between.  That keeps batch experiments independent of
scheduling order.  Drawing ``n`` values and later redrawing ``2n`` from a
fresh generator with the same key reproduces the first ``n`` exactly, which
is what lets a driving path be extended deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SeedId",
    "BrownianPath",
    "gen_path",
    "extend_path",
    "bridge_crossing_prob",
    "substream",
]

_MASK64 = (1 << 64) - 1
# Top bit of path_index separates the auxiliary uniform stream (used for
# Brownian-bridge crossing decisions) from the Gaussian increment stream.
_UNIFORM_BIT = 1 << 63


@dataclass(frozen=True)
class SeedId:
    """Key of one independent noise stream."""

    master_seed: int
    path_index: int = 0


def substream(master_seed: int, lane: int, index: int) -> SeedId:
    """Seed for path ``index`` of experiment lane ``lane``.

    Lanes partition the 63-bit path-index space so that distinct phases of an
    experiment (main runs, cross-validation runs, ...) never collide.
    """
    if not 0 <= lane < (1 << 22):
        raise ValueError(f"lane out of range: {lane}")
    if not 0 <= index < (1 << 40):
        raise ValueError(f"path index out of range: {index}")
    return SeedId(master_seed, (lane << 40) | index)


def _generator(seed: SeedId, uniform: bool = False) -> np.random.Generator:
    idx = seed.path_index & _MASK64
    if uniform:
        idx |= _UNIFORM_BIT
    key = np.array([seed.master_seed & _MASK64, idx], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class BrownianPath:
    """A discretized driving path: ``n`` i.i.d. N(0, dt) increments from w0."""

    dt: float
    increments: np.ndarray
    w0: float = 0.0
    seed_id: SeedId | None = None

    def __post_init__(self):
        self.increments = np.asarray(self.increments, dtype=float)
        if self.increments.ndim != 1 or self.increments.size < 1:
            raise ValueError("increments must be a nonempty 1-d array")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def n(self) -> int:
        return self.increments.size

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n + 1)

    def values(self) -> np.ndarray:
        out = np.empty(self.n + 1)
        out[0] = self.w0
        np.cumsum(self.increments, out=out[1:])
        out[1:] += self.w0
        return out


def gen_path(seed: SeedId, n: int, dt: float) -> BrownianPath:
    """Generate ``n`` N(0, dt) increments from the stream keyed by ``seed``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    inc = _generator(seed).standard_normal(n) * math.sqrt(dt)
    return BrownianPath(dt=dt, increments=inc, seed_id=seed)


def extend_path(path: BrownianPath, n_new: int) -> BrownianPath:
    """Regenerate ``path`` with ``n_new > n`` increments from its seed stream.

    The existing increments must be an exact prefix of the regenerated ones;
    a handcrafted path (whose increments never came from its seed) is refused
    rather than silently replaced.
    """
    if path.seed_id is None:
        raise ValueError("path carries no seed; cannot extend deterministically")
    if n_new <= path.n:
        raise ValueError(f"n_new must exceed current length {path.n}")
    longer = gen_path(path.seed_id, n_new, path.dt)
    if not np.array_equal(longer.increments[: path.n], path.increments):
        raise ValueError("increments are not a prefix of the seed stream")
    longer.w0 = path.w0
    return longer


def bridge_crossing_prob(w_left, w_right, dt, level):
    """Probability that a Brownian bridge between the endpoints crosses ``level``.

    Equals 1 when the level lies between the endpoints, otherwise
    exp(-2 (w_left - level)(w_right - level) / dt).  Accepts scalars or
    arrays; ``dt`` is the bridge duration times the squared (locally
    constant) diffusion coefficient.
    """
    if np.any(np.asarray(dt) <= 0):
        raise ValueError("dt must be positive")
    prod = (np.asarray(w_left) - level) * (np.asarray(w_right) - level)
    with np.errstate(over="ignore"):
        p = np.where(prod <= 0, 1.0, np.exp(-2.0 * prod / dt))
    if np.ndim(p) == 0:
        return float(p)
    return p


class StreamBank:
    """Block-buffered per-path draws for batch simulations.

    Each path owns two Philox streams (Gaussians and uniforms); values are
    gathered one-per-path per step, and a path's consumption sequence depends
    only on its own history, so results are independent of batch composition.
    """

    def __init__(self, seeds, block: int = 512):
        self._seeds = list(seeds)
        n_paths = len(self._seeds)
        self._ngen = [_generator(s) for s in self._seeds]
        self._ugen = [_generator(s, uniform=True) for s in self._seeds]
        self._block = block
        self._nbuf = np.empty((n_paths, block))
        self._ubuf = np.empty((n_paths, block))
        self._nptr = np.full(n_paths, block, dtype=np.int64)
        self._uptr = np.full(n_paths, block, dtype=np.int64)

    @classmethod
    def for_lane(cls, master_seed: int, lane: int, n_paths: int, block: int = 512):
        return cls([substream(master_seed, lane, i) for i in range(n_paths)], block)

    def seed_of(self, i: int) -> SeedId:
        return self._seeds[i]

    def _gather(self, idx, buf, ptr, draw):
        exhausted = idx[ptr[idx] >= self._block]
        for i in exhausted:
            buf[i] = draw(i)
            ptr[i] = 0
        out = buf[idx, ptr[idx]]
        ptr[idx] += 1
        return out

    def normals(self, idx: np.ndarray) -> np.ndarray:
        """One standard normal per path in ``idx``."""
        return self._gather(
            idx, self._nbuf, self._nptr,
            lambda i: self._ngen[i].standard_normal(self._block),
        )

    def uniforms(self, idx: np.ndarray) -> np.ndarray:
        """One U(0,1) per path in ``idx``."""
        return self._gather(
            idx, self._ubuf, self._uptr,
            lambda i: self._ugen[i].random(self._block),
        )
