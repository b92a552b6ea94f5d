"""Seeded, worker-count independent Monte Carlo plumbing.

Samples are produced in fixed-size blocks. Block ``i`` draws from the child
stream ``SeedSequence(entropy, spawn_key + (i,))`` no matter which worker
runs it, and per-sample values are concatenated in block order before any
reduction. Estimates are therefore bit-identical for every worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np

BLOCK = 1 << 14

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


@dataclass(frozen=True)
class RiskEstimate:
    """A Monte Carlo mean with its standard error and seed provenance."""

    value: float
    std_error: float
    n: int
    seed: Optional[dict] = None
    kind: str = ""
    workers: int = 1
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RiskEstimate":
        return cls(**d)

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.std_error


def seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    """Normalise ints, sequences and generators to a ``SeedSequence``."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        # consume one draw so a generator passed twice yields different runs
        return np.random.SeedSequence(int(seed.integers(0, 2**63)))
    if seed is None:
        return np.random.SeedSequence()
    return np.random.SeedSequence(int(seed))


def child(ss: np.random.SeedSequence, i: int) -> np.random.SeedSequence:
    """The ``i``-th child stream, derived without mutating ``ss``."""
    return np.random.SeedSequence(entropy=ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(i),))


def seed_record(ss: np.random.SeedSequence) -> dict:
    return {"entropy": int(ss.entropy), "spawn_key": [int(k) for k in ss.spawn_key]}


def from_seed_record(rec: dict) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=rec["entropy"], spawn_key=tuple(rec["spawn_key"]))


def sample_blocks(fn: Callable[[np.random.Generator, int], np.ndarray], n: int,
                  ss: np.random.SeedSequence, workers: int = 1) -> np.ndarray:
    """Evaluate ``fn(rng, size)`` on fixed blocks and concatenate in order.

    ``fn`` returns per-sample values with leading axis ``size``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("need at least one Monte Carlo sample")
    sizes = [min(BLOCK, n - start) for start in range(0, n, BLOCK)]

    def job(i):
        return np.asarray(fn(np.random.default_rng(child(ss, i)), sizes[i]))

    if workers <= 1 or len(sizes) == 1:
        parts = [job(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    return np.concatenate(parts, axis=0)


def summarize(samples: np.ndarray, kind: str, ss: np.random.SeedSequence,
              workers: int = 1, **extra) -> RiskEstimate:
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return RiskEstimate(value=mean, std_error=se, n=n, seed=seed_record(ss), kind=kind,
                        workers=int(workers), extra=extra)
