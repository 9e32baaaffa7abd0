"""Monte Carlo oracle: the gap diffusion as a birth-death chain on the atoms.

For an atomic speed measure the time-changed Brownian motion only ever sits on
atoms.  From atom x_i it waits an exponential time with rate
right_i + left_i, where right_i = 1 / (m_i (x_{i+1} - x_i)) and
left_i = 1 / (m_i (x_i - x_{i-1})), then jumps to a neighbour with
probability proportional to the corresponding rate.  The leftmost atom only
jumps right; a jump right from the last atom hits the target.

Sampling does not walk the chain step by step (see :func:`_simulate_chunk`);
:func:`simulate_walk` does, and serves as a reference in tests.

Samples are generated in chunks of :data:`CHUNK_SIZE`; chunk ``i`` draws from
its own Philox stream keyed by the seed with counter ``i``, so output does not
depend on how chunks are spread over threads.
"""
from __future__ import annotations

import csv
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy
import scipy.stats

from . import __version__
from .density import ExpSumDensity
from .errors import StringError
from .strings import AtomicString

CHUNK_SIZE = 2 ** 14
SEED_BITS = 64


@dataclass(frozen=True)
class ChainSpec:
    states: tuple[Fraction, ...]
    right_rate: np.ndarray
    left_rate: np.ndarray
    target: Fraction
    start_index: int

    def __post_init__(self):
        if np.any(self.right_rate <= 0) or np.any(self.left_rate[1:] <= 0):
            raise ValueError("chain rates must be positive")
        if self.left_rate[0] != 0:
            raise ValueError("leftmost state has no left rate")

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def total_rate(self) -> np.ndarray:
        return self.right_rate + self.left_rate


def build_chain(s: AtomicString) -> ChainSpec:
    """Chain on the atoms of ``s``.

    A start below the leftmost atom is mapped to the leftmost atom: the time
    change spends no time where there is no mass.
    """
    x = [a.x for a in s.atoms]
    m = [a.m for a in s.atoms]
    if x[-1] >= s.target:
        raise StringError("target must exceed every state")
    if s.start <= x[0]:
        start = 0
    elif s.start in x:
        start = x.index(s.start)
    else:
        raise StringError("start must be an atom or lie below the leftmost atom")
    ext = x + [s.target]
    right = np.array([float(1 / (m[i] * (ext[i + 1] - ext[i]))) for i in range(len(x))])
    left = np.array([0.0] + [float(1 / (m[i] * (x[i] - x[i - 1]))) for i in range(1, len(x))])
    return ChainSpec(tuple(x), right, left, s.target, start)


@dataclass(frozen=True)
class SampleSet:
    samples: np.ndarray
    seed: int
    count: int
    chunk_size: int = CHUNK_SIZE

    def __len__(self):
        return self.count

    def mean(self) -> float:
        return float(self.samples.mean())

    def var(self) -> float:
        return float(self.samples.var(ddof=1))


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, chunk, 0]))


def _simulate_chunk(c: ChainSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact absorption times, sampled level by level.

    The chain is skip-free to the right, so reaching the target from state k
    means crossing j -> j+1 for each j >= k.  Every left jump out of j + 1
    forces one more crossing j -> j+1, so with p_j = right_j / total_j the
    number of crossings of j -> j+1 is

        P_j = [j >= k] + F_{j+1},   F_j ~ NegBinomial(P_j, p_j) (failures),

    and state j is visited P_j + F_j times.  Holding times are independent of
    the jump choices, so the total time spent in j is Gamma(P_j + F_j, total_j).
    """
    total = c.total_rate
    p_right = c.right_rate / total
    times = np.zeros(n)
    failures = np.zeros(n, dtype=np.int64)
    for j in range(c.n_states - 1, -1, -1):
        passes = failures + (1 if j >= c.start_index else 0)
        if p_right[j] >= 1.0:
            failures = np.zeros(n, dtype=np.int64)
        else:
            live = passes > 0
            failures = np.zeros(n, dtype=np.int64)
            failures[live] = rng.negative_binomial(passes[live], p_right[j])
        visits = passes + failures
        live = visits > 0
        times[live] += rng.standard_gamma(visits[live]) / total[j]
    return times


def simulate_walk(c: ChainSpec, n_samples: int, seed: int) -> np.ndarray:
    """Reference sampler that follows every jump (slow on large strings)."""
    rng = chunk_generator(seed, 0)
    total = c.total_rate
    p_right = c.right_rate / total
    last = c.n_states - 1
    times = np.zeros(n_samples)
    state = np.full(n_samples, c.start_index, dtype=np.int64)
    active = np.arange(n_samples)
    while active.size:
        st = state[active]
        times[active] += rng.standard_exponential(active.size) / total[st]
        up = rng.random(active.size) < p_right[st]
        state[active] = st + np.where(up, 1, -1)
        active = active[~(up & (st == last))]
    return times


def simulate_hitting(c: ChainSpec, n_samples: int, seed: int, workers: int = 1,
                     chunk_size: int = CHUNK_SIZE) -> SampleSet:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not 0 <= seed < 2 ** SEED_BITS:
        raise ValueError("seed must be a 64-bit unsigned integer")
    n_chunks = math.ceil(n_samples / chunk_size)
    sizes = [min(chunk_size, n_samples - i * chunk_size) for i in range(n_chunks)]

    def run(i):
        return _simulate_chunk(c, sizes[i], chunk_generator(seed, i))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(i) for i in range(n_chunks)]
    return SampleSet(np.concatenate(parts), seed, n_samples, chunk_size)


def ks_statistic(samples: SampleSet | np.ndarray, analytic: ExpSumDensity) -> float:
    """sup |F_n - F| between the empirical and the analytic distribution function."""
    x = np.sort(np.asarray(samples.samples if isinstance(samples, SampleSet) else samples))
    n = x.size
    if n == 0:
        raise ValueError("empty sample set")
    F = analytic.cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float
    passed: bool


def ks_test(samples: SampleSet, analytic: ExpSumDensity, alpha: float = 0.01) -> KsResult:
    stat = ks_statistic(samples, analytic)
    p = float(scipy.stats.kstwo.sf(stat, len(samples)))
    return KsResult(stat, p, p >= alpha)


def mean_zscore(samples: SampleSet, mean: float) -> float:
    return (samples.mean() - mean) / math.sqrt(samples.var() / len(samples))


def manifest(s: AtomicString, n_samples: int, seed: int, extra: dict | None = None) -> dict:
    """Everything needed to regenerate a sample set bit for bit."""
    out = {
        "tool": "hitshape",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "string": s.to_spec().to_dict(),
        "n_samples": n_samples,
        "seed": seed,
        "sampler": "level-crossing",
        "bit_generator": "Philox",
        "chunk_size": CHUNK_SIZE,
        "chunk_seeding": "Philox(key=seed, counter=[0, 0, chunk_index, 0])",
    }
    if extra:
        out.update(extra)
    return out


def write_samples_csv(path, samples: SampleSet) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau"])
        for v in samples.samples:
            w.writerow([repr(float(v))])
