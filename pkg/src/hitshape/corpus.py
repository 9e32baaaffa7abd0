"""Seeded random strings for property campaigns.

Gaps between consecutive atoms (and from the last atom to the target) and the
masses are log-uniform on [0.1, 10], rounded to six significant digits so the
strings serialize as short decimals.  String ``i`` of a corpus draws from
``default_rng([seed, i])`` and can be regenerated on its own.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .strings import Atom, AtomicString

LOW, HIGH = 0.1, 10.0


def _log_uniform(rng: np.random.Generator, size: int) -> list[Fraction]:
    v = np.exp(rng.uniform(np.log(LOW), np.log(HIGH), size))
    return [Fraction(f"{x:.6g}") for x in v]


def one_sided(seed: int, index: int, min_atoms: int = 2, max_atoms: int = 12) -> AtomicString:
    """Even indices start on an atom; odd ones start below the first atom."""
    rng = np.random.default_rng([seed, index])
    n = int(rng.integers(min_atoms, max_atoms + 1))
    gaps = _log_uniform(rng, n + 1)
    masses = _log_uniform(rng, n)
    x = Fraction(0) if index % 2 == 0 else gaps[0]
    atoms = []
    for i in range(n):
        atoms.append(Atom(x, masses[i]))
        x += gaps[i + 1]
    return AtomicString(tuple(atoms), Fraction(0), x)


def two_sided(seed: int, index: int) -> AtomicString:
    """1-5 atoms below a start atom, 0-6 above it."""
    rng = np.random.default_rng([seed, index, 2])
    below = int(rng.integers(1, 6))
    above = int(rng.integers(0, 7))
    gaps = _log_uniform(rng, below + above + 1)
    masses = _log_uniform(rng, below + 1 + above)
    pos = [Fraction(0)]
    for g in gaps[:below]:
        pos.insert(0, pos[0] - g)
    for g in gaps[below:below + above]:
        pos.append(pos[-1] + g)
    target = pos[-1] + gaps[-1]
    atoms = tuple(Atom(x, m) for x, m in zip(pos, masses))
    return AtomicString(atoms, Fraction(0), target)


def with_interior(seed: int, n_interior: int, start_atom: bool = True) -> AtomicString:
    """One-sided string with exactly ``n_interior`` atoms strictly inside (start, target)."""
    rng = np.random.default_rng([seed, n_interior, 7])
    gaps = _log_uniform(rng, n_interior + 1)
    masses = _log_uniform(rng, n_interior + 1)
    atoms = [Atom(Fraction(0), masses[0])] if start_atom else []
    x = Fraction(0)
    for i in range(n_interior):
        x += gaps[i]
        atoms.append(Atom(x, masses[i + 1]))
    return AtomicString(tuple(atoms), Fraction(0), x + gaps[-1])


def one_sided_corpus(seed: int, count: int, **kw) -> list[AtomicString]:
    return [one_sided(seed, i, **kw) for i in range(count)]


def two_sided_corpus(seed: int, count: int) -> list[AtomicString]:
    return [two_sided(seed, i) for i in range(count)]
