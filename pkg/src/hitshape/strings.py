"""Speed measures in natural scale.

A string is stored as exact rationals: positions and masses arrive as decimal
strings (or ints/floats, converted without rounding) and stay
:class:`fractions.Fraction` until a numerical backend picks them up.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .errors import StringError


def as_fraction(value, what: str = "value") -> Fraction:
    if isinstance(value, bool):
        raise StringError(f"{what}: booleans are not numbers")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise StringError(f"{what}: not finite ({value!r})")
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise StringError(f"{what}: cannot parse {value!r} as a number") from None
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise StringError(f"{what}: unsupported numeric input {value!r}") from None


class Atom(NamedTuple):
    x: Fraction
    m: Fraction


@dataclass(frozen=True)
class ContinuousPiece:
    """dm/dz on (lower, upper), piecewise constant over equal sub-cells."""

    lower: Fraction
    upper: Fraction
    density: tuple[Fraction, ...]

    def __post_init__(self):
        if not self.lower < self.upper:
            raise StringError("piece: lower must be < upper")
        if not self.density:
            raise StringError("piece: empty density")
        if any(d < 0 for d in self.density):
            raise StringError("piece: negative density")
        if not any(d > 0 for d in self.density):
            raise StringError("piece: density identically zero")

    @classmethod
    def make(cls, lower, upper, density) -> "ContinuousPiece":
        if isinstance(density, (list, tuple)):
            dens = tuple(as_fraction(d, "density") for d in density)
        else:
            dens = (as_fraction(density, "density"),)
        return cls(as_fraction(lower, "from"), as_fraction(upper, "to"), dens)

    def mass_between(self, a: Fraction, b: Fraction) -> Fraction:
        width = (self.upper - self.lower) / len(self.density)
        total = Fraction(0)
        for j, d in enumerate(self.density):
            lo = self.lower + j * width
            hi = lo + width
            overlap = min(hi, b) - max(lo, a)
            if overlap > 0:
                total += d * overlap
        return total

    @property
    def total_mass(self) -> Fraction:
        return self.mass_between(self.lower, self.upper)


@dataclass(frozen=True)
class StringSpec:
    """Ingestion form of a speed measure, prior to validation."""

    atoms: tuple[Atom, ...] = ()
    pieces: tuple[ContinuousPiece, ...] = ()
    start: Fraction = Fraction(0)
    target: Fraction = Fraction(1)

    @classmethod
    def from_dict(cls, data: dict) -> "StringSpec":
        if not isinstance(data, dict):
            raise StringError("specification must be a JSON object")
        for key in ("start", "target"):
            if key not in data:
                raise StringError(f"missing field {key!r}")
        atoms = []
        for a in data.get("atoms", []):
            try:
                atoms.append(Atom(as_fraction(a["x"], "atom x"), as_fraction(a["m"], "atom m")))
            except (KeyError, TypeError):
                raise StringError("each atom needs fields 'x' and 'm'") from None
        pieces = []
        for p in data.get("pieces", []):
            try:
                pieces.append(ContinuousPiece.make(p["from"], p["to"], p["density"]))
            except (KeyError, TypeError):
                raise StringError("each piece needs fields 'from', 'to', 'density'") from None
        return cls(tuple(atoms), tuple(pieces),
                   as_fraction(data["start"], "start"), as_fraction(data["target"], "target"))

    def to_dict(self) -> dict:
        return {
            "atoms": [{"x": str(a.x), "m": str(a.m)} for a in self.atoms],
            "pieces": [{"from": str(p.lower), "to": str(p.upper),
                        "density": [str(d) for d in p.density]} for p in self.pieces],
            "start": str(self.start),
            "target": str(self.target),
        }


def load_spec(path) -> StringSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise StringError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StringError(f"malformed JSON in {path}: {exc}") from None
    return StringSpec.from_dict(data)


@dataclass(frozen=True)
class AtomicString:
    """A validated finite atomic speed measure with a start and a target level.

    Atoms below ``start`` are allowed (two-sided strings).  ``target`` lies
    strictly above every atom.
    """

    atoms: tuple[Atom, ...]
    start: Fraction
    target: Fraction
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if not self._checked:
            _check_atoms(self.atoms, self.start, self.target)
            object.__setattr__(self, "_checked", True)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence], start=0, target=1) -> "AtomicString":
        atoms = tuple(Atom(as_fraction(x, "atom x"), as_fraction(m, "atom m")) for x, m in pairs)
        return cls(atoms, as_fraction(start, "start"), as_fraction(target, "target"))

    @property
    def positions(self) -> tuple[Fraction, ...]:
        return tuple(a.x for a in self.atoms)

    @property
    def masses(self) -> tuple[Fraction, ...]:
        return tuple(a.m for a in self.atoms)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def below_start(self) -> tuple[Atom, ...]:
        return tuple(a for a in self.atoms if a.x < self.start)

    @property
    def one_sided(self) -> bool:
        return self.atoms[0].x >= self.start

    @property
    def has_start_atom(self) -> bool:
        return any(a.x == self.start for a in self.atoms)

    @property
    def interior_count(self) -> int:
        return count_increase_points(self, self.start, self.target)

    def to_spec(self) -> StringSpec:
        return StringSpec(self.atoms, (), self.start, self.target)


def _check_atoms(atoms: Sequence[Atom], start: Fraction, target: Fraction) -> None:
    if not target > start:
        raise StringError("target must exceed start")
    for a in atoms:
        if a.m <= 0:
            raise StringError(f"nonpositive mass {a.m} at position {a.x}")
    for prev, nxt in zip(atoms, atoms[1:]):
        if nxt.x == prev.x:
            raise StringError(f"duplicate position {nxt.x}")
        if nxt.x < prev.x:
            raise StringError(f"unsorted positions ({prev.x} before {nxt.x})")
    if atoms and atoms[-1].x >= target:
        raise StringError("target must exceed all atom positions")
    if not any(start <= a.x < target for a in atoms):
        raise StringError("no mass in [start, target)")


def validate(spec: StringSpec) -> AtomicString:
    """Check a specification and return the corresponding :class:`AtomicString`.

    Specifications with continuous pieces are refused here; use
    :func:`to_atomic` to discretize them first.
    """
    if spec.pieces:
        raise StringError("continuous pieces present; discretize before analysis")
    return AtomicString(tuple(spec.atoms), spec.start, spec.target)


def translate_to_origin(s: AtomicString) -> AtomicString:
    shift = s.start
    if shift == 0:
        return s
    atoms = tuple(Atom(a.x - shift, a.m) for a in s.atoms)
    return AtomicString(atoms, Fraction(0), s.target - shift, _checked=True)


def count_increase_points(s: AtomicString, open_lower, open_upper) -> int:
    lo = as_fraction(open_lower)
    hi = as_fraction(open_upper)
    if not lo < hi:
        raise ValueError("open_lower must be < open_upper")
    return sum(1 for a in s.atoms if lo < a.x < hi)


def discretize(piece: ContinuousPiece, k: int, scheme: str = "midpoint") -> list[Atom]:
    """Lump ``piece`` into ``k`` equal cells, one atom per cell at its midpoint.

    Cells carrying no mass produce no atom.
    """
    if scheme != "midpoint":
        raise ValueError(f"unknown scheme {scheme!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    h = (piece.upper - piece.lower) / k
    out = []
    for j in range(k):
        a = piece.lower + j * h
        mass = piece.mass_between(a, a + h)
        if mass > 0:
            out.append(Atom(a + h / 2, mass))
    return out


def to_atomic(spec: StringSpec, k: int = 0) -> AtomicString:
    """Discretize every piece with ``k`` cells and merge with the explicit atoms."""
    if spec.pieces and k < 1:
        raise StringError("string has continuous pieces; a discretization level k >= 1 is required")
    merged: dict[Fraction, Fraction] = {}
    for a in spec.atoms:
        if a.x in merged:
            raise StringError(f"duplicate position {a.x}")
        merged[a.x] = a.m
    for p in spec.pieces:
        for a in discretize(p, k):
            merged[a.x] = merged.get(a.x, Fraction(0)) + a.m
    atoms = tuple(Atom(x, merged[x]) for x in sorted(merged))
    return AtomicString(atoms, spec.start, spec.target)
