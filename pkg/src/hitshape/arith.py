"""Numerical backends for polynomial work.

``rational``  exact gmpy2 ``mpq`` arithmetic
``extended``  gmpy2 ``mpfr`` at :data:`EXTENDED_BITS` bits
``double``    Python floats
"""
from __future__ import annotations

from contextlib import contextmanager
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr, mpq

BACKENDS = ("rational", "extended", "double")
EXTENDED_BITS = 256
# atom counts above this switch the automatic choice from rational to extended
RATIONAL_MAX_ATOMS = 16


def resolve_backend(backend: str | None, n_atoms: int) -> str:
    if backend in (None, "auto"):
        return "rational" if n_atoms <= RATIONAL_MAX_ATOMS else "extended"
    if backend not in BACKENDS:
        raise ValueError(f"unknown precision backend {backend!r}")
    return backend


@contextmanager
def working_precision(bits: int):
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        yield


def convert(value: Fraction, backend: str):
    if backend == "rational":
        return mpq(value.numerator, value.denominator)
    if backend == "extended":
        return mpfr(mpq(value.numerator, value.denominator))
    return float(value)


def zero(backend: str):
    if backend == "rational":
        return mpq(0)
    if backend == "extended":
        return mpfr(0)
    return 0.0


def sign(x) -> int:
    return (x > 0) - (x < 0)
