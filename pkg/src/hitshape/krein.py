"""Fundamental solutions of the string equation as polynomials in lambda.

Between atoms a solution u(., lambda) of du' = lambda u dm is affine in z;
crossing an atom of mass m at t adds lambda * m * u(t) to its slope.  Starting
from (value, slope) = (0, 1) gives the Dirichlet solution psi, starting from
(1, 0) the reflecting solution phi.  Each is propagated as a pair of
coefficient lists, never by expanding the integral form.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import arith
from .errors import StringError
from .strings import AtomicString, count_increase_points


@dataclass(frozen=True)
class LambdaPolynomial:
    coefficients: tuple
    kind: str
    backend: str

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, lam):
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * lam + c
        return acc

    def floats(self) -> tuple[float, ...]:
        return tuple(float(c) for c in self.coefficients)

    def ratio(self) -> float:
        """c_1 / c_0: the sum of reciprocal root magnitudes."""
        if self.degree < 1:
            return 0.0
        return float(self.coefficients[1] / self.coefficients[0])


@dataclass(frozen=True)
class TraceRecord:
    position: Fraction
    value: LambdaPolynomial
    right_slope: LambdaPolynomial


@dataclass(frozen=True)
class KreinTrace:
    records: tuple[TraceRecord, ...]


def _axpy(u: list, a, v: list) -> list:
    """u + a * v, coefficientwise, padding the shorter list."""
    n = max(len(u), len(v))
    out = []
    for i in range(n):
        ui = u[i] if i < len(u) else 0
        vi = v[i] if i < len(v) else 0
        out.append(ui + a * vi)
    return out


def _trim(p: list, backend: str) -> list:
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p or [arith.zero(backend)]


def _propagate(s: AtomicString, origin: Fraction, value0: int, slope0: int,
               backend: str, kind: str, stop: Fraction | None = None):
    """Run the recursion from ``origin`` up to ``stop`` (default: the target).

    Atoms below ``origin`` are ignored; an atom exactly at ``origin`` is
    crossed immediately.
    """
    stop = s.target if stop is None else stop
    cv = lambda q: arith.convert(q, backend)
    value = [cv(Fraction(value0))]
    slope = [cv(Fraction(slope0))]
    z = origin
    records = []
    # clustered atoms lose ~ a few bits per atom to cancellation downstream
    with arith.working_precision(max(arith.EXTENDED_BITS, 8 * s.n_atoms)):
        for atom in s.atoms:
            if atom.x < origin:
                continue
            if atom.x >= stop:
                break
            value = _axpy(value, cv(atom.x - z), slope)
            kick = [arith.zero(backend)] + [cv(atom.m) * c for c in value]
            slope = _trim(_axpy(slope, 1, kick), backend)
            value = _trim(value, backend)
            z = atom.x
            records.append(TraceRecord(atom.x, LambdaPolynomial(tuple(value), kind, backend),
                                       LambdaPolynomial(tuple(slope), kind, backend)))
        final = _trim(_axpy(value, cv(stop - z), slope), backend)
    return LambdaPolynomial(tuple(final), kind, backend), KreinTrace(tuple(records))


def propagate_psi(s: AtomicString, backend: str | None = None):
    """psi(target, .) with psi(start) = 0 and unit initial slope.

    An atom at ``start`` is multiplied by psi(start) = 0 and so never enters.
    """
    backend = arith.resolve_backend(backend, s.n_atoms)
    return _propagate(s, s.start, 0, 1, backend, "psi")


def propagate_phi(s: AtomicString, backend: str | None = None):
    """phi(target, .) with phi(start) = 1 and zero initial slope.

    1/phi(target, lambda) is the Laplace transform of the hitting time when no
    mass lies below ``start``.
    """
    if s.below_start:
        raise StringError("atoms below start: phi recursion needs a one-sided string "
                          "(use density.phasetype_general)")
    backend = arith.resolve_backend(backend, s.n_atoms)
    return _propagate(s, s.start, 1, 0, backend, "phi")


def propagate_reflected(s: AtomicString, backend: str | None = None):
    """Reflecting solution started at the leftmost atom, read at start and target.

    Returns ``(numerator, denominator)`` such that the hitting-time transform is
    numerator(lambda) / denominator(lambda), for one- and two-sided strings.
    """
    backend = arith.resolve_backend(backend, s.n_atoms)
    left = min(s.atoms[0].x, s.start)
    den, _ = _propagate(s, left, 1, 0, backend, "phi")
    if s.start <= s.atoms[0].x:
        num = LambdaPolynomial((arith.convert(Fraction(1), backend),), "phi", backend)
    else:
        num, _ = _propagate(s, left, 1, 0, backend, "phi", stop=s.start)
    return num, den


def mean_identities(s: AtomicString) -> tuple[Fraction, Fraction]:
    """Exact (E[tau], sum of 1/a_i) for a one-sided string.

    These are the lambda-coefficients of phi and psi / (target - start).
    """
    if s.below_start:
        raise StringError("mean identities need a string without mass below start")
    y, x0 = s.target, s.start
    full = sum(((y - a.x) * a.m for a in s.atoms), Fraction(0))
    mu1 = sum(((a.x - x0) * (y - a.x) * a.m for a in s.atoms if a.x > x0), Fraction(0)) / (y - x0)
    return full, mu1


def expected_hitting_time(s: AtomicString) -> Fraction:
    """E[tau] for any string, two-sided included (difference of linear coefficients)."""
    y = s.target
    total = sum(((y - a.x) * a.m for a in s.atoms), Fraction(0))
    below = sum(((s.start - a.x) * a.m for a in s.atoms if a.x < s.start), Fraction(0))
    return total - below


def degree_check(s: AtomicString) -> tuple[int, int, int]:
    psi, _ = propagate_psi(s)
    phi, _ = _propagate(s, s.start, 1, 0, arith.resolve_backend(None, s.n_atoms), "phi")
    return psi.degree, phi.degree, count_increase_points(s, s.start, s.target)
