"""Exponential rates of hitting laws.

Two independent routes:

* :func:`real_roots` isolates the (negative, real, simple) zeros of a Krein
  polynomial with a Sturm chain, refines them by bisection and certifies every
  bracket by an exact sign change of the polynomial itself.
* :func:`generator_eigenrates` diagonalises the killed birth-death generator
  after the similarity ``diag(sqrt(m)) (-Q) diag(sqrt(m))^-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np
import scipy.linalg
from gmpy2 import mpfr, mpq

from . import arith
from .errors import EigenError, RateCollisionError, RootIsolationError, StringError
from .krein import LambdaPolynomial
from .strings import AtomicString

COLLISION_RTOL = 1e-9
RESIDUAL_TOL = 1e-8
_PRECISION_LADDER = (128, 256, 512, 1024, 2048, 4096)


@dataclass(frozen=True)
class RateSet:
    rates: tuple[float, ...]
    source: str
    residuals: tuple[float, ...] = ()
    # certified sign-change brackets and the polynomial in x = -lambda
    brackets: tuple = field(default=(), repr=False, compare=False)
    reflected: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        r = self.rates
        if any(x <= 0 for x in r) or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("rates must be positive and strictly increasing")

    def __len__(self):
        return len(self.rates)

    def __iter__(self):
        return iter(self.rates)

    def __getitem__(self, i):
        return self.rates[i]


# -- Sturm machinery (generic over mpq / mpfr / float / Fraction) ----------

def poly_eval(p, x):
    acc = 0
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _poly_rem(a: list, b: list) -> list:
    a = list(a)
    lead = b[-1]
    while len(a) >= len(b):
        f = a[-1] / lead
        shift = len(a) - len(b)
        for i in range(len(b) - 1):
            a[shift + i] -= f * b[i]
        a.pop()
        while a and a[-1] == 0:
            a.pop()
    return a


def sturm_chain(p: list) -> list[list]:
    """Sturm sequence p, p', -rem(p, p'), ... with coefficients low to high."""
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    chain = [p]
    if len(p) > 1:
        chain.append([i * c for i, c in enumerate(p)][1:])
        while True:
            r = _poly_rem(chain[-2], chain[-1])
            if not r:
                break
            chain.append([-c for c in r])
            if len(r) == 1:
                break
    return chain


def sign_variations(values) -> int:
    signs = [arith.sign(v) for v in values]
    signs = [s for s in signs if s]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def variations_at(chain, x) -> int:
    if x == math.inf:
        return sign_variations([q[-1] for q in chain])
    return sign_variations([poly_eval(q, x) for q in chain])


def sturm_count(chain, lo, hi) -> int:
    """Number of distinct real roots in (lo, hi]."""
    return variations_at(chain, lo) - variations_at(chain, hi)


def positive_root_bounds(q: list) -> tuple[float, float]:
    """Fujiwara-type enclosure of |roots|, returned as (lower, upper)."""
    logs = []
    for c in q:
        logs.append(None if c == 0 else float(arith_log_abs(c)))
    d = len(q) - 1
    lead = logs[d]
    upper = max((logs[d - k] - lead) / k for k in range(1, d + 1) if logs[d - k] is not None)
    low = logs[0]
    lower = max((logs[k] - low) / k for k in range(1, d + 1) if logs[k] is not None)
    return 0.25 * math.exp(-lower), 4.0 * math.exp(upper)


def arith_log_abs(c) -> float:
    if isinstance(c, float):
        return math.log(abs(c))
    if isinstance(c, Fraction):
        c = mpq(c.numerator, c.denominator)
    with arith.working_precision(64):
        return float(gmpy2.log(abs(mpfr(c))))


class _PrecisionLoss(Exception):
    pass


class _Collision(_PrecisionLoss):
    pass


def _isolate(q_exact: list, bits: int | None, require_all: bool, collision_rtol: float):
    """Brackets (lo, hi) around every positive root of q, each exactly sign-certified."""
    d = len(q_exact) - 1
    point = lambda x: x
    if bits is None:
        q = [float(c) for c in q_exact]
    elif bits == "exact":
        q = list(q_exact)
        point = Fraction if isinstance(q[0], Fraction) else mpq
    else:
        with arith.working_precision(bits):
            q = [mpfr(c) for c in q_exact]

    def ctx():
        return arith.working_precision(bits if isinstance(bits, int) else 53)

    with ctx():
        chain = sturm_chain(q)
        lo, hi = positive_root_bounds(q)
        total = sturm_count(chain, point(lo), point(hi))
        if require_all and total != d:
            raise _PrecisionLoss(f"counted {total} positive roots of a degree-{d} polynomial")
        if len(chain[-1]) > 1:
            raise _PrecisionLoss("polynomial not squarefree at working precision")
        stack = [(lo, hi, variations_at(chain, point(lo)), variations_at(chain, point(hi)))]
        brackets = []
        while stack:
            a, b, va, vb = stack.pop()
            n = va - vb
            if n <= 0:
                continue
            if n == 1:
                brackets.append((a, b))
                continue
            if b / a - 1.0 < collision_rtol:
                raise _Collision(f"{n} roots within relative width {b / a - 1.0:.2e} near {a:.6g}")
            mid = math.sqrt(a) * math.sqrt(b)
            if poly_eval(q, point(mid)) == 0:
                mid *= 1.0 + 1e-7
            vm = variations_at(chain, point(mid))
            stack.append((mid, b, vm, vb))
            stack.append((a, mid, va, vm))
        brackets.sort()
        refined = []
        for a, b in brackets:
            sa = arith.sign(poly_eval(q, point(a)))
            sb = arith.sign(poly_eval(q, point(b)))
            if sa == 0 or sb == 0 or sa == sb:
                raise _PrecisionLoss("bracket without sign change")
            for _ in range(200):
                mid = math.sqrt(a) * math.sqrt(b)
                if not a < mid < b:
                    break
                sm = arith.sign(poly_eval(q, point(mid)))
                if sm == 0:
                    break
                if sm == sa:
                    a = mid
                else:
                    b = mid
            refined.append((a, b))
    # exact certification with the unrounded coefficients
    for a, b in refined:
        sa = arith.sign(_eval_exact(q_exact, a))
        sb = arith.sign(_eval_exact(q_exact, b))
        if sa == sb or sa == 0 or sb == 0:
            raise _PrecisionLoss("certification failed on refined bracket")
    return refined


def _eval_exact(q_exact, x: float):
    if q_exact and isinstance(q_exact[0], type(mpq(0))):
        return poly_eval(q_exact, mpq(x))
    if q_exact and isinstance(q_exact[0], Fraction):
        return poly_eval(q_exact, Fraction(x))
    if q_exact and isinstance(q_exact[0], float):
        return poly_eval(q_exact, x)
    with arith.working_precision(max(c.precision for c in q_exact) + 64):
        return poly_eval(q_exact, mpfr(x))


def positive_roots(q_exact: list, backend: str, require_all: bool = True,
                   collision_rtol: float = COLLISION_RTOL) -> list[tuple[float, float]]:
    """Certified brackets around the positive roots of ``q`` (low-to-high coefficients)."""
    d = len(q_exact) - 1
    if backend == "double":
        ladder = [None]
    else:
        first = max(128, 16 * d)
        ladder = [b for b in _PRECISION_LADDER if b >= first] or [first]
        if backend == "rational":
            ladder.append("exact")
    last = None
    collisions = 0
    for bits in ladder:
        try:
            return _isolate(q_exact, bits, require_all, collision_rtol)
        except _Collision as exc:
            # a miscounted chain mimics a collision; only persistence is believed
            collisions += 1
            last = exc
            if collisions >= 2 or bits == "exact":
                raise RateCollisionError(str(exc)) from None
        except _PrecisionLoss as exc:
            collisions = 0
            last = exc
    raise RootIsolationError(f"root isolation failed: {last}")


def reflect(coeffs) -> list:
    """Coefficients of lambda -> p(-lambda), without rounding."""
    bits = max((c.precision for c in coeffs if isinstance(c, type(mpfr(0)))), default=53)
    with arith.working_precision(bits):
        return [c if k % 2 == 0 else -c for k, c in enumerate(coeffs)]


def real_roots(p: LambdaPolynomial, collision_rtol: float = COLLISION_RTOL) -> RateSet:
    """Negated zeros of ``p`` as a strictly increasing :class:`RateSet`."""
    if p.degree < 1:
        raise ValueError("no roots requested of constant")
    q = reflect(p.coefficients)
    brackets = positive_roots(q, p.backend, True, collision_rtol)
    rates = [math.sqrt(a) * math.sqrt(b) for a, b in brackets]
    rates = [min(max(r, a), b) for r, (a, b) in zip(rates, brackets)]
    for r1, r2 in zip(rates, rates[1:]):
        if r2 / r1 - 1.0 < collision_rtol:
            raise RateCollisionError(f"rates {r1!r} and {r2!r} collide")
    residuals = []
    with arith.working_precision(256):
        qm = [mpfr(c) for c in q]
        for r in rates:
            x = mpfr(r)
            num = abs(poly_eval(qm, x))
            den = sum(abs(c) * x ** k for k, c in enumerate(qm))
            residuals.append(float(num / den))
    if max(residuals) > RESIDUAL_TOL:
        raise RootIsolationError(f"root residual {max(residuals):.2e} above tolerance")
    source = "psi_roots" if p.kind == "psi" else "phi_roots"
    return RateSet(tuple(rates), source, tuple(residuals), tuple(brackets), tuple(q))


# -- generator route -------------------------------------------------------

def jacobi_form(s: AtomicString):
    """Diagonal and off-diagonal of the symmetrized killed generator -D Q D^-1."""
    # gaps from exact arithmetic, then rounded once
    gaps = [float(s.atoms[i + 1].x - s.atoms[i].x) for i in range(s.n_atoms - 1)]
    gaps.append(float(s.target - s.atoms[-1].x))
    m = [float(a.m) for a in s.atoms]
    n = len(m)
    diag = np.empty(n)
    for i in range(n):
        right = 1.0 / (m[i] * gaps[i])
        left = 1.0 / (m[i] * gaps[i - 1]) if i > 0 else 0.0
        diag[i] = right + left
    off = np.array([-1.0 / (gaps[i] * math.sqrt(m[i] * m[i + 1])) for i in range(n - 1)])
    return diag, off


def generator_eigenrates(s: AtomicString) -> RateSet:
    if s.below_start:
        raise StringError("generator eigenrates are defined here for one-sided strings")
    diag, off = jacobi_form(s)
    try:
        w, v = scipy.linalg.eigh_tridiagonal(diag, off)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenError(f"tridiagonal eigensolver failed: {exc}") from None
    full = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    res = np.linalg.norm(full @ v - v * w, axis=0)
    return RateSet(tuple(float(r) for r in w), "generator_eigen", tuple(float(r) for r in res))


@dataclass(frozen=True)
class InterlacingCertificate:
    ok: bool
    chain: tuple[float, ...]

    def __bool__(self):
        return self.ok


def check_interlacing(a, b, extra=()) -> InterlacingCertificate:
    """Strict alternation of ``b`` with the merged set ``a`` plus ``extra``.

    ``len(b) == len(merged) + 1`` gives b1 < c1 < b2 < ... < b_{n+1};
    ``len(b) == len(merged)`` gives b1 < c1 < ... < bn < cn.
    """
    merged = sorted(list(a) + list(extra))
    b = list(b)
    if len(b) not in (len(merged), len(merged) + 1):
        raise ValueError(f"cannot interlace {len(b)} with {len(merged)} values")
    chain = []
    for i, bi in enumerate(b):
        chain.append(bi)
        if i < len(merged):
            chain.append(merged[i])
    ok = all(u < v for u, v in zip(chain, chain[1:]))
    return InterlacingCertificate(ok, tuple(chain))


def _sign_at(q_exact, x) -> int:
    """Sign of q at a rational point, exactly (or at ample precision for mpfr)."""
    c0 = q_exact[0]
    if isinstance(c0, float):
        return arith.sign(poly_eval([Fraction(c) for c in q_exact], Fraction(x)))
    if isinstance(c0, Fraction):
        return arith.sign(poly_eval(q_exact, Fraction(x)))
    if isinstance(c0, type(mpq(0))):
        return arith.sign(poly_eval(q_exact, mpq(x)))
    with arith.working_precision(max(c.precision for c in q_exact) + 128):
        return arith.sign(poly_eval(q_exact, mpfr(mpq(x))))


def _brackets_of(s) -> list[list]:
    """Mutable [q, lo, hi, sign(q(lo))] records for each root of a RateSet."""
    if not isinstance(s, RateSet) or not len(s):
        return []
    q = list(s.reflected)
    out = []
    for lo, hi in s.brackets:
        lo, hi = mpq(lo), mpq(hi)
        out.append([q, lo, hi, _sign_at(q, lo)])
    return out


def certify_interlacing(b: RateSet, a=(), extra=(), max_halvings: int = 2000) -> InterlacingCertificate:
    """Strict interlacing of ``b`` with ``a`` plus ``extra``, settled beyond double
    precision when neighbouring roots agree to the last bit.

    Neighbours that compare out of order as doubles are separated by halving
    their certified brackets with exact sign evaluations.
    """
    cert = check_interlacing(a, b, extra)
    if cert.ok:
        return cert
    others = [s for s in (a, extra) if len(s)]
    if not all(isinstance(s, RateSet) and s.brackets for s in [b] + others):
        return cert
    c_items = sorted((it for s in others for it in _brackets_of(s)), key=lambda it: it[1])
    chain = []
    for i, it in enumerate(_brackets_of(b)):
        chain.append(it)
        if i < len(c_items):
            chain.append(c_items[i])
    for u, v in zip(chain, chain[1:]):
        for _ in range(max_halvings):
            if u[2] < v[1]:
                break
            if v[2] < u[1]:
                return InterlacingCertificate(False, cert.chain)
            w = u if (u[2] - u[1]) >= (v[2] - v[1]) else v
            mid = (w[1] + w[2]) / 2
            sm = _sign_at(w[0], mid)
            if sm == 0:
                w[1] = w[2] = mid
            elif sm == w[3]:
                w[1] = mid
            else:
                w[2] = mid
            if u[1] == u[2] and v[1] == v[2] and u[1] == v[1]:
                return InterlacingCertificate(False, cert.chain)
        else:
            return InterlacingCertificate(False, cert.chain)
    return InterlacingCertificate(True, cert.chain)
