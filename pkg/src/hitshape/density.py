"""Hitting densities as finite exponential sums.

A density (or any of its derivatives) is ``sum_i c_i exp(-b_i t)``.  Rates are
doubles; coefficients are kept as ``mpfr`` at :data:`COEF_BITS` bits and are
computed in product form from the rates, so structural identities such as the
vanishing of the first derivatives at 0+ hold to that precision rather than to
double rounding.

Evaluation is tiered: a vectorised double pass with a running error bound,
then ``mpfr`` passes for the points whose sign the double pass could not
settle.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import gmpy2
import numpy as np
import scipy.linalg
import scipy.stats
from gmpy2 import mpfr

from . import arith
from .errors import (EigenError, PartialFractionError, RateCollisionError, StringError,
                     TruncationHorizonError)
from .krein import propagate_psi, propagate_reflected
from .spectra import RateSet, certify_interlacing, jacobi_form, real_roots
from .strings import AtomicString

COEF_BITS = 640
CONDITION_LIMIT = 1e12
_EPS = np.finfo(float).eps
_TIERS = (192, COEF_BITS)


def _mp(x) -> mpfr:
    with arith.working_precision(COEF_BITS):
        return mpfr(x)


@dataclass(frozen=True)
class ExpSumDensity:
    rates: tuple[float, ...]
    coefficients: tuple
    order: int = 0
    # f^(j)(0+) = 0 is known structurally for j < flat
    flat: int = 0
    _floats: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.rates) != len(self.coefficients):
            raise ValueError("rates and coefficients differ in length")
        if not self.rates:
            raise ValueError("empty exponential sum")
        r = self.rates
        if r[0] <= 0 or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("rates must be positive and strictly increasing")
        object.__setattr__(self, "_floats", np.array([float(c) for c in self.coefficients]))

    @property
    def n_terms(self) -> int:
        return len(self.rates)

    def float_coefficients(self) -> np.ndarray:
        return self._floats.copy()

    def derivative(self, n: int = 1) -> "ExpSumDensity":
        return derivative(self, n)

    def at_zero(self, j: int = 0) -> float:
        """f^(j)(0+) evaluated in extended precision."""
        with arith.working_precision(COEF_BITS):
            return float(sum(c * (-mpfr(b)) ** j for c, b in zip(self.coefficients, self.rates)))

    def sign_at_zero(self) -> int:
        """Sign of the function just to the right of 0."""
        with arith.working_precision(COEF_BITS):
            for j in range(self.flat, self.flat + self.n_terms + 1):
                v = sum(c * (-mpfr(b)) ** j for c, b in zip(self.coefficients, self.rates))
                scale = sum(abs(c) * mpfr(b) ** j for c, b in zip(self.coefficients, self.rates))
                if abs(v) > scale * mpfr(2) ** (-COEF_BITS + 40):
                    return arith.sign(v)
        return 0

    def tail_sign(self) -> int:
        """Sign as t -> infinity: that of the smallest-rate coefficient."""
        return arith.sign(self.coefficients[0])

    def base_mean(self) -> float:
        """Mean of the order-0 density this function derives from."""
        with arith.working_precision(COEF_BITS):
            base = [c / (-mpfr(b)) ** self.order for c, b in zip(self.coefficients, self.rates)]
            m0 = sum(c / mpfr(b) for c, b in zip(base, self.rates))
            m1 = sum(c / mpfr(b) ** 2 for c, b in zip(base, self.rates))
            return float(m1 / m0)

    def eval(self, t):
        return evaluate(self, t)[0] if np.ndim(t) else float(evaluate(self, np.array([t]))[0][0])

    def cdf(self, t):
        return cdf(self, t)

    def moment(self, k: int) -> float:
        return moment(self, k)


def derivative(d: ExpSumDensity, n: int = 1) -> ExpSumDensity:
    if n < 0:
        raise ValueError("derivative order must be nonnegative")
    if n == 0:
        return d
    with arith.working_precision(COEF_BITS):
        coefs = tuple(c * (-mpfr(b)) ** n for c, b in zip(d.coefficients, d.rates))
    return ExpSumDensity(d.rates, coefs, d.order + n, max(d.flat - n, 0))


def _mp_point(d: ExpSumDensity, t: float, bits: int):
    with arith.working_precision(bits):
        tt = mpfr(t)
        val = mpfr(0)
        mag = mpfr(0)
        for c, b in zip(d.coefficients, d.rates):
            term = mpfr(c) * gmpy2.exp(-mpfr(b) * tt)
            val += term
            mag += abs(term)
        return val, mag


def evaluate(d: ExpSumDensity, ts) -> tuple[np.ndarray, np.ndarray]:
    """Values and certified signs (+1, -1, or 0 when undecidable) on an array of t."""
    ts = np.asarray(ts, dtype=float)
    flat_t = ts.ravel()
    b = np.asarray(d.rates)
    with np.errstate(under="ignore", over="ignore"):
        terms = np.exp(-np.outer(flat_t, b)) * d._floats
    vals = terms.sum(axis=1)
    mags = np.abs(terms).sum(axis=1)
    bound = 8.0 * (d.n_terms + 4) * _EPS * mags + 1e-300
    signs = np.where(np.abs(vals) > bound, np.sign(vals), 0).astype(int)
    for i in np.flatnonzero(signs == 0):
        for bits in _TIERS:
            v, mag = _mp_point(d, float(flat_t[i]), bits)
            vals[i] = float(v)
            if abs(v) > mag * mpfr(2) ** (-bits + 12) and mag > 0:
                signs[i] = arith.sign(v)
                break
    return vals.reshape(ts.shape), signs.reshape(ts.shape)


def cdf(d: ExpSumDensity, t):
    """Distribution function of an order-0 density (absolute accuracy ~ 1e-15)."""
    if d.order != 0:
        raise ValueError("cdf needs an order-0 density")
    t = np.asarray(t, dtype=float)
    w = d._floats / np.asarray(d.rates)
    with np.errstate(under="ignore"):
        tail = np.exp(-np.multiply.outer(t, np.asarray(d.rates))) @ w
    out = 1.0 - tail
    return float(out) if out.ndim == 0 else out


def moment(d: ExpSumDensity, k: int) -> float:
    if d.order != 0:
        raise ValueError("moments need an order-0 density")
    with arith.working_precision(COEF_BITS):
        fk = mpfr(math.factorial(k))
        return float(sum(c * fk / mpfr(b) ** (k + 1) for c, b in zip(d.coefficients, d.rates)))


# -- construction ------------------------------------------------------------

def _product_weights(b: Sequence[float], numer: Sequence[float] = ()) -> list:
    """Partial-fraction weights p_i of prod(1 + l/s_k) / prod(1 + l/b_j).

    The transform equals sum_i p_i b_i / (b_i + l) when len(numer) < len(b).
    """
    with arith.working_precision(COEF_BITS):
        bm = [mpfr(x) for x in b]
        sm = [mpfr(x) for x in numer]
        out = []
        for i, bi in enumerate(bm):
            w = mpfr(1)
            for j, bj in enumerate(bm):
                if j != i:
                    w *= bj / (bj - bi)
            for sk in sm:
                w *= 1 - bi / sk
            out.append(w)
    cond = float(sum(abs(w) for w in out))
    if not math.isfinite(cond) or cond > CONDITION_LIMIT:
        raise PartialFractionError(f"partial-fraction condition {cond:.3e} exceeds {CONDITION_LIMIT:.0e}")
    return out


def _rates_of(rates) -> tuple[float, ...]:
    r = tuple(float(x) for x in rates)
    if len(set(r)) != len(r):
        raise RateCollisionError("duplicate rates")
    if any(b <= a for a, b in zip(r, r[1:])):
        r = tuple(sorted(r))
    return r


def hypoexp_from_rates(rates) -> ExpSumDensity:
    """Density of a sum of independent exponentials with distinct rates."""
    b = _rates_of(rates)
    if not b:
        raise ValueError("at least one rate required")
    p = _product_weights(b)
    with arith.working_precision(COEF_BITS):
        coefs = tuple(pi * mpfr(bi) for pi, bi in zip(p, b))
    return ExpSumDensity(b, coefs, 0, len(b) - 1)


@dataclass(frozen=True)
class TransformRoots:
    """Roots behind the hitting-time transform of a string."""

    poles: RateSet            # negated zeros of the reflected solution at target
    numerator: RateSet        # negated zeros of the reflected solution at start
    dirichlet: RateSet        # negated zeros of psi(target, .)

    def interlacing(self):
        """Certificate for b_1 < c_1 < b_2 < ... with c the merged numerator and Dirichlet roots."""
        return certify_interlacing(self.poles, self.dirichlet, self.numerator)


def transform_roots(s: AtomicString, backend: str | None = None) -> TransformRoots:
    num, den = propagate_reflected(s, backend)
    psi, _ = propagate_psi(s, backend)
    poles = real_roots(den)
    numer = real_roots(num) if num.degree else RateSet((), "phi_roots")
    dirichlet = real_roots(psi) if psi.degree else RateSet((), "psi_roots")
    return TransformRoots(poles, numer, dirichlet)


def hitting_density(s: AtomicString, backend: str | None = None,
                    roots: TransformRoots | None = None) -> ExpSumDensity:
    """Exact hitting density via Krein polynomials and certified roots.

    Works for one- and two-sided strings; the first ``interior_count``
    derivatives vanish at 0+.
    """
    roots = roots or transform_roots(s, backend)
    b = roots.poles.rates
    p = _product_weights(b, roots.numerator.rates)
    with arith.working_precision(COEF_BITS):
        coefs = tuple(pi * mpfr(bi) for pi, bi in zip(p, b))
    return ExpSumDensity(b, coefs, 0, len(b) - len(roots.numerator) - 1)


def _start_index(s: AtomicString) -> int:
    if s.start <= s.atoms[0].x:
        return 0
    for i, a in enumerate(s.atoms):
        if a.x == s.start:
            return i
    raise StringError("start is not an atom (and not below the leftmost atom)")


def phasetype_general(s: AtomicString) -> ExpSumDensity:
    """Hitting density from the spectral expansion of the killed generator.

    A start below the leftmost atom is read as a start at that atom.
    """
    k = _start_index(s)
    diag, off = jacobi_form(s)
    try:
        w, v = scipy.linalg.eigh_tridiagonal(diag, off)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenError(f"tridiagonal eigensolver failed: {exc}") from None
    if np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise EigenError("generator spectrum not positive and simple")
    m = [float(a.m) for a in s.atoms]
    n = len(m)
    exit_rate = 1.0 / (m[-1] * float(s.target - s.atoms[-1].x))
    coefs = v[k, :] * v[n - 1, :] * math.sqrt(m[-1] / m[k]) * exit_rate
    return ExpSumDensity(tuple(float(x) for x in w), tuple(_mp(float(c)) for c in coefs),
                         0, n - 1 - k)


# -- Yamazato factorization ----------------------------------------------------

@dataclass(frozen=True)
class Factorization:
    mu1_rates: RateSet
    mu2_mixture: tuple[tuple[float, float], ...]
    atom_at_zero: float
    cm_certificate: bool
    min_weight: float
    weight_sum: float
    _weights: tuple = field(default=(), repr=False, compare=False)
    _atom: object = field(default=None, repr=False, compare=False)

    def mu1_density(self) -> ExpSumDensity | None:
        return hypoexp_from_rates(self.mu1_rates) if len(self.mu1_rates) else None

    def mu2_density(self) -> ExpSumDensity:
        """Absolutely continuous part of mu2 (mass 1 - atom_at_zero)."""
        rates = tuple(r for _, r in self.mu2_mixture)
        with arith.working_precision(COEF_BITS):
            coefs = tuple(w * mpfr(r) for w, r in zip(self._weights, rates))
        return ExpSumDensity(rates, coefs, 0, 0)

    def reconvolve(self) -> ExpSumDensity:
        """The density of mu1 * mu2, rebuilt termwise."""
        g = self.mu2_density()
        h = self.mu1_density()
        if h is None:
            if self.atom_at_zero != 0:
                raise ValueError("mu1 and mu2 both carry an atom at zero")
            return g
        terms = {}
        with arith.working_precision(COEF_BITS):
            for alpha, a in zip(h.coefficients, h.rates):
                acc = self._atom * alpha
                for gamma, b in zip(g.coefficients, g.rates):
                    # a weight is exactly zero when its rate ties a mu1 rate in doubles
                    if gamma == 0:
                        continue
                    if a == b:
                        raise RateCollisionError(f"mu1 and mu2 share rate {a}")
                    acc += alpha * gamma / (mpfr(b) - mpfr(a))
                terms[a] = terms.get(a, 0) + acc
            for gamma, b in zip(g.coefficients, g.rates):
                if gamma == 0:
                    continue
                acc = mpfr(0)
                for alpha, a in zip(h.coefficients, h.rates):
                    acc += alpha * gamma / (mpfr(a) - mpfr(b))
                terms[b] = terms.get(b, 0) + acc
        rates = tuple(sorted(terms))
        return ExpSumDensity(rates, tuple(terms[r] for r in rates), 0, 0)


def yamazato_factorize(s: AtomicString, backend: str | None = None,
                       roots: TransformRoots | None = None,
                       cm_tol: float = 1e-9) -> Factorization:
    """Split the hitting law into mu1 (rates = Dirichlet spectrum) and a CM mixture mu2.

    mu2 has transform  L(l) * psi(target, l) / (target - start); its weight on
    Exp(b_i) is p_i * prod_k (1 - b_i / a_k).  When no atom sits at (or below)
    the start, numerator and denominator have equal degree and mu2 also has
    an atom at zero.
    """
    roots = roots or transform_roots(s, backend)
    b = roots.poles.rates
    a = roots.dirichlet.rates
    p = _product_weights(b, roots.numerator.rates)
    with arith.working_precision(COEF_BITS):
        weights = []
        for pi, bi in zip(p, b):
            w = pi
            for ak in a:
                w *= 1 - mpfr(bi) / mpfr(ak)
            weights.append(w)
        if len(a) + len(roots.numerator) == len(b):
            atom = mpfr(1)
            for bi in b:
                atom *= mpfr(bi)
            for r in a + roots.numerator.rates:
                atom /= mpfr(r)
        else:
            atom = mpfr(0)
        total = float(sum(weights) + atom)
    floats = [float(w) for w in weights]
    min_w = min(floats)
    return Factorization(
        mu1_rates=roots.dirichlet,
        mu2_mixture=tuple(zip(floats, b)),
        atom_at_zero=float(atom),
        cm_certificate=bool(min_w >= -cm_tol and float(atom) >= -cm_tol),
        min_weight=min_w,
        weight_sum=total,
        _weights=tuple(weights),
        _atom=atom,
    )


# -- uniformization oracle -----------------------------------------------------

def uniformization_check(s: AtomicString, t_grid, tol: float = 1e-10,
                         max_terms: int = 2_000_000) -> np.ndarray:
    """Absorption density exp(Qt) evaluated by uniformization on ``t_grid``."""
    k = _start_index(s)
    m = np.array([float(a.m) for a in s.atoms])
    x = [a.x for a in s.atoms] + [s.target]
    gaps = np.array([float(x[i + 1] - x[i]) for i in range(len(m))])
    right = 1.0 / (m * gaps)
    left = np.zeros_like(right)
    left[1:] = 1.0 / (m[1:] * gaps[:-1])
    total = right + left
    lam = float(total.max())
    exit_vec = np.zeros_like(right)
    exit_vec[-1] = right[-1]
    ts = np.atleast_1d(np.asarray(t_grid, dtype=float))
    horizon = 0
    for t in ts:
        mu = lam * t
        kk = int(scipy.stats.poisson.isf(tol / max(exit_vec[-1], 1.0), mu)) + 1
        horizon = max(horizon, kk)
    if horizon > max_terms:
        raise TruncationHorizonError(f"uniformization needs {horizon} terms (limit {max_terms})")
    # v_j = P^j q with P = I + Q / lam, propagated for every j up to the horizon
    stay = 1.0 - total / lam
    up = right / lam
    down = left / lam
    vs = np.empty((horizon + 1, len(m)))
    v = exit_vec.copy()
    for j in range(horizon + 1):
        vs[j] = v
        nv = stay * v
        nv[:-1] += up[:-1] * v[1:]
        nv[1:] += down[1:] * v[:-1]
        v = nv
    start_component = vs[:, k]
    out = np.empty(len(ts))
    js = np.arange(horizon + 1)
    for i, t in enumerate(ts):
        w = scipy.stats.poisson.pmf(js, lam * t)
        out[i] = float(w @ start_component)
    return out if np.ndim(t_grid) else out[0]


# -- tables ----------------------------------------------------------------------

def geometric_grid(mean: float, n: int = 200, lo: float = 0.01, hi: float = 20.0) -> np.ndarray:
    return np.geomspace(lo * mean, hi * mean, n)


def density_table(d: ExpSumDensity, t_grid, max_order: int) -> list[list[float]]:
    cols = [evaluate(derivative(d, j), t_grid)[0] for j in range(max_order + 1)]
    return [[float(t)] + [float(c[i]) for c in cols] for i, t in enumerate(t_grid)]


def write_density_csv(path, d: ExpSumDensity, t_grid, max_order: int) -> None:
    header = ["t", "f"] + [f"d{j}" for j in range(1, max_order + 1)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in density_table(d, t_grid, max_order):
            w.writerow([repr(x) for x in row])
