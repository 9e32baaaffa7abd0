"""Zero counting, sign patterns and shape classification.

For an exponential sum the number of positive zeros is bounded above by the
sign changes of its coefficient sequence (ordered by rate).  When the first
``flat`` derivatives vanish at 0+ and everything vanishes at infinity, Rolle's
theorem sharpens that bound by one per vanishing derivative.  A lower bound
comes from sign changes seen on a geometric grid, where every sign used is
certified by an error bound.  The count is certified when both agree.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import arith
from .density import ExpSumDensity, _mp_point, derivative, evaluate
from .errors import UncertifiedError
from .spectra import sturm_chain, sturm_count, poly_eval, variations_at

GRID_POINTS = 4096
MAX_GRID_POINTS = 2 ** 18
ZERO_TOL = 1e-12
_SYMBOL = {1: "+", -1: "-", 0: "0"}


@dataclass(frozen=True)
class SignPattern:
    symbols: str

    def __post_init__(self):
        if not self.symbols or any(c not in "+-0" for c in self.symbols):
            raise ValueError(f"bad sign pattern {self.symbols!r}")
        if any(a == b for a, b in zip(self.symbols, self.symbols[1:])):
            raise ValueError(f"repeated symbol in pattern {self.symbols!r}")

    @classmethod
    def build(cls, start: int, interval_signs: list[int], end: int) -> "SignPattern":
        out = [_SYMBOL[start]]
        for s in interval_signs:
            sym = _SYMBOL[s]
            if out[-1] == sym:
                continue
            if out[-1] != "0":
                out.append("0")
            out.append(sym)
        if out[-1] != _SYMBOL[end]:
            out.append(_SYMBOL[end])
        return cls("".join(out))

    def __str__(self):
        return self.symbols


@dataclass(frozen=True)
class ZeroCount:
    count: int
    zeros: tuple[float, ...]
    certified: bool
    upper: int
    lower: int


def descartes_bound(d: ExpSumDensity) -> int:
    signs = [arith.sign(c) for c in d.coefficients]
    signs = [s for s in signs if s]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def upper_bound(d: ExpSumDensity) -> int:
    """Descartes bound lowered by Rolle for every derivative vanishing at 0+."""
    return max(descartes_bound(d) - d.flat, 0)


def _sign_changes(signs: np.ndarray) -> int:
    known = signs[signs != 0]
    return int(np.count_nonzero(known[1:] != known[:-1]))


def certified_signs(d: ExpSumDensity, ts: np.ndarray, wanted: int | None = None) -> np.ndarray:
    """Certified signs (0 = unknown) of ``d`` on an increasing grid.

    A vectorised double pass settles most points; the rest go to extended
    precision, first at a coarse stride, refining only while fewer than
    ``wanted`` sign changes are visible.  Leaving a point unknown can hide a
    sign change but never invents one.
    """
    b = np.asarray(d.rates)
    c = d.float_coefficients()
    with np.errstate(under="ignore", over="ignore"):
        terms = np.exp(-np.outer(ts, b)) * c
    vals = terms.sum(axis=1)
    mags = np.abs(terms).sum(axis=1)
    bound = 8.0 * (d.n_terms + 4) * np.finfo(float).eps * mags + 1e-300
    signs = np.where(np.abs(vals) > bound, np.sign(vals), 0).astype(int)
    unknown = np.flatnonzero(signs == 0)
    if not len(unknown):
        return signs
    tried = np.zeros(len(ts), dtype=bool)
    # below this index extended precision has been seen to fail repeatedly
    floor = -1
    stride = 64
    while True:
        misses = 0
        for i in unknown[::-1][::stride]:
            if i <= floor:
                break
            if tried[i]:
                continue
            tried[i] = True
            for bits in (192, 640):
                v, mag = _mp_point(d, float(ts[i]), bits)
                if mag > 0 and abs(v) > mag * 2.0 ** (-bits + 12):
                    signs[i] = arith.sign(v)
                    break
            misses = 0 if signs[i] else misses + 1
            if misses >= 16:
                floor = i
                break
        if stride == 1 or (wanted is not None and _sign_changes(signs) >= wanted):
            return signs
        stride //= 4


def _point_sign(d: ExpSumDensity, t: float) -> int:
    return int(evaluate(d, np.array([t]))[1][0])


def _refine(d: ExpSumDensity, a: float, b: float, sa: int) -> float:
    for _ in range(200):
        if b - a <= ZERO_TOL * max(1.0, a):
            break
        mid = 0.5 * (a + b)
        sm = _point_sign(d, mid)
        if sm == 0:
            break
        if sm == sa:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def scan_grid(d: ExpSumDensity, points: int) -> np.ndarray:
    mean = d.base_mean()
    lo = min(1e-4 * mean, 1e-3 / d.rates[-1])
    return np.geomspace(lo, 50.0 * max(mean, 1.0 / d.rates[0]), points)


def count_zeros_expsum(d: ExpSumDensity, points: int = GRID_POINTS,
                       max_points: int = MAX_GRID_POINTS) -> ZeroCount:
    """Certified number of zeros on (0, inf), with their locations."""
    upper = upper_bound(d)
    if upper == 0:
        return ZeroCount(0, (), True, 0, 0)
    best = []
    n = points
    while True:
        ts = scan_grid(d, n)
        signs = certified_signs(d, ts, upper)
        known = np.flatnonzero(signs != 0)
        brackets = []
        for i, j in zip(known, known[1:]):
            if signs[i] != signs[j]:
                brackets.append((float(ts[i]), float(ts[j]), int(signs[i])))
        if len(brackets) > len(best):
            best = brackets
        if len(best) >= upper or n >= max_points:
            break
        n *= 2
    zeros = tuple(float(_refine(d, a, b, sa)) for a, b, sa in best)
    lower = len(best)
    return ZeroCount(lower if lower == upper else upper, zeros, lower == upper, upper, lower)


def sign_pattern(d: ExpSumDensity, zc: ZeroCount | None = None) -> SignPattern:
    """Signs on [0, inf] including the limits at both ends."""
    zc = zc or count_zeros_expsum(d)
    if not zc.certified:
        raise UncertifiedError("sign pattern needs a certified zero count")
    first = d.sign_at_zero()
    if first == 0:
        raise UncertifiedError("sign just right of 0 could not be resolved")
    start = 0 if d.flat > 0 else first
    intervals = [first * (-1) ** k for k in range(zc.count + 1)]
    if intervals[-1] != d.tail_sign():
        raise UncertifiedError("zero count inconsistent with the tail sign")
    return SignPattern.build(start, intervals, 0)


# -- generalized inverse Gaussian ----------------------------------------------

@dataclass(frozen=True)
class GigDensity:
    """Unnormalized x^(lam-1) exp(-(chi/x + psi x)) on (0, inf)."""

    lam: Fraction
    chi: Fraction
    psi: Fraction

    def __post_init__(self):
        for name in ("lam", "chi", "psi"):
            v = getattr(self, name)
            # a float stands for its shortest decimal, not its binary expansion
            object.__setattr__(self, name, Fraction(repr(v)) if isinstance(v, float) else Fraction(v))
        lam, chi, psi = self.lam, self.chi, self.psi
        ok = chi >= 0 and psi >= 0 and (
            (chi > 0 and psi > 0) or (chi == 0 and psi > 0 and lam > 0)
            or (psi == 0 and chi > 0 and lam < 0))
        if not ok:
            raise ValueError(f"GIG parameters outside the admissible domain: "
                             f"lam={float(lam)}, chi={float(chi)}, psi={float(psi)}")

    def numerator(self, n: int) -> list[Fraction]:
        """Polynomial x^(2n) Q_n(x) with f^(n) = f Q_n, low-to-high, x-factors stripped."""
        if n < 1:
            return [Fraction(1)]
        q1 = {-1: self.lam - 1, -2: self.chi, 0: -self.psi}
        q = dict(q1)
        for _ in range(n - 1):
            nxt: dict[int, Fraction] = {}
            for p, c in q.items():
                if p:
                    nxt[p - 1] = nxt.get(p - 1, 0) + p * c
                for p1, c1 in q1.items():
                    nxt[p + p1] = nxt.get(p + p1, 0) + c * c1
            q = {p: c for p, c in nxt.items() if c}
        lo = min(q)
        poly = [Fraction(0)] * (max(q) - lo + 1)
        for p, c in q.items():
            poly[p - lo] = Fraction(c)
        while len(poly) > 1 and poly[-1] == 0:
            poly.pop()
        return poly

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return (float(self.lam) - 1) * np.log(x) - float(self.chi) / x - float(self.psi) * x


def _positive_root_locations(poly: list[Fraction], chain) -> tuple[float, ...]:
    lead = abs(poly[-1])
    hi = 1 + max(abs(c) for c in poly[:-1]) / lead if len(poly) > 1 else Fraction(1)
    hi = Fraction(math.ceil(hi))
    out = []
    stack = [(Fraction(0), hi)]
    while stack:
        a, b = stack.pop()
        n = sturm_count(chain, a, b)
        if n == 0:
            continue
        if n == 1 or b - a < Fraction(1, 10 ** 15):
            out.append((a, b))
            continue
        mid = (a + b) / 2
        stack.append((mid, b))
        stack.append((a, mid))
    zeros = []
    for a, b in sorted(out):
        fa, fb = poly_eval(poly, a), poly_eval(poly, b)
        for _ in range(60):
            if fa == 0 or fb == 0 or arith.sign(fa) == arith.sign(fb):
                break
            mid = (a + b) / 2
            mid = Fraction(float(mid)) if mid.denominator > 2 ** 80 else mid
            fm = poly_eval(poly, mid)
            if fm == 0:
                a = b = mid
                break
            if arith.sign(fm) == arith.sign(fa):
                a, fa = mid, fm
            else:
                b, fb = mid, fm
        zeros.append(float((a + b) / 2))
    return tuple(zeros)


def gig_zero_count(g: GigDensity, n: int) -> tuple[ZeroCount, list[Fraction]]:
    poly = g.numerator(n)
    if len(poly) == 1:
        return ZeroCount(0, (), True, 0, 0), poly
    chain = sturm_chain(poly)
    distinct = variations_at(chain, Fraction(0)) - variations_at(chain, math.inf)
    # the polynomial's constant term is nonzero after stripping, so 0 is no root
    squarefree = len(chain[-1]) == 1
    zeros = _positive_root_locations(poly, chain) if distinct else ()
    return ZeroCount(distinct, zeros, squarefree, distinct, distinct), poly


def gig_derivative_zeros(gig_lambda, gig_chi, gig_psi, order: int) -> tuple[int, bool]:
    """Exact count of the zeros of the n-th derivative of a GIG density on (0, inf)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    g = GigDensity(gig_lambda, gig_chi, gig_psi)
    zc, _ = gig_zero_count(g, order)
    return zc.count, zc.certified


def _gig_pattern(g: GigDensity, zc: ZeroCount, poly: list[Fraction]) -> SignPattern:
    first = arith.sign(next(c for c in poly if c))
    intervals = [first * (-1) ** k for k in range(zc.count + 1)]
    if intervals[-1] != arith.sign(poly[-1]):
        raise UncertifiedError("zero count inconsistent with the sign at infinity")
    start = 0 if g.chi > 0 else first
    # every admissible GIG density and its derivatives vanish at infinity
    return SignPattern.build(start, intervals, 0)


# -- reports ---------------------------------------------------------------------

@dataclass(frozen=True)
class OrderRecord:
    order: int
    zero_count: int
    certified: bool
    pattern: str | None
    zeros: tuple[float, ...] = ()
    upper: int = 0
    lower: int = 0
    vanishes_at_zero: bool = False


@dataclass(frozen=True)
class ShapeReport:
    records: tuple[OrderRecord, ...]
    classification: str
    max_order_checked: int
    rolle_consistent: bool
    notes: tuple[str, ...] = field(default=())

    def record(self, order: int) -> OrderRecord:
        for r in self.records:
            if r.order == order:
                return r
        raise KeyError(order)

    def counts(self) -> dict[int, int]:
        return {r.order: r.zero_count for r in self.records}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["records"] = [dict(asdict(r), zeros=list(r.zeros)) for r in self.records]
        out["notes"] = list(self.notes)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def rolle_consistent(records: list[OrderRecord]) -> bool:
    """Each gap between consecutive zeros of f^(n) contains a zero of f^(n+1)."""
    by_order = {r.order: r for r in records if r.certified}
    for n, r in by_order.items():
        nxt = by_order.get(n + 1)
        if nxt is None:
            continue
        for a, b in zip(r.zeros, r.zeros[1:]):
            if not any(a < z < b for z in nxt.zeros):
                return False
    return True


def _classify_counts(records: list[OrderRecord], N: int) -> str:
    by = {r.order: r for r in records}
    if any(not by[i].certified for i in range(1, N + 1)):
        return "Unknown"
    count = {i: by[i].zero_count for i in range(1, N + 1)}
    n = count[N]
    if 1 <= n < N and all(count[i] == n for i in range(n, N + 1)):
        return "Whale" if n == 1 else f"NShape({n})"
    if all(count[i] == i for i in range(1, N + 1)) and all(
            by[i].vanishes_at_zero for i in range(0, N + 1)):
        return f"Bell({N})"
    if count[1] == 0:
        return "Monotone"
    return "Unknown"


def _expsum_record(d: ExpSumDensity, order: int) -> OrderRecord:
    zc = count_zeros_expsum(d)
    pattern = None
    certified = zc.certified
    if certified:
        try:
            pattern = str(sign_pattern(d, zc))
        except UncertifiedError:
            certified = False
    return OrderRecord(order, zc.count, certified, pattern, zc.zeros, zc.upper, zc.lower,
                       d.flat > 0)


def _gig_record(g: GigDensity, order: int) -> OrderRecord:
    if order == 0:
        return OrderRecord(0, 0, True, "0+0" if g.chi > 0 else "+0", (), 0, 0, g.chi > 0)
    zc, poly = gig_zero_count(g, order)
    pattern = None
    certified = zc.certified
    if certified:
        try:
            pattern = str(_gig_pattern(g, zc, poly))
        except UncertifiedError:
            certified = False
    return OrderRecord(order, zc.count, certified, pattern, zc.zeros, zc.upper, zc.lower,
                       g.chi > 0)


def classify(source, max_order: int = 6) -> ShapeReport:
    """Shape report over derivative orders 0..max_order."""
    if max_order < 2:
        raise ValueError("max_order must be >= 2")
    records = []
    for n in range(max_order + 1):
        if isinstance(source, GigDensity):
            records.append(_gig_record(source, n))
        elif isinstance(source, ExpSumDensity):
            records.append(_expsum_record(derivative(source, n), n))
        else:
            raise TypeError(f"cannot classify {type(source).__name__}")
    notes = []
    label = _classify_counts(records, max_order)
    if label.startswith("Bell"):
        notes.append(f"bell behaviour certified up to derivative order {max_order} only")
    return ShapeReport(tuple(records), label, max_order, rolle_consistent(records), tuple(notes))
