"""Acceptance criteria, one test per criterion at its stated tolerance.

A terminal summary section lists PASS/FAIL per criterion with a short detail
string (see conftest.py).
"""
from __future__ import annotations

import json
import math
import time
from fractions import Fraction

import gmpy2
import numpy as np
from gmpy2 import mpfr

from hitshape import corpus
from hitshape.cli import main
from hitshape.density import derivative, geometric_grid, hitting_density
from hitshape.krein import expected_hitting_time, propagate_phi
from hitshape.mc import build_chain, ks_test, mean_zscore, simulate_hitting
from hitshape.shape import classify, count_zeros_expsum, gig_derivative_zeros
from hitshape.spectra import generator_eigenrates, real_roots
from hitshape.strings import ContinuousPiece, StringSpec, to_atomic

from conftest import CORPUS_SEED, N_ONE_SIDED, N_TWO_SIDED, analysis, corpus_items, one_sided

B1, B2 = 3 - math.sqrt(5), 3 + math.sqrt(5)
# zeros of f' and f'' for the two-atom fixture: c b1^n e^{-b1 t} = c b2^n e^{-b2 t}
WHALE_ZEROS = (math.log(B2 / B1) / (B2 - B1), 2 * math.log(B2 / B1) / (B2 - B1))


def test_criterion_01_krein_roots_match_generator(record_property):
    t0 = time.perf_counter()
    worst = 0.0
    failures = []
    for i in range(N_ONE_SIDED):
        s = one_sided(i)
        krein = np.array(real_roots(propagate_phi(s)[0]).rates)
        eig = np.array(generator_eigenrates(s).rates)
        gap = float(np.max(np.abs(krein - eig) / eig)) if krein.shape == eig.shape else math.inf
        worst = max(worst, gap)
        if not gap <= 1e-8:
            failures.append(i)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{N_ONE_SIDED} strings, worst rel gap {worst:.2e}, {elapsed:.1f}s")
    assert not failures, failures[:10]
    assert elapsed < 30


def test_criterion_02_factorization(record_property):
    worst_weight, worst_sum, worst_sup = 0.0, 0.0, 0.0
    failures = []
    for kind, i in corpus_items(N_ONE_SIDED, N_TWO_SIDED):
        _, _, d, f = analysis(kind, i)
        ts = geometric_grid(d.base_mean(), 400, 1e-3, 30.0)
        sup = float(np.max(np.abs(f.reconvolve().eval(ts) - d.eval(ts))))
        low = min(f.min_weight, 0.0)
        dev = abs(f.weight_sum - 1.0)
        worst_weight, worst_sum, worst_sup = min(worst_weight, low), max(worst_sum, dev), max(worst_sup, sup)
        if low < -1e-9 or dev > 1e-10 or sup > 1e-8:
            failures.append((kind, i))
    record_property("detail", f"min weight {worst_weight:.1e}, |sum-1| {worst_sum:.1e}, "
                              f"sup-norm {worst_sup:.1e}")
    assert not failures, failures[:10]


def test_criterion_03_interlacing(record_property):
    checked, failures = 0, []
    for kind, i in corpus_items(N_ONE_SIDED, N_TWO_SIDED):
        s, roots, _, _ = analysis(kind, i)
        if not s.has_start_atom:
            continue
        checked += 1
        if not roots.interlacing().ok:
            failures.append((kind, i))
    record_property("detail", f"{checked} strings with a start atom, {len(failures)} failures")
    assert checked and not failures, failures[:10]


def test_criterion_04_only_if_n_shape(whale, record_property):
    bad = []
    checked = 0
    for n in range(1, 7):
        for seed in range(5):
            s = corpus.with_interior(CORPUS_SEED + seed, n)
            report = classify(hitting_density(s), n + 4)
            checked += 1
            for i in range(n, n + 5):
                r = report.record(i)
                if not (r.certified and r.zero_count == n):
                    bad.append((n, seed, i, r.zero_count))
    report = classify(hitting_density(whale), 6)
    z1 = report.record(1).zeros[0]
    z2 = report.record(2).zeros[0]
    record_property("detail", f"{checked} strings, whale zeros {z1:.10f} {z2:.10f}")
    assert not bad, bad[:10]
    assert report.classification == "Whale"
    assert abs(z1 - WHALE_ZEROS[0]) <= 1e-8 and abs(z2 - WHALE_ZEROS[1]) <= 1e-8


def test_criterion_05_brownian_trend(record_property):
    spec = StringSpec((), (ContinuousPiece.make(0, 1, 2),), Fraction(0), Fraction(1))
    t0 = time.perf_counter()
    problems = []
    smallest = None
    for k in (8, 16, 24, 32, 48, 64):
        s = to_atomic(spec, k)
        d = hitting_density(s)
        if abs(float(expected_hitting_time(s)) - 1.0) > 1e-12 or abs(d.moment(1) - 1.0) > 1e-12:
            problems.append(f"k={k} mean")
        counts = []
        for i in range(1, 9):
            zc = count_zeros_expsum(derivative(d, i))
            counts.append(zc.count if zc.certified else None)
        if counts != list(range(1, 9)):
            problems.append(f"k={k} counts {counts}")
        smallest = d.rates[0]
    elapsed = time.perf_counter() - t0
    rel = abs(smallest / (math.pi ** 2 / 8) - 1)
    if rel > 1e-3:
        problems.append(f"k=64 smallest rate off by {rel:.1e}")
    record_property("detail", f"k=64 rate {smallest:.7f} (rel {rel:.1e}), {elapsed:.1f}s; "
                              + ("; ".join(problems) or "all k pass"))
    assert elapsed < 60
    assert not problems


def test_criterion_06_vanishing_derivatives_at_zero(record_property):
    worst = 0.0
    failures = []
    checked = 0
    with gmpy2.context(gmpy2.get_context(), precision=640):
        for kind, i in corpus_items(N_ONE_SIDED, N_TWO_SIDED):
            _, _, d, _ = analysis(kind, i)
            # one-sided strings vanish to order #rates - 2; a numerator lowers the order
            top = len(d.rates) - 2 if kind == "one" else d.flat - 1
            for j in range(top + 1):
                terms = [c * (-mpfr(b)) ** j for c, b in zip(d.coefficients, d.rates)]
                rel = float(abs(sum(terms)) / sum(abs(t) for t in terms))
                worst = max(worst, rel)
                checked += 1
                if rel > 1e-9:
                    failures.append((kind, i, j))
    record_property("detail", f"{checked} identities, worst relative {worst:.1e}")
    assert not failures, failures[:10]


def test_criterion_07_unimodality(record_property):
    checked, failures = 0, []
    for i in range(N_ONE_SIDED):
        _, _, d, _ = analysis("one", i)
        if len(d.rates) < 2:
            continue
        zc = count_zeros_expsum(derivative(d, 1))
        checked += 1
        if not (zc.certified and zc.count == 1):
            failures.append((i, zc.count, zc.certified))
    record_property("detail", f"{checked} one-sided densities, {len(failures)} failures")
    assert checked and not failures, failures[:10]


def test_criterion_08_monte_carlo(record_property):
    t0 = time.perf_counter()
    strings = [("one", i) for i in range(35)] + [("two", i) for i in range(15)]
    ks_pass, worst_z = 0, 0.0
    for seed, (kind, i) in enumerate(strings):
        s, _, d, _ = analysis(kind, i)
        samples = simulate_hitting(build_chain(s), 100_000, seed)
        ks_pass += ks_test(samples, d).passed
        worst_z = max(worst_z, abs(mean_zscore(samples, float(expected_hitting_time(s)))))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"KS {ks_pass}/50, max |z| {worst_z:.2f}, {elapsed:.1f}s")
    assert ks_pass >= 48
    assert worst_z <= 3
    assert elapsed < 120


def test_criterion_09_gig_fixtures(record_property):
    got = {}
    for chi, psi, lam in ((1, 1, "0.5"), (2, "0.5", -1), ("0.5", 2, "1.5")):
        got[(chi, psi, lam)] = [gig_derivative_zeros(Fraction(lam), Fraction(chi), Fraction(psi), n)
                                for n in range(1, 7)]
    mono = gig_derivative_zeros(Fraction("0.5"), 0, 1, 1)
    record_property("detail", "bell fixtures " + " ".join(
        str([c for c, _ in v]) for v in got.values()) + f", chi=0 gives {mono[0]}")
    for v in got.values():
        assert v == [(n, True) for n in range(1, 7)]
    assert mono == (0, True)


def test_criterion_10_reproducibility(tmp_path, capsys, record_property):
    s = corpus.two_sided(CORPUS_SEED, 3)
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps(s.to_spec().to_dict()))
    outputs = []
    for run, workers in ((0, 1), (1, 1), (2, 4)):
        out = tmp_path / f"run{run}.csv"
        code = main(["simulate", "--input", str(spec), "--samples", "50000", "--seed", "7",
                     "--workers", str(workers), "--format", "csv", "--output", str(out)])
        assert code == 0
        outputs.append((out.read_bytes(), (tmp_path / f"run{run}.manifest.json").read_bytes(),
                        (tmp_path / f"run{run}.summary.json").read_bytes()))
    sweeps = []
    for _ in range(2):
        main(["sweep", "--count", "5", "--two-sided", "2", "--samples", "2000", "--seed", "3"])
        sweeps.append(capsys.readouterr().out)
    same = all(o == outputs[0] for o in outputs) and sweeps[0] == sweeps[1]
    record_property("detail", "3 simulate runs (workers 1,1,4) and 2 sweeps byte-identical"
                    if same else "outputs differ")
    assert same
