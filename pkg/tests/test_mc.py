from __future__ import annotations

import csv
import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings, strategies as st

from hitshape import corpus
from hitshape.density import hitting_density, hypoexp_from_rates
from hitshape.krein import expected_hitting_time
from hitshape.mc import (SampleSet, build_chain, ks_statistic, ks_test, manifest, mean_zscore,
                         simulate_hitting, simulate_walk, write_samples_csv)
from hitshape.strings import AtomicString


def test_chain_of_single_atom(single):
    c = build_chain(single)
    assert c.n_states == 1 and c.start_index == 0
    assert c.right_rate == pytest.approx([1.0])


def test_chain_of_two_atom_fixture(whale):
    c = build_chain(whale)
    assert c.right_rate == pytest.approx([2.0, 2.0])
    assert c.left_rate == pytest.approx([0.0, 2.0])
    assert c.total_rate == pytest.approx([2.0, 4.0])


def test_chain_with_atom_below_start():
    c = build_chain(AtomicString.from_pairs([("-0.5", 1), (0, 1)], 0, 1))
    assert c.start_index == 1
    assert c.left_rate[1] == pytest.approx(2.0)
    assert c.right_rate == pytest.approx([2.0, 1.0])


def test_exponential_mean(single):
    s = simulate_hitting(build_chain(single), 100_000, 7)
    assert abs(mean_zscore(s, 1.0)) < 3


def test_two_atom_mean_and_variance(whale):
    s = simulate_hitting(build_chain(whale), 100_000, 11)
    assert abs(mean_zscore(s, 1.5)) < 3
    # variance of the sample variance for this law, from its first four moments
    d = hitting_density(whale)
    m = [d.moment(k) for k in range(5)]
    mu4 = m[4] - 4 * m[3] * m[1] + 6 * m[2] * m[1] ** 2 - 3 * m[1] ** 4
    var = m[2] - m[1] ** 2
    assert var == pytest.approx(1.75, rel=1e-12)
    se = math.sqrt((mu4 - var ** 2) / len(s))
    assert abs(s.var() - var) < 5 * se


def test_same_seed_same_samples(whale):
    c = build_chain(whale)
    a = simulate_hitting(c, 40_000, 3, chunk_size=4096)
    b = simulate_hitting(c, 40_000, 3, chunk_size=4096, workers=4)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, simulate_hitting(c, 40_000, 4, chunk_size=4096).samples)


def test_seed_range_checked(whale):
    with pytest.raises(ValueError):
        simulate_hitting(build_chain(whale), 10, -1)
    with pytest.raises(ValueError):
        simulate_hitting(build_chain(whale), 0, 1)


def test_ks_statistic_detects_wrong_law():
    x = np.random.default_rng(0).exponential(1.0, 20_000)
    assert ks_statistic(x, hypoexp_from_rates([2.0])) > 0.2
    assert ks_statistic(x, hypoexp_from_rates([1.0])) < 0.02


def test_ks_statistic_matches_scipy():
    x = np.random.default_rng(1).exponential(0.5, 5000)
    want = scipy.stats.kstest(x, "expon", args=(0, 0.5)).statistic
    assert ks_statistic(x, hypoexp_from_rates([2.0])) == pytest.approx(want, rel=1e-12)


def test_ks_empty_sample_rejected():
    with pytest.raises(ValueError):
        ks_statistic(np.array([]), hypoexp_from_rates([1.0]))


def test_ks_test_passes_on_correct_law(whale):
    s = simulate_hitting(build_chain(whale), 100_000, 5)
    assert ks_test(s, hitting_density(whale)).passed


def test_level_sampler_matches_step_walk():
    s = AtomicString.from_pairs([("-0.5", 1), (0, "0.5"), ("0.3", 2), ("1.1", 1)], 0, 2)
    c = build_chain(s)
    fast = simulate_hitting(c, 40_000, 8).samples
    slow = simulate_walk(c, 40_000, 9)
    d = hitting_density(s)
    assert ks_test(SampleSet(slow, 9, len(slow), len(slow)), d).passed
    assert ks_test(SampleSet(fast, 8, len(fast), len(fast)), d).passed


def test_manifest_has_no_clock(whale):
    m = manifest(whale, 10, 1)
    assert m["seed"] == 1 and m["n_samples"] == 10
    assert not any("time" in k or "date" in k for k in m)
    assert manifest(whale, 10, 1) == m


def test_samples_csv(tmp_path, whale):
    s = simulate_hitting(build_chain(whale), 5, 2)
    p = tmp_path / "s.csv"
    write_samples_csv(p, s)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["tau"]
    assert [float(r[0]) for r in rows[1:]] == list(s.samples)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6), st.booleans())
def test_sample_mean_matches_exact_mean(i, two):
    s = corpus.two_sided(51, i) if two else corpus.one_sided(51, i, max_atoms=8)
    samples = simulate_hitting(build_chain(s), 20_000, i)
    assert abs(mean_zscore(samples, float(expected_hitting_time(s)))) < 4.5
