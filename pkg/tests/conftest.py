from __future__ import annotations

import functools

import pytest

from hitshape import corpus
from hitshape.density import hitting_density, transform_roots, yamazato_factorize
from hitshape.strings import AtomicString

CORPUS_SEED = 2026
N_ONE_SIDED = 1000
N_TWO_SIDED = 500

_acceptance: dict[str, tuple[str, str]] = {}


@pytest.fixture
def whale() -> AtomicString:
    return AtomicString.from_pairs([(0, 1), ("0.5", 1)], 0, 1)


@pytest.fixture
def single() -> AtomicString:
    return AtomicString.from_pairs([(0, 1)], 0, 1)


@functools.lru_cache(maxsize=None)
def one_sided(i: int) -> AtomicString:
    return corpus.one_sided(CORPUS_SEED, i)


@functools.lru_cache(maxsize=None)
def two_sided(i: int) -> AtomicString:
    return corpus.two_sided(CORPUS_SEED, i)


@functools.lru_cache(maxsize=None)
def analysis(kind: str, i: int):
    """(string, transform roots, density, factorization), computed once per session."""
    s = one_sided(i) if kind == "one" else two_sided(i)
    roots = transform_roots(s)
    return s, roots, hitting_density(s, roots=roots), yamazato_factorize(s, roots=roots)


def corpus_items(one: int = N_ONE_SIDED, two: int = 0):
    for i in range(one):
        yield ("one", i)
    for i in range(two):
        yield ("two", i)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        _acceptance[name] = ("PASS" if report.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        status, detail = _acceptance[name]
        label = name.removeprefix("test_").replace("_", " ")
        terminalreporter.write_line(f"{status}  {label}" + (f"  [{detail}]" if detail else ""))
