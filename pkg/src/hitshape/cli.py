"""Command-line front end.

    hitshape analyze  --input s.json [--output r.json] [--format json|csv]
    hitshape classify --input s.json | --gig LAM,CHI,PSI  [--max-order N]
    hitshape simulate --input s.json --samples N --seed S [--workers W]
    hitshape converge --input piece.json --k-list 8,16,32,64
    hitshape sweep    --count N --seed S [--inject-duplicate]

Exit codes: 0 success, 1 numerical failure, 2 input error.  Errors are also
written to stderr as a one-line JSON object.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, arith, corpus, mc
from .density import (density_table, derivative, evaluate, geometric_grid,
                      hitting_density, phasetype_general, transform_roots, write_density_csv,
                      yamazato_factorize)
from .errors import NumericalError, StringError
from .krein import expected_hitting_time, mean_identities, propagate_psi, propagate_reflected
from .shape import GigDensity, classify, count_zeros_expsum
from .spectra import generator_eigenrates
from .strings import AtomicString, StringSpec, load_spec, to_atomic, validate

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2


def _poly_strings(p) -> list[str]:
    return [str(c) for c in p.coefficients]


def _floats(xs) -> list[float]:
    return [float(x) for x in xs]


def _emit(obj: dict, args) -> None:
    text = json.dumps(obj, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)


def _write_manifest(args, manifest: dict) -> None:
    if args.output:
        out = Path(args.output)
        out.with_name(out.stem + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _base_manifest(args, s: AtomicString | None, backend: str | None) -> dict:
    out = {"tool": "hitshape", "version": __version__, "command": args.command,
           "numpy": np.__version__}
    if s is not None:
        out["string"] = s.to_spec().to_dict()
    if backend:
        out["precision"] = backend
    return out


def _load_atomic(path) -> AtomicString:
    return validate(load_spec(path))


# -- analyze ---------------------------------------------------------------------

def analysis_report(s: AtomicString, backend: str | None, max_order: int):
    backend = arith.resolve_backend(backend, s.n_atoms)
    num, den = propagate_reflected(s, backend)
    psi, _ = propagate_psi(s, backend)
    roots = transform_roots(s, backend)
    d = hitting_density(s, roots=roots)
    fact = yamazato_factorize(s, roots=roots)
    inter = roots.interlacing()
    if s.one_sided:
        eig = generator_eigenrates(s).rates
    else:
        eig = phasetype_general(s).rates
    exact_mean = expected_hitting_time(s)
    report = {
        "precision": backend,
        "polynomials": {"reflected_at_target": _poly_strings(den),
                        "reflected_at_start": _poly_strings(num),
                        "dirichlet_at_target": _poly_strings(psi)},
        "rates": _floats(roots.poles.rates),
        "rate_residuals": _floats(roots.poles.residuals),
        "generator_rates": _floats(eig),
        "numerator_rates": _floats(roots.numerator),
        "dirichlet_rates": _floats(roots.dirichlet),
        "interlacing": {"ok": inter.ok, "chain": _floats(inter.chain)},
        "density": {"coefficients": [float(c) for c in d.coefficients],
                    "vanishing_derivatives_at_zero": d.flat},
        "factorization": {
            "mu1_rates": _floats(fact.mu1_rates.rates),
            "mu2_rates": [r for _, r in fact.mu2_mixture],
            "mu2_weights": [w for w, _ in fact.mu2_mixture],
            "mu2_atom_at_zero": fact.atom_at_zero,
            "weight_sum": fact.weight_sum,
            "cm_certificate": fact.cm_certificate,
        },
        "moments": {"mean": d.moment(1), "variance": d.moment(2) - d.moment(1) ** 2,
                    "mean_exact": str(exact_mean)},
    }
    if s.one_sided:
        _, mu1_mean = mean_identities(s)
        report["moments"]["mu1_mean_exact"] = str(mu1_mean)
    report["max_order"] = max_order
    return report, d


def cmd_analyze(args) -> int:
    s = _load_atomic(args.input)
    report, d = analysis_report(s, args.precision, args.max_order)
    manifest = _base_manifest(args, s, report["precision"])
    grid = geometric_grid(d.base_mean())
    if args.format == "csv":
        if args.output:
            write_density_csv(args.output, d, grid, args.max_order)
        else:
            header = ["t", "f"] + [f"d{j}" for j in range(1, args.max_order + 1)]
            print(",".join(header))
            for row in density_table(d, grid, args.max_order):
                print(",".join(repr(x) for x in row))
    else:
        report["manifest"] = manifest
        _emit(report, args)
    _write_manifest(args, manifest)
    print(f"rates: {' '.join(f'{r:.6g}' for r in report['rates'])}", file=sys.stderr)
    return EXIT_OK


# -- classify --------------------------------------------------------------------

def _parse_gig(text: str) -> GigDensity:
    try:
        lam, chi, psi = (Fraction(v.strip()) for v in text.split(","))
    except ValueError:
        raise StringError("--gig expects LAMBDA,CHI,PSI") from None
    try:
        return GigDensity(lam, chi, psi)
    except ValueError as exc:
        raise StringError(str(exc)) from None


def cmd_classify(args) -> int:
    if args.gig:
        src = _parse_gig(args.gig)
        manifest = _base_manifest(args, None, None)
        manifest["gig"] = {"lambda": str(src.lam), "chi": str(src.chi), "psi": str(src.psi)}
    elif args.input:
        s = _load_atomic(args.input)
        backend = arith.resolve_backend(args.precision, s.n_atoms)
        src = hitting_density(s, backend)
        manifest = _base_manifest(args, s, backend)
    else:
        raise StringError("classify needs --input or --gig")
    report = classify(src, args.max_order)
    out = report.to_dict()
    out["manifest"] = manifest
    _emit(out, args)
    _write_manifest(args, manifest)
    print(f"classification: {report.classification}", file=sys.stderr)
    return EXIT_OK if report.classification != "Unknown" else EXIT_NUMERIC


# -- simulate --------------------------------------------------------------------

def cmd_simulate(args) -> int:
    s = _load_atomic(args.input)
    chain = mc.build_chain(s)
    samples = mc.simulate_hitting(chain, args.samples, args.seed, workers=args.workers)
    analytic = hitting_density(s, args.precision)
    ks = mc.ks_test(samples, analytic)
    mean = float(expected_hitting_time(s))
    summary = {"n_samples": args.samples, "seed": args.seed, "sample_mean": samples.mean(),
               "sample_variance": samples.var(), "exact_mean": mean,
               "mean_zscore": mc.mean_zscore(samples, mean),
               "ks_statistic": ks.statistic, "ks_pvalue": ks.pvalue, "ks_pass": ks.passed}
    manifest = mc.manifest(s, args.samples, args.seed, {"command": "simulate"})
    if args.format == "csv" and args.output:
        mc.write_samples_csv(args.output, samples)
        out = Path(args.output)
        out.with_name(out.stem + ".summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    else:
        _emit({"summary": summary, "manifest": manifest}, args)
    _write_manifest(args, manifest)
    print(f"KS {ks.statistic:.4g} (p={ks.pvalue:.3g}) {'pass' if ks.passed else 'FAIL'}",
          file=sys.stderr)
    return EXIT_OK


# -- converge --------------------------------------------------------------------

def convergence_rows(spec: StringSpec, k_list, max_order: int, backend=None) -> list[dict]:
    rows = []
    prev = None
    grid = None
    for k in k_list:
        s = to_atomic(spec, k)
        d = hitting_density(s, backend)
        if grid is None:
            grid = np.linspace(0.0, 5.0 * d.base_mean(), 401)[1:]
        vals = evaluate(d, grid)[0]
        counts = {}
        certified = True
        for n in range(1, max_order + 1):
            zc = count_zeros_expsum(derivative(d, n))
            counts[n] = zc.count
            certified &= zc.certified
        rows.append({
            "k": k,
            "n_atoms": s.n_atoms,
            "smallest_rates": list(d.rates[:3]),
            "mean": float(expected_hitting_time(s)),
            "mean_exact": str(expected_hitting_time(s)),
            "zero_counts": [counts[n] for n in range(1, max_order + 1)],
            "certified": certified,
            "sup_distance_to_previous": None if prev is None else float(np.max(np.abs(vals - prev))),
        })
        prev = vals
    return rows


def cmd_converge(args) -> int:
    spec = load_spec(args.input)
    if not spec.pieces:
        raise StringError("converge needs a string with continuous pieces")
    rows = convergence_rows(spec, args.k_list, args.max_order, args.precision)
    manifest = _base_manifest(args, None, args.precision or "auto")
    manifest["string"] = spec.to_dict()
    manifest["k_list"] = list(args.k_list)
    if args.format == "csv":
        lines = ["k,n_atoms,rate1,mean," + ",".join(f"zeros_d{n}" for n in range(1, args.max_order + 1))
                 + ",certified,sup_distance_to_previous"]
        for r in rows:
            sup = "" if r["sup_distance_to_previous"] is None else repr(r["sup_distance_to_previous"])
            lines.append(",".join([str(r["k"]), str(r["n_atoms"]), repr(r["smallest_rates"][0]),
                                   repr(r["mean"])] + [str(c) for c in r["zero_counts"]]
                                  + [str(r["certified"]).lower(), sup]))
        text = "\n".join(lines) + "\n"
        if args.output:
            Path(args.output).write_text(text)
        else:
            print(text, end="")
    else:
        _emit({"rows": rows, "manifest": manifest}, args)
    _write_manifest(args, manifest)
    return EXIT_OK if all(r["certified"] for r in rows) else EXIT_NUMERIC


# -- sweep -----------------------------------------------------------------------

def sweep_row(s: AtomicString, samples: int, seed: int) -> dict:
    roots = transform_roots(s)
    d = hitting_density(s, roots=roots)
    fact = yamazato_factorize(s, roots=roots)
    inter = roots.interlacing()
    row = {"n_atoms": s.n_atoms, "one_sided": s.one_sided, "interlacing": inter.ok,
           "cm_certificate": fact.cm_certificate, "min_weight": fact.min_weight}
    if s.one_sided:
        eig = generator_eigenrates(s).rates
        row["krein_vs_eigen"] = max(abs(a - b) / b for a, b in zip(roots.poles.rates, eig))
    if len(d.rates) >= 2:
        zc = count_zeros_expsum(derivative(d, 1))
        # with f(0+) > 0 a decreasing density is unimodal with its mode at 0
        row["unimodal"] = zc.certified and (zc.count == 1 or (zc.count == 0 and d.flat == 0))
    if samples:
        smp = mc.simulate_hitting(mc.build_chain(s), samples, seed)
        row["ks_pass"] = mc.ks_test(smp, d).passed
    row["ok"] = bool(row["interlacing"] and row["cm_certificate"] and row.get("unimodal", True)
                     and row.get("ks_pass", True))
    return row


def cmd_sweep(args) -> int:
    rows = []
    jobs = [("one_sided", i) for i in range(args.count)]
    jobs += [("two_sided", i) for i in range(args.two_sided)]
    for kind, i in jobs:
        row = {"kind": kind, "index": i, "seed": args.seed}
        try:
            s = (corpus.one_sided(args.seed, i, max_atoms=args.max_atoms) if kind == "one_sided"
                 else corpus.two_sided(args.seed, i))
            row.update(sweep_row(s, args.samples, args.seed + i))
        except (StringError, NumericalError) as exc:
            row.update(ok=False, error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    if args.inject_duplicate:
        row = {"kind": "injected_duplicate", "index": len(rows), "seed": args.seed}
        bad = {"atoms": [{"x": "0", "m": "1"}, {"x": "0.5", "m": "1"}, {"x": "0.5", "m": "2"}],
               "start": "0", "target": "1"}
        try:
            row.update(sweep_row(validate(StringSpec.from_dict(bad)), 0, args.seed))
        except (StringError, NumericalError) as exc:
            row.update(ok=False, error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
    passed = sum(1 for r in rows if r["ok"])
    summary = {"rows": len(rows), "passed": passed,
               "interlacing_rate": _rate(rows, "interlacing"),
               "cm_rate": _rate(rows, "cm_certificate")}
    manifest = _base_manifest(args, None, None)
    manifest.update(seed=args.seed, count=args.count, two_sided=args.two_sided,
                    max_atoms=args.max_atoms, samples=args.samples,
                    inject_duplicate=args.inject_duplicate)
    if args.format == "csv":
        cols = ["kind", "index", "seed", "n_atoms", "one_sided", "interlacing", "cm_certificate",
                "min_weight", "krein_vs_eigen", "unimodal", "ks_pass", "ok", "error"]
        lines = [",".join(cols)]
        for r in rows:
            lines.append(",".join(_csv_cell(r.get(c)) for c in cols))
        text = "\n".join(lines) + "\n"
        if args.output:
            Path(args.output).write_text(text)
        else:
            print(text, end="")
    else:
        _emit({"summary": summary, "rows": rows, "manifest": manifest}, args)
    _write_manifest(args, manifest)
    print(f"sweep: {passed}/{len(rows)} rows passed", file=sys.stderr)
    return EXIT_OK if passed == len(rows) else EXIT_NUMERIC


def _rate(rows, key):
    vals = [r[key] for r in rows if key in r]
    return sum(vals) / len(vals) if vals else None


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    text = str(v)
    return f'"{text}"' if "," in text else text


# -- entry point -----------------------------------------------------------------

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _k_list(text: str) -> list[int]:
    try:
        ks = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("k values must be positive")
    return ks


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hitshape", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"hitshape {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt="json"):
        sp.add_argument("--output", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default=fmt)
        sp.add_argument("--precision", choices=("double", "extended", "rational"), default=None,
                        help="polynomial backend (default: rational up to 16 atoms)")

    a = sub.add_parser("analyze", help="exact hitting law, spectra and factorization")
    a.add_argument("--input", required=True)
    a.add_argument("--max-order", type=_positive_int, default=4)
    common(a)

    c = sub.add_parser("classify", help="certified shape report")
    c.add_argument("--input")
    c.add_argument("--gig", help="LAMBDA,CHI,PSI of a generalized inverse Gaussian density")
    c.add_argument("--max-order", type=_positive_int, default=6)
    common(c)

    s = sub.add_parser("simulate", help="Monte Carlo hitting times with a KS check")
    s.add_argument("--input", required=True)
    s.add_argument("--samples", type=_positive_int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=_positive_int, default=1)
    common(s)

    v = sub.add_parser("converge", help="discretization study of a continuous string")
    v.add_argument("--input", required=True)
    v.add_argument("--k-list", type=_k_list, default=[8, 16, 32, 64])
    v.add_argument("--max-order", type=_positive_int, default=6)
    common(v)

    w = sub.add_parser("sweep", help="property campaign over seeded random strings")
    w.add_argument("--count", type=int, default=100)
    w.add_argument("--two-sided", type=int, default=0)
    w.add_argument("--max-atoms", type=_positive_int, default=8)
    w.add_argument("--samples", type=int, default=0, help="Monte Carlo samples per string")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--inject-duplicate", action="store_true",
                   help="append a string with a duplicated atom (error path)")
    common(w)
    return p


COMMANDS = {"analyze": cmd_analyze, "classify": cmd_classify, "simulate": cmd_simulate,
            "converge": cmd_converge, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "classify" and args.max_order < 2:
            raise StringError("--max-order must be >= 2")
        return COMMANDS[args.command](args)
    except StringError as exc:
        print(json.dumps({"error": "input", "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(json.dumps({"error": "numerical", "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        return EXIT_OK
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": "input", "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
