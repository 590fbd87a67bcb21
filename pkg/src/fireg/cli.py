"""Command-line interface: ``fireg eval``, ``fireg verify``, ``fireg random``.

Exit codes: 0 pass, 1 mathematical check failure, 2 usage or parse error,
3 internal certification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from fireg import io
from fireg.fi import evaluate
from fireg.functors import CertificationError, compute_K, derivative_presentation, h0, shift_presentation
from fireg.homology import fi_homology
from fireg.linalg import LinalgError, Ring, ZZ
from fireg.verify import (CHECKS, SuiteConfig, SuiteReport, _run_one,
                          curated_corpus, random_presentation, run_suite)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CERT = 0, 1, 2, 3

EVAL_OPS = ("n", "h0", "homology", "shift", "derivative", "kernelK")
VERIFY_TARGETS = ("main", "les", "h0iso", "derived", "torsion", "proofchain", "independence", "all")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _ring_arg(text: str) -> Ring:
    try:
        return Ring.parse(text)
    except (LinalgError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _nonneg(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _config_flags(p: argparse.ArgumentParser) -> None:
    d = SuiteConfig()
    p.add_argument("--seed", type=_nonneg, default=d.seed)
    p.add_argument("--ring", type=_ring_arg, default=ZZ, help='"Z" or "mod<l>" (default Z)')
    p.add_argument("--max-generators", type=_nonneg, default=d.max_generators)
    p.add_argument("--max-relations", type=_nonneg, default=d.max_relations)
    p.add_argument("--max-gen-degree", type=_nonneg, default=d.max_gen_degree)
    p.add_argument("--max-rel-degree", type=_nonneg, default=d.max_rel_degree)
    p.add_argument("--coeff-bound", type=_nonneg, default=d.coeff_bound)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fireg", description="FI-module homology and regularity checks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    ev = sub.add_parser("eval", help="evaluate a presented FI-module")
    ev.add_argument("op", choices=EVAL_OPS)
    ev.add_argument("file")
    ev.add_argument("--n", type=_nonneg, help="level for op n")
    ev.add_argument("--p", type=_nonneg, default=1, help="homological degree for op homology")
    ev.add_argument("--window", type=_nonneg, default=6)
    ev.add_argument("--method", choices=("koszul", "resolution"), default="koszul")
    ev.add_argument("--out", help="output presentation file (shift, derivative)")
    ev.add_argument("--report", help="write a JSON report here")
    ev.add_argument("--no-timestamp", action="store_true")

    ve = sub.add_parser("verify", help="run theorem checks")
    ve.add_argument("target", choices=VERIFY_TARGETS)
    _config_flags(ve)
    ve.add_argument("--count", type=_nonneg, default=SuiteConfig().instance_count)
    ve.add_argument("--window", type=_nonneg, default=SuiteConfig().N)
    ve.add_argument("--pmax", type=_nonneg, default=SuiteConfig().p_max)
    ve.add_argument("--ell", type=int, action="append", help="prime for field-mode checks (repeatable)")
    ve.add_argument("--res-window", type=_nonneg, default=SuiteConfig().resolution_window,
                    help="window of the resolution-based checks")
    ve.add_argument("--input", help="check this presentation file instead of the corpora")
    ve.add_argument("--instance", help="restrict the curated corpus to this name")
    ve.add_argument("--no-curated", action="store_true")
    ve.add_argument("--no-shrink", action="store_true")
    ve.add_argument("--threads", type=_nonneg, help="worker processes (default FIREG_THREADS or 1)")
    ve.add_argument("--report", help="write a JSON report here")
    ve.add_argument("--no-timestamp", action="store_true")

    ra = sub.add_parser("random", help="write a deterministic random presentation")
    _config_flags(ra)
    ra.add_argument("--index", type=_nonneg, default=0)
    ra.add_argument("--out", help="output file (default stdout)")
    return parser


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load(path: str):
    try:
        return io.load_presentation(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")


def cmd_eval(args) -> int:
    P = _load(args.file)
    N = args.window
    body = {"input": io.presentation_to_json(P), "op": args.op}
    lines = []
    if args.op == "n":
        if args.n is None:
            raise UsageError("eval n needs --n")
        g = evaluate(P, args.n).group
        lines.append(f"n={args.n}: {g.format(P.ring)}")
        body["level"] = dict(degree=args.n, **io.group_to_json(g, P.ring))
    elif args.op in ("h0", "kernelK"):
        V = h0(P, N) if args.op == "h0" else compute_K(P, N)
        label = "H_0" if args.op == "h0" else "K"
        lines.append(f"{label} over {P.ring}, window {N}, degree {V.degree()}")
        lines.extend(io.fb_table(V))
        body.update(window=N, degree=V.degree().to_json(), table=io.fb_to_json(V))
    elif args.op == "homology":
        rep = fi_homology(P, args.p, N, method=args.method)
        lines.append(f"H_{args.p} over {P.ring}, window {N} ({args.method})")
        lines.extend(io.fb_table(rep.H))
        cert = "" if rep.observed_degree.certified_within_window else " (nonzero at the window edge)"
        lines.append(f"deg H_{args.p} = {rep.observed_degree}, f_{args.p} = {rep.f}{cert}")
        body.update(p=args.p, window=N, method=args.method, degree=rep.observed_degree.to_json(),
                    f=rep.f.to_json(), certified=rep.observed_degree.certified_within_window,
                    table=io.fb_to_json(rep.H))
    else:
        Q = shift_presentation(P) if args.op == "shift" else derivative_presentation(P)
        text = io.format_presentation(Q)
        if args.out:
            _write(args.out, text)
            lines.append(f"wrote {args.out}")
        else:
            lines.append(text.rstrip("\n"))
        body["output"] = io.presentation_to_json(Q)
    print("\n".join(lines))
    if args.report:
        doc = io.report_document(f"eval {args.op}", body, timestamp=not args.no_timestamp)
        _write(args.report, io.dump_report(doc))
    return EXIT_OK


def _summary_line(r) -> str:
    extra = ""
    if r.check == "main" and "rows" in r.witness:
        parts = []
        for row in r.witness["rows"]:
            s = f"p={row['p']}: deg {row['deg']} <= {row['bound']}"
            if row.get("equality"):
                s += " (equality)"
            parts.append(s)
        extra = "  " + "; ".join(parts)
    flag = " [review]" if r.review else ""
    return f"{r.check:<12} {r.instance:<14} {r.verdict}{flag}{extra}"


def cmd_verify(args) -> int:
    checks = CHECKS if args.target == "all" else (args.target,)
    ells = tuple(args.ell) if args.ell else ((args.ring.modulus,) if args.ring.is_field else (2, 3))
    cfg = SuiteConfig(seed=args.seed, instance_count=args.count, ring=args.ring,
                      max_generators=args.max_generators, max_relations=args.max_relations,
                      max_gen_degree=args.max_gen_degree, max_rel_degree=args.max_rel_degree,
                      coeff_bound=args.coeff_bound, N=args.window, p_max=args.pmax, ells=ells,
                      resolution_window=min(args.res_window, args.window), checks=checks,
                      curated=not args.no_curated, shrink=not args.no_shrink)
    problems = cfg.problems()
    if problems:
        raise UsageError("; ".join(problems))
    if args.input or args.instance:
        if args.input:
            P = _load(args.input)
            if P.ring != cfg.ring:
                cfg = replace(cfg, ring=P.ring,
                              ells=(P.ring.modulus,) if P.ring.is_field and not args.ell else cfg.ells)
            jobs = [(Path(args.input).stem, P, cfg, True, None)]
        else:
            named = dict(curated_corpus(cfg.ring))
            if args.instance not in named:
                raise UsageError(f"unknown curated instance {args.instance!r}; "
                                 f"choose from {sorted(named)}")
            jobs = [(args.instance, named[args.instance], cfg, True, None)]
        reports = [r for job in jobs for r in _run_one(job)]
        suite = SuiteReport(cfg, reports)
    else:
        suite = run_suite(cfg, threads=args.threads)
    for r in suite.reports:
        print(_summary_line(r))
    c = suite.counts()
    print(f"summary: {c['pass']} pass, {c['vacuous']} vacuous, {c['window-limited']} window-limited, "
          f"{c['fail']} fail ({c['review']} flagged for review) -> {'PASS' if suite.passed else 'FAIL'}")
    if args.report:
        doc = io.report_document(f"verify {args.target}", suite.to_json(),
                                 timestamp=not args.no_timestamp)
        _write(args.report, io.dump_report(doc))
    return EXIT_OK if suite.passed else EXIT_FAIL


def cmd_random(args) -> int:
    cfg = SuiteConfig(seed=args.seed, ring=args.ring, max_generators=args.max_generators,
                      max_relations=args.max_relations, max_gen_degree=args.max_gen_degree,
                      max_rel_degree=args.max_rel_degree, coeff_bound=args.coeff_bound)
    P = random_presentation(cfg, args.index)
    _write(args.out, io.format_presentation(P))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        handler = {"eval": cmd_eval, "verify": cmd_verify, "random": cmd_random}[args.command]
        return handler(args)
    except (UsageError, io.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CertificationError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())
