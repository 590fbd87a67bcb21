"""Acceptance criteria 1-10.

Each test records one line in ``RESULTS``; ``conftest.py`` prints them at
the end of the run.  The default suite (seed 42, 100 random instances,
window 8, p <= 3) runs twice through the command line, with
``FIREG_THREADS=1`` and ``FIREG_THREADS=8``; criteria 3-5 and 7-10 read
its report.
"""

import json
import os
import random
import subprocess
import sys
import time
from math import comb, factorial

import flint
import pytest

from fireg.fi import count_injections, evaluate, free_module, torsion_module
from fireg.functors import derivative_level_cokernel, derivative_presentation, shift_presentation
from fireg.homology import koszul_homology
from fireg.linalg import (IntMatrix, cokernel, diagonal, in_span, kernel_basis, rank,
                          smith_normal_form, solve_integer, Ring)
from fireg.verify import SuiteConfig, corpus, run_suite

RESULTS = {}
SEED, COUNT = 42, 100
SUITE_BUDGET = 15 * 60


def record(k, ok, detail):
    RESULTS[k] = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[k]


def _run_cli(tmp, threads):
    path = tmp / f"suite-{threads}.json"
    env = dict(os.environ, FIREG_THREADS=str(threads))
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "fireg.cli", "verify", "all", "--seed", str(SEED),
                           "--count", str(COUNT), "--report", str(path), "--no-timestamp"],
                          env=env, capture_output=True, text=True)
    return proc, path.read_bytes(), time.perf_counter() - t0


@pytest.fixture(scope="session")
def suite_runs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("acceptance")
    one = _run_cli(tmp, 1)
    eight = _run_cli(tmp, 8)
    return one, eight


@pytest.fixture(scope="session")
def suite(suite_runs):
    (proc, raw, _), _ = suite_runs
    return json.loads(raw)


def reports(doc, check):
    return [r for r in doc["reports"] if r["check"] == check]


def no_fail(rs):
    return all(r["verdict"] != "fail" for r in rs)


def verdicts(rs):
    out = {}
    for r in rs:
        out[r["verdict"]] = out.get(r["verdict"], 0) + 1
    return ", ".join(f"{v} {k}" for k, v in sorted(out.items()))


# --- 1 ------------------------------------------------------------------------------

def _check_matrix(A, rng):
    U, S, V = smith_normal_form(A)
    if U @ A @ V != S:
        return "UAV != S"
    fu = flint.fmpz_mat(U.tolist()) if U.rows else None
    fv = flint.fmpz_mat(V.tolist()) if V.rows else None
    if (fu is not None and abs(int(fu.det())) != 1) or (fv is not None and abs(int(fv.det())) != 1):
        return "transform not unimodular"
    d = diagonal(S)
    if any(S[i, j] for i in range(S.rows) for j in range(S.cols) if i != j):
        return "S not diagonal"
    nz = [x for x in d if x]
    if any(x < 0 for x in d) or d[:len(nz)] != nz or any(b % a for a, b in zip(nz, nz[1:])):
        return "divisibility chain"
    r = len(nz)
    if rank(A) != r:
        return "rank"
    G = cokernel(A)
    if G.free_rank != A.rows - r or G.invariant_factors != tuple(x for x in nz if x > 1):
        return "cokernel"
    K = kernel_basis(A)
    if K.cols != A.cols - r or (K.cols and not (A @ K).is_zero()):
        return "kernel"
    if K.cols and cokernel(K).invariant_factors:
        return "kernel not saturated"
    x = [rng.randint(-5, 5) for _ in range(A.cols)]
    v = A.apply(x)
    y = solve_integer(A, v)
    if y is None or A.apply(y) != v:
        return "solve"
    w = list(v)
    w[0] += 1
    z = solve_integer(A, w)
    if (z is not None) != in_span(A.columns_sparse(), A.rows, [{i: c for i, c in enumerate(w) if c}])[0]:
        return "solve/span disagree"
    return None


def test_criterion_01_linear_algebra():
    rng = random.Random(1)
    t0 = time.perf_counter()
    bad = []
    for _ in range(1000):
        m, n = rng.randint(1, 12), rng.randint(1, 12)
        A = IntMatrix.from_rows([[rng.randint(-9, 9) for _ in range(n)] for _ in range(m)], n)
        err = _check_matrix(A, rng)
        if err:
            bad.append(err)
    dt = time.perf_counter() - t0
    record(1, not bad and dt < 60, f"1000 matrices, {len(bad)} failures, {dt:.1f}s (< 60s)")


# --- 2 ------------------------------------------------------------------------------

def test_criterion_02_functor_identities():
    N = 8
    bad = []
    jobs = corpus(SuiteConfig(seed=SEED, instance_count=COUNT))
    for name, P, _, _ in jobs:
        S, D = shift_presentation(P), derivative_presentation(P)
        for n in range(N):
            if evaluate(S, n).group != evaluate(P, n + 1).group:
                bad.append((name, "S", n))
            if evaluate(D, n).group != derivative_level_cokernel(P, n):
                bad.append((name, "D", n))
    for a in range(5):
        SM = shift_presentation(free_module(a))
        for n in range(N + 1):
            want = count_injections(a, n) + a * count_injections(a - 1, n)
            if not (SM.f0.rank_at(n) == count_injections(a, n + 1) == want):
                bad.append((f"SM({a})", "count", n))
    record(2, not bad, f"{len(jobs)} instances, levels < {N}; SM(a) counts a <= 4, n <= {N}; "
                       f"{len(bad)} mismatches")


# --- 3-5 -----------------------------------------------------------------------------

def test_criterion_03_h0_shift_iso(suite):
    rs = reports(suite, "h0iso")
    record(3, len(rs) == 14 + COUNT and no_fail(rs), f"{len(rs)} instances: {verdicts(rs)}")


def test_criterion_04_derived_derivative(suite):
    rs = reports(suite, "derived")
    zt = all(r["witness"]["zero_transition"] for r in rs)
    record(4, len(rs) == 14 + COUNT and no_fail(rs) and zt,
           f"{len(rs)} instances: {verdicts(rs)}; zero-transition certificate everywhere: {zt}")


def test_criterion_05_torsion_homology(suite):
    rs = reports(suite, "torsion")
    counts = []
    for d in range(3):
        H = koszul_homology(torsion_module(d), 3, 8)
        for p in range(4):
            counts.append(H[p][d + p].free_rank == factorial(d) * comb(d + p, p)
                          and not H[p][d + p].invariant_factors)
    ok = no_fail(rs) and {"T(0)", "T(1)", "T(2)"} <= {r["instance"] for r in rs} and all(counts)
    record(5, ok, f"{len(rs)} zero-transition modules: {verdicts(rs)}; "
                  f"rank H_p(T(d))_(d+p) = d! C(d+p,p) for d <= 2, p <= 3: {all(counts)}")


# --- 6-9 ---------------------------------------------------------------------------------

def test_criterion_06_les_ranks(suite):
    rs = [r for r in reports(suite, "les") if r["instance"].startswith("random-")]
    per = {ell: sum(1 for r in rs if r["witness"]["ell"] == ell) for ell in (2, 3)}
    record(6, min(per.values()) >= 50 and no_fail(rs),
           f"random instances per prime {per}: {verdicts(rs)}")


def test_criterion_07_main_theorem(suite, suite_runs):
    (proc, _, dt), _ = suite_runs
    rs = reports(suite, "main")
    z_random = [r for r in rs if r["instance"].startswith("random-")]
    sharp = [r for r in rs if r["instance"] == "2iota"][0]
    eq = {row["p"]: row.get("equality") for row in sharp["witness"].get("rows", [])}
    f2 = run_suite(SuiteConfig(seed=SEED, instance_count=50, ring=Ring(2), checks=("main",),
                               curated=False), threads=1)
    f2r = [r.to_json() for r in f2.reports]
    hard = [r for r in rs + f2r if r["verdict"] == "fail" and not r.get("review")]
    review = [r for r in rs + f2r if r.get("review")]
    ok = (len(z_random) >= 100 and len(f2r) == 50 and not hard and eq == {2: True, 3: True}
          and dt < SUITE_BUDGET)
    record(7, ok, f"Z: {verdicts(z_random)}; Z/2: {verdicts(f2r)}; review-flagged {len(review)}; "
                  f"sharpness equality at p=2,3: {eq}; suite runtime {dt / 60:.1f} min "
                  f"(< {SUITE_BUDGET // 60} min)")


def test_criterion_08_proof_chain(suite):
    rs = reports(suite, "proofchain")
    record(8, len(rs) == 14 + COUNT and no_fail(rs), f"{len(rs)} instances: {verdicts(rs)}")


def test_criterion_09_resolution_independence(suite):
    rs = reports(suite, "independence")
    record(9, len(rs) >= 20 and all(r["verdict"] == "pass" for r in rs),
           f"{len(rs)} instances: {verdicts(rs)}")


# --- 10 ----------------------------------------------------------------------------------

def test_criterion_10_determinism(suite_runs):
    (p1, raw1, _), (p8, raw8, _) = suite_runs
    ok = p1.returncode == p8.returncode == 0 and raw1 == raw8 and p1.stdout == p8.stdout
    record(10, ok, f"FIREG_THREADS=1 and 8: exit {p1.returncode}/{p8.returncode}, "
                   f"reports byte-identical: {raw1 == raw8} ({len(raw1)} bytes)")
