"""Theorem-checking harness: corpora, checks, suite runner and shrinking.

Every check is a pure function of its inputs.  Verdicts are ``pass``,
``fail``, ``vacuous`` or ``window-limited``; a ``fail`` always carries the
presentation that reproduces it.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

from fireg.fi import (CatAlgebraElement, Presentation, direct_sum,
                      free_module, inj_tuples, level_columns, presentation,
                      scaled_inclusion_module, torsion_module, transition_columns)
from fireg.functors import (CertificationError, ExtendedDegree, FBModule, compute_K,
                            derivative_presentation, h0, kernel_transition_certificate,
                            shift_fb, shift_presentation)
from fireg.homology import (KoszulComplex, build_resolution, derived_derivative,
                            epsilon_tensor, koszul_homology, resolution_homology)
from fireg import linalg
from fireg.linalg import Ring, ZZ

log = logging.getLogger(__name__)

PASS, FAIL, VACUOUS, LIMITED = "pass", "fail", "vacuous", "window-limited"

CHECKS = ("h0iso", "derived", "torsion", "les", "main", "proofchain", "independence")


# ---------------------------------------------------------------------------
# configuration and reports

@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 0
    instance_count: int = 100
    ring: Ring = ZZ
    max_generators: int = 3
    max_relations: int = 3
    max_gen_degree: int = 2
    max_rel_degree: int = 3
    coeff_bound: int = 3
    N: int = 8
    p_max: int = 3
    ells: tuple = (2, 3)
    # window for the resolution-based checks (L_q D, resolution independence)
    resolution_window: int = 4
    # random instances (from index 0) that also get the independence check
    independence_randoms: int = 6
    checks: tuple = CHECKS
    curated: bool = True
    shrink: bool = True

    def problems(self) -> list:
        out = []
        for name in ("instance_count", "max_generators", "max_relations", "max_gen_degree",
                     "max_rel_degree", "coeff_bound", "N", "p_max", "resolution_window",
                     "independence_randoms"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be >= 0")
        if self.N < 2:
            out.append("window N must be >= 2")
        if self.p_max < 1:
            out.append("p_max must be >= 1")
        if self.resolution_window > self.N:
            out.append("resolution_window must not exceed N")
        if self.resolution_window < 1:
            out.append("resolution_window must be >= 1")
        for ell in self.ells:
            if not linalg.is_prime(ell):
                out.append(f"ell={ell} is not prime")
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            out.append(f"unknown checks {sorted(unknown)}")
        return out

    def warnings(self) -> list:
        if self.N < self.max_rel_degree + self.p_max + 2:
            return [f"window N={self.N} is below max_rel_degree + p_max + 2 = "
                    f"{self.max_rel_degree + self.p_max + 2}; expect window-limited verdicts"]
        return []

    def to_json(self) -> dict:
        return {
            "seed": self.seed, "instance_count": self.instance_count, "ring": str(self.ring),
            "max_generators": self.max_generators, "max_relations": self.max_relations,
            "max_gen_degree": self.max_gen_degree, "max_rel_degree": self.max_rel_degree,
            "coeff_bound": self.coeff_bound, "N": self.N, "p_max": self.p_max,
            "ells": list(self.ells), "resolution_window": self.resolution_window,
            "independence_randoms": self.independence_randoms,
            "checks": list(self.checks), "curated": self.curated, "shrink": self.shrink,
        }


@dataclass
class CheckReport:
    check: str
    instance: str
    verdict: str
    witness: dict = field(default_factory=dict)
    # set on fails that the suite records without failing (H_1 = 0 policy)
    review: bool = False

    @property
    def hard_fail(self) -> bool:
        return self.verdict == FAIL and not self.review

    def to_json(self) -> dict:
        out = {"check": self.check, "instance": self.instance, "verdict": self.verdict}
        if self.review:
            out["review"] = True
        out["witness"] = self.witness
        return out


@dataclass
class SuiteReport:
    config: SuiteConfig
    reports: list

    @property
    def passed(self) -> bool:
        return not any(r.hard_fail for r in self.reports)

    def counts(self) -> dict:
        out = {v: 0 for v in (PASS, FAIL, VACUOUS, LIMITED)}
        for r in self.reports:
            out[r.verdict] += 1
        out["review"] = sum(1 for r in self.reports if r.review)
        return out

    def to_json(self) -> dict:
        return {"config": self.config.to_json(), "passed": self.passed,
                "counts": self.counts(), "reports": [r.to_json() for r in self.reports]}


# ---------------------------------------------------------------------------
# random and curated corpora

MASK64 = (1 << 64) - 1


class SplitMix64:
    """The splitmix64 generator; identical output on every platform."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform in ``[0, n)`` by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - (1 << 64) % n
        while True:
            x = self.next()
            if x < limit:
                return x % n

    def between(self, lo: int, hi: int) -> int:
        return lo + self.below(hi - lo + 1)


def instance_stream(seed: int, instance: int) -> SplitMix64:
    # derive an independent stream per (seed, instance)
    base = SplitMix64(seed)
    s = base.next() ^ SplitMix64(instance ^ 0xD1B54A32D192ED03).next()
    return SplitMix64(s)


def random_presentation(cfg: SuiteConfig, instance: int) -> Presentation:
    rng = instance_stream(cfg.seed, instance)
    ngens = rng.between(1, max(1, cfg.max_generators))
    gens = [rng.between(0, cfg.max_gen_degree) for _ in range(ngens)]
    nrels = rng.between(0, cfg.max_relations)
    rels, entries = [], {}
    for i in range(nrels):
        b = rng.between(0, cfg.max_rel_degree)
        rels.append(b)
        for j, a in enumerate(gens):
            if a > b:
                continue
            basis = inj_tuples(a, b)
            terms = []
            for _ in range(rng.between(0, 3)):
                c = rng.between(-cfg.coeff_bound, cfg.coeff_bound)
                terms.append((c, basis[rng.below(len(basis))]))
            if terms:
                el = CatAlgebraElement.make(a, b, terms)
                if not el.is_zero():
                    entries[(i, j)] = el
    return presentation(gens, rels, entries, cfg.ring)


def curated_corpus(ring: Ring = ZZ) -> list:
    """``(name, presentation)`` pairs: frees, torsion modules, 2-iota, sums, shifts."""
    out = [(f"M({a})", free_module(a, ring=ring)) for a in range(4)]
    out += [(f"T({d})", torsion_module(d, ring)) for d in range(3)]
    two_iota = scaled_inclusion_module(2, ring)
    out.append(("2iota", two_iota))
    out.append(("M(0)+M(1)", free_module(0, 1, ring=ring)))
    out.append(("T(0)+T(1)", direct_sum(torsion_module(0, ring), torsion_module(1, ring))))
    out.append(("2iota+T(1)", direct_sum(two_iota, torsion_module(1, ring))))
    out.append(("S(T(1))", shift_presentation(torsion_module(1, ring))))
    out.append(("S(2iota)", shift_presentation(two_iota)))
    out.append(("S(M(2))", shift_presentation(free_module(2, ring=ring))))
    return out


TORSION_FAMILY = ("T(0)", "T(1)", "T(2)", "T(0)+T(1)", "S(T(1))")
SHARP_INSTANCE = "2iota"


# ---------------------------------------------------------------------------
# per-instance cache

class Analysis:
    """Lazily computed invariants of one presentation at window ``N``."""

    def __init__(self, P: Presentation, N: int, p_max: int):
        self.P, self.N, self.p_max = P, N, p_max

    @cached_property
    def homology(self) -> list:
        return koszul_homology(self.P, self.p_max, self.N, KoszulComplex(self.P))

    @cached_property
    def D(self) -> Presentation:
        return derivative_presentation(self.P)

    @cached_property
    def homology_D(self) -> list:
        return koszul_homology(self.D, self.p_max, self.N - 1, KoszulComplex(self.D))

    @cached_property
    def K(self) -> FBModule:
        return compute_K(self.P, self.N - 1, certify=False)

    @cached_property
    def K_certificate(self) -> dict:
        return kernel_transition_certificate(self.P, self.N - 1)

    def f(self, p: int) -> ExtendedDegree:
        return self.homology[p].degree() - p


def _table(V: FBModule) -> list:
    return [g.format(V.ring) for g in V.groups]


def _deg(x: ExtendedDegree):
    return x.to_json()


# ---------------------------------------------------------------------------
# checks

def check_h0_shift_iso(P: Presentation, N: int, instance: str = "") -> CheckReport:
    lhs = shift_fb(h0(P, N))
    rhs = h0(derivative_presentation(P), N - 1)
    bad = [n for n in range(N) if lhs[n] != rhs[n]]
    wit = {"SH0W": _table(lhs), "H0DW": _table(rhs)}
    if bad:
        wit["degrees"] = bad
        return CheckReport("h0iso", instance, FAIL, wit)
    return CheckReport("h0iso", instance, VACUOUS if lhs.is_zero() else PASS, wit)


def check_derived_D(P: Presentation, N: int, instance: str = "") -> CheckReport:
    """``L_2 D = L_3 D = 0`` and ``L_1 D = K`` on ``[0..N-1]`` via a resolution."""
    res = build_resolution(P, 4, N)
    L = {q: derived_derivative(P, q, N - 1, res) for q in (1, 2, 3)}
    K = compute_K(P, N - 1, certify=False)
    cert = kernel_transition_certificate(P, N - 1)
    wit = {"L1D": _table(L[1]), "K": _table(K), "L2D": _table(L[2]), "L3D": _table(L[3]),
           "zero_transition": all(cert.values()), "window": N - 1}
    problems = []
    if not L[2].is_zero():
        problems.append("L2D != 0")
    if not L[3].is_zero():
        problems.append("L3D != 0")
    if L[1].groups != K.groups:
        problems.append("L1D != K")
    if not all(cert.values()):
        problems.append("nontrivial injections act nonzero on K")
    if problems:
        wit["problems"] = problems
        return CheckReport("derived", instance, FAIL, wit)
    return CheckReport("derived", instance, PASS, wit)


def is_zero_transition(P: Presentation, N: int) -> bool:
    """Do all non-bijective injections act by zero on ``W`` up to level ``N``?

    It suffices that every ``W_n -> W_{n+1}`` along the inclusion vanishes.
    """
    for n in range(N):
        incl = transition_columns(P.f0, tuple(range(1, n + 1)), n, n + 1)
        rel = level_columns(P.phi, n + 1)
        if not all(linalg.in_span(rel, P.f0.rank_at(n + 1), incl, P.ring)):
            return False
    return True


def check_torsion_homology(P: Presentation, p_max: int, N: int, instance: str = "",
                           resolution_window: Optional[int] = None) -> CheckReport:
    """``H_p(V) = V (x) eps_p`` for a zero-transition module ``V``.

    ``H_p`` comes from the Koszul route at window ``N``; with
    ``resolution_window`` set it is also recomputed from a free resolution.
    """
    if not is_zero_transition(P, N):
        raise ValueError("check_torsion_homology needs a zero-transition module")
    V = h0(P, N)  # for zero-transition modules W = H_0(W)
    H = koszul_homology(P, p_max, N)
    wit = {"V": _table(V)}
    bad = []
    for p in range(p_max + 1):
        E = epsilon_tensor(V, p)
        wit[f"H{p}"] = _table(H[p])
        if H[p].groups != E.groups:
            bad.append(p)
    if resolution_window is not None:
        res = build_resolution(P, p_max + 1, resolution_window)
        for p in range(p_max + 1):
            R = resolution_homology(res, p, resolution_window)
            if R.groups != H[p].truncate(resolution_window).groups:
                bad.append(f"resolution route differs at p={p}")
    if bad:
        wit["mismatch"] = bad
        return CheckReport("torsion", instance, FAIL, wit)
    return CheckReport("torsion", instance, PASS, wit)


def check_les_ranks(P: Presentation, p_max: int, N: int, ell: int, instance: str = "") -> CheckReport:
    """Dimension consequences of the long exact sequences, over ``Z/ell``."""
    Pl = P.with_ring(Ring(ell))
    A = Analysis(Pl, N, p_max)
    K = compute_K(Pl, N - 1, certify=False)
    SH = [shift_fb(H) for H in A.homology]
    HD = A.homology_D
    eps = {p: epsilon_tensor(K, p) for p in range(p_max)}

    def dim(V, n):
        return V[n].free_rank

    bad = []
    for n in range(N):
        if dim(SH[0], n) != dim(HD[0], n):
            bad.append((0, n))
        if dim(SH[1], n) > dim(K, n) + dim(HD[1], n) or dim(HD[1], n) > dim(SH[1], n):
            bad.append((1, n))
        for p in range(2, p_max + 1):
            if (dim(SH[p], n) > dim(eps[p - 1], n) + dim(HD[p], n)
                    or dim(HD[p], n) > dim(SH[p], n) + dim(eps[p - 2], n)):
                bad.append((p, n))
    wit = {"ell": ell, "SH": [SH[p].dims() for p in range(p_max + 1)],
           "HD": [HD[p].dims() for p in range(p_max + 1)], "K": K.dims()}
    if bad:
        wit["violations"] = [list(b) for b in bad]
        return CheckReport("les", instance, FAIL, wit)
    trivial = all(H.is_zero() for H in A.homology[1:]) and all(H.is_zero() for H in HD[1:])
    return CheckReport("les", instance, VACUOUS if trivial else PASS, wit)


def check_main_theorem(P: Presentation, p_max: int, N: int, instance: str = "",
                       analysis: Optional[Analysis] = None, expect_equality: bool = False) -> CheckReport:
    """``deg H_p <= f_0 + f_1 + p`` for ``2 <= p <= p_max``."""
    A = analysis or Analysis(P, N, p_max)
    H = A.homology
    f0, f1 = A.f(0), A.f(1)
    wit = {"f0": _deg(f0), "f1": _deg(f1), "deg": [_deg(H[p].degree()) for p in range(p_max + 1)]}
    if H[1].is_zero():
        higher = [p for p in range(1, p_max + 1) if not H[p].is_zero()]
        if higher:
            wit["nonzero_higher"] = higher
            return CheckReport("main", instance, FAIL, wit, review=True)
        return CheckReport("main", instance, VACUOUS, wit)
    if f0.is_neg_inf:
        return CheckReport("main", instance, VACUOUS, wit)
    bound = f0.value + f1.value
    verdict = PASS
    rows = []
    for p in range(2, p_max + 1):
        d = H[p].degree()
        row = {"p": p, "deg": _deg(d), "bound": int(bound + p)}
        if not d.is_neg_inf and d.value > bound + p:
            row["holds"] = False
            verdict = FAIL
        elif not d.certified_within_window and bound + p >= N:
            row["holds"] = None
            if verdict == PASS:
                verdict = LIMITED
        else:
            row["holds"] = True
        if expect_equality:
            row["equality"] = d.value == bound + p
            if not row["equality"]:
                verdict = FAIL
        rows.append(row)
    if not (f0.certified_within_window and f1.certified_within_window) and verdict == PASS:
        verdict = LIMITED
    wit["rows"] = rows
    return CheckReport("main", instance, verdict, wit)


def check_proof_chain(P: Presentation, p_max: int, N: int, instance: str = "",
                      analysis: Optional[Analysis] = None) -> CheckReport:
    A = analysis or Analysis(P, N, p_max)
    f0, f1 = A.f(0), A.f(1)
    wit = {"f0": _deg(f0), "f1": _deg(f1)}
    if f0.is_neg_inf or f1.is_neg_inf:
        return CheckReport("proofchain", instance, VACUOUS, wit)
    bound = int(f0.value + f1.value)
    HD = A.homology_D
    f0D, f1D = HD[0].degree(), HD[1].degree() - 1
    K = A.K
    wit.update({"N_bound": bound, "f0(DW)": _deg(f0D), "f1(DW)": _deg(f1D),
                "deg K": _deg(K.degree())})
    clauses = {}
    clauses["f1(DW) <= f1(W)-1"] = f1D <= f1.value - 1
    if f0.value >= 1:
        clauses["f0(DW) = f0(W)-1"] = f0D == f0.value - 1
    clauses["deg K <= N_bound"] = K.degree() <= bound
    for p in range(2, p_max + 1):
        clauses[f"deg SH_{p} <= N_bound-1+{p}"] = shift_fb(A.homology[p]).degree() <= bound - 1 + p
    for p in range(p_max + 1):
        clauses[f"deg K(x)eps_{p} <= N_bound+{p}"] = epsilon_tensor(K, p).degree() <= bound + p
    wit["clauses"] = clauses
    if not all(clauses.values()):
        return CheckReport("proofchain", instance, FAIL, wit)
    edge = (not f0.certified_within_window or not f1.certified_within_window
            or not f1D.certified_within_window)
    return CheckReport("proofchain", instance, LIMITED if edge else PASS, wit)


def check_resolution_independence(P: Presentation, p_max: int, N: int, instance: str = "",
                                  koszul: Optional[list] = None) -> CheckReport:
    """Homology from a standard and a deliberately redundant resolution agree.

    Both are also compared with the Koszul route (``koszul`` may pass a
    precomputed result at a window ``>= N``).
    """
    std = build_resolution(P, p_max + 1, N)
    red = build_resolution(P, p_max + 1, N, redundant=True)
    kos = koszul or koszul_homology(P, p_max, N)
    bad = []
    wit = {"window": N, "generators_standard": std.generator_degrees(),
           "generators_redundant": red.generator_degrees()}
    for p in range(p_max + 1):
        a, b = resolution_homology(std, p, N), resolution_homology(red, p, N)
        k = kos[p].truncate(N)
        if a.groups != b.groups:
            bad.append(f"p={p}: standard != redundant")
        if a.groups != k.groups:
            bad.append(f"p={p}: resolution != koszul")
        wit[f"H{p}"] = _table(a)
    if std.generator_degrees() == red.generator_degrees():
        bad.append("redundant resolution is not structurally different")
    if bad:
        wit["problems"] = bad
        return CheckReport("independence", instance, FAIL, wit)
    return CheckReport("independence", instance, PASS, wit)


# ---------------------------------------------------------------------------
# suite

def _instance_checks(name: str, P: Presentation, cfg: SuiteConfig, curated: bool,
                     index: Optional[int] = None) -> list:
    """All applicable checks for one instance, in a fixed order."""
    out = []
    N, pm = cfg.N, cfg.p_max
    A = Analysis(P, N, pm)
    for chk in cfg.checks:
        if chk == "h0iso":
            out.append(check_h0_shift_iso(P, N, name))
        elif chk == "derived":
            out.append(check_derived_D(P, cfg.resolution_window, name))
        elif chk == "torsion":
            if curated and name in TORSION_FAMILY:
                out.append(check_torsion_homology(P, pm, N, name,
                                                  resolution_window=cfg.resolution_window))
        elif chk == "les":
            for ell in cfg.ells:
                out.append(check_les_ranks(P, pm, N, ell, name))
        elif chk == "main":
            # sharpness is a statement about the integral module; mod 2 it is free
            sharp = curated and name == SHARP_INSTANCE and cfg.ring.modulus is None
            out.append(check_main_theorem(P, pm, N, name, A, expect_equality=sharp))
        elif chk == "proofchain":
            out.append(check_proof_chain(P, pm, N, name, A))
        elif chk == "independence":
            if curated or (index is not None and index < cfg.independence_randoms):
                out.append(check_resolution_independence(P, pm, cfg.resolution_window, name,
                                                         A.homology))
    return out


def _run_one(job):
    name, P, cfg, curated, index = job
    reports = _instance_checks(name, P, cfg, curated, index)
    if cfg.shrink:
        for i, r in enumerate(reports):
            if r.hard_fail:
                reports[i] = _attach_shrunk(r, P, cfg, curated, index)
    return reports


def _single_check(check: str, name: str, cfg: SuiteConfig, curated: bool, index, witness: dict):
    """A predicate ``P -> bool`` that reproduces a failure of ``check``."""
    sub = replace(cfg, checks=(check,))
    ell = witness.get("ell")

    def fails(Q: Presentation) -> bool:
        try:
            reps = _instance_checks(name, Q, sub, curated, index)
        except (ValueError, CertificationError):
            return False
        if ell is not None:
            reps = [r for r in reps if r.witness.get("ell") == ell]
        return any(r.hard_fail for r in reps)
    return fails


def _attach_shrunk(report: CheckReport, P: Presentation, cfg: SuiteConfig, curated: bool,
                   index=None) -> CheckReport:
    fails = _single_check(report.check, report.instance, cfg, curated, index, report.witness)
    small = shrink(P, fails)
    from fireg.io import presentation_to_json
    report.witness["shrunk"] = presentation_to_json(small)
    report.witness["original"] = presentation_to_json(P)
    return report


def _size(P: Presentation):
    return (len(P.f1.degrees), len(P.f0.degrees),
            sum(abs(c) for e in P.phi.entries.values() for c, _ in e.terms))


def _without_relation(P: Presentation, i: int) -> Presentation:
    rels = [b for k, b in enumerate(P.f1.degrees) if k != i]
    ents = {(k - (k > i), j): e for (k, j), e in P.phi.entries.items() if k != i}
    return presentation(P.f0.degrees, rels, ents, P.ring)


def _without_generator(P: Presentation, j: int) -> Presentation:
    gens = [a for k, a in enumerate(P.f0.degrees) if k != j]
    ents = {(i, k - (k > j)): e for (i, k), e in P.phi.entries.items() if k != j}
    return presentation(gens, P.f1.degrees, ents, P.ring)


def _coefficient_steps(P: Presentation):
    for key in sorted(P.phi.entries):
        e = P.phi.entries[key]
        for t, (c, g) in enumerate(e.terms):
            step = 1 if c > 0 else -1
            terms = list(e.terms)
            terms[t] = (c - step, g)
            ents = dict(P.phi.entries)
            ents[key] = CatAlgebraElement.make(e.arity, e.target, terms)
            yield presentation(P.f0.degrees, P.f1.degrees, ents, P.ring)


def shrink(P: Presentation, fails: Callable[[Presentation], bool]) -> Presentation:
    """Greedy minimization: drop relations, then generators, then move
    coefficients toward 0, as long as ``fails`` stays true."""
    cur = P
    while True:
        cands = [_without_relation(cur, i) for i in range(len(cur.f1.degrees))]
        cands += [_without_generator(cur, j) for j in range(len(cur.f0.degrees))
                  if len(cur.f0.degrees) > 1]
        cands += list(_coefficient_steps(cur))
        for c in cands:
            if _size(c) < _size(cur) and fails(c):
                cur = c
                break
        else:
            return cur


def thread_count() -> int:
    raw = os.environ.get("FIREG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def corpus(cfg: SuiteConfig) -> list:
    """``(name, presentation, curated, index)`` for every instance of the suite."""
    jobs = []
    if cfg.curated:
        jobs += [(name, P, True, None) for name, P in curated_corpus(cfg.ring)]
    jobs += [(f"random-{i}", random_presentation(cfg, i), False, i)
             for i in range(cfg.instance_count)]
    return jobs


def run_suite(cfg: SuiteConfig, threads: Optional[int] = None) -> SuiteReport:
    problems = cfg.problems()
    if problems:
        raise ValueError("; ".join(problems))
    for w in cfg.warnings():
        log.warning(w)
    jobs = [(name, P, cfg, cur, idx) for name, P, cur, idx in corpus(cfg)]
    threads = threads or thread_count()
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    return SuiteReport(cfg, [r for rs in results for r in rs])
