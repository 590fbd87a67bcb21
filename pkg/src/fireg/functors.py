"""Shift, derivative and generator functors on presented FI-modules.

The shift ``S`` adds a new point ``n+1`` to ``[n]``, so the natural map
``W -> SW`` is ``W_n -> W_{n+1}`` along the order inclusion.  On a free
module ``SM(a) = M(a) + M(a-1)^a``: copy ``k`` of ``M(a-1)`` collects the
injections that send ``k`` to the new point.  The derivative ``D`` is the
cokernel of ``W -> SW``; on frees it keeps only the ``M(a-1)`` copies.
Identifications ``[b] - {k} = [b-1]`` always use the order-preserving
bijection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from fireg import linalg
from fireg.fi import (CatAlgebraElement, FreeFIModule, FreeMorphism, Injection,
                      Presentation, inj_tuples, level_columns, transition_columns)
from fireg.linalg import FGAbelianGroup, Ring, ZZ

NEG_INF = -math.inf


class CertificationError(RuntimeError):
    """An internal consistency certificate failed (a bug, not a math outcome)."""


@dataclass(frozen=True, order=False)
class ExtendedDegree:
    """A degree in ``{-inf} + N``; ``-inf`` is absorbing under ``+``/``-``."""

    value: float
    certified_within_window: bool = True

    @property
    def is_neg_inf(self) -> bool:
        return self.value == NEG_INF

    def _v(self, other):
        return other.value if isinstance(other, ExtendedDegree) else other

    def __add__(self, other):
        if isinstance(other, ExtendedDegree):
            return ExtendedDegree(self.value + other.value,
                                  self.certified_within_window and other.certified_within_window)
        return ExtendedDegree(self.value + other, self.certified_within_window)

    __radd__ = __add__

    def __sub__(self, k: int):
        return ExtendedDegree(self.value - k, self.certified_within_window)

    def __le__(self, other):
        return self.value <= self._v(other)

    def __lt__(self, other):
        return self.value < self._v(other)

    def __ge__(self, other):
        return self.value >= self._v(other)

    def __gt__(self, other):
        return self.value > self._v(other)

    def __eq__(self, other):
        return self.value == self._v(other)

    def __hash__(self):
        return hash(self.value)

    def __str__(self):
        return "-inf" if self.is_neg_inf else str(int(self.value))

    def to_json(self):
        return None if self.is_neg_inf else int(self.value)


@dataclass(frozen=True)
class FBModule:
    """Degreewise groups ``V_0, ..., V_N`` (only underlying groups are kept)."""

    ring: Ring
    groups: tuple

    @classmethod
    def zero(cls, window: int, ring: Ring = ZZ) -> "FBModule":
        return cls(ring, (FGAbelianGroup(),) * (window + 1))

    @property
    def window(self) -> int:
        return len(self.groups) - 1

    def __getitem__(self, n: int) -> FGAbelianGroup:
        if 0 <= n <= self.window:
            return self.groups[n]
        if n < 0:
            return FGAbelianGroup()
        raise IndexError(f"degree {n} is outside the window [0..{self.window}]")

    def is_zero(self) -> bool:
        return all(g.is_zero() for g in self.groups)

    def degree(self) -> ExtendedDegree:
        nz = [n for n, g in enumerate(self.groups) if not g.is_zero()]
        if not nz:
            return ExtendedDegree(NEG_INF, True)
        return ExtendedDegree(nz[-1], nz[-1] < self.window)

    def truncate(self, window: int) -> "FBModule":
        if window > self.window:
            raise ValueError("cannot extend a window by truncation")
        return FBModule(self.ring, self.groups[:window + 1])

    def dims(self) -> list:
        return [g.free_rank for g in self.groups]

    def format(self) -> str:
        return ", ".join(f"{n}: {g.format(self.ring)}" for n, g in enumerate(self.groups))


def shift_fb(V: FBModule) -> FBModule:
    """``(SV)_n = V_{n+1}``; the window shrinks by one."""
    if V.window < 1:
        raise ValueError("shift of an FB-module needs window >= 1")
    return FBModule(V.ring, V.groups[1:])


def _relabel(v: int, k: int) -> int:
    return v if v < k else v - 1


def _shift_blocks(degrees: Sequence[int], keep_top: bool):
    """New degree list and index maps ``top[i]``, ``copy[i][k-1]``."""
    out, top, copies = [], [], []
    for a in degrees:
        if keep_top:
            top.append(len(out))
            out.append(a)
        else:
            top.append(None)
        cs = []
        for _ in range(a):
            cs.append(len(out))
            out.append(a - 1)
        copies.append(cs)
    return out, top, copies


def _shifted(phi: FreeMorphism, keep_top: bool) -> FreeMorphism:
    src, stop, scop = _shift_blocks(phi.source.degrees, keep_top)
    tgt, ttop, tcop = _shift_blocks(phi.target.degrees, keep_top)
    acc: dict = {}

    def add(key, c, g):
        acc.setdefault(key, []).append((c, g))

    for i, j, e in phi.nonzero_entries():
        b = phi.source.degrees[i]
        for c, g in e.terms:
            if keep_top:
                add((stop[i], ttop[j]), c, g)
            for k in range(1, b + 1):
                if k in g:
                    l = g.index(k)
                    h = tuple(_relabel(g[m], k) for m in range(len(g)) if m != l)
                    add((scop[i][k - 1], tcop[j][l]), c, h)
                elif keep_top:
                    add((scop[i][k - 1], ttop[j]), c, tuple(_relabel(v, k) for v in g))
    ents = {}
    for (i, j), terms in acc.items():
        el = CatAlgebraElement.make(tgt[j], src[i], terms)
        if not el.is_zero():
            ents[(i, j)] = el
    return FreeMorphism(FreeFIModule(tuple(src)), FreeFIModule(tuple(tgt)), ents)


def shift_free_morphism(phi: FreeMorphism) -> FreeMorphism:
    """``S(phi)`` on the decompositions ``SM(a) = M(a) + M(a-1)^a``."""
    return _shifted(phi, keep_top=True)


def derivative_free_morphism(phi: FreeMorphism) -> FreeMorphism:
    """``D(phi)`` on ``DM(a) = M(a-1)^a``."""
    return _shifted(phi, keep_top=False)


def shift_presentation(P: Presentation) -> Presentation:
    return Presentation(P.ring, shift_free_morphism(P.phi))


def derivative_presentation(P: Presentation) -> Presentation:
    return Presentation(P.ring, derivative_free_morphism(P.phi))


def _bijective_part(phi: FreeMorphism, n: int) -> FreeMorphism:
    src = [i for i, b in enumerate(phi.source.degrees) if b == n]
    tgt = [j for j, a in enumerate(phi.target.degrees) if a == n]
    si = {i: k for k, i in enumerate(src)}
    tj = {j: k for k, j in enumerate(tgt)}
    ents = {(si[i], tj[j]): e for i, j, e in phi.nonzero_entries() if i in si and j in tj}
    return FreeMorphism(FreeFIModule((n,) * len(src)), FreeFIModule((n,) * len(tgt)), ents)


def h0_at(P: Presentation, n: int) -> FGAbelianGroup:
    part = _bijective_part(P.phi, n)
    return linalg.cokernel_sparse(level_columns(part, n), part.target.rank_at(n), P.ring)


def h0(P: Presentation, N: int) -> FBModule:
    """``H_0(W)`` on ``[0..N]``: generators modulo relations of the same degree."""
    return FBModule(P.ring, tuple(h0_at(P, n) for n in range(N + 1)))


def natural_map(P: Presentation, n: int) -> linalg.IntMatrix:
    """Ambient matrix of ``W_n -> W_{n+1} = (SW)_n``."""
    return linalg.IntMatrix.from_columns(
        transition_columns(P.f0, tuple(range(1, n + 1)), n, n + 1), P.f0.rank_at(n + 1))


def _kernel_level(P: Presentation, n: int):
    """``(K_n, generator lifts, R_{n+1} columns)`` for ``K = ker(W -> SW)``."""
    ring = P.ring
    amb_n, amb_m = P.f0.rank_at(n), P.f0.rank_at(n + 1)
    rel_n = level_columns(P.phi, n)
    rel_m = level_columns(P.phi, n + 1)
    incl = transition_columns(P.f0, tuple(range(1, n + 1)), n, n + 1)
    # v is in the preimage lattice iff (v, w) is in ker[incl | rel_m] for some w
    ker = linalg.kernel_sparse(incl + rel_m, amb_m, ring)
    pre = [{i: v for i, v in k.items() if i < amb_n} for k in ker]
    pre = [p for p in pre if p]
    group, lifts = linalg.subquotient_sparse(pre, [c for c in rel_n if c], amb_n, ring)
    return group, lifts, rel_m


def kernel_transition_certificate(P: Presentation, N: int) -> dict:
    """For each ``n <= N``: do all injections ``[n] -> [n+1]`` kill ``K_n``?

    Every non-bijective injection factors through one of these, so this
    certifies that all nontrivial maps act by zero on ``K``.
    """
    out = {}
    for n in range(N + 1):
        group, lifts, rel_m = _kernel_level(P, n)
        ok = True
        if lifts:
            images = []
            for g in inj_tuples(n, n + 1):
                tcols = transition_columns(P.f0, g, n, n + 1)
                for v in lifts:
                    img: dict = {}
                    for k, c in v.items():
                        for r, x in tcols[k].items():
                            img[r] = img.get(r, 0) + c * x
                    images.append({r: x for r, x in img.items() if x})
            ok = all(linalg.in_span(rel_m, P.f0.rank_at(n + 1), images, P.ring))
        out[n] = ok
    return out


def compute_K(P: Presentation, N: int, certify: bool = True) -> FBModule:
    """``K_n = ker(W_n -> W_{n+1})`` for ``n <= N``."""
    groups = tuple(_kernel_level(P, n)[0] for n in range(N + 1))
    if certify:
        cert = kernel_transition_certificate(P, N)
        bad = [n for n, ok in cert.items() if not ok]
        if bad:
            raise CertificationError(f"nontrivial injections act nonzero on K in degrees {bad}")
    return FBModule(P.ring, groups)


def derivative_level_cokernel(P: Presentation, n: int) -> FGAbelianGroup:
    """``coker(W_n -> W_{n+1})`` computed directly from ``P``."""
    amb_m = P.f0.rank_at(n + 1)
    cols = level_columns(P.phi, n + 1) + transition_columns(P.f0, tuple(range(1, n + 1)), n, n + 1)
    return linalg.cokernel_sparse(cols, amb_m, P.ring)


def injection_inclusion(n: int) -> Injection:
    return Injection.inclusion(n, n + 1)
