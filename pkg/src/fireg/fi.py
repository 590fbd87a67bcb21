"""The category FI, free FI-modules and finitely presented FI-modules.

Sets are ``[n] = {1, ..., n}``; an injection ``[a] -> [n]`` is stored as
its image tuple ``(f(1), ..., f(a))``.  The basis of ``M(a)_n`` is
``Inj(a, n)`` in lexicographic order, and the basis of a free module
``M(a_1) + ... + M(a_m)`` at level ``n`` is the concatenation of these
blocks in generator order.

A morphism ``M(b) -> M(a)`` is an element ``x`` of ``M(a)_b``; it sends a
basis element ``h`` of ``M(b)_n`` to ``h . x`` (post-composition with
``h``).  A :class:`FreeMorphism` is a matrix of such elements with rows
indexed by source generators and columns by target generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from math import perm
from typing import Mapping, Sequence

from fireg.linalg import FGAbelianGroup, IntMatrix, Ring, ZZ, cokernel_sparse


class PresentationError(ValueError):
    """A presentation or one of its parts violates a structural invariant."""


@dataclass(frozen=True, order=True)
class Injection:
    """An injective map ``[len(image)] -> [n]``."""

    n: int
    image: tuple

    def __post_init__(self):
        object.__setattr__(self, "image", tuple(self.image))
        problem = injection_problem(self.image, self.n)
        if problem:
            raise PresentationError(problem)

    @property
    def arity(self) -> int:
        return len(self.image)

    def __call__(self, x: int) -> int:
        return self.image[x - 1]

    def __str__(self):
        return f"{self.image}:[{self.arity}]->[{self.n}]"

    @classmethod
    def identity(cls, n: int) -> "Injection":
        return cls(n, tuple(range(1, n + 1)))

    @classmethod
    def inclusion(cls, n: int, m: int) -> "Injection":
        """The order-preserving inclusion ``[n] -> [m]``."""
        return cls(m, tuple(range(1, n + 1)))


def injection_problem(image, n):
    if n < 0:
        return f"negative target size {n}"
    if len(set(image)) != len(image):
        return f"injection {tuple(image)} repeats a value"
    for v in image:
        if not isinstance(v, int) or not 1 <= v <= n:
            return f"injection {tuple(image)} has value {v} outside 1..{n}"
    return None


@lru_cache(maxsize=None)
def inj_tuples(a: int, n: int) -> tuple:
    """``Inj(a, n)`` as image tuples, in lexicographic order."""
    if a < 0 or n < 0:
        raise ValueError("negative size")
    return tuple(permutations(range(1, n + 1), a))


@lru_cache(maxsize=None)
def inj_index(a: int, n: int) -> dict:
    return {f: i for i, f in enumerate(inj_tuples(a, n))}


def count_injections(a: int, n: int) -> int:
    return perm(n, a) if 0 <= a <= n else 0


def enumerate_injections(a: int, n: int) -> list:
    return [Injection(n, f) for f in inj_tuples(a, n)]


def compose(g: Injection, f: Injection) -> Injection:
    """``g . f`` for ``f: [a] -> [n]`` and ``g: [n] -> [n']``."""
    if f.n != g.arity:
        raise PresentationError(f"cannot compose {g} after {f}: [{f.n}] is not [{g.arity}]")
    return Injection(g.n, tuple(g.image[x - 1] for x in f.image))


def _comp(h: tuple, g: tuple) -> tuple:
    return tuple([h[x - 1] for x in g])


@dataclass(frozen=True)
class CatAlgebraElement:
    """A Z-linear combination of injections ``[arity] -> [target]``.

    ``terms`` is a tuple of ``(coefficient, image_tuple)`` pairs.  Use
    :meth:`make` to get the normalized form (merged, sorted, no zeros).
    """

    arity: int
    target: int
    terms: tuple = ()

    @classmethod
    def make(cls, arity: int, target: int, terms) -> "CatAlgebraElement":
        acc: dict = {}
        for c, g in terms:
            g = tuple(g.image) if isinstance(g, Injection) else tuple(g)
            acc[g] = acc.get(g, 0) + int(c)
        return cls(arity, target, tuple((c, g) for g, c in sorted(acc.items()) if c))

    def normalized(self) -> "CatAlgebraElement":
        return CatAlgebraElement.make(self.arity, self.target, self.terms)

    def is_zero(self) -> bool:
        return not any(c for c, _ in self.terms)

    def problems(self) -> list:
        out = []
        seen = set()
        for c, g in self.terms:
            if len(g) != self.arity:
                out.append(f"term {g} has arity {len(g)}, expected {self.arity}")
            p = injection_problem(g, self.target)
            if p:
                out.append(p)
            if c == 0:
                out.append(f"zero coefficient stored for {g}")
            if g in seen:
                out.append(f"duplicate injection {g} not merged")
            seen.add(g)
        return out

    def __mul__(self, other: "CatAlgebraElement") -> "CatAlgebraElement":
        """Category-algebra product ``x * y``: terms ``g . g'``.

        ``self`` lies in ``M(a)_b`` and ``other`` in ``M(c)_a``; the product
        lies in ``M(c)_b``.
        """
        if other.target != self.arity:
            raise PresentationError("incompatible category-algebra product")
        return CatAlgebraElement.make(
            other.arity, self.target,
            [(c * d, _comp(g, h)) for c, g in self.terms for d, h in other.terms])

    def __add__(self, other: "CatAlgebraElement") -> "CatAlgebraElement":
        if (self.arity, self.target) != (other.arity, other.target):
            raise PresentationError("adding elements of different spaces")
        return CatAlgebraElement.make(self.arity, self.target, self.terms + other.terms)

    def scale(self, k: int) -> "CatAlgebraElement":
        return CatAlgebraElement.make(self.arity, self.target, [(k * c, g) for c, g in self.terms])


@dataclass(frozen=True)
class FreeFIModule:
    """``M(a_1) + ... + M(a_m)``; generator order indexes the blocks."""

    degrees: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))

    def __len__(self):
        return len(self.degrees)

    def rank_at(self, n: int) -> int:
        return sum(count_injections(a, n) for a in self.degrees)

    def offsets(self, n: int) -> list:
        out, s = [], 0
        for a in self.degrees:
            out.append(s)
            s += count_injections(a, n)
        return out


@dataclass(frozen=True)
class FreeMorphism:
    """A map of free FI-modules ``source -> target``.

    ``entries[(i, j)]`` is the element of ``M(target.degrees[j])_{source.degrees[i]}``
    giving the image of source generator ``i`` in target block ``j``.
    Missing keys are zero.
    """

    source: FreeFIModule
    target: FreeFIModule
    entries: Mapping = field(default_factory=dict)

    def entry(self, i: int, j: int) -> CatAlgebraElement:
        e = self.entries.get((i, j))
        if e is None:
            return CatAlgebraElement(self.target.degrees[j], self.source.degrees[i])
        return e

    def nonzero_entries(self):
        for (i, j), e in sorted(self.entries.items()):
            if not e.is_zero():
                yield i, j, e

    @classmethod
    def identity(cls, F: FreeFIModule) -> "FreeMorphism":
        ents = {(i, i): CatAlgebraElement.make(a, a, [(1, tuple(range(1, a + 1)))])
                for i, a in enumerate(F.degrees)}
        return cls(F, F, ents)

    def then(self, other: "FreeMorphism") -> "FreeMorphism":
        """Composite ``other . self`` (first ``self``, then ``other``)."""
        if self.target != other.source:
            raise PresentationError("morphisms are not composable")
        ents: dict = {}
        for i, j, x in self.nonzero_entries():
            for jj, k, y in other.nonzero_entries():
                if jj != j:
                    continue
                p = x * y
                ents[(i, k)] = ents[(i, k)] + p if (i, k) in ents else p
        ents = {key: e for key, e in ents.items() if not e.is_zero()}
        return FreeMorphism(self.source, other.target, ents)

    def problems(self) -> list:
        out = []
        m, k = len(self.source), len(self.target)
        for key, e in sorted(self.entries.items()):
            i, j = key
            if not (0 <= i < m and 0 <= j < k):
                out.append(f"entry {key} out of range for {m} sources x {k} targets")
                continue
            b, a = self.source.degrees[i], self.target.degrees[j]
            if (e.arity, e.target) != (a, b):
                out.append(f"entry {key}: element of M({e.arity})_{e.target}, expected M({a})_{b}")
            if not e.is_zero() and a > b:
                out.append(f"entry {key} nonzero but generator degree {a} > relation degree {b}")
            out.extend(f"entry {key}: {p}" for p in e.problems())
        for name, F in (("source", self.source), ("target", self.target)):
            for d in F.degrees:
                if d < 0:
                    out.append(f"{name} has negative degree {d}")
        return out


def level_columns(phi: FreeMorphism, n: int) -> list:
    """Sparse columns of ``level_matrix(phi, n)``."""
    src, tgt = phi.source.degrees, phi.target.degrees
    toff = phi.target.offsets(n)
    by_source: dict = {}
    for i, j, e in phi.nonzero_entries():
        by_source.setdefault(i, []).append((j, e))
    cols = []
    for i, b in enumerate(src):
        parts = by_source.get(i, ())
        for h in inj_tuples(b, n):
            col: dict = {}
            for j, e in parts:
                idx = inj_index(tgt[j], n)
                base = toff[j]
                for c, g in e.terms:
                    r = base + idx[_comp(h, g)]
                    v = col.get(r, 0) + c
                    if v:
                        col[r] = v
                    else:
                        col.pop(r, None)
            cols.append(col)
    return cols


def level_matrix(phi: FreeMorphism, n: int) -> IntMatrix:
    """Matrix of ``phi`` at level ``n`` (rows: target basis, cols: source basis)."""
    return IntMatrix.from_columns(level_columns(phi, n), phi.target.rank_at(n))


def transition_columns(F: FreeFIModule, g: Sequence[int], n: int, m: int) -> list:
    """Sparse columns of the map ``F_n -> F_m`` induced by ``g: [n] -> [m]``."""
    g = tuple(g)
    off = F.offsets(m)
    cols = []
    for j, a in enumerate(F.degrees):
        idx = inj_index(a, m)
        for f in inj_tuples(a, n):
            cols.append({off[j] + idx[_comp(g, f)]: 1})
    return cols


@dataclass(frozen=True)
class Presentation:
    """``W = coker(phi: f1 -> f0)`` over ``ring``."""

    ring: Ring
    phi: FreeMorphism

    @property
    def f0(self) -> FreeFIModule:
        return self.phi.target

    @property
    def f1(self) -> FreeFIModule:
        return self.phi.source

    @property
    def gen_degree_max(self) -> int:
        return max(self.f0.degrees, default=-1)

    @property
    def rel_degree_max(self) -> int:
        return max(self.f1.degrees, default=-1)

    def with_ring(self, ring: Ring) -> "Presentation":
        return Presentation(ring, self.phi)

    def __str__(self):
        return (f"Presentation over {self.ring}: gens {list(self.f0.degrees)}, "
                f"rels {list(self.f1.degrees)}, {len(self.phi.entries)} entries")


def presentation(gens: Sequence[int], rels: Sequence[int] = (), entries=None,
                 ring: Ring = ZZ) -> Presentation:
    """Build a presentation from degree lists and ``{(i, j): terms}``.

    ``terms`` may be a :class:`CatAlgebraElement` or a list of
    ``(coeff, image_tuple)`` pairs.  Over ``Z/l`` coefficients are reduced
    into ``[0, l)``.
    """
    f0, f1 = FreeFIModule(tuple(gens)), FreeFIModule(tuple(rels))
    ents = {}
    for (i, j), t in (entries or {}).items():
        if isinstance(t, CatAlgebraElement):
            t = t.terms
        if ring.modulus is not None:
            t = [(c % ring.modulus, g) for c, g in t]
        t = CatAlgebraElement.make(f0.degrees[j], f1.degrees[i], t)
        if not t.is_zero():
            ents[(i, j)] = t
    return Presentation(ring, FreeMorphism(f1, f0, ents))


def free_module(*degrees: int, ring: Ring = ZZ) -> Presentation:
    return presentation(degrees, ring=ring)


def torsion_module(d: int, ring: Ring = ZZ) -> Presentation:
    """``T(d) = coker(M(d+1) -> M(d))`` along the inclusion ``[d] -> [d+1]``.

    It is ``M(d)_d = Z[S_d]`` in degree ``d`` and zero elsewhere.
    """
    return presentation([d], [d + 1], {(0, 0): [(1, tuple(range(1, d + 1)))]}, ring)


def scaled_inclusion_module(k: int = 2, ring: Ring = ZZ) -> Presentation:
    """``coker(M(1) --k*iota--> M(0))``: ``Z`` in degree 0, ``Z/k`` above."""
    return presentation([0], [1], {(0, 0): [(k, ())]}, ring)


def direct_sum(*ps: Presentation) -> Presentation:
    ring = ps[0].ring
    gens, rels, ents = [], [], {}
    for p in ps:
        if p.ring != ring:
            raise PresentationError("direct sum of presentations over different rings")
        go, ro = len(gens), len(rels)
        for (i, j), e in p.phi.entries.items():
            ents[(i + ro, j + go)] = e
        gens.extend(p.f0.degrees)
        rels.extend(p.f1.degrees)
    return presentation(gens, rels, ents, ring)


@dataclass
class LevelGroup:
    """``W_n`` as ``Z^ambient_rank / span(relation columns)``."""

    degree: int
    ambient_rank: int
    relation_columns: list = field(repr=False)
    ring: Ring = ZZ

    @property
    def relation_matrix(self) -> IntMatrix:
        return IntMatrix.from_columns(self.relation_columns, self.ambient_rank)

    @property
    def group(self) -> FGAbelianGroup:
        return cokernel_sparse(self.relation_columns, self.ambient_rank, self.ring)


def evaluate(P: Presentation, n: int) -> LevelGroup:
    return LevelGroup(n, P.f0.rank_at(n), level_columns(P.phi, n), P.ring)


def transition(P: Presentation, g: Injection) -> IntMatrix:
    """Ambient matrix of ``W_n -> W_m`` induced by ``g: [n] -> [m]``."""
    n = g.arity
    return IntMatrix.from_columns(transition_columns(P.f0, g.image, n, g.n), P.f0.rank_at(g.n))


def validate(P: Presentation) -> list:
    """Structural diagnostics; an empty list means the presentation is valid."""
    out = []
    if not isinstance(P.ring, Ring):
        out.append(f"unknown ring {P.ring!r}")
    out.extend(P.phi.problems())
    return out
