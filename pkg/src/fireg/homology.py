"""FI-homology, derived derivatives and the regularity invariants.

Two independent routes compute ``H_p(W) = L_p H_0(W)``:

* ``resolution``: build a free resolution ``F_.`` of ``W`` degree by degree
  and take the homology of ``H_0(F_.)``.  Derived derivatives ``L_q D``
  come from the same resolution with ``D`` applied blockwise.
* ``koszul``: at level ``n`` the complex with ``C(n, p)`` copies of
  ``W_{n-p}`` in position ``p`` (one per ``p``-subset ``T`` of ``[n]``,
  maps along the inclusions ``[n] - T  <=  [n] - T'`` with alternating
  signs).  It is exact in ``W``, equals ``H_0`` in position 0 and is
  acyclic on free modules, so it computes the same derived functors.  It
  only touches ``W_m`` for ``m <= n``, which is much cheaper than a
  resolution at large ``n``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Optional

from fireg import _sparse, linalg
from fireg.fi import (CatAlgebraElement, FreeFIModule, FreeMorphism, Presentation,
                      inj_tuples, level_columns, transition_columns)
from fireg.functors import (NEG_INF, CertificationError, ExtendedDegree, FBModule,
                            _bijective_part, derivative_free_morphism)
from fireg.linalg import FGAbelianGroup, Ring

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# chain-complex helpers

def free_complex_homology(d_out_rank: int, d_in_cols, dim: int, ring: Ring) -> FGAbelianGroup:
    """Homology at a free module of rank ``dim``.

    ``d_out_rank`` is the rank of the outgoing differential and
    ``d_in_cols`` the sparse columns of the incoming one.
    """
    e = _sparse.eliminate(d_in_cols, dim, ring.modulus)
    return FGAbelianGroup.from_orders(dim - d_out_rank - e.rank, e.torsion())


def _rank(cols, nrows, ring):
    return _sparse.eliminate(cols, nrows, ring.modulus).rank if cols else 0


def epsilon_tensor(V: FBModule, p: int) -> FBModule:
    """Underlying groups of ``V (x) eps_p``: ``C(n, p)`` copies of ``V_{n-p}``."""
    if p < 0:
        raise ValueError("p must be >= 0")
    groups = tuple(V[n - p] * comb(n, p) if n >= p else FGAbelianGroup()
                   for n in range(V.window + 1))
    return FBModule(V.ring, groups)


# ---------------------------------------------------------------------------
# Koszul route

class _Level:
    """``W_m`` in reduced coordinates ``Z^free + sum Z/o``."""

    __slots__ = ("orders", "pi_t", "sigma")

    def __init__(self, orders, pi, sigma):
        self.orders = orders
        self.sigma = sigma
        pt: dict = {}
        for c, row in enumerate(pi):
            for r, v in row.items():
                pt.setdefault(r, []).append((c, v))
        self.pi_t = pt

    @property
    def size(self):
        return len(self.orders)

    def project(self, vec, mod):
        out: dict = {}
        for r, x in vec.items():
            for c, v in self.pi_t.get(r, ()):
                out[c] = out.get(c, 0) + x * v
        res = {}
        for c, v in out.items():
            o = self.orders[c] if mod is None else mod
            if o:
                v %= o
            if v:
                res[c] = v
        return res


class KoszulComplex:
    """Reduced-coordinate data for the Koszul complexes of one presentation."""

    def __init__(self, P: Presentation):
        self.P = P
        self.mod = P.ring.modulus
        self._levels: dict = {}
        self._cofaces: dict = {}

    def level(self, m: int) -> _Level:
        if m not in self._levels:
            P = self.P
            amb = P.f0.rank_at(m)
            e = _sparse.eliminate(level_columns(P.phi, m), amb, self.mod, track_rows=True)
            self._levels[m] = _Level(*e.coordinates())
        return self._levels[m]

    def coface(self, m: int, k: int) -> list:
        """Reduced matrix (sparse columns) of ``W_m -> W_{m+1}`` skipping ``k``."""
        key = (m, k)
        if key not in self._cofaces:
            src, dst = self.level(m), self.level(m + 1)
            g = tuple(x if x < k else x + 1 for x in range(1, m + 1))
            tcols = transition_columns(self.P.f0, g, m, m + 1)
            cols = []
            for s in src.sigma:
                img: dict = {}
                for r, x in s.items():
                    for rr, v in tcols[r].items():
                        img[rr] = img.get(rr, 0) + x * v
                cols.append(dst.project(img, self.mod))
            self._cofaces[key] = cols
        return self._cofaces[key]

    def homology_at(self, n: int, pmax: int) -> list:
        """``[H_0(W)_n, ..., H_pmax(W)_n]``."""
        mod = self.mod
        top = pmax + 1
        subsets, offs, A, tors = {}, {}, {}, {}
        for q in range(top + 1):
            if q > n:
                subsets[q], A[q], tors[q] = [], 0, []
                continue
            g = self.level(n - q).size
            subsets[q] = list(combinations(range(1, n + 1), q))
            offs[q] = {T: i * g for i, T in enumerate(subsets[q])}
            A[q] = len(subsets[q]) * g
            orders = self.level(n - q).orders
            tors[q] = [offs[q][T] + c for T in subsets[q] for c, o in enumerate(orders)
                       if o and mod is None]
        order_of = {}
        for q in range(top + 1):
            if A[q] and mod is None:
                orders = self.level(n - q).orders
                order_of[q] = {offs[q][T] + c: o for T in subsets[q]
                               for c, o in enumerate(orders) if o}
            else:
                order_of[q] = {}

        d = {}
        for q in range(1, top + 1):
            cols = []
            if A[q]:
                m = n - q
                g = self.level(m).size
                for T in subsets[q]:
                    for c in range(g):
                        col: dict = {}
                        for i, t in enumerate(T):
                            Tp = T[:i] + T[i + 1:]
                            k = t - i
                            sign = -1 if i % 2 else 1
                            base = offs[q - 1][Tp]
                            for r, v in self.coface(m, k)[c].items():
                                col[base + r] = col.get(base + r, 0) + sign * v
                        cols.append(_reduce_col(col, order_of[q - 1], mod))
            d[q] = cols

        tot_cols, tot_dim = {}, {}
        for q in range(top + 1):
            tot_dim[q] = A[q] + (len(tors[q - 1]) if q >= 1 else 0)
        for q in range(1, top + 1):
            tot_cols[q] = self._total_differential(q, d, A, tors, order_of, mod)
        rt = {}
        for q in range(1, top + 1):
            if mod is None:
                rt[q] = _sparse.rank_torsion(tot_cols[q], tot_dim[q - 1])
            else:
                rt[q] = (_sparse.eliminate(tot_cols[q], tot_dim[q - 1], mod).rank, [])
        out = []
        for p in range(pmax + 1):
            r_out = rt[p][0] if p >= 1 else 0
            r_in, tors = rt[p + 1]
            out.append(FGAbelianGroup.from_orders(tot_dim[p] - r_out - r_in, tors))
        return out

    @staticmethod
    def _total_differential(q, d, A, tors, order_of, mod):
        """Columns of ``Tot_q -> Tot_{q-1}``; ``Tot_q = A_q + T_{q-1}``.

        ``(x, y) -> (d x + rho y, -e y - h x)`` where ``rho`` embeds the
        torsion relations, ``d rho = rho e`` and ``d d = rho h``.
        """
        tpos = {q2: {r: i for i, r in enumerate(tors[q2])} for q2 in tors}
        cols = []
        prev = d.get(q - 1, [])
        for x_col in d[q]:
            col = dict(x_col)
            if q >= 2 and mod is None and tors[q - 2]:
                dd: dict = {}
                for r, v in x_col.items():
                    for rr, w in prev[r].items():
                        dd[rr] = dd.get(rr, 0) + v * w
                oo = order_of[q - 2]
                for rr, v in dd.items():
                    if not v:
                        continue
                    o = oo.get(rr)
                    if o is None:
                        raise CertificationError("d^2 has a free component in the Koszul complex")
                    if v % o:
                        raise CertificationError("d^2 leaves the relation lattice")
                    col[A[q - 1] + tpos[q - 2][rr]] = -(v // o)
            cols.append(col)
        if q >= 1 and mod is None:
            for y_idx, r in enumerate(tors[q - 1]):
                o = order_of[q - 1][r]
                col = {r: o}
                if q >= 2:
                    oo = order_of[q - 2]
                    for rr, v in prev[r].items():
                        w = v * o
                        if not w:
                            continue
                        ot = oo.get(rr)
                        if ot is None or w % ot:
                            raise CertificationError("torsion maps outside torsion")
                        col[A[q - 1] + tpos[q - 2][rr]] = -(w // ot)
                cols.append({k: v for k, v in col.items() if v})
        return cols


def _reduce_col(col, orders, mod):
    out = {}
    for r, v in col.items():
        if mod is not None:
            v %= mod
        else:
            o = orders.get(r)
            if o:
                v %= o
        if v:
            out[r] = v
    return out


def koszul_homology(P: Presentation, pmax: int, N: int, complex_: Optional[KoszulComplex] = None) -> list:
    """``[H_0, ..., H_pmax]`` as FB-modules on ``[0..N]`` via Koszul complexes."""
    kc = complex_ or KoszulComplex(P)
    per_level = [kc.homology_at(n, pmax) for n in range(N + 1)]
    return [FBModule(P.ring, tuple(per_level[n][p] for n in range(N + 1))) for p in range(pmax + 1)]


# ---------------------------------------------------------------------------
# resolution route

@dataclass
class Resolution:
    """``F_length -> ... -> F_1 -> F_0 (-> W)``, exact through level ``window``.

    ``maps[s]`` is ``d_{s+1}: F_{s+1} -> F_s``; ``maps[0]`` is the
    presentation map.  ``certificates[s][n]`` records that the image of
    ``d_{s+2}`` equals the kernel of ``d_{s+1}`` at level ``n``.
    """

    ring: Ring
    maps: list
    window: int
    certificates: list = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.maps)

    def module(self, s: int) -> FreeFIModule:
        if s == 0:
            return self.maps[0].target
        return self.maps[s - 1].source

    def generator_degrees(self) -> list:
        return [list(self.module(s).degrees) for s in range(self.length + 1)]


def _element_from_vector(vec, degrees, n) -> dict:
    """Split an ambient vector of ``F_n`` into per-block category elements."""
    out = {}
    off = 0
    for j, a in enumerate(degrees):
        basis = inj_tuples(a, n)
        terms = [(vec[off + t], f) for t, f in enumerate(basis) if vec.get(off + t)]
        if terms:
            out[j] = CatAlgebraElement.make(a, n, terms)
        off += len(basis)
    return out


def _resolve_stage(d: FreeMorphism, N: int, ring: Ring, redundant: bool):
    """Free module mapping onto ``ker d`` at every level ``<= N``.

    At each degree the kernel basis is scanned in order and every vector
    outside the span of the current image becomes a new generator (with its
    whole symmetric-group orbit added to the image).  Once every basis
    vector lies in the image, image and kernel agree at that level.
    """
    F = d.source
    mod = ring.modulus
    degs: list = []
    ents: dict = {}
    certs = {}
    for n in range(N + 1):
        amb = F.rank_at(n)
        if redundant and n == min(F.degrees, default=0):
            # a generator mapping to zero; the next stage must resolve it
            degs.append(n)
        if amb == 0:
            certs[n] = True
            continue
        Z = linalg.kernel_sparse(level_columns(d, n), d.target.rank_at(n), ring)
        if mod is None:
            Z = linalg.lll_reduce(Z, amb)
        cur = FreeMorphism(FreeFIModule(tuple(degs)), F, dict(ents))
        B = [c for c in level_columns(cur, n) if c]
        chosen = []
        start = 0
        while start < len(Z):
            member = linalg.in_span(B, amb, Z[start:], ring) if B else [False] * (len(Z) - start)
            missing = [start + t for t, ok in enumerate(member) if not ok]
            if not missing:
                break
            v = Z[missing[0]]
            start = missing[0] + 1
            block = _element_from_vector(v, F.degrees, n)
            k = len(degs)
            degs.append(n)
            for j, el in block.items():
                ents[(k, j)] = el
            chosen.append(k)
            one = FreeMorphism(FreeFIModule((n,)), F, {(0, j): el for j, el in block.items()})
            B.extend(c for c in level_columns(one, n) if c)
        if Z and not all(linalg.in_span(B, amb, Z, ring)):
            raise CertificationError(f"image does not cover the kernel at level {n}")
        certs[n] = True
        if redundant and chosen:
            # a duplicate of the first new generator
            k = len(degs)
            degs.append(n)
            for (i, j), el in list(ents.items()):
                if i == chosen[0]:
                    ents[(k, j)] = el
    out = FreeMorphism(FreeFIModule(tuple(degs)), F, ents)
    comp = out.then(d)
    if any(c % mod if mod else c for e in comp.entries.values() for c, _ in e.terms):
        raise CertificationError("consecutive maps in the resolution do not compose to zero")
    return out, certs


def build_resolution(P: Presentation, length: int, N: int, redundant: bool = False) -> Resolution:
    """Free resolution ``F_length -> ... -> F_0`` of ``W`` exact at levels ``<= N``.

    Generators are chosen by increasing degree; at each degree every
    kernel basis vector not yet in the image becomes a generator.
    ``redundant=True`` duplicates the first new generator of each degree
    and adds one generator mapping to zero per stage, giving a
    structurally different resolution of the same module.
    """
    if length < 1:
        raise ValueError("resolution length must be >= 1")
    maps = [P.phi]
    certs = []
    for s in range(1, length):
        nxt, cert = _resolve_stage(maps[-1], N, P.ring, redundant)
        log.debug("stage %d: generator degrees %s", s + 1, list(nxt.source.degrees))
        maps.append(nxt)
        certs.append(cert)
    return Resolution(P.ring, maps, N, certs)


def _h0_complex_homology(res: Resolution, p: int, n: int) -> FGAbelianGroup:
    ring = res.ring
    dim = sum(1 for a in res.module(p).degrees if a == n)
    if not dim:
        return FGAbelianGroup()
    size = dim * len(inj_tuples(n, n))
    if p >= 1:
        part = _bijective_part(res.maps[p - 1], n)
        r_out = _rank(level_columns(part, n), part.target.rank_at(n), ring)
    else:
        r_out = 0
    if p < res.length:
        part = _bijective_part(res.maps[p], n)
        cols = level_columns(part, n)
    else:
        raise ValueError("resolution too short")
    return free_complex_homology(r_out, cols, size, ring)


def resolution_homology(res: Resolution, p: int, N: Optional[int] = None) -> FBModule:
    N = res.window if N is None else N
    if N > res.window:
        raise ValueError(f"window {N} exceeds the resolution window {res.window}")
    if p + 1 > res.length:
        raise ValueError(f"H_{p} needs a resolution of length {p + 1}")
    return FBModule(res.ring, tuple(_h0_complex_homology(res, p, n) for n in range(N + 1)))


@dataclass
class HomologyReport:
    p: int
    H: FBModule
    observed_degree: ExtendedDegree
    f: ExtendedDegree


def fi_homology(P: Presentation, p: int, N: int, method: str = "resolution",
                resolution: Optional[Resolution] = None) -> HomologyReport:
    """``H_p(W)`` on ``[0..N]`` with its degree and ``f_p = deg - p``."""
    if method == "resolution":
        res = resolution or build_resolution(P, p + 1, N)
        H = resolution_homology(res, p, N)
    elif method == "koszul":
        H = koszul_homology(P, p, N)[p]
    else:
        raise ValueError(f"unknown method {method!r}")
    deg = H.degree()
    return HomologyReport(p, H, deg, deg - p)


def f_invariant(P: Presentation, p: int, N: int, method: str = "resolution") -> ExtendedDegree:
    """``f_p(W) = deg H_p(W) - p``; flagged uncertified if ``H_p`` is nonzero at ``N``."""
    return fi_homology(P, p, N, method).f


def derived_derivative(P: Presentation, q: int, N: int,
                       resolution: Optional[Resolution] = None) -> FBModule:
    """``L_q D(W)`` on ``[0..N]``: homology of ``D`` applied to a resolution.

    ``D F`` at level ``n`` involves generators of ``F`` up to degree
    ``n + 1``, so the resolution must be exact through level ``N + 1``.
    """
    res = resolution or build_resolution(P, q + 1, N + 1)
    if res.length < q + 1 or res.window < N + 1:
        raise ValueError("resolution too short or too narrow for L_q D")
    ring = res.ring
    Dmaps = [derivative_free_morphism(m) for m in res.maps[:q + 1]]
    groups = []
    for n in range(N + 1):
        dim = (Dmaps[q - 1].source if q >= 1 else Dmaps[0].target).rank_at(n)
        if q >= 1:
            A = Dmaps[q - 1]
            r_out = _rank(level_columns(A, n), A.target.rank_at(n), ring)
        else:
            r_out = 0
        B = Dmaps[q]
        groups.append(free_complex_homology(r_out, level_columns(B, n), dim, ring))
    return FBModule(ring, tuple(groups))


def zero_degree() -> ExtendedDegree:
    return ExtendedDegree(NEG_INF, True)
