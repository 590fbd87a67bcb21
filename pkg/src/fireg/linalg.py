"""Exact integer and prime-field linear algebra.

Everything here is exact: Python integers are arbitrary precision, so no
overflow can occur during Smith reductions.  ``smith_normal_form`` is the
dense reference algorithm with full transforms; the remaining operations
run on the sparse eliminator in :mod:`fireg._sparse`, which is what the
FI-module code uses for its (large, sparse) level matrices.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import flint

from fireg import _sparse


class LinalgError(ValueError):
    """Raised on malformed linear-algebra input."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class Ring:
    """Coefficient ring: ``Z`` (``modulus is None``) or ``Z/l`` with l prime."""

    modulus: Optional[int] = None

    def __post_init__(self):
        if self.modulus is not None and not is_prime(self.modulus):
            raise LinalgError(f"Z/{self.modulus} is not a field: {self.modulus} is not prime")

    @property
    def is_field(self) -> bool:
        return self.modulus is not None

    def __str__(self):
        return "Z" if self.modulus is None else f"Z/{self.modulus}"

    @classmethod
    def parse(cls, text: str) -> "Ring":
        t = text.strip().lower()
        if t in ("z", "zz"):
            return ZZ
        for prefix in ("mod", "z/", "f"):
            if t.startswith(prefix) and t[len(prefix):].isdigit():
                return cls(int(t[len(prefix):]))
        raise LinalgError(f"unknown ring {text!r}")


ZZ = Ring()


@dataclass(frozen=True)
class IntMatrix:
    """Dense integer matrix, row-major and immutable."""

    rows: int
    cols: int
    entries: tuple = field(repr=False)

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise LinalgError("negative dimension")
        if len(self.entries) != self.rows * self.cols:
            raise LinalgError(
                f"{self.rows}x{self.cols} matrix needs {self.rows * self.cols} entries, "
                f"got {len(self.entries)}")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], ncols: Optional[int] = None) -> "IntMatrix":
        rows = [list(r) for r in rows]
        if ncols is None:
            ncols = len(rows[0]) if rows else 0
        if any(len(r) != ncols for r in rows):
            raise LinalgError("ragged rows")
        return cls(len(rows), ncols, tuple(int(x) for r in rows for x in r))

    @classmethod
    def from_columns(cls, columns: Sequence[dict], nrows: int) -> "IntMatrix":
        """Build from sparse column dicts ``{row: value}``."""
        data = [0] * (nrows * len(columns))
        nc = len(columns)
        for j, col in enumerate(columns):
            for i, v in col.items():
                data[i * nc + j] = v
        return cls(nrows, nc, tuple(data))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "IntMatrix":
        return cls(rows, cols, (0,) * (rows * cols))

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls(n, n, tuple(int(i == j) for i in range(n) for j in range(n)))

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i * self.cols + j]

    def tolist(self) -> list:
        c = self.cols
        return [list(self.entries[i * c:(i + 1) * c]) for i in range(self.rows)]

    def row(self, i: int) -> tuple:
        return self.entries[i * self.cols:(i + 1) * self.cols]

    def column(self, j: int) -> tuple:
        return tuple(self.entries[i * self.cols + j] for i in range(self.rows))

    def columns_sparse(self) -> list:
        c = self.cols
        cols = [{} for _ in range(c)]
        for idx, v in enumerate(self.entries):
            if v:
                cols[idx % c][idx // c] = v
        return cols

    def transpose(self) -> "IntMatrix":
        return IntMatrix.from_rows([list(self.column(j)) for j in range(self.cols)], self.rows)

    def hstack(self, other: "IntMatrix") -> "IntMatrix":
        if self.rows != other.rows:
            raise LinalgError("row counts differ")
        return IntMatrix.from_rows([list(a) + list(b) for a, b in zip(self.tolist(), other.tolist())],
                                   self.cols + other.cols)

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise LinalgError(f"shape mismatch {self.rows}x{self.cols} @ {other.rows}x{other.cols}")
        b = other.tolist()
        out = []
        for r in self.tolist():
            acc = [0] * other.cols
            for k, a in enumerate(r):
                if a:
                    bk = b[k]
                    for j in range(other.cols):
                        acc[j] += a * bk[j]
            out.append(acc)
        return IntMatrix.from_rows(out, other.cols)

    def apply(self, vec: Sequence[int]) -> list:
        if len(vec) != self.cols:
            raise LinalgError("vector length mismatch")
        return [sum(a * x for a, x in zip(self.row(i), vec)) for i in range(self.rows)]

    def is_zero(self) -> bool:
        return not any(self.entries)

    def det(self) -> int:
        """Determinant by fraction-free (Bareiss) elimination."""
        if self.rows != self.cols:
            raise LinalgError("det of non-square matrix")
        n = self.rows
        a = self.tolist()
        sign, prev = 1, 1
        for k in range(n - 1):
            if a[k][k] == 0:
                for r in range(k + 1, n):
                    if a[r][k]:
                        a[k], a[r] = a[r], a[k]
                        sign = -sign
                        break
                else:
                    return 0
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            prev = a[k][k]
        return sign * a[n - 1][n - 1] if n else 1


@dataclass(frozen=True)
class FGAbelianGroup:
    """A finitely generated abelian group ``Z^r + Z/d_1 + ... + Z/d_k``.

    Over a prime field only ``free_rank`` is used and means the dimension.
    """

    free_rank: int = 0
    invariant_factors: tuple = ()

    def __post_init__(self):
        ds = tuple(self.invariant_factors)
        object.__setattr__(self, "invariant_factors", ds)
        if self.free_rank < 0:
            raise LinalgError("negative free rank")
        for d in ds:
            if d < 2:
                raise LinalgError(f"invariant factor {d} must be >= 2")
        for a, b in zip(ds, ds[1:]):
            if b % a:
                raise LinalgError(f"divisibility chain broken: {a} does not divide {b}")

    @classmethod
    def from_orders(cls, free_rank: int, orders: Iterable[int]) -> "FGAbelianGroup":
        return cls(free_rank, tuple(_sparse.normalize_factors(orders)))

    def is_zero(self) -> bool:
        return self.free_rank == 0 and not self.invariant_factors

    @property
    def num_generators(self) -> int:
        return self.free_rank + len(self.invariant_factors)

    def __add__(self, other: "FGAbelianGroup") -> "FGAbelianGroup":
        return FGAbelianGroup.from_orders(self.free_rank + other.free_rank,
                                          self.invariant_factors + other.invariant_factors)

    def __mul__(self, k: int) -> "FGAbelianGroup":
        """Direct sum of ``k`` copies."""
        return FGAbelianGroup.from_orders(self.free_rank * k, self.invariant_factors * k)

    __rmul__ = __mul__

    def format(self, ring: Ring = ZZ) -> str:
        if self.is_zero():
            return "0"
        if ring.is_field:
            return f"F{ring.modulus}" + (f"^{self.free_rank}" if self.free_rank != 1 else "")
        parts = []
        if self.free_rank:
            parts.append("Z" if self.free_rank == 1 else f"Z^{self.free_rank}")
        for d, k in Counter(self.invariant_factors).items():
            parts.append(f"Z/{d}" if k == 1 else f"(Z/{d})^{k}")
        return " + ".join(parts)

    def __str__(self):
        return self.format()


def _as_columns(A) -> tuple:
    if isinstance(A, IntMatrix):
        return A.columns_sparse(), A.rows
    raise LinalgError(f"expected IntMatrix, got {type(A).__name__}")


def smith_normal_form(A: IntMatrix):
    """Smith normal form with transforms.

    Returns ``(U, S, V)`` with ``U @ A @ V == S``, ``U`` and ``V``
    unimodular and ``S`` diagonal with ``S[0,0] | S[1,1] | ...`` and
    nonnegative entries.  The pivot at each step is the nonzero entry of
    least absolute value in the remaining block, ties broken by (row, col).
    """
    m, n = A.rows, A.cols
    a = A.tolist()
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(i, k):
        a[i], a[k] = a[k], a[i]
        U[i], U[k] = U[k], U[i]

    def swap_cols(j, k):
        for r in a:
            r[j], r[k] = r[k], r[j]
        for r in V:
            r[j], r[k] = r[k], r[j]

    def add_row(dst, src, q):  # row dst += q * row src
        ra, rs = a[dst], a[src]
        for j in range(n):
            if rs[j]:
                ra[j] += q * rs[j]
        ua, us = U[dst], U[src]
        for j in range(m):
            if us[j]:
                ua[j] += q * us[j]

    def add_col(dst, src, q):  # col dst += q * col src
        for r in a:
            if r[src]:
                r[dst] += q * r[src]
        for r in V:
            if r[src]:
                r[dst] += q * r[src]

    for t in range(min(m, n)):
        while True:
            best = None
            for i in range(t, m):
                row = a[i]
                for j in range(t, n):
                    v = row[j]
                    if v and (best is None or abs(v) < best[0]):
                        best = (abs(v), i, j)
            if best is None:
                break
            _, i, j = best
            if i != t:
                swap_rows(i, t)
            if j != t:
                swap_cols(j, t)
            p = a[t][t]
            clean = True
            for i in range(t + 1, m):
                if a[i][t]:
                    add_row(i, t, -(a[i][t] // p))
                    if a[i][t]:
                        clean = False
            for j in range(t + 1, n):
                if a[t][j]:
                    add_col(j, t, -(a[t][j] // p))
                    if a[t][j]:
                        clean = False
            if not clean:
                continue
            bad = None
            for i in range(t + 1, m):
                if any(x % p for x in a[i][t + 1:]):
                    bad = i
                    break
            if bad is None:
                break
            add_row(t, bad, 1)
        if best is None:
            break
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            U[t] = [-x for x in U[t]]
    return (IntMatrix.from_rows(U, m), IntMatrix.from_rows(a, n), IntMatrix.from_rows(V, n))


def diagonal(S: IntMatrix) -> list:
    return [S[i, i] for i in range(min(S.rows, S.cols))]


def cokernel(A: IntMatrix, ring: Ring = ZZ) -> FGAbelianGroup:
    """``R^rows / colspan(A)`` in invariant-factor form (dimension over a field)."""
    cols, nrows = _as_columns(A)
    return cokernel_sparse(cols, nrows, ring)


def cokernel_sparse(cols, nrows: int, ring: Ring = ZZ) -> FGAbelianGroup:
    e = _sparse.eliminate(cols, nrows, ring.modulus)
    return FGAbelianGroup.from_orders(nrows - e.rank, e.torsion())


def rank(A: IntMatrix, ring: Ring = ZZ) -> int:
    cols, nrows = _as_columns(A)
    return _sparse.eliminate(cols, nrows, ring.modulus).rank


def rank_mod(A: IntMatrix, ell: int) -> int:
    """Rank of ``A`` over ``Z/ell``."""
    if not is_prime(ell):
        raise LinalgError(f"{ell} is not prime")
    return rank(A, Ring(ell))


def kernel_basis(A: IntMatrix, ring: Ring = ZZ) -> IntMatrix:
    """Columns form a basis of ``{x : A x = 0}`` (a saturated lattice over Z)."""
    cols, nrows = _as_columns(A)
    ker = kernel_sparse(cols, nrows, ring)
    return IntMatrix.from_columns(ker, A.cols)


def kernel_sparse(cols, nrows: int, ring: Ring = ZZ) -> list:
    e = _sparse.eliminate(cols, nrows, ring.modulus, track_cols=True)
    return e.kernel()


def solve_sparse(cols, nrows: int, targets, ring: Ring = ZZ):
    """Solve ``A x = t`` for each sparse target column.

    Returns a list with a sparse solution dict or ``None`` per target.
    """
    ncols = len(cols)
    allc = list(cols) + list(targets)
    e = _sparse.eliminate(allc, nrows, ring.modulus, track_cols=True,
                          pivot_cols=range(ncols))
    out = []
    # column ncols+t has been reduced to zero iff t lies in the span; its
    # transform then records  A * tau[:ncols] + t = 0.
    residual = _residuals(allc, e, ncols, nrows, ring)
    for t in range(len(targets)):
        if residual[t]:
            out.append(None)
            continue
        tau = e.tau[ncols + t]
        x = {}
        for k, v in tau.items():
            if k < ncols:
                y = -v if ring.modulus is None else (-v) % ring.modulus
                if y:
                    x[k] = y
        out.append(x)
    return out


def _residuals(allc, e, ncols, nrows, ring):
    # recompute [A | T] * tau for the target columns; zero iff solvable
    mod = ring.modulus
    res = []
    for t in range(len(allc) - ncols):
        acc = {}
        for k, c in e.tau[ncols + t].items():
            for i, v in allc[k].items():
                acc[i] = acc.get(i, 0) + c * v
        if mod is not None:
            nz = any(v % mod for v in acc.values())
        else:
            nz = any(acc.values())
        res.append(nz)
    return res


def solve_integer(A: IntMatrix, v: Sequence[int], ring: Ring = ZZ) -> Optional[list]:
    """Some ``x`` with ``A x = v``, or ``None`` if ``v`` is not in the column span."""
    if len(v) != A.rows:
        raise LinalgError(f"vector length {len(v)} != rows {A.rows}")
    cols, nrows = _as_columns(A)
    target = {i: x for i, x in enumerate(v) if x}
    sol = solve_sparse(cols, nrows, [target], ring)[0]
    if sol is None:
        return None
    x = [sol.get(j, 0) for j in range(A.cols)]
    check = A.apply(x)
    if ring.modulus is not None:
        ok = all((a - b) % ring.modulus == 0 for a, b in zip(check, v))
    else:
        ok = check == list(v)
    if not ok:  # pragma: no cover - would be an elimination bug
        raise ArithmeticError("solve_integer: substitution check failed")
    return x


def in_span(cols, nrows: int, targets, ring: Ring = ZZ) -> list:
    """Membership of each target column in the span of ``cols``."""
    e = _sparse.eliminate(cols, nrows, ring.modulus, track_rows=True)
    return [e.contains(t) for t in targets]


def subquotient_sparse(gens, subgens, nrows: int, ring: Ring = ZZ):
    """Quotient ``span(gens) / span(subgens)``.

    Returns ``(group, lifts)`` where ``lifts`` are ambient vectors (sparse
    dicts) generating the quotient: together with ``subgens`` they span
    ``span(gens)``.  Raises :class:`LinalgError` if ``subgens`` is not
    inside ``span(gens)``.
    """
    mod = ring.modulus
    ng = len(gens)
    coeffs = solve_sparse(gens, nrows, subgens, ring) if subgens else []
    for t, c in enumerate(coeffs):
        if c is None:
            raise LinalgError(f"subgenerator {t} lies outside the span of the generators")
    syz = kernel_sparse(gens, nrows, ring)
    rel_cols = list(syz) + list(coeffs)
    e = _sparse.eliminate(rel_cols, ng, mod, track_rows=True)
    orders, _, sigma = e.coordinates()
    free = sum(1 for o in orders if o == 0)
    group = FGAbelianGroup.from_orders(free, [o for o in orders if o])
    lifts = []
    for s in sigma:
        acc = {}
        for k, c in s.items():
            for i, v in gens[k].items():
                y = acc.get(i, 0) + c * v
                if mod is not None:
                    y %= mod
                acc[i] = y
        lifts.append({i: v for i, v in acc.items() if v})
    return group, lifts


def subquotient(gens: IntMatrix, subgens: IntMatrix, ring: Ring = ZZ):
    """Dense wrapper around :func:`subquotient_sparse`.

    Returns ``(group, lifts)`` with ``lifts`` an :class:`IntMatrix` whose
    columns are ambient lifts of generators of the quotient.
    """
    if gens.rows != subgens.rows:
        raise LinalgError("gens and subgens live in different ambient spaces")
    group, lifts = subquotient_sparse(gens.columns_sparse(), subgens.columns_sparse(),
                                      gens.rows, ring)
    return group, IntMatrix.from_columns(lifts, gens.rows)


def lll_reduce(vectors, dim: int) -> list:
    """LLL-reduced basis of the lattice spanned by independent sparse vectors.

    Same lattice, much shorter and sparser vectors; used so that kernel
    generators in resolutions stay small.
    """
    if len(vectors) < 2:
        return [dict(v) for v in vectors]
    M = flint.fmpz_mat(len(vectors), dim)
    for r, v in enumerate(vectors):
        for i, x in v.items():
            M[r, i] = x
    R = M.lll()
    out = []
    for r in range(R.nrows()):
        v = {i: int(R[r, i]) for i in range(dim) if R[r, i] != 0}
        if v:
            out.append(v)
    out.sort(key=lambda v: (sum(x * x for x in v.values()), sorted(v.items())))
    return out
