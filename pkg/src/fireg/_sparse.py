"""Sparse diagonalization over Z and Z/l.

The level matrices of FI-morphisms are very sparse and dominated by unit
entries, so elimination that takes short columns and rows first keeps
fill-in small.
Matrices are stored as a list of column dicts ``{row: value}``.

Column operations are of the form ``col_k -= q * col_j``; row operations
``row_l -= q * row_i``.  Both keep the matrix equivalent (unimodular
transforms), so the pivots found at the end describe the cokernel, the
kernel and the image exactly.
"""

from __future__ import annotations

import heapq
from math import gcd

import flint

Col = dict  # row index -> nonzero value


def _prime_powers(v):
    return {int(p): int(e) for p, e in flint.fmpz(v).factor()}


def normalize_factors(values):
    """Turn a multiset of positive integers into an invariant-factor chain.

    Entries equal to 1 are dropped.  Each value is split into prime powers;
    the k-th largest powers of every prime multiply to the k-th largest
    invariant factor.
    """
    by_prime = {}
    for v in values:
        if v > 1:
            for p, e in _prime_powers(v).items():
                by_prime.setdefault(p, []).append(e)
    if not by_prime:
        return []
    k = max(len(es) for es in by_prime.values())
    ds = [1] * k
    for p, es in by_prime.items():
        es.sort(reverse=True)
        for t, e in enumerate(es):
            ds[t] *= p ** e
    return sorted(ds)


class Elimination:
    """Result of diagonalizing an ``nrows x ncols`` sparse matrix.

    Attributes
    ----------
    pivots : list of (row, col, value)
        After the recorded transforms the matrix has exactly these nonzero
        entries.  Over ``Z/l`` every value is 1.
    tau : dict col -> Col or None
        Column transform vectors (only when ``track_cols``).
    row_ops : list of (l, i, q) or None
        Row operations ``row_l -= q * row_i`` in order (only when
        ``track_rows``).
    """

    def __init__(self, nrows, ncols, modulus, pivots, tau, row_ops):
        self.nrows = nrows
        self.ncols = ncols
        self.modulus = modulus
        self.pivots = pivots
        self.tau = tau
        self.row_ops = row_ops

    @property
    def rank(self):
        return len(self.pivots)

    def torsion(self):
        if self.modulus is not None:
            return []
        return normalize_factors(abs(v) for _, _, v in self.pivots)

    def kernel(self):
        """Columns of a lattice basis of the kernel, as sparse dicts."""
        pivot_cols = {j for _, j, _ in self.pivots}
        return [self.tau[k] for k in range(self.ncols) if k not in pivot_cols]

    def apply_rows(self, vec):
        """Apply the recorded row operations to a sparse vector (copy)."""
        v = dict(vec)
        mod = self.modulus
        for l, i, q in self.row_ops:
            x = v.get(i)
            if x:
                y = v.get(l, 0) - q * x
                if mod is not None:
                    y %= mod
                if y:
                    v[l] = y
                else:
                    v.pop(l, None)
        return v

    def contains(self, vec):
        """Is ``vec`` in the column span?  Needs ``track_rows``.

        With ``U A V = diag`` the span of ``A`` is ``U^-1`` of the span of
        the pivots, so ``U vec`` must live on pivot rows and be divisible
        there.
        """
        piv = {i: v for i, _, v in self.pivots}
        for r, x in self.apply_rows(vec).items():
            v = piv.get(r)
            if v is None:
                return False
            if self.modulus is None and x % v:
                return False
        return True

    def coordinates(self):
        """Reduced coordinates of the cokernel.

        Returns ``(orders, pi, sigma)``: one entry per surviving coordinate,
        where ``orders[c]`` is 0 for a free summand or the cyclic order,
        ``pi[c]`` is a functional on the ambient space (sparse dict) and
        ``sigma[c]`` an ambient lift.  Over ``Z/l`` all orders are 0.
        """
        mod = self.modulus
        pivot_of_row = {i: v for i, _, v in self.pivots}
        keep = []
        for i in range(self.nrows):
            v = pivot_of_row.get(i)
            if v is None:
                keep.append((i, 0))
            elif mod is None and abs(v) > 1:
                keep.append((i, abs(v)))
        rows = {i: {i: 1} for i in range(self.nrows)}
        sig = {i: {i: 1} for i in range(self.nrows)}
        for l, i, q in self.row_ops:
            _axpy(rows[l], rows[i], -q, mod)
            _axpy(sig[i], sig[l], q, mod)
        orders = [o for _, o in keep]
        pi = [rows[i] for i, _ in keep]
        sigma = [sig[i] for i, _ in keep]
        return orders, pi, sigma


def _axpy(y, x, a, mod):
    """y += a * x for sparse dicts."""
    if not a:
        return
    for k, xv in x.items():
        t = y.get(k, 0) + a * xv
        if mod is not None:
            t %= mod
        if t:
            y[k] = t
        else:
            y.pop(k, None)


def _floor_q(a, b):
    # quotient giving the remainder of least absolute value
    q, r = divmod(a, b)
    if 2 * abs(r) > abs(b):
        q += 1
    return q


def eliminate(columns, nrows, modulus=None, track_cols=False, track_rows=False,
              pivot_cols=None):
    """Diagonalize a sparse matrix given as a list of column dicts.

    ``pivot_cols`` optionally restricts which columns may be chosen as
    pivots; the other columns are only reduced (used for membership
    tests).  The input columns are not modified.
    """
    mod = modulus
    ncols = len(columns)
    if mod is None:
        C = [{i: v for i, v in c.items() if v} for c in columns]
    else:
        C = []
        for c in columns:
            d = {}
            for i, v in c.items():
                v %= mod
                if v:
                    d[i] = v
            C.append(d)
    R = {}
    for j, c in enumerate(C):
        for i in c:
            R.setdefault(i, set()).add(j)
    tau = {j: {j: 1} for j in range(ncols)} if track_cols else None
    row_ops = [] if track_rows else None
    allowed = None if pivot_cols is None else set(pivot_cols)
    pivots = []
    done_cols = set()

    # shortest column first; within a column the smallest entry (a unit
    # when there is one) becomes the pivot.  Preferring columns that merely
    # contain a unit caused heavy fill-in on Koszul complexes.
    def key(j):
        return (len(C[j]), j)

    heap = [key(j) for j in range(ncols) if C[j] and (allowed is None or j in allowed)]
    heapq.heapify(heap)

    def col_sub(k, j, q):
        # col_k -= q * col_j
        ck = C[k]
        for i, v in C[j].items():
            t = ck.get(i, 0) - q * v
            if mod is not None:
                t %= mod
            if t:
                if i not in ck:
                    R[i].add(k)
                ck[i] = t
            else:
                if i in ck:
                    del ck[i]
                    R[i].discard(k)
        if tau is not None:
            _axpy(tau[k], tau[j], -q, mod)

    def row_sub(l, i, q):
        # row_l -= q * row_i
        for k in list(R.get(i, ())):
            ck = C[k]
            t = ck.get(l, 0) - q * ck[i]
            if mod is not None:
                t %= mod
            if t:
                if l not in ck:
                    R.setdefault(l, set()).add(k)
                ck[l] = t
            else:
                if l in ck:
                    del ck[l]
                    R[l].discard(k)
        if row_ops is not None:
            row_ops.append((l, i, q))

    def candidates(i):
        return [k for k in R[i] if k not in done_cols and (allowed is None or k in allowed)]

    while heap:
        kj = heapq.heappop(heap)
        j = kj[1]
        if j in done_cols or not C[j] or key(j) != kj:
            if j not in done_cols and C[j]:
                heapq.heappush(heap, key(j))
            continue
        c = C[j]
        if mod is None:
            i = min(c, key=lambda r: (abs(c[r]), len(R[r]), r))
        else:
            i = min(c, key=lambda r: (len(R[r]), r))
        touched = {j}
        while True:
            v = C[j][i]
            # clear row i with column j
            rem = False
            for k in candidates(i):
                if k == j:
                    continue
                a = C[k][i]
                if mod is None:
                    q = _floor_q(a, v)
                else:
                    q = a * pow(v, -1, mod) % mod
                if q:
                    col_sub(k, j, q)
                    touched.add(k)
                if C[k].get(i):
                    rem = True
            # non-pivotable columns only get reduced
            if allowed is not None:
                for k in list(R[i]):
                    if k in done_cols or k in allowed or k == j:
                        continue
                    a = C[k][i]
                    q = _floor_q(a, v) if mod is None else a * pow(v, -1, mod) % mod
                    if q:
                        col_sub(k, j, q)
            if rem:
                j = min((k for k in candidates(i) if k != j),
                        key=lambda k: (abs(C[k][i]), len(C[k]), k))
                touched.add(j)
                continue
            # clear column j with row i (row i is now clean in pivotable columns)
            rem = False
            for l in list(C[j]):
                if l == i:
                    continue
                a = C[j][l]
                if mod is None:
                    q = _floor_q(a, v)
                else:
                    q = a * pow(v, -1, mod) % mod
                if q:
                    row_sub(l, i, q)
                if C[j].get(l):
                    rem = True
            if rem:
                i = min((l for l in C[j] if l != i),
                        key=lambda l: (abs(C[j][l]), len(R[l]), l))
                continue
            break
        pivots.append((i, j, C[j][i]))
        done_cols.add(j)
        for k in touched:
            if k not in done_cols and C[k] and (allowed is None or k in allowed):
                heapq.heappush(heap, key(k))
    return Elimination(nrows, ncols, mod, pivots, tau, row_ops)


# --- rank and torsion over Z without coefficient growth ------------------------------
#
# Integer elimination on large Koszul matrices can blow up: once unit pivots run
# out, Euclid steps on the remaining block produce entries with hundreds of
# digits.  ``rank_torsion`` avoids that:
#
# 1. exact elimination on +-1 pivots while all entries stay small, which keeps
#    the cokernel and leaves a much smaller residual block R;
# 2. the exact rank r of R, and e = |det| of a nonsingular r x r minor M of R.
#    The torsion exponent of coker R divides the largest invariant factor of M,
#    hence divides e;
# 3. for every factor f of e: if R has r unit pivots mod f, no prime dividing f
#    is a torsion prime; otherwise f is prime and the f-part of the torsion comes
#    from an elimination over Z/f^(v+1), v = v_f(e), pivoting on least valuation.
#
# Every step is exact.  When a step cannot conclude (a composite factor that is
# not settled by unit pivots) the plain integer elimination is used instead.

UNIT_CAP = 255
_PRIMES = ((1 << 61) - 1, (1 << 61) - 31, (1 << 61) - 139)
_TRIAL = 2000
_FULL_FACTOR_BITS = 128


def _unit_phase(columns, cap):
    """Eliminate on +-1 pivots whose row and column entries are at most ``cap``.

    Returns ``(k, residual)``: the number of pivots and the remaining nonzero
    columns.  ``coker`` of the input is ``coker`` of the residual (in the
    surviving rows) plus free summands from rows that became zero.
    """
    C = [{i: v for i, v in c.items() if v} for c in columns]
    R = {}
    for j, c in enumerate(C):
        for i in c:
            R.setdefault(i, set()).add(j)
    heap = [(len(c), j) for j, c in enumerate(C) if c]
    heapq.heapify(heap)
    k = 0
    while heap:
        n, j = heapq.heappop(heap)
        c = C[j]
        if not c:
            continue
        if n != len(c):
            heapq.heappush(heap, (len(c), j))
            continue
        if any(v > cap or v < -cap for v in c.values()):
            continue  # pushed again if a later pivot touches it
        best = None
        for i, v in c.items():
            if (v == 1 or v == -1) and (best is None or len(R[i]) < best[0]):
                if all(-cap <= C[kk][i] <= cap for kk in R[i]):
                    best = (len(R[i]), i)
        if best is None:
            continue
        i = best[1]
        v = c[i]
        for kk in list(R[i]):
            if kk == j:
                continue
            ck = C[kk]
            q = ck[i] * v
            for r, w in c.items():
                t = ck.get(r, 0) - q * w
                if t:
                    if r not in ck:
                        R[r].add(kk)
                    ck[r] = t
                else:
                    del ck[r]
                    R[r].discard(kk)
            heapq.heappush(heap, (len(ck), kk))
        # row i is now zero outside column j, so clearing column j by row
        # operations changes nothing else: drop both
        for r in c:
            R[r].discard(j)
        C[j] = {}
        k += 1
    return k, [c for c in C if c]


def _valuation(v, ell):
    e = 0
    while v % ell == 0:
        v //= ell
        e += 1
    return e


def _schur_valuations(columns, modulus, ell=None):
    """Diagonalize over ``Z/modulus`` by Schur complements.

    With ``ell`` given, ``modulus`` is a power of the prime ``ell`` and each
    pivot has the least ``ell``-adic valuation left in the matrix, so it
    divides everything in its row and column.  Returns the pivot valuations.
    Without ``ell`` only unit pivots are used and the result lists one 0 per
    pivot; the elimination stops when no unit is left.
    """
    m = modulus
    C = []
    for c in columns:
        d = {}
        for i, v in c.items():
            v %= m
            if v:
                d[i] = v
        C.append(d)
    R = {}
    for j, c in enumerate(C):
        for i in c:
            R.setdefault(i, set()).add(j)

    def val(v):
        if ell is None:
            return 0 if gcd(v, m) == 1 else None
        return _valuation(v, ell)

    def key(j):
        vs = [x for x in (val(v) for v in C[j].values()) if x is not None]
        return (min(vs), len(C[j]), j) if vs else None

    heap = [kj for kj in (key(j) for j in range(len(C)) if C[j]) if kj]
    heapq.heapify(heap)
    out = []
    while heap:
        kj = heapq.heappop(heap)
        j = kj[2]
        if not C[j]:
            continue
        now = key(j)
        if now != kj:
            if now:
                heapq.heappush(heap, now)
            continue
        e = kj[0]
        c = C[j]
        i = min((r for r, v in c.items() if val(v) == e), key=lambda r: (len(R[r]), r))
        p = ell ** e if ell is not None else 1
        inv = pow(c[i] // p, -1, m)
        for kk in list(R[i]):
            if kk == j:
                continue
            ck = C[kk]
            q = ck[i] // p * inv % m
            for r, w in c.items():
                t = (ck.get(r, 0) - q * w) % m
                if t:
                    if r not in ck:
                        R[r].add(kk)
                    ck[r] = t
                elif r in ck:
                    del ck[r]
                    R[r].discard(kk)
            nk = key(kk)
            if nk:
                heapq.heappush(heap, nk)
        for r in c:
            R[r].discard(j)
        C[j] = {}
        out.append(e)
    return out


def _nonsingular_minor(cols, nrows, r):
    """Rows and columns of an ``r x r`` minor that is nonzero mod some prime."""
    for p in _PRIMES:
        e = eliminate(cols, nrows, p)
        if e.rank == r:
            return [i for i, _, _ in e.pivots], [j for _, j, _ in e.pivots]
    return None


def rank_torsion(columns, nrows):
    """``(rank, torsion)`` of an integer matrix given as sparse columns.

    ``torsion`` is the list of invariant factors > 1 of the cokernel.
    """
    k, res = _unit_phase(columns, UNIT_CAP)
    if not res:
        return k, []
    rows = sorted({i for c in res for i in c})
    at = {r: a for a, r in enumerate(rows)}
    rc = [{at[i]: v for i, v in c.items()} for c in res]
    M = flint.fmpz_mat(len(rows), len(rc))
    for j, c in enumerate(rc):
        for i, v in c.items():
            M[i, j] = v
    r = M.rank()
    minor = _nonsingular_minor(rc, len(rows), r)
    if minor is not None:
        I, J = minor
        pos = {i: a for a, i in enumerate(I)}
        N = flint.fmpz_mat(r, r)
        for b, j in enumerate(J):
            for i, v in rc[j].items():
                if i in pos:
                    N[pos[i], b] = v
        det = abs(int(N.det()))
        parts = _torsion_parts(rc, r, det)
        if parts is not None:
            return k + r, normalize_factors(parts)
    e = eliminate(columns, nrows)
    return e.rank, e.torsion()


def _torsion_parts(cols, r, det):
    parts = []
    todo = [(int(f), int(v)) for f, v in flint.fmpz(det).factor(trial_limit=_TRIAL)]
    while todo:
        f, v = todo.pop()
        if len(_schur_valuations(cols, f)) == r:
            continue
        if not flint.fmpz(f).is_prime():
            # a torsion prime hides in an unfactored cofactor; split it when
            # that is cheap, otherwise let the caller fall back
            if f.bit_length() > _FULL_FACTOR_BITS:
                return None
            todo.extend((int(p), int(e) * v) for p, e in flint.fmpz(f).factor())
            continue
        vals = _schur_valuations(cols, f ** (v + 1), f)
        if len(vals) != r:
            return None
        parts.extend(f ** x for x in vals if x)
    return parts
