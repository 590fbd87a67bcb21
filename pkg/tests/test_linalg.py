import math
from itertools import combinations

import pytest
import sympy
from hypothesis import given, strategies as st
from sympy.matrices.normalforms import smith_normal_form as sympy_snf

from fireg import _sparse
from fireg.linalg import (FGAbelianGroup, IntMatrix, LinalgError, Ring, ZZ, cokernel,
                          diagonal, in_span, kernel_basis, lll_reduce, rank, rank_mod,
                          smith_normal_form, solve_integer, subquotient)


def matrices(max_dim=6, bound=9):
    return st.integers(1, max_dim).flatmap(
        lambda m: st.integers(1, max_dim).flatmap(
            lambda n: st.lists(st.lists(st.integers(-bound, bound), min_size=n, max_size=n),
                               min_size=m, max_size=m)))


def oracle_diagonal(rows):
    """Invariant factors via determinantal divisors: d_k = D_k / D_{k-1}."""
    M = sympy.Matrix(rows)
    m, n = M.shape
    out, prev = [], 1
    for k in range(1, min(m, n) + 1):
        g = 0
        for r in combinations(range(m), k):
            for c in combinations(range(n), k):
                g = math.gcd(g, int(M.extract(list(r), list(c)).det()))
        if g == 0:
            break
        out.append(g // prev)
        prev = g
    return out


def is_unimodular(M):
    return abs(M.det()) == 1


# --- smith normal form -----------------------------------------------------

def test_snf_identity():
    I = IntMatrix.identity(3)
    U, S, V = smith_normal_form(I)
    assert S == I and U == I and V == I


def test_snf_diag_2_3():
    _, S, _ = smith_normal_form(IntMatrix.from_rows([[2, 0], [0, 3]]))
    assert diagonal(S) == [1, 6]


def test_snf_2468():
    A = IntMatrix.from_rows([[2, 4], [6, 8]])
    _, S, _ = smith_normal_form(A)
    assert diagonal(S) == [2, 4]
    assert diagonal(S) == oracle_diagonal(A.tolist())
    assert [int(x) for x in sympy_snf(sympy.Matrix(A.tolist()), domain=sympy.ZZ).diagonal()] == [2, 4]


@given(matrices())
def test_snf_properties(rows):
    A = IntMatrix.from_rows(rows)
    U, S, V = smith_normal_form(A)
    assert U @ A @ V == S
    assert is_unimodular(U) and is_unimodular(V)
    d = diagonal(S)
    for i in range(S.rows):
        for j in range(S.cols):
            if i != j:
                assert S[i, j] == 0
    assert all(x >= 0 for x in d)
    nz = [x for x in d if x]
    assert d[:len(nz)] == nz  # zeros trail
    for a, b in zip(nz, nz[1:]):
        assert b % a == 0


@given(matrices(max_dim=4, bound=6))
def test_snf_matches_determinantal_divisors(rows):
    _, S, _ = smith_normal_form(IntMatrix.from_rows(rows))
    assert [x for x in diagonal(S) if x] == oracle_diagonal(rows)


# --- cokernel / kernel / solve ----------------------------------------------

def test_cokernel_examples():
    assert cokernel(IntMatrix.zeros(2, 3)) == FGAbelianGroup(2)
    assert cokernel(IntMatrix.from_rows([[2], [0]])) == FGAbelianGroup(1, (2,))
    assert cokernel(IntMatrix.from_rows([[2, 4], [6, 8]])) == FGAbelianGroup(0, (2, 4))


@given(matrices())
def test_cokernel_matches_snf(rows):
    A = IntMatrix.from_rows(rows)
    d = [x for x in diagonal(smith_normal_form(A)[1]) if x]
    G = cokernel(A)
    assert G.free_rank == A.rows - len(d)
    assert G.invariant_factors == tuple(x for x in d if x > 1)


def columns(rows):
    return [{i: r[j] for i, r in enumerate(rows) if r[j]} for j in range(len(rows[0]))]


def snf_rank_torsion(rows):
    d = [x for x in diagonal(smith_normal_form(IntMatrix.from_rows(rows))[1]) if x]
    return len(d), [x for x in d if x > 1]


@given(matrices())
def test_rank_torsion_matches_snf(rows):
    r, t = _sparse.rank_torsion(columns(rows), len(rows))
    assert (r, t) == snf_rank_torsion(rows)


@given(matrices(max_dim=7, bound=10**6))
def test_rank_torsion_large_entries(rows):
    # entries this large leave a residual, so the determinant and the
    # prime-by-prime eliminations do the work
    r, t = _sparse.rank_torsion(columns(rows), len(rows))
    assert (r, t) == snf_rank_torsion(rows)


@given(st.lists(st.sampled_from([0, 1, 2, 4, 8, 3, 9, 12, 1000003]), min_size=1, max_size=5),
       st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(-3, 3)), max_size=12),
       st.sampled_from([255, 0]))
def test_rank_torsion_planted(diag, ops, cap):
    n = len(diag)
    rows = [[diag[i] if i == j else 0 for j in range(n)] for i in range(n)]
    for a, b, q in ops:
        a, b = a % n, b % n
        if a != b:
            rows[a] = [x + q * y for x, y in zip(rows[a], rows[b])]
            for r in rows:
                r[b] -= q * r[a]
    old = _sparse.UNIT_CAP
    _sparse.UNIT_CAP = cap
    try:
        r, t = _sparse.rank_torsion(columns(rows), n)
    finally:
        _sparse.UNIT_CAP = old
    assert r == sum(1 for d in diag if d)
    assert t == _sparse.normalize_factors(d for d in diag if d)


def test_schur_valuations_local():
    cols = [{0: 2}, {1: 12}, {2: 8}, {0: 6, 1: 4}]
    # over Z/16 the column span is that of diag(2, 4, 8)
    assert sorted(_sparse._schur_valuations(cols, 16, 2)) == [1, 2, 3]
    # only unit pivots mod a composite: 3 and 5 are not units mod 15
    assert _sparse._schur_valuations([{0: 3}, {1: 5}], 15) == []
    assert _sparse._schur_valuations([{0: 3}, {1: 5, 0: 2}], 15) == [0]


def test_rank_torsion_fallback(monkeypatch):
    rows = [[6, 10**7 + 19], [4 * 10**7, 8]]
    want = snf_rank_torsion(rows)
    assert _sparse.rank_torsion(columns(rows), 2) == want
    # without trial division or full factoring every factor is left composite
    monkeypatch.setattr(_sparse, "_TRIAL", 1)
    monkeypatch.setattr(_sparse, "_FULL_FACTOR_BITS", 0)
    monkeypatch.setattr(_sparse, "UNIT_CAP", 0)
    assert _sparse.rank_torsion(columns(rows), 2) == want


def test_kernel_examples():
    assert kernel_basis(IntMatrix.identity(3)).cols == 0
    K = kernel_basis(IntMatrix.from_rows([[1, 1]]))
    assert K.cols == 1 and K.column(0) in ((1, -1), (-1, 1))
    assert kernel_basis(IntMatrix.from_rows([[2, 4], [6, 8]])).cols == 0


@given(matrices())
def test_kernel_is_saturated_basis(rows):
    A = IntMatrix.from_rows(rows)
    K = kernel_basis(A)
    assert K.cols == A.cols - rank(A)
    assert (A @ K).is_zero() if K.cols else True
    if K.cols:
        # saturated: Z^n / K is torsion-free
        assert cokernel(K).invariant_factors == ()


def test_solve_examples():
    assert solve_integer(IntMatrix.identity(3), [4, -1, 7]) == [4, -1, 7]
    assert solve_integer(IntMatrix.from_rows([[2]]), [3]) is None
    x = solve_integer(IntMatrix.from_rows([[2, 3]]), [1])
    assert 2 * x[0] + 3 * x[1] == 1


@given(matrices(), st.data())
def test_solve_consistency(rows, data):
    A = IntMatrix.from_rows(rows)
    x = data.draw(st.lists(st.integers(-5, 5), min_size=A.cols, max_size=A.cols))
    v = A.apply(x)
    y = solve_integer(A, v)
    assert y is not None and A.apply(y) == v
    # v + e_0 is solvable iff e_0 lies in the column span
    w = list(v)
    w[0] += 1
    z = solve_integer(A, w)
    assert (z is not None) == in_span(A.columns_sparse(), A.rows, [{0: 1}])[0]
    if z is not None:
        assert A.apply(z) == w


def test_solve_length_mismatch():
    with pytest.raises(LinalgError):
        solve_integer(IntMatrix.identity(2), [1])


# --- subquotient, ranks ---------------------------------------------------------

def test_subquotient_examples():
    G, lifts = subquotient(IntMatrix.identity(2), IntMatrix.identity(2))
    assert G.is_zero() and lifts.cols == 0
    G, lifts = subquotient(IntMatrix.identity(1), IntMatrix.from_rows([[2]]))
    assert G == FGAbelianGroup(0, (2,)) and lifts.cols == 1 and lifts[0, 0] % 2
    G, lifts = subquotient(IntMatrix.identity(2), IntMatrix.from_rows([[2, 0], [0, 3]]))
    assert G == FGAbelianGroup(0, (6,))
    # lifts together with subgens regenerate Z^2
    both = IntMatrix.from_rows([[2, 0], [0, 3]]).hstack(lifts)
    assert cokernel(both).is_zero()


def test_subquotient_rejects_outside():
    with pytest.raises(LinalgError):
        subquotient(IntMatrix.from_rows([[2]]), IntMatrix.from_rows([[1]]))


def test_rank_mod_examples():
    assert rank_mod(IntMatrix.identity(3), 5) == 3
    assert rank_mod(IntMatrix.from_rows([[2]]), 2) == 0
    assert rank_mod(IntMatrix.from_rows([[2, 4], [6, 8]]), 3) == 2
    with pytest.raises(LinalgError):
        rank_mod(IntMatrix.identity(2), 4)


@given(matrices(max_dim=5), st.sampled_from([2, 3, 5]))
def test_rank_mod_matches_sympy(rows, ell):
    from sympy.polys.matrices import DomainMatrix
    dm = DomainMatrix.from_list_sympy(len(rows), len(rows[0]), rows).convert_to(sympy.GF(ell))
    assert rank_mod(IntMatrix.from_rows(rows), ell) == dm.rank()


def test_field_cokernel_is_dimension():
    A = IntMatrix.from_rows([[2, 0], [0, 3]])
    assert cokernel(A, Ring(2)) == FGAbelianGroup(1)
    assert cokernel(A, Ring(5)) == FGAbelianGroup(0)


# --- groups ---------------------------------------------------------------------

def test_normalize_factors():
    assert _sparse.normalize_factors([2, 3]) == [6]
    assert _sparse.normalize_factors([4, 6, 1]) == [2, 12]
    assert _sparse.normalize_factors([1, 1]) == []
    assert FGAbelianGroup.from_orders(1, [2, 2, 2]).format() == "Z + (Z/2)^3"


def test_group_validation():
    with pytest.raises(LinalgError):
        FGAbelianGroup(0, (4, 6))
    with pytest.raises(LinalgError):
        FGAbelianGroup(0, (1,))
    assert (FGAbelianGroup(1, (2,)) * 3) == FGAbelianGroup(3, (2, 2, 2))


def test_ring_parse():
    assert Ring.parse("Z") == ZZ
    assert Ring.parse("mod3").modulus == 3
    with pytest.raises(LinalgError):
        Ring.parse("mod4")


@given(st.lists(st.lists(st.integers(-4, 4), min_size=4, max_size=4), min_size=1, max_size=4))
def test_lll_preserves_lattice(rows):
    vecs = [{i: x for i, x in enumerate(r) if x} for r in rows]
    A = IntMatrix.from_rows(rows)
    if rank(A) < len(rows):
        return  # lll_reduce expects independent vectors
    red = lll_reduce(vecs, 4)
    assert len(red) == len(rows)
    # each side lies in the span of the other
    assert all(in_span(vecs, 4, red))
    assert all(in_span(red, 4, vecs))
