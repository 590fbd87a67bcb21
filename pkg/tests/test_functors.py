from math import perm

import pytest
from hypothesis import given, strategies as st

from fireg.fi import (FreeFIModule, FreeMorphism, count_injections, evaluate, free_module,
                      inj_tuples, level_columns, scaled_inclusion_module, torsion_module)
from fireg.functors import (FBModule, compute_K, derivative_level_cokernel,
                            derivative_presentation, h0, kernel_transition_certificate,
                            natural_map, shift_fb, shift_free_morphism, shift_presentation)
from fireg.linalg import FGAbelianGroup, IntMatrix, ZZ, cokernel_sparse
from fireg.verify import SuiteConfig, random_presentation

Z = FGAbelianGroup


def groups(P, N):
    return [evaluate(P, n).group for n in range(N + 1)]


def fb(*gs):
    return FBModule(ZZ, tuple(gs))


# --- shift -----------------------------------------------------------------------

def test_shift_free_morphism_identity():
    idm0 = FreeMorphism.identity(FreeFIModule((0,)))
    assert shift_free_morphism(idm0) == idm0
    S = shift_free_morphism(FreeMorphism.identity(FreeFIModule((1,))))
    assert S.source.degrees == S.target.degrees == (1, 0)
    for n in range(4):
        M = IntMatrix.from_columns(level_columns(S, n), S.target.rank_at(n))
        assert M == IntMatrix.identity(S.target.rank_at(n))


@pytest.mark.parametrize("a", range(5))
def test_shift_free_counts(a):
    S = shift_presentation(free_module(a))
    for n in range(9):
        lhs = count_injections(a, n + 1)
        assert lhs == count_injections(a, n) + a * count_injections(a - 1, n)
        assert S.f0.rank_at(n) == lhs
    # the worked count: |Inj(2,4)| = |Inj(2,3)| + 2 |Inj(1,3)|
    assert perm(4, 2) == perm(3, 2) + 2 * 3


def test_shift_examples():
    assert shift_presentation(free_module(0)).f0.degrees == (0,)
    assert all(g.is_zero() for g in groups(shift_presentation(torsion_module(0)), 6))
    S = groups(shift_presentation(scaled_inclusion_module(2)), 6)
    assert S == [Z(0, (2,))] * 7


@given(st.integers(0, 10_000))
def test_shift_is_level_shift(i):
    P = random_presentation(SuiteConfig(seed=7), i)
    S = shift_presentation(P)
    for n in range(4):
        assert evaluate(S, n).group == evaluate(P, n + 1).group


# --- derivative --------------------------------------------------------------------

def test_derivative_examples():
    assert all(g.is_zero() for g in groups(derivative_presentation(free_module(0)), 5))
    D1 = derivative_presentation(free_module(1))
    assert groups(D1, 5) == groups(free_module(0), 5)
    assert all(g.is_zero() for g in groups(derivative_presentation(scaled_inclusion_module(2)), 5))


@given(st.integers(0, 10_000))
def test_derivative_is_cokernel(i):
    P = random_presentation(SuiteConfig(seed=11), i)
    D = derivative_presentation(P)
    for n in range(4):
        assert evaluate(D, n).group == derivative_level_cokernel(P, n)


def test_derivative_cokernel_oracle_on_free():
    # D M(a) = M(a-1)^a on objects
    for a in range(1, 4):
        D = derivative_presentation(free_module(a))
        for n in range(5):
            assert evaluate(D, n).group == Z(a * count_injections(a - 1, n))


# --- FB-modules ----------------------------------------------------------------------

def test_shift_fb():
    assert shift_fb(FBModule.zero(4)).is_zero()
    V = fb(Z(), Z(), Z(1))
    assert shift_fb(V).groups == (Z(), Z(1))
    V = fb(Z(), Z(), Z(2))
    assert shift_fb(V)[1] == Z(2)


def test_extended_degree():
    ninf = FBModule.zero(3).degree()
    assert ninf.is_neg_inf and str(ninf) == "-inf" and ninf.to_json() is None
    assert (ninf + 5).is_neg_inf and (ninf - 2).is_neg_inf
    assert ninf <= -100
    d = fb(Z(1), Z(), Z()).degree()
    assert d == 0 and d.certified_within_window
    edge = fb(Z(), Z(1)).degree()
    assert edge == 1 and not edge.certified_within_window


# --- H_0 -------------------------------------------------------------------------------

def oracle_h0(P, n):
    """W_n modulo the image of W_{n-1} along every injection."""
    cols = list(level_columns(P.phi, n))
    if n:
        from fireg.fi import transition_columns
        for g in inj_tuples(n - 1, n):
            cols += transition_columns(P.f0, g, n - 1, n)
    return cokernel_sparse(cols, P.f0.rank_at(n), P.ring)


def test_h0_examples():
    assert h0(free_module(2), 4).groups == (Z(), Z(), Z(2), Z(), Z())
    assert h0(scaled_inclusion_module(2), 4).groups == (Z(1),) + (Z(),) * 4
    assert h0(torsion_module(0), 4).groups == (Z(1),) + (Z(),) * 4


@given(st.integers(0, 10_000))
def test_h0_matches_quotient_oracle(i):
    P = random_presentation(SuiteConfig(seed=3), i)
    V = h0(P, 4)
    for n in range(5):
        assert V[n] == oracle_h0(P, n)


# --- natural map and K -----------------------------------------------------------------

def test_natural_map_examples():
    assert natural_map(free_module(0), 0).tolist() == [[1]]
    assert natural_map(free_module(1), 1).tolist() == [[1], [0]]
    # T(0): Z -> 0 at n = 0
    assert evaluate(torsion_module(0), 1).group.is_zero()


def test_K_examples():
    for a in range(4):
        assert compute_K(free_module(a), 5).is_zero()
    assert compute_K(torsion_module(0), 5).groups == (Z(1),) + (Z(),) * 5
    assert compute_K(scaled_inclusion_module(2), 5).groups == (Z(1),) + (Z(),) * 5
    assert compute_K(torsion_module(2), 4).groups == (Z(), Z(), Z(2), Z(), Z())


@given(st.integers(0, 10_000))
def test_K_has_zero_transitions(i):
    P = random_presentation(SuiteConfig(seed=5), i)
    assert all(kernel_transition_certificate(P, 3).values())


def test_K_rank_identity_over_field():
    # dim K_n = dim W_n - dim W_{n+1} + dim coker(W_n -> W_{n+1})
    from fireg.linalg import Ring
    for i in range(10):
        P = random_presentation(SuiteConfig(seed=9, ring=Ring(3)), i)
        K = compute_K(P, 3)
        for n in range(4):
            w0 = evaluate(P, n).group.free_rank
            w1 = evaluate(P, n + 1).group.free_rank
            c = derivative_level_cokernel(P, n).free_rank
            assert K[n].free_rank == w0 - w1 + c

