import numpy as np
import pytest
from hypothesis import given, settings

from ncprob.coalg import (
    TensorElement,
    antipode,
    apply_legwise,
    coassociativity_check,
    coproduct,
    coproduct_on_leg,
    coproduct_poly,
    counit,
    counit_on_leg,
    counit_poly,
    generated_subcoalgebra,
    invariance_defect,
    minimal_tensor_representation,
    multiply_legs,
    span_residual,
    subspace_intersection,
)
from ncprob.exceptions import Unsupported, ZeroElement
from ncprob.ncpoly import Alphabet, NCPolynomial

from conftest import polys, words

SA2 = Alphabet.self_adjoint(2)
U2 = Alphabet.matrix_unitary(2)
U3 = Alphabet.matrix_unitary(3)


def word_names(T):
    A = T.alphabet
    return {tuple(A.word_name(w) for w in k): c for k, c in T.items()}


def test_primitive_coproduct():
    assert word_names(coproduct(SA2, (0,))) == {("x1", "1"): 1, ("1", "x1"): 1}


def test_word_coproduct_is_shuffle_split():
    D = word_names(coproduct(SA2, (0, 1)))
    assert D == {("x1x2", "1"): 1, ("x1", "x2"): 1, ("x2", "x1"): 1, ("1", "x1x2"): 1}


def test_repeated_letter_multiplicity():
    D = word_names(coproduct(SA2, (0, 0)))
    assert D[("x1", "x1")] == 2


def test_unitary_coproduct_matrix_form():
    D = word_names(coproduct(U2, U2.parse_word("x12")))
    assert D == {("x11", "x12"): 1, ("x12", "x22"): 1}
    Ds = word_names(coproduct(U2, U2.parse_word("x12*")))
    assert Ds == {("x11*", "x12*"): 1, ("x12*", "x22*"): 1}


def test_counit_values():
    assert counit(SA2, ()) == 1 and counit(SA2, (0,)) == 0
    assert counit(U2, U2.parse_word("x11x22*")) == 1
    assert counit(U2, U2.parse_word("x12")) == 0


def test_antipode_unitary_unsupported():
    with pytest.raises(Unsupported, match="antipode"):
        antipode(NCPolynomial.gen(U2, 0))


@pytest.mark.parametrize("A", [SA2, U2, Alphabet.self_adjoint(3)])
@settings(max_examples=40, deadline=None)
@given(data=words(U2, 4))
def test_coassociativity_property(A, data):
    w = tuple(a % A.n_letters for a in data)
    left, right = coassociativity_check(A, w)
    assert left.max_abs_diff(right) <= 1e-12


@pytest.mark.parametrize("A", [SA2, U2])
@settings(max_examples=40, deadline=None)
@given(data=words(U2, 4))
def test_counit_law_property(A, data):
    w = tuple(a % A.n_letters for a in data)
    D = coproduct(A, w)
    p = NCPolynomial.word(A, w)
    assert counit_on_leg(D, 0) == p
    assert counit_on_leg(D, 1) == p


@settings(max_examples=40, deadline=None)
@given(polys(SA2), polys(SA2))
def test_coproduct_is_multiplicative(p, q):
    lhs = coproduct_poly(p * q)
    rhs = coproduct_poly(p) * coproduct_poly(q)
    assert lhs.max_abs_diff(rhs) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(polys(U2, max_len=2), polys(U2, max_len=2))
def test_unitary_coproduct_is_star_homomorphism(p, q):
    assert coproduct_poly(p * q).max_abs_diff(coproduct_poly(p) * coproduct_poly(q)) <= 1e-9
    assert coproduct_poly(p.star()).max_abs_diff(coproduct_poly(p).star()) <= 1e-9
    assert abs(counit_poly(p * q) - counit_poly(p) * counit_poly(q)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(words(SA2, 5))
def test_antipode_identity(w):
    D = coproduct(SA2, w)
    S = lambda u: antipode(NCPolynomial.word(SA2, u))
    expected = counit(SA2, w) * NCPolynomial.one(SA2)
    assert multiply_legs(apply_legwise(D, None, S)).allclose(expected, 1e-12)
    assert multiply_legs(apply_legwise(D, S, None)).allclose(expected, 1e-12)


def test_minimal_representation_rank():
    D = coproduct(SA2, (0, 1))
    rep = minimal_tensor_representation(D)
    assert rep.rank == 4
    assert rep.reconstruct().max_abs_diff(D) <= 1e-12
    # x1⊗x1 + x1⊗x2 = x1⊗(x1+x2) has rank one
    T = TensorElement(SA2, {((0,), (0,)): 1, ((0,), (1,)): 1})
    assert minimal_tensor_representation(T).rank == 1


def test_subcoalgebra_dimensions():
    x1 = NCPolynomial.gen(SA2, 0)
    assert len(generated_subcoalgebra(x1)) == 2
    assert len(generated_subcoalgebra(NCPolynomial.parse(SA2, "x1x2"))) == 4
    for A in (U2, U3):
        B = generated_subcoalgebra(NCPolynomial.parse(A, "x12"))
        assert len(B) == A.d ** 2
        assert invariance_defect(B) <= 1e-10


def test_subcoalgebra_contains_generator_and_is_invariant():
    p = NCPolynomial.parse(SA2, "x1x2x1") + 2j * NCPolynomial.parse(SA2, "x2")
    B = generated_subcoalgebra(p)
    assert span_residual(B, p) <= 1e-10
    assert invariance_defect(B) <= 1e-10


def test_subcoalgebra_zero_raises():
    with pytest.raises(ZeroElement):
        generated_subcoalgebra(NCPolynomial.zero(SA2))


def test_intersection_of_subcoalgebras_is_subcoalgebra():
    B1 = generated_subcoalgebra(NCPolynomial.parse(SA2, "x1x2"))
    B2 = generated_subcoalgebra(NCPolynomial.parse(SA2, "x2x1"))
    C = subspace_intersection(B1, B2)
    names = {SA2.word_name(w) for b in C for w, _ in b.items()}
    assert len(C) == 3 and names == {"1", "x1", "x2"}
    assert invariance_defect(C) <= 1e-10


def test_non_invariant_span_detected():
    # span{x1} misses the unit in Δx1
    assert invariance_defect([NCPolynomial.gen(SA2, 0)]) > 0.5


def test_coproduct_on_leg_raises_arity():
    T = coproduct_on_leg(coproduct(SA2, (0,)), 1)
    assert T.arity == 3
