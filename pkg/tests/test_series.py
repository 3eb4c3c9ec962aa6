import cmath
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qsew.scalars import EXACT, FLOAT, ModeError, QQi
from qsew.series import MultiLogSeries, NotDiagonal


def mono(e, l=0, c=1, cutoff=None):
    return MultiLogSeries.monomial([e], [l], c, cutoff=cutoff)


class TestArithmetic:
    def test_add_same_term(self):
        a = mono(Fraction(1, 2))
        assert (a + a) == mono(Fraction(1, 2), c=2)

    def test_add_identity(self):
        a = mono(1) + mono(2, l=1)
        zero = MultiLogSeries.zero()
        assert a + zero == a

    def test_add_cancellation(self):
        a = mono(1) + mono(2, l=1)
        b = mono(1, c=-1)
        assert (a + b) == mono(2, l=1)

    def test_mul_exponents_add(self):
        a = mono(Fraction(1, 2))
        assert a * a == mono(1)

    def test_mul_log_powers_add(self):
        a = mono(0, l=1)
        assert a * a == mono(0, l=2)

    def test_mul_truncates(self):
        one_plus = MultiLogSeries.constant(1, cutoff=2) + mono(1, cutoff=2)
        one_minus = MultiLogSeries.constant(1, cutoff=2) + mono(1, c=-1, cutoff=2)
        prod = one_plus * one_minus
        assert prod == MultiLogSeries.constant(1, cutoff=2) + mono(2, c=-1, cutoff=2)

    def test_mode_mismatch(self):
        a = mono(1)
        b = MultiLogSeries.monomial([1], mode=FLOAT, coeff=1.0)
        with pytest.raises(ModeError):
            a + b

    def test_arity_mismatch(self):
        a = mono(1)
        b = MultiLogSeries.monomial([1, 0])
        with pytest.raises(ValueError):
            a + b


# small exponent pool with nonnegative real parts, where truncation is a
# filtration and the ring axioms hold exactly
exponents = st.sampled_from([QQi(0), QQi(1), QQi(Fraction(1, 2)),
                             QQi(2), QQi(Fraction(3, 2), Fraction(1, 2))])
coeffs = st.integers(-4, 4).map(QQi)


@st.composite
def small_series(draw):
    n = draw(st.integers(0, 4))
    terms = {}
    for _ in range(n):
        e = draw(exponents)
        l = draw(st.integers(0, 2))
        terms[((e,), (l,))] = draw(coeffs)
    return MultiLogSeries(1, terms, cutoff=draw(st.sampled_from([4, 6, None])))


class TestRingAxioms:
    @settings(max_examples=40, deadline=None)
    @given(small_series(), small_series(), small_series())
    def test_associativity(self, a, b, c):
        assert (a * b) * c == a * (b * c)

    @settings(max_examples=40, deadline=None)
    @given(small_series(), small_series())
    def test_commutativity(self, a, b):
        assert a * b == b * a

    @settings(max_examples=40, deadline=None)
    @given(small_series(), small_series(), small_series())
    def test_distributivity(self, a, b, c):
        assert a * (b + c) == a * b + a * c


class TestDiagonalRestrict:
    def test_q1q2(self):
        s = MultiLogSeries.monomial([1, 1])
        assert s.diagonal_restrict() == mono(1)

    def test_with_logs(self):
        # q1^2 q2^2 (log q1 + log q2) -> q^2 log q
        s = MultiLogSeries(2, {((QQi(2), QQi(2)), (1, 0)): 1,
                               ((QQi(2), QQi(2)), (0, 1)): 1})
        assert s.diagonal_restrict() == mono(2, l=1)

    def test_not_function_of_product(self):
        s = MultiLogSeries.monomial([1, 0])
        with pytest.raises(NotDiagonal):
            s.diagonal_restrict()

    def test_bad_binomial_split(self):
        s = MultiLogSeries(2, {((QQi(1), QQi(1)), (1, 0)): 1,
                               ((QQi(1), QQi(1)), (0, 1)): 2})
        with pytest.raises(NotDiagonal):
            s.diagonal_restrict()

    @settings(max_examples=30, deadline=None)
    @given(small_series())
    def test_embed_then_restrict(self, s):
        assert s.embed_diagonal().diagonal_restrict() == s


class TestEval:
    def test_sqrt_q_principal(self):
        assert mono(Fraction(1, 2)).eval([(4.0, 0.0)]) == pytest.approx(2.0)

    def test_sqrt_q_after_one_turn(self):
        # e^{(1/2)(ln 4 + 2 pi i)} = -2, frozen from the closed form
        got = mono(Fraction(1, 2)).eval([(4.0, 2 * math.pi)])
        assert got == pytest.approx(-2.0, abs=1e-12)

    def test_log_branch(self):
        got = mono(0, l=1).eval([(1.0, math.pi)])
        assert got == pytest.approx(1j * math.pi)

    def test_zero_modulus_rejected(self):
        with pytest.raises(ValueError):
            mono(1).eval([(0.0, 0.0)])

    def test_eval_is_ring_hom_up_to_truncation(self):
        # |eval(ab) - eval(a) eval(b)| bounded by the dropped tail
        a = MultiLogSeries(1, {((QQi(n),), (0,)): 1 for n in range(4)},
                           cutoff=3)
        b = MultiLogSeries(1, {((QQi(n),), (0,)): QQi(Fraction(1, n + 1))
                               for n in range(4)}, cutoff=3)
        full = MultiLogSeries(1, dict(a.terms), cutoff=None) * \
            MultiLogSeries(1, dict(b.terms), cutoff=None)
        trunc = a * b
        dropped = full + MultiLogSeries(
            1, {k: -v for k, v in trunc.terms.items()}, cutoff=None)
        for q in (0.1, 0.3):
            point = [(q, 0.0)]
            lhs = abs(trunc.eval(point) - a.eval(point) * b.eval(point))
            bound = sum(abs(complex(c)) * q ** float(e[0].re)
                        for (e, l), c in dropped.terms.items())
            assert lhs <= bound + 1e-12


class TestSerialization:
    def test_round_trip_exact(self):
        s = mono(Fraction(1, 2), l=1, c=QQi(Fraction(2, 3), Fraction(-1, 5)),
                 cutoff=4) + mono(2, c=3, cutoff=4)
        assert MultiLogSeries.from_json(s.to_json()) == s

    def test_round_trip_float(self):
        s = MultiLogSeries.monomial([Fraction(1, 3)], coeff=1.5 - 2j,
                                    mode=FLOAT, cutoff=2)
        assert MultiLogSeries.from_json(s.to_json()) == s
