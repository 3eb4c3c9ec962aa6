from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qsew.scalars import EXACT, QQi
from qsew.graded import (GradedMap, GradedSpace, NotNilpotent, Vector,
                         jc_split, project, q_L0_insert, map_from_json)
from qsew.series import MultiLogSeries


def single(dim=1, wt=0):
    return GradedSpace(1, {(QQi(wt),): dim})


def two_piece():
    return GradedSpace(1, {(QQi(1),): 1, (QQi(2),): 1})


class TestProject:
    def test_exact_keep(self):
        sp = single(1, 1)
        m = sp.basis_vector((QQi(1),), 0)
        assert project(m, (QQi(1),), "exact") == m

    def test_exact_kill(self):
        sp = single(1, 1)
        m = sp.basis_vector((QQi(1),), 0)
        assert project(m, (QQi(0),), "exact").is_zero()

    def test_at_most(self):
        sp = two_piece()
        m = sp.basis_vector((QQi(1),), 0) + sp.basis_vector((QQi(2),), 0)
        low = project(m, (QQi(1),), "at_most")
        assert low == sp.basis_vector((QQi(1),), 0)


class TestJordanChevalley:
    def test_diagonal_input(self):
        sp = single(2, 3)
        L0 = GradedMap(sp, sp, {((QQi(3),), (QQi(3),)): [[3, 0], [0, 3]]})
        jc = jc_split(L0)
        assert jc.nilpotent.is_zero()
        assert jc.nilpotency_index == 1

    def test_jordan_block(self):
        sp = single(2, 5)
        w = (QQi(5),)
        L0 = GradedMap(sp, sp, {(w, w): [[5, 1], [0, 5]]})
        jc = jc_split(L0)
        assert jc.nilpotent.block(w, w) == [[QQi(0), QQi(1)],
                                            [QQi(0), QQi(0)]]
        assert jc.nilpotency_index == 2

    def test_mislabelled_grading(self):
        sp = single(2, 0)
        w = (QQi(0),)
        L0 = GradedMap(sp, sp, {(w, w): [[1, 0], [0, 1]]})
        with pytest.raises(NotNilpotent):
            jc_split(L0)

    def test_reassembly_and_commutation(self):
        sp = GradedSpace(1, {(QQi(Fraction(1, 2)),): 3})
        w = (QQi(Fraction(1, 2)),)
        mat = [[Fraction(1, 2), 1, 2], [0, Fraction(1, 2), -1],
               [0, 0, Fraction(1, 2)]]
        L0 = GradedMap(sp, sp, {(w, w): mat})
        jc = jc_split(L0)
        assert jc.reassemble() == L0
        assert (jc.semisimple @ jc.nilpotent) == (jc.nilpotent @ jc.semisimple)


def _exact_inverse(mat):
    """Gauss-Jordan inverse over QQi for the basis-change tests."""
    n = len(mat)
    a = [[QQi(x) if not isinstance(x, QQi) else x for x in row]
         + [QQi(1) if i == j else QQi(0) for j in range(n)]
         for i, row in enumerate(mat)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col])
        a[col], a[piv] = a[piv], a[col]
        inv = QQi(1) / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


class TestQL0Insert:
    def test_semisimple_dim1(self):
        sp = GradedSpace(1, {(QQi(Fraction(1, 2)),): 1})
        w = (QQi(Fraction(1, 2)),)
        L0 = GradedMap(sp, sp, {(w, w): [[Fraction(1, 2)]]})
        ins = q_L0_insert(sp, [jc_split(L0)], cutoff=2)
        assert len(ins.terms) == 1
        t = ins.terms[0]
        assert t.weights == w and t.log_powers == (0,)
        assert t.vector == sp.basis_vector(w, 0)

    def test_jordan_block_log_term(self):
        # L(0)_n m1 = m2: q^l (m1 x m1* + m2 x m2* + log q m2 x m1*)
        sp = single(2, 0)
        w = (QQi(0),)
        L0 = GradedMap(sp, sp, {(w, w): [[0, 0], [1, 0]]})
        ins = q_L0_insert(sp, [jc_split(L0)], cutoff=1)
        got = {(t.alpha, t.log_powers): dict(t.vector.entries)
               for t in ins.terms}
        one = QQi(1)
        assert got == {
            (0, (0,)): {(w, 0): one},
            (0, (1,)): {(w, 1): one},
            (1, (0,)): {(w, 1): one},
        }

    def test_a_zero_gives_zero(self):
        sp = single(2, 0)
        w = (QQi(0),)
        L0 = GradedMap(sp, sp, {(w, w): [[0, 0], [1, 0]]})
        ins = q_L0_insert(sp, [jc_split(L0)], A=GradedMap.zero(sp),
                          cutoff=1)
        assert ins.terms == []

    def test_no_logs_when_semisimple(self):
        sp = GradedSpace(1, {(QQi(0),): 2, (QQi(1),): 3})
        L0 = GradedMap(sp, sp, {((QQi(1),), (QQi(1),)):
                                [[1, 0, 0], [0, 1, 0], [0, 0, 1]]})
        ins = q_L0_insert(sp, [jc_split(L0)], cutoff=4)
        assert all(t.log_powers == (0,) for t in ins.terms)

    def test_log_power_bound(self):
        sp = single(3, 0)
        w = (QQi(0),)
        L0 = GradedMap(sp, sp, {(w, w): [[0, 0, 0], [1, 0, 0], [0, 1, 0]]})
        jc = jc_split(L0)
        ins = q_L0_insert(sp, [jc], cutoff=1)
        assert max(t.log_powers[0] for t in ins.terms) == jc.nilpotency_index - 1

    def test_basis_independence(self):
        # pair(m', m) must equal <m', q^{L(0)} m> in any basis
        sp = single(3, 2)
        w = (QQi(2),)
        mat = [[2, 1, 0], [0, 2, 1], [0, 0, 2]]
        L0 = GradedMap(sp, sp, {(w, w): mat})
        ins1 = q_L0_insert(sp, [jc_split(L0)], cutoff=3)
        P = [[1, 2, 0], [0, 1, 3], [1, 0, 1]]
        Pi = _exact_inverse(P)
        Pm = GradedMap(sp, sp, {(w, w): P})
        Pim = GradedMap(sp, sp, {(w, w): Pi})
        L0b = Pim @ L0 @ Pm
        ins2 = q_L0_insert(sp, [jc_split(L0b)], cutoff=3)
        mprime = Vector(sp, {(w, 0): 1, (w, 1): QQi(Fraction(1, 2)), (w, 2): -2})
        m = Vector(sp, {(w, 0): 3, (w, 2): 1})
        lhs = ins1.pair(mprime, m)
        rhs = ins2.pair(Pm.transpose().apply(mprime), Pim.apply(m))
        assert lhs == rhs


class TestSerialization:
    def test_space_round_trip(self):
        sp = GradedSpace(2, {(QQi(Fraction(1, 2)), QQi(1)): 2,
                             (QQi(0), QQi(0)): 1})
        assert GradedSpace.from_json(sp.to_json()) == sp

    def test_map_round_trip(self):
        sp = two_piece()
        g = GradedMap(sp, sp, {((QQi(1),), (QQi(2),)): [[Fraction(2, 3)]]},
                      weight_shift=(QQi(1),))
        back = map_from_json(g.to_json(), sp, sp)
        assert back == g
