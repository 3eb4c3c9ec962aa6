from fractions import Fraction
from math import factorial

import pytest

from qsew.scalars import QQi
from qsew.graded import GradedMap
from qsew.voa import (HeisenbergModule, TruncationOverflow, heisenberg_module,
                      heisenberg_voa, partition_count, partitions, VoaData,
                      TensorModule)


def euler_partition_count(n, _cache={0: 1}):
    """Independent oracle: Euler's pentagonal-number recurrence."""
    if n in _cache:
        return _cache[n]
    total = 0
    k = 1
    while True:
        g1 = k * (3 * k - 1) // 2
        g2 = k * (3 * k + 1) // 2
        if g1 > n and g2 > n:
            break
        sign = -1 if k % 2 == 0 else 1
        if g1 <= n:
            total += sign * euler_partition_count(n - g1)
        if g2 <= n:
            total += sign * euler_partition_count(n - g2)
        k += 1
    _cache[n] = total
    return total


class TestFockSpace:
    def test_graded_dimensions(self, V6):
        M = heisenberg_module(0, 5, voa=V6)
        dims = [M.space.pieces[(QQi(n),)] for n in range(6)]
        assert dims == [euler_partition_count(n) for n in range(6)]
        assert dims == [1, 1, 2, 3, 5, 7]

    def test_momentum_shifts_weights(self, V6):
        M = heisenberg_module(Fraction(1, 1), 2, voa=V6)
        assert (QQi(Fraction(1, 2)),) in M.space.pieces
        assert M.weight_floor == Fraction(1, 2)

    def test_vacuum_weight(self, V6):
        assert V6.L(0).apply(V6.vacuum).is_zero()

    def test_sugawara_translation(self, V6):
        # L(-1) a(-1)|0> = a(-2)|0>
        assert V6.L(-1).apply(V6.state((1,))) == V6.state((2,))

    def test_conformal_vector_axioms(self, V6):
        # construction re-checks L(0)c = 2c, L(1)c = 0, L(2)c = (c/2) vac
        VoaData(V6, V6.vacuum, V6.conformal_vector, 1)


class TestModes:
    def test_vacuum_minus_one_is_identity(self, M4, V6):
        assert M4.mode(V6.vacuum, -1) == GradedMap.identity(M4.space)

    def test_vacuum_other_modes_vanish(self, M4, V6):
        for n in (-3, -2, 0, 1, 2):
            assert M4.mode(V6.vacuum, n).is_zero()

    def test_zero_mode_kills_vacuum_state(self, M4, V6):
        a0 = M4.mode(V6.state((1,)), 0)
        assert a0.apply(M4.state(())).is_zero()

    def test_weight_bookkeeping(self, M4, V6):
        for p, n in [((1,), -2), ((1, 1), 0), ((2,), 1)]:
            g = M4.mode(V6.state(p), n)
            shift = sum(p) - n - 1
            assert g.weight_shift == (QQi(shift),)
            for (src, dst) in g.blocks:
                assert dst[0] == src[0] + QQi(shift)

    def test_virasoro_bracket(self, V6):
        # [L(m), L(n)] = (m-n) L(m+n) + (c/12)(m^3 - m) delta, c = 1
        M = heisenberg_module(0, 6, voa=V6)
        for m in range(-3, 4):
            for n in range(-3, 4):
                raise_amt = max(0, -m) + max(0, -n)
                lhs = M.L(m) @ M.L(n) - M.L(n) @ M.L(m)
                rhs = M.L(m + n).scale(QQi(m - n))
                if m + n == 0:
                    rhs = rhs + GradedMap.identity(M.space).scale(
                        QQi(Fraction(m ** 3 - m, 12)))
                for wts in M.space.sorted_weights():
                    if wts[0].re + raise_amt > 6:
                        continue
                    for i in range(M.space.pieces[wts]):
                        v = M.space.basis_vector(wts, i)
                        assert (lhs.apply(v) - rhs.apply(v)).is_zero()

    def test_borcherds_commutator(self, V6):
        # [Y(u)_m, Y(v)_n] = sum_k C(m, k) Y(Y(u)_k v)_{m+n-k}
        M = heisenberg_module(0, 6, voa=V6)

        def gen_binom(m, k):
            num = 1
            for j in range(k):
                num *= m - j
            return Fraction(num, factorial(k))

        gens = [V6.state((1,)), V6.conformal_vector]
        for u in gens:
            for v in gens:
                for m in range(-2, 3):
                    for n in range(-2, 3):
                        lhs = M.mode(u, m) @ M.mode(v, n) \
                            - M.mode(v, n) @ M.mode(u, m)
                        rhs = GradedMap.zero(M.space)
                        for k in range(0, 8):
                            w = V6.mode(u, k).apply(v)
                            if w.is_zero():
                                continue
                            rhs = rhs + M.mode(w, m + n - k).scale(
                                QQi(gen_binom(m, k)))
                        for wts in M.space.sorted_weights():
                            if wts[0].re > 1:
                                continue
                            for i in range(M.space.pieces[wts]):
                                x = M.space.basis_vector(wts, i)
                                assert (lhs.apply(x) - rhs.apply(x)).is_zero()


class TestContragredient:
    def test_trivial_piece(self, V6):
        M = heisenberg_module(Fraction(3, 2), 0, voa=V6)
        Mp = M.contragredient()
        assert Mp.space.pieces == M.space.pieces

    def test_virasoro_adjoint(self, M4, M4p):
        # <L'(n) m', m> = <m', L(-n) m>
        for n in range(-2, 3):
            assert M4p.L(n) == M4.L(-n).transpose()

    def test_double_contragredient(self, M4, M4p, V6):
        Mpp = M4p.contragredient()
        for p in [(), (1,), (2,), (1, 1)]:
            for n in range(-2, 3):
                assert Mpp.mode(V6.state(p), n) == M4.mode(V6.state(p), n)


class TestJordanModule:
    def test_nilpotent_l0(self, V6):
        MJ = heisenberg_module(1, 3, jordan_rank=2, voa=V6)
        jc = MJ.jc()
        assert jc.nilpotency_index == 2
        assert not jc.nilpotent.is_zero()

    def test_zero_momentum_jordan_still_semisimple_l0(self, V6):
        # L(0)_n = mu nu vanishes when mu = 0 even with a thickened a(0)
        MJ = heisenberg_module(0, 2, jordan_rank=2, voa=V6)
        assert MJ.jc().nilpotent.is_zero()

    def test_modes_commute_with_nilpotent_shift(self, V6):
        MJ = heisenberg_module(1, 3, jordan_rank=2, voa=V6)
        nu = MJ.jc().nilpotent
        for p, n in [((1,), -1), ((1,), 1), ((1, 1), 0)]:
            Y = MJ.mode(V6.state(p), n)
            assert (Y @ nu) == (nu @ Y)


class TestTensorModule:
    def test_factor_actions_commute(self, M4, M4p, V6):
        tm = TensorModule([M4, M4p])
        Y1 = M4.mode(V6.conformal_vector, 0)
        Y2 = M4p.mode(V6.conformal_vector, 1)
        # act on slot 1 then 2 and in the other order on a sample tuple
        from qsew.transport import TensorVector
        keys = (((QQi(2),), 1), ((QQi(1),), 0))
        w = TensorVector.basis([M4, M4p], keys)
        one = w.apply_slot(0, Y1, strict=False).apply_slot(1, Y2, strict=False)
        other = w.apply_slot(1, Y2, strict=False).apply_slot(0, Y1, strict=False)
        assert one.entries == other.entries

    def test_basis_tuples(self, M4, M4p):
        tm = TensorModule([M4, M4p])
        tuples = list(tm.basis_tuples())
        assert len(tuples) == M4.space.dim() ** 2
