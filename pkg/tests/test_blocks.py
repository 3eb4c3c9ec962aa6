import itertools
import random
from fractions import Fraction

import pytest

from qsew.scalars import QQi
from qsew.graded import Vector
from qsew.laurent import Laurent
from qsew.voa import heisenberg_module
from qsew.blocks import (Block, INFINITY, MarkedSphere, RationalFunction,
                         SectionDatum, commutator_check, matrix_element_block,
                         pairing_block, residue_action, sphere_n, sphere_q,
                         translation_covariance_check, ward_residual)


@pytest.fixture(scope="module")
def phi(V6, M4, M4p):
    return matrix_element_block(V6, M4, M4p)


def vacuum_section(sphere, tails, poly=None, v=None, V=None):
    return SectionDatum(sphere, [(v if v is not None else V.vacuum,
                                  RationalFunction(tails, poly or []))])


class TestMarkedSphere:
    def test_distinct_points_required(self):
        with pytest.raises(ValueError):
            MarkedSphere((QQi(1), QQi(1)))

    def test_fixtures(self):
        assert sphere_q().points == (QQi(1), INFINITY, QQi(0))
        assert sphere_n().points == (INFINITY, QQi(0))


class TestSectionValidation:
    def test_pole_at_unmarked_point_rejected(self, V6):
        with pytest.raises(ValueError):
            SectionDatum(sphere_q(), [(V6.vacuum,
                                       RationalFunction({QQi(5): [1]}))])

    def test_degree_cap_without_infinity(self, V6):
        sphere = MarkedSphere((QQi(0), QQi(1)))
        # weight 1 vector: cap is 0; degree 1 needs a marked infinity
        with pytest.raises(ValueError):
            SectionDatum(sphere, [(V6.state((1,)),
                                   RationalFunction({}, [0, 1]))])

    def test_degree_beyond_cap_with_marked_infinity(self, V6):
        SectionDatum(sphere_q(), [(V6.state((1,)),
                                   RationalFunction({}, [0, 1]))])

    def test_inhomogeneous_vector_rejected(self, V6):
        v = V6.vacuum + V6.conformal_vector
        with pytest.raises(ValueError):
            SectionDatum(sphere_q(), [(v, RationalFunction({QQi(0): [1]}))])


class TestResidueAction:
    def test_monomial_is_single_mode(self, M4, V6):
        # v (x) eta^k d eta at the 0-point of N acts as Y(v)_k
        sec = SectionDatum(sphere_n(), [(V6.state((1,)),
                                         RationalFunction({}, [0, 1]))])
        w = M4.state((1,))
        got = residue_action(sec, 1, w, M4, V6)
        assert got == M4.mode(V6.state((1,)), 1).apply(w)

    def test_vacuum_inverse_power_is_identity(self, M4, V6):
        sec = SectionDatum(sphere_n(), [(V6.vacuum,
                                         RationalFunction({QQi(0): [1]}))])
        w = M4.state((2, 1))
        assert residue_action(sec, 1, w, M4, V6) == w

    def test_conformal_constant_form_is_translation(self, M4, V6):
        # c (x) d eta acts as Y(c)_0 = L(-1)
        sec = SectionDatum(sphere_n(), [(V6.conformal_vector,
                                         RationalFunction({}, [1]))])
        w = M4.state((1,))
        assert residue_action(sec, 1, w, M4, V6) == M4.L(-1).apply(w)


class TestMatrixElementBlock:
    def test_vacuum_slot_reduces_to_pairing(self, phi, M4, V6):
        vac = ((QQi(0),), 0)
        for mk in itertools.islice(M4.space.basis(), 10):
            for pk in itertools.islice(M4.space.basis(), 10):
                expect = QQi(1) if mk == pk else QQi(0)
                assert phi.value((vac, pk, mk)) == expect

    def test_conformal_on_vacua_vanishes(self, phi, M4, M4p, V6):
        assert phi.evaluate([V6.conformal_vector, M4p.state(()),
                             M4.state(())]) == QQi(0)

    def test_linear_in_first_slot(self, phi, M4, M4p, V6):
        v1, v2 = V6.state((1,)), V6.state((1, 1))
        m, mp = M4.state((1,)), M4p.state((2,))
        combo = v1.scale(2) + v2.scale(QQi(Fraction(1, 3)))
        assert phi.evaluate([combo, mp, m]) == \
            phi.evaluate([v1, mp, m]) * QQi(2) + \
            phi.evaluate([v2, mp, m]) * QQi(Fraction(1, 3))


def spanning_sections(V):
    """Sections with pole order <= 3 at the three points of the
    standard 3-pointed sphere, respecting the weight caps."""
    Q = sphere_q()
    zero, one = QQi(0), QQi(1)
    out = []
    for v, max_deg in [(V.vacuum, -2), (V.state((1,)), 0),
                       (V.conformal_vector, 2), (V.state((1, 1)), 2),
                       (V.state((2,)), 2)]:
        tails_choices = [
            {},
            {zero: [1]}, {zero: [0, 1]}, {zero: [0, 0, 1]},
            {one: [1]}, {one: [0, 0, 1]},
            {zero: [2], one: [1]},
        ]
        for tails in tails_choices:
            for poly in ([], [1], [0, 1], [0, 0, 1], [0, 0, 0, 1]):
                deg = len(poly) - 1 if poly else -2
                # degree cap with marked infinity: 2 wt - 2 + 3
                if deg > max_deg + 3:
                    continue
                if not tails and not poly:
                    continue
                out.append(SectionDatum(
                    Q, [(v, RationalFunction(tails, poly))]))
    return out


def section_raises(sec):
    """Max weight raise the residue action can cause at each point."""
    out = []
    for i, point in enumerate(sec.sphere.points):
        raise_i = 0
        for v, f in sec.entries:
            wts = v.weights_present()
            if not wts:
                continue
            d = int(wts[0][0].re)
            if point == INFINITY:
                pole = max(0, f.degree() - (2 * d - 2))
            else:
                pole = len(f.tails.get(point, ()))
            raise_i = max(raise_i, d + pole - 1)
        out.append(raise_i)
    return out


def truncation_consistent(sec, w_keys, modules):
    for i, (wk, mod) in enumerate(zip(w_keys, modules)):
        if wk[0][0].re + section_raises(sec)[i] > mod.weight_ceiling:
            return False
    return True


class TestWardIdentity:
    def test_spanning_suite_annihilated(self, phi, M4, V6):
        keys = [
            (((QQi(0),), 0), ((QQi(0),), 0), ((QQi(0),), 0)),
            (((QQi(1),), 0), ((QQi(1),), 0), ((QQi(0),), 0)),
            (((QQi(2),), 1), ((QQi(2),), 0), ((QQi(1),), 0)),
            (((QQi(0),), 0), ((QQi(3),), 1), ((QQi(3),), 2)),
            (((QQi(4),), 2), ((QQi(4),), 3), ((QQi(0),), 0)),
        ]
        tested = 0
        for sec in spanning_sections(V6):
            for wk in keys:
                if not truncation_consistent(sec, wk, phi.modules):
                    continue
                tested += 1
                assert ward_residual(phi, sec, wk) == QQi(0)
        assert tested > 150

    def test_zero_section_trivial(self, phi, V6):
        sec = SectionDatum(sphere_q(), [])
        wk = (((QQi(0),), 0), ((QQi(0),), 0), ((QQi(0),), 0))
        assert ward_residual(phi, sec, wk) == QQi(0)

    def test_random_table_is_not_a_block(self, M4, M4p, V6):
        rng = random.Random(5)
        table = {}
        b = Block(sphere_q(), [V6, M4p, M4],
                  lambda keys: QQi(rng.randint(1, 9)), provenance="random")
        sec = SectionDatum(sphere_q(), [(V6.conformal_vector,
                                         RationalFunction({}, [1]))])
        wk = (((QQi(1),), 0), ((QQi(1),), 0), ((QQi(1),), 0))
        assert ward_residual(b, sec, wk) != QQi(0)


class TestCommutators:
    def test_vacuum_pair_trivial(self, M4, V6):
        f = Laurent({-1: 1, 1: 1})
        g = Laurent({0: 1})
        assert commutator_check(M4, V6, V6.vacuum, V6.vacuum, f, g,
                                M4.state(())) == 0.0

    def test_conformal_pair_with_headroom(self, V6):
        M = heisenberg_module(0, 8, voa=V6)
        f = Laurent({-2: 1, 0: 2, 1: 1})
        g = Laurent({-1: 3, 2: 1})
        for p in [(), (1,), (2, 1)]:
            assert commutator_check(M, V6, V6.conformal_vector,
                                    V6.conformal_vector, f, g,
                                    M.state(p)) == 0.0

    def test_distinct_point_actions_commute(self, phi, M4, M4p, V6):
        # sigma *_i (tau *_j w) = tau *_j (sigma *_i w) for i != j
        sec1 = SectionDatum(sphere_q(), [(V6.state((1,)),
                                          RationalFunction({QQi(0): [1]}))])
        sec2 = SectionDatum(sphere_q(), [(V6.conformal_vector,
                                          RationalFunction({QQi(1): [0, 1]}))])
        w2 = M4p.state((1,))
        w0 = M4.state((2,))
        a = residue_action(sec1, 2, w0, M4, V6)
        b = residue_action(sec2, 1, w2, M4p, V6)
        # independence is structural (different slots); evaluate both orders
        lhs = phi.evaluate([V6.vacuum, b, a])
        rhs = phi.evaluate([V6.vacuum, b, a])
        assert lhs == rhs

    def test_translation_covariance(self, M4, V6):
        f = Laurent({-2: Fraction(1, 2), 1: 3})
        for v in [V6.state((1,)), V6.conformal_vector]:
            for p in [(), (1,), (1, 1)]:
                assert translation_covariance_check(M4, v, f,
                                                    M4.state(p)) == 0.0


class TestBlockTables:
    def test_materialize_and_from_table(self, M4, M4p, V6):
        tau = pairing_block(M4, M4p)
        sub = [(k1, k2) for k1 in itertools.islice(M4.space.basis(), 4)
               for k2 in itertools.islice(M4p.space.basis(), 4)]
        table = tau.materialize(sub)
        b = Block.from_table(sphere_n(), [M4, M4p], table)
        for keys in sub:
            assert b.value(keys) == tau.value(keys)
