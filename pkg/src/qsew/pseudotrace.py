"""Pseudo-traces on A-linear endomorphisms and pseudo-sewing.

A finite-dimensional unital algebra A acts on the right of a module M,
commuting with every mode operator.  A symmetric linear functional
omega on A induces, through a dual-basis certificate (x_i, f_i) with
sum x_i f_i(m) = m, the trace

    tr_omega(T) = sum_i omega(f_i(T x_i))

on A-linear truncation-bounded endomorphisms.  Pseudo-sewing replaces
the plain contraction of a sewn handle by this trace; the reduction
check verifies against the two-variable sewing over the module of
A-linear maps, restricted to the diagonal q = q1 q2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import scalars
from .scalars import EXACT, QQi
from .graded import (GradedMap, GradedSpace, JordanChevalley, Vector,
                     mat_is_zero, mat_mul, mat_scale, mat_eye, weight_key)
from .series import MultiLogSeries
from .sewing import SewingPlan, sew


class NotALinear(ValueError):
    """A map fails to commute with the right algebra action."""


class NotACommuting(ValueError):
    """A block's endomorphism form fails the algebra-commutation test."""


class FiniteAlgebra:
    """Associative unital algebra by structure constants.

    structure[i][j] is the coefficient list of e_i e_j in the basis;
    associativity and the unit law are checked exactly on construction."""

    def __init__(self, structure, unit, names=None):
        self.dim = len(structure)
        self.structure = [[[QQi(c) for c in cell] for cell in row]
                          for row in structure]
        self.unit = [QQi(c) for c in unit]
        self.names = names or [f"e{i}" for i in range(self.dim)]
        self._check()

    def _check(self):
        for i in range(self.dim):
            for j in range(self.dim):
                for k in range(self.dim):
                    lhs = self.mul(self.mul(self.basis(i), self.basis(j)),
                                   self.basis(k))
                    rhs = self.mul(self.basis(i),
                                   self.mul(self.basis(j), self.basis(k)))
                    if lhs != rhs:
                        raise ValueError("structure constants not associative")
        for i in range(self.dim):
            e = self.basis(i)
            if self.mul(self.unit, e) != e or self.mul(e, self.unit) != e:
                raise ValueError("unit law fails")

    def basis(self, i):
        return [QQi(1) if j == i else QQi(0) for j in range(self.dim)]

    def mul(self, a, b):
        out = [QQi(0)] * self.dim
        for i, ai in enumerate(a):
            if not ai:
                continue
            for j, bj in enumerate(b):
                if not bj:
                    continue
                for k, c in enumerate(self.structure[i][j]):
                    out[k] = out[k] + ai * bj * c
        return out

    def scale_elt(self, a, c):
        return [x * c for x in a]

    def add_elt(self, a, b):
        return [x + y for x, y in zip(a, b)]

    @classmethod
    def scalar_field(cls):
        return cls([[[1]]], [1], names=["1"])

    @classmethod
    def dual_numbers(cls, rank=2):
        """C[eps]/(eps^rank) with basis 1, eps, ..., eps^{rank-1}."""
        dim = rank
        structure = [[[1 if k == i + j else 0 for k in range(dim)]
                      for j in range(dim)] for i in range(dim)]
        return cls(structure, [1] + [0] * (dim - 1),
                   names=["1"] + [f"eps^{j}" if j > 1 else "eps"
                                  for j in range(1, dim)])

    @classmethod
    def matrix_algebra(cls, n):
        """Full n x n matrix algebra on the unit basis E_{ab}."""
        dim = n * n
        def idx(a, b):
            return a * n + b
        structure = [[[0] * dim for _ in range(dim)] for _ in range(dim)]
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for d in range(n):
                        if b == c:
                            structure[idx(a, b)][idx(c, d)][idx(a, d)] = 1
        unit = [0] * dim
        for a in range(n):
            unit[idx(a, a)] = 1
        return cls(structure, unit,
                   names=[f"E{a}{b}" for a in range(n) for b in range(n)])

    def to_json(self):
        return {
            "dim": self.dim,
            "structure": [[[c.to_json() for c in cell] for cell in row]
                          for row in self.structure],
            "unit": [c.to_json() for c in self.unit],
            "names": self.names,
        }

    @classmethod
    def from_json(cls, data):
        structure = [[[QQi.from_json(c) for c in cell] for cell in row]
                     for row in data["structure"]]
        unit = [QQi.from_json(c) for c in data["unit"]]
        return cls(structure, unit, data.get("names"))


class SLF:
    """Symmetric linear functional: omega(ab) = omega(ba), checked on
    all basis pairs at construction."""

    def __init__(self, algebra, values):
        self.algebra = algebra
        self.values = [QQi(v) for v in values]
        if len(self.values) != algebra.dim:
            raise ValueError("one value per basis element")
        for i in range(algebra.dim):
            for j in range(algebra.dim):
                ab = algebra.mul(algebra.basis(i), algebra.basis(j))
                ba = algebra.mul(algebra.basis(j), algebra.basis(i))
                if self(ab) != self(ba):
                    raise ValueError(
                        f"functional is not symmetric on ({i},{j})")

    def __call__(self, elt):
        total = QQi(0)
        for v, c in zip(self.values, elt):
            total = total + v * c
        return total

    def to_json(self):
        return [v.to_json() for v in self.values]


@dataclass
class RightModuleStructure:
    """Right A-action on M together with a dual-basis certificate.

    action[i] is the GradedMap of the right action of e_i (weight shift
    zero); xs are homogeneous module vectors and fs[i] sends each basis
    key of M to the coefficient list of f_i(that vector) in A, with
    every f_i an A-linear map M -> A.  The certificate identity
    sum_i x_i f_i(m) = m is verified on a module basis."""

    module: object
    algebra: FiniteAlgebra
    action: list
    xs: list
    fs: list

    def __post_init__(self):
        self._xa = {}
        for i, x in enumerate(self.xs):
            for t in range(self.algebra.dim):
                self._xa[(i, t)] = self.action[t].apply(x)
        self._check_action_module_map()
        self._check_certificate()

    def x_times(self, i, elt):
        """x_i . a for an algebra element a, from the precomputed table."""
        out = None
        for t, c in enumerate(elt):
            if scalars.is_zero(c):
                continue
            term = self._xa[(i, t)].scale(c)
            out = term if out is None else out + term
        return out if out is not None else \
            Vector(self.module.space, {}, EXACT)

    def _check_action_module_map(self):
        A = self.algebra
        unit_map = self._act_elt(A.unit)
        ident = GradedMap.identity(self.module.space)
        if unit_map != ident:
            raise ValueError("unit of A must act as the identity")
        for i in range(A.dim):
            for j in range(A.dim):
                ab = A.mul(A.basis(i), A.basis(j))
                # right action reverses order: R_a R_b = R_{ba}
                lhs = self.action[j] @ self.action[i]
                if lhs != self._act_elt(ab):
                    raise ValueError("right-action relations fail")

    def _act_elt(self, elt):
        out = GradedMap.zero(self.module.space, mode=EXACT)
        for c, m in zip(elt, self.action):
            if c:
                out = out + m.scale(c)
        return out

    def _check_certificate(self):
        for key in self.module.space.basis():
            m = self.module.space.basis_vector(*key)
            total = Vector(self.module.space, {}, EXACT)
            for i, f in enumerate(self.fs):
                a = f(key)
                if all(scalars.is_zero(c) for c in a):
                    continue
                total = total + self.x_times(i, a)
            if total != m:
                raise ValueError(f"certificate fails on basis key {key}")

    def f_of(self, i, vec):
        """f_i applied to a module vector, as an algebra element."""
        out = [QQi(0)] * self.algebra.dim
        for key, c in vec.entries.items():
            a = self.fs[i](key)
            for t, at in enumerate(a):
                out[t] = out[t] + at * c
        return out

    def check_a_linear(self, T):
        for i, R in enumerate(self.action):
            if (T @ R) != (R @ T):
                raise NotALinear(
                    f"map does not commute with the action of "
                    f"{self.algebra.names[i]}")

    def check_mode_compat(self, voa, test_vectors, n_range=(-2, 2)):
        """Exact spot check that the right action commutes with mode
        operators."""
        devs = 0
        for v in test_vectors:
            for n in range(n_range[0], n_range[1] + 1):
                Y = self.module.mode(v, n)
                for R in self.action:
                    if (Y @ R) != (R @ Y):
                        devs += 1
        return devs


def free_certificate(module, algebra, generator_keys, component_of):
    """Certificate for a free right module M = (+)_i x_i A.

    generator_keys: basis keys of the generators x_i.
    component_of: basis key -> (generator index, algebra coefficient
    list) expressing that basis vector as x_i . a."""
    xs = [module.space.basis_vector(*k) for k in generator_keys]
    fs = []
    for i in range(len(generator_keys)):
        def f(key, i=i):
            gi, a = component_of(key)
            return a if gi == i else [QQi(0)] * algebra.dim
        fs.append(f)
    return xs, fs


def jordan_fock_structure(module):
    """Right C[eps]/(eps^r) structure on a jordan-thickened Fock module,
    with eps acting as the nilpotent shift of the zero mode."""
    r = module.jordan_rank
    A = FiniteAlgebra.dual_numbers(r)
    space = module.space
    # eps^j sends (p, i) to (p, i + j)
    action = []
    for j in range(r):
        blocks = {}
        for wts, listing in module._basis_at.items():
            idx = {pj: t for t, pj in enumerate(listing)}
            mat = [[QQi(0)] * len(listing) for _ in range(len(listing))]
            hit = False
            for col, (p, i) in enumerate(listing):
                if i + j < r:
                    mat[idx[(p, i + j)]][col] = QQi(1)
                    hit = True
            if hit:
                blocks[(wts, wts)] = mat
        action.append(GradedMap(space, space, blocks,
                                weight_shift=(QQi(0),), mode=EXACT))
    gen_keys = []
    gen_index = {}
    for wts, listing in sorted(module._basis_at.items(),
                               key=lambda kv: weight_key(kv[0])):
        for t, (p, i) in enumerate(listing):
            if i == 0:
                gen_index[(wts, p)] = len(gen_keys)
                gen_keys.append((wts, t))

    def component_of(key):
        wts, t = key
        p, i = module._basis_at[wts][t]
        return gen_index[(wts, p)], A.basis(i)

    xs, fs = free_certificate(module, A, gen_keys, component_of)
    return RightModuleStructure(module, A, action, xs, fs)


def trivial_structure(module):
    """A = C acting by scalars; the certificate lists the module basis."""
    A = FiniteAlgebra.scalar_field()
    action = [GradedMap.identity(module.space)]
    keys = list(module.space.basis())
    index = {k: i for i, k in enumerate(keys)}
    xs, fs = free_certificate(module, A, keys,
                              lambda key: (index[key], [QQi(1)]))
    return RightModuleStructure(module, A, action, xs, fs)


def hs_trace(omega, cert, T):
    """tr_omega(T) = sum_i omega(f_i(T x_i)) for A-linear T."""
    cert.check_a_linear(T)
    return hs_trace_unchecked(omega, cert, T)


def hs_trace_unchecked(omega, cert, T):
    total = QQi(0)
    for x, i in zip(cert.xs, range(len(cert.xs))):
        total = total + omega(cert.f_of(i, T.apply(x)))
    return total


def end0A_action(voa, M, v, side, T):
    """Mode family of the two-sided vertex action on endomorphisms:

        side "first":   n -> Y_M(v)_n . T
        side "second":  n -> (-1)^d sum_j (1/j!) T . Y_M(L(1)^j v)_{2d-j-n-2}

    for homogeneous v of weight d (the inversion-twisted action carried
    by the second marked point)."""
    wts = v.weights_present()
    if len(wts) != 1:
        raise ValueError("v must be homogeneous")
    d = int(wts[0][0].re)
    span = int(M.weight_ceiling - M.weight_floor)
    out = {}
    if side == "first":
        for n in range(-(span + d + 1), span + d + 2):
            g = M.mode(v, n) @ T
            if not g.is_zero():
                out[n] = g
        return out
    if side != "second":
        raise ValueError("side must be 'first' or 'second'")
    for n in range(-(span + d + 1), span + d + 2):
        acc = None
        cur = v
        j = 0
        sign = QQi((-1) ** d)
        while not cur.is_zero():
            inner = M.mode(cur, 2 * d - j - n - 2)
            if not inner.is_zero():
                term = (T @ inner).scale(sign * QQi(Fraction(1, math.factorial(j))))
                acc = term if acc is None else acc + term
            cur = voa.L(1).apply(cur)
            j += 1
        if acc is not None and not acc.is_zero():
            out[n] = acc
    return out


def trace_block_check(omega, cert, voa, test_vectors=None, sample_maps=None):
    """Exact deviation of tr_omega(Y(v)_n . T) = tr_omega(T . Y(v)_n)
    over modes that keep both compositions inside the truncation."""
    M = cert.module
    if test_vectors is None:
        test_vectors = [voa.vacuum, voa.state((1,)), voa.conformal_vector]
    if sample_maps is None:
        sample_maps = _sample_a_linear_maps(cert)
    span = int(M.weight_ceiling - M.weight_floor)
    dev = 0.0
    for v in test_vectors:
        d = int(v.weights_present()[0][0].re) if v.weights_present() else 0
        for n in range(-span - d, span + d + 1):
            Y = M.mode(v, n)
            if Y.is_zero():
                continue
            shift = Y.weight_shift
            for T in sample_maps:
                if not _composition_safe(M, T, shift):
                    continue
                lhs = hs_trace_unchecked(omega, cert, Y @ T)
                rhs = hs_trace_unchecked(omega, cert, T @ Y)
                dev = max(dev, scalars.magnitude(lhs - rhs))
    return dev


def _composition_safe(M, T, shift):
    """Both Y.T and T.Y keep every contribution inside storage."""
    if shift is None:
        return False
    s = shift[0].re
    ceil = M.weight_ceiling
    for (src, dst) in T.blocks:
        if src[0].re + s > ceil or dst[0].re + s > ceil:
            return False
    return True


def _sample_a_linear_maps(cert, limit=48):
    """A small family x_i a f_j of A-linear maps, deterministic order."""
    A = cert.algebra
    maps = []
    for i in range(len(cert.xs)):
        for j in range(len(cert.xs)):
            for t in range(A.dim):
                g = basis_endomorphism(cert, i, j, A.basis(t))
                if not g.is_zero():
                    maps.append(g)
                if len(maps) >= limit:
                    return maps
    return maps


def basis_endomorphism(cert, i, j, a):
    """The A-linear map m -> x_i . (a f_j(m)) as a GradedMap."""
    M = cert.module
    space = M.space
    A = cert.algebra
    blocks = {}
    for key in space.basis():
        fa = A.mul(a, cert.fs[j](key))
        if all(scalars.is_zero(c) for c in fa):
            continue
        img = cert.x_times(i, fa)
        (src_w, src_i) = key
        for (dst_w, dst_i), c in img.entries.items():
            mat = blocks.setdefault(
                (src_w, dst_w),
                [[QQi(0)] * space.pieces[src_w]
                 for _ in range(space.pieces[dst_w])])
            mat[dst_i][src_i] = mat[dst_i][src_i] + c
    return GradedMap(space, space, blocks, mode=EXACT)


# -- the endomorphism form of a block ---------------------------------------


def phi_sharp(block, w, mprime_slot, m_slot):
    """phi as M -> M endomorphism on fixed outer arguments:
    <phi#(w) m, m'> = phi(w (x) m' (x) m)."""
    M = block.modules[m_slot].space
    blocks = {}
    outer = list(w)
    for src in M.sorted_weights():
        for dst in M.sorted_weights():
            mat = [[QQi(0)] * M.pieces[src] for _ in range(M.pieces[dst])]
            hit = False
            for j in range(M.pieces[src]):
                for i in range(M.pieces[dst]):
                    args = _arrange(block, outer, mprime_slot, m_slot,
                                    (dst, i), (src, j))
                    val = block.evaluate(args)
                    if not scalars.is_zero(val):
                        mat[i][j] = val
                        hit = True
            if hit:
                blocks[(src, dst)] = mat
    from .graded import GradedMap as GM
    return GM(block.modules[m_slot].space, block.modules[m_slot].space,
              blocks, mode=block.mode)


def _arrange(block, outer, mprime_slot, m_slot, mprime_key, m_key):
    args = []
    oi = 0
    for slot in range(len(block.modules)):
        if slot == mprime_slot:
            args.append(block.modules[slot].space.basis_vector(*mprime_key))
        elif slot == m_slot:
            args.append(block.modules[slot].space.basis_vector(*m_key))
        else:
            args.append(outer[oi])
            oi += 1
    return args


def check_sharp_commutes(cert, sharp):
    """eqb-style precondition: every weight-block of the endomorphism
    form must commute with the algebra action."""
    try:
        cert.check_a_linear(sharp)
    except NotALinear as e:
        raise NotACommuting(str(e)) from e


def pseudo_sew(block, w, omega, cert, cutoff, mprime_slot=None, m_slot=None):
    """The pseudo-trace series

        sum_lambda q^lambda tr_omega(q^{L(0)_n} P_lambda phi#(w) P_lambda)

    as a single-variable log series."""
    if mprime_slot is None:
        mprime_slot = len(block.modules) - 2
    if m_slot is None:
        m_slot = len(block.modules) - 1
    M = cert.module
    cutoff = Fraction(cutoff)
    sharp = phi_sharp(block, w, mprime_slot, m_slot)
    check_sharp_commutes(cert, sharp)
    jc = M.jc()
    nil = jc.nilpotent
    terms = {}
    for wts in M.space.weights_at_most(cutoff):
        lam = wts[0]
        # P_lambda sharp P_lambda
        blockmat = sharp.block(wts, wts)
        if mat_is_zero(blockmat):
            continue
        P = GradedMap(M.space, M.space, {(wts, wts): blockmat}, mode=EXACT)
        Nk = P
        for k in range(jc.nilpotency_index):
            if k > 0:
                Nk = nil @ Nk
                if Nk.is_zero():
                    break
            val = hs_trace_unchecked(
                omega, cert, Nk.scale(Fraction(1, math.factorial(k))))
            if not scalars.is_zero(val):
                key = ((lam,), (k,))
                terms[key] = terms.get(key, QQi(0)) + val
    return MultiLogSeries(1, terms, cutoff=cutoff, mode=EXACT)


# -- the module of A-linear endomorphisms, for the sewing route -------------


class End0AModule:
    """The two-graded space of A-linear maps M_[mu] -> M_[lambda], with
    basis x_i a f_j from a free-module certificate.

    Carries the data the generic contraction needs: the space, the
    Jordan-Chevalley split per grading axis (left and right composition
    with L(0)_n), and conversion between basis coordinates and actual
    GradedMaps on M."""

    def __init__(self, cert, cutoff):
        self.cert = cert
        M = cert.module
        self.M = M
        self.cutoff = Fraction(cutoff)
        A = cert.algebra
        self.gen_pieces = {}
        for gi, x in enumerate(cert.xs):
            wts = x.weights_present()
            if len(wts) != 1:
                raise ValueError("certificate generators must be homogeneous")
            self.gen_pieces.setdefault(wts[0], []).append(gi)
        mweights = [w for w in M.space.weights_at_most(self.cutoff)
                    if w in self.gen_pieces]
        pieces = {}
        self._basis_at = {}
        for lam_w in mweights:
            for mu_w in mweights:
                listing = [(gi, gj, t)
                           for gi in self.gen_pieces[lam_w]
                           for gj in self.gen_pieces[mu_w]
                           for t in range(A.dim)]
                if listing:
                    key = (lam_w[0], mu_w[0])
                    pieces[key] = len(listing)
                    self._basis_at[key] = listing
        self.space = GradedSpace(2, pieces)
        self.voa = M.voa
        self._map_cache = {}

    def basis_map(self, wts, index):
        """The GradedMap on M for the X-basis vector (piece, index)."""
        key = (wts, index)
        if key not in self._map_cache:
            gi, gj, t = self._basis_at[wts][index]
            self._map_cache[key] = basis_endomorphism(
                self.cert, gi, gj, self.cert.algebra.basis(t))
        return self._map_cache[key]

    def vector_to_map(self, vec):
        out = GradedMap.zero(self.M.space, mode=EXACT)
        for (wts, i), c in vec.entries.items():
            out = out + self.basis_map(wts, i).scale(c)
        return out

    def expand(self, S, lam_w, mu_w):
        """Coordinates of the A-linear map S restricted to
        M_[mu] -> M_[lambda] in the certificate basis:
        coefficient of (gi, gj, t) = [f_gi(S x_gj)]_t."""
        key = (lam_w[0], mu_w[0])
        if key not in self._basis_at:
            return {}
        out = {}
        for idx, (gi, gj, t) in enumerate(self._basis_at[key]):
            val = self.cert.f_of(gi, S.apply(self.cert.xs[gj]))[t]
            # keep only the lambda-weight component:
            # f_gi extracts it by homogeneity of the generators
            if not scalars.is_zero(val):
                out[idx] = val
        return out

    def jc_list(self):
        nil = self.M.jc().nilpotent
        n1_blocks = {}
        n2_blocks = {}
        for wts, listing in self._basis_at.items():
            dim = len(listing)
            m1 = [[QQi(0)] * dim for _ in range(dim)]
            m2 = [[QQi(0)] * dim for _ in range(dim)]
            hit1 = hit2 = False
            lam_w = (wts[0],)
            mu_w = (wts[1],)
            for col in range(dim):
                T = self.basis_map(wts, col)
                left = nil @ T
                if not left.is_zero():
                    for idx, c in self.expand(left, lam_w, mu_w).items():
                        m1[idx][col] = c
                        hit1 = True
                right = T @ nil
                if not right.is_zero():
                    for idx, c in self.expand(right, lam_w, mu_w).items():
                        m2[idx][col] = c
                        hit2 = True
            if hit1:
                n1_blocks[(wts, wts)] = m1
            if hit2:
                n2_blocks[(wts, wts)] = m2
        out = []
        for axis, blocks in ((0, n1_blocks), (1, n2_blocks)):
            semis = {}
            for wts, dim in self.space.pieces.items():
                lam = wts[axis]
                if lam:
                    semis[(wts, wts)] = mat_scale(mat_eye(dim, EXACT), lam)
            semi = GradedMap(self.space, self.space, semis,
                             weight_shift=(QQi(0), QQi(0)), mode=EXACT)
            nilm = GradedMap(self.space, self.space, blocks,
                             weight_shift=(QQi(0), QQi(0)), mode=EXACT)
            index = 1
            for wts, dim in self.space.pieces.items():
                blk = nilm.block(wts, wts)
                if mat_is_zero(blk):
                    continue
                power = blk
                k = 1
                while not mat_is_zero(power):
                    k += 1
                    if k > dim + 1:
                        raise ValueError("endomorphism grading not nilpotent")
                    power = mat_mul(power, blk, EXACT)
                index = max(index, k)
            out.append(JordanChevalley(semi, nilm, index))
        return out


class DualSlotStub:
    """Placeholder module for a contraction slot that only needs the
    paired space's basis (the coordinate dual)."""

    def __init__(self, space, voa=None):
        self.space = space
        self.voa = voa


def thm59_check(block, w, omega, cert, cutoff, mprime_slot=None, m_slot=None):
    """Compare pseudo-sewing with the two-variable sewing route.

    Route A sews the block (descended to the endomorphism module)
    against the trace functional over one X/X' pair, asserts the result
    only involves q1 q2, and restricts to the diagonal.  Route B is the
    direct pseudo-trace series.  Returns (max deviation, route A
    restricted, route B)."""
    from .blocks import Block

    if mprime_slot is None:
        mprime_slot = len(block.modules) - 2
    if m_slot is None:
        m_slot = len(block.modules) - 1
    X = End0AModule(cert, cutoff)
    outer_slots = [s for s in range(len(block.modules))
                   if s not in (mprime_slot, m_slot)]
    outer_modules = [block.modules[s] for s in outer_slots]

    sharp_cache = {}

    def sharp_of(outer_keys):
        if outer_keys not in sharp_cache:
            outer_vecs = [block.modules[s].space.basis_vector(*k)
                          for s, k in zip(outer_slots, outer_keys)]
            sh = phi_sharp(block, outer_vecs, mprime_slot, m_slot)
            check_sharp_commutes(cert, sh)
            sharp_cache[outer_keys] = sh
        return sharp_cache[outer_keys]

    coords_cache = {}

    def phiX_value(keys):
        outer_keys = keys[:-1]
        (xw, xi) = keys[-1]
        ck = (outer_keys, xw)
        if ck not in coords_cache:
            sh = sharp_of(outer_keys)
            coords_cache[ck] = X.expand(sh, (xw[0],), (xw[1],))
        return coords_cache[ck].get(xi, QQi(0))

    phiX = Block(None, outer_modules + [DualSlotStub(X.space, X.voa)],
                 phiX_value, provenance="endomorphism-descent", voa=block.voa)

    def tau_value(keys):
        (xw, xi) = keys[0]
        return hs_trace_unchecked(omega, cert, X.basis_map(xw, xi))

    tau = Block(None, [X], tau_value, provenance="pseudo-trace", voa=X.voa)

    psi = phiX.tensor(tau)
    nout = len(outer_modules)
    plan = SewingPlan(psi, [(nout + 1, nout)], cutoff=cutoff)
    two_var = sew(plan, w)
    restricted = two_var.diagonal_restrict()
    direct = pseudo_sew(block, w, omega, cert, cutoff, mprime_slot, m_slot)
    diff = restricted - direct
    dev = max((scalars.magnitude(c) for c in diff.terms.values()), default=0.0)
    return dev, restricted, direct
