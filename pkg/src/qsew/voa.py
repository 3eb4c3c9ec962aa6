"""Concrete truncated vertex-algebra data: the rank-1 free boson.

V is the momentum-0 Fock space with basis a(-n_1)...a(-n_k)|0> indexed
by partitions, conformal vector (1/2)a(-1)^2|0> and central charge 1.
Modules are Fock spaces F_mu, optionally thickened by a nilpotent shift
of the zero mode: a(0) = mu + nu with nu^rank = 0.  For rank >= 2 and
mu != 0 this makes L(0) non-semisimple (L(0)_n = mu nu plus nu^2/2
terms), which is the desk-scale source of log q.

Mode operators Y(v)_n are computed from the normal-ordered product
formula for Y(a(-n_1)...a(-n_k)|0>, z) and cached per (v, n).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

from . import scalars
from .scalars import EXACT, QQi
from .graded import GradedMap, GradedSpace, Vector, jc_split


@lru_cache(maxsize=None)
def partitions(n):
    """Partitions of n as descending tuples, in reverse-lex order."""
    if n < 0:
        return ()
    if n == 0:
        return ((),)
    out = []

    def rec(remaining, max_part, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for part in range(min(remaining, max_part), 0, -1):
            prefix.append(part)
            rec(remaining - part, part, prefix)
            prefix.pop()

    rec(n, n, [])
    return tuple(out)


def partition_count(n):
    return len(partitions(n))


class TruncationOverflow(ValueError):
    """An operator application would leave the stored weight range."""


class ModuleData:
    """A truncated module over the free-boson VOA.

    Subclasses provide ``_mode_basis(partition, n)``, the mode operator
    of the V basis vector labelled by the partition.  Everything else
    (linearity in v, Virasoro shortcuts, the Jordan-Chevalley split of
    L(0)) is shared.
    """

    def __init__(self, space, voa=None, contragredient_flag=False):
        self.space = space
        self.voa = voa if voa is not None else self
        self.contragredient_flag = contragredient_flag
        self._mode_cache = {}
        self._jc = None

    # -- subclass hooks -------------------------------------------------

    def _mode_basis(self, partition, n):
        raise NotImplementedError

    @property
    def weight_floor(self):
        raise NotImplementedError

    @property
    def weight_ceiling(self):
        raise NotImplementedError

    # -- shared API -----------------------------------------------------

    def mode(self, v, n):
        """Y(v)_n as a GradedMap, for v a vector in the VOA.

        Components of the output falling above the stored weight range
        are dropped (truncation semantics)."""
        if isinstance(v, Vector):
            out = None
            for (wts, i), c in sorted(
                    v.entries.items(),
                    key=lambda kv: (kv[0][0][0].re, kv[0][0][0].im, kv[0][1])):
                p = self.voa.basis_label(wts, i)
                m = self.mode_of_basis(p, n).scale(c)
                out = m if out is None else out + m
            return out if out is not None else GradedMap.zero(self.space)
        return self.mode_of_basis(v, n)

    def mode_of_basis(self, partition, n):
        key = (tuple(partition), n)
        if key not in self._mode_cache:
            self._mode_cache[key] = self._mode_basis(tuple(partition), n)
        return self._mode_cache[key]

    def L(self, n):
        return self.mode(self.voa.conformal_vector, n + 1)

    def jc(self):
        if self._jc is None:
            self._jc = jc_split(self.L(0))
        return self._jc

    def l0_nilpotency_index(self):
        return self.jc().nilpotency_index

    def contragredient(self):
        return ContragredientModule(self)

    def zero_vector(self):
        return Vector(self.space, {}, EXACT)


class HeisenbergModule(ModuleData):
    """Fock module F_mu truncated at relative weight <= cutoff.

    Basis: (partition, jordan index).  a(0) acts as mu + nu where nu
    raises the jordan index; all other oscillators act on the partition
    factor alone."""

    def __init__(self, momentum=0, cutoff=5, jordan_rank=1, voa=None):
        if cutoff < 0:
            raise ValueError("cutoff must be nonnegative")
        if jordan_rank < 1:
            raise ValueError("jordan_rank must be at least 1")
        self.momentum = Fraction(momentum)
        self.cutoff = int(cutoff)
        self.jordan_rank = int(jordan_rank)
        self.base_weight = self.momentum * self.momentum / 2
        pieces = {}
        labels = {}
        self._basis_at = {}
        for n in range(self.cutoff + 1):
            wts = (QQi(self.base_weight + n),)
            listing = [(p, j) for p in partitions(n)
                       for j in range(self.jordan_rank)]
            self._basis_at[wts] = listing
            pieces[wts] = len(listing)
            labels[wts] = [self._label(p, j) for p, j in listing]
        space = GradedSpace(1, pieces, labels)
        super().__init__(space, voa)
        self._index_of = {}
        for wts, listing in self._basis_at.items():
            for i, pj in enumerate(listing):
                self._index_of[pj] = (wts, i)

    def _label(self, p, j):
        osc = "|0>" if self.momentum == 0 else f"|{self.momentum}>"
        name = "".join(f"a(-{k})" for k in p) + osc
        return name if self.jordan_rank == 1 else f"{name}:e{j}"

    @property
    def weight_floor(self):
        return self.base_weight

    @property
    def weight_ceiling(self):
        return self.base_weight + self.cutoff

    def basis_label(self, wts, i):
        """Partition of the VOA basis vector at (piece, index)."""
        p, j = self._basis_at[wts][i]
        if j != 0:
            raise ValueError("VOA vectors must have trivial jordan index")
        return p

    def state(self, partition, jordan=0):
        partition = tuple(sorted(partition, reverse=True))
        if (partition, jordan) not in self._index_of:
            raise KeyError(f"state {partition}:{jordan} outside truncation")
        wts, i = self._index_of[(partition, jordan)]
        return self.space.basis_vector(wts, i)

    # -- oscillator action ------------------------------------------------

    def _apply_tuple(self, ms, start):
        """Apply the normal-ordered product of a(m) for m in ms.

        ms is applied creations-leftmost; start is a dict
        (partition, jordan) -> coefficient."""
        ordered = sorted(ms)
        current = dict(start)
        for m in reversed(ordered):
            nxt = {}
            for (p, j), c in current.items():
                if m > 0:
                    mult = p.count(m)
                    if mult == 0:
                        continue
                    q = list(p)
                    q.remove(m)
                    key = (tuple(q), j)
                    nxt[key] = nxt.get(key, QQi(0)) + c * QQi(m * mult)
                elif m < 0:
                    q = tuple(sorted(p + (-m,), reverse=True))
                    key = (q, j)
                    nxt[key] = nxt.get(key, QQi(0)) + c
                else:
                    if self.momentum != 0:
                        key = (p, j)
                        nxt[key] = nxt.get(key, QQi(0)) + c * QQi(self.momentum)
                    if j + 1 < self.jordan_rank:
                        key = (p, j + 1)
                        nxt[key] = nxt.get(key, QQi(0)) + c
            current = nxt
            if not current:
                break
        return current

    def _mode_basis(self, partition, n):
        parts = tuple(partition)
        k = len(parts)
        wt_v = sum(parts)
        shift = wt_v - n - 1
        blocks = {}
        if k == 0:
            if n == -1:
                return GradedMap.identity(self.space)
            return GradedMap.zero(self.space)
        total = n + 1 - wt_v  # required sum of the oscillator indices
        for src_wts, listing in self._basis_at.items():
            src_rel = int(src_wts[0].re - self.base_weight)
            dst_rel = src_rel + shift
            if dst_rel < 0 or dst_rel > self.cutoff:
                continue
            dst_wts = (QQi(self.base_weight + dst_rel),)
            dst_listing = self._basis_at[dst_wts]
            dst_index = {pj: i for i, pj in enumerate(dst_listing)}
            mat = [[QQi(0)] * len(listing) for _ in range(len(dst_listing))]
            hit = False
            for col, (p, j) in enumerate(listing):
                image = {}
                for ms, coeff in self._osc_tuples(k, parts, total, src_rel):
                    res = self._apply_tuple(ms, {(p, j): coeff})
                    for key, c in res.items():
                        image[key] = image.get(key, QQi(0)) + c
                for key, c in image.items():
                    if scalars.is_zero(c):
                        continue
                    mat[dst_index[key]][col] = mat[dst_index[key]][col] + c
                    hit = True
            if hit:
                blocks[(src_wts, dst_wts)] = mat
        return GradedMap(self.space, self.space, blocks,
                         weight_shift=(QQi(shift),), mode=EXACT)

    def _osc_tuples(self, k, parts, total, src_rel):
        """Index tuples (m_1..m_k) with sum = total and their product
        coefficients from the derivative fields, bounds pruned to the
        stored weight window."""
        lo = -(self.cutoff + max(0, -total))
        hi = src_rel + sum(parts)  # annihilators beyond this always die

        def rec(i, remaining, acc, prefix):
            if i == k - 1:
                m = remaining
                if lo <= m <= hi:
                    c = _deriv_coeff(m, parts[i])
                    if c != 0:
                        yield tuple(prefix + [m]), acc * c
                return
            for m in range(lo, hi + 1):
                rest = remaining - m
                if rest < (k - 1 - i) * lo or rest > (k - 1 - i) * hi:
                    continue
                c = _deriv_coeff(m, parts[i])
                if c == 0:
                    continue
                yield from rec(i + 1, rest, acc * c, prefix + [m])

        yield from rec(0, total, QQi(1), [])


def _deriv_coeff(m, n):
    """Coefficient of a(m) z^{-m-n} in (1/(n-1)!) d^{n-1} a(z)."""
    num = 1
    for j in range(1, n):
        num *= (-m - j)
    return QQi(Fraction(num, factorial(n - 1)))


class ContragredientModule(ModuleData):
    """Graded dual with action twisted by the coordinate inversion.

    <Y'(v)_n m', m> = sum_j (-1)^d / j! <m', Y(L(1)^j v)_{2d-j-n-2} m>
    for homogeneous v of weight d."""

    def __init__(self, underlying):
        self.underlying = underlying
        super().__init__(underlying.space, underlying.voa,
                         contragredient_flag=not underlying.contragredient_flag)

    @property
    def weight_floor(self):
        return self.underlying.weight_floor

    @property
    def weight_ceiling(self):
        return self.underlying.weight_ceiling

    def state(self, *args, **kwargs):
        return self.underlying.state(*args, **kwargs)

    def _mode_basis(self, partition, n):
        voa = self.voa
        v = voa.state(partition)
        d = sum(partition)
        out = None
        j = 0
        sign = QQi((-1) ** d)
        while not v.is_zero():
            inner = self.underlying.mode(v, 2 * d - j - n - 2)
            term = inner.transpose().scale(sign * QQi(Fraction(1, factorial(j))))
            out = term if out is None else out + term
            v = voa.L(1).apply(v)
            j += 1
        if out is None:
            return GradedMap.zero(self.space)
        return GradedMap(self.space, self.space, out.blocks,
                         weight_shift=(QQi(d - n - 1),), mode=EXACT)


class VoaData:
    """The VOA with its distinguished vectors and exact structure checks."""

    def __init__(self, module, vacuum, conformal, central_charge):
        self.module = module
        self.vacuum = vacuum
        self.conformal_vector = conformal
        self.central_charge = QQi(central_charge)
        self._check_conformal()

    def _check_conformal(self):
        L = self.module.L
        c2 = L(0).apply(self.conformal_vector) - self.conformal_vector.scale(2)
        if not c2.is_zero():
            raise ValueError("L(0) c != 2c on the stored conformal vector")
        if not L(1).apply(self.conformal_vector).is_zero():
            raise ValueError("L(1) c != 0 on the stored conformal vector")
        half_c = self.vacuum.scale(self.central_charge / QQi(2))
        if not (L(2).apply(self.conformal_vector) - half_c).is_zero():
            raise ValueError("L(2) c != (c/2) vacuum")


def heisenberg_voa(cutoff):
    """The rank-1 free boson VOA truncated at weight cutoff (c = 1)."""
    V = HeisenbergModule(0, cutoff, 1)
    # conformal vector (1/2) a(-1)^2 |0>, needs cutoff >= 2
    if cutoff < 2:
        raise ValueError("VOA truncation must include weight 2")
    V.conformal_vector = V.state((1, 1)).scale(Fraction(1, 2))
    V.vacuum = V.state(())
    V.central_charge = QQi(1)
    VoaData(V, V.vacuum, V.conformal_vector, 1)
    return V


def heisenberg_module(momentum, cutoff, jordan_rank=1, voa=None):
    """Fock module over the free boson; see HeisenbergModule."""
    if voa is None:
        voa = heisenberg_voa(max(2, cutoff))
    return HeisenbergModule(momentum, cutoff, jordan_rank, voa=voa)


def mode(M, v, n):
    return M.mode(v, n)


def contragredient(M):
    return M.contragredient()


class TensorModule:
    """A list of factor modules carrying the product grading."""

    def __init__(self, factors):
        self.factors = list(factors)

    def basis_tuples(self):
        """All tuples of factor basis keys ((weights, index) per factor)."""
        def rec(i):
            if i == len(self.factors):
                yield ()
                return
            for key in self.factors[i].space.basis():
                for rest in rec(i + 1):
                    yield (key,) + rest
        yield from rec(0)

    def tuple_weights(self, keys):
        return tuple(k[0][0] for k in keys)
