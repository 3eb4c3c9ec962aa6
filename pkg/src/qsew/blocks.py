"""Conformal-block functionals on pointed spheres, at desk scale.

A block is a multilinear functional on a tuple of truncated modules
attached to distinct marked points of P^1, stored extensionally as a
(lazily filled) table over basis tuples.  Global vector-valued one-form
sections are held as exact rational-function data; their residue action
at each marked point is computed by expanding in the standard local
coordinate (z - z_i at finite points, 1/z at infinity, where the
expansion picks up the coordinate-inversion twist on the vector slot).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import scalars
from .scalars import EXACT, QQi
from .graded import Vector, weight_key
from .laurent import Laurent, VLaurent, binomial_shift_expansion

INFINITY = "inf"


@dataclass(frozen=True)
class MarkedSphere:
    """Distinct marked points on P^1 with standard local coordinates."""

    points: tuple

    def __post_init__(self):
        pts = tuple(INFINITY if p == INFINITY else _as_point(p)
                    for p in self.points)
        object.__setattr__(self, "points", pts)
        finite = [p for p in pts if p != INFINITY]
        if len({(p.re, p.im) for p in finite}) != len(finite) or \
                pts.count(INFINITY) > 1:
            raise ValueError("marked points must be distinct")

    @property
    def num_points(self):
        return len(self.points)

    def has_infinity(self):
        return INFINITY in self.points


def _as_point(p):
    if isinstance(p, QQi):
        return p
    return QQi(p)


def sphere_q():
    """The 3-pointed sphere (1, infinity, 0) with coordinates
    (z-1, 1/z, z)."""
    return MarkedSphere((QQi(1), INFINITY, QQi(0)))


def sphere_n():
    """The 2-pointed sphere (infinity, 0) with coordinates (1/z, z)."""
    return MarkedSphere((INFINITY, QQi(0)))


@dataclass
class RationalFunction:
    """f(z) = principal parts at finite poles + a polynomial.

    tails[point] is the list [c_1, c_2, ...] of coefficients of
    (z - point)^{-1}, (z - point)^{-2}, ...; polynomial is the list of
    z^k coefficients."""

    tails: dict = field(default_factory=dict)
    polynomial: list = field(default_factory=list)
    mode: str = EXACT

    def __post_init__(self):
        self.tails = {_as_point(p): [scalars.as_scalar(c, self.mode)
                                     for c in cs]
                      for p, cs in self.tails.items()}
        self.polynomial = [scalars.as_scalar(c, self.mode)
                           for c in self.polynomial]

    def degree(self):
        d = -1
        for k, c in enumerate(self.polynomial):
            if not scalars.is_zero(c):
                d = k
        return d

    def expand_finite(self, center, order):
        """Laurent expansion in eta = z - center."""
        out = Laurent.zero(order, self.mode)
        for p, cs in self.tails.items():
            if p == center:
                out = out + Laurent(
                    {-k: c for k, c in enumerate(cs, start=1)}, order, self.mode)
            else:
                base = center - p
                for k, c in enumerate(cs, start=1):
                    if scalars.is_zero(c):
                        continue
                    out = out + binomial_shift_expansion(
                        -k, base, order, self.mode).scale(c)
        for k, c in enumerate(self.polynomial):
            if scalars.is_zero(c):
                continue
            out = out + binomial_shift_expansion(
                k, center, order, self.mode).scale(c)
        return out

    def expand_infinity(self, order):
        """Laurent expansion of f(1/eta) around eta = 0."""
        out = Laurent.zero(order, self.mode)
        for k, c in enumerate(self.polynomial):
            if not scalars.is_zero(c):
                out = out + Laurent.monomial(-k, c, order, self.mode)
        for p, cs in self.tails.items():
            for k, c in enumerate(cs, start=1):
                if scalars.is_zero(c):
                    continue
                if scalars.is_zero(p):
                    out = out + Laurent.monomial(k, c, order, self.mode)
                    continue
                # (1/eta - p)^{-k} = eta^k sum_t C(k+t-1,t) p^t eta^t
                coeffs = {}
                pk = scalars.one(self.mode)
                for t in range(order - k + 1):
                    coeffs[k + t] = c * QQi(math.comb(k + t - 1, t)) * pk \
                        if self.mode == EXACT else \
                        c * math.comb(k + t - 1, t) * pk
                    pk = pk * p
                out = out + Laurent(coeffs, order, self.mode)
        return out


@dataclass
class SectionDatum:
    """A global section of the (weight-twisted) one-form sheaf: a finite
    list of (homogeneous VOA vector, rational coefficient function),
    meaning sum_i v_i  f_i(z) dz in the standard trivialization.

    Poles may sit only at the sphere's marked points.  For a weight-d
    vector the polynomial degree is capped at 2d - 2; beyond that the
    section acquires a pole at infinity, which is allowed only when
    infinity is marked."""

    sphere: MarkedSphere
    entries: list  # [(Vector in V, RationalFunction), ...]

    def __post_init__(self):
        finite_marked = {p for p in self.sphere.points if p != INFINITY}
        for v, f in self.entries:
            wts = v.weights_present()
            if len(wts) > 1:
                raise ValueError("section vectors must be homogeneous")
            for p in f.tails:
                if p not in finite_marked and any(
                        not scalars.is_zero(c) for c in f.tails[p]):
                    raise ValueError(f"pole at unmarked point {p}")
            if wts:
                d = wts[0][0]
                if d.im != 0 or d.re.denominator != 1:
                    raise ValueError("section vectors need integer weight")
                cap = 2 * int(d.re) - 2
                if f.degree() > cap and not self.sphere.has_infinity():
                    raise ValueError(
                        f"degree {f.degree()} exceeds the weight cap {cap} "
                        f"and infinity is not marked")

    def local_integrand(self, i, order, voa):
        """The eta-expansion F with section = F d(eta) at marked point i.

        At a finite point the trivialization change is a translation, so
        F = sum v_k  f(z_i + eta).  At infinity the vector picks up the
        inversion twist and dz = -eta^{-2} d(eta):
        F = sum_j (-1)^{d+1}/j! eta^{2d-j-2} f(1/eta)  L(1)^j v."""
        point = self.sphere.points[i]
        pairs = []
        for v, f in self.entries:
            if v.is_zero():
                continue
            if point != INFINITY:
                pairs.append((v, f.expand_finite(point, order)))
                continue
            d = int(v.weights_present()[0][0].re)
            fexp = f.expand_infinity(order + abs(2 * d) + 2)
            sign = QQi((-1) ** (d + 1)) if v.mode == EXACT else float((-1) ** (d + 1))
            cur = v
            j = 0
            while not cur.is_zero():
                shiftpow = 2 * d - j - 2
                coeff_series = fexp.shift(shiftpow).truncate(order)
                pairs.append((cur.scale(sign * scalars.as_scalar(
                    Fraction(1, math.factorial(j)), v.mode)), coeff_series))
                Lmap = voa.L(1) if v.mode == EXACT else voa.L(1).to_float()
                cur = Lmap.apply(cur)
                j += 1
        if not pairs:
            return None
        return VLaurent.from_pairs(pairs, pairs[0][0].mode)


def residue_action(section, i, w, module, voa):
    """sigma *_i w = Res_{eta=0} Y_i(sigma local expansion, eta) w.

    For the integrand sum_m u_m eta^m, the residue pairs eta^m with the
    mode Y(u_m)_m."""
    order = _mode_order_bound(module, w, voa)
    integrand = section.local_integrand(i, order, voa)
    if integrand is None:
        return Vector(module.space, {}, w.mode)
    return vlaurent_residue_action(integrand, w, module)


def vlaurent_residue_action(integrand, w, module):
    """Apply sum_m Y(u_m)_m w for a V-valued Laurent integrand."""
    out = Vector(module.space, {}, w.mode)
    for key, f in integrand.parts.items():
        if f.is_zero():
            continue
        vvec = Vector(integrand.space,
                      {key: scalars.one(w.mode)}, w.mode)
        for m, c in f.sorted_items():
            gm = module.mode(_exactify(vvec), m)
            if gm.is_zero():
                continue
            if w.mode == scalars.FLOAT:
                gm = gm.to_float()
            out = out + gm.apply(w).scale(c)
    return out


def _exactify(v):
    if v.mode == EXACT:
        return v
    raise scalars.ModeError("mode tables are built from exact VOA vectors")


def _mode_order_bound(module, w, voa):
    """Orders above this pair with modes that vanish on w by weight."""
    if not w.entries:
        return 2
    wmax = max(k[0][0].re for k in w.entries)
    vmax = max(k[0].re for k in voa.space.pieces)
    floor = module.weight_floor
    return int(math.ceil(float(wmax + vmax - floor))) + 2


class Block:
    """Multilinear functional on modules attached to a sphere's points.

    Values over basis tuples are produced by value_fn and cached, so
    tensor products and matrix-element blocks stay cheap to combine."""

    def __init__(self, sphere, modules, value_fn, provenance="user",
                 voa=None, mode=EXACT):
        if sphere is not None and sphere.num_points != len(modules):
            raise ValueError("one module per marked point")
        self.sphere = sphere
        self.components = [(sphere, 0)] if sphere is not None else []
        self.modules = list(modules)
        self.provenance = provenance
        self.voa = voa if voa is not None else modules[0].voa
        self.mode = mode
        self._value_fn = value_fn
        self._cache = {}

    @classmethod
    def from_table(cls, sphere, modules, table, provenance="user", voa=None,
                   mode=EXACT):
        b = cls(sphere, modules, lambda keys: table.get(keys, scalars.zero(mode)),
                provenance, voa, mode)
        return b

    def value(self, keys):
        keys = tuple(keys)
        if keys not in self._cache:
            self._cache[keys] = scalars.as_scalar(self._value_fn(keys), self.mode)
        return self._cache[keys]

    def evaluate(self, vectors):
        """Multilinear evaluation; each argument is a Vector or a basis key."""
        vecs = []
        for mod, v in zip(self.modules, vectors):
            if isinstance(v, Vector):
                vecs.append(v)
            else:
                wts, i = v
                vecs.append(mod.space.basis_vector(wts, i, self.mode))
        total = scalars.zero(self.mode)

        def rec(slot, keys, coeff):
            nonlocal total
            if scalars.is_zero(coeff):
                return
            if slot == len(vecs):
                total = total + coeff * self.value(keys)
                return
            for key, c in sorted(vecs[slot].entries.items(),
                                 key=lambda kv: (weight_key(kv[0][0]), kv[0][1])):
                rec(slot + 1, keys + (key,), coeff * c)

        rec(0, (), scalars.one(self.mode))
        return total

    def materialize(self, tuples=None):
        """Fill and return the table over the given (or all) basis tuples."""
        from .voa import TensorModule
        if tuples is None:
            tuples = TensorModule(self.modules).basis_tuples()
        return {keys: self.value(keys) for keys in tuples}

    def tensor(self, other):
        """Block on the disjoint union of the two geometries; slots are
        concatenated and the value is the product of the factors."""
        n = len(self.modules)

        def value_fn(keys):
            return self.value(keys[:n]) * other.value(keys[n:])

        b = Block(None, self.modules + other.modules, value_fn,
                  provenance=f"{self.provenance}*{other.provenance}",
                  voa=self.voa, mode=self.mode)
        b.components = [(sph, off) for sph, off in self.components] + \
                       [(sph, off + n) for sph, off in other.components]
        return b

    def component_of_slot(self, slot):
        """(sphere, local point index) owning a global slot."""
        best = None
        for sph, off in self.components:
            if sph is not None and off <= slot < off + sph.num_points:
                best = (sph, slot - off)
        if best is None:
            raise ValueError(f"slot {slot} belongs to no sphere component")
        return best


def matrix_element_block(voa, M, Mprime=None):
    """The functional v (x) m' (x) m -> <Y_M(v, 1) m, m'> on the
    3-pointed sphere (1, infinity, 0)."""
    if Mprime is None:
        Mprime = M.contragredient()

    def value_fn(keys):
        (vw, vi), (pw, pi), (mw, mi) = keys
        v = voa.space.basis_vector(vw, vi)
        m = M.space.basis_vector(mw, mi)
        # the single mode landing in the weight piece of m'
        n_shift = vw[0] + mw[0] - pw[0]
        if n_shift.im != 0 or n_shift.re.denominator != 1:
            return QQi(0)
        n = int(n_shift.re) - 1
        return M.mode(v, n).apply(m).coefficient(pw, pi)

    return Block(sphere_q(), [voa, Mprime, M], value_fn,
                 provenance="matrix-element", voa=voa)


def pairing_block(M, Mprime=None):
    """The contraction m (x) m' -> <m, m'> on the 2-pointed sphere."""
    if Mprime is None:
        Mprime = M.contragredient()

    def value_fn(keys):
        (mw, mi), (pw, pi) = keys
        one = scalars.one(EXACT)
        return one if (mw, mi) == (pw, pi) else QQi(0)

    return Block(sphere_n(), [M, Mprime], value_fn, provenance="pairing",
                 voa=M.voa)


def ward_residual(block, section, w_keys):
    """phi(sum_i sigma *_i w); zero for every global section when phi is
    a conformal block."""
    total = scalars.zero(block.mode)
    base = [key for key in w_keys]
    for i, mod in enumerate(block.modules):
        w_i = mod.space.basis_vector(*base[i], mode=block.mode) \
            if not isinstance(base[i], Vector) else base[i]
        acted = residue_action(section, i, w_i, mod, block.voa)
        if acted.is_zero():
            continue
        args = list(base)
        args[i] = acted
        total = total + block.evaluate(args)
    return total


def commutator_bracket(voa, u, v, f, g):
    """The local bracket of u f dz and v g dz:
    sum_{n>=0} (1/n!) (d^n f) g  Y(u)_n v dz, as a VLaurent."""
    pairs = []
    fn = f
    n = 0
    vmax = max((k[0].re for k in voa.space.pieces), default=Fraction(0))
    while n <= int(vmax) + 1:
        if not fn.is_zero():
            w = voa.mode(u, n).apply(v)
            if not w.is_zero():
                pairs.append((w.scale(Fraction(1, math.factorial(n))), fn * g))
        fn = fn.derivative()
        n += 1
    if not pairs:
        return None
    return VLaurent.from_pairs(pairs, u.mode)


def commutator_check(module, voa, u, v, f, g, w):
    """Deviation of the residue-action commutator identity

        (u f dz) *_i ((v g dz) *_i w) - (v g dz) *_i ((u f dz) *_i w)
            = (bracket) *_i w

    at a single marked point; exactly zero for true module data."""
    uf = VLaurent.from_pairs([(u, f)], u.mode)
    vg = VLaurent.from_pairs([(v, g)], v.mode)
    lhs = vlaurent_residue_action(uf, vlaurent_residue_action(vg, w, module),
                                  module)
    lhs = lhs - vlaurent_residue_action(
        vg, vlaurent_residue_action(uf, w, module), module)
    bracket = commutator_bracket(voa, u, v, f, g)
    rhs = Vector(module.space, {}, w.mode) if bracket is None else \
        vlaurent_residue_action(bracket, w, module)
    diff = lhs - rhs
    return max((scalars.magnitude(c) for c in diff.entries.values()), default=0.0)


def translation_covariance_check(module, v, f, w):
    """Deviation of ((d_z + L(-1)) (v f dz)) *_i w = 0."""
    Lm1 = module.voa.L(-1)
    moved = VLaurent.from_pairs(
        [(v, f.derivative()), (Lm1.apply(v), f)], v.mode)
    out = vlaurent_residue_action(moved, w, module)
    return max((scalars.magnitude(c) for c in out.entries.values()), default=0.0)
