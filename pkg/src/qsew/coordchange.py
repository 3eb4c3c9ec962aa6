"""Change-of-coordinate operators and local vector-field formulas.

A coordinate transform alpha(z) = a_1 z + a_2 z^2 + ... with a_1 != 0
acts on module vectors through

    U(alpha) = a_1^{L(0)} exp(sum_{n>0} c_n L(n))

where the c_n are the unique scalars with
alpha(z) = a_1 exp(sum c_n z^{n+1} d/dz) z.  The exponential terminates
on weight-bounded modules since L(n) lowers weight by n.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from . import scalars
from .scalars import EXACT, FLOAT, QQi
from .laurent import Laurent, VLaurent
from .graded import Vector


class BranchRequired(ValueError):
    """a_1^{L(0)} needs a branch (or exactness) that is not available."""


def flow_exp(cs, hi, mode=EXACT):
    """exp(sum_n c_n z^{n+1} d/dz) z, truncated above z^hi.

    Each application of the derivation raises the valuation, so the
    expansion below the truncation order is a finite sum.  Arithmetic
    runs on untruncated polynomials and discards orders above hi after
    each step, so no accuracy is lost to intermediate derivatives."""
    z = Laurent({1: 1}, None, mode)
    coeffs = [(n, scalars.as_scalar(c, mode)) for n, c in enumerate(cs, start=1)
              if not scalars.is_zero(scalars.as_scalar(c, mode))]

    def derivation(f):
        df = f.derivative()
        out = Laurent.zero(None, mode)
        for n, c in coeffs:
            out = out + df * Laurent({n + 1: c}, None, mode)
        return Laurent({k: v for k, v in out.coeffs.items() if k <= hi},
                       None, mode)

    out = z
    term = z
    j = 1
    while True:
        term = derivation(term).scale(Fraction(1, j))
        if term.is_zero():
            break
        out = out + term
        j += 1
        if j > hi + 2:
            break
    return Laurent(out.coeffs, hi, mode)


@dataclass
class CoordTransform:
    """alpha with its cached canonical data (a_1 and the c_n)."""

    series: Laurent
    a1: object
    cs: list
    order: int  # series stored through z^{order+1}

    def __post_init__(self):
        if not scalars.is_zero(self.series[0]):
            raise ValueError("transform must fix the origin")

    @property
    def mode(self):
        return self.series.mode

    def to_json(self):
        def enc(x):
            return x.to_json() if self.mode == EXACT else [x.real, x.imag]
        return {
            "mode": self.mode,
            "order": self.order,
            "series": {str(k): enc(c) for k, c in self.series.sorted_items()},
        }

    @classmethod
    def from_json(cls, data):
        mode = data["mode"]
        def dec(x):
            return QQi.from_json(x) if mode == EXACT else complex(x[0], x[1])
        coeffs = {int(k): dec(c) for k, c in data["series"].items()}
        return extract_cn(Laurent(coeffs, data["order"] + 1, mode))


def extract_cn(alpha):
    """Solve alpha(z) = a_1 exp(sum c_n z^{n+1} d/dz) z order by order.

    At order z^{m+1} the unknown c_m enters linearly with coefficient
    a_1, so back-substitution determines every c_m uniquely."""
    if alpha.hi is None:
        raise ValueError("the transform series must carry a truncation order")
    if not scalars.is_zero(alpha[0]):
        raise ValueError("transform must fix the origin")
    a1 = alpha[1]
    if scalars.is_zero(a1):
        raise ValueError("transform must have invertible derivative at 0")
    mode = alpha.mode
    K = alpha.hi - 1
    inv_a1 = scalars.one(mode) / a1 if mode == EXACT else 1.0 / a1
    cs = []
    for m in range(1, K + 1):
        approx = flow_exp(cs, m + 1, mode).scale(a1)
        cs.append((alpha[m + 1] - approx[m + 1]) * inv_a1)
    return CoordTransform(alpha, a1, cs, K)


def identity_transform(order, mode=EXACT):
    return extract_cn(Laurent.var(order + 1, mode))


def compose(a, b):
    """The transform alpha(beta(z)) with canonical data recomputed."""
    scalars.join_modes(a.mode, b.mode)
    hi = min(a.order, b.order) + 1
    return extract_cn(a.series.truncate(hi).compose(b.series.truncate(hi)))


def gamma_z(zval, order, mode=EXACT):
    """The coordinate inversion family
    gamma_z(t) = 1/(z+t) - 1/z = sum_{k>=1} (-1)^k t^k / z^{k+1}."""
    zval = scalars.as_scalar(zval, mode)
    inv = scalars.one(mode) / zval if mode == EXACT else 1.0 / zval
    coeffs = {}
    p = inv * inv
    for k in range(1, order + 2):
        coeffs[k] = -p if k % 2 == 1 else p
        p = p * inv
    return extract_cn(Laurent(coeffs, order + 1, mode))


def apply_U(transform, v, module, branch=None):
    """Apply U(alpha) = a_1^{L(0)} exp(sum c_n L(n)) to a module vector.

    In exact mode the scaling part needs integer weights (or a_1 = 1);
    otherwise supply branch = (modulus, argument) of a_1 and work in
    float mode."""
    mode = v.mode
    cs = [scalars.as_scalar(c, mode) for c in transform.cs]
    Ls = [module.L(n) for n in range(1, len(cs) + 1)]
    if mode == FLOAT:
        Ls = [m.to_float() for m in Ls]

    def D(w):
        out = Vector(w.space, {}, mode)
        for c, Lmap in zip(cs, Ls):
            if scalars.is_zero(c):
                continue
            out = out + Lmap.apply(w).scale(c)
        return out

    total = v
    cur = v
    j = 1
    while True:
        cur = D(cur)
        if cur.is_zero():
            break
        cur = cur.scale(Fraction(1, j))
        total = total + cur
        j += 1
    return _scaling_part(transform.a1, total, module, branch)


def _scaling_part(a1, w, module, branch):
    """a_1^{L(0)} with the Jordan-Chevalley split: a_1^{lambda} per piece
    followed by exp(log(a_1) L(0)_n)."""
    mode = w.mode
    one = scalars.one(mode)
    if scalars.is_zero(scalars.as_scalar(a1, mode) - one):
        return w
    jc = module.jc()
    nil = jc.nilpotent if mode == EXACT else jc.nilpotent.to_float()
    has_nil = not jc.nilpotent.is_zero()
    if mode == EXACT:
        if has_nil and any(not _piece_nil_zero(jc, k[0]) for k in w.entries):
            raise BranchRequired(
                "exact a_1^{L(0)} with a nilpotent part needs a_1 = 1")
        out = {}
        for (wts, i), c in w.entries.items():
            lam = wts[0]
            if lam.im != 0 or lam.re.denominator != 1:
                raise BranchRequired(
                    f"exact a_1^{{L(0)}} needs integer weights, got {lam}")
            p = int(lam.re)
            factor = _int_pow_scalar(a1, p)
            out[(wts, i)] = c * factor
        return Vector(w.space, out, mode)
    # float mode
    if branch is not None:
        modulus, argument = branch
        log_a1 = complex(cmath.log(modulus).real, argument)
    else:
        log_a1 = cmath.log(complex(a1))
    out = Vector(w.space, {}, FLOAT)
    for wts in w.weights_present():
        piece = Vector(w.space,
                       {k: c for k, c in w.entries.items() if k[0] == wts},
                       FLOAT)
        lam = complex(wts[0])
        scaled = piece.scale(cmath.exp(lam * log_a1))
        if has_nil:
            acc = scaled
            cur = scaled
            j = 1
            while True:
                cur = nil.apply(cur).scale(log_a1 / j)
                if cur.is_zero():
                    break
                acc = acc + cur
                j += 1
            scaled = acc
        out = out + scaled
    return out


def _piece_nil_zero(jc, wts):
    from .graded import mat_is_zero
    return mat_is_zero(jc.nilpotent.block(wts, wts))


def _int_pow_scalar(a1, p):
    if isinstance(a1, QQi):
        if p >= 0:
            return a1 ** p
        return (QQi(1) / a1) ** (-p)
    return scalars.as_scalar(a1, EXACT) ** p if p >= 0 else \
        (QQi(1) / scalars.as_scalar(a1, EXACT)) ** (-p)


@dataclass
class FamilyOfTransforms:
    """rho(zeta, z) = sum rho_{jk} zeta^j z^k with rho(0, z) = z."""

    coeffs: dict
    order_zeta: int
    order_z: int
    mode: str = EXACT

    def __post_init__(self):
        for (j, k), c in self.coeffs.items():
            self.coeffs[(j, k)] = scalars.as_scalar(c, self.mode)
        for k in range(self.order_z + 1):
            c = self.coeffs.get((0, k), scalars.zero(self.mode))
            expect = scalars.one(self.mode) if k == 1 else scalars.zero(self.mode)
            if not scalars.is_zero(c - expect):
                raise ValueError("family must restrict to the identity at zeta=0")

    def at(self, zeta):
        zeta = scalars.as_scalar(zeta, self.mode)
        coeffs = {}
        for (j, k), c in self.coeffs.items():
            zj = zeta ** j if j >= 0 else None
            coeffs[k] = coeffs.get(k, scalars.zero(self.mode)) + c * zj
        return Laurent(coeffs, self.order_z, self.mode)

    def first_order(self):
        """The z-coefficients of d/dzeta rho at zeta = 0."""
        return {k: c for (j, k), c in self.coeffs.items() if j == 1}


def family_derivative(family, v, module):
    """d/dzeta U(rho_zeta) v at zeta = 0:
    sum_{k>=1} (1/k!) (d_zeta rho^{(k)}(0)) L(k-1) v, where the k-th
    coefficient is k! rho_{1,k}, so the sum is sum rho_{1,k} L(k-1) v."""
    out = None
    for k, c in sorted(family.first_order().items()):
        if k < 1 or scalars.is_zero(c):
            continue
        Lmap = module.L(k - 1)
        if v.mode == FLOAT:
            Lmap = Lmap.to_float()
        t = Lmap.apply(v).scale(c)
        out = t if out is None else out + t
    return out if out is not None else Vector(v.space, {}, v.mode)


def family_derivative_inverse(family, v, module):
    """d/dzeta U(rho_zeta^{-1}) v at zeta = 0, the negated derivative."""
    return -family_derivative(family, v, module)


def schwarzian(f):
    """f'''/f' - (3/2)(f''/f')^2 as a truncated Laurent series.

    f is a series in the local variable at the expansion point; its
    derivative must be invertible there."""
    d1 = f.derivative()
    if d1.is_zero() or d1.valuation() > 0:
        raise ValueError("vanishing derivative at the expansion point")
    d2 = d1.derivative()
    d3 = d2.derivative()
    inv = d1.invert()
    ratio2 = d2 * inv
    return d3 * inv - (ratio2 * ratio2).scale(Fraction(3, 2))


def lie_local(h, tau_terms, u, module, with_form=False):
    """Local Lie derivative of a vector-valued (co)section:

        h du/deta + sum_j g_j (dtau_j u)
        - sum_{k>=1} (1/k!) (d^k h) L(k-1) u   [+ (dh) u when with_form]

    h is a Laurent series with finite principal part, u a VLaurent over
    the module, tau_terms a list of (g_j, dtau_j u) with precomputed
    tau-derivatives at the fixed sample."""
    out = u.derivative().scale_series(h)
    for g, du in tau_terms:
        out = out + du.scale_series(Laurent({0: g}, None, u.mode))
    dh = h.derivative()
    hk = dh
    for k in range(1, _weight_span(module) + 2):
        if not hk.is_zero():
            Lmap = module.L(k - 1)
            if u.mode == FLOAT:
                Lmap = Lmap.to_float()
            lowered = u.apply_map(Lmap)
            if not lowered.is_zero():
                out = out - lowered.scale_series(
                    hk.scale(Fraction(1, factorial(k))))
        hk = hk.derivative()
    if with_form:
        out = out + u.scale_series(dh)
    return out


def _weight_span(module):
    space = module.space
    res = [w[0].re for w in space.pieces]
    if not res:
        return 0
    return int(max(res) - min(res)) + 1
