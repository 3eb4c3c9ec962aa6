"""Parallel transport of block functionals under marked-point vector
fields, and the flows those fields generate.

A deformation field assigns to each marked point a Laurent vector field
sum_k h_{i,k}(q) eta_i^k d/d(eta_i).  Acting on module vectors through
A(q) w = sum_{i,k} h_{i,k}(q) L_i(k-1) w, the transported functional's
q-expansion obeys

    n phi_n(w) = - sum_{l<n} phi_l(A_{n-l-1} w),   phi_0 given.

When the field is q-independent this is solved by
phi(w) = phi_0(exp(-q A) w), which cross-validates the recursion.  The
same field integrates to a non-autonomous flow of the coordinate
annulus; the deformed circle must keep winding number one around the
puncture.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import scalars
from .scalars import EXACT, QQi
from .graded import Vector, weight_key
from .voa import TruncationOverflow


class DomainEscape(RuntimeError):
    """A flow trajectory left the monitored annulus."""


# basis-vector images under cached operators recur constantly along the
# recursion chains; the map object is kept in the value to pin its id
_image_cache = {}


def _basis_image(mod, gmap, wts, idx, mode):
    key = (id(gmap), wts, idx, mode)
    hit = _image_cache.get(key)
    if hit is None:
        img = gmap.apply(mod.space.basis_vector(wts, idx, mode))
        hit = (gmap, tuple(img.entries.items()))
        _image_cache[key] = hit
    return hit[1]


@dataclass
class DeformationField:
    """Per marked point: {k: [h_{k,0}, h_{k,1}, ...]} giving the
    coefficient of eta^k as a power series in q."""

    per_point: list

    def __post_init__(self):
        for table in self.per_point:
            for k in table:
                if not isinstance(k, int):
                    raise TypeError("Laurent indices must be integers")

    @property
    def num_points(self):
        return len(self.per_point)

    def q_order(self):
        return max((len(cs) - 1 for table in self.per_point
                    for cs in table.values()), default=0)

    def coefficient(self, i, k, m):
        cs = self.per_point[i].get(k, ())
        return cs[m] if m < len(cs) else 0

    def max_weight_raise(self):
        """The largest weight increase a single application can cause."""
        raise_by = 0
        for table in self.per_point:
            for k, cs in table.items():
                if any(not scalars.is_zero(QQi(c) if not isinstance(c, complex)
                                           else c) for c in cs):
                    raise_by = max(raise_by, 1 - k)
        return raise_by

    @classmethod
    def autonomous(cls, per_point_constants):
        """Field with q-independent coefficients {k: h_k} per point."""
        return cls([{k: [c] for k, c in table.items()}
                    for table in per_point_constants])

    def is_autonomous(self):
        return all(len(cs) <= 1 for table in self.per_point
                   for cs in table.values())


class TensorVector:
    """Sparse vector in a tensor product of module spaces."""

    __slots__ = ("modules", "entries", "mode")

    def __init__(self, modules, entries=None, mode=EXACT):
        self.modules = list(modules)
        self.mode = mode
        self.entries = {}
        for keys, c in (entries or {}).items():
            c = scalars.as_scalar(c, mode)
            if not scalars.is_zero(c):
                self.entries[tuple(keys)] = c

    @classmethod
    def basis(cls, modules, keys, mode=EXACT):
        return cls(modules, {tuple(keys): scalars.one(mode)}, mode)

    def __add__(self, other):
        entries = dict(self.entries)
        for k, c in other.entries.items():
            s = entries.get(k, scalars.zero(self.mode)) + c
            if scalars.is_zero(s):
                entries.pop(k, None)
            else:
                entries[k] = s
        return TensorVector(self.modules, entries, self.mode)

    def scale(self, c):
        c = scalars.as_scalar(c, self.mode)
        return TensorVector(self.modules,
                            {k: v * c for k, v in self.entries.items()},
                            self.mode)

    def is_zero(self):
        return not self.entries

    def apply_slot(self, i, gmap, strict=True):
        """Apply a graded map to slot i; with strict on, raise when a
        contribution would land above the stored weight ceiling."""
        mod = self.modules[i]
        ceiling = mod.weight_ceiling
        shift = gmap.weight_shift
        out = {}
        for keys, c in self.entries.items():
            wts, idx = keys[i]
            if strict and shift is not None:
                target = wts[0].re + shift[0].re
                if target > ceiling:
                    raise TruncationOverflow(
                        f"slot {i}: weight {wts[0].re} + shift {shift[0].re} "
                        f"exceeds the stored ceiling {ceiling}")
            for ikey, ic in _basis_image(mod, gmap, wts, idx, self.mode):
                nk = keys[:i] + (ikey,) + keys[i + 1:]
                s = out.get(nk, scalars.zero(self.mode)) + ic * c
                if scalars.is_zero(s):
                    out.pop(nk, None)
                else:
                    out[nk] = s
        return TensorVector(self.modules, out, self.mode)

    def sorted_entries(self):
        return sorted(self.entries.items(),
                      key=lambda kv: tuple((weight_key(k[0]), k[1])
                                           for k in kv[0]))


def evaluate_block(block, tv):
    """A Block applied to a TensorVector over its modules."""
    total = scalars.zero(tv.mode)
    for keys, c in tv.sorted_entries():
        total = total + block.value(keys) * c
    return total


def apply_A(field, modules, tv, m, strict=True):
    """The coefficient operator A_m applied to a tensor vector:
    sum_i sum_k h_{i,k,m} L_i(k-1)."""
    acc = {}
    zero = scalars.zero(tv.mode)
    for i, table in enumerate(field.per_point):
        mod = modules[i]
        ceiling = mod.weight_ceiling
        for k, cs in table.items():
            if m >= len(cs):
                continue
            h = scalars.as_scalar(cs[m], tv.mode)
            if scalars.is_zero(h):
                continue
            L = mod.L(k - 1)
            if tv.mode != EXACT:
                L = L.to_float()
            shift = L.weight_shift
            for keys, c in tv.entries.items():
                wts, idx = keys[i]
                if strict and shift is not None and \
                        wts[0].re + shift[0].re > ceiling:
                    raise TruncationOverflow(
                        f"slot {i}: weight {wts[0].re} + shift "
                        f"{shift[0].re} exceeds the ceiling {ceiling}")
                ch = c * h
                for ikey, ic in _basis_image(mod, L, wts, idx, tv.mode):
                    nk = keys[:i] + (ikey,) + keys[i + 1:]
                    acc[nk] = acc.get(nk, zero) + ic * ch
    return TensorVector(modules, acc, tv.mode)


@dataclass
class TransportSeries:
    """phi(w) = sum_n phi_n(w) q^n for one input vector, as exact
    coefficients."""

    coefficients: list

    def eval(self, q):
        total = 0j
        for n, c in enumerate(self.coefficients):
            total += complex(c) * complex(q) ** n
        return total


def transport_recursion(block, field, w, order):
    """Solve n phi_n(w) = -sum_l phi_l(A_{n-l-1} w) for n <= order.

    block is the initial functional phi_0 on the tensor slots; w is a
    TensorVector (or tuple of basis keys).  Moved vectors and values are
    memoized by identity, so shared A-chain prefixes are applied once."""
    modules = block.modules
    if not isinstance(w, TensorVector):
        w = TensorVector.basis(modules, w)
    moved_cache = {}
    value_cache = {}

    def moved(vec, m):
        key = (id(vec), m)
        hit = moved_cache.get(key)
        if hit is None:
            hit = (vec, apply_A(field, modules, vec, m))
            moved_cache[key] = hit
        return hit[1]

    def phi_hat(n, vec):
        if vec.is_zero():
            return scalars.zero(vec.mode)
        key = (n, id(vec))
        hit = value_cache.get(key)
        if hit is not None:
            return hit[1]
        if n == 0:
            val = evaluate_block(block, vec)
        else:
            total = scalars.zero(vec.mode)
            for l in range(n):
                mv = moved(vec, n - l - 1)
                if not mv.is_zero():
                    total = total + phi_hat(l, mv)
            val = total * scalars.as_scalar(Fraction(-1, n), vec.mode)
        value_cache[key] = (vec, val)
        return val

    return TransportSeries([phi_hat(n, w) for n in range(order + 1)])


def autonomous_transport(block, field, w, order):
    """phi_n(w) = phi_0((-A)^n w) / n! for a q-independent field."""
    if not field.is_autonomous():
        raise ValueError("field depends on q; use the recursion")
    modules = block.modules
    if not isinstance(w, TensorVector):
        w = TensorVector.basis(modules, w)
    coeffs = []
    cur = w
    for n in range(order + 1):
        if n > 0:
            cur = apply_A(field, modules, cur, 0).scale(
                Fraction(-1, n))
        coeffs.append(evaluate_block(block, cur))
    return TransportSeries(coeffs)


def autonomous_oracle(block, field, w, q, order):
    """phi_0(e^{-qA} w) truncated at the given order, evaluated at q."""
    return autonomous_transport(block, field, w, order).eval(q)


# -- non-autonomous flows ----------------------------------------------------


@dataclass
class FlowSpec:
    """h(z, q) as {k: [q-series coefficients]} with an annulus to
    monitor, a q step size, and an escape margin."""

    coeffs: dict
    inner: float
    outer: float
    step: float = 1e-3
    margin: float = 0.25

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError("need 0 < inner < outer")

    def h(self, z, q):
        total = 0j
        for k, cs in self.coeffs.items():
            hk = 0j
            qa = 1 + 0j
            for c in cs:
                hk += complex(c) * qa
                qa *= q
            total += hk * z ** k
        return total


def flow_integrate(spec, z0, q_target):
    """Integrate d beta / dq = h(beta, q) from 0 to q_target along the
    straight segment, with classical fourth-order steps."""
    z = complex(z0)
    q_target = complex(q_target)
    dist = abs(q_target)
    if dist == 0:
        return z
    steps = max(1, math.ceil(dist / spec.step))
    dq = q_target / steps
    lo = spec.inner * (1 - spec.margin)
    hi = spec.outer * (1 + spec.margin)
    q = 0j
    for _ in range(steps):
        k1 = spec.h(z, q)
        k2 = spec.h(z + 0.5 * dq * k1, q + 0.5 * dq)
        k3 = spec.h(z + 0.5 * dq * k2, q + 0.5 * dq)
        k4 = spec.h(z + dq * k3, q + dq)
        z = z + (dq / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        q = q + dq
        r = abs(z)
        if not lo <= r <= hi:
            raise DomainEscape(
                f"|beta| = {r:.4g} left [{lo:.4g}, {hi:.4g}] at q = {q:.4g}")
    return z


def flow_circle(spec, radius, q_target, samples=256):
    """Image of the radius circle under the flow, as sample points."""
    out = []
    for j in range(samples):
        z0 = radius * cmath.exp(2j * math.pi * j / samples)
        out.append(flow_integrate(spec, z0, q_target))
    return out


def winding_number(curve, point, tol=1e-9):
    """Discrete winding number of a sampled closed curve about a point,
    by summing argument increments."""
    point = complex(point)
    rel = [complex(z) - point for z in curve]
    if min(abs(z) for z in rel) <= tol:
        raise ValueError("point too close to the sampled curve")
    total = 0.0
    for a, b in zip(rel, rel[1:] + rel[:1]):
        total += cmath.phase(b / a)
    turns = total / (2 * math.pi)
    n = round(turns)
    if abs(turns - n) > 0.25:
        raise ValueError(f"winding sum {turns:.3f} is not near an integer; "
                         f"sample the curve more densely")
    return n
