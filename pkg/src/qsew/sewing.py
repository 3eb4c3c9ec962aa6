"""Sewing a block functional over module/contragredient slot pairs.

The contraction inserts, for each sewn pair, the graded resolution of
the identity weighted by q^{L(0)} (with its finite log q expansion from
the nilpotent part of L(0)) and evaluates the block on the remaining
slots.  The result is a truncated series in one formal variable per
grading of each sewn module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import scalars
from .scalars import EXACT, QQi
from .graded import Vector, q_L0_insert
from .laurent import Laurent, VLaurent
from .series import MultiLogSeries
from .blocks import residue_action


class TableCoverageGap(KeyError):
    """The block table lacks a tuple required by the contraction."""


def _jc_list(module):
    if hasattr(module, "jc_list"):
        return module.jc_list()
    return [module.jc()]


@dataclass
class SewingPlan:
    """A block with chosen slot pairs to contract.

    pairs: (module_slot, dual_slot) index pairs into block.modules; the
    module at module_slot contributes one q variable per grading.
    radii are diagnostics metadata only; the formal coefficients do not
    depend on them."""

    block: object
    pairs: list
    cutoff: Fraction
    radii: list = field(default_factory=list)

    def __post_init__(self):
        self.cutoff = Fraction(self.cutoff)
        used = set()
        for m_slot, d_slot in self.pairs:
            mod = self.block.modules[m_slot]
            dual = self.block.modules[d_slot]
            if mod.space.pieces != dual.space.pieces:
                raise ValueError(
                    f"slots {m_slot},{d_slot} do not pair a module with "
                    f"its contragredient (piece mismatch)")
            used.update((m_slot, d_slot))
        if len(used) != 2 * len(self.pairs):
            raise ValueError("sewn slots must be distinct")
        self.output_slots = [i for i in range(len(self.block.modules))
                             if i not in used]

    @property
    def num_vars(self):
        return sum(self.block.modules[m].space.num_gradings
                   for m, _ in self.pairs)

    def insertions(self):
        out = []
        for m_slot, _ in self.pairs:
            mod = self.block.modules[m_slot]
            out.append(q_L0_insert(mod.space, _jc_list(mod),
                                   cutoff=self.cutoff, mode=self.block.mode))
        return out

    def valid_sample(self, moduli):
        """Whether |q_j| < r_j rho_j for every sewn variable, per the
        annulus condition attached to the plan's radii."""
        if not self.radii:
            return True
        return all(m < r * rho for m, (r, rho) in zip(moduli, self.radii))


def sew(plan, w, transform=None):
    """The sewn series on output vectors w (one per unsewn slot).

    transform, when given, is a (slot, Vector) -> Vector map applied to
    the argument at every slot; used for residue-action tests on the
    sewn functional."""
    block = plan.block
    mode = block.mode
    R = plan.num_vars
    if len(w) != len(plan.output_slots):
        raise ValueError("need one vector per output slot")
    base_args = {}
    for slot, vec in zip(plan.output_slots, w):
        if not isinstance(vec, Vector):
            vec = block.modules[slot].space.basis_vector(*vec, mode=mode)
        base_args[slot] = vec
    inserts = plan.insertions()
    acc = {}

    def descend(pair_idx, args, exps, logs, var_offset):
        if pair_idx == len(plan.pairs):
            full = [args[i] for i in range(len(block.modules))]
            if transform is not None:
                val = scalars.zero(mode)
                for s in range(len(full)):
                    changed = transform(s, full[s])
                    if changed is None or changed.is_zero():
                        continue
                    vv = list(full)
                    vv[s] = changed
                    val = val + block.evaluate(vv)
            else:
                val = block.evaluate(full)
            if scalars.is_zero(val):
                return
            key = (tuple(exps), tuple(logs))
            acc[key] = acc.get(key, scalars.zero(mode)) + val
            return
        m_slot, d_slot = plan.pairs[pair_idx]
        mod = block.modules[m_slot]
        dual_mod = block.modules[d_slot]
        ngrad = mod.space.num_gradings
        for term in inserts[pair_idx].terms:
            dual_vec = dual_mod.space.basis_vector(term.weights, term.alpha,
                                                   mode=mode)
            args[m_slot] = term.vector
            args[d_slot] = dual_vec
            descend(pair_idx + 1, args,
                    exps + list(term.weights), logs + list(term.log_powers),
                    var_offset + ngrad)
        args.pop(m_slot, None)
        args.pop(d_slot, None)

    descend(0, dict(base_args), [], [], 0)
    return MultiLogSeries(R, acc, cutoff=plan.cutoff, mode=mode)


def sewn_ward_residual(plan, section, w):
    """The sewn functional applied to a residue-acted argument tuple,
    summed over the slots of the pre-sewn component carrying the
    section's sphere.

    For a genuine block this vanishes identically, order by order in
    the sewing variables."""
    block = plan.block

    def transform(slot, vec):
        sphere, local = block.component_of_slot(slot)
        if sphere is not section.sphere and sphere != section.sphere:
            return None
        return residue_action(section, local, vec, block.modules[slot],
                              block.voa)

    return sew(plan, w, transform=transform)


# -- the node-residue identity (two routes around a sewn handle) ----------


def multisew_check(M, Mprime, voa, u, f_coeffs, gamma1_u=None):
    """Exact difference of the two residue routes of the handle identity

      Res_xi  Y_M(xi^{L(0)} u, xi) q^{L(0)} (contraction) f(xi, q/xi) dxi/xi
    - Res_pi  q^{L(0)} (contraction) Y_M'(pi^{L(0)} U(gamma_1) u, pi)
                                           f(q/pi, pi) dpi/pi

    computed entrywise on (M tensor M')-valued series.  With the
    insertion enumerated over every stored piece, both routes drop
    exactly the same out-of-range entries, so the difference of a true
    module is identically zero.

    f_coeffs: dict (a, b) -> coefficient of xi^a pi^b.
    Returns (max_abs_deviation, lhs_entries, rhs_entries)."""
    from .coordchange import apply_U, gamma_z

    mode = u.mode
    space = M.space
    ceiling = M.weight_ceiling
    jc = M.jc()
    insertion = q_L0_insert(space, [jc], cutoff=ceiling, mode=mode)
    if gamma1_u is None:
        gamma1_u = apply_U(gamma_z(1, _voa_order(voa)), u, voa)

    lhs = {}
    rhs = {}

    def add(store, row_key, col_key, exps, logs, coeff):
        if scalars.is_zero(coeff):
            return
        key = (row_key, col_key)
        ser = store.setdefault(key, {})
        tkey = (exps, logs)
        ser[tkey] = ser.get(tkey, scalars.zero(mode)) + coeff

    by_weight_u = _homogeneous_parts(u, voa)
    by_weight_gu = _homogeneous_parts(gamma1_u, voa)

    for term in insertion.terms:
        lam = term.weights[0]
        for (a, b), fab in f_coeffs.items():
            fab = scalars.as_scalar(fab, mode)
            if scalars.is_zero(fab):
                continue
            # left route: the mode acts on the module side
            for d, ud in by_weight_u.items():
                n = d - 1 + a - b
                img = M.mode(ud, n).apply(term.vector)
                for rk, c in img.entries.items():
                    add(lhs, rk, (term.weights, term.alpha),
                        (lam + QQi(b),), term.log_powers, c * fab)
            # right route: the mode acts on the dual side
            dual_vec = Vector(space, {(term.weights, term.alpha):
                                      scalars.one(mode)}, mode)
            for e, ue in by_weight_gu.items():
                n = e - 1 + b - a
                img = Mprime.mode(ue, n).apply(dual_vec)
                for ck, c in img.entries.items():
                    for vk, vc in term.vector.entries.items():
                        add(rhs, vk, ck,
                            (lam + QQi(a),), term.log_powers, vc * c * fab)

    dev = 0.0
    keys = set(lhs) | set(rhs)
    for key in keys:
        terms = dict(lhs.get(key, {}))
        for tk, c in rhs.get(key, {}).items():
            terms[tk] = terms.get(tk, scalars.zero(mode)) - c
        for c in terms.values():
            dev = max(dev, scalars.magnitude(c))
    return dev, lhs, rhs


def _homogeneous_parts(v, voa):
    parts = {}
    for (wts, i), c in v.entries.items():
        d = int(wts[0].re)
        parts.setdefault(d, Vector(voa.space, {}, v.mode))
        parts[d] = parts[d] + Vector(voa.space, {(wts, i): c}, v.mode)
    return parts


def _voa_order(voa):
    return int(max((k[0].re for k in voa.space.pieces), default=2)) + 2


# -- convergence diagnostics ------------------------------------------------


@dataclass
class ConvergenceRow:
    modulus: float
    argument: float
    levels: list          # (Re exponent as float, partial sum, majorant)
    stabilization: int    # index into levels, or -1 if never stabilized

    def final_partial_sum(self):
        return self.levels[-1][1] if self.levels else 0j

    def final_majorant(self):
        return self.levels[-1][2] if self.levels else 0.0


def convergence_table(s, samples, tol=1e-6, window=3):
    """Ordered partial sums and the absolute-coefficient majorant per
    sample point of a single-variable series.

    Terms are grouped by increasing real part of the exponent; the
    majorant accumulates |coeff| |q|^{Re e} (the log-free bound whose
    boundedness is the convergence criterion).  The stabilization order
    is the first level where `window` consecutive relative steps fall
    below tol."""
    if s.num_vars != 1:
        raise ValueError("convergence diagnostics run on one variable")
    rows = []
    groups = {}
    for (exps, logs), c in s.sorted_terms():
        groups.setdefault(exps[0].re, []).append((exps[0], logs[0], c))
    levels_sorted = sorted(groups)
    for modulus, argument in samples:
        L = complex(math.log(modulus), argument)
        running = 0j
        majorant = 0.0
        levels = []
        small_streak = 0
        stab = -1
        for idx, re_e in enumerate(levels_sorted):
            step = 0j
            for e, l, c in groups[re_e]:
                val = complex(c) * _cexp(complex(e) * L)
                if l:
                    val *= L ** l
                step += val
                majorant += abs(complex(c)) * math.exp(float(re_e) * math.log(modulus))
            prev = running
            running += step
            rel = abs(running - prev) / max(abs(running), 1e-300)
            if rel < tol:
                small_streak += 1
                if small_streak >= window and stab < 0:
                    stab = idx
            else:
                small_streak = 0
                stab = -1
            levels.append((float(re_e), running, majorant))
        rows.append(ConvergenceRow(modulus, argument, levels, stab))
    return rows


def _cexp(z):
    return complex(math.exp(z.real) * math.cos(z.imag),
                   math.exp(z.real) * math.sin(z.imag))


# -- residue scalars ---------------------------------------------------------


def projective_term(chart, central_charge):
    """(c/12) sum_i Res (S_i . a_i d eta): the scalar by which a
    vertical vector field acts through a projective structure.

    chart: list of (schwarzian_values: Laurent, coefficient: Laurent)."""
    total = None
    for sp, a in chart:
        r = (sp * a).residue()
        total = r if total is None else total + r
    if total is None:
        return scalars.zero(EXACT)
    return _scale_c12(total, central_charge)


def _scale_c12(total, c):
    if isinstance(total, QQi):
        cc = c if isinstance(c, QQi) else QQi(c)
        return total * cc / QQi(12)
    return complex(total) * complex(c) / 12.0


@dataclass
class CurvatureScalars:
    """The residue scalar f and the curvature values it induces."""

    f: object

    @property
    def on_coinvariants(self):
        return -self.f

    @property
    def on_blocks(self):
        return self.f


def curvature_scalar(pairs, central_charge):
    """f = -(c/12) sum_i Res (d^3 h_i . k_i d eta); the curvature of the
    lifted pair of vector fields is -f on vectors and coinvariants and
    +f on block functionals.

    pairs: list of (h: Laurent, k: Laurent) local vector-field tails."""
    total = None
    for h, k in pairs:
        d3 = h.derivative().derivative().derivative()
        r = (d3 * k).residue()
        total = r if total is None else total + r
    if total is None:
        return CurvatureScalars(scalars.zero(EXACT))
    return CurvatureScalars(-_scale_c12(total, central_charge))
