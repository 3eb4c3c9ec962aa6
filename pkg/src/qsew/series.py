"""Truncated formal series in q_1..q_R with log powers.

An element is a finite sum of terms

    c * q_1^{e_1} (log q_1)^{l_1} * ... * q_R^{e_R} (log q_R)^{l_R}

with exponents e_j exact complex rationals and log powers l_j natural
numbers.  A real cutoff keeps a term only when Re(e_j) <= cutoff for
every variable, which matches truncating a graded module at bounded
weight.  Evaluation lives on the universal cover of the punctured
polydisk, so a point supplies (modulus, argument) per variable and the
argument is unbounded.
"""

from __future__ import annotations

import cmath
from fractions import Fraction
from math import comb

from . import scalars
from .scalars import EXACT, FLOAT, ModeError, QQi


class NotDiagonal(ValueError):
    """A two-variable series does not factor through q = q1*q2."""


def _as_exponent(e):
    if isinstance(e, QQi):
        return e
    if isinstance(e, (int, Fraction)):
        return QQi(e)
    raise TypeError(f"exponent must be rational or QQi, got {type(e).__name__}")


def term_sort_key(key):
    """Deterministic lexicographic order by (Re e, Im e, l) per variable."""
    exps, logs = key
    return tuple(
        part
        for e, l in zip(exps, logs)
        for part in (e.re, e.im, l)
    )


class MultiLogSeries:
    """Finitely many terms of an element of C{q_1..q_R}[log q_1..log q_R]."""

    __slots__ = ("num_vars", "terms", "cutoff", "max_log_power", "mode")

    def __init__(self, num_vars, terms=None, cutoff=None, max_log_power=None,
                 mode=EXACT):
        scalars.check_mode(mode)
        if num_vars < 1:
            raise ValueError("need at least one variable")
        self.num_vars = num_vars
        self.cutoff = None if cutoff is None else Fraction(cutoff)
        self.mode = mode
        clean = {}
        max_seen = 0
        for key, coeff in (terms or {}).items():
            exps, logs = key
            if len(exps) != num_vars or len(logs) != num_vars:
                raise ValueError("term arity does not match num_vars")
            exps = tuple(_as_exponent(e) for e in exps)
            logs = tuple(int(l) for l in logs)
            if any(l < 0 for l in logs):
                raise ValueError("log powers must be natural numbers")
            coeff = scalars.as_scalar(coeff, mode)
            if scalars.is_zero(coeff):
                continue
            if self.cutoff is not None and any(e.re > self.cutoff for e in exps):
                continue
            max_seen = max(max_seen, *logs) if logs else max_seen
            if (exps, logs) in clean:
                coeff = clean[(exps, logs)] + coeff
                if scalars.is_zero(coeff):
                    del clean[(exps, logs)]
                    continue
            clean[(exps, logs)] = coeff
        self.terms = clean
        self.max_log_power = max_seen if max_log_power is None else int(max_log_power)
        if max_seen > self.max_log_power:
            raise ValueError("stored log power exceeds declared bound")

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, num_vars=1, cutoff=None, mode=EXACT):
        return cls(num_vars, {}, cutoff=cutoff, mode=mode)

    @classmethod
    def constant(cls, value, num_vars=1, cutoff=None, mode=EXACT):
        z = QQi(0)
        key = ((z,) * num_vars, (0,) * num_vars)
        return cls(num_vars, {key: value}, cutoff=cutoff, mode=mode)

    @classmethod
    def monomial(cls, exps, logs=None, coeff=1, cutoff=None, mode=EXACT):
        exps = tuple(_as_exponent(e) for e in exps)
        logs = tuple(logs) if logs is not None else (0,) * len(exps)
        return cls(len(exps), {(exps, logs): coeff}, cutoff=cutoff, mode=mode)

    # -- structure ------------------------------------------------------

    def _check_compatible(self, other):
        if not isinstance(other, MultiLogSeries):
            raise TypeError("expected a MultiLogSeries")
        if self.num_vars != other.num_vars:
            raise ValueError("variable count mismatch")
        scalars.join_modes(self.mode, other.mode)

    @staticmethod
    def _min_cutoff(a, b):
        if a is None:
            return b
        if b is None:
            return a
        return min(a, b)

    def is_zero(self):
        return not self.terms

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: term_sort_key(kv[0]))

    def __eq__(self, other):
        if not isinstance(other, MultiLogSeries):
            return NotImplemented
        return (self.num_vars == other.num_vars and self.mode == other.mode
                and self.terms == other.terms)

    def __repr__(self):
        if not self.terms:
            return "<MultiLogSeries 0>"
        bits = []
        for (exps, logs), c in self.sorted_terms()[:6]:
            mono = "*".join(
                f"q{j+1}^({e.re}{'+' if e.im >= 0 else ''}{e.im}i)"
                + (f"*log(q{j+1})^{l}" if l else "")
                for j, (e, l) in enumerate(zip(exps, logs))
            )
            bits.append(f"({c})*{mono}")
        more = "" if len(self.terms) <= 6 else f" ... {len(self.terms)} terms"
        return f"<MultiLogSeries {' + '.join(bits)}{more}>"

    # -- ring operations --------------------------------------------------

    def __add__(self, other):
        self._check_compatible(other)
        cutoff = self._min_cutoff(self.cutoff, other.cutoff)
        terms = dict(self.terms)
        for key, c in other.terms.items():
            if key in terms:
                s = terms[key] + c
                if scalars.is_zero(s):
                    del terms[key]
                else:
                    terms[key] = s
            else:
                terms[key] = c
        return MultiLogSeries(
            self.num_vars, terms, cutoff=cutoff,
            max_log_power=max(self.max_log_power, other.max_log_power),
            mode=self.mode)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = scalars.as_scalar(c, self.mode)
        if scalars.is_zero(c):
            return MultiLogSeries.zero(self.num_vars, self.cutoff, self.mode)
        return MultiLogSeries(
            self.num_vars, {k: v * c for k, v in self.terms.items()},
            cutoff=self.cutoff, max_log_power=self.max_log_power, mode=self.mode)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, QQi, complex, float)):
            return self.scale(other)
        self._check_compatible(other)
        cutoff = self._min_cutoff(self.cutoff, other.cutoff)
        terms = {}
        for (ea, la), ca in self.terms.items():
            for (eb, lb), cb in other.terms.items():
                exps = tuple(x + y for x, y in zip(ea, eb))
                if cutoff is not None and any(e.re > cutoff for e in exps):
                    continue
                logs = tuple(x + y for x, y in zip(la, lb))
                key = (exps, logs)
                c = ca * cb
                if key in terms:
                    c = terms[key] + c
                if scalars.is_zero(c):
                    terms.pop(key, None)
                else:
                    terms[key] = c
        return MultiLogSeries(
            self.num_vars, terms, cutoff=cutoff,
            max_log_power=self.max_log_power + other.max_log_power,
            mode=self.mode)

    __rmul__ = __mul__

    def truncate(self, cutoff):
        cutoff = Fraction(cutoff)
        return MultiLogSeries(
            self.num_vars,
            {k: v for k, v in self.terms.items()
             if all(e.re <= cutoff for e in k[0])},
            cutoff=cutoff, max_log_power=self.max_log_power, mode=self.mode)

    def coefficient(self, exps, logs=None):
        exps = tuple(_as_exponent(e) for e in exps)
        logs = tuple(logs) if logs is not None else (0,) * self.num_vars
        return self.terms.get((exps, logs), scalars.zero(self.mode))

    def to_float(self):
        if self.mode == FLOAT:
            return self
        return MultiLogSeries(
            self.num_vars, {k: complex(v) for k, v in self.terms.items()},
            cutoff=self.cutoff, max_log_power=self.max_log_power, mode=FLOAT)

    # -- the diagonal restriction q1*q2 = q -------------------------------

    def diagonal_restrict(self):
        """Restrict a two-variable series along q1*q2 = q.

        The input must be a polynomial in q = q1*q2 and
        log q = log q1 + log q2 within the cutoff: every term must have
        equal exponents in the two variables, and for each (exponent,
        total log power) the coefficients of (log q1)^j (log q2)^(m-j)
        must follow the binomial pattern of (log q1 + log q2)^m.
        """
        if self.num_vars != 2:
            raise ValueError("diagonal restriction needs exactly two variables")
        groups = {}
        for (exps, logs), c in self.terms.items():
            e1, e2 = exps
            if e1 != e2:
                raise NotDiagonal(
                    f"term q1^{e1} q2^{e2} depends on q1/q2 separately")
            groups.setdefault((e1, logs[0] + logs[1]), {})[logs[0]] = c
        out = {}
        for (e, m), slots in groups.items():
            j0, c0 = next(iter(slots.items()))
            a = c0 / comb(m, j0) if self.mode == FLOAT else c0 / QQi(comb(m, j0))
            for j in range(m + 1):
                expect = a * comb(m, j) if self.mode == FLOAT else a * QQi(comb(m, j))
                got = slots.get(j, scalars.zero(self.mode))
                if not scalars.is_zero(expect - got):
                    raise NotDiagonal(
                        f"log splitting at q^{e} (log q)^{m} is not binomial")
            out[((e,), (m,))] = a
        return MultiLogSeries(
            1, out, cutoff=self.cutoff, max_log_power=self.max_log_power,
            mode=self.mode)

    def embed_diagonal(self):
        """Inverse section of the restriction: q^e (log q)^m into two
        variables via q = q1*q2 and log q = log q1 + log q2."""
        if self.num_vars != 1:
            raise ValueError("embed_diagonal starts from one variable")
        out = {}
        for ((e,), (m,)), c in self.terms.items():
            for j in range(m + 1):
                cc = c * comb(m, j) if self.mode == FLOAT else c * QQi(comb(m, j))
                key = ((e, e), (j, m - j))
                out[key] = out.get(key, scalars.zero(self.mode)) + cc
        return MultiLogSeries(
            2, out, cutoff=self.cutoff, max_log_power=self.max_log_power,
            mode=self.mode)

    # -- evaluation --------------------------------------------------------

    def eval(self, point):
        """Evaluate at one point of the universal cover.

        point: per variable a (modulus, argument) pair with modulus > 0.
        q_j^e is exp(e * (ln modulus + i argument)) and log q_j is
        (ln modulus + i argument).
        """
        if len(point) != self.num_vars:
            raise ValueError("point arity mismatch")
        ls = []
        for modulus, argument in point:
            if modulus <= 0:
                raise ValueError("modulus must be positive")
            ls.append(complex(cmath.log(modulus).real, argument))
        total = 0j
        for (exps, logs), c in self.sorted_terms():
            v = complex(c)
            for e, l, L in zip(exps, logs, ls):
                v *= cmath.exp(complex(e) * L)
                if l:
                    v *= L ** l
            total += v
        return total

    # -- serialization -----------------------------------------------------

    def to_json(self):
        terms = []
        for (exps, logs), c in self.sorted_terms():
            if self.mode == EXACT:
                coeff = [[c.re.numerator, c.re.denominator],
                         [c.im.numerator, c.im.denominator]]
            else:
                coeff = [c.real, c.imag]
            terms.append({
                "exponents": [e.to_json() for e in exps],
                "log_powers": list(logs),
                "coeff": coeff,
            })
        return {
            "num_vars": self.num_vars,
            "mode": self.mode,
            "cutoff": None if self.cutoff is None else
                      [self.cutoff.numerator, self.cutoff.denominator],
            "max_log_power": self.max_log_power,
            "terms": terms,
        }

    @classmethod
    def from_json(cls, data):
        mode = data["mode"]
        terms = {}
        for t in data["terms"]:
            exps = tuple(QQi.from_json(e) for e in t["exponents"])
            logs = tuple(t["log_powers"])
            raw = t["coeff"]
            if mode == EXACT:
                coeff = QQi(Fraction(raw[0][0], raw[0][1]),
                            Fraction(raw[1][0], raw[1][1]))
            else:
                coeff = complex(raw[0], raw[1])
            terms[(exps, logs)] = coeff
        cutoff = data["cutoff"]
        if cutoff is not None:
            cutoff = Fraction(cutoff[0], cutoff[1])
        return cls(data["num_vars"], terms, cutoff=cutoff,
                   max_log_power=data.get("max_log_power"), mode=mode)
