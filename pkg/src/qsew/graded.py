"""Finite multi-graded vector spaces, block operators, and q^{L(0)} insertion.

A GradedSpace is a finite collection of weight pieces, each a finite
dimensional coordinate space.  Weights are tuples of exact complex
rationals, one entry per grading.  Operators are stored block-sparsely;
blocks are small dense matrices (lists of rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from . import scalars
from .scalars import EXACT, QQi
from .series import MultiLogSeries


class NotNilpotent(ValueError):
    """The candidate nilpotent part of a grading operator is not nilpotent."""


def weight_key(wts):
    return tuple(part for w in wts for part in (w.re, w.im))


def _as_weights(wts, n):
    wts = tuple(w if isinstance(w, QQi) else QQi(w) for w in wts)
    if len(wts) != n:
        raise ValueError(f"expected {n} weight components, got {len(wts)}")
    return wts


# -- tiny dense matrix helpers (blocks are small at desk scale) -----------

def mat_zero(rows, cols, mode):
    z = scalars.zero(mode)
    return [[z] * cols for _ in range(rows)]


def mat_eye(n, mode):
    one = scalars.one(mode)
    z = scalars.zero(mode)
    return [[one if i == j else z for j in range(n)] for i in range(n)]


def mat_add(a, b):
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_scale(a, c):
    return [[x * c for x in row] for row in a]


def mat_mul(a, b, mode):
    rows, inner, cols = len(a), len(b), len(b[0]) if b else 0
    out = mat_zero(rows, cols, mode)
    for i in range(rows):
        for k in range(inner):
            aik = a[i][k]
            if scalars.is_zero(aik):
                continue
            brow = b[k]
            orow = out[i]
            for j in range(cols):
                orow[j] = orow[j] + aik * brow[j]
    return out


def mat_transpose(a):
    return [list(col) for col in zip(*a)]


def mat_is_zero(a):
    return all(scalars.is_zero(x) for row in a for x in row)


class GradedSpace:
    """Weight decomposition: a map from weight tuples to dimensions."""

    def __init__(self, num_gradings, pieces, labels=None):
        self.num_gradings = num_gradings
        self.pieces = {}
        for wts, dim in pieces.items():
            wts = _as_weights(wts, num_gradings)
            if dim <= 0:
                raise ValueError("piece dimensions must be positive")
            self.pieces[wts] = int(dim)
        self.labels = {}
        for wts, dim in self.pieces.items():
            if labels and wts in labels:
                names = list(labels[wts])
                if len(names) != dim:
                    raise ValueError("label count must match piece dimension")
            else:
                names = [f"b{i}" for i in range(dim)]
            self.labels[wts] = names

    def sorted_weights(self):
        return sorted(self.pieces, key=weight_key)

    def dim(self, wts=None):
        if wts is None:
            return sum(self.pieces.values())
        return self.pieces.get(_as_weights(wts, self.num_gradings), 0)

    def basis(self):
        for wts in self.sorted_weights():
            for i in range(self.pieces[wts]):
                yield (wts, i)

    def basis_vector(self, wts, index, mode=EXACT):
        wts = _as_weights(wts, self.num_gradings)
        if not 0 <= index < self.pieces.get(wts, 0):
            raise IndexError("basis index out of range")
        return Vector(self, {(wts, index): scalars.one(mode)}, mode)

    def weights_at_most(self, cutoff):
        cutoff = Fraction(cutoff)
        return [w for w in self.sorted_weights()
                if all(c.re <= cutoff for c in w)]

    def __eq__(self, other):
        return (isinstance(other, GradedSpace)
                and self.num_gradings == other.num_gradings
                and self.pieces == other.pieces)

    def __repr__(self):
        return (f"<GradedSpace {self.num_gradings} grading(s), "
                f"{len(self.pieces)} pieces, dim {self.dim()}>")

    def to_json(self):
        return {
            "num_gradings": self.num_gradings,
            "pieces": [
                {"weights": [w.to_json() for w in wts], "dim": d,
                 "labels": self.labels[wts]}
                for wts, d in sorted(self.pieces.items(),
                                     key=lambda kv: weight_key(kv[0]))
            ],
        }

    @classmethod
    def from_json(cls, data):
        pieces = {}
        labels = {}
        for p in data["pieces"]:
            wts = tuple(QQi.from_json(w) for w in p["weights"])
            pieces[wts] = p["dim"]
            if "labels" in p:
                labels[wts] = p["labels"]
        return cls(data["num_gradings"], pieces, labels)


class Vector:
    """Sparse vector in a GradedSpace: (piece, index) -> coefficient."""

    __slots__ = ("space", "entries", "mode")

    def __init__(self, space, entries=None, mode=EXACT):
        scalars.check_mode(mode)
        self.space = space
        self.mode = mode
        self.entries = {}
        for (wts, i), c in (entries or {}).items():
            wts = _as_weights(wts, space.num_gradings)
            if not 0 <= i < space.pieces.get(wts, 0):
                raise IndexError(f"no basis slot {i} in piece {wts}")
            c = scalars.as_scalar(c, mode)
            if not scalars.is_zero(c):
                self.entries[(wts, i)] = c

    def __add__(self, other):
        if self.space is not other.space and self.space != other.space:
            raise ValueError("vectors live in different spaces")
        scalars.join_modes(self.mode, other.mode)
        entries = dict(self.entries)
        for k, c in other.entries.items():
            s = entries.get(k, scalars.zero(self.mode)) + c
            if scalars.is_zero(s):
                entries.pop(k, None)
            else:
                entries[k] = s
        return Vector(self.space, entries, self.mode)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = scalars.as_scalar(c, self.mode)
        return Vector(self.space,
                      {k: v * c for k, v in self.entries.items()}, self.mode)

    def is_zero(self):
        return not self.entries

    def __eq__(self, other):
        return (isinstance(other, Vector) and self.space == other.space
                and self.entries == other.entries)

    def coefficient(self, wts, index):
        wts = _as_weights(wts, self.space.num_gradings)
        return self.entries.get((wts, index), scalars.zero(self.mode))

    def dual_pair(self, other):
        """Coordinate pairing: this vector read as a dual-basis functional."""
        total = scalars.zero(self.mode)
        for k, c in self.entries.items():
            total = total + c * other.entries.get(k, scalars.zero(self.mode))
        return total

    def to_float(self):
        if self.mode == scalars.FLOAT:
            return self
        return Vector(self.space,
                      {k: complex(c) for k, c in self.entries.items()},
                      scalars.FLOAT)

    def weights_present(self):
        return sorted({k[0] for k in self.entries}, key=weight_key)

    def __repr__(self):
        bits = ", ".join(f"{wts}[{i}]: {c}" for (wts, i), c in
                         sorted(self.entries.items(),
                                key=lambda kv: (weight_key(kv[0][0]), kv[0][1])))
        return f"<Vector {bits or '0'}>"


def project(v, wts, mode="exact"):
    """Project onto one weight piece, or onto all pieces with
    componentwise Re(weight) at most the given one."""
    wts = _as_weights(wts, v.space.num_gradings)
    if mode == "exact":
        keep = lambda w: w == wts
    elif mode == "at_most":
        keep = lambda w: all(a.re <= b.re for a, b in zip(w, wts))
    else:
        raise ValueError("projection mode must be 'exact' or 'at_most'")
    return Vector(v.space,
                  {k: c for k, c in v.entries.items() if keep(k[0])},
                  v.mode)


class GradedMap:
    """Block-sparse linear map between graded spaces.

    blocks[(src_weights, dst_weights)] is a dense (dim dst) x (dim src)
    matrix.  If weight_shift is set, only blocks with
    dst = src + shift may occur.
    """

    __slots__ = ("source", "target", "blocks", "weight_shift", "mode")

    def __init__(self, source, target, blocks=None, weight_shift=None,
                 mode=EXACT):
        scalars.check_mode(mode)
        self.source = source
        self.target = target
        self.mode = mode
        if weight_shift is not None:
            weight_shift = _as_weights(weight_shift, source.num_gradings)
        self.weight_shift = weight_shift
        self.blocks = {}
        for (src, dst), mat in (blocks or {}).items():
            src = _as_weights(src, source.num_gradings)
            dst = _as_weights(dst, target.num_gradings)
            if src not in source.pieces or dst not in target.pieces:
                raise ValueError(f"block ({src},{dst}) outside the spaces")
            if len(mat) != target.pieces[dst] or any(
                    len(row) != source.pieces[src] for row in mat):
                raise ValueError(f"block ({src},{dst}) has wrong shape")
            if weight_shift is not None and tuple(
                    s + h for s, h in zip(src, weight_shift)) != dst:
                raise ValueError("block violates declared weight shift")
            mat = [[scalars.as_scalar(x, mode) for x in row] for row in mat]
            if not mat_is_zero(mat):
                self.blocks[(src, dst)] = mat

    @classmethod
    def zero(cls, source, target=None, mode=EXACT):
        return cls(source, target or source, {}, mode=mode)

    @classmethod
    def identity(cls, space, mode=EXACT):
        blocks = {(w, w): mat_eye(d, mode) for w, d in space.pieces.items()}
        return cls(space, space, blocks, weight_shift=(QQi(0),) * space.num_gradings,
                   mode=mode)

    def apply(self, v):
        if v.space != self.source:
            raise ValueError("vector not in the source space")
        scalars.join_modes(v.mode, self.mode)
        by_piece = {}
        for (wts, j), c in v.entries.items():
            by_piece.setdefault(wts, []).append((j, c))
        out = {}
        for (src, dst), mat in self.blocks.items():
            cols = by_piece.get(src)
            if not cols:
                continue
            for i, row in enumerate(mat):
                acc = None
                for j, c in cols:
                    x = row[j]
                    if scalars.is_zero(x):
                        continue
                    acc = x * c if acc is None else acc + x * c
                if acc is not None and not scalars.is_zero(acc):
                    key = (dst, i)
                    prev = out.get(key)
                    out[key] = acc if prev is None else prev + acc
        return Vector(self.target, out, self.mode)

    def __call__(self, v):
        return self.apply(v)

    def compose(self, other):
        """self after other (matrix product self . other)."""
        if other.target != self.source:
            raise ValueError("composition shape mismatch")
        scalars.join_modes(self.mode, other.mode)
        blocks = {}
        by_src = {}
        for (src, mid), mat in other.blocks.items():
            by_src.setdefault(mid, []).append((src, mat))
        for (mid, dst), left in self.blocks.items():
            for src, right in by_src.get(mid, ()):
                prod = mat_mul(left, right, self.mode)
                key = (src, dst)
                if key in blocks:
                    prod = mat_add(blocks[key], prod)
                blocks[key] = prod
        blocks = {k: m for k, m in blocks.items() if not mat_is_zero(m)}
        shift = None
        if self.weight_shift is not None and other.weight_shift is not None:
            shift = tuple(a + b for a, b in
                          zip(self.weight_shift, other.weight_shift))
        return GradedMap(other.source, self.target, blocks,
                         weight_shift=shift, mode=self.mode)

    def __matmul__(self, other):
        return self.compose(other)

    def __add__(self, other):
        if self.source != other.source or self.target != other.target:
            raise ValueError("sum shape mismatch")
        scalars.join_modes(self.mode, other.mode)
        blocks = dict(self.blocks)
        for k, m in other.blocks.items():
            blocks[k] = mat_add(blocks[k], m) if k in blocks else m
        shift = self.weight_shift if self.weight_shift == other.weight_shift else None
        blocks = {k: m for k, m in blocks.items() if not mat_is_zero(m)}
        return GradedMap(self.source, self.target, blocks,
                         weight_shift=shift, mode=self.mode)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = scalars.as_scalar(c, self.mode)
        if scalars.is_zero(c):
            return GradedMap(self.source, self.target, {}, self.weight_shift,
                             self.mode)
        return GradedMap(self.source, self.target,
                         {k: mat_scale(m, c) for k, m in self.blocks.items()},
                         self.weight_shift, self.mode)

    def transpose(self):
        blocks = {(dst, src): mat_transpose(m)
                  for (src, dst), m in self.blocks.items()}
        return GradedMap(self.target, self.source, blocks, mode=self.mode)

    def is_zero(self):
        return not self.blocks

    def to_float(self):
        if self.mode == scalars.FLOAT:
            return self
        return GradedMap(
            self.source, self.target,
            {k: [[complex(x) for x in row] for row in m]
             for k, m in self.blocks.items()},
            self.weight_shift, scalars.FLOAT)

    def __eq__(self, other):
        return (isinstance(other, GradedMap)
                and self.source == other.source
                and self.target == other.target
                and self.blocks == other.blocks)

    def block(self, src, dst):
        src = _as_weights(src, self.source.num_gradings)
        dst = _as_weights(dst, self.target.num_gradings)
        if (src, dst) in self.blocks:
            return self.blocks[(src, dst)]
        return mat_zero(self.target.pieces.get(dst, 0),
                        self.source.pieces.get(src, 0), self.mode)

    def to_json(self):
        return {
            "weight_shift": None if self.weight_shift is None else
                            [w.to_json() for w in self.weight_shift],
            "blocks": [
                {"src": [w.to_json() for w in src],
                 "dst": [w.to_json() for w in dst],
                 "matrix": [[_scalar_json(x, self.mode) for x in row]
                            for row in mat]}
                for (src, dst), mat in sorted(
                    self.blocks.items(),
                    key=lambda kv: (weight_key(kv[0][0]), weight_key(kv[0][1])))
            ],
        }


def _scalar_json(x, mode):
    if mode == EXACT:
        return x.to_json()
    return [x.real, x.imag]


def map_from_json(data, source, target, mode=EXACT):
    blocks = {}
    for b in data["blocks"]:
        src = tuple(QQi.from_json(w) for w in b["src"])
        dst = tuple(QQi.from_json(w) for w in b["dst"])
        if mode == EXACT:
            mat = [[QQi.from_json(x) for x in row] for row in b["matrix"]]
        else:
            mat = [[complex(x[0], x[1]) for x in row] for row in b["matrix"]]
        blocks[(src, dst)] = mat
    shift = data.get("weight_shift")
    if shift is not None:
        shift = tuple(QQi.from_json(w) for w in shift)
    return GradedMap(source, target, blocks, weight_shift=shift, mode=mode)


@dataclass
class JordanChevalley:
    """Split of a grading operator into commuting semisimple and
    nilpotent parts, with the exact nilpotency index."""

    semisimple: GradedMap
    nilpotent: GradedMap
    nilpotency_index: int

    def reassemble(self):
        return self.semisimple + self.nilpotent


def jc_split(L0, axis=0):
    """Jordan-Chevalley split of a grading operator.

    The semisimple part acts on the piece of weights (w_1..w_N) as the
    scalar w_axis.  The remainder must be nilpotent within dim
    iterations; otherwise the grading labels are not the generalized
    eigenvalues and NotNilpotent is raised.
    """
    space = L0.source
    if space != L0.target:
        raise ValueError("grading operator must be an endomorphism")
    if not 0 <= axis < space.num_gradings:
        raise ValueError("axis out of range")
    zero_shift = (QQi(0),) * space.num_gradings
    if L0.weight_shift not in (None, zero_shift) or any(
            src != dst for (src, dst) in L0.blocks):
        raise ValueError("grading operator must preserve each piece")
    semis = {}
    for wts, d in space.pieces.items():
        lam = wts[axis]
        if lam:
            semis[(wts, wts)] = mat_scale(mat_eye(d, L0.mode),
                                          scalars.as_scalar(lam, L0.mode))
    semisimple = GradedMap(space, space, semis, weight_shift=zero_shift,
                           mode=L0.mode)
    nilpotent = L0 - semisimple
    index = 1
    for wts, d in space.pieces.items():
        block = nilpotent.block(wts, wts)
        if mat_is_zero(block):
            continue
        power = block
        k = 1
        while not mat_is_zero(power):
            k += 1
            if k > d:
                raise NotNilpotent(
                    f"piece {wts}: remainder after subtracting the grading "
                    f"is not nilpotent")
            power = mat_mul(power, block, L0.mode)
        index = max(index, k)
    nilpotent = GradedMap(space, space, nilpotent.blocks,
                          weight_shift=zero_shift, mode=L0.mode)
    return JordanChevalley(semisimple, nilpotent, index)


@dataclass
class InsertionTerm:
    """One q^{weights} (log q)^{log_powers} piece of an insertion."""

    weights: tuple
    alpha: int
    log_powers: tuple
    vector: Vector  # A q^{L(0)_n}-expanded image of the basis vector


@dataclass
class QL0Insertion:
    """The element A q_.^{L_.(0)}  (basis m tensor dual basis) of
    (M tensor M') with series coefficients.

    entries group the terms as: for each weight piece and each dual
    index alpha, all log-power contributions paired with the dual basis
    vector of that (piece, alpha)."""

    space: GradedSpace
    cutoff: Fraction
    mode: str
    log_bound: int
    terms: list = field(default_factory=list)

    def pair(self, mprime, m):
        """Contract against m' (functional coordinates on M) and m,
        returning a MultiLogSeries in the space's grading count."""
        R = self.space.num_gradings
        out = MultiLogSeries.zero(R, cutoff=self.cutoff, mode=self.mode)
        acc = {}
        for t in self.terms:
            left = mprime.dual_pair(t.vector)
            right = m.coefficient(t.weights, t.alpha)
            c = left * right
            if scalars.is_zero(c):
                continue
            key = (t.weights, t.log_powers)
            acc[key] = acc.get(key, scalars.zero(self.mode)) + c
        return out + MultiLogSeries(R, acc, cutoff=self.cutoff, mode=self.mode)


def q_L0_insert(space, jc_splits, A=None, cutoff=None, mode=EXACT):
    """Expand A q_.^{L_.(0)} (m_alpha tensor dual m_alpha) over all pieces
    with Re(weight) at most the cutoff, one formal variable per grading.

    The log q_j expansion of q_j^{L_j(0)_n} terminates at the nilpotency
    index, so each piece contributes finitely many terms."""
    if len(jc_splits) != space.num_gradings:
        raise ValueError("need one Jordan-Chevalley split per grading")
    if cutoff is None:
        raise ValueError("an insertion cutoff is required")
    cutoff = Fraction(cutoff)
    nil = [jc.nilpotent for jc in jc_splits]
    indices = [jc.nilpotency_index for jc in jc_splits]
    ins = QL0Insertion(space, cutoff, mode,
                       log_bound=max(i - 1 for i in indices) if indices else 0)
    for wts in space.weights_at_most(cutoff):
        dim = space.pieces[wts]
        for alpha in range(dim):
            base = space.basis_vector(wts, alpha, mode)
            layers = [((0,) * space.num_gradings, base)]
            for j in range(space.num_gradings):
                new_layers = []
                for logs, vec in layers:
                    current = vec
                    for k in range(indices[j]):
                        if current.is_zero():
                            break
                        term_vec = current if k == 0 else current.scale(
                            Fraction(1, factorial(k)))
                        new_logs = list(logs)
                        new_logs[j] = k
                        new_layers.append((tuple(new_logs), term_vec))
                        current = nil[j].apply(current)
                layers = new_layers
            for logs, vec in layers:
                if A is not None:
                    vec = A.apply(vec)
                if vec.is_zero():
                    continue
                ins.terms.append(InsertionTerm(wts, alpha, logs, vec))
    return ins
