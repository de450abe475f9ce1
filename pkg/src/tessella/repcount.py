"""Finite-field representation counting for quivers with potential.

A point of the representation space over F_q assigns a d x d matrix to every
arrow (invertible for localized arrows); every vertex carries the same
dimension d.  A word acts by the matrix product of its letters in written
order, so the rightmost letter is applied first, matching path composition.

On that space the potential induces the trace function f = Tr W.  This
module evaluates f, checks the critical-point equations (every cyclic
derivative vanishing, cross-validated against the entrywise gradient of the
trace polynomial), and tallies exhaustive or sampled counts: fibre sizes of
f, critical points, and strata cut out by nilpotency/invertibility of a
chosen algebra element.

All counts are raw integer point counts over the prime field.  The usual
normalizations (the half power of the ambient dimension, and the order of
the gauge group GL_d per vertex) are reported symbolically alongside the
tallies and never folded into them.

Exhaustive enumeration walks the space in lexicographic order (arrows
sorted by id, last arrow fastest) in fixed-size chunks; chunk results merge
by addition, so the outcome is independent of chunking and of the worker
count (``TESSELLA_THREADS``).
"""

from __future__ import annotations

import math
import os
import random
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product as _iproduct
from typing import Iterator, Mapping

import numpy as np

from .pathalg import (
    Element,
    InverseOfNonLocalized,
    Potential,
    Quiver,
    Word,
    _idkey,
    cyclic_derivative,
    ideal_reduce,
    jacobi_relations,
    multiply,
)

_CHUNK = 1 << 16
_STATE_GUARD = 10 ** 8
_POOL_GUARD = 4 * 10 ** 6


class ShapeMismatch(ValueError):
    """Representation data does not fit the quiver/dimension it claims."""


class StateSpaceTooLarge(RuntimeError):
    """An exhaustive walk was requested over more points than the guard allows."""


# -- prime-field scalars ------------------------------------------------------


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _require_prime(q: int) -> None:
    if not isinstance(q, int) or not _is_prime(q):
        raise ValueError(f"q must be a prime (entries live in F_q), got {q!r}")


def _coeff_mod(c: Fraction, q: int) -> int:
    """A rational coefficient as an element of F_q (denominator inverted)."""
    c = Fraction(c)
    den = c.denominator % q
    if den == 0:
        raise ZeroDivisionError(f"coefficient {c} is not defined in F_{q}")
    return c.numerator * pow(den, -1, q) % q


# -- small exact matrices (tuple-of-tuples, entries reduced mod q) ------------


def _as_matrix(m, d: int, q: int) -> tuple:
    try:
        rows = tuple(tuple(int(x) % q for x in row) for row in m)
    except TypeError:
        raise ShapeMismatch(f"not a matrix: {m!r}") from None
    if len(rows) != d or any(len(r) != d for r in rows):
        raise ShapeMismatch(f"expected a {d}x{d} matrix, got {m!r}")
    return rows


def _eye(d: int) -> tuple:
    return tuple(tuple(int(i == j) for j in range(d)) for i in range(d))


def _zero_mat(d: int) -> tuple:
    return tuple((0,) * d for _ in range(d))


def _mat_mul(a, b, q: int) -> tuple:
    d = len(a)
    return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(d)) % q
                       for j in range(d)) for i in range(d))


def _mat_add(a, b, q: int) -> tuple:
    return tuple(tuple((x + y) % q for x, y in zip(ra, rb))
                 for ra, rb in zip(a, b))


def _mat_scale(c: int, a, q: int) -> tuple:
    return tuple(tuple(c * x % q for x in row) for row in a)


def _mat_trace(a, q: int) -> int:
    return sum(a[i][i] for i in range(len(a))) % q


def _transpose(a) -> tuple:
    return tuple(zip(*a))


def _is_zero_mat(a) -> bool:
    return all(x == 0 for row in a for x in row)


def _mat_det(a, q: int) -> int:
    """Determinant mod q by fraction-free Gaussian elimination."""
    d = len(a)
    m = [list(row) for row in a]
    det = 1
    for col in range(d):
        piv = next((r for r in range(col, d) if m[r][col] % q), None)
        if piv is None:
            return 0
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det = det * m[col][col] % q
        inv = pow(m[col][col], -1, q)
        for r in range(col + 1, d):
            f = m[r][col] * inv % q
            if f:
                m[r] = [(x - f * y) % q for x, y in zip(m[r], m[col])]
    return det % q


def _mat_inv(a, q: int) -> tuple:
    """Inverse mod q by Gauss-Jordan; raises ZeroDivisionError if singular."""
    d = len(a)
    m = [list(row) + [int(i == j) for j in range(d)]
         for i, row in enumerate(a)]
    for col in range(d):
        piv = next((r for r in range(col, d) if m[r][col] % q), None)
        if piv is None:
            raise ZeroDivisionError("matrix is singular mod %d" % q)
        m[col], m[piv] = m[piv], m[col]
        inv = pow(m[col][col], -1, q)
        m[col] = [x * inv % q for x in m[col]]
        for r in range(d):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [(x - f * y) % q for x, y in zip(m[r], m[col])]
    return tuple(tuple(row[d:]) for row in m)


def gl_order(d: int, q: int) -> int:
    """Order of GL_d(F_q)."""
    return math.prod(q ** d - q ** i for i in range(d))


# -- single representations ---------------------------------------------------


class MatrixRep:
    """One representation: a d x d matrix over F_q for every arrow.

    The dimension vector is constant (every vertex carries F_q^d), so words
    with any endpoints evaluate to plain d x d matrices.  Localized arrows
    must act invertibly; their inverses are computed on demand.
    """

    def __init__(self, quiver: Quiver, d: int, q: int,
                 matrices: Mapping) -> None:
        _require_prime(q)
        if not isinstance(d, int) or d < 1:
            raise ValueError(f"dimension must be a positive integer, got {d!r}")
        arrows = set(quiver.arrow_ids())
        extra = set(matrices) - arrows
        missing = arrows - set(matrices)
        if extra or missing:
            raise ShapeMismatch(
                f"matrices must cover the arrows exactly "
                f"(missing {sorted(missing, key=_idkey)}, "
                f"extra {sorted(extra, key=_idkey)})")
        self.quiver = quiver
        self.d = d
        self.q = q
        self.matrices = {a: _as_matrix(m, d, q) for a, m in matrices.items()}
        self._inverses: dict = {}
        for a in sorted(quiver.localized, key=_idkey):
            if _mat_det(self.matrices[a], q) == 0:
                raise ShapeMismatch(
                    f"localized arrow {a!r} must act invertibly")

    @staticmethod
    def scalar(quiver: Quiver, q: int, values: Mapping) -> "MatrixRep":
        """Convenience constructor for d = 1 from plain scalars."""
        return MatrixRep(quiver, 1, q,
                         {a: ((v,),) for a, v in values.items()})

    def matrix(self, a) -> tuple:
        try:
            return self.matrices[a]
        except KeyError:
            raise ShapeMismatch(f"no matrix for arrow {a!r}") from None

    def _inverse(self, a) -> tuple:
        if a not in self._inverses:
            if not self.quiver.is_localized(a):
                raise InverseOfNonLocalized(a)
            self._inverses[a] = _mat_inv(self.matrices[a], self.q)
        return self._inverses[a]

    def _word_matrix(self, letters) -> tuple:
        out = _eye(self.d)
        for a, e in letters:
            if a not in self.matrices:
                raise ShapeMismatch(f"no matrix for arrow {a!r}")
            m = self.matrices[a] if e == 1 else self._inverse(a)
            out = _mat_mul(out, m, self.q)
        return out

    def evaluate(self, x) -> tuple:
        """Matrix of a Word, or the coefficient-weighted sum for an Element."""
        if isinstance(x, Word):
            return self._word_matrix(x.letters)
        if isinstance(x, Element):
            out = _zero_mat(self.d)
            for w in x.words():
                c = _coeff_mod(x.coeffs[w], self.q)
                out = _mat_add(out, _mat_scale(c, self._word_matrix(w.letters),
                                               self.q), self.q)
            return out
        raise TypeError(f"cannot evaluate {type(x).__name__}")

    def __repr__(self) -> str:
        return f"MatrixRep(d={self.d}, q={self.q}, {len(self.matrices)} arrows)"


def trace_potential(rep: MatrixRep, W: Potential) -> int:
    """Value of Tr W at the representation, as an element of F_q."""
    missing = W.arrows_used() - set(rep.matrices)
    if missing:
        raise ShapeMismatch(
            f"potential uses arrows without matrices: "
            f"{sorted(missing, key=_idkey)}")
    total = 0
    for c, cyc in W.terms():
        total += _coeff_mod(c, rep.q) * _mat_trace(rep._word_matrix(cyc),
                                                   rep.q)
    return total % rep.q


def trace_gradient(rep: MatrixRep, W: Potential) -> dict:
    """Entrywise gradient of the trace polynomial, one matrix per arrow.

    Entry (i, j) of the matrix for arrow ``a`` is the partial derivative of
    Tr W by the (i, j) entry of the matrix assigned to ``a``, computed
    directly from occurrences via d/dX_ij Tr(X M) = M_ji.  This is the
    independent cross-check route for :func:`crit_check`.
    """
    missing = W.arrows_used() - set(rep.matrices)
    if missing:
        raise ShapeMismatch(
            f"potential uses arrows without matrices: "
            f"{sorted(missing, key=_idkey)}")
    q = rep.q
    out = {a: _zero_mat(rep.d) for a in rep.matrices}
    for c, cyc in W.terms():
        cm = _coeff_mod(c, q)
        for i, (a, e) in enumerate(cyc):
            if e != 1:
                raise InverseOfNonLocalized(
                    f"cannot differentiate through an inverse of {a!r}")
            rest = cyc[i + 1:] + cyc[:i]
            m = rep._word_matrix(rest)
            out[a] = _mat_add(out[a], _mat_scale(cm, _transpose(m), q), q)
    return out


def crit_check(rep: MatrixRep, quiver: Quiver, W: Potential) -> bool:
    """True iff every partial derivative of Tr W vanishes at ``rep``.

    The cyclic derivative by every arrow (localized ones included: on their
    open locus the coordinates are the same matrix entries) is evaluated at
    the representation; as a cross-check the entrywise gradient of the trace
    polynomial is recomputed independently and compared via
    grad(a) = (dW/da)(rep)^T.  A mismatch would indicate an evaluation bug,
    not a property of the input, hence RuntimeError.
    """
    grads = trace_gradient(rep, W)
    flat = True
    for a in quiver.arrow_ids():
        d_val = rep.evaluate(cyclic_derivative(quiver, W, a))
        if _transpose(d_val) != grads[a]:
            raise RuntimeError(
                f"gradient cross-check failed at arrow {a!r}")
        if not _is_zero_mat(d_val):
            flat = False
    return flat


# -- the representation space -------------------------------------------------


@lru_cache(maxsize=None)
def _pool(d: int, q: int, invertible: bool) -> tuple:
    """All d x d matrices over F_q in lexicographic entry order.

    With ``invertible`` the singular ones are filtered out (order kept).
    """
    if q ** (d * d) > _POOL_GUARD:
        raise StateSpaceTooLarge(
            f"a single arrow already has {q ** (d * d)} matrices; "
            f"the per-arrow pool guard is {_POOL_GUARD}")
    mats = []
    for entries in _iproduct(range(q), repeat=d * d):
        rows = tuple(entries[i * d:(i + 1) * d] for i in range(d))
        if invertible and _mat_det(rows, q) == 0:
            continue
        mats.append(rows)
    return tuple(mats)


class _RepSpace:
    """Lexicographic indexing of every representation at fixed (d, q).

    Arrows are ordered by id and the last arrow varies fastest, so index k
    unpacks as mixed-radix digits over the per-arrow pool sizes.  Chunked
    and per-point traversals therefore agree on the order.
    """

    def __init__(self, quiver: Quiver, d: int, q: int) -> None:
        _require_prime(q)
        if not isinstance(d, int) or d < 1:
            raise ValueError(f"dimension must be a positive integer, got {d!r}")
        self.quiver = quiver
        self.d = d
        self.q = q
        self.arrows = quiver.arrow_ids()
        self.pools = {a: _pool(d, q, quiver.is_localized(a))
                      for a in self.arrows}
        self.sizes = {a: len(self.pools[a]) for a in self.arrows}
        self.total = math.prod(self.sizes.values())
        strides: dict = {}
        acc = 1
        for a in reversed(self.arrows):
            strides[a] = acc
            acc *= self.sizes[a]
        self.strides = strides
        self._np = {a: np.array(self.pools[a], dtype=np.int64)
                    for a in self.arrows}
        self._np_inv: dict = {}

    def _inv_pool(self, a) -> np.ndarray:
        if a not in self._np_inv:
            if not self.quiver.is_localized(a):
                raise InverseOfNonLocalized(a)
            self._np_inv[a] = np.array(
                [_mat_inv(m, self.q) for m in self.pools[a]], dtype=np.int64)
        return self._np_inv[a]

    def chunk_indices(self, lo: int, hi: int) -> dict:
        offs = np.arange(lo, hi, dtype=np.int64)
        return {a: (offs // self.strides[a]) % self.sizes[a]
                for a in self.arrows}

    def sample_indices(self, rng: random.Random, n: int) -> dict:
        return {a: np.array([rng.randrange(self.sizes[a]) for _ in range(n)],
                            dtype=np.int64)
                for a in self.arrows}

    def _letter_mats(self, idx: dict, letter) -> np.ndarray:
        a, e = letter
        if a not in self.pools:
            raise ShapeMismatch(f"no matrices for arrow {a!r}")
        pool = self._np[a] if e == 1 else self._inv_pool(a)
        return pool[idx[a]]

    def word_values(self, idx: dict, letters, n: int) -> np.ndarray:
        """(n, d, d) matrices of one word across a batch of points."""
        if not letters:
            eye = np.eye(self.d, dtype=np.int64)
            return np.broadcast_to(eye, (n, self.d, self.d)).copy()
        out = self._letter_mats(idx, letters[0]).copy()
        for letter in letters[1:]:
            out = np.matmul(out, self._letter_mats(idx, letter)) % self.q
        return out

    def element_values(self, idx: dict, x: Element, n: int) -> np.ndarray:
        out = np.zeros((n, self.d, self.d), dtype=np.int64)
        for w in x.words():
            c = _coeff_mod(x.coeffs[w], self.q)
            out = (out + c * self.word_values(idx, w.letters, n)) % self.q
        return out

    def rep_at(self, k: int) -> MatrixRep:
        if not 0 <= k < self.total:
            raise IndexError(k)
        mats = {a: self.pools[a][(k // self.strides[a]) % self.sizes[a]]
                for a in self.arrows}
        return MatrixRep(self.quiver, self.d, self.q, mats)


def state_space_size(quiver: Quiver, d: int, q: int) -> int:
    """Number of representations at dimension d over F_q."""
    _require_prime(q)
    free = q ** (d * d)
    inv = gl_order(d, q)
    return math.prod(inv if quiver.is_localized(a) else free
                     for a in quiver.arrow_ids())


def nth_rep(quiver: Quiver, d: int, q: int, k: int) -> MatrixRep:
    """The k-th representation in the enumeration order (0-based)."""
    return _RepSpace(quiver, d, q).rep_at(k)


def iter_reps(quiver: Quiver, d: int, q: int,
              limit: int = 10 ** 7) -> Iterator[MatrixRep]:
    """Yield every representation in enumeration order (small spaces only)."""
    space = _RepSpace(quiver, d, q)
    if space.total > limit:
        raise StateSpaceTooLarge(
            f"{space.total} representations exceed the iteration limit "
            f"{limit}; raise limit= to insist")
    for k in range(space.total):
        yield space.rep_at(k)


def _workers() -> int:
    try:
        n = int(os.environ.get("TESSELLA_THREADS", "1"))
    except ValueError:
        return 1
    return max(1, n)


def _map_chunks(fn, items: list) -> list:
    w = _workers()
    if w <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))


def _normalization(quiver: Quiver, d: int, q: int) -> dict:
    ambient = len(quiver.arrows) * d * d
    return {"L_exponent": Fraction(-ambient, 2),
            "GL_exponent": -len(quiver.vertices),
            "GL_order": gl_order(d, q)}


# -- count reports ------------------------------------------------------------


@dataclass(frozen=True)
class CountReport:
    """Tallies of the trace function over a representation space.

    ``total`` counts the points actually visited: the whole space in
    exhaustive mode, the number of draws in sample mode.  ``state_space`` is
    always the size of the full space.  ``histogram`` maps every residue of
    F_q to its fibre count; ``zeros`` and ``ones`` repeat the 0- and 1-fibre
    for convenience.  ``critical`` counts visited points where every partial
    derivative of Tr W vanishes.  ``normalization`` carries the symbolic
    prefactors (L exponent, GL exponent and order); they are never folded
    into the integer counts.
    """

    q: int
    d: int
    mode: str
    total: int
    state_space: int
    zeros: int
    ones: int
    critical: int
    histogram: dict
    normalization: dict
    seed: int | None = None

    def __post_init__(self) -> None:
        if sum(self.histogram.values()) != self.total:
            raise ValueError("histogram does not sum to total")
        if (self.histogram.get(0, 0) != self.zeros
                or self.histogram.get(1, 0) != self.ones):
            raise ValueError("zeros/ones disagree with the histogram")
        if not 0 <= self.critical <= self.total:
            raise ValueError("critical count out of range")

    def to_json(self) -> dict:
        out = {"q": self.q, "d": self.d, "mode": self.mode,
               "total": self.total, "state_space": self.state_space,
               "zeros": self.zeros, "ones": self.ones,
               "critical": self.critical,
               "histogram": {str(v): c for v, c in sorted(self.histogram.items())},
               "normalization": {
                   "L_exponent": str(self.normalization["L_exponent"]),
                   "GL_exponent": self.normalization["GL_exponent"],
                   "GL_order": self.normalization["GL_order"]}}
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _tally(space: _RepSpace, terms: list, derivs: list, idx: dict,
           n: int) -> tuple:
    """Histogram of trace values and critical count for one batch."""
    q = space.q
    vals = np.zeros(n, dtype=np.int64)
    for cm, cyc in terms:
        prods = space.word_values(idx, cyc, n)
        vals += cm * np.trace(prods, axis1=1, axis2=2)
    vals %= q
    hist = np.bincount(vals, minlength=q)
    crit = np.ones(n, dtype=bool)
    for el in derivs:
        if el.is_zero():
            continue
        crit &= (space.element_values(idx, el, n) == 0).all(axis=(1, 2))
    return hist, int(crit.sum())


def enumerate_reps(quiver: Quiver, W: Potential, d: int, q: int,
                   mode: str = "exhaustive", sample_size: int | None = None,
                   seed: int | None = None) -> CountReport:
    """Count trace-function fibres and critical points over F_q.

    Exhaustive mode walks the whole space (guarded at 10^8 points); sample
    mode draws ``sample_size`` uniform points with the given seed and is
    deterministic for a fixed seed.
    """
    missing = W.arrows_used() - set(quiver.arrow_ids())
    if missing:
        raise ShapeMismatch(
            f"potential uses arrows not in the quiver: "
            f"{sorted(missing, key=_idkey)}")
    space = _RepSpace(quiver, d, q)
    terms = [(_coeff_mod(c, q), cyc) for c, cyc in W.terms()]
    derivs = [cyclic_derivative(quiver, W, a) for a in quiver.arrow_ids()]

    if mode == "exhaustive":
        if space.total > _STATE_GUARD:
            raise StateSpaceTooLarge(
                f"{space.total} points exceed the exhaustive guard "
                f"{_STATE_GUARD}; use sampling")
        ranges = [(lo, min(lo + _CHUNK, space.total))
                  for lo in range(0, space.total, _CHUNK)]

        def work(rng: tuple) -> tuple:
            lo, hi = rng
            return _tally(space, terms, derivs,
                          space.chunk_indices(lo, hi), hi - lo)

        hist = np.zeros(q, dtype=np.int64)
        crit = 0
        for h, c in _map_chunks(work, ranges):
            hist += h
            crit += c
        histogram = {v: int(hist[v]) for v in range(q)}
        return CountReport(
            q=q, d=d, mode="exhaustive", total=space.total,
            state_space=space.total, zeros=histogram[0], ones=histogram[1],
            critical=crit, histogram=histogram,
            normalization=_normalization(quiver, d, q))

    if mode == "sample":
        if not isinstance(sample_size, int) or sample_size < 1:
            raise ValueError("sample mode needs sample_size >= 1")
        if seed is None:
            raise ValueError("sample mode needs an explicit seed")
        rng = random.Random(seed)
        hist = np.zeros(q, dtype=np.int64)
        crit = 0
        done = 0
        while done < sample_size:
            n = min(_CHUNK, sample_size - done)
            idx = space.sample_indices(rng, n)
            h, c = _tally(space, terms, derivs, idx, n)
            hist += h
            crit += c
            done += n
        histogram = {v: int(hist[v]) for v in range(q)}
        return CountReport(
            q=q, d=d, mode="sample", total=sample_size,
            state_space=space.total, zeros=histogram[0], ones=histogram[1],
            critical=crit, histogram=histogram,
            normalization=_normalization(quiver, d, q), seed=seed)

    raise ValueError(f"unknown mode {mode!r}")


# -- strata of a chosen element -----------------------------------------------


@dataclass(frozen=True)
class StrataReport:
    """Counts of representations by how a chosen element acts.

    ``nilpotent`` counts points where the element's matrix is nilpotent
    (power d vanishes), ``invertible`` where its determinant is nonzero;
    ``mixed`` is the complement.  At d = 1 the mixed stratum is empty.
    ``central_certified`` records whether bounded rewriting proved the
    element central modulo the derivative ideal; a failed certificate only
    downgrades to a warning since bounded rewriting is evidence, not proof.
    """

    q: int
    d: int
    total: int
    nilpotent: int
    invertible: int
    mixed: int
    central_certified: bool

    def __post_init__(self) -> None:
        if self.nilpotent + self.invertible + self.mixed != self.total:
            raise ValueError("strata do not partition the space")
        if min(self.nilpotent, self.invertible, self.mixed) < 0:
            raise ValueError("negative stratum count")

    def to_json(self) -> dict:
        return {"q": self.q, "d": self.d, "total": self.total,
                "nilpotent": self.nilpotent, "invertible": self.invertible,
                "mixed": self.mixed,
                "central_certified": self.central_certified}


def _central_mod_derivatives(quiver: Quiver, W: Potential, omega: Element,
                             step_bound: int = 60) -> bool:
    """Bounded rewriting evidence that omega commutes with every arrow."""
    rels = jacobi_relations(quiver, W)
    for a in quiver.arrow_ids():
        gen = Element.from_word(quiver.word([(a, 1)]))
        comm = multiply(quiver, omega, gen) - multiply(quiver, gen, omega)
        if not ideal_reduce(quiver, comm, rels, step_bound=step_bound).zero:
            return False
    return True


def stratify_by_omega(quiver: Quiver, W: Potential, omega: Element,
                      d: int, q: int) -> StrataReport:
    """Split the representation space by nilpotency/invertibility of omega.

    Nilpotency is tested as omega(rep)^d = 0 (sufficient by
    Cayley-Hamilton); invertibility as det != 0.  The element is first
    checked for centrality modulo the derivative ideal by bounded rewriting;
    failure to certify emits a RuntimeWarning and the strata are reported
    anyway.
    """
    certified = _central_mod_derivatives(quiver, W, omega)
    if not certified:
        warnings.warn(
            "could not certify omega central modulo the derivative ideal "
            "(bounded rewriting stalled); strata reported anyway",
            RuntimeWarning, stacklevel=2)
    space = _RepSpace(quiver, d, q)
    if space.total > _STATE_GUARD:
        raise StateSpaceTooLarge(
            f"{space.total} points exceed the exhaustive guard {_STATE_GUARD}")
    ranges = [(lo, min(lo + _CHUNK, space.total))
              for lo in range(0, space.total, _CHUNK)]

    def work(rng: tuple) -> tuple:
        lo, hi = rng
        n = hi - lo
        idx = space.chunk_indices(lo, hi)
        om = space.element_values(idx, omega, n)
        power = om
        for _ in range(d - 1):
            power = np.matmul(power, om) % q
        nilp = (power == 0).all(axis=(1, 2))
        inv = _det_batch(om, q) != 0
        return int(nilp.sum()), int(inv.sum())

    nilp = inv = 0
    for a, b in _map_chunks(work, ranges):
        nilp += a
        inv += b
    return StrataReport(q=q, d=d, total=space.total, nilpotent=nilp,
                        invertible=inv, mixed=space.total - nilp - inv,
                        central_certified=certified)


def _det_batch(mats: np.ndarray, q: int) -> np.ndarray:
    d = mats.shape[1]
    if d == 1:
        return mats[:, 0, 0] % q
    if d == 2:
        return (mats[:, 0, 0] * mats[:, 1, 1]
                - mats[:, 0, 1] * mats[:, 1, 0]) % q
    return np.array([_mat_det(tuple(map(tuple, m)), q) for m in mats],
                    dtype=np.int64)


# -- the degree-one probe -----------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    """Both sides of the degree-one coefficient comparison at d = 1.

    The weight of a point set is |f^{-1}(0)| - |f^{-1}(1)| inside it.  The
    report records the weighted counts of the whole space and of the
    nilpotent/invertible strata, the scaled nilpotent weights the two
    identities predict for them, and whether the numbers match.  Whether
    this point-count weight is the right specialization is a modeling
    heuristic; the probe reports and never asserts.
    """

    q: int
    weight_total: int
    weight_nilpotent: int
    weight_invertible: int
    nilpotent_times_q: int
    nilpotent_times_qminus1: int
    total_matches: bool
    invertible_matches: bool

    def __post_init__(self) -> None:
        if self.weight_total != self.weight_nilpotent + self.weight_invertible:
            raise ValueError("weights do not partition at d = 1")

    def to_json(self) -> dict:
        return {"q": self.q,
                "weight_total": self.weight_total,
                "weight_nilpotent": self.weight_nilpotent,
                "weight_invertible": self.weight_invertible,
                "nilpotent_times_q": self.nilpotent_times_q,
                "nilpotent_times_qminus1": self.nilpotent_times_qminus1,
                "total_matches": self.total_matches,
                "invertible_matches": self.invertible_matches,
                "note": "point-count weights are a heuristic specialization"}


def conjecture_probe_d1(quiver: Quiver, W: Potential, omega: Element,
                        q: int) -> ProbeReport:
    """Compare weighted d = 1 counts against the q-scaled nilpotent stratum.

    Weighted count = |f^{-1}(0)| - |f^{-1}(1)|.  The whole space is compared
    with q times the omega-nilpotent stratum, and the omega-invertible
    stratum with (q - 1) times it.  Requires an odd prime: in characteristic
    2 the even coefficients of the potential collapse and the probe reads 0.
    """
    _require_prime(q)
    if q == 2:
        raise ValueError("the degree-one probe needs an odd prime q; "
                         "characteristic 2 collapses the even coefficients")
    space = _RepSpace(quiver, 1, q)
    if space.total > _STATE_GUARD:
        raise StateSpaceTooLarge(
            f"{space.total} points exceed the exhaustive guard {_STATE_GUARD}")
    terms = [(_coeff_mod(c, q), cyc) for c, cyc in W.terms()]
    ranges = [(lo, min(lo + _CHUNK, space.total))
              for lo in range(0, space.total, _CHUNK)]

    def work(rng: tuple) -> tuple:
        lo, hi = rng
        n = hi - lo
        idx = space.chunk_indices(lo, hi)
        vals = np.zeros(n, dtype=np.int64)
        for cm, cyc in terms:
            prods = space.word_values(idx, cyc, n)
            vals += cm * np.trace(prods, axis1=1, axis2=2)
        vals %= q
        weights = (vals == 0).astype(np.int64) - (vals == 1).astype(np.int64)
        om = space.element_values(idx, omega, n)[:, 0, 0]
        return (int(weights.sum()),
                int(weights[om == 0].sum()),
                int(weights[om != 0].sum()))

    w_total = w_nilp = w_inv = 0
    for t, z, i in _map_chunks(work, ranges):
        w_total += t
        w_nilp += z
        w_inv += i
    return ProbeReport(
        q=q, weight_total=w_total, weight_nilpotent=w_nilp,
        weight_invertible=w_inv, nilpotent_times_q=q * w_nilp,
        nilpotent_times_qminus1=(q - 1) * w_nilp,
        total_matches=(w_total == q * w_nilp),
        invertible_matches=(w_inv == (q - 1) * w_nilp))
