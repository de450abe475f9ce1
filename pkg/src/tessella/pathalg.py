"""Exact symbolic arithmetic in (localized) path algebras.

Conventions, fixed once and used everywhere:

* Paths compose right to left.  A word is written ``b_m ... b_2 b_1`` and
  stored left to right in that written order; the *rightmost* letter acts
  first, so ``source(word) = source(b_1)`` and ``target(word) = target(b_m)``.
  Adjacent letters must satisfy ``source(left) == target(right)``.
* ``multiply(x, y)`` is literal concatenation of written forms: the result of
  ``x * y`` applies ``y`` first.  This is the same order as matrix
  multiplication, which is what makes the matrix-unit homomorphism in
  :mod:`tessella.presentation` a homomorphism.
* A potential is a rational combination of *cyclic* words (exponent-free);
  each cyclic word is stored as its lexicographically minimal rotation.
* The cyclic derivative with respect to ``a`` rotates each occurrence of
  ``a`` to the front of its cycle and deletes it, keeping the remaining
  letters in written order.  For a cycle written ``t_0 t_1 ... t_{k-1}`` and
  an occurrence ``t_i == a`` the contribution is the linear word
  ``t_{i+1} ... t_{k-1} t_0 ... t_{i-1}``, a path target(a) -> source(a).

Coefficients are exact rationals throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Letter = tuple  # (arrow id, exponent in {+1, -1})


class NonComposable(ValueError):
    """Adjacent letters (or factors) do not concatenate."""


class InverseOfNonLocalized(ValueError):
    """Exponent -1 used on an arrow outside the localized set."""


class UnknownArrow(KeyError):
    """Arrow id not present in the quiver."""


class UnknownVertexError(KeyError):
    """Vertex id not present in the quiver."""


class LocalizedQuiverUnsupported(ValueError):
    """Operation defined only on quivers without localized arrows."""


def _idkey(x) -> str:
    """Stable sort key for mixed-type ids."""
    return str(x)


class Quiver:
    """Directed multigraph with a set of formally invertible arrows."""

    def __init__(self, vertices: Iterable, arrows: Iterable[tuple],
                 localized: Iterable = ()):
        self.vertices = tuple(vertices)
        self._vset = set(self.vertices)
        self.arrows = tuple((a, s, t) for a, s, t in arrows)
        self.localized = frozenset(localized)
        self._src = {}
        self._tgt = {}
        for a, s, t in self.arrows:
            if a in self._src:
                raise ValueError(f"duplicate arrow id {a!r}")
            if s not in self._vset or t not in self._vset:
                raise ValueError(f"arrow {a!r} references unknown vertex")
            self._src[a] = s
            self._tgt[a] = t
        for a in self.localized:
            if a not in self._src:
                raise UnknownArrow(a)

    def source(self, a):
        try:
            return self._src[a]
        except KeyError:
            raise UnknownArrow(a) from None

    def target(self, a):
        try:
            return self._tgt[a]
        except KeyError:
            raise UnknownArrow(a) from None

    def has_arrow(self, a) -> bool:
        return a in self._src

    def arrow_ids(self) -> list:
        return sorted(self._src, key=_idkey)

    def is_localized(self, a) -> bool:
        return a in self.localized

    def __repr__(self):
        return (f"Quiver({len(self.vertices)} vertices, "
                f"{len(self.arrows)} arrows, "
                f"{len(self.localized)} localized)")

    def __eq__(self, other):
        return (isinstance(other, Quiver)
                and sorted(self.vertices, key=_idkey) == sorted(other.vertices, key=_idkey)
                and sorted(self.arrows, key=lambda x: _idkey(x[0]))
                == sorted(other.arrows, key=lambda x: _idkey(x[0]))
                and self.localized == other.localized)

    # -- word construction -------------------------------------------------

    def letter_ends(self, letter: Letter) -> tuple:
        """(source, target) of a single signed letter."""
        a, e = letter
        if e == 1:
            return self.source(a), self.target(a)
        if e == -1:
            if a not in self.localized:
                raise InverseOfNonLocalized(a)
            return self.target(a), self.source(a)
        raise ValueError(f"exponent must be +-1, got {e!r}")

    def word(self, letters: Sequence[Letter] = (), at=None) -> "Word":
        """Build and normalize a word; ``at`` fixes the vertex of a constant."""
        return normalize(self, letters, at=at)

    def element(self, terms: Mapping | None = None) -> "Element":
        el = Element.zero()
        if terms:
            for w, c in terms.items():
                if not isinstance(w, Word):
                    w = self.word(w)
                el = el + Element({w: Fraction(c)})
        return el


@dataclass(frozen=True)
class Word:
    """Normalized composable word with its endpoints.

    ``letters`` is the written (left-to-right) form; the rightmost letter is
    applied first.  Construct through :func:`normalize` / ``Quiver.word``.
    """

    source: object
    target: object
    letters: tuple = ()

    def is_constant(self) -> bool:
        return not self.letters

    def degree_in(self, arrows) -> int:
        """Sum of exponents of letters whose arrow lies in ``arrows``."""
        return sum(e for a, e in self.letters if a in arrows)

    def inverse(self, quiver: Quiver) -> "Word":
        inv = tuple((a, -e) for a, e in reversed(self.letters))
        return normalize(quiver, inv, at=self.target if not inv else None)

    def sort_key(self):
        return (len(self.letters),
                tuple((_idkey(a), e) for a, e in self.letters),
                _idkey(self.source))

    def __str__(self):
        return render_letters(self.letters, constant_at=self.source)

    def __repr__(self):
        return f"<{self}: {self.source}->{self.target}>"


def render_letters(letters: Sequence[Letter], constant_at=None) -> str:
    if not letters:
        return f"e_{constant_at}" if constant_at is not None else "1"
    parts = []
    plain = all(isinstance(a, str) and len(a) == 1 for a, _ in letters)
    for a, e in letters:
        parts.append(f"{a}^-1" if e == -1 else f"{a}")
    return ("" if plain else ".").join(parts)


def normalize(quiver: Quiver, letters: Sequence[Letter] | "Word", at=None) -> Word:
    """Cancellation-free normal form of a composable letter sequence.

    Composability is checked on the raw sequence before cancellation;
    ``x x^-1`` and ``x^-1 x`` pairs are then removed.  Idempotent.
    """
    if isinstance(letters, Word):
        if at is None:
            at = letters.source
        letters = letters.letters
    letters = [(a, int(e)) for a, e in letters]
    if not letters:
        if at is None:
            raise NonComposable("constant word needs a vertex")
        if at not in quiver._vset:
            raise UnknownVertexError(at)
        return Word(at, at, ())
    ends = [quiver.letter_ends(l) for l in letters]
    for i in range(len(letters) - 1):
        # left letter i must start where the right letter i+1 ends
        if ends[i][0] != ends[i + 1][1]:
            raise NonComposable(
                f"{letters[i]!r} after {letters[i + 1]!r}: "
                f"{ends[i][0]!r} != {ends[i + 1][1]!r}")
    source = ends[-1][0]
    target = ends[0][1]
    stack: list[Letter] = []
    for l in letters:
        if stack and stack[-1][0] == l[0] and stack[-1][1] == -l[1]:
            stack.pop()
        else:
            stack.append(l)
    return Word(source, target, tuple(stack))


class Element:
    """Finite rational combination of normalized words."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[Word, Fraction] | None = None):
        clean = {}
        if coeffs:
            for w, c in coeffs.items():
                c = Fraction(c)
                if c:
                    clean[w] = clean.get(w, Fraction(0)) + c
                    if not clean[w]:
                        del clean[w]
        self.coeffs = clean

    @staticmethod
    def zero() -> "Element":
        return Element()

    @staticmethod
    def from_word(word: Word, coeff=1) -> "Element":
        return Element({word: Fraction(coeff)})

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "Element") -> "Element":
        out = dict(self.coeffs)
        for w, c in other.coeffs.items():
            out[w] = out.get(w, Fraction(0)) + c
        return Element(out)

    def __sub__(self, other: "Element") -> "Element":
        return self + other.scale(-1)

    def scale(self, c) -> "Element":
        c = Fraction(c)
        return Element({w: k * c for w, k in self.coeffs.items()})

    def __eq__(self, other):
        return isinstance(other, Element) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def words(self) -> list[Word]:
        return sorted(self.coeffs, key=Word.sort_key)

    def __str__(self):
        if not self.coeffs:
            return "0"
        bits = []
        for w in self.words():
            c = self.coeffs[w]
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            body = str(w) if mag == 1 else f"{mag}{w}"
            bits.append((sign, body))
        first_sign, first_body = bits[0]
        out = ("-" if first_sign == "-" else "") + first_body
        for sign, body in bits[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"Element({self})"


def multiply(quiver: Quiver, x: Element, y: Element) -> Element:
    """Bilinear product; ``y`` acts first. Non-composable pairs contribute 0."""
    out: dict[Word, Fraction] = {}
    for wx, cx in x.coeffs.items():
        for wy, cy in y.coeffs.items():
            if wx.source != wy.target:
                continue
            w = normalize(quiver, wx.letters + wy.letters,
                          at=wy.source if not (wx.letters or wy.letters) else None)
            out[w] = out.get(w, Fraction(0)) + cx * cy
    return Element(out)


def word_product(quiver: Quiver, *words: Word) -> Word:
    """Product of words (rightmost applied first); raises NonComposable."""
    letters: list[Letter] = []
    for w in words:
        letters.extend(w.letters)
    for left, right in zip(words, words[1:]):
        if left.source != right.target:
            raise NonComposable(f"{left!r} after {right!r}")
    at = words[-1].source if words else None
    return normalize(quiver, letters, at=at if not letters else None)


# -- potentials --------------------------------------------------------------


def _is_letter(entry) -> bool:
    return isinstance(entry, tuple) and len(entry) == 2 and isinstance(entry[1], int)


def _as_letters(cycle: Sequence) -> tuple[Letter, ...]:
    """Coerce a cycle given as arrow ids and/or (arrow, exp) pairs to letters."""
    out = []
    for entry in cycle:
        if _is_letter(entry):
            a, e = entry
            if e == 0:
                raise NonComposable("zero exponent in cycle")
            out.append((a, int(e)))
        else:
            out.append((entry, 1))
    return tuple(out)


def _wrap_reduce(letters: tuple[Letter, ...]) -> tuple[Letter, ...]:
    """Cancel inverse pairs across the rotation seam of a cyclic word."""
    while len(letters) >= 2 and letters[0] == (letters[-1][0], -letters[-1][1]):
        letters = letters[1:-1]
    return letters


def _letterkey(letter: Letter):
    return (_idkey(letter[0]), letter[1])


def canonical_rotation(cycle: Sequence) -> tuple:
    """Lexicographically minimal rotation of a cyclic word.

    Accepts plain arrow-id tuples or letter tuples; the result keeps the
    caller's entry shape.
    """
    cyc = tuple(cycle)
    if not cyc:
        return cyc
    rots = [cyc[i:] + cyc[:i] for i in range(len(cyc))]
    if all(_is_letter(x) for x in cyc):
        return min(rots, key=lambda r: tuple(_letterkey(l) for l in r))
    return min(rots, key=lambda r: tuple(_idkey(a) for a in r))


class Potential:
    """Rational combination of cyclic words, stored rotation-canonically.

    Cycles are letter tuples ``((arrow, exp), ...)``; inverse letters are
    meaningful only for localized arrows and arise e.g. when a potential is
    pushed through an algebra embedding.  Plain arrow sequences are accepted
    everywhere and read as exponent-1 letters.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[tuple, Fraction] | None = None):
        clean = {}
        if coeffs:
            for cyc, c in coeffs.items():
                c = Fraction(c)
                if not c:
                    continue
                key = canonical_rotation(_wrap_reduce(_as_letters(cyc)))
                clean[key] = clean.get(key, Fraction(0)) + c
                if not clean[key]:
                    del clean[key]
        self.coeffs = clean

    @staticmethod
    def build(quiver: Quiver, terms: Iterable[tuple]) -> "Potential":
        """From (coeff, cycle) pairs; validates closed composability."""
        coeffs: dict[tuple, Fraction] = {}
        for coeff, cyc in terms:
            letters = _as_letters(tuple(cyc))
            if not letters:
                raise NonComposable("empty cycle in potential")
            w = normalize(quiver, letters)
            if w.source != w.target:
                raise NonComposable(f"cycle {cyc!r} is not closed")
            key = canonical_rotation(_wrap_reduce(w.letters))
            if not key:
                raise NonComposable(f"cycle {cyc!r} reduces to a constant path")
            coeffs[key] = coeffs.get(key, Fraction(0)) + Fraction(coeff)
        return Potential(coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def terms(self) -> list[tuple]:
        """(coeff, letter-tuple cycle) pairs in canonical order."""
        order = sorted(self.coeffs,
                       key=lambda c: (len(c), tuple(_letterkey(l) for l in c)))
        return [(self.coeffs[c], c) for c in order]

    def arrows_used(self) -> set:
        return {a for cyc in self.coeffs for a, _ in cyc}

    def scale(self, c) -> "Potential":
        c = Fraction(c)
        return Potential({cyc: k * c for cyc, k in self.coeffs.items()})

    def __add__(self, other: "Potential") -> "Potential":
        out = dict(self.coeffs)
        for cyc, c in other.coeffs.items():
            out[cyc] = out.get(cyc, Fraction(0)) + c
        return Potential(out)

    def __sub__(self, other: "Potential") -> "Potential":
        return self + other.scale(-1)

    def __eq__(self, other):
        return isinstance(other, Potential) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(frozenset(self.coeffs.items()))

    def __str__(self):
        if not self.coeffs:
            return "0"
        bits = []
        for c, cyc in self.terms():
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            body = render_letters(cyc)
            bits.append((sign, body if mag == 1 else f"{mag}{body}"))
        out = ("-" if bits[0][0] == "-" else "") + bits[0][1]
        for sign, body in bits[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"Potential({self})"


def cyclic_derivative(quiver: Quiver, W: Potential, a) -> Element:
    """Rotate each occurrence of ``a`` to the front of its cycle and delete it.

    Localized arrows are allowed (the derivative is then taken on the
    un-localized view), but only exponent-1 occurrences are differentiable:
    a cycle containing ``a`` inverted has no cyclic derivative here.
    """
    if not quiver.has_arrow(a):
        raise UnknownArrow(a)
    out = Element.zero()
    for cyc, c in W.coeffs.items():
        if any(x == a and e != 1 for x, e in cyc):
            raise InverseOfNonLocalized(
                f"cannot differentiate through an inverse occurrence of {a!r}")
        for i, letter in enumerate(cyc):
            if letter != (a, 1):
                continue
            rest = cyc[i + 1:] + cyc[:i]
            w = normalize(quiver, rest,
                          at=quiver.target(a) if not rest else None)
            out = out + Element.from_word(w, c)
    return out


def jacobi_relations(quiver: Quiver, W: Potential) -> list[Element]:
    """Cyclic derivatives by every non-localized arrow, in canonical order."""
    return [cyclic_derivative(quiver, W, a)
            for a in quiver.arrow_ids() if not quiver.is_localized(a)]


# -- bounded ideal-membership evidence ---------------------------------------


@dataclass(frozen=True)
class ReduceResult:
    zero: bool
    residual: Element
    rounds: int

    @property
    def kind(self) -> str:
        return "zero" if self.zero else "unknown"


def _leading_word(rel: Element) -> Word | None:
    """Longest word of the relation; ties broken lexicographically."""
    if rel.is_zero():
        return None
    return min(rel.coeffs,
               key=lambda w: (-len(w.letters),
                              tuple((_idkey(a), e) for a, e in w.letters),
                              _idkey(w.source)))


def _find_subword(haystack: tuple, needle: tuple) -> int:
    n = len(needle)
    for i in range(len(haystack) - n + 1):
        if haystack[i:i + n] == needle:
            return i
    return -1


def ideal_reduce(quiver: Quiver, x: Element, relations: Sequence[Element],
                 step_bound: int = 50) -> ReduceResult:
    """Directed rewriting toward 0 modulo the two-sided ideal of ``relations``.

    Each relation is oriented leading-word -> remainder (leading = longest
    word, ties lexicographic).  Per round, every word of the current element
    gets its leftmost (then longest, then first-listed) leading-word
    occurrence replaced; rounds repeat up to ``step_bound`` or until the
    element stalls.  Sound, not complete: Unknown is evidence of nothing.
    """
    if step_bound < 0:
        raise ValueError("step_bound must be >= 0")
    oriented = []
    for rel in relations:
        lead = _leading_word(rel)
        if lead is None:
            continue
        c = rel.coeffs[lead]
        remainder = (rel - Element.from_word(lead, c)).scale(Fraction(-1, 1) / c)
        oriented.append((lead, remainder))

    current = x
    rounds = 0
    while rounds < step_bound and not current.is_zero():
        nxt = Element.zero()
        changed = False
        for w in current.words():
            c = current.coeffs[w]
            best = None
            for idx, (lead, rem) in enumerate(oriented):
                pos = _find_subword(w.letters, lead.letters)
                if pos < 0:
                    continue
                key = (pos, -len(lead.letters), idx)
                if best is None or key < best[0]:
                    best = (key, pos, lead, rem)
            if best is None:
                nxt = nxt + Element.from_word(w, c)
                continue
            _, pos, lead, rem = best
            changed = True
            prefix = w.letters[:pos]
            suffix = w.letters[pos + len(lead.letters):]
            for rw, rc in rem.coeffs.items():
                glued = normalize(quiver, prefix + rw.letters + suffix,
                                  at=w.source if not (prefix or rw.letters or suffix) else None)
                nxt = nxt + Element.from_word(glued, c * rc)
        current = nxt
        rounds += 1
        if not changed:
            break
    return ReduceResult(current.is_zero(), current, rounds)


# -- Ginzburg-style differential graded structure ----------------------------


@dataclass
class GinzburgDga:
    """Doubled quiver with vertex loops and the potential differential.

    Degrees: original arrows 0, starred arrows -1, vertex loops -2.  The
    differential raises degree by 1 and is a graded derivation.
    """

    quiver: Quiver            # doubled quiver: arrows + stars + loops
    base: Quiver              # the original quiver
    degree: dict = field(default_factory=dict)
    differential: dict = field(default_factory=dict)  # generator -> Element
    star: dict = field(default_factory=dict)          # arrow -> star id
    loop: dict = field(default_factory=dict)          # vertex -> loop id

    def word_degree(self, w: Word) -> int:
        return sum(self.degree[a] * e for a, e in w.letters)

    def d_word(self, w: Word) -> Element:
        """Graded Leibniz extension of the generator differential.

        Substitutions multiply through the surrounding factors, so a
        replacement word whose endpoints fail to match the hole contributes 0
        (same composability semantics as :func:`multiply`).
        """
        out = Element.zero()
        sign = 1
        for i, (a, e) in enumerate(w.letters):
            if e != 1:
                raise InverseOfNonLocalized(a)
            da = self.differential[a]
            if not da.is_zero():
                piece = da
                if i > 0:
                    pre = normalize(self.quiver, w.letters[:i])
                    piece = multiply(self.quiver, Element.from_word(pre), piece)
                if i + 1 < len(w.letters):
                    post = normalize(self.quiver, w.letters[i + 1:])
                    piece = multiply(self.quiver, piece, Element.from_word(post))
                out = out + piece.scale(sign)
            sign *= (-1) ** self.degree[a]
        return out

    def d(self, x: Element) -> Element:
        out = Element.zero()
        for w, c in x.coeffs.items():
            out = out + self.d_word(w).scale(c)
        return out


def ginzburg_dga(quiver: Quiver, W: Potential) -> GinzburgDga:
    """The doubled quiver with d(a)=0, d(a*)=dW/da, d(t_i)=e_i sum[a,a*] e_i."""
    if quiver.localized:
        raise LocalizedQuiverUnsupported(sorted(quiver.localized, key=_idkey))
    star = {a: f"{a}*" for a in quiver._src}
    loop = {v: f"t_{v}" for v in quiver.vertices}
    names = (set(map(_idkey, quiver._src)) | set(map(_idkey, star.values()))
             | set(map(_idkey, loop.values())))
    if len(names) != len(quiver._src) * 2 + len(quiver.vertices):
        raise ValueError("arrow ids collide with generated star/loop names")
    arrows = list(quiver.arrows)
    arrows += [(star[a], quiver.target(a), quiver.source(a)) for a, _, _ in quiver.arrows]
    arrows += [(loop[v], v, v) for v in quiver.vertices]
    doubled = Quiver(quiver.vertices, arrows)

    degree = {a: 0 for a in quiver._src}
    degree.update({star[a]: -1 for a in quiver._src})
    degree.update({loop[v]: -2 for v in quiver.vertices})

    diff: dict = {a: Element.zero() for a in quiver._src}
    for a in quiver._src:
        diff[star[a]] = cyclic_derivative(quiver, W, a)
    for v in quiver.vertices:
        acc = Element.zero()
        for a in sorted(quiver._src, key=_idkey):
            if quiver.target(a) == v:
                acc = acc + Element.from_word(doubled.word([(a, 1), (star[a], 1)]))
            if quiver.source(a) == v:
                acc = acc - Element.from_word(doubled.word([(star[a], 1), (a, 1)]))
        diff[loop[v]] = acc
    return GinzburgDga(doubled, quiver, degree, diff, star, loop)


def check_d_squared(dga: GinzburgDga) -> tuple[bool, dict]:
    """Verify d(d(g)) = 0 for every generator; witnesses on failure."""
    witnesses = {}
    for g in sorted(dga.differential, key=_idkey):
        dd = dga.d(dga.differential[g])
        if not dd.is_zero():
            witnesses[g] = dd
    return (not witnesses), witnesses


def commutator_sum(quiver: Quiver, W: Potential) -> Element:
    """sum over arrows of (a dW/da - dW/da a); identically 0 for any W."""
    out = Element.zero()
    for a in quiver.arrow_ids():
        da = cyclic_derivative(quiver, W, a)
        aw = Element.from_word(quiver.word([(a, 1)]))
        out = out + multiply(quiver, aw, da) - multiply(quiver, da, aw)
    return out


# -- compact text forms and JSON -------------------------------------------


def parse_letters(s: str) -> list[Letter]:
    """'ardbr' -> single-char letters; 'e^-1 c' -> space-separated tokens."""
    if " " in s:
        out = []
        for tok in s.split():
            if tok.endswith("^-1"):
                out.append((tok[:-3], -1))
            else:
                out.append((tok, 1))
        return out
    return [(ch, 1) for ch in s]


def _coeff_to_json(c: Fraction):
    return int(c) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _coeff_from_json(v) -> Fraction:
    return Fraction(v)


def quiver_to_json(quiver: Quiver) -> dict:
    return {
        "vertices": sorted(quiver.vertices, key=_idkey),
        "arrows": [{"id": a, "src": s, "tgt": t,
                    "localized": a in quiver.localized}
                   for a, s, t in sorted(quiver.arrows, key=lambda x: _idkey(x[0]))],
    }


def quiver_from_json(obj: dict) -> Quiver:
    arrows = [(d["id"], d["src"], d["tgt"]) for d in obj["arrows"]]
    localized = [d["id"] for d in obj["arrows"] if d.get("localized")]
    return Quiver(obj["vertices"], arrows, localized)


def potential_to_json(W: Potential) -> list:
    return [{"coeff": _coeff_to_json(c), "word": [[a, e] for a, e in cyc]}
            for c, cyc in W.terms()]


def potential_from_json(quiver: Quiver, items: list) -> Potential:
    terms = [(_coeff_from_json(d["coeff"]),
              [(a, int(e)) for a, e in d["word"]])
             for d in items]
    return Potential.build(quiver, terms)


def qpot_to_json(quiver: Quiver, W: Potential) -> dict:
    out = quiver_to_json(quiver)
    out["potential"] = potential_to_json(W)
    return out


def qpot_from_json(obj: dict) -> tuple[Quiver, Potential]:
    q = quiver_from_json(obj)
    return q, potential_from_json(q, obj.get("potential", []))


def element_to_json(x: Element) -> list:
    out = []
    for w in x.words():
        d = {"coeff": _coeff_to_json(x.coeffs[w]),
             "word": [[a, e] for a, e in w.letters]}
        if not w.letters:
            d["at"] = w.source
        out.append(d)
    return out


def element_from_json(quiver: Quiver, items: list) -> Element:
    out = Element.zero()
    for d in items:
        letters = [(a, int(e)) for a, e in d["word"]]
        at = d.get("at")
        w = normalize(quiver, letters, at=at if not letters else None)
        out = out + Element.from_word(w, _coeff_from_json(d["coeff"]))
    return out
