"""Finite-order symmetries of tilings and their dual quivers.

Given a colour-preserving symmetry of a tiling of order ``n``, this module
builds the machinery relating the dual quiver ``Q`` to its orbit quiver
``Q'``:

* ``refine_tiling`` subdivides symmetric tiles until every face orbit has
  size ``n`` (so the induced action on dual-quiver vertices is free),
* ``equivariant_dimer`` extends the tiling (in whole symmetry orbits) until
  a perfect matching of the tiling vertices exists,
* ``build_orbit_quiver`` constructs ``Q'``: the original vertices, one
  generating arrow per arrow orbit, and a chain of localized isomorphism
  arrows through each vertex orbit,
* ``xi_embed`` realizes every path of ``Q`` as a word in ``Q'`` (the arrow
  ``a = phi^k(gen)`` maps to ``p_a . gen . q_a`` with ``q_a``, ``p_a`` the
  unique iso-arrow words between the matching endpoints),
* ``transport_potential`` pushes the tiling potential to ``Q'``, and
  ``choose_homogeneous_xi`` searches for choices making the transported
  potential homogeneous of degree ``n`` in the isomorphism arrows.

Isomorphism arrows carry degree +1 (inverses -1); all other arrows degree 0.
The common-source rule (all generators whose sources share a vertex orbit
use the same source vertex) is the sufficient condition ensuring no
isomorphism arrow appears in the transported potential with both signs.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import lcm
from typing import Iterable, Mapping, Optional, Sequence

from .pathalg import (
    Element,
    NonComposable,
    Potential,
    Quiver,
    UnknownArrow,
    Word,
    _idkey,
    cyclic_derivative,
    multiply,
    normalize,
)
from .surfacemap import (
    BraneTiling,
    CombinatorialMap,
    dual_quiver,
    validate_tiling,
)


class InvalidAutomorphism(ValueError):
    """The permutation data do not define a symmetry of the object."""


class OrbitSizeViolation(ValueError):
    """A vertex orbit is smaller than the automorphism order."""


class BadChoice(ValueError):
    """An orbit choice breaks the one-generator-per-orbit/base-point rules."""


class MixedInverseViolation(ValueError):
    """An isomorphism arrow occurs with both signs in a transported potential."""


class NoChoiceFound(RuntimeError):
    """Exhaustive search found no admissible homogeneous choice."""


class MalformedWord(ValueError):
    """The word cannot be factored over the chosen embedding."""


class MatchingStuck(RuntimeError):
    """No co-facial edge insertion can complete the vertex matching."""


def _perm_order(perms: Iterable[Mapping]) -> int:
    n = 1
    for perm in perms:
        seen = set()
        for start in perm:
            if start in seen:
                continue
            length = 1
            x = perm[start]
            seen.add(start)
            while x != start:
                seen.add(x)
                x = perm[x]
                length += 1
            n = lcm(n, length)
    return n


def _orbits(perm: Mapping, domain: Sequence) -> list[tuple]:
    """Orbits as tuples (rep, perm(rep), ...), rep minimal, sorted by rep."""
    seen = set()
    out = []
    for start in sorted(domain, key=_idkey):
        if start in seen:
            continue
        orb = [start]
        seen.add(start)
        x = perm[start]
        while x != start:
            orb.append(x)
            seen.add(x)
            x = perm[x]
        out.append(tuple(orb))
    return out


class QuiverAutomorphism:
    """A quiver symmetry: compatible permutations of vertices and arrows."""

    def __init__(self, quiver: Quiver, vertex_perm: Mapping, arrow_perm: Mapping):
        self.quiver = quiver
        self.vertex_perm = dict(vertex_perm)
        self.arrow_perm = dict(arrow_perm)
        vset = set(quiver.vertices)
        if set(self.vertex_perm) != vset or set(self.vertex_perm.values()) != vset:
            raise InvalidAutomorphism("vertex_perm is not a permutation of the vertices")
        aset = set(quiver.arrow_ids())
        if set(self.arrow_perm) != aset or set(self.arrow_perm.values()) != aset:
            raise InvalidAutomorphism("arrow_perm is not a permutation of the arrows")
        for a in aset:
            img = self.arrow_perm[a]
            if quiver.source(img) != self.vertex_perm[quiver.source(a)] \
                    or quiver.target(img) != self.vertex_perm[quiver.target(a)]:
                raise InvalidAutomorphism(f"arrow {a!r} is not mapped equivariantly")
            if quiver.is_localized(a) != quiver.is_localized(img):
                raise InvalidAutomorphism(f"arrow {a!r} changes localization status")
        self.order = _perm_order([self.vertex_perm, self.arrow_perm])

    def apply_vertex(self, v, k: int = 1):
        for _ in range(k % self.order):
            v = self.vertex_perm[v]
        return v

    def apply_arrow(self, a, k: int = 1):
        for _ in range(k % self.order):
            a = self.arrow_perm[a]
        return a

    def vertex_orbits(self) -> list[tuple]:
        return _orbits(self.vertex_perm, self.quiver.vertices)

    def arrow_orbits(self) -> list[tuple]:
        return _orbits(self.arrow_perm, self.quiver.arrow_ids())

    @staticmethod
    def identity(quiver: Quiver) -> "QuiverAutomorphism":
        return QuiverAutomorphism(quiver,
                                  {v: v for v in quiver.vertices},
                                  {a: a for a in quiver.arrow_ids()})


class TilingAutomorphism:
    """A colour-preserving symmetry of a tiling, given on half-edges."""

    def __init__(self, tiling: BraneTiling, half_edge_perm: Mapping[int, int]):
        self.tiling = tiling
        self.half_edge_perm = {int(k): int(v) for k, v in half_edge_perm.items()}
        m = tiling.map
        hset = set(m.half_edges)
        perm = self.half_edge_perm
        if set(perm) != hset or set(perm.values()) != hset:
            raise InvalidAutomorphism("half_edge_perm is not a permutation of the half-edges")
        for h in hset:
            if perm[m.involution[h]] != m.involution[perm[h]]:
                raise InvalidAutomorphism(f"half-edge {h} breaks commutation with the pairing")
            if perm[m.rotation[h]] != m.rotation[perm[h]]:
                raise InvalidAutomorphism(f"half-edge {h} breaks commutation with the rotation")
        for h in hset:
            if tiling.color_of(perm[h]) != tiling.color_of(h):
                raise InvalidAutomorphism("automorphism swaps vertex colours")
        self.order = _perm_order([perm])

    def apply(self, h: int, k: int = 1) -> int:
        for _ in range(k % self.order):
            h = self.half_edge_perm[h]
        return h

    @staticmethod
    def identity(tiling: BraneTiling) -> "TilingAutomorphism":
        return TilingAutomorphism(tiling, {h: h for h in tiling.map.half_edges})


def induced_quiver_automorphism(tiling: BraneTiling, taut: TilingAutomorphism,
                                quiver: Optional[Quiver] = None) -> QuiverAutomorphism:
    """Push a tiling symmetry to the dual quiver (faces and edge-duals)."""
    if quiver is None:
        quiver, _ = dual_quiver(tiling)
    m = tiling.map
    perm = taut.half_edge_perm
    faces = m.face_cycles()
    face_no = {}
    for i, cyc in enumerate(faces, start=1):
        for h in cyc:
            face_no[h] = i
    vertex_perm = {i: face_no[perm[cyc[0]]] for i, cyc in enumerate(faces, start=1)}
    arrow_perm = {}
    for (h, k) in m.edges():
        img = min(perm[h], perm[k])
        arrow_perm[tiling.arrow_name(h)] = tiling.arrow_name(img)
    return QuiverAutomorphism(quiver, vertex_perm, arrow_perm)


def orbit_sizes(quiver: Quiver, phi: QuiverAutomorphism) -> tuple[dict, bool]:
    """Vertex orbit sizes and whether they all equal the automorphism order."""
    sizes = {}
    for orb in phi.vertex_orbits():
        for v in orb:
            sizes[v] = len(orb)
    return sizes, all(s == phi.order for s in sizes.values())


# -- tiling surgery ------------------------------------------------------------


class _Surgeon:
    """Mutable tiling-with-symmetry state for orbit-equivariant insertions."""

    def __init__(self, tiling: BraneTiling, taut: TilingAutomorphism):
        m = tiling.map
        self.half_edges = list(m.half_edges)
        self.involution = dict(m.involution)
        self.rotation = dict(m.rotation)
        self.coloring = dict(tiling.coloring)
        self.labels = dict(tiling.labels)
        self.perm = dict(taut.half_edge_perm)
        self.order = taut.order
        self.next_id = max(self.half_edges) + 1
        self.changed = False

    def tiling(self) -> BraneTiling:
        m = CombinatorialMap(self.half_edges, self.involution, self.rotation)
        return BraneTiling(m, self.coloring, self.labels)

    def fresh(self) -> int:
        h = self.next_id
        self.next_id += 1
        return h

    def apply(self, h: int, k: int) -> int:
        for _ in range(k % self.order):
            h = self.perm[h]
        return h

    def vertex_cycle_of(self, h: int) -> list[int]:
        cyc = [h]
        x = self.rotation[h]
        while x != h:
            cyc.append(x)
            x = self.rotation[x]
        return cyc

    def vertex_handle(self, h: int) -> int:
        return min(self.vertex_cycle_of(h))

    def color_at(self, h: int) -> str:
        return self.coloring[self.vertex_handle(h)]

    def face_cycles(self) -> list[tuple[int, ...]]:
        seen: set[int] = set()
        out = []
        for start in sorted(self.half_edges):
            if start in seen:
                continue
            cyc = [start]
            seen.add(start)
            x = self.rotation[self.involution[start]]
            while x != start:
                cyc.append(x)
                seen.add(x)
                x = self.rotation[self.involution[x]]
            out.append(tuple(cyc))
        return out

    def face_orbit_size(self, face: tuple[int, ...]) -> int:
        fset = frozenset(face)
        cur = fset
        for d in range(1, self.order + 1):
            cur = frozenset(self.perm[h] for h in cur)
            if cur == fset:
                return d
        raise InvalidAutomorphism("face orbit does not close")

    def insert_before(self, pending: dict[int, int]) -> None:
        """Insert new half-edges into rotations, each directly before its key."""
        for corner, new in pending.items():
            cyc = self.vertex_cycle_of(corner)
            prev = cyc[-1] if cyc[0] == corner else cyc[cyc.index(corner) - 1]
            self.rotation[prev] = new
            self.rotation[new] = corner
        self.changed = True

    def add_edge_orbit(self, corner_u: int, corner_v: int) -> None:
        """Add an edge between the vertices at two co-facial corners, plus
        all symmetry images.  The face orbit must be free."""
        n = self.order
        pending: dict[int, int] = {}
        new_pairs = []
        for m_ in range(n):
            cu = self.apply(corner_u, m_)
            cv = self.apply(corner_v, m_)
            su, sv = self.fresh(), self.fresh()
            self.half_edges += [su, sv]
            self.involution[su] = sv
            self.involution[sv] = su
            pending[cu] = su
            pending[cv] = sv
            new_pairs.append((su, sv))
        for m_ in range(n):
            su, sv = new_pairs[m_]
            su2, sv2 = new_pairs[(m_ + 1) % n]
            self.perm[su] = su2
            self.perm[sv] = sv2
        self.insert_before(pending)

    def add_pendant_orbit(self, corner: int, color: str) -> None:
        """Hang a new valence-one vertex of the given colour at a corner's
        vertex, plus all symmetry images."""
        n = self.order
        pending: dict[int, int] = {}
        stubs = []
        tips = []
        for m_ in range(n):
            c = self.apply(corner, m_)
            stub, tip = self.fresh(), self.fresh()
            self.half_edges += [stub, tip]
            self.involution[stub] = tip
            self.involution[tip] = stub
            self.rotation[tip] = tip
            self.coloring[tip] = color
            pending[c] = stub
            stubs.append(stub)
            tips.append(tip)
        for m_ in range(n):
            self.perm[stubs[m_]] = stubs[(m_ + 1) % n]
            self.perm[tips[m_]] = tips[(m_ + 1) % n]
        self.insert_before(pending)


def refine_tiling(tiling: BraneTiling, taut: TilingAutomorphism
                  ) -> tuple[BraneTiling, TilingAutomorphism]:
    """Subdivide symmetric tiles until every face orbit is free.

    Each tile fixed by a proper power of the symmetry gets a new centre
    vertex joined to the orbit of a boundary corner, splitting it into
    tiles the symmetry permutes freely.  The boundary vertex is the
    lowest-id vertex on the tile (the centre takes the opposite colour).
    Returns the refined tiling and the extended symmetry; the inputs are
    returned as-is when no tile needs splitting.
    """
    if taut.tiling is not tiling:
        taut = TilingAutomorphism(tiling, taut.half_edge_perm)
    s = _Surgeon(tiling, taut)
    n = taut.order
    while True:
        faces = s.face_cycles()
        violator = None
        for face in faces:
            d = s.face_orbit_size(face)
            if d < n:
                violator = (face, d)
                break
        if violator is None:
            break
        face, d = violator
        k = n // d
        v = min(s.vertex_handle(h) for h in face)
        c0 = min(h for h in face if s.vertex_handle(h) == v)
        corners = [s.apply(c0, j * d) for j in range(k)]
        if len(set(corners)) != k:
            raise InvalidAutomorphism(
                f"symmetry fixes a face but moves its boundary in an "
                f"unexpected pattern at corner {c0}")
        centre_color = "b" if s.color_at(c0) == "w" else "w"
        boundary_half: dict[int, int] = {}
        centre_half: dict[int, int] = {}
        for m_ in range(n):
            bh, ch = s.fresh(), s.fresh()
            s.half_edges += [bh, ch]
            s.involution[bh] = ch
            s.involution[ch] = bh
            boundary_half[m_] = bh
            centre_half[m_] = ch
        for m_ in range(n):
            s.perm[boundary_half[m_]] = boundary_half[(m_ + 1) % n]
            s.perm[centre_half[m_]] = centre_half[(m_ + 1) % n]
        s.insert_before({s.apply(c0, m_): boundary_half[m_] for m_ in range(n)})
        # one centre per face in the orbit; its rotation lists the spokes in
        # the boundary-walk order of their corners
        for l in range(d):
            ms = [m_ for m_ in range(n) if m_ % d == l]
            target_face = next(f for f in faces if s.apply(c0, l) in f)
            order = sorted(ms, key=lambda m_: target_face.index(s.apply(c0, m_)))
            cyc = [centre_half[m_] for m_ in order]
            for i, h in enumerate(cyc):
                s.rotation[h] = cyc[(i + 1) % len(cyc)]
            s.coloring[min(cyc)] = centre_color
    if not s.changed:
        return tiling, taut
    out = s.tiling()
    report = validate_tiling(out)
    if not report["valid"]:
        raise InvalidAutomorphism(
            "refinement produced an invalid tiling: " + "; ".join(report["problems"]))
    return out, TilingAutomorphism(out, s.perm)


# -- dimers --------------------------------------------------------------------


def _matching_data(s: _Surgeon) -> dict:
    """White->black adjacency and a representative edge per vertex pair."""
    adj: dict[int, list[int]] = {}
    edge_for: dict[tuple[int, int], tuple[int, int]] = {}
    for h in sorted(s.half_edges):
        k = s.involution[h]
        if h > k:
            continue
        u, v = s.vertex_handle(h), s.vertex_handle(k)
        if s.coloring[u] == "b":
            u, v = v, u
        adj.setdefault(u, [])
        if v not in adj[u]:
            adj[u].append(v)
        edge_for.setdefault((u, v), (h, k))
    return {"adj": adj, "edge_for": edge_for}


def _max_matching(whites: list[int], adj: dict[int, list[int]]) -> dict[int, int]:
    """Kuhn's augmenting-path matching; returns white -> black."""
    match_w: dict[int, int] = {}
    match_b: dict[int, int] = {}

    def try_augment(w, seen):
        for b in adj.get(w, []):
            if b in seen:
                continue
            seen.add(b)
            if b not in match_b or try_augment(match_b[b], seen):
                match_w[w] = b
                match_b[b] = w
                return True
        return False

    for w in sorted(whites):
        try_augment(w, set())
    return match_w


def all_dimers(tiling: BraneTiling) -> list[frozenset]:
    """Every perfect matching of the tiling vertices, as edge sets."""
    m = tiling.map
    edges = m.edges()
    vert = {}
    for cyc in m.vertex_cycles():
        for h in cyc:
            vert[h] = cyc[0]
    out = []

    def extend(chosen: list, remaining: set):
        if not remaining:
            out.append(frozenset(chosen))
            return
        v = min(remaining)
        for (h, k) in edges:
            ends = {vert[h], vert[k]}
            if v in ends and ends <= remaining and len(ends) == 2:
                extend(chosen + [(h, k)], remaining - ends)

    extend([], {c[0] for c in m.vertex_cycles()})
    return out


def _cofacial(s: _Surgeon) -> tuple[dict, dict]:
    """White->black co-facial adjacency and a corner pair per vertex pair."""
    adj: dict[int, list[int]] = {}
    corner: dict[tuple[int, int], tuple[int, int]] = {}
    for face in s.face_cycles():
        at: dict[int, int] = {}
        for h in face:
            at.setdefault(s.vertex_handle(h), h)
        handles = sorted(at)
        for u in handles:
            if s.coloring[u] != "w":
                continue
            for v in handles:
                if s.coloring[v] != "b":
                    continue
                adj.setdefault(u, [])
                if v not in adj[u]:
                    adj[u].append(v)
                corner.setdefault((u, v), (at[u], at[v]))
    return adj, corner


def equivariant_dimer(tiling: BraneTiling, taut: TilingAutomorphism
                      ) -> tuple[BraneTiling, TilingAutomorphism, frozenset]:
    """A perfect matching on the tiling, extending it in orbits if needed.

    Requires the free-face-orbit property (run ``refine_tiling`` first).
    Colour counts are balanced by pendant-vertex orbits; then, while the
    maximum matching on actual edges is not perfect, an augmenting path is
    taken through the co-facial pair graph and its first missing edge is
    added to the tiling with its whole symmetry orbit.  Returns the
    possibly extended tiling, the extended symmetry, and the matching as a
    set of (half, half) edges.
    """
    if taut.tiling is not tiling:
        taut = TilingAutomorphism(tiling, taut.half_edge_perm)
    s = _Surgeon(tiling, taut)
    n = s.order

    whites = sorted(h for h, c in s.coloring.items() if c == "w")
    blacks = sorted(h for h, c in s.coloring.items() if c == "b")
    if len(whites) != len(blacks):
        excess = len(whites) - len(blacks)
        if excess % n:
            raise MatchingStuck(
                f"colour imbalance {excess} is not a multiple of the "
                f"symmetry order {n}")
        minority = "b" if excess > 0 else "w"
        majority = "w" if excess > 0 else "b"
        corner = min(h for h in s.half_edges if s.color_at(h) == majority)
        for _ in range(abs(excess) // n):
            s.add_pendant_orbit(corner, minority)
        whites = sorted(h for h, c in s.coloring.items() if c == "w")
        blacks = sorted(h for h, c in s.coloring.items() if c == "b")

    while True:
        data = _matching_data(s)
        match_w = _max_matching(whites, data["adj"])
        if len(match_w) == len(whites):
            edges = frozenset(data["edge_for"][(w, b)] for w, b in match_w.items())
            if not s.changed:
                return tiling, taut, edges
            out = s.tiling()
            report = validate_tiling(out)
            if not report["valid"]:
                raise MatchingStuck("extension produced an invalid tiling: "
                                    + "; ".join(report["problems"]))
            return out, TilingAutomorphism(out, s.perm), edges

        # stuck on actual edges: find an augmenting path allowed to step
        # through co-facial (not yet adjacent) pairs, and realize its first
        # missing edge in the tiling
        adj_plus, corner = _cofacial(s)
        match_b = {b: w for w, b in match_w.items()}

        def path_from(w, seen):
            for b in adj_plus.get(w, []):
                if b in seen:
                    continue
                seen.add(b)
                if b not in match_b:
                    return [(w, b)]
                rest = path_from(match_b[b], seen)
                if rest is not None:
                    return [(w, b)] + rest
            return None

        path = None
        for w in sorted(set(whites) - set(match_w)):
            path = path_from(w, set())
            if path is not None:
                break
        if path is None:
            raise MatchingStuck(
                "no augmenting path exists even through co-facial pairs")
        missing = [(w, b) for (w, b) in path if b not in data["adj"].get(w, [])]
        cw, cb = corner[missing[0]]
        s.add_edge_orbit(cw, cb)


# -- the orbit quiver ----------------------------------------------------------


class OrbitChoice:
    """Per-orbit generator arrows plus a base point for each vertex orbit.

    ``generators`` holds exactly one arrow id per arrow orbit.  ``bases``
    maps each vertex-orbit representative (its minimal vertex) to the orbit
    member where the isomorphism-arrow chain starts.  With
    ``require_common_source`` set, generators whose sources share a vertex
    orbit must share the actual source vertex.
    """

    def __init__(self, generators: Iterable, bases: Mapping,
                 require_common_source: bool = False):
        self.generators = tuple(sorted(set(generators), key=_idkey))
        self.bases = dict(bases)
        self.require_common_source = require_common_source

    def __repr__(self):
        return f"OrbitChoice(generators={list(self.generators)}, bases={self.bases})"


def default_choice(quiver: Quiver, phi: QuiverAutomorphism,
                   bases: Optional[Mapping] = None) -> OrbitChoice:
    """A canonical choice: per arrow orbit, prefer the arrow whose source is
    the base of its source-vertex orbit, then the lowest id."""
    reps = {}
    for orb in phi.vertex_orbits():
        for v in orb:
            reps[v] = orb[0]
    if bases is None:
        bases = {orb[0]: orb[0] for orb in phi.vertex_orbits()}
    generators = []
    for orb in phi.arrow_orbits():
        base = bases[reps[quiver.source(orb[0])]]
        at_base = sorted((a for a in orb if quiver.source(a) == base), key=_idkey)
        generators.append(at_base[0] if at_base else min(orb, key=_idkey))
    return OrbitChoice(generators, bases)


@dataclass
class SemidirectQuiver:
    """The orbit quiver with its grading and provenance.

    ``quiver`` has the original vertices, the chosen generators, and the
    localized isomorphism arrows; ``degree`` grades iso arrows +1 and
    everything else 0.
    """

    quiver: Quiver
    degree: dict
    base: Quiver
    phi: QuiverAutomorphism
    choice: OrbitChoice
    iso_chain: dict      # orbit rep -> iso arrow ids along the chain
    chain_pos: dict      # vertex -> (orbit rep, position from the base)
    gen_of: dict         # arrow of base quiver -> (generator, k), a = phi^k(gen)

    def iso_arrows(self) -> list:
        return [r for chain in self.iso_chain.values() for r in chain]

    def iso_word(self, u, v) -> Word:
        """The unique word of isomorphism arrows (or inverses) from u to v."""
        ru, pu = self.chain_pos[u]
        rv, pv = self.chain_pos[v]
        if ru != rv:
            raise NonComposable(f"{u!r} and {v!r} lie in different vertex orbits")
        chain = self.iso_chain[ru]
        if pu <= pv:
            letters = [(chain[t], 1) for t in range(pv - 1, pu - 1, -1)]
        else:
            letters = [(chain[t], -1) for t in range(pv, pu)]
        return normalize(self.quiver, letters, at=u if not letters else None)

    def xi_arrow(self, a) -> Word:
        gen, _ = self.gen_of[a]
        q = self.iso_word(self.base.source(a), self.base.source(gen))
        p = self.iso_word(self.base.target(gen), self.base.target(a))
        return normalize(self.quiver, p.letters + ((gen, 1),) + q.letters)

    def word_degree(self, w: Word) -> int:
        return sum(e * self.degree.get(a, 0) for a, e in w.letters)

    def arrow_degree(self, a) -> int:
        """Degree of the embedded image of a base-quiver arrow."""
        gen, _ = self.gen_of[a]
        _, ps_a = self.chain_pos[self.base.source(a)]
        _, ps_g = self.chain_pos[self.base.source(gen)]
        _, pt_a = self.chain_pos[self.base.target(a)]
        _, pt_g = self.chain_pos[self.base.target(gen)]
        return (pt_a - pt_g) + (ps_g - ps_a)


def _iso_name(base_vertex, t: int, single: bool) -> str:
    return "r" if single else f"r_{base_vertex}_{t}"


def build_orbit_quiver(quiver: Quiver, phi: QuiverAutomorphism,
                       choice: OrbitChoice) -> SemidirectQuiver:
    """Assemble the orbit quiver for a free vertex action and a valid choice."""
    n = phi.order
    sizes, free = orbit_sizes(quiver, phi)
    if not free:
        bad = sorted((v for v, sz in sizes.items() if sz != n), key=_idkey)
        raise OrbitSizeViolation(f"vertex orbits of size < {n}: {bad}")

    arrow_orbits = phi.arrow_orbits()
    gen_set = set(choice.generators)
    gen_of: dict = {}
    for orb in arrow_orbits:
        picked = [a for a in orb if a in gen_set]
        if len(picked) != 1:
            raise BadChoice(f"arrow orbit {orb} needs exactly one generator, "
                            f"got {picked}")
        gen = picked[0]
        base_idx = orb.index(gen)
        for i, a in enumerate(orb):
            gen_of[a] = (gen, (i - base_idx) % n)
    if gen_set - set(gen_of):
        raise BadChoice(f"unknown generators: "
                        f"{sorted(gen_set - set(gen_of), key=_idkey)}")

    vertex_orbits = phi.vertex_orbits()
    bases = dict(choice.bases)
    if set(bases) != {orb[0] for orb in vertex_orbits}:
        raise BadChoice("bases must be keyed by each vertex-orbit representative")
    chain_pos: dict = {}
    iso_chain: dict = {}
    single = (n - 1) * len(vertex_orbits) == 1
    iso_arrows = []
    for orb in vertex_orbits:
        rep = orb[0]
        b = bases[rep]
        if b not in orb:
            raise BadChoice(f"base {b!r} is not in the orbit of {rep!r}")
        chain = []
        v = b
        for t in range(n):
            chain_pos[v] = (rep, t)
            if t < n - 1:
                name = _iso_name(b, t, single)
                w = phi.apply_vertex(v)
                iso_arrows.append((name, v, w))
                chain.append(name)
                v = w
        iso_chain[rep] = chain

    if choice.require_common_source:
        by_orbit: dict = {}
        for g in choice.generators:
            rep, _ = chain_pos[quiver.source(g)]
            by_orbit.setdefault(rep, set()).add(quiver.source(g))
        offenders = {rep: srcs for rep, srcs in by_orbit.items() if len(srcs) > 1}
        if offenders:
            raise BadChoice(f"generators with differing sources in a vertex "
                            f"orbit: {offenders}")

    arrows = [(g, quiver.source(g), quiver.target(g)) for g in choice.generators]
    arrows += iso_arrows
    q = Quiver(quiver.vertices, arrows, localized=[a for a, _, _ in iso_arrows])
    degree = {a: 0 for a in q.arrow_ids()}
    for a, _, _ in iso_arrows:
        degree[a] = 1
    return SemidirectQuiver(q, degree, quiver, phi, choice, iso_chain,
                            chain_pos, gen_of)


def xi_embed(p, ctx: SemidirectQuiver) -> Word:
    """Embed a path of the base quiver into the orbit quiver.

    ``p`` may be a Word of the base quiver or a sequence of arrow ids in
    written (right-to-left acting) order.
    """
    if isinstance(p, Word):
        letters = p.letters
        if not letters:
            return normalize(ctx.quiver, (), at=p.source)
    else:
        letters = tuple((a, 1) for a in p)
        if not letters:
            raise NonComposable("an empty path needs a Word carrying its vertex")
    out: list = []
    for a, e in letters:
        if e != 1:
            raise NonComposable(f"paths are inverse-free, got {a!r}^{e}")
        if a not in ctx.gen_of:
            raise UnknownArrow(a)
        out.extend(ctx.xi_arrow(a).letters)
    return normalize(ctx.quiver, out)


def word_degree(w: Word, ctx: SemidirectQuiver) -> int:
    """Sum of signed isomorphism-arrow exponents of a normalized word."""
    return ctx.word_degree(w)


def factor_word(w: Word, ctx: SemidirectQuiver) -> tuple[Word, Word]:
    """Split a word of the orbit quiver as ``q . xi(p)``.

    ``q`` is a word in isomorphism arrows only and ``p`` a path of the base
    quiver; when the word's degree vanishes mod the symmetry order, ``q``
    is a constant path and ``w`` lies in the image of the embedding.
    """
    n = ctx.phi.order
    iso = {a for a in ctx.degree if ctx.degree[a] == 1}
    p_letters: list = []
    p_source = w.source
    cur = w
    while True:
        gen_idx = None
        for i in range(len(cur.letters) - 1, -1, -1):
            if cur.letters[i][0] not in iso:
                gen_idx = i
                break
        if gen_idx is None:
            break
        g, e = cur.letters[gen_idx]
        if e != 1 or g not in ctx.choice.generators:
            raise MalformedWord(f"letter {g!r}^{e} is not a generating arrow")
        v0 = cur.source
        if v0 not in ctx.chain_pos or \
                ctx.chain_pos[v0][0] != ctx.chain_pos[ctx.quiver.source(g)][0]:
            raise MalformedWord(
                f"word source {v0!r} is not in the source orbit of {g!r}")
        b = None
        for j in range(n):
            cand = ctx.phi.apply_arrow(g, j)
            if ctx.base.source(cand) == v0:
                b = cand
                break
        if b is None:
            raise MalformedWord(f"no orbit member of {g!r} has source {v0!r}")
        tail = cur.letters[gen_idx + 1:]
        img = ctx.xi_arrow(b)
        if tail and img.letters[-len(tail):] != tail:
            raise MalformedWord(
                f"the iso tail {tail!r} does not match the embedding of {b!r}")
        # cur = rest . xi(b) with xi(b) = p_b . g . tail; drop g and the
        # tail, then undo p_b
        p_b_inv = ctx.iso_word(ctx.base.target(b), ctx.quiver.target(g)).letters
        head = cur.letters[:gen_idx] + p_b_inv
        p_letters.insert(0, (b, 1))
        cur = normalize(ctx.quiver, head,
                        at=ctx.base.target(b) if not head else None)
    if any(letter[0] not in iso for letter in cur.letters):
        raise MalformedWord(f"residue {cur!r} is not an iso-arrow word")
    p = normalize(ctx.base, p_letters,
                  at=p_source if not p_letters else None)
    return cur, p


@dataclass
class TransportResult:
    potential: Potential
    homogeneous: bool
    degree: Optional[int]

    def __iter__(self):
        yield self.potential
        yield self.homogeneous
        yield self.degree


def transport_potential(W: Potential, ctx: SemidirectQuiver) -> TransportResult:
    """Push a base-quiver potential through the embedding.

    Raises ``MixedInverseViolation`` when some isomorphism arrow appears in
    the image with both signs (the common-source condition rules this out).
    Reports whether the image is homogeneous in the iso grading.
    """
    terms = []
    for coeff, cyc in W.terms():
        word = xi_embed([a for a, _ in cyc], ctx)
        terms.append((coeff, word.letters))
    out = Potential.build(ctx.quiver, terms)
    signs: dict = {}
    for _, cyc in out.terms():
        for a, e in cyc:
            if ctx.degree.get(a) == 1:
                signs.setdefault(a, set()).add(1 if e > 0 else -1)
    mixed = sorted(a for a, sgn in signs.items() if len(sgn) == 2)
    if mixed:
        raise MixedInverseViolation(
            f"isomorphism arrows occurring with both signs: {mixed}")
    degs = {sum(e * ctx.degree.get(a, 0) for a, e in cyc)
            for _, cyc in out.terms()}
    homogeneous = len(degs) <= 1
    degree = degs.pop() if len(degs) == 1 else (0 if not degs else None)
    return TransportResult(out, homogeneous, degree)


def choose_homogeneous_xi(tiling: BraneTiling, taut: TilingAutomorphism,
                          dimer: frozenset) -> OrbitChoice:
    """Search for a choice making the transported potential homogeneous.

    Candidates range over one source vertex per vertex orbit (determining
    the generators, hence satisfying the common-source condition) and one
    chain base per vertex orbit.  A candidate is kept when every dimer-dual
    arrow embeds with degree equal to the symmetry order and every other
    arrow with degree 0, then certified by an actual transport.  Raises
    ``NoChoiceFound`` with a search report when the space is exhausted.
    """
    quiver, W = dual_quiver(tiling)
    phi = induced_quiver_automorphism(tiling, taut, quiver)
    n = phi.order
    sizes, free = orbit_sizes(quiver, phi)
    if not free:
        raise OrbitSizeViolation(f"orbit sizes {sizes} (order {n})")
    dimer_duals = {tiling.arrow_name(min(h, k)) for (h, k) in dimer}

    vertex_orbits = phi.vertex_orbits()
    arrow_orbits = phi.arrow_orbits()
    orbit_rep = {}
    for orb in vertex_orbits:
        for v in orb:
            orbit_rep[v] = orb[0]

    want_hit = n if n > 1 else 0
    tried = 0
    option_space = [sorted(orb, key=_idkey) for orb in vertex_orbits]
    for sources in product(*option_space):
        src_of = {orb[0]: sv for orb, sv in zip(vertex_orbits, sources)}
        generators = []
        ok = True
        for orb in arrow_orbits:
            want = src_of[orbit_rep[quiver.source(orb[0])]]
            picked = [a for a in orb if quiver.source(a) == want]
            if len(picked) != 1:
                ok = False
                break
            generators.append(picked[0])
        if not ok:
            continue
        for bases in product(*option_space):
            tried += 1
            base_of = {orb[0]: b for orb, b in zip(vertex_orbits, bases)}
            choice = OrbitChoice(generators, base_of, require_common_source=True)
            ctx = build_orbit_quiver(quiver, phi, choice)
            degs = {a: ctx.arrow_degree(a) for a in quiver.arrow_ids()}
            if any(degs[a] != want_hit for a in dimer_duals):
                continue
            if any(deg != 0 for a, deg in degs.items() if a not in dimer_duals):
                continue
            try:
                res = transport_potential(W, ctx)
            except MixedInverseViolation:
                continue
            if res.homogeneous and res.degree == want_hit:
                return choice
    raise NoChoiceFound(
        f"no admissible choice after {tried} candidates "
        f"(order {n}, {len(vertex_orbits)} vertex orbits, "
        f"{len(arrow_orbits)} arrow orbits, dimer duals {sorted(dimer_duals)})")


@dataclass
class TransportIdentity:
    passed: bool
    witness: Element
    lhs: Element
    rhs: Element


def verify_transport_identity(ctx: SemidirectQuiver, W: Potential,
                              Wp: Potential, a) -> TransportIdentity:
    """Check  a . dWp/da  =  n (xi(c_v) - xi(c_u))  for a generating arrow.

    ``c_v`` and ``c_u`` are the positive/negative cycles of the base
    potential containing ``a``, rotated so that ``a`` is written leftmost.
    The comparison is exact on normalized elements; the witness is the
    difference (zero on success).
    """
    if a not in ctx.choice.generators:
        raise BadChoice(f"{a!r} is not a chosen generating arrow")
    n = ctx.phi.order
    pos = [cyc for coeff, cyc in W.terms() if coeff == 1 and (a, 1) in cyc]
    neg = [cyc for coeff, cyc in W.terms() if coeff == -1 and (a, 1) in cyc]
    if len(pos) != 1 or len(neg) != 1:
        raise ValueError(
            f"{a!r} must lie in exactly one positive and one negative cycle; "
            f"found {len(pos)} and {len(neg)}")

    def a_leftmost(cyc):
        i = cyc.index((a, 1))
        return cyc[i:] + cyc[:i]

    rhs = Element.zero()
    for sign, cyc in ((1, pos[0]), (-1, neg[0])):
        word = xi_embed([x for x, _ in a_leftmost(cyc)], ctx)
        rhs = rhs + Element.from_word(word, sign * n)
    da = cyclic_derivative(ctx.quiver, Wp, a)
    a_word = normalize(ctx.quiver, [(a, 1)])
    lhs = multiply(ctx.quiver, Element.from_word(a_word), da)
    witness = lhs - rhs
    return TransportIdentity(witness.is_zero(), witness, lhs, rhs)


# -- serialization --------------------------------------------------------------


def automorphism_to_json(phi: QuiverAutomorphism) -> dict:
    return {
        "vertex_perm": {str(v): w for v, w in sorted(phi.vertex_perm.items(),
                                                     key=lambda kv: _idkey(kv[0]))},
        "arrow_perm": {str(a): b for a, b in sorted(phi.arrow_perm.items(),
                                                    key=lambda kv: _idkey(kv[0]))},
        "order": phi.order,
    }


def _match_keys(perm: Mapping, pool: Iterable) -> dict:
    """Map JSON string keys back onto actual vertex/arrow ids."""
    by_str = {str(x): x for x in pool}
    out = {}
    for k, v in perm.items():
        if str(k) not in by_str or str(v) not in by_str:
            raise InvalidAutomorphism(f"unknown id in permutation: {k!r} -> {v!r}")
        out[by_str[str(k)]] = by_str[str(v)]
    return out


def quiver_automorphism_from_json(quiver: Quiver, obj: dict) -> QuiverAutomorphism:
    phi = QuiverAutomorphism(
        quiver,
        _match_keys(obj["vertex_perm"], quiver.vertices),
        _match_keys(obj["arrow_perm"], quiver.arrow_ids()),
    )
    if "order" in obj and int(obj["order"]) != phi.order:
        raise InvalidAutomorphism(
            f"declared order {obj['order']} but actual order is {phi.order}")
    return phi


def tiling_automorphism_from_json(tiling: BraneTiling, obj: dict) -> TilingAutomorphism:
    perm = obj["half_edge_perm"] if "half_edge_perm" in obj else obj
    taut = TilingAutomorphism(tiling, {int(k): int(v) for k, v in perm.items()})
    if "order" in obj and int(obj["order"]) != taut.order:
        raise InvalidAutomorphism(
            f"declared order {obj['order']} but actual order is {taut.order}")
    return taut


def orbit_choice_to_json(choice: OrbitChoice) -> dict:
    return {
        "generators": list(choice.generators),
        "bases": {str(k): v for k, v in sorted(choice.bases.items(),
                                               key=lambda kv: _idkey(kv[0]))},
        "require_common_source": choice.require_common_source,
    }


def orbit_choice_from_json(quiver: Quiver, obj: dict) -> OrbitChoice:
    bases = _match_keys(dict(obj["bases"]), quiver.vertices)
    return OrbitChoice(obj["generators"], bases,
                       obj.get("require_common_source", False))
