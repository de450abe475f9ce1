"""Shared fixtures: the genus-2 running example at each level."""

from __future__ import annotations

import pytest

from tessella.pathalg import Potential, Quiver, parse_letters


def genus2_quiver() -> Quiver:
    """Dual quiver of the bundled genus-2 tiling: a,b loops at 1; c,d,e: 1->2;
    f,g,h: 2->1; i,j loops at 2."""
    arrows = [("a", 1, 1), ("b", 1, 1),
              ("c", 1, 2), ("d", 1, 2), ("e", 1, 2),
              ("f", 2, 1), ("g", 2, 1), ("h", 2, 1),
              ("i", 2, 2), ("j", 2, 2)]
    return Quiver([1, 2], arrows)


def genus2_potential(q: Quiver) -> Potential:
    terms = [(1, "abfjie"), (1, "gc"), (1, "hd"),
             (-1, "agic"), (-1, "bhjd"), (-1, "fe")]
    return Potential.build(q, [(c, [a for a, _ in parse_letters(w)])
                               for c, w in terms])


def orbit_quiver() -> Quiver:
    """The order-2 orbit quiver: generators a,b (loops at 1), c,d,e: 1->2,
    and the localized isomorphism arrow r: 2->1."""
    arrows = [("a", 1, 1), ("b", 1, 1),
              ("c", 1, 2), ("d", 1, 2), ("e", 1, 2),
              ("r", 2, 1)]
    return Quiver([1, 2], arrows, localized=["r"])


def orbit_potential(q: Quiver) -> Potential:
    terms = [(1, "abreabre"), (2, "rdrc"), (-2, "ardbrc"), (-1, "rere")]
    return Potential.build(q, [(c, [a for a, _ in parse_letters(w)])
                               for c, w in terms])


@pytest.fixture
def q2():
    return genus2_quiver()


@pytest.fixture
def w2(q2):
    return genus2_potential(q2)


@pytest.fixture
def qp():
    return orbit_quiver()


@pytest.fixture
def wp(qp):
    return orbit_potential(qp)
