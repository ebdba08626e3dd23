"""Quadrature rules on triangles and edges.

Triangle rules are given in barycentric coordinates with weights that sum
to 1 (multiply by the element area). Edge rules live on [0, 1] with
weights summing to 1 (multiply by the edge length).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class Rule:
    points: np.ndarray  # (q, 3) barycentric for triangles, (q,) in [0, 1] for edges
    weights: np.ndarray  # (q,)
    degree: int


@dataclass(frozen=True)
class Quadrature:
    """Triangle rule, edge rule and corner-subdivision depth."""

    triangle: Rule
    edge: Rule
    corner_levels: int = 3


def _symmetric_6pt() -> Rule:
    # Strang-Fix / Dunavant degree-4 rule
    a1, w1 = 0.445948490915965, 0.223381589678011
    a2, w2 = 0.091576213509771, 0.109951743655322
    pts, wts = [], []
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [(a, a, b), (a, b, a), (b, a, a)]
        wts += [w, w, w]
    w = np.array(wts)
    return Rule(np.array(pts), w / w.sum(), 4)


def collapsed_gauss(order: int) -> Rule:
    """Duffy-collapsed tensor Gauss rule, exact to degree ``2*order - 2``.

    Independent of the symmetric rules; used as a reference in tests.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    # (u, v) in unit square -> (s, t) = (u, v(1-u)) in the reference triangle
    s = u.ravel()
    t = (v * (1.0 - u)).ravel()
    wt = (wu * wv * (1.0 - u)).ravel() * 2.0  # reference area is 1/2
    bary = np.column_stack([1.0 - s - t, s, t])
    return Rule(bary, wt, 2 * order - 2)


def triangle_rule(degree: int = 4) -> Rule:
    if degree <= 1:
        return Rule(np.full((1, 3), 1.0 / 3.0), np.ones(1), 1)
    if degree == 2:
        a = 1.0 / 6.0
        pts = np.array([[1 - 2 * a, a, a], [a, 1 - 2 * a, a], [a, a, 1 - 2 * a]])
        return Rule(pts, np.full(3, 1.0 / 3.0), 2)
    if degree <= 4:
        return _symmetric_6pt()
    return collapsed_gauss(degree // 2 + 1)


def edge_rule(npoints: int = 3) -> Rule:
    x, w = np.polynomial.legendre.leggauss(npoints)
    return Rule(0.5 * (x + 1.0), 0.5 * w, 2 * npoints - 1)


def default_quadrature(degree: int = 4, edge_points: int = 3, corner_levels: int = 3) -> Quadrature:
    return Quadrature(triangle_rule(degree), edge_rule(edge_points), corner_levels)


@lru_cache(maxsize=32)
def _corner_rule_cached(base_key: tuple, corner: int, levels: int) -> tuple[np.ndarray, np.ndarray]:
    pts, wts = np.array(base_key[0]), np.array(base_key[1])
    out_p, out_w = [], []
    tri = np.eye(3)  # vertices of the current sub-triangle in barycentric coords
    scale = 1.0
    for _ in range(levels):
        m01 = 0.5 * (tri[0] + tri[1])
        m12 = 0.5 * (tri[1] + tri[2])
        m20 = 0.5 * (tri[2] + tri[0])
        children = [
            np.array([tri[0], m01, m20]),
            np.array([m01, tri[1], m12]),
            np.array([m20, m12, tri[2]]),
            np.array([m12, m20, m01]),
        ]
        keep = children.pop(corner)  # the child that still touches the corner
        for ch in children:
            out_p.append(pts @ ch)
            out_w.append(wts * scale / 4.0)
        tri = keep
        scale /= 4.0
    out_p.append(pts @ tri)
    out_w.append(wts * scale)
    return np.vstack(out_p), np.concatenate(out_w)


def corner_rule(rule: Rule, corner: int, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule graded geometrically towards local vertex ``corner``."""
    key = (tuple(map(tuple, rule.points)), tuple(rule.weights))
    return _corner_rule_cached(key, corner, levels)
