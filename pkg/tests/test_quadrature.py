import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qamr.quadrature import collapsed_gauss, corner_rule, edge_rule, triangle_rule


def _monomial_exact(a: int, b: int) -> float:
    # integral of s^a t^b over the reference triangle, divided by its area 1/2
    from math import factorial

    return 2.0 * factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", [1, 2, 4])
def test_triangle_rule_exactness(degree):
    rule = triangle_rule(degree)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(rule.weights > 0)
    s, t = rule.points[:, 1], rule.points[:, 2]
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            assert rule.weights @ (s**a * t**b) == pytest.approx(_monomial_exact(a, b), abs=1e-12)


@given(st.integers(0, 6), st.integers(0, 6))
def test_collapsed_gauss_matches_monomials(a, b):
    rule = collapsed_gauss(7)
    s, t = rule.points[:, 1], rule.points[:, 2]
    assert rule.weights @ (s**a * t**b) == pytest.approx(_monomial_exact(a, b), rel=1e-12)


def test_edge_rule_gauss():
    r = edge_rule(3)
    assert r.weights.sum() == pytest.approx(1.0)
    for p in range(6):
        assert r.weights @ r.points**p == pytest.approx(1.0 / (p + 1), abs=1e-14)


@settings(deadline=None)
@given(st.integers(0, 2), st.integers(0, 5))
def test_corner_rule_is_a_partition(corner, levels):
    pts, w = corner_rule(triangle_rule(4), corner, levels)
    assert w.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(pts.sum(axis=1), 1.0)
    # still exact for degree-4 polynomials
    s, t = pts[:, 1], pts[:, 2]
    assert w @ (s**2 * t**2) == pytest.approx(_monomial_exact(2, 2), abs=1e-13)


def test_corner_grading_converges_on_corner_singularity():
    # integral of r^(-2/3) over the reference triangle with the singular point at vertex 0
    from scipy.integrate import quad

    def f(bary):
        x, y = bary[:, 1], bary[:, 2]
        return (x * x + y * y) ** (-1 / 3)

    # polar oracle: int_0^{pi/2} (3/4) R(th)^{4/3} dth with R = 1/(cos + sin), over area 1/2
    ref = 2.0 * quad(lambda th: 0.75 * (np.cos(th) + np.sin(th)) ** (-4 / 3), 0, np.pi / 2)[0]
    base = collapsed_gauss(8)
    errors = [abs(base.weights @ f(base.points) - ref)]
    for levels in (3, 6, 10):
        pts, w = corner_rule(base, 0, levels)
        errors.append(abs(w @ f(pts) - ref))
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 1e-6
