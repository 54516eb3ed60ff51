import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radlimit.quadrature import (FOUR_PI, angular_average, angular_flux, build_quadrature,
                                 reflect, reflection_map)

RULES = [(2, 4), (4, 8), (8, 8), (6, 12)]


@pytest.mark.parametrize("rule", RULES)
def test_moments(rule):
    q = build_quadrature(*rule)
    assert np.max(np.abs(np.linalg.norm(q.nodes, axis=1) - 1)) <= 1e-14
    m = q.moment_errors()
    assert m["zeroth"] <= 1e-12
    assert np.max(m["first"]) <= 1e-12
    assert np.max(m["second"]) <= 1e-12


def test_small_rule_size():
    q = build_quadrature(2, 4)
    assert q.size == 8
    assert q.total_weight == pytest.approx(4 * np.pi, abs=1e-12)


def test_second_moment_against_fine_rule():
    coarse = build_quadrature(4, 8)
    fine = build_quadrature(64, 128)
    ref = np.sum(fine.weights * fine.nodes[:, 0] ** 2)
    assert np.sum(coarse.weights * coarse.nodes[:, 0] ** 2) == pytest.approx(ref, abs=1e-12)
    assert ref == pytest.approx(FOUR_PI / 3, abs=1e-12)


@pytest.mark.parametrize("bad", [(1, 4), (4, 2), (4, 7)])
def test_rejects(bad):
    with pytest.raises(ValueError):
        build_quadrature(*bad)


def test_angular_average_examples():
    q = build_quadrature(4, 8)
    assert angular_average(np.ones(q.size), q) == pytest.approx(FOUR_PI, abs=1e-12)
    assert abs(angular_average(q.nodes[:, 0], q)) <= 1e-12
    assert angular_average(q.nodes[:, 0] ** 2, q) == pytest.approx(FOUR_PI / 3, abs=1e-12)
    with pytest.raises(ValueError):
        angular_average(np.ones(q.size + 1), q)


def test_angular_flux_examples():
    q = build_quadrature(4, 8)
    np.testing.assert_allclose(angular_flux(np.full(q.size, 2.5), q), 0, atol=1e-12)
    np.testing.assert_allclose(angular_flux(q.nodes[:, 1], q), [0, FOUR_PI / 3, 0], atol=1e-12)
    np.testing.assert_allclose(angular_flux(3 + q.nodes[:, 0], q), [FOUR_PI / 3, 0, 0], atol=1e-12)


def test_reflect_examples():
    np.testing.assert_allclose(reflect([-0.6, 0.8, 0.0], [1, 0, 0]), [0.6, 0.8, 0.0])
    beta = np.array([0.0, 0.6, 0.8])
    np.testing.assert_array_equal(reflect(beta, [1, 0, 0]), beta)
    with pytest.raises(ValueError):
        reflect([1.0, 1.0, 0.0], [1, 0, 0])


unit = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 0.1).map(lambda v: np.array(v) / np.linalg.norm(v))


@given(unit, unit)
def test_reflect_involution(beta, n):
    np.testing.assert_allclose(reflect(reflect(beta, n), n), beta, atol=1e-14)


@pytest.mark.parametrize("axis", [0, 1, 2])
@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_reflection_map(axis, sign):
    q = build_quadrature(4, 8)
    n = np.zeros(3)
    n[axis] = sign
    perm = reflection_map(q, n)
    assert sorted(perm) == list(range(q.size))
    np.testing.assert_array_equal(perm[perm], np.arange(q.size))
    np.testing.assert_array_equal(q.weights[perm], q.weights)
    for k in range(q.size):
        np.testing.assert_allclose(q.nodes[perm[k]], reflect(q.nodes[k], n), atol=1e-12)


def test_reflection_map_azimuth_indices():
    q = build_quadrature(4, 8)
    perm = reflection_map(q, [1.0, 0.0, 0.0])
    # phi -> pi - phi keeps the polar index; azimuth index j -> n_az/2 - 1 - j (mod n_az)
    for i in range(4):
        for j in range(8):
            assert perm[i * 8 + j] == i * 8 + (8 // 2 - 1 - j) % 8


def test_reflection_map_rejects_oblique():
    with pytest.raises(ValueError):
        reflection_map(build_quadrature(2, 4), np.array([1.0, 1.0, 0.0]) / np.sqrt(2))
