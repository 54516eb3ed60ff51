import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radlimit.core import (BCMode, KineticState, Params, constant_boundary, face_boundary,
                           make_grid, well_prepared_init)


def test_make_grid_1d_centers():
    g = make_grid(1, [4], [1.0], [True])
    assert g.spacing[0] == pytest.approx(0.25)
    np.testing.assert_allclose(g.centers(0), [0.125, 0.375, 0.625, 0.875], rtol=0, atol=1e-15)


def test_make_grid_2d_volume():
    assert make_grid(2, [2, 2], [1.0, 2.0], [False, False]).cell_volume == pytest.approx(0.5)


def test_make_grid_3d_counts():
    g = make_grid(3, [8, 8, 8], [1, 1, 1], [True, True, True])
    assert g.n_cells == 512
    assert g.cell_volume == pytest.approx(1 / 512)


@pytest.mark.parametrize("args", [
    (1, [4, 4], [1.0], [True]),       # length mismatch
    (4, [4] * 4, [1.0] * 4, [True] * 4),
    (1, [1], [1.0], [True]),          # too few cells
    (1, [4], [0.0], [True]),
])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


@given(dim=st.integers(1, 3), data=st.data())
def test_volumes_sum_to_box(dim, data):
    cells = data.draw(st.lists(st.integers(2, 9), min_size=dim, max_size=dim))
    ext = data.draw(st.lists(st.floats(0.1, 10.0), min_size=dim, max_size=dim))
    g = make_grid(dim, cells, ext, [False] * dim)
    assert g.cell_volume * g.n_cells == pytest.approx(np.prod(ext), rel=1e-12)


def test_bc_mode_consistency():
    g = make_grid(1, [4], [1.0], [True])
    g.check_bc_mode("torus")
    with pytest.raises(ValueError):
        g.check_bc_mode("dirichlet")
    with pytest.raises(ValueError):
        make_grid(1, [4], [1.0], [False]).check_bc_mode(BCMode.TORUS)


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(epsilon=0.1, alpha=1.0),
                                dict(epsilon=0.1, alpha=0.0), dict(epsilon=0.1, robin_r=-1.0),
                                dict(epsilon=0.1, bc_mode="slab")])
def test_params_invalid(kw):
    with pytest.raises(ValueError):
        Params(**kw)


def test_boundary_faces_geometry():
    g = make_grid(2, [3, 4], [1.0, 2.0], [False, False])
    faces = g.boundary_faces()
    assert [f.name for f in faces] == ["x-", "x+", "y-", "y+"]
    assert faces[1].points[..., 0] == pytest.approx(1.0)
    assert faces[2].area == pytest.approx(1.0 / 3.0)
    np.testing.assert_array_equal(faces[0].normal, [-1.0, 0.0, 0.0])


@pytest.mark.parametrize("t0, expected", [(1.0, 1.0), (2.0, 16.0)])
def test_well_prepared_uniform(t0, expected):
    g = make_grid(1, [5], [1.0], [True])
    s = well_prepared_init(np.full(5, t0), g, 8)
    assert np.all(s.intensity == expected)


def test_well_prepared_sine_spot_check():
    g = make_grid(1, [16], [1.0], [True])
    x = g.centers(0)
    s = well_prepared_init(1 + 0.1 * np.sin(2 * np.pi * x), g, 4)
    k = 5
    val = 1 + 0.1 * np.sin(2 * np.pi * (k + 0.5) / 16)
    assert s.intensity[k, 2] == pytest.approx(val * val * val * val, rel=1e-15)


@given(arrays(np.float64, 7, elements=st.floats(0, 50)))
def test_well_prepared_exact(T0):
    g = make_grid(1, [7], [1.0], [True])
    s = well_prepared_init(T0, g, 6)
    assert np.max(np.abs(s.intensity - (s.temperature ** 4)[:, None])) == 0.0


def test_well_prepared_rejects_negative():
    g = make_grid(1, [3], [1.0], [True])
    with pytest.raises(ValueError):
        well_prepared_init(np.array([1.0, -0.1, 1.0]), g, 4)
    with pytest.raises(ValueError):
        well_prepared_init(np.array([1.0, np.nan, 1.0]), g, 4)


def test_state_shape_checks():
    g = make_grid(1, [3], [1.0], [True])
    with pytest.raises(ValueError):
        KineticState(0.0, np.ones(4), np.ones((3, 2)), g)
    with pytest.raises(ValueError):
        KineticState(0.0, np.ones(3), np.ones((4, 2)), g)


def test_boundary_data_checks():
    pts = np.zeros((1, 1))
    nodes = np.eye(3)
    constant_boundary(2.0).check(pts, nodes)
    with pytest.raises(ValueError):
        constant_boundary(0.0)
    b = face_boundary({"x-": 1.0, "x+": 2.0}, [1.0])
    np.testing.assert_array_equal(b.t_boundary(0.0, np.array([[0.0], [1.0]])), [1.0, 2.0])
    assert b.psi_boundary(0.0, np.array([[1.0]]), nodes).tolist() == [[16.0] * 3]
