import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddflow import kernels
from ddflow.checks import skew_values
from ddflow.discretization import Discretization
from ddflow.fem import forms
from ddflow.fem.mesh import build_unit_square_mesh
from ddflow.fem.quadrature import collapsed_gauss, dunavant6, rule
from ddflow.model import ModelError, default_boussinesq_model


def test_mesh_counts_n2():
    m = build_unit_square_mesh(2)
    assert (m.num_triangles, m.num_vertices, m.num_edges) == (8, 9, 16)
    assert m.boundary_edges.shape[0] == 8
    assert m.signed_areas().min() > 0


@pytest.mark.parametrize("n", [1, 3, 7])
def test_mesh_euler_and_area(n):
    m = build_unit_square_mesh(n)
    assert m.num_vertices - m.num_edges + m.num_triangles == 1
    assert np.isclose(m.signed_areas().sum(), 1.0)
    assert m.boundary_edges.shape[0] == 4 * n
    assert set(np.unique(m.boundary_markers)) == {1, 2, 3, 4}


def test_mesh_rejects_zero():
    with pytest.raises(ValueError):
        build_unit_square_mesh(0)


def _monomial_integral(a, b):
    # int over the reference triangle of x^a y^b
    from math import factorial
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("q", [dunavant6(), collapsed_gauss(6), collapsed_gauss(9)])
def test_quadrature_exactness(q):
    x, y = q.xy.T
    for a in range(q.degree + 1):
        for b in range(q.degree + 1 - a):
            assert abs(q.weights @ (x ** a * y ** b) - _monomial_integral(a, b)) < 1e-14


def test_rule_selects_dunavant():
    assert rule(6).points.shape[0] == 12


@pytest.fixture(scope="module")
def disc():
    return Discretization(4, default_boussinesq_model(D=[[1.0, 0.1], [0.2, 1.0]]))


def test_space_sizes(disc):
    m = disc.mesh
    assert disc.V.dof_count == 2 * (m.num_vertices + m.num_edges)
    assert disc.Q.dof_count == m.num_vertices
    assert disc.C.dof_count == 2 * m.num_triangles
    assert disc.V.kind == "P2-vector" and disc.Y.kind == "P2-scalar"
    assert disc.Q.kind == "P1-scalar-zero-mean"


def test_p2_reproduces_quadratics(disc):
    f = lambda x, y: 1 + x - 2 * y + 3 * x * y + x * x - y * y   # noqa: E731
    c = disc.P2.interpolate(f)
    xq = disc.geometry.xq
    assert np.abs(disc.P2.evaluate(c) - f(xq[..., 0], xq[..., 1])).max() < 1e-13


def test_mass_and_stiffness_identities(disc):
    one = np.ones(disc.n2)
    assert np.isclose(one @ (disc.M2 @ one), 1.0)
    assert np.abs(disc.K2 @ one).max() < 1e-12
    x = disc.P2.interpolate(lambda x, y: x)
    assert np.isclose(x @ (disc.K2 @ x), 1.0)


def test_divergence_free_field_in_kernel_of_b(disc):
    v = disc.V.interpolate(lambda x, y: (x, -y))
    assert np.abs(disc.B @ v).max() < 1e-14


def test_b_pairs_with_gradient(disc):
    # -(q, div v) with q = 1, v = (x, 0) equals -|Omega|
    v = disc.V.interpolate(lambda x, y: (x, 0 * y))
    assert np.isclose(np.ones(disc.np_) @ (disc.B @ v), -1.0)


class _BadD:
    D = np.array([[1.0, 0.0], [0.0, -1.0]])


def test_ay_rejects_indefinite_d(disc):
    with pytest.raises(ModelError):
        forms.assemble_ay(disc.Y, _BadD())


def test_control_matrix_integrates_cells(disc):
    U = np.tile([1.0, 2.0], (disc.mesh.num_triangles, 1))
    load = disc.control_load(U)
    ones = np.ones(disc.n2)
    assert np.isclose(ones @ load[:disc.n2], 1.0)
    assert np.isclose(ones @ load[disc.n2:], 2.0)


def test_lifting_matches_linear_boundary_data():
    d = Discretization(4, default_boussinesq_model(yD=lambda x, y: (x, 0.5 * y)))
    exact = d.Y.interpolate(lambda x, y: (x, 0.5 * y))
    assert np.abs(d.y_lift - exact).max() < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_skew_forms_vanish_on_diagonal(disc, seed):
    rng = np.random.default_rng(seed)
    w, v, s = (rng.standard_normal(disc.nu_) for _ in range(3))
    c, cy, scale = skew_values(disc, w, v, s)
    assert abs(c) <= 1e-12 * scale and abs(cy) <= 1e-12 * scale


def test_backends_agree(disc):
    rng = np.random.default_rng(0)
    wq = rng.standard_normal((5, 12))
    a, b = rng.standard_normal((5, 12, 6)), rng.standard_normal((5, 12, 3))
    pos = rng.integers(0, 7, 30)
    vals = rng.standard_normal(30)
    ref = kernels.BACKEND
    out = {}
    for name in ("python", "cython"):
        try:
            kernels.use_backend(name)
        except ImportError:
            pytest.skip("compiled extension not built")
        out[name] = (kernels.local_matrices(wq, a, b), kernels.local_vectors(wq, a),
                     kernels.scatter_add(pos.astype(np.int64), vals, 7))
    kernels.use_backend(ref)
    for x, y in zip(out["python"], out["cython"]):
        assert np.allclose(x, y, rtol=1e-14, atol=1e-14)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
