import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formcalc.errors import NotDetermining, NotUnisolvent
from formcalc.exterior import comass_batch
from formcalc.fitting import (
    BumpForm,
    CurrentConfig,
    OpNormOptions,
    bump_geometry,
    core_average,
    form_rows,
    gram,
    interpolate,
    kernel,
    lagrange_basis,
    mollifier,
    operator_norm_lower_bound,
    orthonormal_from_gram,
    orthonormalize,
    project,
    riesz_representer,
    scalar_product,
    smooth_step,
    vandermonde,
)
from formcalc.lebesgue import EstimatorOptions, lebesgue_estimate
from formcalc.simplicial import AveragingCurrent, Body, OrientedSimplex, sample_simplex_vertices
from formcalc.spaces import BarycentricFrame, PolyForm, face_currents, polynomial_basis, random_polyform, whitney_basis


def point_currents(nodes):
    return [AveragingCurrent(OrientedSimplex([[float(x)]])) for x in nodes]


def whitney_config(n, k):
    frame = BarycentricFrame.reference(n)
    return CurrentConfig.unit(face_currents(frame, k), whitney_basis(frame, k)), frame.body


def random_config(rng, n, k, r, extra=0, weighted=True):
    """Random simplices in the reference simplex; retried until determining."""
    space = polynomial_basis(n, k, r)
    E = Body.reference_simplex(n)
    while True:
        verts = sample_simplex_vertices(E, k, rng, space.dim + extra)
        currents = [AveragingCurrent(OrientedSimplex(v, int(s)))
                    for v, s in zip(verts, rng.choice([-1, 1], len(verts)))]
        w = rng.uniform(0.5, 2.0, len(currents)) if weighted else np.ones(len(currents))
        cfg = CurrentConfig(tuple(currents), w, space)
        try:
            fb = orthonormalize(cfg)
        except NotDetermining:
            continue
        if np.linalg.cond(fb.gram) < 1e8:
            return cfg, fb, E


CONFIG_SHAPES = [(1, 0, 3), (2, 0, 2), (2, 1, 1), (2, 2, 1), (3, 1, 1), (3, 2, 0)]


# --------------------------------------------------------------------------- Vandermonde and Gram


@pytest.mark.parametrize("n, k", [(2, 0), (2, 1), (2, 2), (3, 1), (3, 2)])
def test_whitney_vandermonde_is_identity(n, k):
    cfg, _ = whitney_config(n, k)
    assert np.allclose(vandermonde(cfg), np.eye(cfg.N), atol=1e-12)
    assert np.allclose(gram(cfg), np.eye(cfg.N), atol=1e-12)


def test_point_evaluation_vandermonde():
    cfg = CurrentConfig.unit(point_currents([0, 1]), polynomial_basis(1, 0, 1))
    assert np.allclose(vandermonde(cfg), [[1, 0], [1, 1]])


def test_random_edges_full_rank(rng):
    space = polynomial_basis(2, 1, 1)
    verts = sample_simplex_vertices(Body.reference_simplex(2), 1, rng, 6)
    cfg = CurrentConfig.unit([AveragingCurrent(OrientedSimplex(v)) for v in verts], space)
    assert np.linalg.matrix_rank(vandermonde(cfg)) == 6


def test_gram_brute_force(rng):
    cfg, _, _ = random_config(rng, 2, 1, 1, extra=3)
    V = vandermonde(cfg)
    G = np.zeros((cfg.N, cfg.N))
    for i in range(cfg.M):
        for a in range(cfg.N):
            for b in range(cfg.N):
                G[a, b] += cfg.weights[i] * V[i, a] * V[i, b]
    assert np.allclose(gram(cfg, V), G, atol=1e-13)


def test_nonpositive_weights_rejected():
    with pytest.raises(ValueError):
        CurrentConfig(tuple(point_currents([0, 1])), np.array([1.0, 0.0]), polynomial_basis(1, 0, 1))


# --------------------------------------------------------------------------- orthonormalization


def test_identity_gram_keeps_basis():
    cfg, _ = whitney_config(2, 1)
    assert np.allclose(orthonormalize(cfg).ortho, np.eye(3), atol=1e-12)


def test_diagonal_gram_scaling():
    assert np.allclose(orthonormal_from_gram(np.diag([4.0, 9.0])), np.diag([1 / 2, 1 / 3]))


@pytest.mark.parametrize("n, k, r", CONFIG_SHAPES)
def test_eta_orthonormal(rng, n, k, r):
    cfg, fb, _ = random_config(rng, n, k, r, extra=2)
    H = fb.ortho
    assert np.allclose(H.T @ fb.gram @ H, np.eye(cfg.N), atol=1e-10)
    # through the scalar product itself
    etas = [cfg.space.form(H[:, h]) for h in range(cfg.N)]
    assert scalar_product(cfg, etas[0], etas[0]) == pytest.approx(1.0, abs=1e-9)
    if cfg.N > 1:
        assert scalar_product(cfg, etas[0], etas[1]) == pytest.approx(0.0, abs=1e-9)


def test_not_determining():
    cfg = CurrentConfig.unit(point_currents([0.3]), polynomial_basis(1, 0, 1))
    with pytest.raises(NotDetermining):
        orthonormalize(cfg)
    repeated = CurrentConfig.unit(point_currents([0.3, 0.3, 0.3]), polynomial_basis(1, 0, 2))
    with pytest.raises(NotDetermining):
        orthonormalize(repeated)


def test_kernel_symmetric(rng):
    cfg, fb, _ = random_config(rng, 2, 1, 1, extra=2)
    K = kernel(fb).matrix
    assert np.allclose(K, K.T)
    assert np.allclose(K, np.linalg.inv(fb.gram), rtol=1e-8, atol=1e-10)


# --------------------------------------------------------------------------- projection and interpolation


@pytest.mark.parametrize("n, k, r", CONFIG_SHAPES)
def test_projection_reproduces_space(rng, n, k, r):
    cfg, fb, _ = random_config(rng, n, k, r, extra=3)
    c = rng.standard_normal(cfg.N)
    assert np.allclose(project(cfg, fb, cfg.space.form(c)), c, atol=1e-10)


@pytest.mark.parametrize("n, k, r", CONFIG_SHAPES)
def test_projection_idempotent(rng, n, k, r):
    cfg, fb, _ = random_config(rng, n, k, r, extra=3)
    omega = random_polyform(n, k, r + 2, rng)
    c1 = project(cfg, fb, omega)
    c2 = project(cfg, fb, cfg.space.form(c1))
    assert np.allclose(c1, c2, atol=1e-10)


def test_whitney_projection_of_basis_form():
    cfg, _ = whitney_config(2, 1)
    fb = orthonormalize(cfg)
    for a in range(3):
        assert np.allclose(project(cfg, fb, cfg.space.basis[a]), np.eye(3)[a], atol=1e-12)


def test_projection_beats_random_competitors(rng):
    cfg, fb, _ = random_config(rng, 2, 1, 1, extra=4)
    omega = random_polyform(2, 1, 3, rng)
    q = cfg.quad()
    data = form_rows(omega, cfg.currents, q)
    V = fb.vandermonde

    def residual(c):
        return float(np.sum(cfg.weights * (data - V @ c) ** 2))

    best = residual(project(cfg, fb, omega))
    for _ in range(100):
        assert best <= residual(rng.standard_normal(cfg.N)) + 1e-12


def test_interpolate_x_squared():
    cfg = CurrentConfig.unit(point_currents([0, 1]), polynomial_basis(1, 0, 1))
    omega = PolyForm(1, 0, [[2]], [[1.0]])
    assert np.allclose(interpolate(cfg, omega), [0.0, 1.0], atol=1e-14)


@pytest.mark.parametrize("n, k, r", CONFIG_SHAPES)
def test_interpolation_conditions(rng, n, k, r):
    cfg, fb, _ = random_config(rng, n, k, r)
    omega = random_polyform(n, k, r + 2, rng)
    c = interpolate(cfg, omega)
    q = cfg.quad()
    assert np.allclose(form_rows(cfg.space.form(c), cfg.currents, q), form_rows(omega, cfg.currents, q), atol=1e-9)
    assert np.allclose(interpolate(cfg, cfg.space.form(c)), c, atol=1e-9)


def test_whitney_interpolant_uses_face_averages(rng):
    cfg, _ = whitney_config(2, 1)
    omega = random_polyform(2, 1, 3, rng)
    expected = [T.values(omega.values, cfg.quad()) for T in cfg.currents]
    assert np.allclose(interpolate(cfg, omega), expected, atol=1e-12)


@pytest.mark.parametrize("n, k, r", CONFIG_SHAPES)
def test_projection_equals_interpolation_when_square(rng, n, k, r):
    cfg, fb, _ = random_config(rng, n, k, r, weighted=False)
    omega = random_polyform(n, k, r + 2, rng)
    assert np.allclose(project(cfg, fb, omega), interpolate(cfg, omega), atol=1e-9)


def test_interpolation_needs_square_system(rng):
    cfg, _, _ = random_config(rng, 2, 1, 1, extra=1)
    with pytest.raises(NotUnisolvent):
        interpolate(cfg, cfg.space.basis[0])
    singular = CurrentConfig.unit(point_currents([0.5, 0.5]), polynomial_basis(1, 0, 1))
    with pytest.raises(NotUnisolvent):
        lagrange_basis(singular)


def test_lagrange_basis_of_two_nodes():
    cfg = CurrentConfig.unit(point_currents([0, 1]), polynomial_basis(1, 0, 1))
    # columns: 1 - x and x
    assert np.allclose(lagrange_basis(cfg), [[1, 0], [-1, 1]])


def test_lagrange_identity_for_whitney():
    cfg, _ = whitney_config(3, 1)
    assert np.allclose(lagrange_basis(cfg), np.eye(cfg.N), atol=1e-12)


@pytest.mark.parametrize("n, k, r", CONFIG_SHAPES)
def test_lagrange_duality_and_scaling(rng, n, k, r):
    cfg, _, _ = random_config(rng, n, k, r)
    L = lagrange_basis(cfg)
    V = vandermonde(cfg)
    assert np.allclose(V @ L, np.eye(cfg.N), atol=1e-9)
    scaled = L / np.sqrt(cfg.weights)[None, :]
    assert np.allclose(scaled.T @ gram(cfg, V) @ scaled, np.eye(cfg.N), atol=1e-9)


# --------------------------------------------------------------------------- Riesz representers


def test_riesz_of_whitney_face():
    cfg, _ = whitney_config(2, 1)
    fb = orthonormalize(cfg)
    for i, T in enumerate(cfg.currents):
        assert np.allclose(riesz_representer(fb, T, cfg.space), np.eye(3)[i], atol=1e-12)


def test_riesz_of_annihilating_current():
    space = polynomial_basis(2, 1, 0)
    dx_only = PolyForm(2, 1, [[0, 0]], [[1.0, 0.0]])
    from formcalc.spaces import FormSpace

    sub = FormSpace((dx_only,), "dx")
    cfg = CurrentConfig.unit([AveragingCurrent(OrientedSimplex([[0, 0], [1, 0]]))], sub)
    fb = orthonormalize(cfg)
    T = AveragingCurrent(OrientedSimplex([[0.5, 0], [0.5, 1]]))
    assert np.allclose(riesz_representer(fb, T, sub), 0.0)
    assert space.dim == 2


@pytest.mark.parametrize("n, k, r", CONFIG_SHAPES)
def test_riesz_reproducing(rng, n, k, r):
    cfg, fb, E = random_config(rng, n, k, r, extra=2)
    T = AveragingCurrent(OrientedSimplex(sample_simplex_vertices(E, k, rng, 1)[0]))
    K = cfg.space.form(riesz_representer(fb, T, cfg.space))
    q = cfg.quad()
    for v in cfg.space.basis:
        assert scalar_product(cfg, v, K) == pytest.approx(T.values(v.values, q), abs=1e-9)


# --------------------------------------------------------------------------- bump forms


def test_profiles():
    assert mollifier(np.array([0.0]))[0] == 1.0
    assert np.all(mollifier(np.array([-1.0, 1.0, 2.0])) == 0.0)
    assert np.all(smooth_step(np.array([0.5, 1.0])) == 0.0)
    assert np.all(smooth_step(np.array([2.0, 3.0])) == 1.0)
    t = np.linspace(1, 2, 11)
    assert np.all(np.diff(smooth_step(t)) >= 0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_core_average_against_sampling(k):
    rng = np.random.default_rng(k)
    lam = rng.dirichlet(np.ones(k + 1), 400_000)
    mc = smooth_step(lam.min(axis=1) / 0.05).mean()
    assert core_average(k, 0.05) == pytest.approx(mc, abs=3e-3)


@settings(max_examples=25)
@given(seed=st.integers(0, 10_000))
def test_bump_form_has_unit_zero_norm(seed):
    cfg, E = whitney_config(2, 1)
    radius, a = bump_geometry(cfg, OpNormOptions(delta=0.05))
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], 3)
    bump = BumpForm(2, 1, tuple(T.support for T in cfg.currents), signs, radius, 0.05)
    pts = E.sample(rng, 500)
    assert comass_batch(bump.values(pts), 2, 1).max() <= 1 + 1e-12
    # action on each support, by a dense midpoint rule along the edge
    t = (np.arange(20_000) + 0.5) / 20_000
    for i, T in enumerate(cfg.currents):
        v = T.support.vertices
        along = bump.values(v[0] + t[:, None] * (v[1] - v[0])) @ T.support.orientation
        assert along.mean() == pytest.approx(signs[i] * a[i], abs=1e-6)


def test_overlapping_supports_disable_bumps():
    space = polynomial_basis(2, 1, 0)
    currents = [AveragingCurrent(OrientedSimplex([[0, 0], [1, 0]])),
                AveragingCurrent(OrientedSimplex([[0.5, -0.5], [0.5, 0.5]]))]
    assert bump_geometry(CurrentConfig.unit(currents, space), OpNormOptions()) is None


# --------------------------------------------------------------------------- operator norm


def test_opnorm_one_dimensional_space():
    space = polynomial_basis(1, 0, 0)
    cfg = CurrentConfig.unit(point_currents([0.4]), space)
    fb = orthonormalize(cfg)
    E = Body.simplex([[0.0], [1.0]])
    assert operator_norm_lower_bound(cfg, fb, E) >= 1 - 1e-9


def test_opnorm_nodal_approaches_lebesgue_constant():
    from .oracles import nodal_lebesgue_max

    nodes = [0.0, 0.5, 1.0]
    cfg = CurrentConfig.unit(point_currents(nodes), polynomial_basis(1, 0, 2))
    fb = orthonormalize(cfg)
    E = Body.simplex([[0.0], [1.0]])
    lb = operator_norm_lower_bound(cfg, fb, E)
    oracle, _ = nodal_lebesgue_max(nodes)
    assert lb <= oracle + 1e-9
    assert lb == pytest.approx(oracle, rel=1e-3)


def test_opnorm_close_to_lebesgue_on_whitney():
    cfg, E = whitney_config(2, 1)
    fb = orthonormalize(cfg)
    est = lebesgue_estimate(cfg, fb, E, EstimatorOptions())
    lb = operator_norm_lower_bound(cfg, fb, E, estimate=est)
    assert lb <= est.value + 1e-6
    assert lb >= 0.95 * est.value
