import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import random_rotation, random_skew, random_sphere_point, random_sphere_tangent
from thi_arnoldi import experiments as ex
from thi_arnoldi.manifolds import (
    SO3,
    SPHERE,
    KarcherConvergenceError,
    LogDomainError,
    dexp_mathias,
    geodesic_distance,
    hat,
    karcher_mean,
    matrix_exp,
    project_rotation,
    so3_expmap,
    so3_logmap,
    sphere_exp,
    sphere_log,
    transport_derivative,
    vee,
)

Z = np.array([0.0, 0.0, 1.0])
RZ90 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


# -- sphere ------------------------------------------------------------------

def test_sphere_quarter_circle():
    assert np.allclose(sphere_exp(Z, [np.pi / 2, 0, 0]), [1, 0, 0], atol=1e-15)
    assert np.allclose(sphere_log(Z, np.array([1.0, 0, 0])), [np.pi / 2, 0, 0], atol=1e-15)


def test_sphere_zero_cases():
    assert np.array_equal(sphere_exp(Z, np.zeros(3)), Z)
    assert np.array_equal(sphere_log(Z, Z), np.zeros(3))


def test_sphere_antipodal_log_raises():
    with pytest.raises(LogDomainError):
        sphere_log(Z, -Z)


def test_sphere_round_trip(rng):
    for _ in range(20):
        q = random_sphere_point(rng)
        v = random_sphere_tangent(rng, q, 0.3)
        assert np.max(np.abs(sphere_log(q, sphere_exp(q, v)) - v)) <= 1e-12


def test_sphere_frame_orthonormal(rng):
    for _ in range(10):
        q = random_sphere_point(rng)
        F = SPHERE.frame(q)
        assert np.allclose(F @ F.T, np.eye(2), atol=1e-15)
        assert np.allclose(F @ q, 0, atol=1e-15)
        assert np.array_equal(F, SPHERE.frame(q.copy()))


# -- SO(3) -------------------------------------------------------------------

def test_so3_zero_and_quarter_turn():
    q = project_rotation(RZ90 @ expm(hat([0.1, 0.2, 0.3])))
    assert np.allclose(so3_expmap(q, np.zeros((3, 3))), q, atol=1e-15)
    R = so3_expmap(np.eye(3), hat([0, 0, np.pi / 2]))
    assert np.allclose(R[:, 0], [0, 1, 0], atol=1e-15)
    assert np.allclose(R, RZ90, atol=1e-15)


def test_so3_round_trip_against_expm(rng):
    for _ in range(20):
        q = random_rotation(rng)
        W = random_skew(rng, 0.4)
        p = so3_expmap(q, W)
        assert np.max(np.abs(p - q @ expm(W))) <= 1e-12
        assert np.max(np.abs(so3_logmap(q, p) - W)) <= 1e-12


def test_so3_log_cut_locus_raises():
    flip = np.diag([1.0, -1.0, -1.0])
    with pytest.raises(LogDomainError):
        so3_logmap(np.eye(3), flip)


def test_so3_batched_exp_log(rng):
    q = random_rotation(rng)
    V = np.stack([q @ random_skew(rng, a) for a in (0.1, 1.0, 2.5)])
    P = SO3.exp(q, V)
    assert P.shape == (3, 3, 3)
    assert np.allclose(SO3.log(q, P), V, atol=1e-12)
    # batched bases, one tangent vector at each
    Q = np.stack([random_rotation(rng) for _ in range(3)])
    VQ = np.stack([Qi @ random_skew(rng, 1.3) for Qi in Q])
    assert np.allclose(SO3.log(Q, SO3.exp(Q, VQ)), VQ, atol=1e-12)


def test_so3_frame_orthonormal(rng):
    q = random_rotation(rng)
    F = SO3.frame(q)
    G = np.array([[SO3.inner(q, a, b) for b in F] for a in F])
    assert np.allclose(G, np.eye(3), atol=1e-15)


def test_small_angle_log_accuracy():
    for a in (1e-3, 1e-6, 1e-9, 0.0):
        W = hat([a, -2 * a, 0.5 * a])
        assert np.allclose(so3_logmap(np.eye(3), expm(W)), W, atol=1e-15, rtol=1e-12)


def test_near_pi_log_accuracy():
    w = np.array([1.0, 2.0, -0.5])
    w *= (np.pi - 1e-4) / np.linalg.norm(w)
    assert np.allclose(vee(so3_logmap(np.eye(3), expm(hat(w)))), w, atol=1e-10)


def test_reprojection_only_when_needed(rng):
    R = random_rotation(rng)
    assert np.array_equal(SO3.project(R), R)
    noisy = R + 1e-9 * rng.normal(size=(3, 3))
    fixed = SO3.project(noisy)
    assert np.max(np.abs(fixed.T @ fixed - np.eye(3))) <= 1e-15


# -- matrix exponential and its derivative ----------------------------------

def test_rodrigues_matches_expm(rng):
    for _ in range(20):
        W = random_skew(rng, rng.uniform(0, 3))
        assert np.max(np.abs(matrix_exp(W) - expm(W))) <= 1e-13
    A = rng.normal(size=(3, 3))
    assert np.allclose(matrix_exp(A), expm(A), atol=1e-13)


def test_dexp_at_zero_is_identity(rng):
    E = rng.normal(size=(3, 3))
    assert np.allclose(dexp_mathias(np.zeros((3, 3)), E), E, atol=1e-15)


def test_dexp_commuting(rng):
    X = random_skew(rng, 1.1)
    assert np.allclose(dexp_mathias(X, X), expm(X) @ X, atol=1e-13)


def test_dexp_matches_central_difference(rng):
    h = 1e-5
    for _ in range(100):
        X, E = random_skew(rng), random_skew(rng)
        fd = (expm(X + h * E) - expm(X - h * E)) / (2 * h)
        assert np.max(np.abs(dexp_mathias(X, E) - fd)) <= 1e-6


# -- Karcher mean ------------------------------------------------------------

def test_karcher_single_point(rng):
    p = random_sphere_point(rng)
    assert np.array_equal(karcher_mean([p]), p)
    R = random_rotation(rng)
    assert np.array_equal(karcher_mean(R), R)


def test_karcher_two_points_is_midpoint(rng):
    a = random_sphere_point(rng)
    b = sphere_exp(a, random_sphere_tangent(rng, a, 1.2))
    q = karcher_mean([a, b])
    la, lb = sphere_log(q, a), sphere_log(q, b)
    assert abs(np.linalg.norm(la) - np.linalg.norm(lb)) <= 1e-10
    assert np.max(np.abs(la + lb)) <= 1e-10


def test_karcher_benchmark_fixed_point():
    P = np.stack([ex.so3_simple(w)[0] for w in ex.TABLES[1].plan.grid()])
    assert len(P) == 49
    q = karcher_mean(P)
    grad = SO3.log(q, P).mean(axis=0)
    assert SO3.norm(q, grad) <= 1e-10


def test_karcher_equivariance(rng):
    q = random_rotation(rng)
    P = np.stack([SO3.exp(q, q @ random_skew(rng, 0.5)) for _ in range(9)])
    g = random_rotation(rng)
    assert np.allclose(karcher_mean(g @ P), g @ karcher_mean(P), atol=1e-11)
    s = random_sphere_point(rng)
    S = np.stack([sphere_exp(s, random_sphere_tangent(rng, s, 0.6)) for _ in range(9)])
    assert np.allclose(karcher_mean(S @ g.T), karcher_mean(S) @ g.T, atol=1e-11)


def test_karcher_non_convergence_reports_point(rng):
    s = random_sphere_point(rng)
    S = np.stack([sphere_exp(s, random_sphere_tangent(rng, s, 1.0)) for _ in range(5)])
    with pytest.raises(KarcherConvergenceError) as info:
        karcher_mean(S, max_iter=1)
    assert info.value.point.shape == (3,)
    assert info.value.residual > 1e-12


# -- derivative transport ----------------------------------------------------

def test_transport_zero_vector(rng):
    q0 = random_rotation(rng)
    p = SO3.exp(q0, q0 @ random_skew(rng, 0.7))
    assert np.allclose(transport_derivative(q0, p, np.zeros((3, 3))), 0, atol=1e-15)


def test_transport_at_base_is_identity(rng):
    q0 = random_sphere_point(rng)
    v = random_sphere_tangent(rng, q0, 0.8)
    assert np.max(np.abs(transport_derivative(q0, q0, v) - v)) <= 1e-9
    R = random_rotation(rng)
    V = R @ random_skew(rng, 0.8)
    assert np.max(np.abs(transport_derivative(R, R, V) - V)) <= 1e-9


@pytest.mark.parametrize("manifold", ["s2", "so3"])
def test_transport_second_order_in_dt(manifold, rng):
    if manifold == "s2":
        q0 = random_sphere_point(rng)
        p = sphere_exp(q0, random_sphere_tangent(rng, q0, 1.0))
        v = random_sphere_tangent(rng, p, 3.0)
    else:
        q0 = random_rotation(rng)
        p = SO3.exp(q0, q0 @ random_skew(rng, 1.0))
        v = p @ random_skew(rng, 3.0)
    D = {h: transport_derivative(q0, p, v, dt=h) for h in (1e-3, 5e-4, 2.5e-4)}
    limit = (4 * D[2.5e-4] - D[5e-4]) / 3
    ratio = np.linalg.norm(D[1e-3] - limit) / np.linalg.norm(D[5e-4] - limit)
    assert 3.5 <= ratio <= 4.5


# -- distance ----------------------------------------------------------------

def test_geodesic_distance_examples():
    assert geodesic_distance(Z, Z) == 0.0
    assert geodesic_distance(Z, -Z) == pytest.approx(np.pi)
    assert geodesic_distance(np.eye(3), RZ90) == pytest.approx(np.pi / 2, abs=1e-15)
    assert geodesic_distance(np.eye(3), np.eye(3)) == 0.0


def test_sphere_distance_small_angle_accuracy():
    a = 1e-9
    p = np.array([np.sin(a), 0.0, np.cos(a)])
    assert geodesic_distance(Z, p) == pytest.approx(a, rel=1e-12)


# -- properties --------------------------------------------------------------

unit = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1)
radius = st.floats(0.0, 0.9 * np.pi)


@settings(max_examples=100, deadline=None)
@given(unit, unit, radius)
def test_sphere_identities(qa, va, r):
    q = np.array(qa) / np.linalg.norm(qa)
    v = np.array(va) - np.dot(va, q) * q
    if np.linalg.norm(v) < 1e-3:
        return
    v *= r / np.linalg.norm(v)
    p = sphere_exp(q, v)
    assert np.max(np.abs(sphere_log(q, p) - v)) <= 1e-11
    assert np.max(np.abs(sphere_exp(q, sphere_log(q, p)) - p)) <= 1e-11
    assert abs(geodesic_distance(q, p) - r) <= 1e-11


@settings(max_examples=100, deadline=None)
@given(unit, unit, radius)
def test_so3_identities(qa, wa, r):
    q = expm(hat(qa))
    w = np.array(wa) * (r / np.linalg.norm(wa))
    p = so3_expmap(q, hat(w))
    assert np.max(np.abs(so3_logmap(q, p) - hat(w))) <= 1e-11
    assert np.max(np.abs(so3_expmap(q, so3_logmap(q, p)) - p)) <= 1e-11
    assert abs(geodesic_distance(q, p) - r) <= 1e-11
