"""Riemannian primitives on the unit sphere S^2 and the rotation group SO(3).

Tangent vectors are stored in ambient coordinates: a 3-vector orthogonal to
the base point on S^2, and a 3x3 matrix ``V = q @ Omega`` with ``Omega`` skew
on SO(3). The SO(3) metric is ``<A, B> = tr(A^T B) / 2``, under which geodesic
distance is the rotation angle.

Manifold methods broadcast over leading batch axes of their arguments.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

ANTIPODAL_TOL = 1e-6
KARCHER_TOL = 1e-12
KARCHER_MAX_ITER = 200
REPROJECT_TOL = 1e-12
DEFAULT_DT = 1e-5

_SMALL = 1e-4


class LogDomainError(ValueError):
    """Logarithm requested at (or too near) the cut locus."""


class KarcherConvergenceError(ArithmeticError):
    def __init__(self, message, point, residual):
        super().__init__(message)
        self.point = point
        self.residual = residual


# -- small helpers ---------------------------------------------------------

def hat(w):
    """Skew matrix of a 3-vector (batched)."""
    w = np.asarray(w, dtype=float)
    W = np.zeros(w.shape[:-1] + (3, 3))
    W[..., 0, 1], W[..., 0, 2], W[..., 1, 2] = -w[..., 2], w[..., 1], -w[..., 0]
    W[..., 1, 0], W[..., 2, 0], W[..., 2, 1] = w[..., 2], -w[..., 1], w[..., 0]
    return W


def vee(W):
    """3-vector of the skew part of a 3x3 matrix (batched)."""
    W = np.asarray(W, dtype=float)
    return 0.5 * np.stack(
        [W[..., 2, 1] - W[..., 1, 2], W[..., 0, 2] - W[..., 2, 0], W[..., 1, 0] - W[..., 0, 1]], axis=-1
    )


def _sinc(t):
    t2 = t * t
    small = t < _SMALL
    safe = np.where(small, 1.0, t)
    return np.where(small, 1 - t2 / 6 + t2 * t2 / 120, np.sin(safe) / safe)


def _cosc(t):
    # (1 - cos t) / t^2
    t2 = t * t
    small = t < _SMALL
    safe = np.where(small, 1.0, t)
    return np.where(small, 0.5 - t2 / 24 + t2 * t2 / 720, (1 - np.cos(safe)) / (safe * safe))


def _angle_over_sin(theta, s):
    # theta / sin(theta) given both, stable near 0
    t2 = theta * theta
    small = theta < _SMALL
    return np.where(small, 1 + t2 / 6 + 7 * t2 * t2 / 360, theta / np.where(small, 1.0, s))


def rodrigues(w):
    """Rotation matrix ``expm(hat(w))`` in closed form (batched)."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1)[..., None, None]
    K = hat(w)
    return np.eye(3) + _sinc(theta) * K + _cosc(theta) * (K @ K)


def project_rotation(R):
    """Nearest rotation (polar factor) to each 3x3 matrix."""
    U, _, Vt = np.linalg.svd(R)
    D = np.ones(np.shape(R)[:-1])
    D[..., -1] = np.sign(np.linalg.det(U @ Vt))
    return (U * D[..., None, :]) @ Vt


def _is_skew(X, tol=1e-14):
    X = np.asarray(X)
    return X.shape == (3, 3) and np.max(np.abs(X + X.T)) <= tol * max(1.0, np.max(np.abs(X)))


def matrix_exp(X) -> np.ndarray:
    """Matrix exponential; closed form for 3x3 skew input, Pade otherwise."""
    X = np.asarray(X, dtype=float)
    if _is_skew(X):
        return rodrigues(vee(X))
    return expm(X)


def dexp_mathias(X, E) -> np.ndarray:
    """Directional derivative ``d/dt expm(X + tE)`` at ``t = 0``.

    Read off the top-right block of ``expm([[X, E], [0, X]])``.
    """
    X = np.asarray(X, dtype=float)
    E = np.asarray(E, dtype=float)
    n = X.shape[0]
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = X
    block[n:, n:] = X
    block[:n, n:] = E
    return expm(block)[:n, n:]


# -- manifolds -------------------------------------------------------------

class Sphere:
    name = "s2"
    point_shape = (3,)
    tangent_dim = 2
    injectivity_radius = np.pi

    def check(self, p, tol=1e-12):
        return abs(np.linalg.norm(p) - 1.0) <= tol

    def project(self, p):
        p = np.asarray(p, dtype=float)
        return p / np.linalg.norm(p, axis=-1, keepdims=True)

    def inner(self, q, u, v):
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def norm(self, q, v):
        return np.linalg.norm(v, axis=-1)

    def exp(self, q, v):
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        p = np.cos(n) * q + _sinc(n) * v
        return self.project(p)

    def log(self, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        c = np.sum(p * q, axis=-1, keepdims=True)
        u = p - c * q
        s = np.linalg.norm(u, axis=-1, keepdims=True)
        theta = np.arctan2(s, c)
        if np.any(theta > np.pi - ANTIPODAL_TOL):
            raise LogDomainError("sphere log undefined at antipodal point")
        return _angle_over_sin(theta, s) * u

    def dist(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        s = np.linalg.norm(np.cross(p, q), axis=-1)
        return np.arctan2(s, np.sum(p * q, axis=-1))

    def frame(self, q):
        """Orthonormal pair spanning ``T_q S^2``, chosen deterministically."""
        q = np.asarray(q, dtype=float)
        k = int(np.argmax(np.abs(q)))
        a = np.zeros(3)
        a[(k + 1) % 3] = 1.0
        e1 = a - np.dot(a, q) * q
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(q, e1)
        return np.stack([e1, e2])


class SpecialOrthogonal:
    name = "so3"
    point_shape = (3, 3)
    tangent_dim = 3
    injectivity_radius = np.pi

    def check(self, p, tol=1e-10):
        p = np.asarray(p)
        return np.max(np.abs(p.T @ p - np.eye(3))) <= tol and abs(np.linalg.det(p) - 1) <= tol

    def project(self, p):
        p = np.asarray(p, dtype=float)
        err = np.max(np.abs(_t(p) @ p - np.eye(3)), axis=(-2, -1))
        if np.all(err <= REPROJECT_TOL):
            return p
        return np.where((err > REPROJECT_TOL)[..., None, None], project_rotation(p), p)

    def inner(self, q, u, v):
        return 0.5 * np.sum(np.asarray(u) * np.asarray(v), axis=(-2, -1))

    def norm(self, q, v):
        return np.sqrt(self.inner(q, v, v))

    def exp(self, q, v):
        q = np.asarray(q, dtype=float)
        omega = _t(q) @ np.asarray(v, dtype=float)
        return self.project(q @ rodrigues(vee(omega)))

    def log(self, q, p):
        q = np.asarray(q, dtype=float)
        return q @ hat(_so3_log_vec(_t(q) @ np.asarray(p, dtype=float)))

    def dist(self, p, q):
        R = _t(np.asarray(p, dtype=float)) @ np.asarray(q, dtype=float)
        return _rotation_angle(R)

    def frame(self, q):
        """``q`` times the unit generators of rotation about x, y, z."""
        return np.asarray(q, dtype=float) @ hat(np.eye(3))


def _t(A):
    return np.swapaxes(A, -1, -2)


def _rotation_angle(R):
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    s = np.linalg.norm(vee(R), axis=-1)
    return np.arctan2(s, c)


def _so3_log_vec(R):
    w = vee(R)
    s = np.linalg.norm(w, axis=-1, keepdims=True)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1)[..., None] - 1.0)
    theta = np.arctan2(s, c)
    if np.any(theta > np.pi - ANTIPODAL_TOL):
        raise LogDomainError("SO(3) log undefined at rotation angle pi")
    return _angle_over_sin(theta, s) * w


SPHERE = Sphere()
SO3 = SpecialOrthogonal()
MANIFOLDS = {"s2": SPHERE, "so3": SO3}


def manifold_for(point):
    """Infer the manifold from the shape of a point (or batch of points)."""
    shape = np.shape(point)
    if shape[-2:] == (3, 3):
        return SO3
    if shape[-1:] == (3,):
        return SPHERE
    raise ValueError(f"cannot infer manifold from point shape {shape}")


def get_manifold(name):
    try:
        return MANIFOLDS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown manifold {name!r}; choose from {sorted(MANIFOLDS)}") from None


# -- convenience wrappers --------------------------------------------------

def sphere_exp(q, v):
    return SPHERE.exp(q, v)


def sphere_log(q, p):
    return SPHERE.log(q, p)


def so3_expmap(q, omega):
    """``q @ expm(omega)`` for skew ``omega``."""
    q = np.asarray(q, dtype=float)
    return SO3.project(q @ rodrigues(vee(omega)))


def so3_logmap(q, p):
    """Principal skew logarithm of ``q^T p``."""
    return hat(_so3_log_vec(np.asarray(q, dtype=float).T @ np.asarray(p, dtype=float)))


def geodesic_distance(p, q) -> float:
    """Great-circle angle on S^2, rotation angle of ``p^T q`` on SO(3)."""
    return float(manifold_for(p).dist(p, q))


def karcher_mean(points, manifold=None, tol=KARCHER_TOL, max_iter=KARCHER_MAX_ITER):
    """Riemannian barycenter by the fixed-point iteration ``q <- Exp_q(mean Log_q p_j)``.

    Starts from the projected Euclidean mean. Raises
    :class:`KarcherConvergenceError` if the gradient norm is still above
    ``tol`` after ``max_iter`` steps.
    """
    P = np.asarray(points, dtype=float)
    M = manifold or manifold_for(P)
    if P.shape == M.point_shape:
        P = P[None]
    if len(P) == 1:
        return P[0].copy()
    mean = P.mean(axis=0)
    # a vanishing Euclidean mean (e.g. antipodal data) has no projection
    q = M.project(mean) if np.linalg.norm(mean) > 1e-8 else P[0].copy()
    residual = np.inf
    for _ in range(max_iter):
        step = M.log(q, P).mean(axis=0)
        residual = float(M.norm(q, step))
        if residual <= tol:
            return q
        q = M.exp(q, step)
    # the last step may already have landed inside tolerance
    residual = float(M.norm(q, M.log(q, P).mean(axis=0)))
    if residual <= tol:
        return q
    raise KarcherConvergenceError(
        f"Karcher mean did not converge in {max_iter} iterations (residual {residual:.3e})", q, residual
    )


def transport_derivative(q0, p, v, dt=DEFAULT_DT, manifold=None):
    """Central-difference approximation of ``d(Log_q0)_p [v]``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    M = manifold or manifold_for(q0)
    v = np.asarray(v, dtype=float)
    plus = M.log(q0, M.exp(p, dt * v))
    minus = M.log(q0, M.exp(p, -dt * v))
    return (plus - minus) / (2 * dt)
