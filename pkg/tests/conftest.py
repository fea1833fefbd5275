import numpy as np
import pytest
from scipy.spatial.transform import Rotation

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_rotation(rng):
    return Rotation.random(random_state=rng.integers(2**31)).as_matrix()


def random_sphere_point(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_sphere_tangent(rng, q, norm):
    v = rng.normal(size=3)
    v -= np.dot(v, q) * q
    return v * (norm / np.linalg.norm(v))


def random_skew(rng, angle=None):
    w = rng.normal(size=3)
    if angle is not None:
        w *= angle / np.linalg.norm(w)
    return np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])


def monomial_stack(exponents, points, order):
    """Explicit confluent Vandermonde ``(m * stacked_dim, g)`` from exponent vectors.

    Straight from the power rule; shares no code with the Arnoldi path.
    """
    E = np.asarray(exponents)
    X = np.atleast_2d(np.asarray(points, dtype=float))
    m, d = X.shape

    def deriv_block(alpha_shift):
        # coefficient * x^(alpha - shift), column per monomial
        coef = np.ones(len(E))
        reduced = E.copy()
        for j in alpha_shift:
            coef = coef * reduced[:, j]
            reduced[:, j] = np.maximum(reduced[:, j] - 1, 0)
        return coef * np.prod(X[:, None, :] ** reduced[None, :, :], axis=2)

    blocks = [deriv_block([])]
    if order >= 1:
        blocks += [deriv_block([j]) for j in range(d)]
    if order == 2:
        blocks += [deriv_block([j, k]) for j in range(d) for k in range(j, d)]
    return np.vstack(blocks)
