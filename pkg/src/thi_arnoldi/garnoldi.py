"""Confluent multivariate Vandermonde with G-Arnoldi.

Stacked layout
--------------
A column of the stacked evaluation holds, for ``m`` points, the value block
(``m`` rows), then ``d`` blocks of first partials, then the second partials
``d_11, d_12, ..., d_1d, d_22, ..., d_dd``; within each block rows run over the
points. Internally a column is kept as a ``(stacked_dim, m)`` array, whose
C-order ravel is exactly this layout, so row ``slot * m + node`` is the entry
for ``node`` in derivative ``slot``.

The G-inner product with ``G = L^T L`` is computed on the observed rows only;
neither ``G`` nor the monomial Vandermonde matrix is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .polybasis import DerivativeOrder, MonomialBasis

BREAKDOWN_RTOL = 1e-14
REORTH_PASSES = 2


class BreakdownError(ArithmeticError):
    """The constant column has zero G-norm, so no basis can be built."""


@dataclass(frozen=True, eq=False)
class SelectionSpec:
    """Which ``(node, slot)`` entries of the stacked evaluation are observed.

    The order of ``observed`` fixes the order of the observation vector ``b``.
    """

    node_count: int
    deriv: DerivativeOrder
    observed: tuple[tuple[int, int], ...]

    def __post_init__(self):
        m, dt = self.node_count, self.deriv.stacked_dim
        for node, slot in self.observed:
            if not (0 <= node < m and 0 <= slot < dt):
                raise ValueError(f"observed entry {(node, slot)} out of range for m={m}, slots={dt}")

    @classmethod
    def full(cls, node_count: int, deriv: DerivativeOrder) -> "SelectionSpec":
        """Observe every row, in stacked order (``L = I``)."""
        obs = tuple((j, s) for s in range(deriv.stacked_dim) for j in range(node_count))
        return cls(node_count, deriv, obs)

    @classmethod
    def slots(cls, node_count: int, deriv: DerivativeOrder, slots: Sequence[int]) -> "SelectionSpec":
        """Observe the listed derivative slots at every node."""
        obs = tuple((j, s) for s in slots for j in range(node_count))
        return cls(node_count, deriv, obs)

    @property
    def rows(self) -> np.ndarray:
        m = self.node_count
        return np.array([s * m + j for j, s in self.observed], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.observed)


@dataclass(frozen=True)
class XOperator:
    """Multiplication by ``x_coord`` acting on a stacked derivative vector.

    ``coord`` is 1-based. ``point`` is the evaluation point in R^d.
    """

    coord: int
    point: np.ndarray
    deriv: DerivativeOrder

    def matrix(self) -> np.ndarray:
        """Dense lower-triangular form. Only for inspection and tests."""
        n = self.deriv.stacked_dim
        return np.column_stack([apply_x_operator(self, e) for e in np.eye(n)])


def _apply_x(block: np.ndarray, xu: np.ndarray, u: int, deriv: DerivativeOrder) -> np.ndarray:
    # block: (stacked_dim, m); xu: (m,); u: 0-based coordinate
    out = block * xu
    if deriv.order >= 1:
        out[1 + u] += block[0]
    if deriv.order == 2:
        for slot, j, k in deriv.second_slots():
            if j == u:
                out[slot] += block[1 + k]
            if k == u:
                out[slot] += block[1 + j]
    return out


def apply_x_operator(op: XOperator, stacked) -> np.ndarray:
    """Apply ``X_u`` to one stacked vector without building the matrix."""
    v = np.asarray(stacked, dtype=float)
    if v.shape != (op.deriv.stacked_dim,):
        raise ValueError(f"expected stacked vector of length {op.deriv.stacked_dim}, got shape {v.shape}")
    x = np.asarray(op.point, dtype=float)
    u = op.coord - 1
    return _apply_x(v[:, None], np.array([x[u]]), u, op.deriv)[:, 0]


@dataclass(eq=False)
class GArnoldiModel:
    """Result of the fitting stage.

    ``rmat`` is the ``t x t`` upper-triangular recurrence matrix. ``qmat`` is
    the ``(m * stacked_dim) x t`` G-orthonormal basis at the training nodes;
    it is ``None`` for models restored from disk, which can still evaluate.
    """

    basis: MonomialBasis
    deriv: DerivativeOrder
    rmat: np.ndarray
    qmat: Optional[np.ndarray] = None
    selection: Optional[SelectionSpec] = None

    @property
    def rank(self) -> int:
        return self.rmat.shape[0]


def fit(nodes, basis: MonomialBasis, selection: SelectionSpec) -> GArnoldiModel:
    """Fitting stage: G-orthonormalise ``x_u q_s`` column by column.

    Each new column is orthogonalised twice against all previous ones. If its
    G-norm falls to ``BREAKDOWN_RTOL`` times the norm before orthogonalisation
    the rank is truncated there and fitting stops.
    """
    X = np.atleast_2d(np.asarray(nodes, dtype=float))
    m, d = X.shape
    if d != basis.dim:
        raise ValueError(f"nodes have dimension {d}, basis has {basis.dim}")
    if selection.node_count != m:
        raise ValueError(f"selection is for {selection.node_count} nodes, got {m}")
    deriv = selection.deriv
    if deriv.dim != d:
        raise ValueError("selection derivative order has the wrong dimension")
    nd = deriv.stacked_dim
    g = basis.size
    rows = selection.rows

    Q = np.zeros((g, nd * m))
    R = np.zeros((g, g))

    q = np.zeros(nd * m)
    q[:m] = 1.0  # constant polynomial: value 1, all derivatives 0
    norm = np.linalg.norm(q[rows])
    if norm == 0.0:
        raise BreakdownError("constant column has zero G-norm; no function values observed")
    R[0, 0] = norm
    Q[0] = q / norm

    t = g
    for i in range(1, g):
        s, u = basis.src[i], basis.coord[i]
        q = _apply_x(Q[s].reshape(nd, m), X[:, u], u, deriv).ravel()
        knorm = np.linalg.norm(q[rows])
        for _ in range(REORTH_PASSES):
            h = Q[:i][:, rows] @ q[rows]
            q -= h @ Q[:i]
            R[:i, i] += h
        qn = np.linalg.norm(q[rows])
        if qn <= BREAKDOWN_RTOL * knorm:
            t = i
            break
        R[i, i] = qn
        Q[i] = q / qn

    return GArnoldiModel(
        basis=basis,
        deriv=deriv,
        rmat=R[:t, :t].copy(),
        qmat=np.ascontiguousarray(Q[:t].T),
        selection=selection,
    )


def _evaluate(model: GArnoldiModel, S: np.ndarray, deriv: DerivativeOrder) -> np.ndarray:
    # returns (t, stacked_dim, n_queries)
    R = model.rmat
    t = model.rank
    nd = deriv.stacked_dim
    n = S.shape[0]
    E = np.zeros((t, nd, n))
    E[0, 0] = 1.0 / R[0, 0]
    src, coord = model.basis.src, model.basis.coord
    for i in range(1, t):
        s, u = src[i], coord[i]
        w = _apply_x(E[s], S[:, u], u, deriv)
        # einsum sums per output entry in a fixed order, so results do not
        # depend on how queries are batched
        w -= np.einsum("k,ksn->sn", R[:i, i], E[:i])
        E[i] = w / R[i, i]
    return E


def _as_queries(queries, dim: int) -> np.ndarray:
    S = np.asarray(queries, dtype=float)
    if S.ndim != 2:
        S = S.reshape(-1, dim)
    if S.shape[1] != dim:
        raise ValueError(f"queries have dimension {S.shape[1]}, model has {dim}")
    return S


def evaluate_basis(model: GArnoldiModel, queries, order: Optional[int] = None) -> np.ndarray:
    """Evaluation stage: the stacked basis at new points.

    Returns an array of shape ``(n_queries * stacked_dim, t)`` in the stacked
    layout described in the module docstring. ``order`` defaults to the
    derivative order the model was fitted with.
    """
    deriv = model.deriv if order is None else DerivativeOrder(order, model.basis.dim)
    S = _as_queries(queries, model.basis.dim)
    E = _evaluate(model, S, deriv)
    return E.reshape(model.rank, -1).T


def solve_coefficients(model: GArnoldiModel, observations) -> np.ndarray:
    """Least-squares coefficients ``c = (L Q)^T b``.

    ``observations`` follows the order of ``model.selection.observed``; a 2-D
    array fits several right-hand sides at once.
    """
    if model.qmat is None or model.selection is None:
        raise ValueError("model has no training basis; it was restored without Q")
    b = np.asarray(observations, dtype=float)
    rows = model.selection.rows
    if b.shape[0] != len(rows):
        raise ValueError(f"expected {len(rows)} observations, got {b.shape[0]}")
    return model.qmat[rows].T @ b


def predict(model: GArnoldiModel, coeffs, queries, order: Optional[int] = None) -> np.ndarray:
    """Values and partials of ``sum_i c_i xi_i`` at each query.

    Returns shape ``(n_queries, stacked_dim)`` for a coefficient vector, or
    ``(n_queries, stacked_dim, k)`` for a ``(t, k)`` coefficient matrix.
    """
    deriv = model.deriv if order is None else DerivativeOrder(order, model.basis.dim)
    c = np.asarray(coeffs, dtype=float)
    if c.shape[0] != model.rank:
        raise ValueError(f"expected {model.rank} coefficients, got {c.shape[0]}")
    S = _as_queries(queries, model.basis.dim)
    E = _evaluate(model, S, deriv)
    if c.ndim == 1:
        return np.einsum("t,tsn->ns", c, E)
    return np.einsum("tk,tsn->nsk", c, E)


def orthogonality_error(model: GArnoldiModel) -> float:
    """``max |(LQ)^T (LQ) - I|`` for a freshly fitted model."""
    A = model.qmat[model.selection.rows]
    return float(np.max(np.abs(A.T @ A - np.eye(model.rank))))
