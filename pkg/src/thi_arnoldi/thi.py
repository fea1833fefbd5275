"""Tangent-space Hermite interpolation of manifold-valued data.

Samples are pulled back to the tangent space at their Karcher mean, each
tangent coordinate is fitted with a shared G-Arnoldi polynomial basis, and
predictions are pushed forward with the exponential map.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import garnoldi
from .garnoldi import GArnoldiModel, SelectionSpec
from .manifolds import DEFAULT_DT, get_manifold, karcher_mean, manifold_for, transport_derivative
from .polybasis import DerivativeOrder, enumerate_basis

MODEL_FORMAT = "thi-arnoldi-model"
MODEL_VERSION = 1
THREADS_ENV = "THI_EVAL_THREADS"
FD_STEP = 1e-4


@dataclass
class ManifoldSample:
    """One datum: parameter ``omega``, point ``p = f(omega)`` and optionally
    the partials ``d_i f(omega)`` as ambient tangent vectors at ``p``."""

    omega: np.ndarray
    p: np.ndarray
    derivs: Optional[Sequence[np.ndarray]] = None

    def __post_init__(self):
        self.omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        self.p = np.asarray(self.p, dtype=float)
        if self.derivs is not None:
            self.derivs = [np.asarray(v, dtype=float) for v in self.derivs]
            if len(self.derivs) != len(self.omega):
                raise ValueError(f"expected {len(self.omega)} derivative vectors, got {len(self.derivs)}")


@dataclass(eq=False)
class ThiModel:
    manifold_name: str
    base: np.ndarray
    frame: np.ndarray  # (tangent_dim, *point_shape), orthonormal in the manifold metric
    garnoldi: GArnoldiModel
    coeffs: np.ndarray  # (tangent_dim, rank)

    @property
    def manifold(self):
        return get_manifold(self.manifold_name)

    @property
    def tangent_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def rank(self) -> int:
        return self.garnoldi.rank


def _coords(M, q0, frame, V):
    # frame coordinates of tangent vectors V (batched)
    return np.stack([M.inner(q0, f, V) for f in frame], axis=-1)


def _from_coords(frame, C):
    return np.tensordot(C, frame, axes=([-1], [0]))


def thi_fit(
    samples: Sequence[ManifoldSample],
    degree: int,
    use_derivatives: bool = True,
    frame=None,
    dt: float = DEFAULT_DT,
) -> ThiModel:
    """Fit a tangent-space polynomial model to manifold samples.

    Parameters
    ----------
    samples : sequence of ManifoldSample
        Training data; all points must lie within the injectivity radius of
        their Karcher mean.
    degree : int
        Total degree of the polynomial basis.
    use_derivatives : bool
        Include the transported partials as observations. When False the same
        basis is fitted to function values only.
    frame : array, optional
        Orthonormal tangent frame at the base point. Defaults to the
        manifold's deterministic frame.
    dt : float
        Step of the central difference that transports derivatives.
    """
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    P = np.stack([s.p for s in samples])
    omegas = np.stack([s.omega for s in samples])
    k, d = omegas.shape
    M = manifold_for(P)

    q0 = karcher_mean(P, M)
    F = M.frame(q0) if frame is None else np.asarray(frame, dtype=float)
    if F.shape != (M.tangent_dim,) + M.point_shape:
        raise ValueError(f"frame has shape {F.shape}, expected {(M.tangent_dim,) + M.point_shape}")

    W = _coords(M, q0, F, M.log(q0, P))  # (k, tdim)
    blocks = [W]
    deriv = DerivativeOrder(1, d)
    if use_derivatives:
        if any(s.derivs is None for s in samples):
            raise ValueError("use_derivatives requires derivative data on every sample")
        for i in range(d):
            V = np.stack([s.derivs[i] for s in samples])
            blocks.append(_coords(M, q0, F, transport_derivative(q0, P, V, dt, M)))
        selection = SelectionSpec.full(k, deriv)
    else:
        selection = SelectionSpec.slots(k, deriv, [0])
    b = np.concatenate(blocks, axis=0)

    model = garnoldi.fit(omegas, enumerate_basis(d, degree), selection)
    coeffs = garnoldi.solve_coefficients(model, b).T
    return ThiModel(M.name, q0, F, model, coeffs)


def _eval_threads(workers):
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def tangent_eval(model: ThiModel, queries, order: int = 0, workers=None) -> np.ndarray:
    """Stacked tangent coordinates at each query, shape ``(n, stacked_dim, tangent_dim)``."""
    Sq = np.asarray(queries, dtype=float).reshape(-1, model.garnoldi.basis.dim)
    nthreads = _eval_threads(workers)
    if nthreads == 1 or len(Sq) < 2 * nthreads:
        return garnoldi.predict(model.garnoldi, model.coeffs.T, Sq, order=order)
    chunks = np.array_split(Sq, nthreads)
    with ThreadPoolExecutor(nthreads) as pool:
        parts = pool.map(lambda c: garnoldi.predict(model.garnoldi, model.coeffs.T, c, order=order), chunks)
        return np.concatenate(list(parts), axis=0)


def thi_eval(model: ThiModel, queries, derivatives: bool = False, dt: float = DEFAULT_DT, workers=None):
    """Evaluate the manifold interpolant at parameter points.

    Returns the predicted points, shape ``(n, *point_shape)``. With
    ``derivatives=True`` also returns the partials as ambient tangent vectors,
    shape ``(n, d, *point_shape)``, obtained by pushing the polynomial
    Jacobian through ``Exp`` with central differences.
    """
    M = model.manifold
    d = model.garnoldi.basis.dim
    Sq = np.asarray(queries, dtype=float).reshape(-1, d)
    stacked = tangent_eval(model, Sq, order=1 if derivatives else 0, workers=workers)
    w = _from_coords(model.frame, stacked[:, 0, :])
    points = M.exp(model.base, w) if len(Sq) else np.zeros((0,) + M.point_shape)
    if not derivatives:
        return points
    parts = []
    for i in range(d):
        J = _from_coords(model.frame, stacked[:, 1 + i, :])
        parts.append((M.exp(model.base, w + dt * J) - M.exp(model.base, w - dt * J)) / (2 * dt))
    dpoints = np.stack(parts, axis=1) if len(Sq) else np.zeros((0, d) + M.point_shape)
    return points, dpoints


def _truth_points(truth_fn: Callable, omegas) -> np.ndarray:
    out = []
    for w in omegas:
        r = truth_fn(w)
        out.append(r[0] if isinstance(r, tuple) else r)
    return np.stack(out)


def error_report(model: ThiModel, truth_fn: Callable, test_grid, fd_step: float = FD_STEP) -> dict:
    """Error metrics of ``model`` against ``truth_fn`` on ``test_grid``.

    ``avg_err``/``max_err`` are geodesic distances; ``fd_err_d{i}`` is the
    largest entrywise gap between central differences of truth and model
    along ``e_i`` (``_mean`` variants average the per-point Euclidean gap
    over the grid instead); ``tangent_sup_err`` is the largest tangent-space gap
    ``|w_hat - Log_q0 f|``.
    """
    M = model.manifold
    grid = np.asarray(test_grid, dtype=float)
    d = grid.shape[1]
    truth = _truth_points(truth_fn, grid)
    pred = thi_eval(model, grid)
    dist = M.dist(truth, pred)
    frob = np.sqrt(np.sum((truth - pred) ** 2, axis=tuple(range(1, truth.ndim))))

    w_hat = _from_coords(model.frame, tangent_eval(model, grid)[:, 0, :])
    w_true = M.log(model.base, truth)
    tangent_gap = M.norm(model.base, w_hat - w_true)

    report = {
        "avg_err": float(np.mean(dist)),
        "max_err": float(np.max(dist)),
        "avg_frobenius_err": float(np.mean(frob)),
        "max_frobenius_err": float(np.max(frob)),
        "tangent_sup_err": float(np.max(tangent_gap)),
    }
    for i in range(d):
        e = np.zeros(d)
        e[i] = fd_step
        fd_true = (_truth_points(truth_fn, grid + e) - _truth_points(truth_fn, grid - e)) / (2 * fd_step)
        fd_model = (thi_eval(model, grid + e) - thi_eval(model, grid - e)) / (2 * fd_step)
        gap = np.abs(fd_true - fd_model).reshape(len(grid), -1)
        report[f"fd_err_d{i + 1}"] = float(np.max(gap))
        report[f"fd_err_d{i + 1}_mean"] = float(np.mean(np.linalg.norm(gap, axis=1)))
    return report


# -- serialization ---------------------------------------------------------

def model_to_dict(model: ThiModel) -> dict:
    g = model.garnoldi
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "manifold": model.manifold_name,
        "dim": g.basis.dim,
        "degree": g.basis.degree,
        "order": g.deriv.order,
        "rank": g.rank,
        "parents": [[int(s), int(u)] for s, u in zip(g.basis.src[1:g.rank], g.basis.coord[1:g.rank])],
        "rmat": g.rmat.tolist(),
        "base": model.base.tolist(),
        "frame": model.frame.tolist(),
        "coeffs": model.coeffs.tolist(),
    }


def model_from_dict(data: dict) -> ThiModel:
    if data.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} file")
    if data.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {data.get('version')}")
    basis = enumerate_basis(int(data["dim"]), int(data["degree"]))
    rank = int(data["rank"])
    stored = [tuple(p) for p in data["parents"]]
    expected = list(zip(basis.src[1:rank].tolist(), basis.coord[1:rank].tolist()))
    if stored != expected:
        raise ValueError("stored parent links do not match the basis ordering")
    rmat = np.array(data["rmat"], dtype=float).reshape(rank, rank)
    g = GArnoldiModel(basis, DerivativeOrder(int(data["order"]), basis.dim), rmat)
    return ThiModel(
        manifold_name=data["manifold"],
        base=np.array(data["base"], dtype=float),
        frame=np.array(data["frame"], dtype=float),
        garnoldi=g,
        coeffs=np.array(data["coeffs"], dtype=float).reshape(-1, rank),
    )


def save_model(model: ThiModel, path) -> None:
    # json writes floats with repr, so the round trip is exact
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> ThiModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
