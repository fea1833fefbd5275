"""Graded monomial bases in grevlex order with parent links.

Every monomial of positive degree is written as ``x_u * phi_s`` where ``phi_s``
is an earlier monomial. The pairs ``(s, u)`` drive both the Arnoldi fitting
recurrence and the evaluation recurrence in :mod:`thi_arnoldi.garnoldi`.

Public indices follow the 1-based convention ``phi_1, ..., phi_g`` (so
``parent_of`` speaks 1-based). Array attributes on :class:`MonomialBasis` are
0-based, as is normal for numpy storage.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

MAX_BASIS_SIZE = 10**7


@dataclass(frozen=True)
class DerivativeOrder:
    """Number of derivative levels stacked per node (0, 1 or 2)."""

    order: int
    dim: int

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError(f"derivative order must be 0, 1 or 2, got {self.order}")
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")

    @property
    def stacked_dim(self) -> int:
        d = self.dim
        return (1, 1 + d, 1 + d + d * (d + 1) // 2)[self.order]

    def second_slots(self) -> list[tuple[int, int, int]]:
        """``(slot, j, k)`` for each second partial, upper-triangular row-major."""
        out = []
        slot = 1 + self.dim
        for j in range(self.dim):
            for k in range(j, self.dim):
                out.append((slot, j, k))
                slot += 1
        return out


@dataclass(frozen=True, eq=False)
class MonomialBasis:
    """Monomials of total degree <= ``degree`` in ``dim`` variables.

    Attributes
    ----------
    exponents : ndarray of int, shape (g, dim)
        Exponent vectors in grevlex order; row 0 is the constant.
    src : ndarray of int, shape (g,)
        0-based parent index ``s`` for each row (``-1`` for the constant).
    coord : ndarray of int, shape (g,)
        0-based coordinate ``u`` with ``exponents[i] = exponents[src[i]] + e_u``.
    """

    dim: int
    degree: int
    exponents: np.ndarray
    src: np.ndarray
    coord: np.ndarray
    _position: dict = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.exponents)

    def __len__(self) -> int:
        return self.size

    def index_of(self, exponent) -> int:
        """0-based position of an exponent vector, or -1 if absent."""
        return self._position.get(tuple(int(e) for e in exponent), -1)

    def parents(self) -> list[tuple[int, int]]:
        """1-based ``(s_i, u_i)`` for ``i = 2..g``."""
        return [parent_of(self, i) for i in range(2, self.size + 1)]


def _degree_block(dim: int, k: int) -> list[tuple[int, ...]]:
    # all exponent vectors of total degree k, grevlex-descending: ascending
    # lexicographic order of the reversed tuples
    block = []
    for bars in itertools.combinations(range(k + dim - 1), dim - 1):
        prev = -1
        exps = []
        for b in bars:
            exps.append(b - prev - 1)
            prev = b
        exps.append(k + dim - 2 - prev)
        block.append(tuple(exps))
    block.sort(key=lambda e: e[::-1])
    return block


def basis_size(dim: int, degree: int) -> int:
    return math.comb(degree + dim, dim)


def enumerate_basis(dim: int, degree: int) -> MonomialBasis:
    """Build the grevlex-ordered basis of polynomials of total degree <= degree.

    The parent of each monomial is the earliest monomial that becomes it after
    multiplication by a single coordinate.
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    g = basis_size(dim, degree)
    if g > MAX_BASIS_SIZE:
        raise OverflowError(f"basis of size {g} exceeds limit {MAX_BASIS_SIZE}")

    exps: list[tuple[int, ...]] = []
    for k in range(degree + 1):
        exps.extend(_degree_block(dim, k))
    position = {e: i for i, e in enumerate(exps)}

    src = np.full(g, -1, dtype=np.int64)
    coord = np.full(g, -1, dtype=np.int64)
    for i in range(1, g):
        e = exps[i]
        best = None
        for u in range(dim):
            if e[u] == 0:
                continue
            lower = e[:u] + (e[u] - 1,) + e[u + 1:]
            s = position[lower]
            if best is None or s < best[0]:
                best = (s, u)
        src[i], coord[i] = best

    return MonomialBasis(
        dim=dim,
        degree=degree,
        exponents=np.array(exps, dtype=np.int64).reshape(g, dim),
        src=src,
        coord=coord,
        _position=position,
    )


def parent_of(basis: MonomialBasis, i: int) -> tuple[int, int]:
    """Return the 1-based parent ``(s, u)`` of the 1-based basis index ``i >= 2``."""
    if not 2 <= i <= basis.size:
        raise IndexError(f"basis index {i} outside 2..{basis.size}")
    return int(basis.src[i - 1]) + 1, int(basis.coord[i - 1]) + 1
