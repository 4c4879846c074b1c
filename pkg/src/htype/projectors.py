"""Orthogonal projectors onto the tensor subspaces that pin the canonical connection.

``Xi`` is the space of antisymmetric endomorphisms of the horizontal space that
commute with every ``J_i``.  ``Sigma`` is the image, under antisymmetrization in
the first two slots, of the (0,3)-tensors ``t(X, Y, Z) = <B_X Y, Z>`` with every
``B_X`` in ``Xi``.  Tensors are stored as flat vectors in row-major
``[a, b, c]`` order; endomorphisms as row-major ``[out, in]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordModule


class RankGapError(RuntimeError):
    """Singular values do not separate cleanly into kept and discarded ones."""


def operator_matrix(func, n_in: int) -> np.ndarray:
    """Dense matrix of a linear map given as a function on flat vectors."""
    eye = np.eye(n_in)
    return np.column_stack([np.ravel(func(e)) for e in eye])


def null_space(M: np.ndarray, rel_cut: float = 1e-8, min_gap: float = 1e6):
    """Orthonormal null-space basis (rows) plus the singular-value gap.

    Singular values below ``rel_cut * s_max`` are discarded; the ratio of the
    smallest kept to the largest discarded value must exceed ``min_gap``.
    """
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n), np.inf
    _, s, Vt = np.linalg.svd(M)
    s_full = np.zeros(n)
    s_full[: len(s)] = s
    smax = s_full.max() if s_full.size else 0.0
    keep = s_full > rel_cut * smax
    rank = int(keep.sum())
    kept_min = s_full[keep].min() if rank else np.inf
    floor = max(s_full[~keep].max() if rank < n else 0.0, np.finfo(float).eps * max(smax, 1.0))
    gap = kept_min / floor
    if rank and rank < n and gap < min_gap:
        raise RankGapError(f"no clear rank gap: kept {kept_min:.3e}, discarded {floor:.3e}")
    return Vt[rank:].copy(), gap


def orthonormal_columns(M: np.ndarray, rel_cut: float = 1e-8) -> np.ndarray:
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s.max() == 0:
        return np.zeros((M.shape[0], 0))
    return U[:, s > rel_cut * s.max()]


@dataclass(frozen=True)
class ProjectorPair:
    n2: int
    xi_basis: np.ndarray  # (dim_xi, n2, n2)
    P_xi: np.ndarray  # (n2^2, n2^2)
    domain_basis: np.ndarray  # (n2^3, dim_D) columns span D
    sigma_basis: np.ndarray  # (n2^3, dim_sigma) orthonormal columns
    P_sigma: np.ndarray  # (n2^3, n2^3)
    theta: np.ndarray  # (n2^3, n2^3): inverse of antisymmetrization on Sigma
    gaps: dict = field(default_factory=dict)

    @property
    def dim_xi(self) -> int:
        return self.xi_basis.shape[0]

    @property
    def dim_sigma(self) -> int:
        return self.sigma_basis.shape[1]

    @property
    def dim_domain(self) -> int:
        return self.domain_basis.shape[1]


def antisymmetrize12(t: np.ndarray) -> np.ndarray:
    """``t(X,Y,Z) - t(Y,X,Z)`` (no 1/2: matches ``b_X Y - b_Y X`` in the torsion)."""
    return t - np.swapaxes(t, -3, -2)


def build_xi(module: CliffordModule):
    """Orthonormal basis of ``{A : A^T = -A, A J_i = J_i A}`` and its projector."""
    n = module.n2
    J = module.generators

    def constraints(v):
        A = v.reshape(n, n)
        return np.concatenate([(A + A.T).ravel()] + [(A @ Ji - Ji @ A).ravel() for Ji in J])

    basis, gap = null_space(operator_matrix(constraints, n * n))
    P = basis.T @ basis
    return basis.reshape(-1, n, n), P, gap


def build_sigma(module: CliffordModule, xi_basis: np.ndarray):
    """Domain ``D``, image ``Sigma = A12(D)`` and the inverse ``Theta`` on ``Sigma``."""
    n = module.n2
    cols = []
    for a in range(n):
        for xi in xi_basis:
            t = np.zeros((n, n, n))
            t[a] = xi.T  # t[a, b, c] = <xi e_b, e_c> = xi[c, b]
            cols.append(t.ravel())
    D = np.column_stack(cols) if cols else np.zeros((n**3, 0))
    image = np.column_stack([antisymmetrize12(c.reshape(n, n, n)).ravel() for c in D.T]) \
        if cols else np.zeros((n**3, 0))
    s = np.linalg.svd(image, compute_uv=False) if cols else np.zeros(0)
    rank = int(np.sum(s > 1e-8 * s.max())) if s.size else 0
    if rank != D.shape[1]:
        raise RankGapError(
            f"antisymmetrization is not injective on D (rank {rank} < dim {D.shape[1]})")
    sigma = orthonormal_columns(image)
    theta = D @ np.linalg.pinv(image) if cols else np.zeros((n**3, n**3))
    gap = (s.min() / (np.finfo(float).eps * s.max())) if s.size else np.inf
    return D, sigma, sigma @ sigma.T, theta, gap


_CACHE: dict = {}


def build_projectors(module: CliffordModule) -> ProjectorPair:
    key = (module.k, module.n2, module.generators.tobytes())
    if key not in _CACHE:
        xi, P_xi, gap_xi = build_xi(module)
        D, sigma, P_sigma, theta, gap_sigma = build_sigma(module, xi)
        _CACHE[key] = ProjectorPair(module.n2, xi, P_xi, D, sigma, P_sigma, theta,
                                    {"xi": float(gap_xi), "sigma": float(gap_sigma)})
    return _CACHE[key]
