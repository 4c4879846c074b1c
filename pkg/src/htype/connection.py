"""Canonical connection of a conformally changed H-type structure.

Given a positive field ``f`` on an H-type group, the structure ``(f g, f theta)``
has horizontal frame ``X~_a = f^{-1/2} X_a`` and Reeb fields ``T~_j``.  The
connection is determined pointwise by a linear system in the Christoffel
symbols ``Gamma[a, b, c] = g~(nabla~_{X~_a} X~_b, X~_c)``:

* metricity: ``Gamma[a] `` is antisymmetric in ``(b, c)``;
* the span of the ``J_i`` is parallel;
* the ``Q_theta`` tensor vanishes;
* the horizontal torsion lies in ``Sigma``-orthogonal position: ``P_Sigma T = 0``.

The Reeb part ``G_j[c, b] = g~(nabla~_{T~_j} X~_b, X~_c)`` solves an analogous
system with ``P_Xi``.  Both systems are solved by pseudo-inverse; the solution
is linear in the bracket data, so its jet is exact and feeds the curvature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField
from .flat_model import FlatContactStructure, reeb_fields_jet
from .groups import HTypeGroup
from .jets import Jet, contract, linear
from .projectors import ProjectorPair, antisymmetrize12, build_projectors, operator_matrix


class UniquenessError(RuntimeError):
    """The defining conditions do not pin down a unique connection."""

    def __init__(self, message, kernel_dim=0, singular_values=None):
        super().__init__(message)
        self.kernel_dim = kernel_dim
        self.singular_values = singular_values


class NonPositiveFieldError(ValueError):
    """The conformal factor is not strictly positive at the evaluation point."""


# ----------------------------------------------------------- linear system
def _j_span_basis(J):
    # the J_i are Frobenius-orthogonal with norm sqrt(2n)
    return np.array([Ji / np.linalg.norm(Ji) for Ji in J])


def _commutator_residual(G, J, Jhat):
    """``(I - P_J)[G, J_i]`` for endomorphisms ``G[..., out, in]``."""
    comm = np.einsum("...om,imn->i...on", G, J) - np.einsum("imn,...no->i...mo", J, G)
    coef = np.einsum("i...on,lon->i...l", comm, Jhat)
    return comm - np.einsum("i...l,lon->i...on", coef, Jhat)


def _q_theta(Gamma, J):
    """``Q_i(X_a, X_b)`` components (shape ``(k, n, n, n)``) for connection matrices.

    ``D[i, a] = [Gamma_a, J_i]`` is the matrix of ``nabla_{X_a} J_i``.
    """
    G = np.swapaxes(Gamma, -1, -2)  # G[a, out, in] = Gamma[a, in, out]
    D = np.einsum("aom,imn->iaon", G, J) - np.einsum("imn,ano->iamo", J, G)
    t1 = np.einsum("iom,iamb->iabo", J, D)
    t2 = np.einsum("iom,ibma->iabo", J, D)
    t3 = np.einsum("icb,icoa->iabo", J, D)
    t4 = np.einsum("ica,icob->iabo", J, D)
    return t1 - t2 + t3 - t4


@dataclass(frozen=True)
class ConnectionSystem:
    """Pre-factored horizontal and Reeb systems for one module."""

    projectors: ProjectorPair
    generators: np.ndarray
    horizontal: np.ndarray  # Gamma = horizontal @ vec(B)
    reeb: np.ndarray  # vec(G_j) = reeb @ vec(R_j)
    gaps: dict = field(default_factory=dict)
    singular_values: dict = field(default_factory=dict)

    @property
    def n2(self) -> int:
        return self.projectors.n2

    def residuals(self, Gamma, B, G, R) -> dict:
        """Max-abs residual of every defining equation at a solved point."""
        J = self.generators
        Jhat = _j_span_basis(J)
        P_s, P_x = self.projectors.P_sigma, self.projectors.P_xi
        n = self.n2
        Gm = np.swapaxes(Gamma, -1, -2)
        tors = antisymmetrize12(Gamma) - B
        GR = G - np.swapaxes(R, -1, -2)
        return {
            "metric": float(np.abs(Gamma + np.swapaxes(Gamma, -1, -2)).max()),
            "J_parallel": float(np.abs(_commutator_residual(Gm, J, Jhat)).max()),
            "Q_theta": float(np.abs(_q_theta(Gamma, J)).max()),
            "torsion_sigma": float(np.abs(P_s @ tors.ravel()).max()),
            "reeb_metric": float(np.abs(G + np.swapaxes(G, -1, -2)).max()) if len(G) else 0.0,
            "reeb_commute": float(max((np.abs(Gj @ Ji - Ji @ Gj).max() for Gj in G for Ji in J),
                                      default=0.0)),
            "reeb_xi": float(max((np.abs(P_x @ r.ravel()).max() for r in GR), default=0.0))
            if n else 0.0,
        }


def _certificate(M):
    s = np.linalg.svd(M, compute_uv=False)
    smax = s.max()
    keep = s > 1e-10 * smax
    rank = int(keep.sum())
    gap = s[keep].min() / (smax * np.finfo(float).eps * max(M.shape))
    return rank, float(gap), s


_SYSTEMS: dict = {}


def connection_system(module) -> ConnectionSystem:
    """Assemble and factor the defining equations for ``module`` (cached)."""
    key = (module.k, module.n2, module.generators.tobytes())
    if key in _SYSTEMS:
        return _SYSTEMS[key]
    proj = build_projectors(module)
    J = np.asarray(module.generators)
    Jhat = _j_span_basis(J)
    n = module.n2
    N = n**3

    def homogeneous(z):
        Gm = z.reshape(n, n, n)
        return np.concatenate([
            (Gm + np.swapaxes(Gm, 1, 2)).ravel(),
            _commutator_residual(np.swapaxes(Gm, 1, 2), J, Jhat).ravel(),
            _q_theta(Gm, J).ravel(),
        ])

    def torsion(z):
        return proj.P_sigma @ antisymmetrize12(z.reshape(n, n, n)).ravel()

    H = operator_matrix(homogeneous, N)
    T = operator_matrix(torsion, N)
    M = np.vstack([H, T])
    rank, gap, s = _certificate(M)
    if rank < N:
        raise UniquenessError(
            f"horizontal system has rank {rank} < {N}: {N - rank} free directions "
            f"(smallest singular values {np.sort(s)[:N - rank + 1].tolist()})", N - rank, s)
    pinv = np.linalg.pinv(M, rcond=1e-10)
    horizontal = pinv[:, H.shape[0]:] @ proj.P_sigma

    def reeb_homogeneous(w):
        Gj = w.reshape(n, n)
        return np.concatenate([(Gj + Gj.T).ravel()]
                              + [(Gj @ Ji - Ji @ Gj).ravel() for Ji in J])

    Hr = operator_matrix(reeb_homogeneous, n * n)
    Mr = np.vstack([Hr, proj.P_xi])
    rank_r, gap_r, s_r = _certificate(Mr)
    if rank_r < n * n:
        raise UniquenessError(f"Reeb system has rank {rank_r} < {n * n}", n * n - rank_r, s_r)
    reeb = np.linalg.pinv(Mr, rcond=1e-10)[:, Hr.shape[0]:] @ proj.P_xi
    system = ConnectionSystem(proj, J, horizontal, reeb,
                              {"horizontal": gap, "reeb": gap_r},
                              {"horizontal": s, "reeb": s_r})
    _SYSTEMS[key] = system
    return system


# ----------------------------------------------------------- geometric data
def _bracket(V: Jet, W: Jet) -> Jet:
    """Coordinate brackets ``[V_a, W_b]`` of two stacks of vector fields."""
    dW = W.partial()
    dV = V.partial()
    return (contract("ae,bde->abd", V.truncate(dW.order), dW)
            - contract("be,ade->abd", W.truncate(dV.order), dV))


@dataclass(frozen=True)
class ConformalFrame:
    """Frame data of ``(f g, f theta)`` at one point, with 1-jets where needed."""

    group: HTypeGroup
    f: Jet
    frame: Jet  # X~_a in coordinates, (n, dim), order 2
    reeb: Jet  # T~_j, (k, dim), order 1
    forms: Jet  # theta~^j, (k, dim), order 2

    def decompose(self, Y: Jet):
        """Split ``Y`` (``(..., dim)``) into ``T~`` and ``X~`` coefficients."""
        order = Y.order
        forms = self.forms.truncate(order)
        vert = contract("jd,abd->abj", forms, Y)
        h = Y - contract("abj,jd->abd", vert, self.reeb.truncate(order))
        n2 = self.group.n2
        horiz = h[..., :n2] * self.f.truncate(order) ** 0.5
        return vert, horiz


def conformal_frame(group: HTypeGroup, f_field: ScalarField, point) -> ConformalFrame:
    point = np.asarray(point, dtype=float)
    p = Jet.variable(point, 2)
    f = f_field.expr(p)
    if not (np.isfinite(f.v) and f.v > 0):
        raise NonPositiveFieldError(f"conformal factor is {float(f.v)!r} at {point.tolist()}")
    Xt = contract("ad,->ad", group.frame_jet(p), f ** -0.5)
    Tt = reeb_fields_jet(group, f, p)
    forms = contract("jd,->jd", FlatContactStructure(group).theta_jet(p), f)
    return ConformalFrame(group, f, Xt, Tt, forms)


@dataclass
class ConnectionSolution:
    point: np.ndarray
    f: float
    Gamma: np.ndarray  # (n, n, n)
    Gamma_grad: np.ndarray  # (n, n, n, dim) coordinate derivatives
    reeb_part: np.ndarray  # G[j, out, in]
    bracket_h: np.ndarray  # B[a, b, c]
    bracket_v: np.ndarray  # C[a, b, j]
    frame: np.ndarray  # X~ in coordinates
    residuals: dict
    certificate: dict

    def max_residual(self) -> float:
        return max(self.residuals.values())


def solve_connection(group: HTypeGroup, f_field: ScalarField, point, min_gap: float = 1e6) \
        -> ConnectionSolution:
    """Christoffel symbols of the canonical connection of ``(f g, f theta)`` at ``point``.

    The certificate is ``s_min / (s_max * eps * size)`` for each system: how far
    the smallest singular value sits above the rounding floor.
    """
    system = connection_system(group.module)
    cert = dict(system.gaps)
    if min(cert.values()) < min_gap:
        raise UniquenessError(f"certificate gap {min(cert.values()):.3e} below {min_gap:.1e}")
    frame = conformal_frame(group, f_field, point)
    n = group.n2
    vert, B = frame.decompose(_bracket(frame.frame, frame.frame))  # order 1
    Gamma = linear(system.horizontal, B).reshape(n, n, n)
    _, R = frame.decompose(_bracket(frame.reeb, frame.frame.truncate(1)))  # R[j, b, c]
    Rm = np.swapaxes(R.v, -1, -2)
    G = np.array([(system.reeb @ r.ravel()).reshape(n, n) for r in Rm]).reshape(group.k, n, n)
    res = system.residuals(Gamma.v, B.v, G, R.v)
    return ConnectionSolution(np.asarray(point, dtype=float), float(frame.f.v), Gamma.v,
                              Gamma.g, G, B.v, vert.v, frame.frame.v, res, cert)


def closed_form_gamma(group: HTypeGroup, f_field: ScalarField, point) -> np.ndarray:
    """Independent closed form for ``Gamma`` from the horizontal gradient of ``f``.

    ``nabla~_X Y = nabla_X Y + (Xf / 2f) Y + Theta P_Sigma W(X, Y)`` with
    ``W(X,Y,Z) = (Yf/2f) <X,Z> - (Xf/2f) <Y,Z> - (1/f) sum_j <J_j X, Y> <J_j grad f, Z>``.
    In the orthonormal frame the ``(Xf/2f) Y`` term is absorbed by the rescaling.
    """
    point = np.asarray(point, dtype=float)
    proj = build_projectors(group.module)
    _, grad, _ = f_field.evaluate(point)
    fv = float(f_field(point))
    v = group.frame(point) @ grad  # X_a f
    n = group.n2
    J = group.module.generators
    eye = np.eye(n)
    W = (np.einsum("b,ac->abc", v, eye) - np.einsum("a,bc->abc", v, eye)) / (2 * fv)
    Jv = np.einsum("jcm,m->jc", J, v)
    W -= np.einsum("jba,jc->abc", J, Jv) / fv
    out = proj.theta @ (proj.P_sigma @ W.ravel())
    return fv ** -0.5 * out.reshape(n, n, n)


# ---------------------------------------------------------------- curvature
def curvature_components(sol: ConnectionSolution) -> np.ndarray:
    """``R[a, b, e] = <R(X~_a, X~_b) X~_a, X~_e>`` for the orthonormal frame."""
    Gm = sol.Gamma
    dG = np.einsum("pqrd,ad->pqra", sol.Gamma_grad, sol.frame)  # X~_a(Gamma[p,q,r])
    # nabla_a nabla_b X~_a
    v1 = np.einsum("baca->abc", dG) + np.einsum("bac,ace->abe", Gm, Gm)
    # nabla_b nabla_a X~_a
    v2 = np.einsum("aacb->abc", dG) + np.einsum("aac,bce->abe", Gm, Gm)
    # nabla_[a,b] X~_a
    v3 = np.einsum("abh,hae->abe", sol.bracket_h, Gm)
    v3 = v3 + np.einsum("abj,jea->abe", sol.bracket_v, sol.reeb_part)
    return v1 - v2 - v3


def scalar_curvature(sol: ConnectionSolution) -> float:
    """Horizontal scalar curvature ``sum_{a,b} <R(X~_a, X~_b) X~_b, X~_a>``."""
    R = curvature_components(sol)
    # <R(a,b)b, a> = -<R(a,b)a, b> by antisymmetry of R(a,b) in the metric
    return float(-np.einsum("abb->", R))


def flat_connection(group: HTypeGroup) -> ConnectionSolution:
    """The connection of the flat structure: left-invariant fields are parallel."""
    point = np.zeros(group.dim)
    from .fields import Constant
    return solve_connection(group, Constant(1.0), point)


def curvature_at(group: HTypeGroup, f_field: ScalarField, point) -> float:
    return scalar_curvature(solve_connection(group, f_field, point))


# --------------------------------------------------------- derived operators
def conformal_sublaplacian(group: HTypeGroup, f_field: ScalarField, v_field: ScalarField,
                           point) -> float:
    """``sum_a (X~_a X~_a v - (nabla~_{X~_a} X~_a) v)`` for the structure ``(f g, f theta)``."""
    sol = solve_connection(group, f_field, point)
    p = Jet.variable(np.asarray(point, dtype=float), 2)
    frame = conformal_frame(group, f_field, point).frame
    dv = contract("ad,d->a", frame, v_field.expr(p).partial())  # X~_a v, order 1
    second = np.einsum("ad,ad->", frame.v, dv.g)
    return float(second - np.einsum("aac,c->", sol.Gamma, dv.v))


def covariant_derivative(sol: ConnectionSolution, v, w: Jet) -> np.ndarray:
    """``nabla~_V W`` in the ``X~`` frame; ``W`` given by coefficient jets (order >= 1)."""
    v = np.asarray(v, dtype=float)
    direction = v @ sol.frame  # coordinate components of V
    return w.g @ direction + np.einsum("a,b,abc->c", v, w.v, sol.Gamma)


def q_theta_fields(sol: ConnectionSolution, J: np.ndarray, X: Jet, Y: Jet) -> np.ndarray:
    """``Q_J(X, Y)`` evaluated through covariant derivatives of vector fields."""
    def dJ(V, W):  # (nabla_V J) W
        JW = contract("om,m->o", J, W)
        return covariant_derivative(sol, V.v, JW) - J @ covariant_derivative(sol, V.v, W)

    JX = contract("om,m->o", J, X)
    JY = contract("om,m->o", J, Y)
    return J @ dJ(X, Y) - J @ dJ(Y, X) + dJ(JY, X) - dJ(JX, Y)


# ------------------------------------------------------------- calibration
@dataclass
class ConformalCalibration:
    C: float
    slopes: list
    spread: float
    max_residual: float
    worst: dict
    samples: int

    def to_dict(self) -> dict:
        return {"C": self.C, "slopes": list(self.slopes), "spread": self.spread,
                "max_residual": self.max_residual, "worst": self.worst,
                "samples": self.samples}


class TheoremVerificationError(RuntimeError):
    """Curvature is not proportional to the sublaplacian as the conformal law predicts."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


def conformal_pairs(group: HTypeGroup, u_field: ScalarField, points):
    """``(-Delta u, K~ u^{(Q+2)/(Q-2)})`` at each point for ``f = u^{4/(Q-2)}``."""
    f = u_field ** (4.0 / (group.Q - 2))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x = -group.sublaplacian(u_field, points)
    uq = u_field(points) ** group.critical_exponent
    y = np.array([curvature_at(group, f, p) for p in points]) * uq
    return x, y


def calibrate_conformal_constant(group: HTypeGroup, u_fields, points, rel_tol: float = 1e-4,
                                 floor: float = 1e-3) -> ConformalCalibration:
    """Fit ``K~ u^{(Q+2)/(Q-2)} = C (-Delta u)`` on a flat background.

    One least-squares slope per field; residuals are relative to
    ``max(|y|, floor * max|y|)`` so points where ``Delta u`` vanishes do not
    divide by zero.  Raises when a residual or the slope spread exceeds ``rel_tol``.
    """
    slopes, worst, max_res = [], {}, 0.0
    for idx, u in enumerate(u_fields):
        x, y = conformal_pairs(group, u, points)
        slope = float(x @ y / (x @ x))
        scale = np.maximum(np.abs(y), floor * np.abs(y).max())
        res = np.abs(y - slope * x) / scale
        i = int(np.argmax(res))
        if res[i] >= max_res:
            max_res = float(res[i])
            worst = {"field": idx, "point": np.asarray(points)[i].tolist(),
                     "residual": max_res}
        slopes.append(slope)
    C = float(np.mean(slopes))
    spread = float((max(slopes) - min(slopes)) / abs(C))
    record = ConformalCalibration(C, slopes, spread, max_res, worst, len(points) * len(slopes))
    if not (max_res <= rel_tol and spread <= rel_tol):
        raise TheoremVerificationError(
            f"conformal law fails: residual {max_res:.3e}, slope spread {spread:.3e}", record)
    return record
