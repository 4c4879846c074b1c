"""The flat group as a contact manifold of Heisenberg type.

Contact forms and Reeb fields, the Garofalo-Vassilev profile and its
normalization, conformal change of the Reeb fields, spherical inversion and
the two-chart transition of the Iwasawa sphere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .clifford import is_iwasawa_type
from .fields import GVProfile, ScalarField
from .groups import HTypeGroup
from .jets import Jet, contract


class ConventionMismatchError(RuntimeError):
    """The profile ratio is not constant: group-law and profile conventions disagree."""


class SingularPointError(ValueError):
    pass


class NotIwasawaError(ValueError):
    pass


def sample_points(dim: int, count: int, seed: int = 0, box: float = 2.0,
                  exclude_radius: float = 0.1) -> np.ndarray:
    """Scrambled Halton points in ``[-box, box]^dim`` outside a ball at the origin."""
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    out = []
    while sum(len(o) for o in out) < count:
        pts = box * (2.0 * sampler.random(max(count, 16)) - 1.0)
        out.append(pts[np.linalg.norm(pts, axis=1) > exclude_radius])
    return np.concatenate(out)[:count]


def gauge_sphere_points(group, count: int, seed: int = 0, band=(0.2, 0.8)) -> np.ndarray:
    """Points with ``|x|^4 + 16|t|^2 = 1`` whose vertical share ``16|t|^2`` lies in ``band``.

    The inversion maps this sphere to itself; away from the poles
    (``t = 0`` or ``x = 0``) these are generic points for horizontality tests.
    """
    out = []
    s = seed
    while sum(len(o) for o in out) < count:
        pts = sample_points(group.dim, 4 * count, s)
        x, t = group.split(pts)
        rho = (np.sum(x * x, -1) ** 2 + 16.0 * np.sum(t * t, -1)) ** 0.25
        pts = np.concatenate([x / rho[:, None], t / rho[:, None] ** 2], axis=-1)
        share = 16.0 * np.sum(group.split(pts)[1] ** 2, -1)
        out.append(pts[(share >= band[0]) & (share <= band[1])])
        s += 1
    return np.concatenate(out)[:count]


@dataclass(frozen=True)
class FlatContactStructure:
    group: HTypeGroup

    def theta(self, p) -> np.ndarray:
        """Coefficient rows of the vertical forms, shape ``(..., k, dim)``."""
        return self.group.contact_forms(p)

    def theta_jet(self, p: Jet) -> Jet:
        G = self.group
        x = p[: G.n2]
        horiz = contract("jab,a->jb", -0.5 * G.structure_constants, x)
        rows = []
        for j in range(G.k):
            e = np.zeros(G.k)
            e[j] = 1.0
            rows.append(_concat(horiz[j], Jet.constant(e, p.dim, p.order)))
        from .jets import stack
        return stack(rows)

    def reeb(self) -> np.ndarray:
        """Reeb fields ``T_j = d/dt_j`` as coordinate rows ``(k, dim)``."""
        G = self.group
        return np.concatenate([np.zeros((G.k, G.n2)), np.eye(G.k)], axis=1)

    def dtheta(self) -> np.ndarray:
        """Constant coordinate matrices of ``d theta^j`` (only the ``dx^dx`` block)."""
        G = self.group
        out = np.zeros((G.k, G.dim, G.dim))
        c = G.structure_constants
        out[:, :G.n2, :G.n2] = -0.5 * (c - np.transpose(c, (0, 2, 1)))
        return out


def _concat(a: Jet, b: Jet) -> Jet:
    order = min(a.order, b.order)
    a, b = a.truncate(order), b.truncate(order)
    g = None if order < 1 else np.concatenate([a.g, b.g], axis=0)
    h = None if order < 2 else np.concatenate([a.h, b.h], axis=0)
    return Jet(np.concatenate([a.v, b.v]), g, h, order)


# ------------------------------------------------------------------ profile
@dataclass(frozen=True)
class CalibrationRecord:
    C_G: float | None = None
    C: float | None = None
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"C_G": self.C_G, "C": self.C, "stats": dict(self.stats)}


def gv_profile(group: HTypeGroup, C: float = 1.0) -> GVProfile:
    return GVProfile(group, C)


def profile_ratio(group: HTypeGroup, points) -> np.ndarray:
    """``(-Delta U_1) / U_1^{(Q+2)/(Q-2)}`` for the unit-constant profile."""
    U1 = GVProfile(group, 1.0)
    val = U1(points)
    return -group.sublaplacian(U1, points) / val ** group.critical_exponent


def calibrate_profile(group: HTypeGroup, points=None, samples: int = 200, seed: int = 0,
                      tol: float = 1e-8) -> CalibrationRecord:
    """Normalize the profile so that ``-Delta U = U^{(Q+2)/(Q-2)}`` holds exactly.

    The ratio must be constant over the sample; otherwise the conventions of the
    group law and the profile are inconsistent and the run fails loudly.
    """
    if points is None:
        points = sample_points(group.dim, samples, seed)
    points = np.asarray(points, dtype=float)
    r = profile_ratio(group, points)
    mean = float(np.mean(r))
    spread = float((r.max() - r.min()) / abs(mean))
    if not np.isfinite(spread) or spread > tol:
        bad = np.argsort(-np.abs(r - mean))[:3]
        raise ConventionMismatchError(
            f"profile ratio not constant (spread {spread:.3e} > {tol:.1e}); "
            f"worst points {points[bad].tolist()}")
    # C r = C^{(Q+2)/(Q-2)}  =>  C = r^{(Q-2)/4}
    C_G = mean ** ((group.Q - 2) / 4.0)
    return CalibrationRecord(C_G=C_G, stats={"ratio": mean, "spread": spread,
                                             "samples": len(points), "tolerance": tol})


def yamabe_residual(group: HTypeGroup, U: ScalarField, points) -> np.ndarray:
    """Relative residual ``|-Delta U - U^q| / U^q`` with ``q`` the critical exponent."""
    val = U(points)
    rhs = val ** group.critical_exponent
    return np.abs(-group.sublaplacian(U, points) - rhs) / rhs


# ----------------------------------------------------------- conformal change
def reeb_fields_jet(group: HTypeGroup, f: Jet, p: Jet) -> Jet:
    """Reeb fields of ``(f g, f theta)`` in coordinates, shape ``(k, dim)``.

    ``T~_j = T_j / f + X_j`` with ``X_j = J_j grad_h f / f^2`` the horizontal
    solution of ``i_X d theta^j |_h = df|_h / f^2``.
    """
    A = group.frame_jet(p)
    grad_h = contract("ad,d->a", A, f.partial())
    Jg = contract("jab,b->ja", group.module.generators, grad_h)
    inv_f2 = f.truncate(Jg.order) ** -2.0
    horiz = contract("ja,ad->jd", Jg, A.truncate(Jg.order)) * inv_f2
    T = FlatContactStructure(group).reeb()
    return horiz + contract("jd,->jd", T, f.truncate(Jg.order).reciprocal())


def exterior_derivative(form: Jet) -> np.ndarray:
    """Coordinate matrices ``(d w)[.., a, b] = d_a w_b - d_b w_a`` of a 1-form jet."""
    grad = form.g  # (..., b, a): derivative index last
    return np.swapaxes(grad, -1, -2) - grad


def conformal_closure_residuals(group: HTypeGroup, f_field: ScalarField, point) -> dict:
    """Check that ``(f g, f theta)`` is again of Heisenberg type at ``point``.

    Returns the max residuals of ``i_{T~_j} d theta~^j |_h = 0``, the Reeb
    linearity condition, ``theta~^i(T~_j) = delta_ij`` and ``J_{f theta} = J_theta``.
    """
    p = Jet.variable(np.asarray(point, dtype=float), 2)
    f = f_field.expr(p)
    structure = FlatContactStructure(group)
    theta = structure.theta_jet(p)
    tilde = contract("jd,->jd", theta, f)
    dtt = exterior_derivative(tilde.truncate(1))
    T = reeb_fields_jet(group, f, p).v
    A = group.frame(point)
    fv = float(f.v)
    # (i_{T_i} d theta~^j)(X_a) = d theta~^j(T_i, X_a)
    iT = np.einsum("jcd,ic,ad->ija", dtt, T, A)
    reeb = float(np.abs(np.einsum("iia->ia", iT)).max())
    linear = float(np.abs(iT + np.transpose(iT, (1, 0, 2))).max())
    dual = float(np.abs(tilde.v @ T.T - np.eye(group.k)).max())
    Jt = np.einsum("jcd,ac,bd->jab", dtt, A, A) / fv
    jres = float(np.abs(Jt - group.module.generators).max())
    return {"reeb": reeb, "linearity": linear, "duality": dual, "J_invariance": jres}


# ---------------------------------------------------------------- inversion
def _inversion_expr(group: HTypeGroup, p: Jet) -> Jet:
    """``sigma`` in jet arithmetic for a batch ``p`` of shape ``(N, dim)``."""
    n2, k = group.n2, group.k
    N_pts = p.shape[0]
    x, t = p[:, :n2], p[:, n2:]
    r2 = (x * x).sum(-1)
    norm = r2 * r2 + 16.0 * (t * t).sum(-1)
    Jx = contract("jab,nb->nja", group.module.generators, x)
    Jtx = (Jx * t.reshape((N_pts, k, 1))).sum(1)
    inv = norm.reciprocal().reshape((N_pts, 1))
    # with <J_T X, Y> = <T, [X, Y]> and the +1/2 bracket in the group law, the
    # horizontality-preserving inversion is x -> (-|x|^2 I - 4 J_t)^{-1} x, and
    # (-|x|^2 I - 4 J_t)^{-1} = (-|x|^2 I + 4 J_t) / (|x|^4 + 16 |t|^2)
    xs = (4.0 * Jtx - x * r2.reshape((N_pts, 1))) * inv
    ts = -(t * inv)
    return _concat_batch(xs, ts)


def _concat_batch(a: Jet, b: Jet) -> Jet:
    order = min(a.order, b.order)
    a, b = a.truncate(order), b.truncate(order)
    g = None if order < 1 else np.concatenate([a.g, b.g], axis=1)
    h = None if order < 2 else np.concatenate([a.h, b.h], axis=1)
    return Jet(np.concatenate([a.v, b.v], axis=1), g, h, order)


def _check_regular(group: HTypeGroup, pts: np.ndarray):
    x, t = group.split(pts)
    norm = np.sum(x * x, -1) ** 2 + 16.0 * np.sum(t * t, -1)
    if np.any(norm < 1e-300):
        raise SingularPointError("spherical inversion is singular at the origin")


def spherical_inversion(group: HTypeGroup, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    pts = np.atleast_2d(p)
    _check_regular(group, pts)
    out = _inversion_expr(group, Jet(pts)).v
    return out.reshape(p.shape)


def inversion_jacobian(group: HTypeGroup, p) -> np.ndarray:
    """Exact differential of ``sigma``, shape ``(..., dim, dim)``."""
    p = np.asarray(p, dtype=float)
    pts = np.atleast_2d(p)
    _check_regular(group, pts)
    jac = _inversion_expr(group, Jet.variable(pts, 1)).g
    return jac.reshape(p.shape + (group.dim,))


def horizontal_leakage(group: HTypeGroup, p, jacobian=None) -> np.ndarray:
    """``max_{a,j} |theta^j_{sigma(p)}(d sigma_p X_a(p))|``; zero iff horizontality is kept."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    jac = inversion_jacobian(group, p) if jacobian is None else jacobian
    pushed = np.einsum("nde,nae->nad", jac, group.frame(p))
    forms = group.contact_forms(spherical_inversion(group, p))
    return np.abs(np.einsum("njd,nad->nja", forms, pushed)).max(axis=(1, 2))


@dataclass(frozen=True)
class SphereTransition:
    image: np.ndarray
    weight: float
    span_residual: float
    orthogonality_residual: float
    matrix: np.ndarray


def iwasawa_sphere_transition(group: HTypeGroup, p, C_G: float | None = None) -> SphereTransition:
    """Chart change of the glued structure ``{U^{4/(Q-2)} theta}`` at ``p``.

    Expresses ``sigma^*(w theta^j)`` in the basis ``w theta^i`` with
    ``w = U^{4/(Q-2)}``; the coefficient matrix must be orthogonal for the
    glued forms to carry a consistent scalar product.
    """
    ok, witness = is_iwasawa_type(group.module)
    if not ok:
        raise NotIwasawaError(
            "spherical inversion does not preserve the horizontal distribution for this "
            f"group (witness residual {witness.residual:.3e}); no sphere can be glued")
    if C_G is None:
        C_G = calibrate_profile(group).C_G
    p = np.asarray(p, dtype=float)
    U = GVProfile(group, C_G)
    expo = 4.0 / (group.Q - 2)
    q = spherical_inversion(group, p)
    w_p = float(U(p)) ** expo
    w_q = float(U(q)) ** expo
    jac = inversion_jacobian(group, p)
    pulled = w_q * group.contact_forms(q) @ jac
    basis = w_p * group.contact_forms(p)
    M, *_ = np.linalg.lstsq(basis.T, pulled.T, rcond=None)
    M = M.T
    span = float(np.abs(M @ basis - pulled).max() / np.abs(pulled).max())
    orth = float(np.abs(M @ M.T - np.eye(group.k)).max())
    return SphereTransition(q, w_p, span, orth, M)
