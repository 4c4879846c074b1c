"""Yamabe quotient on coordinate tori and its minimization.

The torus is a box of periods ``L_i`` with cell-centred nodes
``x_i = (i + 1/2) h_i``.  Horizontal derivatives use the left-invariant frame
``X_a = d_a + 1/2 sum_j (J_j x)_a d_{t_j}`` with ``x`` taken in the fundamental
cell, so the frame coefficients are not periodic: this is a model surrogate for
a genuine nilmanifold quotient.  Cell-centred nodes keep the midpoint rule
second-order accurate despite that jump.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .groups import HTypeGroup

_STENCILS = {2: ((1, 0.5),), 4: ((1, 2.0 / 3.0), (2, -1.0 / 12.0))}


class DomainError(ValueError):
    """A field that must be positive is not."""


@dataclass(frozen=True)
class TorusGrid:
    group: HTypeGroup
    resolution: tuple
    periods: tuple
    stencil: int = 2

    def __init__(self, group, resolution, periods=1.0, stencil=2):
        dim = group.dim
        res = tuple(int(r) for r in np.broadcast_to(resolution, (dim,)))
        per = tuple(float(p) for p in np.broadcast_to(periods, (dim,)))
        if any(r < 4 for r in res):
            raise ValueError("need at least 4 nodes per axis")
        if any(not p > 0 for p in per):
            raise ValueError("periods must be positive")
        if stencil not in _STENCILS:
            raise ValueError("stencil order must be 2 or 4")
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "periods", per)
        object.__setattr__(self, "stencil", stencil)

    @property
    def spacing(self) -> np.ndarray:
        return np.array(self.periods) / np.array(self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    def axes(self):
        return [(np.arange(r) + 0.5) * h for r, h in zip(self.resolution, self.spacing)]

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``resolution + (dim,)`` (row-major)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def frame_coefficients(self) -> np.ndarray:
        """``b[a, j] = 1/2 (J_j x)_a`` at the nodes, shape ``resolution + (2n, k)``."""
        x = self.nodes()[..., : self.group.n2]
        return 0.5 * np.einsum("jab,...b->...aj", self.group.module.generators, x)

    def sample(self, field) -> np.ndarray:
        pts = self.nodes().reshape(-1, self.group.dim)
        return np.asarray(field(pts)).reshape(self.resolution)

    def to_dict(self) -> dict:
        return {"resolution": list(self.resolution), "periods": list(self.periods),
                "stencil": self.stencil, "cell_volume": self.cell_volume}

    # ---------------------------------------------------------- operators
    def diff(self, u: np.ndarray, axis: int) -> np.ndarray:
        """Central periodic difference along ``axis`` (antisymmetric operator)."""
        h = self.spacing[axis]
        out = np.zeros_like(u)
        for shift, w in _STENCILS[self.stencil]:
            out += w * (np.roll(u, -shift, axis) - np.roll(u, shift, axis))
        return out / h

    def horizontal_gradient(self, u: np.ndarray) -> np.ndarray:
        """``D_a u`` for every horizontal index, shape ``(2n,) + resolution``."""
        n2 = self.group.n2
        b = self.frame_coefficients()
        dt = [self.diff(u, n2 + j) for j in range(self.group.k)]
        return np.stack([self.diff(u, a) + sum(b[..., a, j] * dt[j] for j in range(len(dt)))
                         for a in range(n2)])

    def horizontal_gradient_T(self, w: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`horizontal_gradient` for the plain node sum."""
        n2 = self.group.n2
        b = self.frame_coefficients()
        out = np.zeros(self.resolution)
        for a in range(n2):
            out -= self.diff(w[a], a)
            for j in range(self.group.k):
                out -= self.diff(b[..., a, j] * w[a], n2 + j)
        return out

    def sublaplacian(self, u: np.ndarray) -> np.ndarray:
        """Discrete ``Delta = -D^T D``, consistent with the quotient's energy."""
        return -self.horizontal_gradient_T(self.horizontal_gradient(u))


# ------------------------------------------------------------------ quotient
def critical_power(group: HTypeGroup) -> float:
    return 2.0 * group.Q / (group.Q - 2)


def _check_positive(u):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("field has non-finite entries")
    if np.any(u <= 0):
        raise DomainError("field must be strictly positive")
    return u


def _parts(grid: TorusGrid, u, C, K, metric=None):
    """Energy and normalization integrals; ``metric`` is the factor ``f`` of ``f g``."""
    u = _check_positive(u)
    p = critical_power(grid.group)
    Q = grid.group.Q
    vol = grid.cell_volume
    Du = grid.horizontal_gradient(u)
    if metric is None:
        wg = wv = 1.0
    else:
        f = _check_positive(metric)
        wv = f ** (Q / 2.0)  # volume density of f g
        wg = wv / f  # |grad~ u|^2 = |grad u|^2 / f
    E = vol * float(np.sum(wg * C * np.sum(Du * Du, axis=0) + wv * K * u * u))
    S = vol * float(np.sum(wv * u**p))
    return E, S, Du, p, wg, wv


def yamabe_quotient(grid: TorusGrid, u, C: float, K=0.0, metric=None) -> float:
    """``(sum C |D u|^2 + K u^2) vol / (sum u^p vol)^{2/p}`` with ``p = 2Q/(Q-2)``."""
    E, S, _, p, _, _ = _parts(grid, u, C, K, metric)
    return E / S ** (2.0 / p)


def yamabe_gradient(grid: TorusGrid, u, C: float, K=0.0) -> np.ndarray:
    """Gradient of the quotient with respect to the node values of ``u``."""
    E, S, Du, p, _, _ = _parts(grid, u, C, K)
    vol = grid.cell_volume
    gE = vol * (2.0 * C * grid.horizontal_gradient_T(Du) + 2.0 * K * u)
    N = S ** (2.0 / p)
    gN = 2.0 * vol * S ** (2.0 / p - 1.0) * u ** (p - 1.0)
    return (gE * N - E * gN) / (N * N)


def conformal_curvature_field(grid: TorusGrid, v, C: float) -> np.ndarray:
    """Discrete ``K~ = v^{-(Q+2)/(Q-2)} (-C Delta v)`` of ``v^{4/(Q-2)} g`` on the flat torus."""
    v = _check_positive(v)
    return v ** (-grid.group.critical_exponent) * (-C * grid.sublaplacian(v))


# ---------------------------------------------------------------- minimizer
@dataclass
class YamabeResult:
    quotient: float
    iterations: int
    history: list
    steps: list
    grid: dict
    C: float
    K_source: str
    converged: bool
    stagnated: bool
    reason: str
    u: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"quotient": self.quotient, "iterations": self.iterations,
                "history": list(self.history), "steps": list(self.steps), "grid": self.grid,
                "C": self.C, "K_source": self.K_source, "converged": self.converged,
                "stagnated": self.stagnated, "reason": self.reason}

    def csv_log(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "quotient", "step"])
        for i, (q, s) in enumerate(zip(self.history, self.steps)):
            w.writerow([i, repr(float(q)), repr(float(s))])
        return buf.getvalue()


def random_positive_grid(grid: TorusGrid, seed: int = 0, modes: int = 3,
                         amplitude: float = 0.3, max_wavenumber: int = 2) -> np.ndarray:
    """Smooth positive field ``exp(sum of random low Fourier modes)``."""
    rng = np.random.default_rng(seed)
    X = grid.nodes()
    L = np.array(grid.periods)
    s = np.zeros(grid.resolution)
    for _ in range(modes):
        kvec = rng.integers(-max_wavenumber, max_wavenumber + 1, size=grid.group.dim)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        s += rng.normal() * np.cos(2.0 * np.pi * (X @ (kvec / L)) + phase)
    return np.exp(amplitude * s / math.sqrt(modes))


def normalize(grid: TorusGrid, u) -> np.ndarray:
    p = critical_power(grid.group)
    return u / (grid.cell_volume * np.sum(u**p)) ** (1.0 / p)


def minimize(grid: TorusGrid, u0, C: float, K=0.0, max_iters: int = 500, tol: float = 1e-6,
             rel_tol: float = 1e-10, window: int = 20, armijo: float = 1e-4,
             max_halvings: int = 60, K_source: str = "flat") -> YamabeResult:
    """Gradient descent on ``v = log u`` with backtracking and renormalization.

    Stops when the quotient drops below ``tol``, when its relative decrease over
    ``window`` accepted steps is below ``rel_tol``, or after ``max_iters``.
    """
    u = normalize(grid, _check_positive(u0))
    q = yamabe_quotient(grid, u, C, K)
    history, steps = [q], [0.0]
    alpha = 1.0
    stagnated = converged = False
    reason = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        if q <= tol:
            converged, reason = True, "tolerance"
            it -= 1
            break
        g = u * yamabe_gradient(grid, u, C, K)  # chain rule for u = exp(v)
        g2 = float(np.sum(g * g))
        if g2 == 0.0:
            converged, reason = True, "zero_gradient"
            it -= 1
            break
        accepted = False
        for _ in range(max_halvings):
            trial = normalize(grid, u * np.exp(-alpha * g))
            qt = yamabe_quotient(grid, trial, C, K)
            if qt <= q - armijo * alpha * g2:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            stagnated, reason = True, "line_search"
            it -= 1
            break
        u, q = trial, qt
        history.append(q)
        steps.append(alpha)
        alpha *= 2.0
        if len(history) > window:
            old = history[-1 - window]
            if old != 0 and (old - q) / abs(old) < rel_tol:
                converged, reason = True, "stagnation"
                break
    if q <= tol:
        converged, reason = True, "tolerance"
    return YamabeResult(q, it, history, steps, grid.to_dict(), C, K_source, converged,
                        stagnated, reason, u)


# ------------------------------------------------------------ model value
@dataclass(frozen=True)
class ModelQuotient:
    value: float
    box_value: float
    tail: float
    quad_error: float

    def to_dict(self) -> dict:
        return {"value": self.value, "box_value": self.box_value, "tail": self.tail,
                "quad_error": self.quad_error}


def heisenberg_model_quotient(C: float, C_G: float = 2.0, box: float = 20.0) -> ModelQuotient:
    """Quotient of the calibrated profile on the first Heisenberg group by quadrature.

    Uses cylindrical coordinates ``(r, t)``, where
    ``|grad_h U|^2 = U_r^2 + r^2 U_t^2 / 4``.  The full-space value integrates the
    ``t`` direction in closed form and ``r`` by adaptive quadrature; ``box_value``
    is a plain 2-D quadrature over ``r <= box, |t| <= box^2`` and ``tail`` is
    the gap between the two.
    """
    def phi(r, t):
        return (1.0 + r * r) ** 2 + 16.0 * t * t

    def grad2(t, r):
        ph = phi(r, t)
        Ur = -0.5 * C_G * ph ** -1.5 * 4.0 * r * (1.0 + r * r)
        Ut = -0.5 * C_G * ph ** -1.5 * 32.0 * t
        return 2.0 * np.pi * r * (Ur * Ur + 0.25 * r * r * Ut * Ut)

    def u4(t, r):
        return 2.0 * np.pi * r * C_G**4 / phi(r, t) ** 2

    def full(which):
        # t-integrals in closed form: int dt / (a^2 + 16 t^2)^m for m = 2, 3
        def radial(r):
            a = 1.0 + r * r
            if which == "u4":
                return 2.0 * np.pi * r * C_G**4 * np.pi / (8.0 * a**3)
            grad_r = 4.0 * C_G**2 * r * r * a * a * 3.0 * np.pi / (32.0 * a**5)
            grad_t = 64.0 * C_G**2 * r * r * np.pi / (512.0 * a**3)
            return 2.0 * np.pi * r * (grad_r + grad_t)

        return integrate.quad(radial, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)

    def boxed(fn):
        inner = lambda r: 2.0 * integrate.quad(fn, 0.0, box**2, args=(r,), epsabs=1e-15, epsrel=1e-11)[0]  # noqa: E731
        return integrate.quad(inner, 0.0, box, epsabs=1e-14, epsrel=1e-10, limit=200)

    G, eg = full("grad")
    V, ev = full("u4")
    Gb, _ = boxed(grad2)
    Vb, _ = boxed(u4)
    value = C * G / math.sqrt(V)
    box_value = C * Gb / math.sqrt(Vb)
    return ModelQuotient(value, box_value, abs(value - box_value), float(eg + ev))
