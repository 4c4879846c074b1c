"""Scalar fields with exact 2-jets.

Every field maps a batch of coordinate points ``(..., dim)`` to a :class:`Jet`
through :meth:`ScalarField.jet`.  Closed-form families are written in jet
arithmetic, so value, gradient and Hessian are exact.  User callables written
against numpy can be wrapped in :class:`FiniteDifferenceField`.
"""

from __future__ import annotations

import numpy as np

from .jets import Jet


class ScalarField:
    positive = False

    def expr(self, p: Jet) -> Jet:
        raise NotImplementedError

    def jet(self, points, order: int = 2) -> Jet:
        points = np.asarray(points, dtype=float)
        return self.expr(Jet.variable(points, order))

    def evaluate(self, points):
        """Return ``(value, gradient, hessian)`` at ``points``."""
        j = self.jet(points, 2)
        return j.v, j.g, j.h

    def __call__(self, points):
        return self.jet(points, 0).v

    def __mul__(self, other):
        return Product([self, other])

    def __pow__(self, p):
        return Power(self, p)


class Constant(ScalarField):
    def __init__(self, value: float = 1.0):
        self.value = float(value)
        self.positive = self.value > 0

    def expr(self, p):
        return Jet.constant(np.full(p.shape[:-1], self.value), p.dim, p.order)

    def spec(self):
        return {"family": "constant", "value": self.value}


class GVProfile(ScalarField):
    """``U(x,t) = C ((1 + |x|^2)^2 + 16 |t|^2)^{-(Q-2)/4}``."""

    positive = True

    def __init__(self, group, constant: float = 1.0):
        if not constant > 0:
            raise ValueError("profile constant must be positive")
        self.group = group
        self.constant = float(constant)

    def expr(self, p):
        n2 = self.group.n2
        r2 = (p[..., :n2] * p[..., :n2]).sum(-1)
        t2 = (p[..., n2:] * p[..., n2:]).sum(-1)
        phi = (1.0 + r2) * (1.0 + r2) + 16.0 * t2
        return self.constant * phi ** (-(self.group.Q - 2) / 4.0)

    def spec(self):
        return {"family": "gv-profile", "C": self.constant}


class Gaussian(ScalarField):
    """``base + amp * exp(-sum_i w_i (p_i - c_i)^2)``."""

    def __init__(self, dim: int, amp=0.5, base=1.0, center=None, widths=None):
        self.dim = dim
        self.amp = float(amp)
        self.base = float(base)
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        self.widths = np.ones(dim) if widths is None else np.broadcast_to(
            np.asarray(widths, dtype=float), (dim,)).copy()
        self.positive = self.base > 0 and self.base + min(self.amp, 0.0) > 0

    def expr(self, p):
        d = p - self.center
        q = (d * d * self.widths).sum(-1)
        return self.base + self.amp * (-q).exp()

    def spec(self):
        return {"family": "gaussian", "amp": self.amp, "base": self.base,
                "center": self.center.tolist(), "widths": self.widths.tolist()}


class Polynomial(ScalarField):
    """Quadratic ``c0 + a.p + 1/2 p^T B p`` (B symmetrized)."""

    def __init__(self, dim: int, c0=1.0, linear=None, quadratic=None):
        self.dim = dim
        self.c0 = float(c0)
        self.linear = np.zeros(dim) if linear is None else np.asarray(linear, dtype=float)
        B = np.zeros((dim, dim)) if quadratic is None else np.asarray(quadratic, dtype=float)
        self.quadratic = 0.5 * (B + B.T)

    def expr(self, p):
        lin = (p * self.linear).sum(-1)
        from .jets import contract
        batch = p.shape[:-1]
        flat = p.reshape((int(np.prod(batch, dtype=int)), self.dim))
        Bp = contract("ij,nj->ni", self.quadratic, flat).reshape(batch + (self.dim,))
        return self.c0 + lin + 0.5 * (p * Bp).sum(-1)

    def spec(self):
        return {"family": "poly", "c0": self.c0, "linear": self.linear.tolist(),
                "quadratic": self.quadratic.tolist()}


class ExpQuadratic(ScalarField):
    """``exp(a.p + 1/2 p^T B p)``; strictly positive."""

    positive = True

    def __init__(self, dim: int, linear=None, quadratic=None):
        self.inner = Polynomial(dim, 0.0, linear, quadratic)

    def expr(self, p):
        return self.inner.expr(p).exp()

    def spec(self):
        s = self.inner.spec()
        return {"family": "expquad", "linear": s["linear"], "quadratic": s["quadratic"]}


class Product(ScalarField):
    def __init__(self, factors):
        self.factors = list(factors)
        self.positive = all(f.positive for f in self.factors)

    def expr(self, p):
        out = self.factors[0].expr(p)
        for f in self.factors[1:]:
            out = out * f.expr(p)
        return out

    def spec(self):
        return {"family": "product", "factors": [f.spec() for f in self.factors]}


class Power(ScalarField):
    def __init__(self, base: ScalarField, exponent: float):
        self.base = base
        self.exponent = float(exponent)
        self.positive = base.positive

    def expr(self, p):
        return self.base.expr(p) ** self.exponent

    def spec(self):
        return {"family": "power", "base": self.base.spec(), "exponent": self.exponent}


class Affine(ScalarField):
    """``u(M p + b)``: left translations and dilations are affine in coordinates."""

    def __init__(self, base: ScalarField, matrix, offset):
        self.base = base
        self.matrix = np.asarray(matrix, dtype=float)
        self.offset = np.asarray(offset, dtype=float)
        self.positive = base.positive

    def expr(self, p):
        from .jets import contract
        batch = p.shape[:-1]
        d = self.matrix.shape[0]
        flat = p.reshape((int(np.prod(batch, dtype=int)), p.shape[-1]))
        q = contract("ij,nj->ni", self.matrix, flat).reshape(batch + (d,))
        return self.base.expr(q + self.offset)


def left_translate(field: ScalarField, group, q) -> Affine:
    """The field ``u o L_q``, i.e. ``p -> u(q . p)``."""
    q = np.asarray(q, dtype=float)
    x, t = group.split(q)
    M = np.eye(group.dim)
    # vertical part of q.p picks up 1/2 [x_q, x_p]_j = 1/2 sum_ab c[j,a,b] xq_a xp_b
    M[group.n2:, :group.n2] = 0.5 * np.einsum("jab,a->jb", group.structure_constants, x)
    return Affine(field, M, q)


def dilate(field: ScalarField, group, lam: float) -> Affine:
    """The field ``u o delta_lam``."""
    scale = np.concatenate([np.full(group.n2, lam), np.full(group.k, lam**2)])
    return Affine(field, np.diag(scale), np.zeros(group.dim))


class FiniteDifferenceField(ScalarField):
    """Jets from a plain numpy callable by order-4 central differences.

    The step is ``rel_step * max(1, |p_i|)`` per coordinate.  Derivatives carry
    truncation error of order ``step^4``; use closed-form families when exact
    jets matter.
    """

    def __init__(self, func, dim: int, rel_step: float = 1e-3, positive: bool = False):
        self.func = func
        self.dim = dim
        self.rel_step = rel_step
        self.positive = positive

    def _jet_at(self, p):
        f = self.func
        d = self.dim
        h = self.rel_step * np.maximum(1.0, np.abs(p))
        E = np.eye(d)
        v = f(p)
        g = np.empty(d)
        H = np.empty((d, d))
        w1 = np.array([8.0, -1.0]) / 12.0
        for i in range(d):
            ei = E[i] * h[i]
            g[i] = (w1[0] * (f(p + ei) - f(p - ei)) + w1[1] * (f(p + 2 * ei) - f(p - 2 * ei))) / h[i]
            H[i, i] = (-f(p + 2 * ei) + 16 * f(p + ei) - 30 * v + 16 * f(p - ei) - f(p - 2 * ei)) / (12 * h[i] ** 2)
        for i in range(d):
            for j in range(i + 1, d):
                ei, ej = E[i] * h[i], E[j] * h[j]

                def mixed(s):
                    return (f(p + s * ei + s * ej) - f(p + s * ei - s * ej)
                            - f(p - s * ei + s * ej) + f(p - s * ei - s * ej)) / (4 * s * s * h[i] * h[j])

                H[i, j] = H[j, i] = (4 * mixed(1.0) - mixed(2.0)) / 3.0
        return v, g, H

    def jet(self, points, order=2):
        points = np.asarray(points, dtype=float)
        batch = points.shape[:-1]
        flat = points.reshape(-1, self.dim)
        parts = [self._jet_at(p) for p in flat]
        v = np.array([q[0] for q in parts]).reshape(batch)
        g = np.array([q[1] for q in parts]).reshape(batch + (self.dim,))
        H = np.array([q[2] for q in parts]).reshape(batch + (self.dim, self.dim))
        return Jet(v, g, H, min(order, 2))

    def expr(self, p):
        if p.order > 0 and not np.allclose(p.g, np.eye(self.dim)):
            raise ValueError("finite-difference fields only accept coordinate jets")
        return self.jet(p.v, p.order)


def random_positive_fields(dim: int, count: int, seed: int = 0) -> list:
    """Deterministic family of smooth positive fields (gaussian bumps and exp-quadratics)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        if i % 2 == 0:
            out.append(Gaussian(dim, amp=rng.uniform(-0.5, 0.8), base=1.0,
                                center=rng.uniform(-1.0, 1.0, dim),
                                widths=rng.uniform(0.2, 1.0, dim)))
        else:
            B = rng.normal(scale=0.3, size=(dim, dim))
            out.append(ExpQuadratic(dim, rng.normal(scale=0.4, size=dim), -(B @ B.T) / dim))
    return out
