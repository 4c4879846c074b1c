"""Tensor-valued truncated Taylor jets (forward-mode derivatives up to order 2).

A :class:`Jet` carries a value array ``v`` of shape ``S``, its gradient ``g`` of
shape ``S + (d,)`` and its Hessian ``h`` of shape ``S + (d, d)`` with respect to
``d`` coordinates.  Arithmetic propagates derivatives exactly, so fields built
from jets give exact 2-jets at any point.  ``order`` records how many derivative
levels are still valid (taking a partial derivative drops one).
"""

from __future__ import annotations

import numpy as np


class Jet:
    __array_priority__ = 100

    def __init__(self, v, g=None, h=None, order=None):
        self.v = np.asarray(v, dtype=float)
        self.g = None if g is None else np.asarray(g, dtype=float)
        self.h = None if h is None else np.asarray(h, dtype=float)
        if order is None:
            order = 0 if self.g is None else (1 if self.h is None else 2)
        self.order = order
        if order < 2:
            self.h = None
        if order < 1:
            self.g = None

    # ------------------------------------------------------------------ basics
    @property
    def shape(self):
        return self.v.shape

    @property
    def ndim(self):
        return self.v.ndim

    @property
    def dim(self):
        return None if self.g is None else self.g.shape[-1]

    @classmethod
    def variable(cls, point, order=2):
        """Coordinate jet: value ``point`` (shape ``(..., d)``), gradient identity."""
        point = np.asarray(point, dtype=float)
        d = point.shape[-1]
        g = np.broadcast_to(np.eye(d), point.shape + (d,)).copy()
        h = np.zeros(point.shape + (d, d)) if order >= 2 else None
        return cls(point, g if order >= 1 else None, h, order)

    @classmethod
    def constant(cls, value, dim, order=2):
        value = np.asarray(value, dtype=float)
        g = np.zeros(value.shape + (dim,)) if order >= 1 else None
        h = np.zeros(value.shape + (dim, dim)) if order >= 2 else None
        return cls(value, g, h, order)

    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        other = np.asarray(other, dtype=float)
        d = self.dim or 0
        return Jet.constant(other, d, self.order)

    def truncate(self, order):
        return Jet(self.v, self.g, self.h, min(order, self.order))

    def partial(self):
        """Coordinate gradient as a jet of one lower order (new trailing axis)."""
        if self.order < 1:
            raise ValueError("jet carries no derivative information")
        return Jet(self.g, self.h, None, self.order - 1)

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order})"

    # --------------------------------------------------------------- indexing
    def _key(self, key, extra):
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            return key + (slice(None),) * extra
        return key + (slice(None),) * (self.ndim - len(key)) + (slice(None),) * extra

    def __getitem__(self, key):
        g = None if self.g is None else self.g[self._key(key, 1)]
        h = None if self.h is None else self.h[self._key(key, 2)]
        return Jet(self.v[key], g, h, self.order)

    def _axis(self, axis):
        return axis % self.ndim

    def sum(self, axis=None):
        if axis is None:
            axes = tuple(range(self.ndim))
        else:
            axes = (self._axis(axis),)
        g = None if self.g is None else self.g.sum(axis=axes)
        h = None if self.h is None else self.h.sum(axis=axes)
        return Jet(self.v.sum(axis=axes), g, h, self.order)

    def reshape(self, *shape):
        shape = tuple(shape[0]) if len(shape) == 1 and isinstance(shape[0], tuple) else shape
        d = self.dim
        g = None if self.g is None else self.g.reshape(shape + (d,))
        h = None if self.h is None else self.h.reshape(shape + (d, d))
        return Jet(self.v.reshape(shape), g, h, self.order)

    def transpose(self, *axes):
        n = self.ndim
        g = None if self.g is None else self.g.transpose(tuple(axes) + (n,))
        h = None if self.h is None else self.h.transpose(tuple(axes) + (n, n + 1))
        return Jet(self.v.transpose(axes), g, h, self.order)

    def __neg__(self):
        return Jet(-self.v, None if self.g is None else -self.g,
                   None if self.h is None else -self.h, self.order)

    # ------------------------------------------------------------- arithmetic
    def __add__(self, other):
        other = self._lift(other)
        order = min(self.order, other.order)
        g = h = None
        if order >= 1:
            g = self.g + other.g
        if order >= 2:
            h = self.h + other.h
        return Jet(self.v + other.v, g, h, order)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        order = min(self.order, other.order)
        a, b = self, other
        g = h = None
        if order >= 1:
            g = a.g * b.v[..., None] + a.v[..., None] * b.g
        if order >= 2:
            h = (a.h * b.v[..., None, None] + a.v[..., None, None] * b.h
                 + a.g[..., :, None] * b.g[..., None, :]
                 + b.g[..., :, None] * a.g[..., None, :])
        return Jet(a.v * b.v, g, h, order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * self._lift(other).reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, p):
        p = float(p)
        v = self.v
        return self.apply(v ** p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def apply(self, f0, f1, f2):
        """Compose with a univariate function given its value and two derivatives."""
        g = h = None
        if self.order >= 1:
            g = f1[..., None] * self.g
        if self.order >= 2:
            h = (f2[..., None, None] * self.g[..., :, None] * self.g[..., None, :]
                 + f1[..., None, None] * self.h)
        return Jet(f0, g, h, self.order)

    def reciprocal(self):
        v = self.v
        return self.apply(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def exp(self):
        e = np.exp(self.v)
        return self.apply(e, e, e)

    def log(self):
        v = self.v
        return self.apply(np.log(v), 1.0 / v, -1.0 / v**2)

    def sin(self):
        s, c = np.sin(self.v), np.cos(self.v)
        return self.apply(s, c, -s)

    def cos(self):
        s, c = np.sin(self.v), np.cos(self.v)
        return self.apply(c, -s, -c)


def stack(jets, axis=0):
    """Stack jets of equal shape along a new leading value axis."""
    order = min(j.order for j in jets)
    jets = [j.truncate(order) for j in jets]
    ax = axis % (jets[0].ndim + 1)
    g = h = None
    if order >= 1:
        g = np.stack([j.g for j in jets], axis=ax)
    if order >= 2:
        h = np.stack([j.h for j in jets], axis=ax)
    return Jet(np.stack([j.v for j in jets], axis=ax), g, h, order)


def contract(spec, a, b):
    """Bilinear contraction ``einsum(spec, a, b)`` with Leibniz-rule derivatives.

    Either operand may be a plain array (treated as constant).  ``spec`` must not
    use the letters ``y`` or ``z`` (reserved for derivative axes).
    """
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    a_jet, b_jet = isinstance(a, Jet), isinstance(b, Jet)
    if not a_jet and not b_jet:
        return np.einsum(spec, a, b)
    av = a.v if a_jet else np.asarray(a, dtype=float)
    bv = b.v if b_jet else np.asarray(b, dtype=float)
    order = min(j.order for j in (a, b) if isinstance(j, Jet))
    v = np.einsum(spec, av, bv)
    g = h = None
    if order >= 1:
        g = 0.0
        if a_jet:
            g = g + np.einsum(f"{sa}z,{sb}->{out}z", a.g, bv)
        if b_jet:
            g = g + np.einsum(f"{sa},{sb}z->{out}z", av, b.g)
    if order >= 2:
        h = 0.0
        if a_jet:
            h = h + np.einsum(f"{sa}zy,{sb}->{out}zy", a.h, bv)
        if b_jet:
            h = h + np.einsum(f"{sa},{sb}zy->{out}zy", av, b.h)
        if a_jet and b_jet:
            cross = np.einsum(f"{sa}z,{sb}y->{out}zy", a.g, b.g)
            h = h + cross + np.swapaxes(cross, -1, -2)
    return Jet(v, g, h, order)


def linear(matrix, jet):
    """Apply a constant matrix to the flattened value axes of ``jet``."""
    matrix = np.asarray(matrix, dtype=float)
    flat = jet.reshape(int(np.prod(jet.shape)))
    return contract("ij,j->i", matrix, flat)
