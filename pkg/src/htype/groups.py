"""H-type groups in exponential coordinates.

Points are arrays ``(x, t)`` concatenated into a single coordinate vector of
length ``2n + k``; batches carry a leading axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordModule, verify_clifford
from .jets import Jet


@dataclass(frozen=True)
class GroupPoint:
    x: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        t = np.asarray(self.t, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t))):
            raise ValueError("group point coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([self.x, self.t])

    @classmethod
    def parse(cls, text: str) -> "GroupPoint":
        """Parse ``"x1,...,x2n;t1,...,tk"``."""
        try:
            xs, ts = text.split(";")
            return cls([float(v) for v in xs.split(",")], [float(v) for v in ts.split(",")])
        except ValueError as exc:
            raise ValueError(f"malformed point {text!r}; expected 'x1,...,x2n;t1,...,tk'") from exc


@dataclass(frozen=True)
class HTypeGroup:
    module: CliffordModule
    structure_constants: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        # c[j, a, b] = <J_j e_a, e_b> = (J_j)[b, a]
        c = np.transpose(self.module.generators, (0, 2, 1)).copy()
        c.setflags(write=False)
        object.__setattr__(self, "structure_constants", c)

    @classmethod
    def from_module(cls, module: CliffordModule, tol: float = 1e-10) -> "HTypeGroup":
        report = verify_clifford(module, tol)
        if not report.passed:
            raise ValueError(
                "module fails the Clifford relations "
                f"(antisymmetry {report.antisymmetry_residual:.3e}, "
                f"relation {report.clifford_residual:.3e})")
        return cls(module)

    @property
    def n2(self) -> int:
        return self.module.n2

    @property
    def k(self) -> int:
        return self.module.k

    @property
    def dim(self) -> int:
        return self.n2 + self.k

    @property
    def Q(self) -> int:
        """Homogeneous dimension."""
        return self.n2 + 2 * self.k

    @property
    def critical_exponent(self) -> float:
        return (self.Q + 2) / (self.Q - 2)

    def split(self, p):
        p = np.asarray(p, dtype=float)
        return p[..., :self.n2], p[..., self.n2:]

    def bracket(self, X, Y) -> np.ndarray:
        """Vertical bracket ``[X, Y]_j = sum c[j,a,b] X_a Y_b``."""
        return np.einsum("jab,...a,...b->...j", self.structure_constants, X, Y)

    # ------------------------------------------------------------ group law
    def multiply(self, p, q) -> np.ndarray:
        x, t = self.split(p)
        y, s = self.split(q)
        return np.concatenate([x + y, t + s + 0.5 * self.bracket(x, y)], axis=-1)

    def inverse(self, p) -> np.ndarray:
        return -np.asarray(p, dtype=float)

    def dilate(self, lam: float, p) -> np.ndarray:
        if not lam > 0:
            raise ValueError("dilation factor must be positive")
        x, t = self.split(p)
        return np.concatenate([lam * x, lam**2 * t], axis=-1)

    # ---------------------------------------------------------------- frame
    def frame(self, p) -> np.ndarray:
        """Left-invariant horizontal frame in coordinates, shape ``(..., 2n, 2n+k)``.

        ``X_a = d/dx_a + 1/2 sum_j (J_j x)_a d/dt_j``.
        """
        x, _ = self.split(p)
        Jx = np.einsum("jab,...b->...aj", self.module.generators, x)
        eye = np.broadcast_to(np.eye(self.n2), x.shape[:-1] + (self.n2, self.n2))
        return np.concatenate([eye, 0.5 * Jx], axis=-1)

    def frame_jet(self, p: Jet) -> Jet:
        """The frame as a polynomial jet of a coordinate jet ``p`` (shape ``(dim,)``)."""
        from .jets import contract, stack
        x = p[: self.n2]
        Jx = contract("jab,b->aj", self.module.generators, x)
        rows = []
        for a in range(self.n2):
            e = np.zeros(self.n2)
            e[a] = 1.0
            rows.append(stack([Jet.constant(e[b], p.dim, p.order) for b in range(self.n2)]
                              + [Jx[a, j] * 0.5 for j in range(self.k)]))
        return stack(rows)

    def contact_forms(self, p) -> np.ndarray:
        """Coefficients of ``theta^j = dt_j - 1/2 sum c[j,a,b] x_a dx_b``, shape ``(..., k, dim)``."""
        x, _ = self.split(p)
        horiz = -0.5 * np.einsum("jab,...a->...jb", self.structure_constants, x)
        eye = np.broadcast_to(np.eye(self.k), x.shape[:-1] + (self.k, self.k))
        return np.concatenate([horiz, eye], axis=-1)

    # ------------------------------------------------------ differentiation
    def horizontal_gradient(self, field, p) -> np.ndarray:
        """``(X_a u)(p)`` for a scalar field with exact jets."""
        _, grad, _ = field.evaluate(p)
        return np.einsum("...ad,...d->...a", self.frame(p), grad)

    def sublaplacian(self, field, p) -> np.ndarray:
        """``sum_a X_a^2 u`` at ``p``; equals ``tr(A H A^T)`` since ``X_a`` of its own
        coefficients vanishes."""
        _, _, hess = field.evaluate(p)
        A = self.frame(p)
        return np.einsum("...ad,...de,...ae->...", A, hess, A)
