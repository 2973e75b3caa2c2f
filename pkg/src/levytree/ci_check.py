"""Numerical checks of conditional independence for Levy measures with densities.

Two checks are provided:

* ``factorization_residual`` compares ``lambda(y) lambda_C(y_C)`` with
  ``lambda_{A u C}(y_{A u C}) lambda_{B u C}(y_{B u C})`` pointwise.
* ``rectangle_ci_check`` discretizes the measure restricted to a product set
  bounded away from the origin and tests ``P(a, b | c) = P(a | c) P(b | c)``
  cell by cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .measures import HRParams

MAX_RECT_DIM = 4
MIN_MASS = 1e-12


class HRDensity:
    """Husler-Reiss density on the positive orthant with sub-matrix marginals."""

    def __init__(self, gamma):
        self.params = gamma if isinstance(gamma, HRParams) else HRParams(gamma)

    @property
    def d(self) -> int:
        return self.params.d

    def density(self, y):
        return self.params.density(y)

    def marginal_density(self, idx, y_idx):
        idx = sorted(int(v) for v in idx)
        y_idx = np.asarray(y_idx, dtype=float)
        if len(idx) == self.d:
            return self.density(y_idx)
        if len(idx) == 1:
            return y_idx[..., 0] ** -2.0
        return self.params.sub(idx).density(y_idx)


def _partition(d: int, a, b, c):
    a, b, c = (sorted(int(v) for v in s) for s in (a, b, c))
    allv = a + b + c
    if len(set(allv)) != len(allv):
        raise ValidationError("partition blocks must be disjoint")
    if sorted(allv) != list(range(d)):
        raise ValidationError(f"partition must cover all {d} coordinates")
    if not a:
        raise ValidationError("block A must be non-empty")
    if not c:
        raise ValidationError("conditioning block C must be non-empty")
    return a, b, c


def _density_fn(density):
    if hasattr(density, "density"):
        return density.density
    if callable(density):
        return density
    raise ValidationError("density must be callable or expose .density")


def factorization_residual(density, a, b, c, points) -> float:
    """Maximum relative residual of the conditional-independence factorization.

    ``density`` must expose ``d``, ``density(y)`` and
    ``marginal_density(idx, y_idx)`` (e.g. ``TreeModel`` or ``HRDensity``).
    """
    y = np.atleast_2d(np.asarray(points, dtype=float))
    d = density.d
    if y.shape[-1] != d:
        raise ValidationError(f"points must have {d} columns")
    a, b, c = _partition(d, a, b, c)
    if not b:
        return 0.0
    ac, bc = sorted(a + c), sorted(b + c)
    lam = density.density(y)
    lam_c = density.marginal_density(c, y[:, c])
    lam_ac = density.marginal_density(ac, y[:, ac])
    lam_bc = density.marginal_density(bc, y[:, bc])
    lhs = lam * lam_c
    return float(np.max(np.abs(lhs - lam_ac * lam_bc) / lhs))


@dataclass(frozen=True)
class Rectangle:
    """Product of closed intervals ``[lower_i, upper_i]`` with a grid size per axis.

    Each interval must lie strictly on one side of zero so that the set is
    bounded away from the origin and admits a logarithmic grid.
    """

    lower: tuple
    upper: tuple
    resolution: tuple | int = 64

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValidationError("lower and upper must have the same positive length")
        res = self.resolution
        res = (int(res),) * len(lo) if np.isscalar(res) else tuple(int(r) for r in res)
        if len(res) != len(lo) or min(res) < 1:
            raise ValidationError("resolution must be positive, one per coordinate")
        for i, (l, u) in enumerate(zip(lo, hi)):
            if not (np.isfinite(l) and np.isfinite(u) and l < u):
                raise ValidationError(f"interval {i}: need finite lower < upper, got [{l}, {u}]")
            if l <= 0 <= u:
                raise DomainError(f"interval {i} = [{l}, {u}] touches zero")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "resolution", res)

    @property
    def d(self) -> int:
        return len(self.lower)

    def with_resolution(self, res) -> "Rectangle":
        return Rectangle(self.lower, self.upper, res)

    def axis(self, i: int):
        """Cell midpoints and widths in ``y`` for a uniform grid in ``log|y|``."""
        l, u = self.lower[i], self.upper[i]
        sign = 1.0 if l > 0 else -1.0
        lo, hi = sorted((abs(l), abs(u)))
        edges = np.linspace(np.log(lo), np.log(hi), self.resolution[i] + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        # dy = |y| dlog|y|
        return sign * np.exp(mid), np.exp(mid) * np.diff(edges)


def rectangle_masses(density, rect: Rectangle) -> np.ndarray:
    """Cell masses of the measure on the rectangle grid (midpoint rule in log coordinates)."""
    if rect.d > MAX_RECT_DIM:
        raise ValidationError(f"rectangle checks support at most {MAX_RECT_DIM} dimensions")
    axes = [rect.axis(i) for i in range(rect.d)]
    grids = np.meshgrid(*[m for m, _ in axes], indexing="ij")
    y = np.stack(grids, axis=-1)
    vals = np.asarray(_density_fn(density)(y), dtype=float)
    w = np.ones(vals.shape)
    for i, (_, width) in enumerate(axes):
        shape = [1] * rect.d
        shape[i] = -1
        w = w * width.reshape(shape)
    return vals * w


@dataclass(frozen=True)
class CIReport:
    passed: bool
    violation: float
    tolerance: float
    mass: float
    resolution: tuple


def rectangle_ci_check(density, rect: Rectangle, a, b, c, tol: float = 1e-3) -> CIReport:
    """Discretized conditional-independence check on a rectangle.

    The violation is ``max_c sum_{a,b} |P(a,b|c) - P(a|c) P(b|c)|``, the
    largest L1 distance between the conditional law and the product of its
    conditional margins over the conditioning cells.  It does not shrink
    with the grid size, so a fixed tolerance is meaningful.
    """
    a, b, c = _partition(rect.d, a, b, c)
    p = rectangle_masses(density, rect)
    mass = float(p.sum())
    if not np.isfinite(mass):
        raise ValidationError("density is not finite on the rectangle")
    if mass <= MIN_MASS:
        raise DomainError(f"rectangle has mass {mass:.3g} <= {MIN_MASS}: not a valid conditioning set")
    if not b:
        return CIReport(True, 0.0, tol, mass, rect.resolution)
    res = rect.resolution
    na = int(np.prod([res[i] for i in a]))
    nb = int(np.prod([res[i] for i in b]))
    nc = int(np.prod([res[i] for i in c]))
    joint = np.transpose(p / mass, a + b + c).reshape(na, nb, nc)
    pc = joint.sum(axis=(0, 1))
    keep = pc > 0
    cond = joint[:, :, keep] / pc[keep]
    pa = cond.sum(axis=1)
    pb = cond.sum(axis=0)
    diff = np.abs(cond - pa[:, None, :] * pb[None, :, :]).sum(axis=(0, 1))
    viol = float(diff.max()) if diff.size else 0.0
    return CIReport(viol <= tol, viol, tol, mass, rect.resolution)
