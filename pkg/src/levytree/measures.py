"""Standardized Levy measures: Husler-Reiss and Clayton families.

All measures here are -1-homogeneous with standardized margins,
``Lambda*(y_i > x) = Lambda*(y_i < -x) = 1/x``.  Functions named ``*_tail`` and
``*_density`` describe the part of the measure living on the positive orthant;
mass on the other orthants is obtained by multiplying with orthant weights
(:func:`orthant_weight`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import ndtr, ndtri
from scipy.stats import multivariate_normal

from .errors import DomainError, ValidationError

FAMILIES = ("hr", "clayton", "independence")

_PINV_RTOL = 1e-10


def normal_cdf(x):
    return ndtr(x)


def normal_ppf(p):
    return ndtri(p)


def _positive(x, name="x"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DomainError(f"{name} must be strictly positive and finite")
    return x


# ---------------------------------------------------------------------------
# Husler-Reiss
# ---------------------------------------------------------------------------


def _centering(d: int) -> np.ndarray:
    return np.eye(d) - np.full((d, d), 1.0 / d)


def validate_variogram(gamma) -> np.ndarray:
    """Check the Husler-Reiss parameter invariants and return a float copy.

    Raises :class:`ValidationError` naming the first violated invariant:
    shape, symmetry, zero diagonal, non-negativity or strict conditional
    negative definiteness.
    """
    g = np.array(gamma, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 2:
        raise ValidationError(f"variogram must be a square matrix with d >= 2, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValidationError("variogram has non-finite entries")
    scale = max(1.0, float(np.abs(g).max()))
    if not np.allclose(g, g.T, rtol=0, atol=1e-10 * scale):
        raise ValidationError("variogram is not symmetric")
    if np.any(np.abs(np.diag(g)) > 1e-12 * scale):
        raise ValidationError("variogram diagonal must be zero")
    if np.any(g < 0):
        raise ValidationError("variogram entries must be non-negative")
    g = (g + g.T) / 2
    np.fill_diagonal(g, 0.0)
    basis = linalg.null_space(np.ones((1, g.shape[0])))
    eig = np.linalg.eigvalsh(basis.T @ (-g / 2) @ basis)
    if eig.min() <= 1e-12 * scale:
        raise ValidationError(
            "variogram is not strictly conditionally negative definite "
            f"(smallest eigenvalue on the complement of 1 is {eig.min():.3g})"
        )
    return g


def _pinv_sym(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Pseudo-inverse of a symmetric PSD matrix and its pseudo-determinant."""
    w, v = np.linalg.eigh(a)
    cutoff = _PINV_RTOL * w.max()
    keep = w > cutoff
    inv = (v[:, keep] / w[keep]) @ v[:, keep].T
    pdet = float(np.prod(1.0 / w[keep]))
    return (inv + inv.T) / 2, pdet


def hr_gamma_to_theta(gamma) -> np.ndarray:
    """Precision matrix ``(P (-gamma/2) P)^+`` with ``P = I - 11^T/d``.

    >>> hr_gamma_to_theta([[0, 2], [2, 0]])
    array([[ 0.5, -0.5],
           [-0.5,  0.5]])
    """
    g = validate_variogram(gamma)
    p = _centering(g.shape[0])
    theta, _ = _pinv_sym(p @ (-g / 2) @ p)
    return theta


def hr_theta_to_gamma(theta) -> np.ndarray:
    """Inverse map: ``gamma_ij = S_ii + S_jj - 2 S_ij`` with ``S = theta^+``."""
    t = np.asarray(theta, dtype=float)
    s, _ = _pinv_sym((t + t.T) / 2)
    diag = np.diag(s)
    g = diag[:, None] + diag[None, :] - 2 * s
    np.fill_diagonal(g, 0.0)
    return g


@dataclass(frozen=True)
class HRParams:
    """Husler-Reiss parameters; derived quantities are computed once.

    ``mu`` is the location of the log-Gaussian kernel and ``log_norm_const``
    the log of the constant that makes ``Lambda*(y_i > 1) = 1`` for every i.
    """

    gamma: np.ndarray
    theta: np.ndarray = field(init=False, repr=False)
    sigma: np.ndarray = field(init=False, repr=False)
    mu: np.ndarray = field(init=False, repr=False)
    log_norm_const: float = field(init=False, repr=False)

    def __post_init__(self):
        g = validate_variogram(self.gamma)
        d = g.shape[0]
        p = _centering(d)
        sigma = p @ (-g / 2) @ p
        theta, pdet_theta = _pinv_sym(sigma)
        log_c = (
            0.5 * np.log(pdet_theta)
            - 0.5 * (d - 1) * np.log(2 * np.pi)
            - 0.5 * np.log(d)
            - np.trace(sigma) / (2 * d)
        )
        mu = p @ (-g / 2) @ np.ones(d) / d
        for name, val in (("gamma", g), ("theta", theta), ("sigma", sigma), ("mu", mu)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "log_norm_const", float(log_c))

    @property
    def d(self) -> int:
        return self.gamma.shape[0]

    def sub(self, idx) -> "HRParams":
        """Marginal parameters on the coordinates ``idx`` (closed under marginalization)."""
        idx = list(idx)
        return HRParams(self.gamma[np.ix_(idx, idx)])

    def density(self, y):
        return hr_density(self, y)

    def exponent(self, x):
        return hr_exponent(self, x)

    def spectral_covariance(self, anchor: int) -> np.ndarray:
        """Covariance of ``log W_{-k}`` for the extremal function anchored at ``k``."""
        g = self.gamma
        idx = [i for i in range(self.d) if i != anchor]
        return (g[idx, anchor][:, None] + g[anchor, idx][None, :] - g[np.ix_(idx, idx)]) / 2


def hr_density(params: HRParams, y):
    """Husler-Reiss density on the positive orthant; ``y`` has shape (..., d).

    Homogeneous of order ``-d-1``.
    """
    y = _positive(y, "y")
    if y.shape[-1] != params.d:
        raise ValidationError(f"y must have last dimension {params.d}")
    u = np.log(y) - params.mu
    quad = np.einsum("...i,ij,...j->...", u, params.theta, u)
    d = params.d
    return np.exp(params.log_norm_const - (1 + 1 / d) * np.log(y).sum(axis=-1) - quad / 2)


def hr_bivariate_density(gamma_ij, y1, y2):
    """Bivariate Husler-Reiss density on the positive quadrant."""
    g = float(gamma_ij)
    if not g > 0:
        raise DomainError("gamma_ij must be positive")
    y1 = _positive(y1, "y1")
    y2 = _positive(y2, "y2")
    lr = np.log(y1 / y2)
    return np.exp(-g / 8 - lr * lr / (2 * g)) / np.sqrt(2 * np.pi * g) * (y1 * y2) ** -1.5


def hr_bivariate_tail(gamma_ij, x1, x2):
    """Positive-quadrant tail ``Lambda*(y1 > x1, y2 > x2)`` of the bivariate HR measure.

    Equals ``1/x1 + 1/x2 - V(x1, x2)``; written with survival functions to
    avoid cancellation.
    """
    g = np.asarray(gamma_ij, dtype=float)
    if np.any(~(g > 0)):
        raise DomainError("gamma_ij must be positive")
    x1 = _positive(x1, "x1")
    x2 = _positive(x2, "x2")
    a = np.sqrt(g)
    lr = np.log(x2 / x1)
    return ndtr(-a / 2 - lr / a) / x1 + ndtr(-a / 2 + lr / a) / x2


def hr_exponent(params: HRParams, x, abseps: float = 1e-9):
    """Exponent function ``V(x) = Lambda*_+(y not <= x)`` for a single point ``x``."""
    x = _positive(x, "x")
    d = params.d
    if x.shape != (d,):
        raise ValidationError(f"x must have shape ({d},)")
    total = 0.0
    for k in range(d):
        idx = [i for i in range(d) if i != k]
        upper = np.log(x[idx] / x[k]) + params.gamma[idx, k] / 2
        cov = params.spectral_covariance(k)
        if d == 2:
            prob = ndtr(upper[0] / np.sqrt(cov[0, 0]))
        else:
            prob = multivariate_normal.cdf(
                upper, mean=np.zeros(d - 1), cov=cov, allow_singular=True, abseps=abseps, releps=abseps
            )
        total += prob / x[k]
    return float(total)


# ---------------------------------------------------------------------------
# Clayton
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClaytonParams:
    theta_c: float

    def __post_init__(self):
        if not 0 < self.theta_c < 1:
            raise ValidationError(f"Clayton parameter must lie in (0, 1), got {self.theta_c}")


def _clayton_theta(params) -> float:
    return params.theta_c if isinstance(params, ClaytonParams) else ClaytonParams(float(params)).theta_c


def clayton_tail(params, x):
    """``(x_1^theta + ... + x_d^theta)^(-1/theta)`` along the last axis."""
    th = _clayton_theta(params)
    x = _positive(x, "x")
    return np.power(np.power(x, th).sum(axis=-1), -1 / th)


def clayton_density(params, y):
    """Clayton density on the positive orthant; ``y`` has shape (..., d)."""
    th = _clayton_theta(params)
    y = _positive(y, "y")
    d = y.shape[-1]
    const = np.prod(1 + th * np.arange(1, d))
    s = np.power(y, th).sum(axis=-1)
    return const * np.power(s, -1 / th - d) * np.prod(np.power(y, th - 1), axis=-1)


# ---------------------------------------------------------------------------
# Levy correlations
# ---------------------------------------------------------------------------


def chi_closed_form(family: str, params):
    """Population Levy correlation of the symmetric all-orthant model.

    For ``"clayton"`` this returns the published expression ``2 - 2**theta``;
    see :func:`chi_tail_value` for the value obtained by evaluating the tail.
    ``params`` is ``gamma_ij`` (scalar or array) for HR and ``theta`` for Clayton.
    """
    if family == "hr":
        g = np.asarray(params, dtype=float)
        if np.any(g < 0):
            raise ValidationError("gamma must be non-negative")
        return 2 * ndtr(-np.sqrt(g) / 2)
    if family == "clayton":
        th = params.theta_c if isinstance(params, ClaytonParams) else float(params)
        # the formula is also evaluated at the closed endpoint theta = 1
        if not 0 < th <= 1:
            raise ValidationError(f"Clayton parameter must lie in (0, 1], got {th}")
        return 2 - 2**th
    if family == "independence":
        return 0.0
    raise ValidationError(f"unknown family {family!r}; expected one of {FAMILIES}")


def chi_tail_value(family: str, params):
    """Levy correlation computed from the positive-orthant tail at (1, 1)."""
    if family == "clayton":
        return float(clayton_tail(params, np.ones(2)))
    return chi_closed_form(family, params)


def clayton_chi_tail(theta) -> float:
    return 2.0 ** (-1.0 / _clayton_theta(theta))


# ---------------------------------------------------------------------------
# Margins
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalSpec:
    """Stable marginal tails ``U_i(+-x) = c_i^+- |x|^(-alpha_i)``."""

    alpha: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.array(a, dtype=float)) for a in (self.alpha, self.c_plus, self.c_minus)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise ValidationError("alpha, c_plus and c_minus must be vectors of equal length")
        alpha, cp, cm = arrs
        if np.any(~((alpha > 0) & (alpha < 2))):
            raise ValidationError("alpha must lie in (0, 2)")
        if np.any(~(cp > 0)) or np.any(~(cm > 0)):
            raise ValidationError("c_plus and c_minus must be positive")
        for name, val in zip(("alpha", "c_plus", "c_minus"), arrs):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def standard(cls, d: int, alpha: float = 1.0) -> "MarginalSpec":
        return cls(np.full(d, alpha), np.ones(d), np.ones(d))

    @property
    def d(self) -> int:
        return self.alpha.shape[0]

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.c_plus, self.c_minus))

    def tail(self, i: int, x):
        """Marginal tail function ``U_i(x)`` for ``x != 0``."""
        x = np.asarray(x, dtype=float)
        c = np.where(x >= 0, self.c_plus[i], self.c_minus[i])
        return c * np.abs(x) ** (-self.alpha[i])


def std_to_original(z_star, marginal: MarginalSpec, i: int | None = None):
    """Map standardized jump sizes to the original scale.

    ``z* >= 0`` goes to ``(c+ z*)^(1/alpha)``, ``z* < 0`` to ``-(-c- z*)^(1/alpha)``.
    With ``i=None`` the last axis of ``z_star`` runs over all coordinates.
    """
    z = np.asarray(z_star, dtype=float)
    if i is None:
        alpha, cp, cm = marginal.alpha, marginal.c_plus, marginal.c_minus
    else:
        alpha, cp, cm = marginal.alpha[i], marginal.c_plus[i], marginal.c_minus[i]
    pos = np.power(cp * np.maximum(z, 0.0), 1 / alpha)
    neg = np.power(cm * np.maximum(-z, 0.0), 1 / alpha)
    return np.where(z >= 0, pos, -neg)


def original_to_std(x, marginal: MarginalSpec, i: int | None = None):
    """Inverse of :func:`std_to_original`."""
    x = np.asarray(x, dtype=float)
    if i is None:
        alpha, cp, cm = marginal.alpha, marginal.c_plus, marginal.c_minus
    else:
        alpha, cp, cm = marginal.alpha[i], marginal.c_plus[i], marginal.c_minus[i]
    pos = np.power(np.maximum(x, 0.0), alpha) / cp
    neg = np.power(np.maximum(-x, 0.0), alpha) / cm
    return np.where(x >= 0, pos, -neg)


# ---------------------------------------------------------------------------
# Orthant weights
# ---------------------------------------------------------------------------


def _edge_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class OrthantWeights:
    """Per-edge asymmetry parameters ``m_ij`` in [0, 1]."""

    m: dict

    def __post_init__(self):
        clean = {}
        for (i, j), val in dict(self.m).items():
            val = float(val)
            if not 0 <= val <= 1:
                raise ValidationError(f"asymmetry m[{i},{j}] = {val} outside [0, 1]")
            clean[_edge_key(int(i), int(j))] = val
        object.__setattr__(self, "m", clean)

    @classmethod
    def symmetric(cls, tree) -> "OrthantWeights":
        return cls({e: 0.5 for e in tree.edges})

    def __getitem__(self, edge):
        return self.m[_edge_key(*edge)]

    def check_tree(self, tree):
        if set(self.m) != set(tree.edges):
            raise ValidationError("orthant weights must be keyed exactly by the tree edges")


def _signs(s) -> np.ndarray:
    out = []
    for v in s:
        if v in ("+", 1, 1.0, True):
            out.append(1)
        elif v in ("-", -1, -1.0):
            out.append(-1)
        else:
            raise ValidationError(f"sign entries must be '+'/'-' or +1/-1, got {v!r}")
    return np.array(out, dtype=int)


def orthant_weight(weights: OrthantWeights, tree, s) -> float:
    """``m_s = prod_E m_ij^{1{s_i s_j > 0}} (1 - m_ij)^{1{s_i s_j < 0}}``."""
    sv = _signs(s)
    if sv.shape[0] != tree.d:
        raise ValidationError(f"sign vector has length {sv.shape[0]}, expected {tree.d}")
    weights.check_tree(tree)
    out = 1.0
    for i, j in tree.edges:
        m = weights.m[(i, j)]
        out *= m if sv[i] == sv[j] else 1 - m
    return out


def all_orthant_weights(weights: OrthantWeights, tree) -> dict:
    """Brute-force map from sign tuples to ``m_s``; sums to 2."""
    return {s: orthant_weight(weights, tree, s) for s in itertools.product((1, -1), repeat=tree.d)}


def marginal_orthant_weight(weights: OrthantWeights, tree, idx, s_idx) -> float:
    """Sum of ``m_s`` over sign vectors agreeing with ``s_idx`` on ``idx``."""
    idx = list(idx)
    s_idx = _signs(s_idx)
    rest = [k for k in range(tree.d) if k not in idx]
    total = 0.0
    s = np.zeros(tree.d, dtype=int)
    s[idx] = s_idx
    for combo in itertools.product((1, -1), repeat=len(rest)):
        s[rest] = combo
        total += orthant_weight(weights, tree, s)
    return total
