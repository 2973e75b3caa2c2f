"""Rank-based estimators of Levy correlations, asymmetry and HR variograms."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import ClampWarning, NumericalError, ValidationError


def _data(increments) -> np.ndarray:
    x = getattr(increments, "data", increments)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValidationError("increments must be an n x d matrix")
    return x


def empirical_cdf(column, x):
    """``#{s : data[s] <= x} / (n + 1)``; vectorized over ``x``."""
    col = np.sort(np.asarray(column, dtype=float).ravel())
    if col.size == 0:
        raise ValidationError("empirical_cdf needs a non-empty column")
    return np.searchsorted(col, x, side="right") / (col.size + 1)


def pseudo_observations(increments) -> np.ndarray:
    """Column-wise ``F_hat_i(Delta_i(t))`` with ties counted by ``<=``."""
    x = _data(increments)
    out = np.empty_like(x)
    n = x.shape[0]
    for j in range(x.shape[1]):
        col = np.sort(x[:, j])
        out[:, j] = np.searchsorted(col, x[:, j], side="right") / (n + 1)
    return out


@dataclass(frozen=True)
class ChiEstimate:
    """Empirical Levy correlations and their four orthant components."""

    chi: np.ndarray
    chi_pp: np.ndarray
    chi_pm: np.ndarray
    chi_mp: np.ndarray
    chi_mm: np.ndarray
    k: int
    n: int

    @property
    def q(self) -> float:
        return 1 - self.k / self.n

    @property
    def d(self) -> int:
        return self.chi.shape[0]

    def components(self) -> dict:
        return {"pp": self.chi_pp, "pm": self.chi_pm, "mp": self.chi_mp, "mm": self.chi_mm}


def chi_hat(increments, k: int) -> ChiEstimate:
    """Empirical Levy correlation matrix at ``q = 1 - k/n``.

    A row exceeds in coordinate i when ``|2 F_hat_i - 1| > 1 - k/n``, i.e.
    ``F_hat_i > 1 - k/(2n)`` (upper) or ``F_hat_i < k/(2n)`` (lower).  The
    orthant components count joint upper/lower exceedances separately, so
    ``chi = chi_pp + chi_pm + chi_mp + chi_mm`` holds exactly.
    """
    x = _data(increments)
    n, d = x.shape
    if d < 2:
        raise ValidationError("chi_hat needs at least two columns")
    k = int(k)
    if not 1 <= k <= n:
        raise ValidationError(f"k must lie in [1, n] = [1, {n}], got {k}")
    u = pseudo_observations(x)
    up = (u > 1 - k / (2 * n)).astype(float)
    lo = (u < k / (2 * n)).astype(float)
    pp = up.T @ up / k
    mm = lo.T @ lo / k
    pm = up.T @ lo / k
    mp = pm.T.copy()
    for mat, diag in ((pp, 0.5), (mm, 0.5), (pm, 0.0), (mp, 0.0)):
        np.fill_diagonal(mat, diag)
    # grouping keeps the sum bitwise symmetric
    chi = (pp + mm) + (pm + mp)
    np.fill_diagonal(chi, 1.0)
    return ChiEstimate(chi, pp, pm, mp, mm, k, n)


def chi_hat_grid(increments, ks) -> dict:
    return {int(k): chi_hat(increments, k) for k in ks}


def m_hat(est: ChiEstimate, i: int, j: int) -> float:
    """Asymmetry estimate ``(chi_pp + chi_mm) / chi`` for the pair ``(i, j)``."""
    c = est.chi[i, j]
    if not c > 0:
        raise NumericalError(f"chi_hat[{i},{j}] = 0: no joint exceedances, asymmetry undefined")
    return float((est.chi_pp[i, j] + est.chi_mm[i, j]) / c)


def gamma_hat_invert(chi_val) -> float:
    """Husler-Reiss edge parameter ``{2 Phi^{-1}(1 - chi/2)}^2`` from a Levy correlation."""
    c = float(chi_val)
    if not c > 0:
        raise NumericalError(f"chi = {c} <= 0 corresponds to an infinite variogram value")
    if c > 1:
        warnings.warn(f"chi = {c} > 1 clamped to 1", ClampWarning, stacklevel=2)
        c = 1.0
    # Phi^{-1}(1 - c/2) = -Phi^{-1}(c/2), accurate for small c
    return float((2 * ndtri(c / 2)) ** 2)
