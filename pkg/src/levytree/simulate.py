"""Approximate simulation of heterogeneous stable Levy processes on trees.

Jumps whose standardized sup-norm is below ``epsilon`` are dropped and
replaced by a drift correction; the remaining jumps form a compound Poisson
process.  Points of the truncated standardized measure are produced by
union sampling: a proposal picks a coordinate ``j`` uniformly, draws
``x = epsilon * R * W`` with ``R`` standard Pareto and ``W`` the extremal
function anchored at ``j`` (a multiplicative random walk along the tree),
attaches signs from a Markov chain on the tree, and is kept with probability
``1 / #{k : |x_k| >= epsilon}``.  Proposals arrive at the known rate
``2 d / epsilon`` so thinning gives exact Poisson counts without knowing
``Lambda*(||x||_inf >= epsilon)`` in closed form.
"""

from __future__ import annotations

import concurrent.futures
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from . import measures
from .errors import NumericalError, ValidationError
from .tree import HeterogeneousStableModel, TreeModel

log = logging.getLogger(__name__)

STEP_KINDS = ("unit", "hf")
DEFAULT_EPSILON = 0.01
_CHUNK_PROPOSALS = 1 << 20


@dataclass(frozen=True)
class SimConfig:
    epsilon: float = DEFAULT_EPSILON
    n_steps: int = 1000
    step_kind: str = "unit"
    drift_mc_samples: int = 20_000
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if int(self.n_steps) < 1:
            raise ValidationError("n_steps must be at least 1")
        if self.step_kind not in STEP_KINDS:
            raise ValidationError(f"step_kind must be one of {STEP_KINDS}")
        if int(self.drift_mc_samples) < 1000:
            raise ValidationError("drift_mc_samples must be at least 1000")

    @property
    def step(self) -> float:
        return 1.0 if self.step_kind == "unit" else 1.0 / self.n_steps


@dataclass
class IncrementMatrix:
    """``n x d`` increments with provenance metadata."""

    data: np.ndarray
    step_kind: str = "unit"
    seed: int | None = None
    model_hash: str | None = None
    epsilon: float | None = None
    jump_counts: np.ndarray | None = field(default=None, repr=False)
    drift: np.ndarray | None = field(default=None, repr=False)
    labels: list | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise ValidationError("increments must be a 2-d array")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("increments contain non-finite values")
        if self.labels is None:
            self.labels = [f"X{i + 1}" for i in range(self.data.shape[1])]

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def paths(self) -> np.ndarray:
        return np.cumsum(self.data, axis=0)

    def metadata(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "step_kind": self.step_kind,
            "seed": self.seed,
            "model_hash": self.model_hash,
            "epsilon": self.epsilon,
            "drift": None if self.drift is None else [float(v) for v in self.drift],
        }


@dataclass(frozen=True)
class AcceptanceStats:
    n_proposed: int
    n_accepted: int
    epsilon: float
    d: int

    @property
    def p_accept(self) -> float:
        return self.n_accepted / self.n_proposed

    @property
    def rate_estimate(self) -> float:
        """Estimate of ``Lambda*(||x||_inf >= epsilon)`` (all orthants)."""
        return 2 * self.d / self.epsilon * self.p_accept

    @property
    def rate_se(self) -> float:
        p = self.p_accept
        return 2 * self.d / self.epsilon * np.sqrt(p * (1 - p) / self.n_proposed)


# ---------------------------------------------------------------------------
# Proposals
# ---------------------------------------------------------------------------


class _TreeSampler:
    """Pre-computed traversal tables and per-edge draw rules for one model."""

    def __init__(self, model: TreeModel):
        self.model = model
        tree = model.tree
        d = tree.d
        self.d = d
        self.specs = model.spec_list()
        self.child = np.zeros((d, max(d - 1, 0)), dtype=np.int64)
        self.parent = np.zeros_like(self.child)
        self.edge = np.zeros_like(self.child)
        for a in range(d):
            for k, (u, v, e) in enumerate(tree.bfs(a)):
                self.parent[a, k], self.child[a, k], self.edge[a, k] = u, v, e
        self.flip_prob = np.array([1 - s.m for s in self.specs])

    def _edge_log_ratios(self, rng, m: int) -> np.ndarray:
        out = np.empty((m, self.d - 1))
        for e, spec in enumerate(self.specs):
            if spec.family == "hr":
                g = spec.param
                out[:, e] = rng.normal(-g / 2, np.sqrt(g), size=m)
            elif spec.family == "clayton":
                th = spec.param
                shape = (1 + th) / th
                out[:, e] = (np.log(rng.standard_exponential(m)) - np.log(rng.standard_gamma(shape, m))) / th
            else:
                out[:, e] = -np.inf
        return out

    def draws(self, rng, m: int):
        anchor = rng.integers(0, self.d, size=m)
        log_r = -np.log1p(-rng.random(m))
        log_ratio = self._edge_log_ratios(rng, m)
        flip = rng.random((m, self.d - 1)) < self.flip_prob
        root_sign = np.where(rng.random(m) < 0.5, 1.0, -1.0)
        return anchor, log_r, log_ratio, flip, root_sign

    def propose(self, rng, m: int, backend=None):
        """``m`` proposals on the unit truncation scale: ``(z, n_exceed)``.

        ``z`` is a point of the measure restricted to ``{|z_j| >= 1}`` for a
        uniformly chosen ``j``; scale by ``epsilon`` afterwards.
        """
        return _kernels.resolve_points(*self.draws(rng, m), self.child, self.parent, self.edge, backend=backend)


def _as_tree_model(model) -> TreeModel:
    if isinstance(model, HeterogeneousStableModel):
        return model.dependence
    if isinstance(model, TreeModel):
        return model
    raise ValidationError("expected a TreeModel or HeterogeneousStableModel")


def sample_truncated_points(model, epsilon: float, size: int, rng=None, max_rejections: int = 10**6, backend=None):
    """Exact draws from ``Lambda*`` restricted to ``{||x||_inf >= epsilon}``, normalized.

    Returns ``(points, stats)`` with ``points`` of shape ``(size, d)``.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    dep = _as_tree_model(model)
    rng = np.random.default_rng(rng)
    sampler = _TreeSampler(dep)
    out = []
    have = proposed = streak = 0
    while have < size:
        m = min(_CHUNK_PROPOSALS, max(64, 2 * (size - have) * dep.d))
        z, n_exc = sampler.propose(rng, m, backend=backend)
        acc = rng.random(m) * n_exc < 1.0
        proposed += m
        if not acc.any():
            streak += m
            if streak >= max_rejections:
                raise NumericalError(
                    f"rejection sampler starved at epsilon={epsilon} for families {sorted(dep.families)}"
                )
            continue
        streak = 0
        pts = z[acc] * epsilon
        take = min(pts.shape[0], size - have)
        if take < pts.shape[0]:
            # count proposals only up to the last accepted point used
            last = np.nonzero(acc)[0][take - 1]
            proposed -= m - (last + 1)
        out.append(pts[:take])
        have += take
    stats = AcceptanceStats(proposed, size, float(epsilon), dep.d)
    return np.concatenate(out, axis=0), stats


def sample_truncated_point(model, epsilon: float, rng=None):
    pts, stats = sample_truncated_points(model, epsilon, 1, rng)
    return pts[0], stats


def truncated_mass(model, epsilon: float) -> float:
    """Closed-form ``Lambda*(||x||_inf >= epsilon)`` where one is available.

    Independence: ``2d/epsilon``.  All-HR trees: ``2 V(1,...,1) / epsilon``
    with the completed variogram.  Bivariate Clayton: inclusion-exclusion.
    """
    dep = _as_tree_model(model)
    fams = dep.families
    if fams == {"independence"}:
        return 2 * dep.d / epsilon
    if fams == {"hr"}:
        params = measures.HRParams(dep.gamma())
        return 2 * params.exponent(np.ones(dep.d)) / epsilon
    if dep.d == 2 and fams == {"clayton"}:
        (spec,) = dep.edges.values()
        return 2 * (2 - float(measures.clayton_tail(spec.param, np.ones(2)))) / epsilon
    raise ValidationError("no closed form for this model; use sample_truncated_points(...)[1].rate_estimate")


# ---------------------------------------------------------------------------
# Drift correction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftEstimate:
    value: np.ndarray
    compensation: np.ndarray
    se: np.ndarray


def drift_correction(model: HeterogeneousStableModel, epsilon: float, n_samples: int = 20_000, rng=None, backend=None):
    """Monte Carlo estimate of ``gamma - int_{eps <= ||z*||_inf <= 1} x Lambda(dx)``.

    Uses the union proposals as an importance sampler with weight
    ``(2d/epsilon) / #{k : |z_k| >= epsilon}``, which is unbiased for the
    integral without knowing the truncated mass.
    """
    if not 0 < epsilon < 1:
        raise ValidationError("drift correction requires 0 < epsilon < 1 on the standardized scale")
    if n_samples < 1000:
        raise ValidationError("n_samples must be at least 1000")
    rng = np.random.default_rng(rng)
    sampler = _TreeSampler(model.dependence)
    d = model.d
    total = np.zeros(d)
    total_sq = np.zeros(d)
    done = 0
    while done < n_samples:
        m = min(_CHUNK_PROPOSALS, n_samples - done)
        z, n_exc = sampler.propose(rng, m, backend=backend)
        z *= epsilon
        inside = np.abs(z).max(axis=1) <= 1.0
        x = measures.std_to_original(z, model.margins)
        f = np.where(inside[:, None], x / n_exc[:, None], 0.0) * (2 * d / epsilon)
        total += f.sum(axis=0)
        total_sq += (f * f).sum(axis=0)
        done += m
    mean = total / n_samples
    var = np.maximum(total_sq / n_samples - mean**2, 0.0)
    se = np.sqrt(var / n_samples)
    return DriftEstimate(model.drift - mean, mean, se)


# ---------------------------------------------------------------------------
# Increments
# ---------------------------------------------------------------------------


def _chunk_rows(n: int, mean_props: float) -> list[tuple[int, int]]:
    per = max(1, int(_CHUNK_PROPOSALS // max(mean_props, 1.0)))
    return [(s, min(n, s + per)) for s in range(0, n, per)]


def simulate_increments(
    model: HeterogeneousStableModel, cfg: SimConfig, rng=None, threads: int = 1, backend=None
) -> IncrementMatrix:
    """Simulate ``cfg.n_steps`` i.i.d. increments of the approximating process.

    For ``step_kind="hf"`` the step is ``h = 1/n`` and the truncation level is
    ``epsilon * h`` on the standardized scale, which keeps the expected
    number of retained jumps per step equal to the unit-step case.
    Row chunks draw from independent child streams of ``cfg.seed`` (or of
    ``rng`` when given), so results do not depend on ``threads``.
    """
    if not isinstance(model, HeterogeneousStableModel):
        raise ValidationError("simulate_increments needs a HeterogeneousStableModel")
    n, d, h = int(cfg.n_steps), model.d, cfg.step
    eps = cfg.epsilon * h
    seed_seq = np.random.SeedSequence(cfg.seed) if rng is None else np.random.default_rng(rng).bit_generator.seed_seq
    drift_seq, count_seq, chunk_root = seed_seq.spawn(3)

    if eps < 1:
        dr = drift_correction(model, eps, cfg.drift_mc_samples, np.random.default_rng(drift_seq), backend=backend)
        drift = dr.value
    else:
        log.warning("epsilon*h >= 1: no small-jump compensation applied")
        drift = model.drift.copy()

    rate_prop = 2 * d / eps * h
    n_props = np.random.default_rng(count_seq).poisson(rate_prop, size=n)
    chunks = _chunk_rows(n, rate_prop)
    seqs = chunk_root.spawn(len(chunks))
    sampler = _TreeSampler(model.dependence)
    marg = model.margins

    def run(k):
        lo, hi = chunks[k]
        crng = np.random.default_rng(seqs[k])
        counts = n_props[lo:hi]
        m = int(counts.sum())
        rows = np.repeat(np.arange(hi - lo), counts)
        draws = sampler.draws(crng, m)
        u_acc = crng.random(m)
        return _kernels.simulate_chunk(
            *draws, u_acc, rows, sampler.child, sampler.parent, sampler.edge,
            eps, marg.alpha, marg.c_plus, marg.c_minus, hi - lo, backend=backend,
        )

    data = np.empty((n, d))
    jumps = np.empty(n, dtype=np.int64)
    if threads > 1 and len(chunks) > 1:
        with concurrent.futures.ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, range(len(chunks))))
    else:
        results = [run(k) for k in range(len(chunks))]
    for (lo, hi), (vals, cnt) in zip(chunks, results):
        data[lo:hi] = vals
        jumps[lo:hi] = cnt
    data += drift * h
    return IncrementMatrix(
        data,
        step_kind=cfg.step_kind,
        seed=cfg.seed if rng is None else None,
        model_hash=model.digest(),
        epsilon=cfg.epsilon,
        jump_counts=jumps,
        drift=drift,
    )


# ---------------------------------------------------------------------------
# Rank coupling
# ---------------------------------------------------------------------------


def rank_couple(std_increments, observed):
    """Replace each value by the observed value of the same rank.

    Ties in ``std_increments`` are ranked by time index (first occurrence
    gets the lower rank).
    """
    s = np.asarray(std_increments, dtype=float)
    o = np.asarray(observed, dtype=float)
    if s.ndim != 1 or o.ndim != 1:
        raise ValidationError("rank_couple works on single columns")
    if s.shape != o.shape:
        raise ValidationError(f"length mismatch: {s.shape[0]} vs {o.shape[0]}")
    if np.any(np.isnan(o)):
        raise ValidationError("observed column has missing values")
    order = np.argsort(s, kind="stable")
    out = np.empty_like(o)
    out[order] = np.sort(o, kind="stable")
    return out


def rank_couple_matrix(std_increments, observed):
    s = np.asarray(std_increments, dtype=float)
    o = np.asarray(observed, dtype=float)
    if s.shape != o.shape:
        raise ValidationError(f"shape mismatch: {s.shape} vs {o.shape}")
    return np.column_stack([rank_couple(s[:, j], o[:, j]) for j in range(s.shape[1])])
