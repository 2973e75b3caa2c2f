"""Tree structure learning from empirical Levy correlations."""

from __future__ import annotations

import concurrent.futures
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NonUniqueTreeWarning, NumericalError, ValidationError
from .estimate import ChiEstimate, chi_hat, gamma_hat_invert, m_hat
from .measures import MarginalSpec
from .simulate import SimConfig, simulate_increments
from .tree import HeterogeneousStableModel, TreeModel, TreeTopology, _UnionFind, random_tree


@dataclass(frozen=True)
class LearnedTree:
    topology: TreeTopology
    edge_weights: dict
    gamma_hat: dict
    m_hat: dict
    chi_hat: dict
    k: int | None = None

    @property
    def d(self) -> int:
        return self.topology.d


def _check_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValidationError("weight matrix must be square")
    if w.shape[0] < 2:
        raise ValidationError("need at least two nodes")
    if np.any(np.isnan(w)):
        raise ValidationError("weight matrix contains nan")
    if not np.array_equal(w, w.T):
        raise ValidationError("weight matrix must be symmetric")
    if np.any(w == -np.inf):
        raise ValidationError("weights must be > -inf")
    return w


def _is_unique(w: np.ndarray, tree: TreeTopology) -> bool:
    # cycle property: every non-tree edge must be strictly heavier than the
    # heaviest tree edge on the path it closes
    in_tree = set(tree.edges)
    for i, j in itertools.combinations(range(tree.d), 2):
        if (i, j) in in_tree or not np.isfinite(w[i, j]):
            continue
        if max(w[a, b] for a, b in tree.path(i, j)) >= w[i, j]:
            return False
    return True


def mst(weight_matrix, warn: bool = True) -> TreeTopology:
    """Minimum spanning tree by Kruskal's algorithm.

    Edges are processed by ``(weight, i, j)``, so ties go to the
    lexicographically smaller pair.  ``+inf`` entries are never selected; if
    the finite part is disconnected a ``NumericalError`` lists the
    components.  A ``NonUniqueTreeWarning`` is issued when another spanning
    tree attains the same total weight.
    """
    w = _check_weights(weight_matrix)
    d = w.shape[0]
    cand = sorted((w[i, j], i, j) for i, j in itertools.combinations(range(d), 2) if np.isfinite(w[i, j]))
    uf = _UnionFind(d)
    edges = []
    for _, i, j in cand:
        if uf.union(i, j):
            edges.append((i, j))
            if len(edges) == d - 1:
                break
    if len(edges) < d - 1:
        comps = uf.components()
        raise NumericalError(f"finite-weight graph is disconnected; components: {comps}")
    tree = TreeTopology(d, tuple(sorted(edges)))
    if warn and not _is_unique(w, tree):
        warnings.warn("minimum spanning tree is not unique; returning the tie-broken tree", NonUniqueTreeWarning, stacklevel=2)
    return tree


def maximum_spanning_tree(weight_matrix, warn: bool = True) -> TreeTopology:
    """Maximum spanning tree; zero entries are treated as absent edges."""
    w = np.array(weight_matrix, dtype=float)
    neg = np.where(w > 0, -w, np.inf)
    np.fill_diagonal(neg, 0.0)
    return mst(neg, warn=warn)


def chi_weights(chi) -> np.ndarray:
    """``-log chi`` with ``+inf`` where ``chi == 0``."""
    chi = np.asarray(chi, dtype=float)
    if np.any(chi < 0):
        raise ValidationError("Levy correlations must be non-negative")
    with np.errstate(divide="ignore"):
        return -np.log(chi)


def tree_from_chi(est: ChiEstimate | np.ndarray, warn: bool = True) -> TreeTopology:
    chi = est.chi if isinstance(est, ChiEstimate) else est
    return mst(chi_weights(chi), warn=warn)


def learn_tree(increments, k: int, warn: bool = True) -> LearnedTree:
    """Learn the tree as ``mst(-log chi_hat)`` and attach edge parameters."""
    est = chi_hat(increments, k)
    return learned_from_estimate(est, warn=warn)


def learned_from_estimate(est: ChiEstimate, warn: bool = True) -> LearnedTree:
    weights = chi_weights(est.chi)
    tree = mst(weights, warn=warn)
    ew, gh, mh, ch = {}, {}, {}, {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, j in tree.edges:
            ew[(i, j)] = float(weights[i, j])
            ch[(i, j)] = float(est.chi[i, j])
            gh[(i, j)] = gamma_hat_invert(est.chi[i, j])
            mh[(i, j)] = m_hat(est, i, j)
    return LearnedTree(tree, ew, gh, mh, ch, est.k)


def _data(increments) -> np.ndarray:
    return np.asarray(getattr(increments, "data", increments), dtype=float)


def subsample_stability(increments, k: int, n_subsamples: int = 300, rng=None) -> dict:
    """Edge selection frequencies over subsamples of size ``ceil(n/2)``.

    ``k`` is the exceedance count for the full sample and is halved (rounded
    up) on each subsample so that ``k/n`` stays fixed.
    """
    x = _data(increments)
    n, d = x.shape
    if n < 4:
        raise ValidationError("subsample_stability needs n >= 4")
    if n_subsamples < 1:
        raise ValidationError("n_subsamples must be positive")
    rng = np.random.default_rng(rng)
    size = math.ceil(n / 2)
    k_sub = max(1, min(size, math.ceil(k * size / n)))
    counts = {e: 0 for e in itertools.combinations(range(d), 2)}
    for _ in range(n_subsamples):
        idx = rng.choice(n, size=size, replace=False)
        tree = tree_from_chi(chi_hat(x[idx], k_sub), warn=False)
        for e in tree.edges:
            counts[e] += 1
    return {e: c / n_subsamples for e, c in counts.items()}


@dataclass(frozen=True)
class RecoveryCell:
    n: int
    q: float
    proportion: float
    reps: int


def _recovery_rep(d, n_grid, q_grid, seed_seq, epsilon, gamma_range, backend):
    tree_seq, gamma_seq, *sim_seqs = seed_seq.spawn(2 + len(n_grid))
    tree = random_tree(d, np.random.default_rng(tree_seq))
    lo, hi = gamma_range
    g = np.random.default_rng(gamma_seq).uniform(lo, hi, size=d - 1)
    model = HeterogeneousStableModel(TreeModel.hr(tree, dict(zip(tree.edges, g))), MarginalSpec.standard(d, 1.0))
    hits = np.zeros((len(n_grid), len(q_grid)), dtype=bool)
    for a, n in enumerate(n_grid):
        cfg = SimConfig(epsilon=epsilon, n_steps=int(n), seed=0)
        inc = simulate_increments(model, cfg, rng=np.random.default_rng(sim_seqs[a]), backend=backend)
        for b, q in enumerate(q_grid):
            k = max(1, int(round((1 - q) * n)))
            hits[a, b] = tree_from_chi(chi_hat(inc, k), warn=False) == tree
    return hits


def recovery_study(
    d: int,
    n_grid,
    q_grid,
    reps: int,
    rng=None,
    threads: int = 1,
    epsilon: float = 0.01,
    gamma_range=(1.0, 6.0),
    backend=None,
) -> list[RecoveryCell]:
    """Proportion of replications where the learned tree equals the true tree.

    Each replication draws a uniform random tree with edge variogram values
    ``Unif(gamma_range)``, simulates symmetric HR increments with unit tail
    indices for every ``n`` in ``n_grid`` and learns with ``k = (1-q) n``.
    Replication ``r`` uses child ``r`` of the seed, so the table does not
    depend on ``threads``.
    """
    if d < 2:
        raise ValidationError("recovery_study needs d >= 2")
    n_grid = [int(n) for n in n_grid]
    q_grid = [float(q) for q in q_grid]
    if not n_grid or not q_grid:
        raise ValidationError("n_grid and q_grid must be non-empty")
    if reps < 1:
        raise ValidationError("reps must be positive")
    if any(not 0 <= q < 1 for q in q_grid):
        raise ValidationError("q values must lie in [0, 1)")
    if rng is None or isinstance(rng, (int, np.integer)):
        root = np.random.SeedSequence(rng)
    else:
        root = np.random.default_rng(rng).bit_generator.seed_seq
    seqs = root.spawn(reps)

    def run(r):
        return _recovery_rep(d, n_grid, q_grid, seqs[r], epsilon, gamma_range, backend)

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(threads) as ex:
            hits = list(ex.map(run, range(reps)))
    else:
        hits = [run(r) for r in range(reps)]
    prop = np.mean(hits, axis=0)
    return [
        RecoveryCell(n, q, float(prop[a, b]), reps)
        for a, n in enumerate(n_grid)
        for b, q in enumerate(q_grid)
    ]
