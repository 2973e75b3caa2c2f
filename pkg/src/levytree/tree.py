"""Tree topologies, tree-structured standardized measures and model containers."""

from __future__ import annotations

import hashlib
import heapq
import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import measures
from .errors import DomainError, ValidationError
from .measures import MarginalSpec, OrthantWeights, _edge_key


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True

    def components(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for v in range(len(self.parent)):
            groups.setdefault(self.find(v), []).append(v)
        return sorted(groups.values())


@dataclass(frozen=True)
class TreeTopology:
    """Undirected tree on nodes ``0..d-1``; edges are stored as sorted pairs ``i < j``."""

    d: int
    edges: tuple

    def __post_init__(self):
        d = int(self.d)
        if d < 1:
            raise ValidationError("a tree needs at least one node")
        edges = []
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j or not (0 <= i < d and 0 <= j < d):
                raise ValidationError(f"invalid edge {e} for d={d}")
            edges.append(_edge_key(i, j))
        edges = tuple(sorted(edges))
        if len(edges) != d - 1:
            raise ValidationError(f"a tree on {d} nodes has {d - 1} edges, got {len(edges)}")
        uf = _UnionFind(d)
        for i, j in edges:
            if not uf.union(i, j):
                raise ValidationError(f"edge ({i}, {j}) closes a cycle")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def chain(cls, d: int) -> "TreeTopology":
        return cls(d, tuple((i, i + 1) for i in range(d - 1)))

    @classmethod
    def star(cls, d: int, center: int = 0) -> "TreeTopology":
        return cls(d, tuple(_edge_key(center, v) for v in range(d) if v != center))

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.d)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def edge_index(self) -> dict:
        return {e: k for k, e in enumerate(self.edges)}

    def bfs(self, root: int) -> list[tuple[int, int, int]]:
        """``(parent, child, edge_index)`` triples in breadth-first order from ``root``."""
        adj = self.adjacency()
        eidx = self.edge_index()
        seen = [False] * self.d
        seen[root] = True
        out = []
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    out.append((u, v, eidx[_edge_key(u, v)]))
                    queue.append(v)
        return out

    def parents(self, root: int) -> np.ndarray:
        par = np.full(self.d, -1, dtype=np.int64)
        for u, v, _ in self.bfs(root):
            par[v] = u
        return par

    def path(self, h: int, l: int) -> list[tuple[int, int]]:
        """Edges on the unique path between ``h`` and ``l``."""
        par = self.parents(h)
        out = []
        v = l
        while v != h:
            out.append(_edge_key(int(par[v]), v))
            v = int(par[v])
        return out[::-1]

    def relabel(self, perm) -> "TreeTopology":
        """Tree with node ``v`` renamed to ``perm[v]``."""
        perm = list(perm)
        return TreeTopology(self.d, tuple((perm[i], perm[j]) for i, j in self.edges))

    def __eq__(self, other):
        return isinstance(other, TreeTopology) and self.d == other.d and self.edges == other.edges

    def __hash__(self):
        return hash((self.d, self.edges))


# ---------------------------------------------------------------------------
# Prufer sequences and random trees
# ---------------------------------------------------------------------------


def prufer_decode(seq, d: int) -> TreeTopology:
    """Labeled tree encoded by a Prufer sequence of length ``d - 2``."""
    seq = [int(s) for s in seq]
    if d < 2 or len(seq) != d - 2 or any(not 0 <= s < d for s in seq):
        raise ValidationError("Prufer sequence must have length d-2 with entries in [0, d)")
    degree = [1] * d
    for s in seq:
        degree[s] += 1
    edges = []
    leaves = [v for v in range(d) if degree[v] == 1]
    heapq.heapify(leaves)
    for s in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, s))
        degree[s] -= 1
        if degree[s] == 1:
            heapq.heappush(leaves, s)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, v))
    return TreeTopology(d, tuple(edges))


def prufer_encode(tree: TreeTopology) -> tuple:
    adj = [set(a) for a in tree.adjacency()]
    seq = []
    for _ in range(tree.d - 2):
        leaf = min(v for v in range(tree.d) if len(adj[v]) == 1)
        (nb,) = adj[leaf]
        seq.append(nb)
        adj[nb].discard(leaf)
        adj[leaf].clear()
    return tuple(seq)


def random_tree(d: int, rng=None) -> TreeTopology:
    """Uniformly distributed labeled tree on ``d`` nodes (random Prufer sequence)."""
    if d < 2:
        raise ValidationError("random_tree needs d >= 2")
    rng = np.random.default_rng(rng)
    return prufer_decode(rng.integers(0, d, size=d - 2), d)


# ---------------------------------------------------------------------------
# Tree metric
# ---------------------------------------------------------------------------


def tree_metric_complete(tree: TreeTopology, edge_gammas: dict) -> np.ndarray:
    """Full variogram whose entries are sums of edge values along tree paths."""
    vals = {}
    for e, g in dict(edge_gammas).items():
        key = _edge_key(int(e[0]), int(e[1]))
        g = float(g)
        if not g > 0:
            raise ValidationError(f"edge value for {key} must be positive, got {g}")
        vals[key] = g
    missing = [e for e in tree.edges if e not in vals]
    extra = [e for e in vals if e not in tree.edges]
    if missing or extra:
        raise ValidationError(f"edge map does not match tree (missing {missing}, not in tree {extra})")
    d = tree.d
    out = np.zeros((d, d))
    for src in range(d):
        for u, v, _ in tree.bfs(src):
            out[src, v] = out[src, u] + vals[_edge_key(u, v)]
    out = (out + out.T) / 2
    if d >= 2:
        measures.validate_variogram(out)
    return out


# ---------------------------------------------------------------------------
# Edge specs and models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeSpec:
    """Bivariate model on one tree edge.

    ``param`` is ``Gamma_ij`` for ``"hr"``, ``theta`` for ``"clayton"`` and
    ignored for ``"independence"``; ``m`` is the orthant asymmetry.
    """

    family: str
    param: float = 0.0
    m: float = 0.5

    def __post_init__(self):
        if self.family not in measures.FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")
        if self.family == "hr" and not float(self.param) > 0:
            raise ValidationError(f"HR edge parameter must be positive, got {self.param}")
        if self.family == "clayton":
            measures.ClaytonParams(float(self.param))
        if not 0 <= float(self.m) <= 1:
            raise ValidationError(f"asymmetry m={self.m} outside [0, 1]")
        object.__setattr__(self, "param", float(self.param))
        object.__setattr__(self, "m", float(self.m))

    def positive_density(self, y1, y2):
        if self.family == "hr":
            return measures.hr_bivariate_density(self.param, y1, y2)
        if self.family == "clayton":
            y = np.stack(np.broadcast_arrays(np.asarray(y1, float), np.asarray(y2, float)), axis=-1)
            return measures.clayton_density(self.param, y)
        raise DomainError("the independence family has no Lebesgue density")

    def positive_tail(self, x1, x2):
        if self.family == "hr":
            return measures.hr_bivariate_tail(self.param, x1, x2)
        if self.family == "clayton":
            x = np.stack(np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float)), axis=-1)
            return measures.clayton_tail(self.param, x)
        return np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)

    def chi(self) -> float:
        """Levy correlation from the tail (orthant weights sum to one per sign pair)."""
        return float(measures.chi_tail_value(self.family, self.param)) if self.family != "independence" else 0.0


@dataclass(frozen=True)
class TreeModel:
    """Standardized -1-homogeneous measure built from bivariate edge models on a tree."""

    tree: TreeTopology
    edges: dict

    def __post_init__(self):
        specs = {}
        for e, spec in dict(self.edges).items():
            if not isinstance(spec, EdgeSpec):
                spec = EdgeSpec(**spec) if isinstance(spec, dict) else EdgeSpec(*spec)
            specs[_edge_key(int(e[0]), int(e[1]))] = spec
        if set(specs) != set(self.tree.edges):
            raise ValidationError("edge specs must be keyed exactly by the tree edges")
        object.__setattr__(self, "edges", specs)

    @classmethod
    def hr(cls, tree: TreeTopology, edge_gammas: dict, m=0.5) -> "TreeModel":
        def m_of(e):
            return m.get(e, m.get((e[1], e[0]))) if isinstance(m, dict) else m

        return cls(tree, {_edge_key(*e): EdgeSpec("hr", g, m_of(_edge_key(*e))) for e, g in edge_gammas.items()})

    @property
    def d(self) -> int:
        return self.tree.d

    def spec_list(self) -> list:
        return [self.edges[e] for e in self.tree.edges]

    @property
    def weights(self) -> OrthantWeights:
        return OrthantWeights({e: s.m for e, s in self.edges.items()})

    @property
    def families(self) -> set:
        return {s.family for s in self.edges.values()}

    @property
    def symmetric(self) -> bool:
        return all(s.m == 0.5 for s in self.edges.values())

    def gamma(self) -> np.ndarray:
        """Tree-metric completion of the edge variogram values (all-HR models only)."""
        if self.families != {"hr"}:
            raise ValidationError("variogram completion needs every edge to be Husler-Reiss")
        return tree_metric_complete(self.tree, {e: s.param for e, s in self.edges.items()})

    def chi_matrix(self) -> np.ndarray:
        """Population Levy correlations; all-HR via the completed variogram.

        For other families only edge values are known in closed form and
        non-adjacent entries are set to ``nan``.
        """
        d = self.d
        if self.families == {"hr"}:
            out = measures.chi_closed_form("hr", self.gamma())
        else:
            out = np.full((d, d), np.nan)
            for (i, j), spec in self.edges.items():
                out[i, j] = out[j, i] = spec.chi()
        np.fill_diagonal(out, 1.0)
        return out

    def density(self, y):
        return tree_density(self.tree, self.edges, y)

    def marginal_density(self, idx, y_idx):
        """Density of the marginal measure on coordinates ``idx``.

        Connected subsets use the induced subtree; disconnected subsets of an
        all-HR model use the completed variogram and summed orthant weights.
        """
        idx = sorted(int(v) for v in idx)
        y_idx = np.asarray(y_idx, dtype=float)
        if len(idx) == self.d:
            return self.density(y_idx)
        if len(idx) == 1:
            return _check_nonzero(y_idx)[..., 0] ** -2.0
        pos = {v: k for k, v in enumerate(idx)}
        sub_edges = [e for e in self.tree.edges if e[0] in pos and e[1] in pos]
        if len(sub_edges) == len(idx) - 1:
            sub_tree = TreeTopology(len(idx), tuple((pos[i], pos[j]) for i, j in sub_edges))
            return tree_density(sub_tree, {(pos[i], pos[j]): self.edges[(i, j)] for i, j in sub_edges}, y_idx)
        if self.families == {"hr"}:
            y_idx = _check_nonzero(y_idx)
            params = measures.HRParams(self.gamma()[np.ix_(idx, idx)])
            signs = np.where(y_idx > 0, 1, -1)
            flat = signs.reshape(-1, len(idx))
            w = np.array([measures.marginal_orthant_weight(self.weights, self.tree, idx, s) for s in flat])
            return w.reshape(signs.shape[:-1]) * params.density(np.abs(y_idx))
        raise ValidationError("marginal density on a disconnected subset needs an all-HR model")

    def digest(self) -> str:
        payload = {
            "d": self.d,
            "edges": [[i, j, s.family, s.param, s.m] for (i, j), s in sorted(self.edges.items())],
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _check_nonzero(y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)) or np.any(y == 0):
        raise DomainError("density requires finite, nonzero coordinates")
    return y


def tree_density(tree: TreeTopology, edge_specs: dict, y):
    """Tree-factorized density on all orthants; ``y`` has shape (..., d).

    ``prod_E lambda_ij / (lambda_i lambda_j) * prod_V lambda_i`` where the
    univariate densities are ``1/y^2`` on both half-lines and each bivariate
    density is the orthant-weighted positive-quadrant density.
    """
    y = _check_nonzero(y)
    if y.shape[-1] != tree.d:
        raise ValidationError(f"y must have last dimension {tree.d}")
    specs = {_edge_key(*e): s for e, s in dict(edge_specs).items()}
    ay = np.abs(y)
    out = np.prod(ay**-2.0, axis=-1)
    for i, j in tree.edges:
        spec = specs[(i, j)]
        same = np.sign(y[..., i]) == np.sign(y[..., j])
        w = np.where(same, spec.m, 1 - spec.m)
        out = out * w * spec.positive_density(ay[..., i], ay[..., j]) * ay[..., i] ** 2 * ay[..., j] ** 2
    return out


@dataclass(frozen=True)
class HeterogeneousStableModel:
    """Tree-structured standardized measure with stable margins and a drift."""

    dependence: TreeModel
    margins: MarginalSpec
    drift: np.ndarray = field(default=None)

    def __post_init__(self):
        d = self.dependence.d
        if self.margins.d != d:
            raise ValidationError(f"margins have dimension {self.margins.d}, tree has {d}")
        drift = np.zeros(d) if self.drift is None else np.array(self.drift, dtype=float)
        if drift.shape != (d,) or not np.all(np.isfinite(drift)):
            raise ValidationError(f"drift must be a finite vector of length {d}")
        drift.setflags(write=False)
        object.__setattr__(self, "drift", drift)

    @property
    def d(self) -> int:
        return self.dependence.d

    @property
    def tree(self) -> TreeTopology:
        return self.dependence.tree

    @property
    def symmetric(self) -> bool:
        return self.dependence.symmetric and self.margins.symmetric

    def digest(self) -> str:
        payload = {
            "dep": self.dependence.digest(),
            "alpha": self.margins.alpha.tolist(),
            "c_plus": self.margins.c_plus.tolist(),
            "c_minus": self.margins.c_minus.tolist(),
            "drift": self.drift.tolist(),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Directed structural equations
# ---------------------------------------------------------------------------


def dag_sem_support(coefficients, d: int | None = None) -> np.ndarray:
    """Ray matrix ``(I - B)^{-1}`` of the linear structural equation model.

    ``coefficients`` is either a ``d x d`` matrix ``B`` with ``B[i, j]`` the
    weight of parent ``j`` in the equation of ``i``, or a mapping
    ``{(i, j): beta_ij}``.  The columns of the result span the support rays
    of the induced Levy measure.
    """
    if isinstance(coefficients, dict):
        if d is None:
            d = 1 + max(max(i, j) for i, j in coefficients) if coefficients else 0
        b = np.zeros((d, d))
        for (i, j), beta in coefficients.items():
            b[i, j] = beta
    else:
        b = np.array(coefficients, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValidationError("coefficient matrix must be square")
        d = b.shape[0]
    # Kahn's algorithm on j -> i for nonzero B[i, j]
    indeg = (b != 0).sum(axis=1)
    queue = [v for v in range(d) if indeg[v] == 0]
    seen = 0
    while queue:
        j = queue.pop()
        seen += 1
        for i in np.nonzero(b[:, j])[0]:
            indeg[i] -= 1
            if indeg[i] == 0:
                queue.append(int(i))
    if seen != d:
        raise ValidationError("coefficient structure contains a directed cycle")
    return np.linalg.inv(np.eye(d) - b)
