"""File formats: increments/paths CSV, chi matrices, DOT trees, model configs, prices.

Node labels in files are 1-based (``X1..Xd``); the Python API is 0-based.
Floats are written with ``repr`` so that files round-trip exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import os
import re
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .estimate import ChiEstimate
from .measures import FAMILIES, MarginalSpec
from .simulate import IncrementMatrix
from .tree import EdgeSpec, HeterogeneousStableModel, TreeModel, TreeTopology


def _fmt(v) -> str:
    return repr(float(v))


def _write_rows(path, header, rows):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise ValidationError(f"{path}: empty file")
    return rows[0], rows[1:]


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Increments
# ---------------------------------------------------------------------------


def write_increments(path, inc: IncrementMatrix, extra_meta: dict | None = None):
    """Write ``t,X1..Xd`` and a ``<path>.json`` metadata sidecar."""
    rows = [[str(t + 1)] + [_fmt(v) for v in row] for t, row in enumerate(inc.data)]
    _write_rows(path, ["t"] + list(inc.labels), rows)
    meta = inc.metadata()
    meta["labels"] = list(inc.labels)
    if extra_meta:
        meta.update(extra_meta)
    write_json(str(path) + ".json", meta)


def write_paths(path, inc: IncrementMatrix):
    p = inc.paths()
    rows = [["0"] + ["0.0"] * inc.d] + [[str(t + 1)] + [_fmt(v) for v in row] for t, row in enumerate(p)]
    _write_rows(path, ["t"] + list(inc.labels), rows)


def _parse_float(cell, where):
    try:
        v = float(cell)
    except ValueError:
        raise ValidationError(f"{where}: cannot parse {cell!r} as a number") from None
    return v


def read_increments(path) -> IncrementMatrix:
    header, body = _read_rows(path)
    if len(header) < 2:
        raise ValidationError(f"{path}: need a time column and at least one data column")
    if not body:
        raise ValidationError(f"{path}: no data rows")
    data = np.empty((len(body), len(header) - 1))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise ValidationError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        for c, cell in enumerate(row[1:]):
            if cell.strip() == "":
                raise ValidationError(f"{path}: missing value at row {r + 2}, column {header[c + 1]}")
            data[r, c] = _parse_float(cell, f"{path}: row {r + 2}, column {header[c + 1]}")
    if not np.all(np.isfinite(data)):
        raise ValidationError(f"{path}: non-finite values")
    return IncrementMatrix(data, labels=list(header[1:]))


# ---------------------------------------------------------------------------
# Chi estimates
# ---------------------------------------------------------------------------

_CHI_PARTS = ("chi", "chi_pp", "chi_pm", "chi_mp", "chi_mm")


def write_matrix(path, mat, labels):
    rows = [[lab] + [_fmt(v) for v in row] for lab, row in zip(labels, mat)]
    _write_rows(path, [""] + list(labels), rows)


def read_matrix(path):
    header, body = _read_rows(path)
    labels = header[1:]
    mat = np.array([[_parse_float(c, str(path)) for c in row[1:]] for row in body])
    if mat.shape != (len(labels), len(labels)):
        raise ValidationError(f"{path}: matrix must be square with matching labels")
    return mat, labels


def write_chi(outdir, est: ChiEstimate, labels, suffix: str = ""):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for part in _CHI_PARTS:
        write_matrix(outdir / f"{part}{suffix}.csv", getattr(est, part), labels)
    write_json(outdir / f"chi{suffix}.json", {"k": est.k, "n": est.n, "q": est.q})


def read_chi(outdir, suffix: str = ""):
    outdir = Path(outdir)
    mats = {}
    labels = None
    for part in _CHI_PARTS:
        mats[part], labels = read_matrix(outdir / f"{part}{suffix}.csv")
    info = json.loads((outdir / f"chi{suffix}.json").read_text())
    return ChiEstimate(k=int(info["k"]), n=int(info["n"]), **mats), labels


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------


def tree_to_dot(learned, labels) -> str:
    lines = ["graph learned_tree {"]
    for lab in labels:
        lines.append(f'  "{lab}";')
    for i, j in learned.topology.edges:
        e = (i, j)
        attrs = f"gamma_hat={_fmt(learned.gamma_hat[e])}, m_hat={_fmt(learned.m_hat[e])}, chi_hat={_fmt(learned.chi_hat[e])}"
        lines.append(f'  "{labels[i]}" -- "{labels[j]}" [{attrs}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


_DOT_EDGE = re.compile(r'^\s*"?([^"\s]+)"?\s*--\s*"?([^"\s\[;]+)"?')


def read_dot_tree(path, labels) -> TreeTopology:
    pos = {lab: k for k, lab in enumerate(labels)}
    edges = []
    for line in Path(path).read_text().splitlines():
        m = _DOT_EDGE.match(line)
        if m:
            a, b = m.groups()
            if a not in pos or b not in pos:
                raise ValidationError(f"{path}: unknown node in edge {a} -- {b}")
            edges.append(tuple(sorted((pos[a], pos[b]))))
    return TreeTopology(len(labels), tuple(sorted(edges)))


def write_edges(path, learned, labels):
    rows = [
        [labels[i], labels[j], _fmt(learned.gamma_hat[(i, j)]), _fmt(learned.m_hat[(i, j)])]
        for i, j in learned.topology.edges
    ]
    _write_rows(path, ["i", "j", "gamma", "m"], rows)


def write_stability(path, freqs: dict, labels):
    rows = [[labels[i], labels[j], _fmt(f)] for (i, j), f in sorted(freqs.items())]
    _write_rows(path, ["i", "j", "frequency"], rows)


def write_recovery(path, cells):
    _write_rows(path, ["n", "q", "proportion"], [[str(c.n), _fmt(c.q), _fmt(c.proportion)] for c in cells])


# ---------------------------------------------------------------------------
# Model config
# ---------------------------------------------------------------------------


def _node(v, d, where):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{where}: node labels must be integers 1..{d}")
    if not 1 <= v <= d:
        raise ValidationError(f"{where}: node {v} outside 1..{d}")
    return v - 1


def _edge_lookup(mapping, i, j, where):
    for key in (f"{i + 1}-{j + 1}", f"{j + 1}-{i + 1}"):
        if key in mapping:
            return mapping[key]
    raise ValidationError(f"{where}: missing entry for edge {i + 1}-{j + 1}")


def _vector(v, d, where, positive=False):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v] * d
    if not isinstance(v, list) or len(v) != d:
        raise ValidationError(f"{where}: expected a number or a list of {d} numbers")
    out = []
    for k, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ValidationError(f"{where}[{k}]: not a number")
        if positive and not x > 0:
            raise ValidationError(f"{where}[{k}]: must be positive")
        out.append(float(x))
    return np.array(out)


def model_from_config(cfg: dict) -> HeterogeneousStableModel:
    """Build a model from a config document; errors name the offending field."""
    if not isinstance(cfg, dict):
        raise ValidationError("config: expected an object")
    unknown = set(cfg) - {"family", "d", "tree", "edge_params", "m", "margins", "drift"}
    if unknown:
        raise ValidationError(f"config: unknown fields {sorted(unknown)}")
    family = cfg.get("family")
    if family not in FAMILIES:
        raise ValidationError(f"config.family: must be one of {list(FAMILIES)}, got {family!r}")
    tree_list = cfg.get("tree")
    if not isinstance(tree_list, list) or not tree_list:
        raise ValidationError("config.tree: expected a non-empty list of [i, j] edges")
    d = cfg.get("d", len(tree_list) + 1)
    if isinstance(d, bool) or not isinstance(d, int) or d != len(tree_list) + 1:
        raise ValidationError(f"config.d: must equal number of edges + 1 = {len(tree_list) + 1}")
    edges = []
    for k, e in enumerate(tree_list):
        if not isinstance(e, list) or len(e) != 2:
            raise ValidationError(f"config.tree[{k}]: expected [i, j]")
        edges.append(tuple(sorted((_node(e[0], d, f"config.tree[{k}][0]"), _node(e[1], d, f"config.tree[{k}][1]")))))
    try:
        topo = TreeTopology(d, tuple(sorted(edges)))
    except ValidationError as exc:
        raise ValidationError(f"config.tree: {exc}") from None
    params = cfg.get("edge_params", {})
    mvals = cfg.get("m", 0.5)
    if family != "independence" and not isinstance(params, dict):
        raise ValidationError("config.edge_params: expected a map 'i-j' -> value")
    specs = {}
    for i, j in topo.edges:
        where = f"config.edge_params[{i + 1}-{j + 1}]"
        p = 0.0 if family == "independence" else _edge_lookup(params, i, j, "config.edge_params")
        m = _edge_lookup(mvals, i, j, "config.m") if isinstance(mvals, dict) else mvals
        m_where = f"config.m[{i + 1}-{j + 1}]" if isinstance(mvals, dict) else "config.m"
        if isinstance(m, bool) or not isinstance(m, (int, float)) or not 0 <= m <= 1:
            raise ValidationError(f"{m_where}: asymmetry must be a number in [0, 1], got {m!r}")
        try:
            specs[(i, j)] = EdgeSpec(family, p, m)
        except (ValidationError, TypeError) as exc:
            raise ValidationError(f"{where}: {exc}") from None
    margins = cfg.get("margins", {})
    if not isinstance(margins, dict):
        raise ValidationError("config.margins: expected an object")
    try:
        marg = MarginalSpec(
            _vector(margins.get("alpha", 1.0), d, "config.margins.alpha", positive=True),
            _vector(margins.get("c_plus", 1.0), d, "config.margins.c_plus"),
            _vector(margins.get("c_minus", 1.0), d, "config.margins.c_minus"),
        )
    except ValidationError as exc:
        msg = str(exc)
        raise ValidationError(msg if msg.startswith("config.") else f"config.margins: {msg}") from None
    drift = cfg.get("drift")
    drift = None if drift is None else _vector(drift, d, "config.drift")
    return HeterogeneousStableModel(TreeModel(topo, specs), marg, drift)


def load_model(path) -> HeterogeneousStableModel:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return model_from_config(cfg)


# ---------------------------------------------------------------------------
# Prices
# ---------------------------------------------------------------------------


def ingest_prices(path) -> IncrementMatrix:
    """Daily log-returns ``log(S(t)/S(t-1))`` from ``date,TICKER1,...`` prices."""
    header, body = _read_rows(path)
    if len(header) < 2 or header[0].strip().lower() != "date":
        raise ValidationError(f"{path}: header must be date,TICKER1,...")
    if len(body) < 2:
        raise ValidationError(f"{path}: need at least two price rows")
    tickers = [h.strip() for h in header[1:]]
    dates = []
    prices = np.empty((len(body), len(tickers)))
    for r, row in enumerate(body):
        line = r + 2
        if len(row) != len(header):
            raise ValidationError(f"{path}: row {line} has {len(row)} cells, expected {len(header)}")
        try:
            dates.append(dt.date.fromisoformat(row[0].strip()))
        except ValueError:
            raise ValidationError(f"{path}: row {line}: unparseable date {row[0]!r}") from None
        for c, cell in enumerate(row[1:]):
            where = f"{path}: row {line} ({row[0]}), ticker {tickers[c]}"
            if cell.strip() == "":
                raise ValidationError(f"{where}: missing price")
            v = _parse_float(cell, where)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"{where}: price must be positive, got {cell}")
            prices[r, c] = v
    for r in range(1, len(dates)):
        if dates[r] <= dates[r - 1]:
            raise ValidationError(f"{path}: dates must be strictly increasing (row {r + 2})")
    returns = np.diff(np.log(prices), axis=0)
    return IncrementMatrix(returns, labels=tickers)


def default_threads() -> int:
    raw = os.environ.get("LEVYTREE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidationError(f"LEVYTREE_THREADS must be an integer, got {raw!r}") from None
