"""Readers and writers for graphs, clusterings, assignments and coefficients.

Floats are written with ``repr`` so files round-trip exactly and reruns
produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ArgumentError
from .graph import BipartiteGraph, FoldedGraph, NormalizationMode
from .objective import Clustering
from .outcome import LinearCoefficients, MarketplaceSpec

__all__ = [
    "read_graph",
    "write_graph",
    "read_folded",
    "write_folded",
    "read_clustering",
    "write_clustering",
    "read_assignment",
    "write_assignment",
    "read_coefficients",
    "write_coefficients",
    "read_labels",
    "write_labels",
    "read_marketplace",
    "write_marketplace",
]

PathLike = Union[str, Path]
GRAPH_HEADER = ("exp_id", "int_id", "weight")


def _num(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 2**53 else repr(x)


def _rows(path: PathLike, delimiter: str) -> tuple[list[str], list[list[str]], dict[str, str]]:
    """Header, data rows and ``# key=value`` metadata of a delimited file."""
    meta: dict[str, str] = {}
    header = None
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            fields = [f.strip() for f in line.split(delimiter)]
            if header is None:
                header = fields
            else:
                if len(fields) != len(header):
                    raise ArgumentError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
                rows.append(fields)
    if header is None:
        raise ArgumentError(f"{path}: missing header line")
    return header, rows, meta


def _expect(path: PathLike, header: list[str], want: tuple[str, ...]) -> None:
    if tuple(header) != want:
        raise ArgumentError(f"{path}: expected columns {','.join(want)}, got {','.join(header)}")


def _parse(path: PathLike, rows: list[list[str]], casts) -> list[tuple]:
    out = []
    for r in rows:
        try:
            out.append(tuple(c(v) for c, v in zip(casts, r)))
        except ValueError as exc:
            raise ArgumentError(f"{path}: bad value in row {r}: {exc}") from None
    return out


def read_graph(path: PathLike) -> BipartiteGraph:
    """Graph TSV (``exp_id  int_id  weight``) or its ``.json`` variant.

    Unit counts come from optional ``# n_experimental=N n_interference=M``
    metadata, otherwise from the largest ids.
    """
    if str(path).endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if isinstance(doc, list):
            doc = {"edges": doc}
        try:
            edges = [(int(e["exp_id"]), int(e["int_id"]), float(e["weight"])) for e in doc["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ArgumentError(f"{path}: malformed graph JSON ({exc})") from None
        meta = {k: doc[k] for k in ("n_experimental", "n_interference") if k in doc}
    else:
        header, rows, meta = _rows(path, "\t")
        _expect(path, header, GRAPH_HEADER)
        edges = _parse(path, rows, (int, int, float))
    n = _meta_int(path, meta, "n_experimental", max((e[0] for e in edges), default=-1) + 1)
    m = _meta_int(path, meta, "n_interference", max((e[1] for e in edges), default=-1) + 1)
    return BipartiteGraph(n, m, edges)


def _meta_int(path: PathLike, meta: dict, key: str, default: int) -> int:
    if key not in meta:
        return default
    try:
        return int(meta[key])
    except ValueError:
        raise ArgumentError(f"{path}: bad metadata {key}={meta[key]!r}") from None


def _needs_sizes(g: BipartiteGraph) -> bool:
    n_seen = int(g.exp_index.max()) + 1 if g.n_edges else 0
    m_seen = int(g.int_index.max()) + 1 if g.n_edges else 0
    return n_seen != g.n_experimental or m_seen != g.n_interference


def write_graph(g: BipartiteGraph, path: PathLike) -> None:
    if str(path).endswith(".json"):
        doc = {"n_experimental": g.n_experimental, "n_interference": g.n_interference,
               "edges": [{"exp_id": i, "int_id": s, "weight": w} for i, s, w in g.edges()]}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if _needs_sizes(g):
            fh.write(f"# n_experimental={g.n_experimental} n_interference={g.n_interference}\n")
        fh.write("\t".join(GRAPH_HEADER) + "\n")
        for i, s, w in g.edges():
            fh.write(f"{i}\t{s}\t{_num(w)}\n")


def read_folded(path: PathLike) -> FoldedGraph:
    """Folded TSV (``i  j  weight``); ``# n=N`` metadata fixes the unit count."""
    import scipy.sparse as sp

    header, rows, meta = _rows(path, "\t")
    _expect(path, header, ("i", "j", "weight"))
    trip = _parse(path, rows, (int, int, float))
    n = _meta_int(path, meta, "n", max((max(a, b) for a, b, _ in trip), default=-1) + 1)
    if any(a < 0 or b < 0 or a >= n or b >= n for a, b, _ in trip):
        raise ArgumentError(f"{path}: unit id out of range")
    ii = np.array([t[0] for t in trip], dtype=np.int64)
    jj = np.array([t[1] for t in trip], dtype=np.int64)
    ww = np.array([t[2] for t in trip], dtype=float)
    mat = sp.csr_matrix((ww, (ii, jj)), shape=(n, n))
    mat.sort_indices()
    # a unit with any edge has a positive self-weight, so empty rows mark isolated units
    isolated = np.diff(mat.indptr) == 0
    isolated.setflags(write=False)
    return FoldedGraph(n=n, matrix=mat, mode=NormalizationMode.from_code(meta.get("mode", "nn")), isolated=isolated)


def write_folded(f: FoldedGraph, path: PathLike) -> None:
    coo = f.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# n={f.n} mode={f.mode.code}\n")
        fh.write("i\tj\tweight\n")
        for p in order:
            fh.write(f"{coo.row[p]}\t{coo.col[p]}\t{_num(coo.data[p])}\n")


def _write_csv(path: PathLike, header: tuple[str, ...], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _dense(path: PathLike, ids: list[int]) -> np.ndarray:
    order = np.argsort(ids, kind="stable")
    if sorted(ids) != list(range(len(ids))):
        raise ArgumentError(f"{path}: unit ids must be dense in [0, {len(ids)})")
    return order


def read_clustering(path: PathLike, tolerance: float = 0.10) -> Clustering:
    header, rows, _ = _rows(path, ",")
    _expect(path, header, ("unit_id", "cluster_id"))
    data = _parse(path, rows, (int, int))
    order = _dense(path, [d[0] for d in data])
    labels = np.array([data[p][1] for p in order], dtype=np.int64)
    if labels.size and labels.min() >= 0:
        k = int(labels.max()) + 1
        if np.all(np.bincount(labels, minlength=k) > 0):
            return Clustering(labels, k=k, tolerance=tolerance)
    return Clustering.from_labels(labels, tolerance=tolerance)


def write_clustering(c: Clustering, path: PathLike) -> None:
    _write_csv(path, ("unit_id", "cluster_id"), ((i, int(l)) for i, l in enumerate(c.labels)))


def read_assignment(path: PathLike) -> np.ndarray:
    header, rows, _ = _rows(path, ",")
    _expect(path, header, ("unit_id", "z"))
    data = _parse(path, rows, (int, int))
    order = _dense(path, [d[0] for d in data])
    z = np.array([data[p][1] for p in order], dtype=np.int8)
    if not np.all(np.isin(z, (-1, 1))):
        raise ArgumentError(f"{path}: z must be -1 or 1")
    return z


def write_assignment(z, path: PathLike) -> None:
    zz = np.asarray(getattr(z, "z", z))
    _write_csv(path, ("unit_id", "z"), ((i, int(v)) for i, v in enumerate(zz)))


def read_coefficients(path: PathLike) -> LinearCoefficients:
    header, rows, _ = _rows(path, ",")
    _expect(path, header, ("unit_id", "alpha", "beta", "gamma"))
    data = _parse(path, rows, (int, float, float, float))
    order = _dense(path, [d[0] for d in data])
    arr = np.array([data[p][1:] for p in order], dtype=float).reshape(-1, 3)
    return LinearCoefficients(arr[:, 0], arr[:, 1], arr[:, 2])


def write_coefficients(coef: LinearCoefficients, path: PathLike) -> None:
    _write_csv(path, ("unit_id", "alpha", "beta", "gamma"),
               ((i, repr(float(a)), repr(float(b)), repr(float(c)))
                for i, (a, b, c) in enumerate(zip(coef.alpha, coef.beta, coef.gamma))))


def read_labels(path: PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Experimental and interference labels from ``unit_id,label,side`` (side ``exp`` or ``int``)."""
    header, rows, _ = _rows(path, ",")
    _expect(path, header, ("unit_id", "label", "side"))
    data = _parse(path, rows, (int, int, str))
    out = []
    for side in ("exp", "int"):
        part = [d for d in data if d[2] == side]
        order = _dense(path, [d[0] for d in part])
        out.append(np.array([part[p][1] for p in order], dtype=np.int64))
    if len(out[0]) + len(out[1]) != len(data):
        raise ArgumentError(f"{path}: side must be 'exp' or 'int'")
    return out[0], out[1]


def write_labels(exp_labels, int_labels, path: PathLike) -> None:
    rows = [(i, int(l), "exp") for i, l in enumerate(exp_labels)]
    rows += [(s, int(l), "int") for s, l in enumerate(int_labels)]
    _write_csv(path, ("unit_id", "label", "side"), rows)


def read_marketplace(path: PathLike) -> MarketplaceSpec:
    with open(path, encoding="utf-8") as fh:
        return MarketplaceSpec.from_config(fh.read())


def write_marketplace(spec: MarketplaceSpec, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(spec.to_config())
