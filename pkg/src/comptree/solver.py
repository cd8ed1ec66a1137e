"""Greedy structure search and weight fitting for sum-product trees."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .basis import BasisSet
from .tree import (
    LEFT,
    PLUS,
    TIMES,
    Leaf,
    Model,
    Op,
    basis_lookup,
    child,
    design_lookup,
    iter_leaves,
    node_values,
    normalize_path,
    path_str,
    replace_node,
)

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-14
EARLY_STOP_TOL = 1e-12


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] == 0 or self.y.size == 0:
            raise ValueError("empty dataset")
        if self.X.shape[0] != self.y.size:
            raise ValueError(f"X has {self.X.shape[0]} rows but y has {self.y.size} entries")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FitConfig:
    """``iters`` counts insertions after the one-leaf initialization.

    With ``fold_product_weight`` a ``*`` candidate is scored by its combined
    coefficient (old leaf weight times new weight, bounded by 1) instead of
    the new weight alone with the old weight frozen. Off by default.
    """

    iters: int = 10
    cd_passes_max: int = 10
    cd_rel_tol: float = 1e-8
    early_stop: bool = True
    seed: int = 0
    fold_product_weight: bool = False

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError("iters must be >= 0")
        if self.cd_passes_max < 0:
            raise ValueError("cd_passes_max must be >= 0")


class PathConstants(NamedTuple):
    b: float | np.ndarray
    k: float | np.ndarray


class Insertion(NamedTuple):
    w0: float
    w: float
    rss: float
    degenerate: bool


class TraceRow(NamedTuple):
    iter: int
    leaf_path: str
    op: str
    phi: int
    dim: int
    w: float
    rss: float


# --- path constants -----------------------------------------------------------

def _path_constants(root, path: tuple[int, ...], lookup, n: int) -> tuple[np.ndarray, np.ndarray]:
    b = np.zeros(n)
    k = np.ones(n)
    node = root
    for side in path:
        if isinstance(node, Leaf):
            raise ValueError("path falls off the tree")
        val = node_values(child(node, 1 - side), lookup)
        if node.op == PLUS:
            b = b + val * k
        else:
            k = val * k
        node = child(node, side)
    return b, k


def path_constants(m: Model, path: Sequence, x, basis: BasisSet | None = None) -> PathConstants:
    """Affine context of the node at ``path``: output = w0 + b + k * node(x).

    ``x`` is one covariate row (scalar result) or a matrix (one value per row).
    ``b`` excludes the intercept.
    """
    if m.root is None:
        raise ValueError("model has no tree")
    path = normalize_path(path)
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    basis = basis or m.basis
    if basis is None:
        raise ValueError("model has no basis set attached")
    b, k = _path_constants(m.root, path, basis_lookup(basis, X), X.shape[0])
    if single:
        return PathConstants(float(b[0]), float(k[0]))
    return PathConstants(b, k)


# --- bounded simple regression -------------------------------------------------

def regress_bounded(t, a) -> Insertion:
    """min over w0 and |w| <= 1 of sum (t - w0 - w a)^2."""
    t = np.asarray(t, dtype=float)
    a = np.asarray(a, dtype=float)
    n = t.size
    tc = t - t.mean()
    ac = a - a.mean()
    var_sum = float(ac @ ac)
    if var_sum / n < VAR_FLOOR:
        w0 = float(t.mean())
        r = t - w0
        return Insertion(w0, 0.0, float(r @ r), True)
    # The objective is a convex parabola in w, so clipping the free minimizer is optimal.
    w = float(np.clip(float(ac @ tc) / var_sum, -1.0, 1.0))
    w0 = float(np.mean(t - w * a))
    r = t - w0 - w * a
    return Insertion(w0, w, float(r @ r), False)


def regress_bounded_columns(t: np.ndarray, A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`regress_bounded` over the columns of ``A``; returns (w, rss)."""
    n = t.size
    tc = t - t.mean()
    stt = float(tc @ tc)
    Ac = A - A.mean(axis=0)
    var_sum = np.einsum("ij,ij->j", Ac, Ac)
    cov = tc @ Ac
    ok = var_sum / n >= VAR_FLOOR
    w = np.zeros(A.shape[1])
    w[ok] = np.clip(cov[ok] / var_sum[ok], -1.0, 1.0)
    rss = stt - 2.0 * w * cov + w * w * var_sum
    rss[~ok] = stt
    return w, np.maximum(rss, 0.0)


def insertion_problem(y, b, k, c, phi, op: str) -> tuple[np.ndarray, np.ndarray]:
    """Target and regressor of the one-weight problem for inserting ``w * phi`` next to a leaf valued ``c``."""
    y, b, k, c, phi = (np.asarray(v, dtype=float) for v in (y, b, k, c, phi))
    if op == PLUS:
        return y - b - k * c, k * phi
    if op == TIMES:
        return y - b, k * c * phi
    raise ValueError(f"unknown operation {op!r}")


def solve_insertion(y, b, k, c, phi, op: str) -> Insertion:
    """Best intercept and new-leaf weight for one candidate insertion, holding the rest fixed."""
    t, a = insertion_problem(y, b, k, c, phi, op)
    return regress_bounded(t, a)


# --- prediction and risk ------------------------------------------------------

def predict(m: Model, X, basis: BasisSet | None = None) -> np.ndarray:
    X = m.transform_input(np.atleast_2d(np.asarray(X, dtype=float)))
    if m.p is not None and X.shape[1] != m.p:
        raise ValueError(f"expected {m.p} covariates, got {X.shape[1]}")
    if m.root is None:
        return np.full(X.shape[0], float(m.intercept))
    basis = basis or m.basis
    if basis is None:
        raise ValueError("model has no basis set attached")
    basis.check_domain(X)
    return m.intercept + node_values(m.root, basis_lookup(basis, X))


def squared_loss(y, y_hat) -> np.ndarray:
    return (np.asarray(y, dtype=float) - np.asarray(y_hat, dtype=float)) ** 2 / 2.0


def clipped_loss(y, y_hat) -> np.ndarray:
    return np.minimum(1.0, squared_loss(y, y_hat))


def hinge_loss(y, y_hat) -> np.ndarray:
    """Bounded classification loss ``min(1, max(0, 1 - y y'))``; a metric only."""
    return np.minimum(1.0, np.maximum(0.0, 1.0 - np.asarray(y, dtype=float) * np.asarray(y_hat, dtype=float)))


def risk(m: Model, d: Dataset, kind: str = "sq", basis: BasisSet | None = None) -> float:
    """Mean of (y - y_hat)^2 / 2 (``sq``) or of its clipped version (``clipped``)."""
    y_hat = predict(m, d.X, basis)
    if kind == "sq":
        return float(np.mean(squared_loss(d.y, y_hat)))
    if kind == "clipped":
        return float(np.mean(clipped_loss(d.y, y_hat)))
    raise ValueError(f"unknown risk kind {kind!r}")


def rss(m: Model, d: Dataset, basis: BasisSet | None = None) -> float:
    r = d.y - predict(m, d.X, basis)
    return float(r @ r)


# --- coordinate descent -------------------------------------------------------

def _tree_rss(m: Model, y: np.ndarray, lookup) -> float:
    r = y - m.intercept - node_values(m.root, lookup)
    return float(r @ r)


def _cd_passes(m: Model, y: np.ndarray, lookup, cfg: FitConfig) -> list[float]:
    """In-place cyclic updates of (w0, each leaf weight); returns the RSS after each pass."""
    n = y.size
    current = _tree_rss(m, y, lookup)
    history = [current]
    for _ in range(cfg.cd_passes_max):
        m.intercept = float(np.mean(y - node_values(m.root, lookup)))
        for path, leaf in list(iter_leaves(m.root)):
            b, k = _path_constants(m.root, path, lookup, n)
            t = y - b
            a = k * lookup(leaf.phi, leaf.dim)
            sol = regress_bounded(t, a)
            if sol.degenerate:
                # Output does not vary with this weight; only refit the intercept.
                m.intercept = float(np.mean(t - leaf.weight * a))
            else:
                leaf.weight = sol.w
                m.intercept = sol.w0
        new = _tree_rss(m, y, lookup)
        history.append(new)
        if current - new <= cfg.cd_rel_tol * current:
            break
        current = new
    return history


def coordinate_descent(m: Model, d: Dataset, cfg: FitConfig = FitConfig(), basis: BasisSet | None = None,
                       return_history: bool = False):
    """Refine all weights by exact one-at-a-time minimization with |w| <= 1.

    Each leaf's weight enters the output affinely (through its path
    constants), so each update is a bounded simple regression that also
    refits the intercept. Stops after ``cd_passes_max`` passes or when the
    relative RSS improvement of a pass drops below ``cd_rel_tol``.
    """
    if m.root is None:
        raise ValueError("coordinate descent needs at least one leaf")
    basis = basis or m.basis
    if basis is None:
        raise ValueError("model has no basis set attached")
    out = m.copy()
    X = out.transform_input(d.X)
    basis.check_domain(X)
    history = _cd_passes(out, d.y, basis_lookup(basis, X), cfg)
    return (out, history) if return_history else out


# --- greedy search -------------------------------------------------------------

def _decode(col: int, p: int) -> tuple[int, int]:
    return col // p + 1, col % p + 1


def _split_product(w_leaf: float, u: float) -> tuple[float, float]:
    """Factor a combined coefficient ``u`` into (leaf weight, new weight), both within [-1, 1]."""
    sign = -1.0 if w_leaf < 0 else 1.0
    w_new_leaf = sign * max(abs(w_leaf), abs(u))
    if w_new_leaf == 0.0:
        return 1.0, 0.0
    return w_new_leaf, float(np.clip(u / w_new_leaf, -1.0, 1.0))


def fit(d: Dataset, basis: BasisSet, cfg: FitConfig = FitConfig(), trace: list | None = None) -> Model:
    """Greedy structure search.

    Start from the best single weighted leaf, then repeatedly score every
    ``leaf -> leaf op new_leaf`` replacement (op in +, *; every basis id and
    covariate) with the rest of the tree frozen, commit the globally best
    one and refine all weights by coordinate descent. Ties go to ``+``,
    then earlier leaf (pre-order), lower basis id, lower dim.
    """
    if not isinstance(d, Dataset):
        raise TypeError("fit expects a Dataset")
    basis.check_domain(d.X)
    y = d.y
    n, p = d.n, d.p
    Phi = basis.design(d.X)                                  # (q, n, p)
    G = np.ascontiguousarray(Phi.transpose(1, 0, 2).reshape(n, basis.q * p))
    lookup = design_lookup(Phi)

    _, scores = regress_bounded_columns(y, G)
    col = int(np.argmin(scores))
    i, j = _decode(col, p)
    sol = regress_bounded(y, G[:, col])
    m = Model(sol.w0, Leaf(sol.w, i, j), p=p, basis=basis)
    current = _tree_rss(m, y, lookup)
    if trace is not None:
        trace.append(TraceRow(0, "", "init", i, j, sol.w, current))
    log.debug("init phi=%d dim=%d w=%.6g rss=%.6g", i, j, sol.w, current)

    for it in range(1, cfg.iters + 1):
        leaves = list(iter_leaves(m.root))
        contexts = []
        blocks = {PLUS: [], TIMES: []}
        for path, leaf in leaves:
            b, k = _path_constants(m.root, path, lookup, n)
            unit = lookup(leaf.phi, leaf.dim)
            c = leaf.weight * unit
            c_times = unit if cfg.fold_product_weight else c
            contexts.append((b, k, c, c_times))
            for op, cc in ((PLUS, c), (TIMES, c_times)):
                t, s = insertion_problem(y, b, k, cc, 1.0, op)
                blocks[op].append(regress_bounded_columns(t, s[:, None] * G)[1])
        scores = np.concatenate([np.concatenate(blocks[PLUS]), np.concatenate(blocks[TIMES])])
        best = int(np.argmin(scores))
        if cfg.early_stop and scores[best] >= current - EARLY_STOP_TOL:
            log.debug("early stop at iteration %d (best %.6g vs current %.6g)", it, scores[best], current)
            break
        per_op = len(leaves) * G.shape[1]
        op = PLUS if best < per_op else TIMES
        leaf_idx, col = divmod(best % per_op, G.shape[1])
        i, j = _decode(col, p)
        path, leaf = leaves[leaf_idx]
        b, k, c, c_times = contexts[leaf_idx]
        sol = solve_insertion(y, b, k, c if op == PLUS else c_times, G[:, col], op)
        w_new = sol.w
        if op == TIMES and cfg.fold_product_weight:
            leaf.weight, w_new = _split_product(leaf.weight, sol.w)

        m.intercept = sol.w0
        m.root = replace_node(m.root, path, Op(op, leaf, Leaf(w_new, i, j)))
        _cd_passes(m, y, lookup, cfg)
        current = _tree_rss(m, y, lookup)
        if trace is not None:
            trace.append(TraceRow(it, path_str(path), op, i, j, w_new, current))
        log.debug("iter %d %s at %s phi=%d dim=%d rss=%.6g", it, op, path_str(path) or "root", i, j, current)
    return m


def trace_csv(rows: list[TraceRow]) -> str:
    lines = ["iter,leaf_path,op,phi,dim,w,rss"]
    for r in rows:
        lines.append(f"{r.iter},{r.leaf_path},{r.op},{r.phi},{r.dim},{r.w!r},{r.rss!r}")
    return "\n".join(lines) + "\n"


__all__ = [
    "Dataset", "FitConfig", "PathConstants", "Insertion", "TraceRow",
    "path_constants", "regress_bounded", "regress_bounded_columns", "insertion_problem",
    "solve_insertion", "fit", "coordinate_descent", "predict", "risk", "rss",
    "squared_loss", "clipped_loss", "hinge_loss", "trace_csv", "LEFT",
]
