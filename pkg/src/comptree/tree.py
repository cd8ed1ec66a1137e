"""Weighted labeled binary trees over basis leaves.

A tree has ``+``/``*`` internal nodes and leaves ``w * phi_i(x_j)``; a
:class:`Model` adds a free intercept. Basis ids and covariate dims are
1-based throughout, as in the text format::

    (model :w0 0.5 (* (leaf :w 1 :phi 1 :dim 1) (leaf :w -0.25 :phi 3 :dim 2)))
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence, Union

import numpy as np

from .basis import BasisSet, from_spec

PLUS = "+"
TIMES = "*"
OPS = (PLUS, TIMES)

LEFT, RIGHT = 0, 1


@dataclass
class Leaf:
    weight: float
    phi: int
    dim: int

    def __post_init__(self):
        if self.phi < 1 or self.dim < 1:
            raise ValueError("leaf basis id and dim are 1-based")


@dataclass
class Op:
    op: str
    left: "Node"
    right: "Node"

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown operation {self.op!r}")


Node = Union[Leaf, Op]


@dataclass
class Model:
    """Intercept plus an optional tree.

    ``x_min``/``x_max`` hold a per-column min-max map applied to raw
    covariates before evaluation (see :meth:`transform_input`).
    """

    intercept: float
    root: Node | None = None
    p: int | None = None
    basis: BasisSet | None = field(default=None, repr=False)
    x_min: np.ndarray | None = field(default=None, repr=False)
    x_max: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.root is None:
            return
        for _, leaf in iter_leaves(self.root):
            if self.p is not None and leaf.dim > self.p:
                raise ValueError(f"leaf dim {leaf.dim} exceeds p={self.p}")
            if self.basis is not None and leaf.phi > self.basis.q:
                raise ValueError(f"leaf basis id {leaf.phi} exceeds q={self.basis.q}")

    def copy(self) -> "Model":
        return Model(self.intercept, copy.deepcopy(self.root), self.p, self.basis,
                     None if self.x_min is None else self.x_min.copy(),
                     None if self.x_max is None else self.x_max.copy())

    def transform_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.x_min is None:
            return X
        span = np.where(self.x_max > self.x_min, self.x_max - self.x_min, 1.0)
        return np.clip((X - self.x_min) / span, 0.0, 1.0)

    @property
    def n_leaves(self) -> int:
        return 0 if self.root is None else count_leaves(self.root)

    @property
    def weights(self) -> np.ndarray:
        if self.root is None:
            return np.zeros(0)
        return np.array([leaf.weight for _, leaf in iter_leaves(self.root)])


@dataclass
class FlatDecomposition:
    """Sum-of-products form: output minus intercept equals ``sum_t v[t] * prod(u_terms[t])``."""

    v: np.ndarray
    u_terms: list[list[tuple[int, int]]]

    def __len__(self):
        return len(self.v)

    def u(self, X, basis: BasisSet) -> np.ndarray:
        """Evaluate every product term: shape ``(n, M_f)`` (or ``(M_f,)`` for one row)."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        cols = []
        for factors in self.u_terms:
            prod = np.ones(X.shape[0])
            for phi, dim in factors:
                f = basis[phi]
                prod = prod * (f.norm * f.raw(X[:, dim - 1]))
            cols.append(prod)
        U = np.stack(cols, axis=1)
        return U[0] if single else U


# --- traversal ---------------------------------------------------------------

def iter_leaves(node: Node, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Leaf]]:
    """Pre-order (left-first) leaves with their paths from ``node``."""
    if isinstance(node, Leaf):
        yield path, node
    else:
        yield from iter_leaves(node.left, path + (LEFT,))
        yield from iter_leaves(node.right, path + (RIGHT,))


def count_leaves(node: Node) -> int:
    return 1 if isinstance(node, Leaf) else count_leaves(node.left) + count_leaves(node.right)


def count_ops(node: Node) -> int:
    return 0 if isinstance(node, Leaf) else 1 + count_ops(node.left) + count_ops(node.right)


def count_nodes(node: Node) -> int:
    return 1 if isinstance(node, Leaf) else 1 + count_nodes(node.left) + count_nodes(node.right)


def normalize_path(path: Sequence) -> tuple[int, ...]:
    """Accept 0/1, "L"/"R" or "left"/"right" steps."""
    out = []
    for step in path:
        if step in (LEFT, "L", "l", "left"):
            out.append(LEFT)
        elif step in (RIGHT, "R", "r", "right"):
            out.append(RIGHT)
        else:
            raise ValueError(f"bad path step {step!r}")
    return tuple(out)


def path_str(path: Sequence[int]) -> str:
    return "".join("L" if s == LEFT else "R" for s in path)


def child(node: Op, side: int) -> Node:
    return node.left if side == LEFT else node.right


def get_node(root: Node, path: Sequence) -> Node:
    node = root
    for side in normalize_path(path):
        if isinstance(node, Leaf):
            raise ValueError("path falls off the tree")
        node = child(node, side)
    return node


def replace_node(root: Node, path: Sequence, new: Node) -> Node:
    """Return ``root`` with the node at ``path`` replaced (mutates in place when path is non-empty)."""
    path = normalize_path(path)
    if not path:
        return new
    parent = get_node(root, path[:-1])
    if isinstance(parent, Leaf):
        raise ValueError("path falls off the tree")
    if path[-1] == LEFT:
        parent.left = new
    else:
        parent.right = new
    return root


def mirror_at(root: Node, path: Sequence) -> Node:
    """Copy of ``root`` with the children of the op at ``path`` swapped."""
    root = copy.deepcopy(root)
    node = get_node(root, path)
    if isinstance(node, Op):
        node.left, node.right = node.right, node.left
    return root


# --- evaluation --------------------------------------------------------------

Lookup = Callable[[int, int], np.ndarray]


def design_lookup(Phi: np.ndarray) -> Lookup:
    """Column lookup into a precomputed ``(q, n, p)`` design array."""
    return lambda phi, dim: Phi[phi - 1, :, dim - 1]


def basis_lookup(basis: BasisSet, X: np.ndarray) -> Lookup:
    def lookup(phi, dim):
        f = basis[phi]
        return f.norm * f.raw(X[:, dim - 1])
    return lookup


def node_values(node: Node, lookup: Lookup) -> np.ndarray:
    if isinstance(node, Leaf):
        return node.weight * lookup(node.phi, node.dim)
    left = node_values(node.left, lookup)
    right = node_values(node.right, lookup)
    return left + right if node.op == PLUS else left * right


def _check_rows(m: Model, X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2:
        raise ValueError("covariates must be a row or a 2-D array")
    if m.p is not None and X.shape[1] != m.p:
        raise ValueError(f"expected {m.p} covariates, got {X.shape[1]}")
    if m.root is not None:
        need = max(leaf.dim for _, leaf in iter_leaves(m.root))
        if X.shape[1] < need:
            raise ValueError(f"tree uses covariate {need} but rows have {X.shape[1]}")
    return X, single


def evaluate(m: Model, x, basis: BasisSet | None = None):
    """Model output for one covariate row (float) or for each row of a matrix."""
    X, single = _check_rows(m, x)
    if m.root is None:
        out = np.full(X.shape[0], float(m.intercept))
    else:
        basis = basis or m.basis
        if basis is None:
            raise ValueError("model has no basis set attached")
        basis.check_domain(X)
        out = m.intercept + node_values(m.root, basis_lookup(basis, X))
    return float(out[0]) if single else out


# --- flat decomposition ------------------------------------------------------

def flatten_node(node: Node) -> FlatDecomposition:
    if isinstance(node, Leaf):
        return FlatDecomposition(np.array([node.weight], dtype=float), [[(node.phi, node.dim)]])
    left = flatten_node(node.left)
    right = flatten_node(node.right)
    if node.op == PLUS:
        return FlatDecomposition(np.concatenate([left.v, right.v]), left.u_terms + right.u_terms)
    v = np.outer(left.v, right.v).ravel()
    u_terms = [lu + ru for lu in left.u_terms for ru in right.u_terms]
    return FlatDecomposition(v, u_terms)


def flatten(m: Model) -> FlatDecomposition:
    """Expand the tree into ``(v, u)`` product terms, left-major."""
    if m.root is None:
        raise ValueError("cannot flatten an empty tree")
    return flatten_node(m.root)


def mf_node(node: Node) -> int:
    if isinstance(node, Leaf):
        return 1
    a, b = mf_node(node.left), mf_node(node.right)
    return a + b if node.op == PLUS else a * b


def m_f(m: Model) -> int:
    """Number of product terms in the flat decomposition."""
    if m.root is None:
        raise ValueError("cannot flatten an empty tree")
    return mf_node(m.root)


# --- random trees ------------------------------------------------------------

def random_node(n_ops: int, p: int, q: int, rng: np.random.Generator,
                weight_range: tuple[float, float] = (-1.0, 1.0)) -> Node:
    """Random tree with ``n_ops`` operations: split the leaf budget uniformly, labels uniform."""
    if n_ops == 0:
        return Leaf(float(rng.uniform(*weight_range)), int(rng.integers(1, q + 1)), int(rng.integers(1, p + 1)))
    left_ops = int(rng.integers(0, n_ops))
    op = OPS[int(rng.integers(0, 2))]
    return Op(op, random_node(left_ops, p, q, rng, weight_range),
              random_node(n_ops - 1 - left_ops, p, q, rng, weight_range))


def random_model(n_ops: int, p: int, basis: BasisSet, rng: np.random.Generator,
                 l1_budget: float | None = None) -> Model:
    root = random_node(n_ops, p, basis.q, rng)
    if l1_budget is not None:
        leaves = [leaf for _, leaf in iter_leaves(root)]
        total = sum(abs(leaf.weight) for leaf in leaves)
        if total > 0:
            scale = l1_budget * float(rng.uniform(0.0, 1.0)) / total
            for leaf in leaves:
                leaf.weight *= scale
    return Model(float(rng.normal()), root, p=p, basis=basis)


# --- text format -------------------------------------------------------------

class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.col = col


def fmt_float(x: float) -> str:
    return "%.17g" % float(x)


def _node_text(node: Node) -> str:
    if isinstance(node, Leaf):
        return f"(leaf :w {fmt_float(node.weight)} :phi {node.phi} :dim {node.dim})"
    return f"({node.op} {_node_text(node.left)} {_node_text(node.right)})"


def serialize(m: Model) -> str:
    """Canonical single-line text; optional metadata is written only when set."""
    parts = ["model", ":w0", fmt_float(m.intercept)]
    if m.p is not None:
        parts += [":p", str(int(m.p))]
    if m.basis is not None and m.basis.spec is not None:
        parts += [":basis", f'"{m.basis.spec}"', ":q", str(m.basis.q)]
    if m.x_min is not None:
        parts += [":xmin", "(" + " ".join(fmt_float(v) for v in m.x_min) + ")"]
        parts += [":xmax", "(" + " ".join(fmt_float(v) for v in m.x_max) + ")"]
    if m.root is not None:
        parts.append(_node_text(m.root))
    return "(" + " ".join(parts) + ")"


_TOKEN = re.compile(r'\s*(?:(\()|(\))|"([^"]*)"|([^\s()"]+))')


def _tokenize(text: str):
    pos = 0
    line, line_start = 1, 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError("unexpected character", line, pos - line_start + 1)
        # Advance line counters over consumed whitespace.
        start = m.start(m.lastindex) if m.lastindex else m.end()
        skipped = text[pos:start]
        for i, ch in enumerate(skipped):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        col = start - line_start + 1
        if m.group(1):
            tokens.append(("(", "(", line, col))
        elif m.group(2):
            tokens.append((")", ")", line, col))
        elif m.group(3) is not None:
            tokens.append(("str", m.group(3), line, col))
        else:
            tokens.append(("atom", m.group(4), line, col))
        pos = m.end()
    eof_line, eof_col = line, len(text) - line_start + 1
    return tokens, (eof_line, eof_col)


class _Parser:
    def __init__(self, text: str):
        self.tokens, self.eof = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self, what: str):
        tok = self.peek()
        if tok is None:
            raise ParseError(f"unexpected end of input, expected {what}", *self.eof)
        self.i += 1
        return tok

    def expect(self, kind: str, value: str | None = None):
        tok = self.next(value or kind)
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise ParseError(f"expected {value or kind!r}, got {tok[1]!r}", tok[2], tok[3])
        return tok

    def number(self, conv):
        tok = self.expect("atom")
        try:
            return conv(tok[1])
        except ValueError:
            raise ParseError(f"bad number {tok[1]!r}", tok[2], tok[3]) from None

    def vector(self):
        self.expect("(")
        vals = []
        while self.peek() is not None and self.peek()[0] == "atom":
            vals.append(self.number(float))
        self.expect(")")
        return np.array(vals)

    def node(self) -> Node:
        self.expect("(")
        head = self.expect("atom")
        if head[1] == "leaf":
            fields = {}
            for key, conv in ((":w", float), (":phi", int), (":dim", int)):
                self.expect("atom", key)
                fields[key] = self.number(conv)
            self.expect(")")
            try:
                return Leaf(fields[":w"], fields[":phi"], fields[":dim"])
            except ValueError as e:
                raise ParseError(str(e), head[2], head[3]) from None
        if head[1] in OPS:
            left = self.node()
            right = self.node()
            self.expect(")")
            return Op(head[1], left, right)
        raise ParseError(f"unknown node {head[1]!r}", head[2], head[3])

    def model(self) -> Model:
        self.expect("(")
        self.expect("atom", "model")
        self.expect("atom", ":w0")
        w0 = self.number(float)
        p = spec = q = xmin = xmax = None
        root = None
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError("unexpected end of input, expected ')'", *self.eof)
            if tok[0] == ")":
                self.i += 1
                break
            if tok[0] == "(":
                if root is not None:
                    raise ParseError("model has more than one root", tok[2], tok[3])
                root = self.node()
                continue
            self.i += 1
            if tok[1] == ":p":
                p = self.number(int)
            elif tok[1] == ":basis":
                spec = self.expect("str")[1]
            elif tok[1] == ":q":
                q = self.number(int)
            elif tok[1] == ":xmin":
                xmin = self.vector()
            elif tok[1] == ":xmax":
                xmax = self.vector()
            else:
                raise ParseError(f"unexpected token {tok[1]!r}", tok[2], tok[3])
        if self.peek() is not None:
            tok = self.peek()
            raise ParseError("trailing input after model", tok[2], tok[3])
        basis = from_spec(spec, q=q) if spec is not None else None
        try:
            return Model(w0, root, p=p, basis=basis, x_min=xmin, x_max=xmax)
        except ValueError as e:
            raise ParseError(str(e), 1, 1) from None


def deserialize(text: str) -> Model:
    """Parse the text format; whitespace-insensitive. Raises ParseError with line/column."""
    return _Parser(text).model()
