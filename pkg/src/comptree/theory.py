"""Sample-complexity bounds, tree-counting oracles and the restricted cosine ensemble.

All logarithms are natural. Factorials and binomials go through
``math.lgamma`` so that large ``k`` does not overflow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy.stats import qmc

from .tree import OPS, Leaf, Node, Op, flatten_node

GUARD_LIMIT = 10**7
MF_GROWTH = 1.45


class GuardError(RuntimeError):
    """Raised when an enumeration would exceed the feasibility guard."""

    def __init__(self, estimate: float, limit: float = GUARD_LIMIT):
        super().__init__(f"enumeration refused: estimated size {estimate:.4g} exceeds limit {limit:.4g}")
        self.estimate = estimate
        self.limit = limit


@dataclass(frozen=True)
class BoundInputs:
    n: int = 250
    k: int = 10
    p: int = 100
    q: int = 40
    delta: float = 0.05
    epsilon: float = 0.1
    sigma_eps: float = 1.0

    def __post_init__(self):
        for name in ("n", "k", "p", "q"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.sigma_eps <= 0:
            raise ValueError("sigma_eps must be positive")


def log_factorial(k: int) -> float:
    return math.lgamma(k + 1)


def log_binomial(n: int, r: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


def _union_log_term(k: int, p: int, q: int) -> float:
    # log(8 k k!) + (k+1) log(pq)
    return (k + 1) * math.log(p * q) + math.log(8 * k) + log_factorial(k)


def generalization_gap(b: BoundInputs) -> float:
    """Uniform bound on true minus empirical clipped risk, holding w.p. 1 - delta:

    2 sqrt((k+1)/n) + sqrt(((k+1) log pq + log(8 k k!) + log(1/delta)) / (2n))
    """
    numer = 2.0 * math.sqrt(b.k + 1) + math.sqrt((_union_log_term(b.k, b.p, b.q) - math.log(b.delta)) / 2.0)
    return numer / math.sqrt(b.n)


def sufficient_n_bound(b: BoundInputs) -> float:
    """Unrounded sample size after which the excess risk is below epsilon w.p. 1 - delta."""
    k = b.k
    numer = (3 * (k + 1) * (math.log(b.p * b.q) + 8)
             + 3 * (math.log(8 * k) + log_factorial(k))
             + 6 * math.log(2.0 / b.delta))
    return numer / (2.0 * b.epsilon ** 2)


def sufficient_n(b: BoundInputs) -> int:
    return math.ceil(sufficient_n_bound(b))


def necessary_n(b: BoundInputs) -> float:
    """Sample size at or below which any estimator errs w.p. >= 1/2 on the restricted ensemble."""
    if b.p < b.k + 1:
        raise ValueError(f"necessary_n needs p >= k + 1 (got p={b.p}, k={b.k})")
    return ((b.k + 1) * math.log(b.q) + log_binomial(b.p, b.k + 1) - 2 * math.log(2)) * b.sigma_eps ** 2 / 2.0


@dataclass(frozen=True)
class BoundReport:
    inputs: BoundInputs
    gap: float
    sufficient_n: int
    necessary_n: float | None

    def rows(self) -> list[tuple[str, str]]:
        out = [(key, str(val)) for key, val in asdict(self.inputs).items()]
        out.append(("gap", repr(self.gap)))
        out.append(("sufficient_n", str(self.sufficient_n)))
        out.append(("necessary_n", "nan" if self.necessary_n is None else repr(self.necessary_n)))
        return out

    def text(self) -> str:
        rows = self.rows()
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"

    def csv(self) -> str:
        rows = self.rows()
        return ",".join(k for k, _ in rows) + "\n" + ",".join(v for _, v in rows) + "\n"


def bound_report(b: BoundInputs) -> BoundReport:
    nec = necessary_n(b) if b.p >= b.k + 1 else None
    return BoundReport(b, generalization_gap(b), sufficient_n(b), nec)


# --- counting labeled trees ----------------------------------------------------

def tree_count_bound(k: int, p: int, q: int) -> int:
    """4 k k! (pq)^(k+1); for k = 0 the single-leaf count pq."""
    if k == 0:
        return p * q
    return 4 * k * math.factorial(k) * (p * q) ** (k + 1)


def _exact_counts(k: int, pq: int, distinct_children: bool) -> list[int]:
    counts = [pq]
    for K in range(1, k + 1):
        pairs = sum(counts[a] * counts[K - 1 - a] for a in range(K))
        if distinct_children and (K - 1) % 2 == 0:
            # ordered pairs with identical children, only possible for equal halves
            pairs -= counts[(K - 1) // 2]
        counts.append(len(OPS) * pairs)
    return counts


def count_trees(k: int, p: int, q: int, exact: bool = True, distinct_children: bool = True) -> int:
    """Number of labeled trees with exactly (or at most) ``k`` operations.

    Children are ordered, so mirror images count twice. With
    ``distinct_children`` a node may not have two identical subtrees, which
    gives pq trees for k=0 and 2(pq)^2 - 2pq for k=1.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    counts = _exact_counts(k, p * q, distinct_children)
    return counts[k] if exact else sum(counts)


def _check_guard(estimate: float, limit: float) -> None:
    if estimate > limit:
        raise GuardError(estimate, limit)


def _labeled(K: int, labels: tuple, distinct: bool, memo: dict) -> list:
    if K in memo:
        return memo[K]
    if K == 0:
        out = [("leaf", lab) for lab in labels]
    else:
        out = []
        for op in OPS:
            for a in range(K):
                lefts = _labeled(a, labels, distinct, memo)
                rights = _labeled(K - 1 - a, labels, distinct, memo)
                same_size = a == K - 1 - a
                for left in lefts:
                    for right in rights:
                        if distinct and same_size and left == right:
                            continue
                        out.append((op, left, right))
    memo[K] = out
    return out


def _to_node(t) -> Node:
    if t[0] == "leaf":
        phi, dim = t[1]
        return Leaf(1.0, phi, dim)
    return Op(t[0], _to_node(t[1]), _to_node(t[2]))


def enumerate_tree_tuples(k_max: int, p: int, q: int, exact: bool = False, distinct_children: bool = True,
                          guard: float = GUARD_LIMIT) -> Iterator[tuple]:
    """Like :func:`enumerate_trees` but yields nested tuples ``("leaf", (phi, dim))`` / ``(op, l, r)``."""
    _check_guard(sum(tree_count_bound(K, p, q) for K in range(k_max + 1)) if not exact else tree_count_bound(k_max, p, q),
                 guard)
    labels = tuple((i, j) for i in range(1, q + 1) for j in range(1, p + 1))
    memo: dict = {}
    for K in ([k_max] if exact else range(k_max + 1)):
        yield from _labeled(K, labels, distinct_children, memo)


def enumerate_trees(k_max: int, p: int, q: int, exact: bool = False, distinct_children: bool = True,
                    guard: float = GUARD_LIMIT) -> Iterator[Node]:
    """All labeled trees with at most (or exactly) ``k_max`` operations; leaves carry weight 1.

    Refuses with :class:`GuardError` when the a-priori size bound exceeds ``guard``.
    """
    for t in enumerate_tree_tuples(k_max, p, q, exact, distinct_children, guard):
        yield _to_node(t)


# --- flat-decomposition length -------------------------------------------------

@lru_cache(maxsize=None)
def _max_mf_exact(K: int) -> int:
    if K == 0:
        return 1
    best = 0
    for a in range(K):
        ma, mb = _max_mf_exact(a), _max_mf_exact(K - 1 - a)
        best = max(best, ma * mb, ma + mb)
    return best


def max_mf(k: int) -> int:
    """Largest number of product terms over all trees with at most ``k`` operations.

    Labels do not affect the count, so this only depends on ``k``.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    return max(_max_mf_exact(K) for K in range(k + 1))


def enumerate_shapes(k_max: int) -> Iterator[Node]:
    """Every op-labeled shape with at most ``k_max`` operations (one dummy leaf label)."""
    memo: dict = {}
    for K in range(k_max + 1):
        for t in _labeled(K, ((1, 1),), False, memo):
            yield _to_node(t)


def max_mf_bruteforce(k: int) -> int:
    return max(len(flatten_node(node)) for node in enumerate_shapes(k))


# --- restricted ensemble -------------------------------------------------------

@dataclass(frozen=True)
class EnsembleMember:
    """Product of sqrt(2) cos(i pi x_j) over pairs ``(i, j)`` with distinct dims."""

    A: tuple[tuple[int, int], ...]

    def __post_init__(self):
        dims = [j for _, j in self.A]
        if len(set(dims)) != len(dims):
            raise ValueError("each covariate may appear at most once in an ensemble member")


def ensemble_size(k: int, p: int, q: int) -> int:
    return sum(q ** (i + 1) * math.comb(p, i + 1) for i in range(1, k + 1))


def ensemble_enumerate(k: int, p: int, q: int, guard: float = GUARD_LIMIT) -> list[EnsembleMember]:
    """Members with 2..k+1 factors on distinct covariates, in (size, dims, ids) order."""
    if p < 2:
        raise ValueError("the ensemble needs p >= 2")
    _check_guard(ensemble_size(k, p, q), guard)
    out = []
    for size in range(2, min(k + 1, p) + 1):
        for dims in itertools.combinations(range(1, p + 1), size):
            for ids in itertools.product(range(1, q + 1), repeat=size):
                out.append(EnsembleMember(tuple(zip(ids, dims))))
    return out


def ensemble_eval(g: EnsembleMember, x) -> float | np.ndarray:
    """Evaluate ``g`` at one point or each row of a matrix in [-1, 1]^p."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if np.any(np.abs(X) > 1 + 1e-12):
        raise ValueError("ensemble inputs must lie in [-1, 1]^p")
    out = np.ones(X.shape[0])
    for i, j in g.A:
        out = out * (math.sqrt(2.0) * np.cos(i * np.pi * X[:, j - 1]))
    return float(out[0]) if single else out


def uniform_points(n: int, p: int, seed: int = 0, method: str = "qmc", domain=(-1.0, 1.0)) -> np.ndarray:
    """Sample points for Monte Carlo integration under the uniform law on ``domain^p``.

    ``qmc`` uses a scrambled Halton sequence (randomized quasi-Monte Carlo),
    ``iid`` plain pseudo-random draws.
    """
    if method == "qmc":
        U = qmc.Halton(d=p, scramble=True, seed=seed).random(n)
    elif method == "iid":
        U = np.random.default_rng(seed).uniform(size=(n, p))
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    lo, hi = domain
    return lo + (hi - lo) * U


def ensemble_gram(members: list[EnsembleMember], p: int, n_points: int = 100_000, seed: int = 0,
                  method: str = "qmc") -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo estimates of inner products <g, g'> and squared distances ||g - g'||^2."""
    X = uniform_points(n_points, p, seed, method)
    V = np.stack([ensemble_eval(g, X) for g in members], axis=1)
    gram = V.T @ V / n_points
    sq = V * V
    dist = (sq.sum(axis=0)[:, None] + sq.sum(axis=0)[None, :] - 2 * V.T @ V) / n_points
    return gram, dist
