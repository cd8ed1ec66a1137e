"""Bounded univariate basis functions and the catalogs built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("fourier-sin", "fourier-cos", "trunc-poly", "trunc-poly-knot", "bspline-1")

# Blocks of the catalog spec string, in catalog order.
SPEC_BLOCKS = ("fourier", "poly", "knots", "bspline")

DEFAULT_SPEC = "fourier:8,poly:3,knots:9,bspline:10"

_DOMAIN_EPS = 1e-12


class DomainError(ValueError):
    """Raised when a basis function is evaluated outside its domain."""


@dataclass(frozen=True)
class BasisFunction:
    """One bounded map ``phi(x) = norm * raw(x)``.

    ``param`` is the frequency for Fourier terms, the exponent for plain
    polynomials, the knot for knotted cubics and ``(center, half_width)``
    for degree-1 B-spline hats.
    """

    id: int
    family: str
    param: float | tuple[float, float]
    norm: float = 1.0
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")

    def raw(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "fourier-sin":
            return np.sin(self.param * np.pi * x)
        if self.family == "fourier-cos":
            return np.cos(self.param * np.pi * x)
        if self.family == "trunc-poly":
            return x ** self.param
        if self.family == "trunc-poly-knot":
            return np.maximum(x - self.param, 0.0) ** 3
        center, half_width = self.param
        return np.maximum(1.0 - np.abs(x - center) / half_width, 0.0)

    def __call__(self, x):
        return evaluate(self, x)

    @property
    def label(self) -> str:
        if self.family == "fourier-sin":
            return f"sin({self.param:g}*pi*x)"
        if self.family == "fourier-cos":
            return f"cos({self.param:g}*pi*x)"
        if self.family == "trunc-poly":
            return f"x^{self.param:g}"
        if self.family == "trunc-poly-knot":
            return f"(x-{self.param:g})_+^3"
        return f"hat({self.param[0]:g},{self.param[1]:g})"


def evaluate(b: BasisFunction, x):
    """Evaluate ``b`` at scalar or array ``x``; raises DomainError outside the domain."""
    arr = np.asarray(x, dtype=float)
    lo, hi = b.domain
    if arr.size and (np.any(arr < lo - _DOMAIN_EPS) or np.any(arr > hi + _DOMAIN_EPS)
                     or np.any(np.isnan(arr))):
        raise DomainError(f"input outside basis domain [{lo:g}, {hi:g}]")
    out = b.norm * b.raw(arr)
    if np.ndim(x) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class BasisSet:
    """An ordered catalog of basis functions with ids ``1..q``."""

    functions: tuple[BasisFunction, ...]
    domain: tuple[float, float] = (0.0, 1.0)
    spec: str | None = field(default=None, compare=False)
    ensemble_only: bool = False

    def __post_init__(self):
        ids = [f.id for f in self.functions]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("basis ids must be contiguous starting at 1")

    @property
    def q(self) -> int:
        return len(self.functions)

    def __len__(self):
        return len(self.functions)

    def __getitem__(self, basis_id: int) -> BasisFunction:
        if not 1 <= basis_id <= self.q:
            raise IndexError(f"basis id {basis_id} outside 1..{self.q}")
        return self.functions[basis_id - 1]

    def __iter__(self):
        return iter(self.functions)

    def check_domain(self, X) -> None:
        X = np.asarray(X, dtype=float)
        lo, hi = self.domain
        if np.any(np.isnan(X)) or np.any(X < lo - _DOMAIN_EPS) or np.any(X > hi + _DOMAIN_EPS):
            raise DomainError(f"covariates outside basis domain [{lo:g}, {hi:g}]")

    def design(self, X) -> np.ndarray:
        """Evaluate every function on every column: array of shape ``(q, n, p)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.check_domain(X)
        return np.stack([f.norm * f.raw(X) for f in self.functions])


def _sup_abs(raw, domain) -> float:
    # Monomials and knotted cubics are monotone on the domain, so the sup sits at an end.
    lo, hi = domain
    return float(max(abs(raw(lo)), abs(raw(hi))))


def _fourier(freqs: int, domain):
    out = []
    for i in range(1, freqs + 1):
        out.append(("fourier-sin", float(i), 1.0))
        out.append(("fourier-cos", float(i), 1.0))
    return out


def _poly(degree: int, domain):
    out = []
    for e in range(1, degree + 1):
        sup = _sup_abs(lambda x, e=e: x ** e, domain)
        out.append(("trunc-poly", float(e), 1.0 / sup))
    return out


def _knots(count: int, domain):
    lo, hi = domain
    out = []
    for t in np.linspace(lo, hi, count + 2)[1:-1]:
        t = round(float(t), 12)
        out.append(("trunc-poly-knot", t, 1.0 / (hi - t) ** 3))
    return out


def _bspline(count: int, domain):
    lo, hi = domain
    centers = np.linspace(lo, hi, count)
    half_width = (hi - lo) / (count - 1) if count > 1 else hi - lo
    return [("bspline-1", (round(float(c), 12), half_width), 1.0) for c in centers]


_BUILDERS = {"fourier": _fourier, "poly": _poly, "knots": _knots, "bspline": _bspline}


def parse_spec(spec: str) -> list[tuple[str, int]]:
    """Parse ``"fourier:8,poly:3"`` into ``[("fourier", 8), ("poly", 3)]``."""
    blocks = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        name, sep, count = part.partition(":")
        name = name.strip().lower()
        if name not in _BUILDERS or not sep:
            raise ValueError(f"bad basis spec block {part!r}; expected one of {SPEC_BLOCKS} as name:count")
        try:
            n = int(count)
        except ValueError:
            raise ValueError(f"bad count in basis spec block {part!r}") from None
        if n < 0:
            raise ValueError(f"negative count in basis spec block {part!r}")
        if name == "poly" and n > 3:
            raise ValueError("poly block supports degrees up to 3")
        if any(name == b for b, _ in blocks):
            raise ValueError(f"basis spec repeats block {name!r}")
        blocks.append((name, n))
    if not blocks:
        raise ValueError("empty basis spec")
    return blocks


def from_spec(spec: str, q: int | None = None, domain=(0.0, 1.0)) -> BasisSet:
    """Expand a spec string in catalog order, then truncate to the first ``q``."""
    domain = (float(domain[0]), float(domain[1]))
    entries = []
    for name, n in sorted(parse_spec(spec), key=lambda b: SPEC_BLOCKS.index(b[0])):
        if n:
            entries.extend(_BUILDERS[name](n, domain))
    if q is not None:
        if q < 1:
            raise ValueError("q must be >= 1")
        if q > len(entries):
            raise ValueError(f"basis spec {spec!r} provides {len(entries)} functions, fewer than q={q}")
        entries = entries[:q]
    funcs = tuple(
        BasisFunction(id=i + 1, family=fam, param=par, norm=norm, domain=domain)
        for i, (fam, par, norm) in enumerate(entries)
    )
    canonical = ",".join(f"{name}:{n}" for name, n in parse_spec(spec))
    return BasisSet(funcs, domain=domain, spec=canonical)


def catalog_spec(q: int) -> str:
    """Spec string whose expansion has at least ``q`` functions.

    Uses eight Fourier frequencies as long as the fixed blocks cover ``q``
    and adds frequencies beyond that.
    """
    fixed = 3 + 9 + 10
    freqs = max(8, math.ceil((q - fixed) / 2))
    return f"fourier:{freqs},poly:3,knots:9,bspline:10"


def standard_catalog(q: int, domain=(0.0, 1.0)) -> BasisSet:
    """Deterministic catalog of the first ``q`` functions.

    Order: sin(pi x), cos(pi x), sin(2 pi x), ..., then x, x^2, x^3, then
    (x - t)_+^3 for t on 0.1..0.9, then degree-1 hats on a uniform 10-knot grid.
    Every function is scaled so that its sup norm on ``domain`` is at most 1.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    return from_spec(catalog_spec(q), q=q, domain=domain)


def ensemble_basis(q: int) -> BasisSet:
    """``sqrt(2) cos(i pi z)`` on [-1, 1], i = 1..q.

    Orthonormal under the uniform measure on [-1, 1]; the sup norm is
    sqrt(2), so this set is only for the restricted lower-bound ensemble.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    funcs = tuple(
        BasisFunction(id=i, family="fourier-cos", param=float(i), norm=math.sqrt(2.0), domain=(-1.0, 1.0))
        for i in range(1, q + 1)
    )
    return BasisSet(funcs, domain=(-1.0, 1.0), ensemble_only=True)
