"""Rigorous upper bounds on critical probabilities.

Every bound is either a closed form obtained by folding dimensions onto a
known low-dimensional constant, or the root of an implicit equation in p
solved by bisection on (0, 1). Roots carry a certificate: the residual at
the returned point, a sign check a hair either side of it, and a coarse
scan confirming that the residual crosses zero exactly once.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from decimal import ROUND_CEILING, Decimal
from typing import Callable, Optional, Union

from .lattice import FAMILIES, Kind, ModelSpec

__all__ = [
    "BoundError",
    "BoundResult",
    "BoundTable",
    "KnownConstant",
    "Method",
    "ModelSpec",
    "RootCertificate",
    "RootProblem",
    "best_bound",
    "bound_by_method",
    "crossover_alpha",
    "crossover_bound",
    "fold_general",
    "folded_div3_site_bound",
    "folded_even_bound",
    "generate_table",
    "known_constant",
    "oriented_bond_highdim_bound",
    "registry",
    "round_up",
    "solve_bracketed_root",
    "theorem1_bound",
]

ROOT_TOL = 1e-12
MAX_BISECTIONS = 200
INITIAL_BRACKET = (1e-9, 1 - 1e-9)
SCAN_POINTS = 1000
RECIPE_MAX_D = 9


class BoundError(ValueError):
    """Invalid arguments, or a root problem that does not certify."""


class Method(str, enum.Enum):
    THM1 = "thm1"
    THM2_1 = "thm2.1"
    THM2_2 = "thm2.2"
    THM2_3 = "thm2.3"
    THM3_1 = "thm3.1"
    THM3_2 = "thm3.2"
    THM3_3 = "thm3.3"
    THM4_1 = "thm4.1"
    THM4_2 = "thm4.2"
    REGISTRY = "registry"
    FOLD = "fold"  # dimension folding with a divisor k outside {2, 3}


def round_up(value: float, places: int = 4) -> float:
    """Ceiling of ``value`` at ``places`` decimals.

    Works on the shortest repr of the double, so constants such as 0.68
    stay 0.68 instead of drifting to 0.6801 through binary noise, while any
    value with more digits is pushed strictly upward.
    """
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(q, rounding=ROUND_CEILING))


@dataclass(frozen=True)
class RootProblem:
    residual: Callable[[float], float]
    bracket: tuple[float, float] = INITIAL_BRACKET
    tolerance: float = ROOT_TOL


@dataclass(frozen=True)
class RootCertificate:
    root: float
    residual: float
    left: float
    right: float
    sign_changes: int
    iterations: int

    @property
    def ok(self) -> bool:
        return (
            abs(self.residual) < ROOT_TOL
            and self.left * self.right < 0
            and self.sign_changes == 1
        )


def _bisect(problem: RootProblem) -> tuple[float, int]:
    f = problem.residual
    lo, hi = problem.bracket
    tol = problem.tolerance
    if not (tol > 0 and lo < hi):
        raise BoundError(f"bad root problem: bracket={problem.bracket}, tolerance={tol}")
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo, 0
    if fhi == 0:
        return hi, 0
    if flo * fhi > 0:
        raise BoundError(
            f"no sign change on [{lo!r}, {hi!r}]: residuals {flo!r}, {fhi!r}"
        )
    for it in range(1, MAX_BISECTIONS + 1):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0 or (abs(fmid) < tol and hi - lo < tol):
            return mid, it
        if mid <= lo or mid >= hi:
            # bracket exhausted at machine precision
            break
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    raise BoundError(f"bisection did not converge within {MAX_BISECTIONS} steps")


def solve_bracketed_root(problem: RootProblem) -> float:
    """Root of ``problem.residual`` inside ``problem.bracket`` by bisection.

    Stops once the residual and the bracket width are both below the
    tolerance. Raises :class:`BoundError` if the endpoints do not straddle
    zero or if 200 halvings are not enough.
    """
    return _bisect(problem)[0]


def certify_root(problem: RootProblem, offset: float = 1e-10) -> RootCertificate:
    root, iterations = _bisect(problem)
    f = problem.residual
    lo, hi = problem.bracket
    grid = [lo + (hi - lo) * i / (SCAN_POINTS - 1) for i in range(SCAN_POINTS)]
    values = [f(x) for x in grid]
    changes = sum(1 for a, b in zip(values, values[1:]) if a * b < 0 or (b == 0 and a != 0))
    return RootCertificate(
        root=root,
        residual=f(root),
        left=f(root - offset),
        right=f(root + offset),
        sign_changes=changes,
        iterations=iterations,
    )


@dataclass(frozen=True)
class KnownConstant:
    model: ModelSpec
    value: float
    source_tag: str


_REGISTRY = (
    KnownConstant(ModelSpec(2, Kind.BOND, True), 2 / 3, "Liggett 1995, oriented bond on Z^2"),
    KnownConstant(ModelSpec(2, Kind.SITE, False), 0.68, "Wierman 1995, site on Z^2"),
    KnownConstant(ModelSpec(3, Kind.SITE, False), 0.5, "Campanino-Russo 1985, site on Z^3"),
    KnownConstant(ModelSpec(2, Kind.SITE, True), 0.75, "Liggett 1995, oriented site on Z^2"),
)


def registry() -> tuple[KnownConstant, ...]:
    return _REGISTRY


def known_constant(model: ModelSpec) -> KnownConstant:
    for c in _REGISTRY:
        if c.model == model:
            return c
    raise BoundError(f"no registry constant for {model.family} at d={model.d}")


@dataclass(frozen=True)
class Provenance:
    method: Method
    d: int
    value: float

    def to_dict(self) -> dict:
        return {"method": self.method.value, "d": self.d, "value": self.value}


@dataclass(frozen=True)
class BoundResult:
    model: ModelSpec
    value: float
    method: Method
    provenance: tuple[Provenance, ...]
    certificate: Optional[RootCertificate] = field(default=None, compare=False)
    extended: bool = False

    def __post_init__(self):
        if not 0 < self.value < 1:
            raise BoundError(f"bound {self.value!r} is not in (0, 1)")
        if not self.provenance:
            raise BoundError("empty provenance")

    @property
    def d(self) -> int:
        return self.model.d

    @property
    def rounded(self) -> float:
        return round_up(self.value)

    def to_dict(self) -> dict:
        out = {
            "family": self.model.family,
            "d": self.d,
            "method": self.method.value,
            "value": self.value,
            "rounded": self.rounded,
            "provenance": [p.to_dict() for p in self.provenance],
        }
        if self.certificate is not None:
            out["residual"] = self.certificate.residual
        if self.extended:
            out["extended"] = True
        return out


Base = Union[BoundResult, KnownConstant]


def _as_result(base: Base) -> BoundResult:
    if isinstance(base, BoundResult):
        return base
    return BoundResult(
        base.model,
        base.value,
        Method.REGISTRY,
        (Provenance(Method.REGISTRY, base.model.d, base.value),),
    )


def _derive(base: Base, model: ModelSpec, value: float, method: Method, cert=None) -> BoundResult:
    chain = _as_result(base).provenance + (Provenance(method, model.d, value),)
    return BoundResult(model, value, method, chain, cert)


def _require_certified(cert: RootCertificate, what: str) -> None:
    if not cert.ok:
        raise BoundError(f"{what}: root failed certification {cert}")


def theorem1_exponents(d: int) -> tuple[int, int, int]:
    return tuple((d + i) // 3 for i in range(3))


def theorem1_residual(d: int) -> Callable[[float], float]:
    """prod(1 - (1-p)^n_i) - (2 - sum (1-p)^n_i) with n_i = floor((d+i)/3)."""
    n0, n1, n2 = theorem1_exponents(d)

    def residual(p: float) -> float:
        s = 1.0 - p
        a, b, c = s**n0, s**n1, s**n2
        return (1 - a) * (1 - b) * (1 - c) - (2 - a - b - c)

    return residual


def theorem1_bound(d: int) -> BoundResult:
    """Non-oriented bond bound from the triangular-lattice criterion.

    Split the d axes into three groups of sizes floor(d/3), floor((d+1)/3),
    floor((d+2)/3); folding each group gives an anisotropic Z^3 model
    dominating the triangular lattice, which percolates once
    p1 + p2 + p3 - p1 p2 p3 > 1.
    """
    if d < 3:
        raise BoundError(f"theorem1_bound needs d >= 3, got {d}")
    cert = certify_root(RootProblem(theorem1_residual(d)))
    _require_certified(cert, f"thm1 d={d}")
    model = ModelSpec(d, Kind.BOND, False)
    value = cert.root
    return BoundResult(model, value, Method.THM1, (Provenance(Method.THM1, d, value),), cert)


_FOLD_METHODS = {
    ("oriented-bond", 2): Method.THM2_1,
    ("site", 2): Method.THM3_1,
    ("site", 3): Method.THM3_2,
    ("oriented-site", 2): Method.THM4_1,
}

_CROSSOVER_METHODS = {
    "oriented-bond": Method.THM2_3,
    "site": Method.THM3_3,
    "oriented-site": Method.THM4_2,
}


def fold_general(d: int, k: int, base: Base, method: Optional[Method] = None) -> BoundResult:
    """Lift a dimension-k bound to dimension d (k | d): 1 - (1 - b)^(k/d).

    Grouping the d axes into k classes of d/k turns parameter p on Z^d
    into 1 - (1-p)^(d/k) on Z^k; the returned p is the smallest one whose
    folded parameter reaches the base bound.
    """
    b = _as_result(base)
    if k < 1 or d < k or d % k:
        raise BoundError(f"k={k} does not divide d={d}")
    if b.d != k:
        raise BoundError(f"base bound is for d={b.d}, expected k={k}")
    if d == k:
        return b
    if method is None:
        method = _FOLD_METHODS.get((b.model.family, k), Method.FOLD)
    value = 1.0 - (1.0 - b.value) ** (k / d)
    return _derive(b, b.model.with_dimension(d), value, method)


def folded_even_bound(d: int, base: KnownConstant) -> BoundResult:
    """Even-d bound from a two-dimensional registry constant."""
    if d < 2 or d % 2:
        raise BoundError(f"folded_even_bound needs even d >= 2, got {d}")
    if not isinstance(base, KnownConstant) or base.model.d != 2:
        raise BoundError("base must be a two-dimensional registry constant")
    if base.model.family not in ("oriented-bond", "site", "oriented-site"):
        raise BoundError(f"no even folding bound for {base.model.family}")
    return fold_general(d, 2, base)


def folded_div3_site_bound(d: int) -> BoundResult:
    """Site bound 1 - 0.5^(3/d) for d divisible by 3."""
    if d < 3 or d % 3:
        raise BoundError(f"folded_div3_site_bound needs 3 | d, got {d}")
    base = known_constant(ModelSpec(3, Kind.SITE, False))
    if d == 3:
        return _derive(base, base.model, base.value, Method.THM3_2)
    return fold_general(d, 3, base, Method.THM3_2)


def highdim_constant(d: int) -> float:
    """C_d = 1 + 8/d + d^(5/2) / sqrt(2 pi)^(d-1) * (d-1)/(d-3) * e^(1/(12d))."""
    return (
        1
        + 8 / d
        + d**2.5 / math.sqrt(2 * math.pi) ** (d - 1) * ((d - 1) / (d - 3)) * math.exp(1 / (12 * d))
    )


def oriented_bond_highdim_bound(d: int) -> BoundResult:
    if d < 4:
        raise BoundError(f"oriented_bond_highdim_bound needs d >= 4, got {d}")
    value = 1 / d + highdim_constant(d) / d**2
    if not value < 1:
        raise BoundError(f"high-dimensional formula gives {value} >= 1 at d={d}")
    return BoundResult(
        ModelSpec(d, Kind.BOND, True), value, Method.THM2_2, (Provenance(Method.THM2_2, d, value),)
    )


def crossover_alpha(model: ModelSpec) -> float:
    """Exponent for stepping from ``model.d`` to ``model.d + 1``."""
    d = model.d
    if model.oriented:
        return (d + 1) / d
    if model.kind is Kind.SITE:
        return 2 * d / (2 * d - 1)
    raise BoundError("no crossover step for non-oriented bond percolation")


def crossover_residual(b: float, alpha: float) -> Callable[[float], float]:
    def residual(p: float) -> float:
        return p - b * (p + (1 - p) ** alpha)

    return residual


def crossover_bound(base: Base, alpha: Optional[float] = None) -> BoundResult:
    """Bound in dimension d+1 as the root of p = b [p + (1-p)^alpha].

    ``base`` is a bound b for dimension d. ``alpha`` defaults to (d+1)/d for
    the oriented families and 2d/(2d-1) for non-oriented site.
    """
    b = _as_result(base)
    if not 0 < b.value < 1:
        raise BoundError(f"base value {b.value!r} not in (0, 1)")
    if alpha is None:
        alpha = crossover_alpha(b.model)
    cert = certify_root(RootProblem(crossover_residual(b.value, alpha)))
    _require_certified(cert, f"crossover from {b.value} alpha={alpha}")
    if not cert.root < b.value:
        raise BoundError(f"crossover root {cert.root} is not below its base {b.value}")
    method = _CROSSOVER_METHODS.get(b.model.family, Method.THM2_3)
    return _derive(b, b.model.with_dimension(b.d + 1), cert.root, method, cert)


def _check_model(model: ModelSpec, d: int) -> ModelSpec:
    if d < 3:
        raise BoundError(f"bounds are defined for d >= 3, got {d}")
    return model.with_dimension(d)


def _recipe(model: ModelSpec) -> BoundResult:
    d = model.d
    family = model.family
    if family == "bond":
        return theorem1_bound(d)
    if family == "oriented-bond":
        if d == 3:
            return crossover_bound(known_constant(model.with_dimension(2)))
        if d == 4:
            return folded_even_bound(4, known_constant(model.with_dimension(2)))
        if d == 5:
            return crossover_bound(best_bound(model, 4))
        return oriented_bond_highdim_bound(d)
    if family == "site":
        if d == 3:
            return _as_result(known_constant(model))
        if d in (4, 8):
            return folded_even_bound(d, known_constant(model.with_dimension(2)))
        if d in (6, 9):
            return folded_div3_site_bound(d)
        return crossover_bound(best_bound(model, d - 1))
    # oriented site
    if d % 2 == 0:
        return folded_even_bound(d, known_constant(model.with_dimension(2)))
    if d == 3:
        return crossover_bound(known_constant(model.with_dimension(2)))
    return crossover_bound(best_bound(model, d - 1))


def _candidates(model: ModelSpec) -> list[BoundResult]:
    d = model.d
    family = model.family
    prev = best_bound(model, d - 1) if d - 1 >= 3 else None
    out = []
    if family == "bond":
        out.append(theorem1_bound(d))
    elif family == "oriented-bond":
        if d % 2 == 0:
            out.append(folded_even_bound(d, known_constant(model.with_dimension(2))))
        if d >= 4:
            out.append(oriented_bond_highdim_bound(d))
        out.append(crossover_bound(prev))
    elif family == "site":
        if d % 2 == 0:
            out.append(folded_even_bound(d, known_constant(model.with_dimension(2))))
        if d % 3 == 0:
            out.append(folded_div3_site_bound(d))
        out.append(crossover_bound(prev))
    else:
        if d % 2 == 0:
            out.append(folded_even_bound(d, known_constant(model.with_dimension(2))))
        out.append(crossover_bound(prev))
    return out


@functools.lru_cache(maxsize=None)
def _best(model: ModelSpec) -> BoundResult:
    if model.d <= RECIPE_MAX_D:
        return _recipe(model)
    best = min(_candidates(model), key=lambda r: r.value)
    return BoundResult(best.model, best.value, best.method, best.provenance, best.certificate, True)


def best_bound(model: ModelSpec, d: Optional[int] = None) -> BoundResult:
    """The bound the published recipe uses for dimensions 3..9.

    Beyond d = 9 the smallest bound over every applicable method is
    returned and flagged ``extended``.
    """
    return _best(_check_model(model, model.d if d is None else d))


def bound_by_method(model: ModelSpec, method: Union[Method, str]) -> BoundResult:
    """Evaluate one specific method for ``model`` (used by the CLI override)."""
    method = Method(method)
    d, family = model.d, model.family
    if method is Method.REGISTRY:
        return _as_result(known_constant(model))
    if method is Method.THM1 and family == "bond":
        return theorem1_bound(d)
    if method in (Method.THM2_1, Method.THM3_1, Method.THM4_1) and family == {
        Method.THM2_1: "oriented-bond", Method.THM3_1: "site", Method.THM4_1: "oriented-site"
    }[method]:
        return folded_even_bound(d, known_constant(model.with_dimension(2)))
    if method is Method.THM2_2 and family == "oriented-bond":
        return oriented_bond_highdim_bound(d)
    if method is Method.THM3_2 and family == "site":
        return folded_div3_site_bound(d)
    if _CROSSOVER_METHODS.get(family) is method:
        prev = model.with_dimension(d - 1)
        if d - 1 >= 3:
            base: Base = best_bound(prev)
        else:
            base = known_constant(prev)
        return crossover_bound(base)
    raise BoundError(f"method {method.value} does not apply to {family} at d={d}")


@dataclass(frozen=True)
class BoundTable:
    d_min: int
    d_max: int
    cells: dict  # (d, family) -> BoundResult

    def rows(self):
        for d in range(self.d_min, self.d_max + 1):
            yield d, [self.cells[d, f] for f in FAMILIES]

    def rounded(self) -> dict:
        return {key: r.rounded for key, r in self.cells.items()}

    def to_csv(self) -> str:
        lines = ["d,bond,oriented_bond,site,oriented_site"]
        for d, cells in self.rows():
            lines.append(",".join([str(d)] + [f"{c.rounded:.4f}" for c in cells]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> list:
        return [
            {"d": d, **{f: c.to_dict() for f, c in zip(FAMILIES, cells)}}
            for d, cells in self.rows()
        ]


def generate_table(d_min: int = 3, d_max: int = 9) -> BoundTable:
    if not (isinstance(d_min, int) and isinstance(d_max, int) and 3 <= d_min <= d_max):
        raise BoundError(f"invalid table range {d_min}..{d_max}")
    cells = {}
    for d in range(d_min, d_max + 1):
        for family in FAMILIES:
            cells[d, family] = best_bound(ModelSpec.from_family(family, d))
    return BoundTable(d_min, d_max, cells)
