"""Truncated-Fourier forcing terms and checks of the hypotheses placed on them.

A forcing g is stored by its analytic coefficients (mean a0 plus finitely many
cosine/sine modes), so it is Lipschitz and Z^n-periodic by construction, its
mean is a0 exactly, and its gradient is available in closed form.

The set-quantified hypotheses (the existence of a set A with weighted volume
exceeding its perimeter, and the complementary smallness condition used for
pinning) are quantified over all finite-perimeter sets in the original
statements, which is not decidable numerically.  The checkers here scan the
natural extremizer family -- superlevel sets of +/- g plus the full torus --
and say so in their reports: "no witness found" is not a disproof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import PeriodicGrid, ScalarField, SupportMask, integrate, perimeter_indicator

__all__ = [
    "FourierMode",
    "Forcing",
    "ForcingStats",
    "IsoperimetricConstant",
    "isoperimetric_constant",
    "stats",
    "GConditionWitness",
    "check_gcondition",
    "ClassicalConditionsReport",
    "check_classical_conditions",
    "LSConditionReport",
    "check_ls_condition",
    "CLSConditionReport",
    "check_cls_condition",
    "StationaryConditionReport",
    "check_stationary_condition",
    "ConditionReport",
    "build_condition_report",
]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FourierMode:
    """One wave vector k in Z^n \\ {0} with cosine and sine coefficients."""

    k: tuple[int, ...]
    cos: float = 0.0
    sin: float = 0.0

    def __post_init__(self) -> None:
        if len(self.k) == 0 or all(ki == 0 for ki in self.k):
            raise ValueError("mode wave vector must be nonzero")
        object.__setattr__(self, "k", tuple(int(ki) for ki in self.k))


@dataclass(frozen=True)
class Forcing:
    dimension: int
    a0: float
    modes: tuple[FourierMode, ...] = ()

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError("forcing dimension must be 1 or 2")
        object.__setattr__(self, "modes", tuple(self.modes))
        for mode in self.modes:
            if len(mode.k) != self.dimension:
                raise ValueError(
                    f"mode wave vector {mode.k} does not match dimension {self.dimension}"
                )

    @property
    def mean(self) -> float:
        """Exact mean over the torus: every nonzero mode integrates to zero."""
        return self.a0

    def evaluate(self, *coords: np.ndarray) -> np.ndarray:
        if len(coords) != self.dimension:
            raise ValueError("coordinate count does not match dimension")
        out = np.full(np.broadcast(*coords).shape if self.dimension > 1 else np.shape(coords[0]), self.a0, dtype=np.float64)
        for mode in self.modes:
            phase = _TWO_PI * sum(ki * yi for ki, yi in zip(mode.k, coords))
            if mode.cos != 0.0:
                out = out + mode.cos * np.cos(phase)
            if mode.sin != 0.0:
                out = out + mode.sin * np.sin(phase)
        return out

    def gradient_values(self, *coords: np.ndarray) -> tuple[np.ndarray, ...]:
        """Analytic gradient evaluated at the given coordinates."""
        if len(coords) != self.dimension:
            raise ValueError("coordinate count does not match dimension")
        shape = np.broadcast(*coords).shape if self.dimension > 1 else np.shape(coords[0])
        comps = [np.zeros(shape, dtype=np.float64) for _ in range(self.dimension)]
        for mode in self.modes:
            phase = _TWO_PI * sum(ki * yi for ki, yi in zip(mode.k, coords))
            dphase = -mode.cos * np.sin(phase) + mode.sin * np.cos(phase)
            for j, kj in enumerate(mode.k):
                if kj != 0:
                    comps[j] += _TWO_PI * kj * dphase
        return tuple(comps)

    def sample(self, grid: PeriodicGrid) -> ScalarField:
        if grid.dimension != self.dimension:
            raise ValueError(
                f"grid dimension {grid.dimension} does not match forcing dimension {self.dimension}"
            )
        return ScalarField(grid, self.evaluate(*grid.coordinates()))

    def mode_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(k, cos, sin) arrays for the numba kernels; k has shape (m, dim)."""
        m = len(self.modes)
        ks = np.zeros((m, self.dimension), dtype=np.int64)
        ac = np.zeros(m)
        asn = np.zeros(m)
        for i, mode in enumerate(self.modes):
            ks[i] = mode.k
            ac[i] = mode.cos
            asn[i] = mode.sin
        return ks, ac, asn


@dataclass(frozen=True)
class ForcingStats:
    mean: float
    min: float
    max: float
    oscillation: float
    grad_sup: float
    resolution_used: int


def _grid_extrema(forcing: Forcing, n: int) -> tuple[float, float, float]:
    grid = PeriodicGrid(forcing.dimension, n)
    coords = grid.coordinates()
    vals = forcing.evaluate(*coords)
    grads = forcing.gradient_values(*coords)
    gnorm = np.sqrt(sum(gk * gk for gk in grads))
    return float(vals.min()), float(vals.max()), float(gnorm.max())


def _refined_extrema(forcing: Forcing, n_start: int, rtol: float = 1e-6) -> tuple[float, float, float, int]:
    """Double the resolution until min, max and sup|Dg| all move by < rtol."""
    n_cap = 1 << 17 if forcing.dimension == 1 else 1 << 11
    n = max(4, n_start)
    prev = _grid_extrema(forcing, n)
    while n < n_cap:
        n *= 2
        cur = _grid_extrema(forcing, n)
        if all(abs(c - p) < rtol for c, p in zip(cur, prev)):
            prev = cur
            break
        prev = cur
    return prev[0], prev[1], prev[2], n


def stats(forcing: Forcing, grid: PeriodicGrid) -> ForcingStats:
    """Exact mean plus grid-refined min/max/oscillation/sup|Dg|."""
    gmin, gmax, gsup, n_used = _refined_extrema(forcing, grid.n)
    return ForcingStats(
        mean=forcing.mean,
        min=gmin,
        max=gmax,
        oscillation=gmax - gmin,
        grad_sup=gsup,
        resolution_used=n_used,
    )


@dataclass(frozen=True)
class IsoperimetricConstant:
    """Constant C_n in Per(E, T^n) >= C_n |E|^((n-1)/n) for |E| <= 1/2."""

    dimension: int
    value: float


def isoperimetric_constant(dimension: int) -> IsoperimetricConstant:
    """C_1 = 2 (every proper subset of the circle has at least two jumps).

    C_2 is the minimum of Per/|E|^(1/2) over the two torus competitor
    families constrained to |E| <= 1/2:
      * discs of area a: Per/sqrt(a) = 2*sqrt(pi*a)/sqrt(a) = 2*sqrt(pi) ~ 3.5449,
      * straight strips of area a: Per/sqrt(a) = 2/sqrt(a), minimised at the
        largest admissible area a = 1/2, giving 2*sqrt(2) ~ 2.8284.
    The strip family wins, so C_2 = 2*sqrt(2).
    """
    if dimension == 1:
        return IsoperimetricConstant(1, 2.0)
    if dimension == 2:
        return IsoperimetricConstant(2, 2.0 * math.sqrt(2.0))
    raise ValueError(f"unsupported dimension {dimension}")


@dataclass
class GConditionWitness:
    """A set A with integral of g over A strictly above Per(A, T^n)."""

    mask: SupportMask
    integral: float
    perimeter: float
    level: Optional[float]  # None means A is the whole torus

    @property
    def margin(self) -> float:
        return self.integral - self.perimeter


def _superlevel_candidates(values: np.ndarray, levels: int) -> list[float]:
    lo = float(values.min())
    hi = float(values.max())
    if hi <= lo:
        return []
    lams = list(np.linspace(lo, hi, levels + 2)[1:-1])
    if lo < 0.0 < hi:
        lams.append(0.0)
    return sorted(set(lams))


def check_gcondition(
    forcing: Forcing, grid: PeriodicGrid, levels: int = 64
) -> Optional[GConditionWitness]:
    """Search {g > lambda} for lambda on a grid, plus the full torus.

    Returns the first admissible witness in scan order (torus first, then
    ascending lambda), or None if the family contains no witness.  A None
    answer restricts only the family, it does not disprove the hypothesis.
    """
    gs = forcing.sample(grid)
    full = SupportMask(grid, np.ones(grid.shape, dtype=bool))
    total = integrate(gs)
    if total > 0.0:
        return GConditionWitness(full, total, 0.0, None)
    weight = 1.0 / grid.num_nodes
    for lam in _superlevel_candidates(gs.values, levels):
        inside = gs.values > lam
        count = int(np.count_nonzero(inside))
        if count == 0 or count == grid.num_nodes:
            continue
        mask = SupportMask(grid, inside)
        val = float(gs.values[inside].sum()) * weight
        per = perimeter_indicator(mask)
        if val > per:
            return GConditionWitness(mask, val, per, float(lam))
    return None


@dataclass(frozen=True)
class ClassicalConditionsReport:
    """Evaluation of the four sufficient branches for a globally defined wave."""

    mean: float
    min: float
    max: float
    oscillation: float
    c_n: float
    threshold: float  # C_n * 2^(1/n)
    branch_oscillation_small: bool  # min g <= 0 and osc < C_n 2^{1/n}
    branch_positive_small_max: bool  # g > 0 and max g < C_n 2^{1/n}
    branch_positive_large_max: bool  # g > 0, max g >= threshold, osc below derived bound
    branch_one_dimensional: bool  # n = 1 and g > 0
    hypothesis_ok: bool  # mean(g) > 0

    @property
    def branches(self) -> tuple[bool, bool, bool, bool]:
        return (
            self.branch_oscillation_small,
            self.branch_positive_small_max,
            self.branch_positive_large_max,
            self.branch_one_dimensional,
        )

    @property
    def verdict(self) -> str:
        if not self.hypothesis_ok:
            return "hypothesis violated"
        return "classical" if any(self.branches) else "inconclusive"


def check_classical_conditions(
    forcing: Forcing,
    grid: PeriodicGrid,
    constant: Optional[IsoperimetricConstant] = None,
) -> ClassicalConditionsReport:
    if constant is None:
        constant = isoperimetric_constant(forcing.dimension)
    n = forcing.dimension
    gmin, gmax, _, _ = _refined_extrema(forcing, grid.n)
    osc = gmax - gmin
    cn = constant.value
    threshold = cn * 2.0 ** (1.0 / n)
    positive = gmin > 0.0
    b1 = gmin <= 0.0 and osc < threshold
    b2 = positive and gmax < threshold
    b3 = False
    if positive and gmax >= threshold:
        ratio = (gmax / cn) ** n - 1.0
        b3 = ratio > 0.0 and osc < gmax / ratio
    b4 = n == 1 and positive
    return ClassicalConditionsReport(
        mean=forcing.mean,
        min=gmin,
        max=gmax,
        oscillation=osc,
        c_n=cn,
        threshold=threshold,
        branch_oscillation_small=b1,
        branch_positive_small_max=b2,
        branch_positive_large_max=b3,
        branch_one_dimensional=b4,
        hypothesis_ok=forcing.mean > 0.0,
    )


@dataclass(frozen=True)
class LSConditionReport:
    holds: bool
    theta: Optional[float]
    margin: float
    sign_constant: bool


def check_ls_condition(forcing: Forcing, grid: PeriodicGrid) -> LSConditionReport:
    """Sign-definite g with theta*g^2 dominating (n-1)^2 |Dg| for some theta in (0,1).

    theta is scanned over {0.01, ..., 0.99}; the margin is linear in theta so a
    scan on the fixed grid of values is enough for a boolean report.
    """
    gmin, gmax, _, n_used = _refined_extrema(forcing, grid.n)
    sign_constant = gmin > 0.0 or gmax < 0.0
    fine = PeriodicGrid(forcing.dimension, min(n_used, 1 << 12 if forcing.dimension == 1 else 1 << 9))
    coords = fine.coordinates()
    gsq = forcing.evaluate(*coords) ** 2
    grads = forcing.gradient_values(*coords)
    gnorm = np.sqrt(sum(gk * gk for gk in grads))
    penalty = (forcing.dimension - 1) ** 2 * gnorm
    thetas = np.arange(1, 100) / 100.0
    margins = [float((theta * gsq - penalty).min()) for theta in thetas]
    positive = [i for i, m in enumerate(margins) if m > 0.0]
    if positive:
        # report the smallest admissible theta
        idx = positive[0]
    else:
        idx = int(np.argmax(margins))
    holds = sign_constant and margins[idx] > 0.0
    return LSConditionReport(holds, float(thetas[idx]), margins[idx], sign_constant)


@dataclass(frozen=True)
class CLSConditionReport:
    holds: bool
    mean: float
    min: float


def check_cls_condition(forcing: Forcing) -> CLSConditionReport:
    """One-dimensional solvability window 0 <= mean(g) - min(g) < 2."""
    if forcing.dimension != 1:
        raise ValueError("this condition is one-dimensional only")
    gmin, _, _, _ = _refined_extrema(forcing, 256)
    spread = forcing.mean - gmin
    return CLSConditionReport(0.0 <= spread < 2.0, forcing.mean, gmin)


@dataclass(frozen=True)
class StationaryConditionReport:
    plausible: bool
    best_ratio: float
    best_level: Optional[float]
    family_size: int


def check_stationary_condition(
    forcing: Forcing, grid: PeriodicGrid, levels: int = 64
) -> StationaryConditionReport:
    """Family-restricted check of the pinning condition: sup_A (int_A g)/Per(A) < 1.

    Only superlevel sets of +/- g are tested, so "plausible" means the
    condition holds on that family, not on all sets of finite perimeter.
    """
    if abs(forcing.mean) >= 1e-10:
        raise ValueError("stationary condition requires a forcing with zero average")
    gs = forcing.sample(grid)
    weight = 1.0 / grid.num_nodes
    best_ratio = 0.0
    best_level: Optional[float] = None
    family = 0
    for signed in (gs.values, -gs.values):
        for lam in _superlevel_candidates(signed, levels):
            inside = signed > lam
            count = int(np.count_nonzero(inside))
            if count == 0 or count == grid.num_nodes:
                continue
            per = perimeter_indicator(SupportMask(grid, inside))
            if per <= 0.0:
                continue
            family += 1
            ratio = float(gs.values[inside].sum()) * weight / per
            if ratio > best_ratio:
                best_ratio = ratio
                best_level = float(lam)
    return StationaryConditionReport(best_ratio < 1.0, best_ratio, best_level, family)


@dataclass
class ConditionReport:
    """Aggregate of every forcing hypothesis check, with its numeric evidence."""

    stats: ForcingStats
    gcondition: Optional[GConditionWitness]
    classical: ClassicalConditionsReport
    ls: LSConditionReport
    cls: Optional[CLSConditionReport]
    stationary: Optional[StationaryConditionReport]

    @property
    def verified(self) -> bool:
        return self.gcondition is not None


def build_condition_report(forcing: Forcing, grid: PeriodicGrid) -> ConditionReport:
    cls_report = check_cls_condition(forcing) if forcing.dimension == 1 else None
    stationary = None
    if abs(forcing.mean) < 1e-10:
        stationary = check_stationary_condition(forcing, grid)
    return ConditionReport(
        stats=stats(forcing, grid),
        gcondition=check_gcondition(forcing, grid),
        classical=check_classical_conditions(forcing, grid),
        ls=check_ls_condition(forcing, grid),
        cls=cls_report,
        stationary=stationary,
    )
