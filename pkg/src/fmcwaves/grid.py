"""Uniform periodic grids on the unit torus and the discrete calculus on them.

The whole package works on node lattices over Q = (0,1)^n (n = 1 or 2) with
the same resolution N on every axis, node coordinates j/N, and periodic index
wrap-around.  Two conventions are load-bearing:

* gradients are one-sided forward differences and divergences are one-sided
  backward differences, so that ``<div v, f> = -<v, grad f>`` holds exactly
  (up to float roundoff).  The convex solver in :mod:`fmcwaves.variational`
  relies on this adjoint pair.
* a node value of "minus infinity" is represented by an explicit boolean
  sentinel mask, never by a magic float.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "PeriodicGrid",
    "ScalarField",
    "VectorField",
    "SupportMask",
    "make_grid",
    "constant_field",
    "gradient",
    "divergence",
    "integrate",
    "perimeter_indicator",
]


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform node lattice on the torus (0,1)^dimension, N nodes per axis."""

    dimension: int
    n: int

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError(
                f"unsupported dimension {self.dimension}; only 1 and 2 are supported"
            )
        if self.n < 4:
            raise ValueError(f"resolution must be >= 4 nodes per axis, got {self.n}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dimension

    @property
    def num_nodes(self) -> int:
        return self.n**self.dimension

    def axis(self) -> np.ndarray:
        """Node coordinates 0, h, 2h, ... along one axis."""
        return np.arange(self.n) / self.n

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Per-axis coordinate arrays of shape ``self.shape``."""
        return tuple(np.meshgrid(*([self.axis()] * self.dimension), indexing="ij"))


def make_grid(dimension: int, n: int) -> PeriodicGrid:
    return PeriodicGrid(dimension, n)


def _as_values(grid: PeriodicGrid, values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.shape != grid.shape:
        raise ValueError(f"values shape {arr.shape} does not match grid shape {grid.shape}")
    return arr


@dataclass
class ScalarField:
    """Node-indexed real values; ``sentinel[i] = True`` means the value is -inf.

    Fields are immutable after construction (arrays are marked read-only).
    Stored values at sentinel nodes are canonicalised to 0.0 and never read.
    """

    grid: PeriodicGrid
    values: np.ndarray
    sentinel: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        arr = _as_values(self.grid, self.values)
        if self.sentinel is not None:
            mask = np.array(self.sentinel, dtype=bool, copy=True)
            if mask.shape != self.grid.shape:
                raise ValueError("sentinel mask shape does not match grid shape")
            if not mask.any():
                mask = None
            else:
                arr = np.where(mask, 0.0, arr)
                mask.setflags(write=False)
            object.__setattr__(self, "sentinel", mask)
        if not np.isfinite(arr[~self.sentinel] if self.sentinel is not None else arr).all():
            raise ValueError("non-sentinel field values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def has_sentinel(self) -> bool:
        return self.sentinel is not None

    def finite_mask(self) -> np.ndarray:
        if self.sentinel is None:
            return np.ones(self.grid.shape, dtype=bool)
        return ~self.sentinel


def constant_field(grid: PeriodicGrid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


@dataclass
class VectorField:
    """One array per axis, all finite."""

    grid: PeriodicGrid
    components: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.components) != self.grid.dimension:
            raise ValueError(
                f"expected {self.grid.dimension} components, got {len(self.components)}"
            )
        comps = []
        for comp in self.components:
            arr = _as_values(self.grid, comp)
            if not np.isfinite(arr).all():
                raise ValueError("vector field components must be finite")
            arr.setflags(write=False)
            comps.append(arr)
        object.__setattr__(self, "components", tuple(comps))


@dataclass
class SupportMask:
    """Boolean per node; derived measure/perimeter are always recomputed."""

    grid: PeriodicGrid
    inside: np.ndarray

    def __post_init__(self) -> None:
        mask = np.array(self.inside, dtype=bool, copy=True)
        if mask.shape != self.grid.shape:
            raise ValueError("mask shape does not match grid shape")
        mask.setflags(write=False)
        object.__setattr__(self, "inside", mask)

    def measure(self) -> float:
        return float(np.count_nonzero(self.inside)) / self.grid.num_nodes


def gradient(f: ScalarField) -> VectorField:
    """Forward-difference gradient with periodic wrap.

    Component k at node i is ``(f(i + e_k) - f(i)) * N`` (h = 1/N).
    """
    if f.has_sentinel:
        raise ValueError("field not finite: gradient requires a sentinel-free field")
    n = f.grid.n
    comps = tuple(
        (np.roll(f.values, -1, axis=k) - f.values) * n for k in range(f.grid.dimension)
    )
    return VectorField(f.grid, comps)


def divergence(v: VectorField) -> ScalarField:
    """Backward-difference divergence, the exact negative adjoint of `gradient`."""
    n = v.grid.n
    out = np.zeros(v.grid.shape)
    for k, comp in enumerate(v.components):
        out += (comp - np.roll(comp, 1, axis=k)) * n
    return ScalarField(v.grid, out)


def integrate(f: ScalarField) -> float:
    """Midpoint quadrature h^n * sum(values); exact for constants on power-of-two N.

    Sentinel nodes are rejected here; integrands that weight nodes by
    exp(c*psi) go through the transformed variable instead, where a sentinel
    contributes exactly 0.
    """
    if f.has_sentinel:
        raise ValueError("cannot integrate a field with sentinel nodes")
    return float(f.values.sum()) / f.grid.num_nodes


def perimeter_indicator(mask: SupportMask) -> float:
    """Discrete periodic perimeter: h^(n-1) times the number of facet crossings."""
    inside = mask.inside
    crossings = 0
    for k in range(mask.grid.dimension):
        crossings += int(np.count_nonzero(inside != np.roll(inside, -1, axis=k)))
    return crossings * mask.grid.spacing ** (mask.grid.dimension - 1)
