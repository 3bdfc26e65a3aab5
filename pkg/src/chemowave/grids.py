"""Uniform 1-D grids and sampled fields with constant-extension tails."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on [x_min, x_max] with n points."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 points")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @classmethod
    def from_h(cls, x_min: float, x_max: float, h: float) -> "Grid":
        n = int(round((x_max - x_min) / h)) + 1
        return cls(x_min, x_max, n)


@dataclass
class Field:
    """Real samples on a grid, with constant values assumed beyond the ends.

    The tails matter for the nonlocal chemical solve: wave profiles approach
    constants at infinity, and extending by those constants makes the
    truncation error exact-to-model instead of an O(exp) cutoff artifact.
    """

    grid: Grid
    values: np.ndarray
    left_tail: float = 0.0
    right_tail: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError("values length does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    @classmethod
    def from_callable(cls, grid: Grid, fn, left_tail=None, right_tail=None):
        vals = np.asarray(fn(grid.x), dtype=float)
        lt = float(vals[0]) if left_tail is None else float(left_tail)
        rt = float(vals[-1]) if right_tail is None else float(right_tail)
        return cls(grid, vals, lt, rt)

    @classmethod
    def constant(cls, grid: Grid, value: float):
        return cls(grid, np.full(grid.n, float(value)), value, value)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.left_tail,
                     self.right_tail)


def require_same_grid(*fields: Field) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("fields are on different grids")
    return g


def to_csv(path, grid: Grid, columns: dict) -> None:
    """Write (x, *columns) as CSV with a header row."""
    names = list(columns)
    data = np.column_stack([grid.x] + [np.asarray(columns[k]) for k in names])
    header = ",".join(["x"] + names)
    np.savetxt(path, data, delimiter=",", header=header, comments="")
