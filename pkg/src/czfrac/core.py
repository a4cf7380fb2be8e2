"""Grids, sampled fields, coefficient kernels, and exponent parameters.

Everything downstream works with four small immutable objects:

* :class:`FracParams` -- the exponent triple ``(s, s1, s2)`` with
  ``s1 + s2 = 2 s``, plus the spatial dimension.
* :class:`GridSpec` -- a uniform isotropic grid covering ``[-L, L)^n``.
* :class:`Field` -- real samples of a function on such a grid.
* :class:`CoeffKernel` -- a bounded measurable symmetric weight ``K(x, y)``.

Grids are periodic for the spectral backend and are read as truncations of
free space by the quadrature backend; the consuming operation picks the
interpretation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "CzfracError",
    "ParameterError",
    "EngineError",
    "QuadratureError",
    "DivergenceError",
    "NonConvergenceError",
    "FracParams",
    "GridSpec",
    "Field",
    "CoeffKernel",
    "make_params",
    "builtin_kernels",
    "field_norms",
    "write_field",
    "read_field",
    "field_to_csv",
]


class CzfracError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(CzfracError, ValueError):
    """A parameter violates its documented bound."""


class EngineError(CzfracError, RuntimeError):
    """A numerical engine failed (quadrature, iteration, ...)."""


class QuadratureError(EngineError):
    """Quadrature did not stabilize; carries the two finest estimates."""

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = estimates


class DivergenceError(EngineError):
    """Fixed-point iteration is expanding instead of contracting."""


class NonConvergenceError(EngineError):
    """Iteration budget exhausted; carries the residual history."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class FracParams:
    """Exponent triple (s, s1, s2) with s1 + s2 = 2 s, all in (0, 1)."""

    n: int
    s: float
    s1: float
    s2: float

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ParameterError(f"dimension n must be a positive integer, got {self.n}")
        for name in ("s", "s1", "s2"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ParameterError(f"{name}={v} violates 0 < {name} < 1")
        if abs(self.s1 + self.s2 - 2.0 * self.s) > 1e-14:
            raise ParameterError(
                f"s1 + s2 = {self.s1 + self.s2} must equal 2*s = {2 * self.s}"
            )

    def swapped(self) -> "FracParams":
        """Same orders with the roles of s1 and s2 interchanged."""
        return FracParams(self.n, self.s, self.s2, self.s1)


def make_params(n: int, s: float, s1: float) -> FracParams:
    """Build FracParams, deriving s2 = 2 s - s1.

    Raises ParameterError naming the violated bound when any of s, s1 or the
    derived s2 leaves (0, 1).
    """
    if not (0.0 < s < 1.0):
        raise ParameterError(f"s={s} violates 0 < s < 1")
    if not (0.0 < s1 < 1.0):
        raise ParameterError(f"s1={s1} violates 0 < s1 < 1")
    s2 = 2.0 * s - s1
    if not (0.0 < s2 < 1.0):
        raise ParameterError(f"s2 = 2*s - s1 = {s2} violates 0 < s2 < 1")
    return FracParams(int(n), float(s), float(s1), float(s2))


# ---------------------------------------------------------------------------
# grids and fields


@dataclass(frozen=True)
class GridSpec:
    """Uniform isotropic grid with N samples per axis on [-extent, extent)^n.

    N must be a power of two so the fast-transform backend never pads.
    """

    n: int
    extent: float
    points: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"dimension n must be >= 1, got {self.n}")
        if self.extent <= 0.0:
            raise ParameterError(f"extent must be positive, got {self.extent}")
        N = self.points
        if N < 2 or (N & (N - 1)) != 0:
            raise ParameterError(f"points must be a power of two >= 2, got {N}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.n

    def axis_coords(self) -> np.ndarray:
        """Sample coordinates along one axis (identical for all axes)."""
        return -self.extent + self.spacing * np.arange(self.points)

    def coords(self) -> np.ndarray:
        """All node coordinates, shape (points**n, n), row-major."""
        ax = self.axis_coords()
        mesh = np.meshgrid(*([ax] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class Field:
    """Real scalar samples on a GridSpec, stored row-major."""

    grid: GridSpec
    values: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.grid.points**self.grid.n:
            raise ParameterError(
                f"field has {vals.size} samples, grid wants {self.grid.points ** self.grid.n}"
            )
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ParameterError("field contains non-finite samples")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values, self.label)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def mean_zero(self) -> "Field":
        return self.with_values(self.values - self.mean())


def field_norms(f: Field, p: float) -> float:
    """Riemann-sum L^p norm of a field; max norm for p = inf."""
    if p != np.inf and p < 1.0:
        raise ParameterError(f"p={p} violates p >= 1")
    a = np.abs(f.values)
    if p == np.inf:
        return float(a.max())
    w = f.grid.spacing**f.grid.n
    return float((w * np.sum(a**p)) ** (1.0 / p))


# ---------------------------------------------------------------------------
# coefficient kernels


@dataclass(frozen=True)
class CoeffKernel:
    """Bounded measurable weight K(x, y) with declared bounds.

    ``eval`` takes two point arrays of shape (..., n) and returns values of
    the same leading shape.  ``lower``/``upper`` are declared (not sampled)
    bounds; solvers trust them.
    """

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lower: float
    upper: float
    symmetric: bool = True
    name: str = "custom"

    def __post_init__(self):
        if self.lower < 0.0:
            raise ParameterError(f"lower bound must be >= 0, got {self.lower}")
        if self.upper <= 0.0 or self.upper < self.lower:
            raise ParameterError(
                f"bounds ({self.lower}, {self.upper}) violate 0 <= lower <= upper, upper > 0"
            )

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.eval(np.asarray(x, float), np.asarray(y, float))

    def scaled(self, c: float) -> "CoeffKernel":
        base = self.eval
        return CoeffKernel(
            eval=lambda x, y: c * base(x, y),
            lower=c * self.lower,
            upper=c * self.upper,
            symmetric=self.symmetric,
            name=f"{c}*{self.name}",
        )


def _cell_parity(pts: np.ndarray) -> np.ndarray:
    # product over axes of (-1)^floor(coordinate)
    fl = np.floor(pts).astype(np.int64)
    return np.where(np.sum(fl, axis=-1) % 2 == 0, 1.0, -1.0)


def _mix64(v: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; deterministic across platforms
    v = (v + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    v = ((v ^ (v >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    v = ((v ^ (v >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    return v ^ (v >> np.uint64(31))


def builtin_kernels(name: str, *args) -> CoeffKernel:
    """Construct one of the named coefficient kernels.

    constant(c)                  K == c
    smooth_perturbation(eps)     1 + eps*cos(x_1)*cos(y_1), bounds 1 -+ eps
    checkerboard(lam, Lam)       lam or Lam by the product of unit-cell
                                 parities of x and y; discontinuous
    random_bounded(lam, Lam, seed)
                                 per unordered unit-cell pair, a hash-derived
                                 uniform value in [lam, Lam]
    """
    if name == "constant":
        (c,) = args
        c = float(c)
        if c <= 0:
            raise ParameterError(f"constant kernel needs c > 0, got {c}")
        return CoeffKernel(
            eval=lambda x, y: np.full(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), c),
            lower=c,
            upper=c,
            symmetric=True,
            name=f"constant:{c}",
        )
    if name == "smooth_perturbation":
        (eps,) = args
        eps = float(eps)
        if not (0.0 <= eps < 1.0):
            raise ParameterError(f"smooth_perturbation needs 0 <= eps < 1, got {eps}")

        def _smooth(x, y):
            return 1.0 + eps * np.cos(x[..., 0]) * np.cos(y[..., 0])

        return CoeffKernel(
            eval=_smooth,
            lower=1.0 - eps,
            upper=1.0 + eps,
            symmetric=True,
            name=f"smooth_perturbation:{eps}",
        )
    if name == "checkerboard":
        lam, Lam = float(args[0]), float(args[1])
        cell = float(args[2]) if len(args) > 2 else 1.0
        if lam > Lam:
            raise ParameterError(f"checkerboard needs lam <= Lam, got ({lam}, {Lam})")
        if cell <= 0:
            raise ParameterError(f"checkerboard cell size must be positive, got {cell}")

        def _checker(x, y):
            same = _cell_parity(x / cell) * _cell_parity(y / cell) > 0
            return np.where(same, lam, Lam)

        name_ = f"checkerboard:{lam},{Lam}" + (f",{cell}" if cell != 1.0 else "")
        return CoeffKernel(eval=_checker, lower=lam, upper=Lam, symmetric=True, name=name_)
    if name == "random_bounded":
        lam, Lam, seed = float(args[0]), float(args[1]), int(args[2])
        if lam > Lam:
            raise ParameterError(f"random_bounded needs lam <= Lam, got ({lam}, {Lam})")

        def _rand(x, y):
            cx = np.floor(x).astype(np.int64).view(np.uint64)
            cy = np.floor(y).astype(np.int64).view(np.uint64)
            hx = np.full(x.shape[:-1], np.uint64(seed))
            hy = np.full(y.shape[:-1], np.uint64(seed))
            for a in range(x.shape[-1]):
                hx = _mix64(hx ^ cx[..., a])
                hy = _mix64(hy ^ cy[..., a])
            # unordered combination keeps K symmetric
            h = _mix64(np.minimum(hx, hy)) ^ _mix64(np.maximum(hx, hy) + np.uint64(1))
            u = (h >> np.uint64(11)).astype(float) / float(1 << 53)
            return lam + (Lam - lam) * u

        return CoeffKernel(
            eval=_rand,
            lower=lam,
            upper=Lam,
            symmetric=True,
            name=f"random_bounded:{lam},{Lam},{seed}",
        )
    raise ParameterError(f"unknown kernel name {name!r}")


def parse_kernel_spec(spec: str) -> CoeffKernel:
    """Parse 'name:arg1,arg2,...' kernel descriptions used by the CLI."""
    name, _, rest = spec.partition(":")
    aliases = {"smooth": "smooth_perturbation", "random": "random_bounded"}
    name = aliases.get(name, name)
    args = [a for a in rest.split(",") if a] if rest else []
    return builtin_kernels(name, *args)


# ---------------------------------------------------------------------------
# serialization: one JSON header line, then raw little-endian float64 payload


def write_field(f: Field, path: str) -> None:
    header = {
        "n": f.grid.n,
        "extent": f.grid.extent,
        "points": f.grid.points,
        "label": f.label,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field(path: str) -> Field:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    grid = GridSpec(n=int(header["n"]), extent=float(header["extent"]), points=int(header["points"]))
    vals = np.frombuffer(payload, dtype="<f8")
    return Field(grid, vals, header.get("label"))


def field_to_csv(f: Field, path: str) -> None:
    """Index coordinates plus value, one grid node per row."""
    coords = f.grid.coords()
    vals = f.values.ravel()
    with open(path, "w", newline="") as fh:
        cols = [f"x{a}" for a in range(f.grid.n)]
        fh.write(",".join(["index"] + cols + ["value"]) + "\n")
        for i in range(vals.size):
            pt = ",".join(repr(float(c)) for c in coords[i])
            fh.write(f"{i},{pt},{vals[i]!r}\n")
