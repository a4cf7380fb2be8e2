"""Nonlocal operator, bilinear energy, composite operator, and the series solver.

The bilinear energy of two fields on the periodic box is

    E(u, phi) = II K(x,y) (u(x)-u(y)) (phi(x)-phi(y)) / |x-y|^(n+2s) dx dy

with the kernel periodized by image summation, and the strong operator

    (L u)(x) = 2 I K(x,y) (u(x)-u(y)) / |x-y|^(n+2s) dy

satisfies <L u, phi> = E(u, phi) up to quadrature error.  The composite
operator is T = (1/2) I^{s2} o L o I^{s1}; with constant K == 1 it reduces
to 1/c(n, 2s) times the identity on mean-zero fields (the multiplier orders
cancel because s1 + s2 = 2 s), which calibrates everything downstream.

Solver: for K with small relative oscillation, write K = sup K (1 + Kt)
with Kt = K/sup K - 1, move the constant part to the left and invert it,
and run the resulting fixed point

    v  <-  rhs - c * T_Kt v,     rhs = c/(2 sup K) * I^{s2} g,

whose limit is v = (s1-order derivative of u); u = I^{s1} v up to a
constant.  The iteration contracts when the oscillation is small enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import zeta

from .core import (
    CoeffKernel,
    DivergenceError,
    Field,
    FracParams,
    GridSpec,
    NonConvergenceError,
    ParameterError,
)
from .spectral import (
    apply_multiplier,
    frac_laplacian,
    pv_constant,
    riesz_potential,
    spectral_laplacian,
    upsample,
)

__all__ = [
    "SolveReport",
    "calibration_constant",
    "apply_LK",
    "bilinear_form",
    "apply_T_composite",
    "apply_T_kernel",
    "neumann_solve",
]

_WINDOW = 3  # near-diagonal cells re-integrated on the fine grid
_REFINE = 9  # odd fine-grid factor for the window
_ROW_CHUNK = 2048  # fixed; part of the deterministic summation contract


def _coarse_weights(rows, pts, L, h, N, n, expo, window):
    """Periodized kernel against all nodes for a block of output nodes,
    zeroed inside the near-diagonal window box."""
    diff = rows[:, None, :] - pts[None, :, :]
    wrapped = (diff + L) % (2.0 * L) - L
    steps = np.abs(np.rint(wrapped / h))
    steps = np.minimum(steps, N - steps)
    outside = np.any(steps > window, axis=-1)
    W = np.zeros(diff.shape[:2])
    if n == 1:
        W[outside] = _periodized_kernel_1d(wrapped[..., 0][outside], L, expo)
    else:
        W[outside] = _periodized_kernel_2d(
            wrapped[..., 0][outside], wrapped[..., 1][outside], L, expo
        )
    return W


def calibration_constant(params: FracParams) -> float:
    """c(n, 2s): with K == 1 the composite operator is 1/c times the identity."""
    return pv_constant(params.n, 2.0 * params.s)


def _periodized_kernel_1d(d: np.ndarray, L: float, expo: float) -> np.ndarray:
    q = np.abs(d) / (2.0 * L)
    return (2.0 * L) ** (-expo) * (zeta(expo, q) + zeta(expo, 1.0 - q))


def _periodized_kernel_2d(dx, dy, L: float, expo: float, images: int = 24) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(dx.shape, dy.shape))
    for m0 in range(-images, images + 1):
        for m1 in range(-images, images + 1):
            out += ((dx + 2 * L * m0) ** 2 + (dy + 2 * L * m1) ** 2) ** (-expo / 2.0)
    # integral estimate of the omitted image lattice
    out += (2.0 * L) ** (-expo) * 2.0 * np.pi * (images - 0.5) ** (2.0 - expo) / (expo - 2.0)
    return out


def _fine_offsets(n: int, window: int, refine: int):
    kmax = ((2 * window + 1) * refine - 1) // 2
    rng = np.arange(-kmax, kmax + 1)
    if n == 1:
        offs = rng[rng != 0][:, None]
    else:
        a, b = np.meshgrid(rng, rng, indexing="ij")
        offs = np.stack([a.ravel(), b.ravel()], axis=-1)
        offs = offs[np.any(offs != 0, axis=1)]
    return offs


def _diag_cell_term(params_n: int, two_s: float, hf: float) -> float:
    # int over the fine cell of |d|^2 |d|^(-n-2s) dd, divided by 2n
    if params_n == 1:
        return (hf / 2.0) ** (2.0 - two_s) / (2.0 - two_s)
    m = 400
    u = (np.arange(m) + 0.5) / m - 0.5
    U, V = np.meshgrid(u, u, indexing="ij")
    base = np.sum((U**2 + V**2) ** (-two_s / 2.0)) / m**2
    return float(base * hf ** (2.0 - two_s) / (2.0 * params_n))


def apply_LK(
    K: CoeffKernel,
    params: FracParams,
    u: Field,
    window: int = _WINDOW,
    refine: int = _REFINE,
) -> Field:
    """Strong nonlocal operator on the periodic grid.

    Requires symmetric K.  The grid sum uses the image-periodized power
    kernel; cells within ``window`` spacings of the diagonal are
    re-integrated on a ``refine``-times finer grid through trigonometric
    interpolation of u, and the singular cell enters through its symmetric
    curvature term.
    """
    if not K.symmetric:
        raise ParameterError("the strong form needs a symmetric coefficient kernel")
    if refine % 2 == 0:
        raise ParameterError("refine must be odd")
    grid = u.grid
    if grid.n != params.n:
        raise ParameterError(f"grid dimension {grid.n} != params dimension {params.n}")
    n, N, h, L = grid.n, grid.points, grid.spacing, grid.extent
    two_s = 2.0 * params.s
    expo = n + two_s
    vals = u.values.ravel()
    pts = grid.coords()

    # coarse lattice sum, window box excluded; fixed chunking bounds memory
    # without touching the per-row summation order
    out = np.empty(N**n)
    for lo_r in range(0, N**n, _ROW_CHUNK):
        hi_r = min(N**n, lo_r + _ROW_CHUNK)
        W = _coarse_weights(pts[lo_r:hi_r], pts, L, h, N, n, expo, window)
        M = K(pts[lo_r:hi_r, None, :], pts[None, :, :]) * W
        out[lo_r:hi_r] = vals[lo_r:hi_r] * M.sum(axis=1) - (M * vals[None, :]).sum(axis=1)
    out *= h**n

    # fine window
    m = refine
    hf = h / m
    ufine = upsample(u.values, m).ravel()
    Nf = N * m
    idx_axes = np.arange(N) * m
    offs = _fine_offsets(n, window, refine)
    base_idx = (
        idx_axes
        if n == 1
        else (idx_axes[:, None] * Nf + idx_axes[None, :]).ravel()
    )
    fine = np.zeros(N**n)
    for off in offs:
        d = off * hf
        if n == 1:
            Wf = _periodized_kernel_1d(np.array([d[0]]), L, expo)[0]
            tgt = (idx_axes + off[0]) % Nf
        else:
            Wf = _periodized_kernel_2d(np.array([d[0]]), np.array([d[1]]), L, expo)[0]
            i0 = (idx_axes[:, None] + off[0]) % Nf
            i1 = (idx_axes[None, :] + off[1]) % Nf
            tgt = (i0 * Nf + i1).ravel()
        Kv = K(pts, pts + d[None, :])
        fine += Kv * (vals - ufine[tgt]) * Wf * hf**n

    # symmetric singular-cell curvature term
    lap = spectral_laplacian(u).values.ravel()
    Kdiag = K(pts, pts)
    diag = -Kdiag * lap * _diag_cell_term(n, two_s, hf)

    return Field(grid, 2.0 * (out + fine + diag), u.label)


def bilinear_form(
    K: CoeffKernel,
    params: FracParams,
    u: Field,
    phi: Field,
    window: int = _WINDOW,
    refine: int = _REFINE,
) -> float:
    """Energy E(u, phi); an independent quadrature of the double integral
    (not routed through apply_LK, so duality can be cross-checked)."""
    grid = u.grid
    if phi.grid != grid:
        raise ParameterError("u and phi must share one grid")
    if grid.n != params.n:
        raise ParameterError(f"grid dimension {grid.n} != params dimension {params.n}")
    n, N, h, L = grid.n, grid.points, grid.spacing, grid.extent
    two_s = 2.0 * params.s
    expo = n + two_s
    uv = u.values.ravel()
    pv = phi.values.ravel()
    pts = grid.coords()

    parts = []
    for lo_r in range(0, N**n, _ROW_CHUNK):
        hi_r = min(N**n, lo_r + _ROW_CHUNK)
        W = _coarse_weights(pts[lo_r:hi_r], pts, L, h, N, n, expo, window)
        Kblk = K(pts[lo_r:hi_r, None, :], pts[None, :, :])
        du = uv[lo_r:hi_r, None] - uv[None, :]
        dp = pv[lo_r:hi_r, None] - pv[None, :]
        parts.append(float(np.sum(Kblk * W * du * dp)))
    coarse = math.fsum(parts) * h ** (2 * n)

    m = refine
    hf = h / m
    ufine = upsample(u.values, m).ravel()
    pfine = upsample(phi.values, m).ravel()
    Nf = N * m
    idx_axes = np.arange(N) * m
    offs = _fine_offsets(n, window, refine)
    fine = 0.0
    for off in offs:
        d = off * hf
        if n == 1:
            Wf = _periodized_kernel_1d(np.array([d[0]]), L, expo)[0]
            tgt = (idx_axes + off[0]) % Nf
        else:
            Wf = _periodized_kernel_2d(np.array([d[0]]), np.array([d[1]]), L, expo)[0]
            i0 = (idx_axes[:, None] + off[0]) % Nf
            i1 = (idx_axes[None, :] + off[1]) % Nf
            tgt = (i0 * Nf + i1).ravel()
        Kv = K(pts, pts + d[None, :])
        fine += float(np.sum(Kv * (uv - ufine[tgt]) * (pv - pfine[tgt]) * Wf)) * hf**n * h**n

    # singular cell: gradients pair through the symmetric second moment,
    # (grad u . d)(grad phi . d) integrating to (grad u . grad phi)/n * int |d|^2 W
    gu = _gradient_fields(u)
    gp = _gradient_fields(phi)
    gdot = sum((a * b).ravel() for a, b in zip(gu, gp))
    Kdiag = K(pts, pts)
    diag = float(np.sum(Kdiag * gdot)) * 2.0 * _diag_cell_term(n, two_s, hf) * h**n
    return coarse + fine + diag


def _gradient_fields(f: Field):
    grid = f.grid
    fh = np.fft.rfftn(f.values)
    from .spectral import _freq_axes

    axes = _freq_axes(grid)
    mesh = np.meshgrid(*axes, indexing="ij")
    outs = []
    for a in range(grid.n):
        outs.append(np.fft.irfftn(fh * (1j * mesh[a]), s=grid.shape))
    return outs


def apply_T_composite(K: CoeffKernel, params: FracParams, f: Field, **lk_kwargs) -> Field:
    """T f = (1/2) I^{s2} L_K I^{s1} f on the mean-zero part of f."""
    f0 = f.mean_zero()
    v = apply_multiplier(riesz_potential(params.s1), f0)
    w = apply_LK(K, params, v, **lk_kwargs)
    out = apply_multiplier(riesz_potential(params.s2), w)
    return Field(f.grid, 0.5 * out.values, f.label)


def apply_T_kernel(
    K: CoeffKernel,
    params: FracParams,
    f: Field,
    cfg,
    out_points: Optional[np.ndarray] = None,
    max_out_points: int = 64,
    support_cut: float = 1e-13,
):
    """T f by direct quadrature of the kernel representation.

    Every output point costs one kernel evaluation per support node of f,
    each itself a full singular quadrature, so the point set is guarded by
    ``max_out_points``.  Output points must stay away from the support of f:
    on the support the kernel representation misses the identity-type
    diagonal mass and does not reproduce the operator.

    Returns ``(values, error_bars)`` arrays aligned with ``out_points``.
    """
    from .czkernel import eval_A

    grid = f.grid
    if out_points is None:
        out_points = grid.coords()
    out_points = np.atleast_2d(np.asarray(out_points, float))
    if len(out_points) > max_out_points:
        raise ParameterError(
            f"{len(out_points)} output points exceed the guard {max_out_points}"
        )
    h = grid.spacing
    coords = grid.coords()
    vals = f.values.ravel()
    cut = support_cut * np.max(np.abs(vals))
    supp = np.abs(vals) > cut
    ys = coords[supp]
    fy = vals[supp]
    out = np.zeros(len(out_points))
    bars = np.zeros(len(out_points))
    for i, z1 in enumerate(out_points):
        acc = 0.0
        bar = 0.0
        even = 0.0
        for j, (y, fv) in enumerate(zip(ys, fy)):
            a, err = eval_A(K, params, z1, y, cfg)
            acc += a * fv * h**grid.n
            bar += abs(fv) * err * h**grid.n
            if j % 2 == 0:
                even += a * fv * (2.0 * h) ** grid.n
        # Richardson-style check of the outer z2 rule
        bar += abs(acc - even)
        out[i] = acc
        bars[i] = bar
    return out, bars


@dataclass
class SolveReport:
    """Outcome of the fixed-point solve."""

    iterations: int
    residual_history: List[float]
    contraction_est: float
    solution: Field  # the s1-order derivative of u, mean-zero
    u: Field  # I^{s1} of the solution; defined up to a constant
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class _ShiftedKernel:
    """K/sup K - 1; not a CoeffKernel because its lower bound is negative."""

    base: CoeffKernel

    @property
    def symmetric(self) -> bool:
        return self.base.symmetric

    def __call__(self, x, y):
        return self.base(x, y) / self.base.upper - 1.0


def neumann_solve(
    K: CoeffKernel,
    params: FracParams,
    g: Field,
    tol: float = 1e-8,
    max_iter: int = 64,
    window: int = _WINDOW,
    refine: int = _REFINE,
) -> SolveReport:
    """Solve L_K u = g by the perturbation series around constant coefficients.

    g must be mean-zero (right sides of the strong operator always are).
    Raises DivergenceError when the measured contraction reaches 1 and
    NonConvergenceError when the iteration budget runs out.
    """
    grid = g.grid
    gv = g.values
    gnorm = float(np.linalg.norm(gv.ravel()))
    # the Riesz potential kills the mean, so only gross violations matter
    if gnorm > 0 and abs(np.mean(gv)) * np.sqrt(gv.size) > 1e-3 * gnorm:
        raise ParameterError("right side must be mean-zero")
    c = calibration_constant(params)
    sup = K.upper
    kt = _ShiftedKernel(K)
    rhs = apply_multiplier(riesz_potential(params.s2), g.mean_zero())
    rhs = Field(grid, (c / (2.0 * sup)) * rhs.values, g.label)
    rhs_norm = _l2(rhs)

    v = rhs
    history: List[float] = []
    ratios: List[float] = []
    for it in range(1, max_iter + 1):
        tv = apply_T_composite(kt, params, v, window=window, refine=refine)
        v_next = Field(grid, rhs.values - c * tv.values)
        res = _l2(Field(grid, v_next.values - v.values))
        history.append(res)
        if len(history) >= 2 and history[-2] > 0:
            ratios.append(history[-1] / history[-2])
        contraction = max(ratios) if ratios else 0.0
        if it >= 5 and contraction >= 1.0:
            raise DivergenceError(
                f"fixed point expanding (contraction estimate {contraction:.3f}); "
                "the coefficient oscillation is too large"
            )
        v = v_next
        if res <= tol * max(rhs_norm, 1e-300):
            u = apply_multiplier(riesz_potential(params.s1), v)
            return SolveReport(
                iterations=it,
                residual_history=history,
                contraction_est=contraction,
                solution=v,
                u=u,
                metadata={
                    "calibration_constant": c,
                    "sup_K": sup,
                    "inf_K": K.lower,
                    "tol": tol,
                },
            )
    raise NonConvergenceError(
        f"no convergence within {max_iter} iterations", residual_history=history
    )


def _l2(f: Field) -> float:
    return float(np.sqrt(f.grid.spacing**f.grid.n * np.sum(f.values**2)))
