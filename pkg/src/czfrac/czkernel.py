"""Evaluation of the pair-difference kernel A, its majorants, and their integrals.

For a coefficient kernel K and orders (s, s1, s2) with s1 + s2 = 2 s, the
kernel evaluated here is

    A(z1, z2) = II K(x,y) D1(x,y) D2(x,y) / |x-y|^(n+2s) dx dy,
    Di(x,y)   = |x - zi|^(si - n) - |y - zi|^(si - n),

an absolutely convergent improper integral for z1 != z2.  The companion
majorants kappa_1, kappa_2 replace the products by absolute values with
shifted exponents, and M_l integrates K * kappa_l; their decay in the
separation delta = |z1 - z2| is what the verification harness fits.

All quadrature goes through :func:`czfrac.singquad.integrate_singular` with
the four singular lines {x = z1}, {x = z2}, {y = z1}, {y = z2} graded by the
axis meshes and the diagonal handled by pair subdivision.  Values estimate
the integral over the truncated (ring-extended) box; the reported error is
the engine's refinement difference plus an analytic bound on the omitted
tail, which decays like the outer radius to the power -n.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CoeffKernel, FracParams, ParameterError
from .singquad import QuadConfig, integrate_singular, region_masks, stable_power_diff

__all__ = [
    "EstimateConfig",
    "eval_A",
    "eval_A_diff",
    "eval_kappa",
    "eval_M",
    "region_contribution",
    "tail_bound",
]


@dataclass(frozen=True)
class EstimateConfig:
    """Window (theta, alpha, sigma) for the majorant estimates.

    Constraints, checked against the orders at construction:
        theta in (0, 1/10) with 10*theta < s, s1, s2 < 1 - 10*theta
        alpha in [0, theta/10)
        sigma in (s1 + theta, 2*s)
    """

    theta: float
    alpha: float
    sigma: float
    params: FracParams

    def __post_init__(self):
        p = self.params
        if not (0.0 < self.theta < 0.1):
            raise ParameterError(f"theta={self.theta} outside (0, 1/10)")
        for name, v in (("s", p.s), ("s1", p.s1), ("s2", p.s2)):
            if not (10.0 * self.theta < v < 1.0 - 10.0 * self.theta):
                raise ParameterError(
                    f"10*theta < {name} < 1 - 10*theta fails: theta={self.theta}, {name}={v}"
                )
        if not (0.0 <= self.alpha < self.theta / 10.0):
            raise ParameterError(f"alpha={self.alpha} outside [0, theta/10)")
        if not (p.s1 + self.theta < self.sigma < 2.0 * p.s):
            raise ParameterError(
                f"sigma={self.sigma} outside (s1 + theta, 2s) = ({p.s1 + self.theta}, {2 * p.s})"
            )

    @staticmethod
    def widest(params: FracParams, shrink: float = 0.98) -> "EstimateConfig":
        """Near-maximal theta for the given orders, alpha and sigma at their
        window midpoints.  This is the default the verification sweeps use."""
        room = min(
            params.s, params.s1, params.s2, 1.0 - params.s, 1.0 - params.s1, 1.0 - params.s2
        )
        theta = min(shrink * room / 10.0, 0.099)
        alpha = theta / 20.0
        sigma = 0.5 * ((params.s1 + theta) + 2.0 * params.s)
        return EstimateConfig(theta=theta, alpha=alpha, sigma=sigma, params=params)


def _as_point(z, n: int) -> np.ndarray:
    z = np.asarray(z, float).ravel()
    if z.size != n:
        raise ParameterError(f"point has {z.size} coordinates, expected {n}")
    return z


def _check_geometry(params: FracParams, z1, z2, cfg: QuadConfig):
    z1 = _as_point(z1, params.n)
    z2 = _as_point(z2, params.n)
    if np.array_equal(z1, z2):
        raise ParameterError("z1 and z2 must differ")
    zmax = max(np.max(np.abs(z1)), np.max(np.abs(z2)))
    if cfg.trunc_radius < 4.0 * zmax:
        raise ParameterError(
            f"trunc_radius {cfg.trunc_radius} must cover 4*max(|z1|,|z2|) = {4 * zmax}"
        )
    return z1, z2


def _pair_diffs(x, y, z1, z2, params: FracParams):
    d1 = stable_power_diff(x - z1, y - z1, params.s1 - params.n)
    d2 = stable_power_diff(x - z2, y - z2, params.s2 - params.n)
    return d1, d2


def eval_A(K: CoeffKernel, params: FracParams, z1, z2, cfg: Optional[QuadConfig] = None):
    """Kernel value A(z1, z2) with an error estimate.

    Returns ``(value, err)`` where ``err`` adds the quadrature refinement
    difference and :func:`tail_bound` for the mass outside the truncated
    domain.
    """
    cfg = cfg or QuadConfig()
    z1, z2 = _check_geometry(params, z1, z2, cfg)
    n, s = params.n, params.s

    def integrand(x, y):
        d1, d2 = _pair_diffs(x, y, z1, z2, params)
        r = np.sqrt(np.sum((x - y) ** 2, axis=-1))
        return K(x, y) * d1 * d2 * r ** -(n + 2.0 * s)

    box = [(-cfg.trunc_radius, cfg.trunc_radius)] * n
    val, est = integrate_singular(integrand, box, [z1, z2], True, cfg)
    return val, est + tail_bound(params, z1, z2, cfg.outer_radius, K.upper)


def eval_A_diff(K: CoeffKernel, params: FracParams, z1, z1_shifted, z2, cfg=None):
    """A(z1_shifted, z2) - A(z1, z2) as a single quadrature.

    Differencing inside the integrand on one shared mesh keeps the
    correlated quadrature bias out of the small difference; separate calls
    to :func:`eval_A` would bury it in noise for small shifts.
    """
    cfg = cfg or QuadConfig()
    z1, z2 = _check_geometry(params, z1, z2, cfg)
    z1s = _as_point(z1_shifted, params.n)
    if np.array_equal(z1s, z2):
        raise ParameterError("shifted z1 collides with z2")
    n, s = params.n, params.s

    def integrand(x, y):
        d1s = stable_power_diff(x - z1s, y - z1s, params.s1 - n)
        d1 = stable_power_diff(x - z1, y - z1, params.s1 - n)
        d2 = stable_power_diff(x - z2, y - z2, params.s2 - n)
        r = np.sqrt(np.sum((x - y) ** 2, axis=-1))
        return K(x, y) * (d1s - d1) * d2 * r ** -(n + 2.0 * s)

    box = [(-cfg.trunc_radius, cfg.trunc_radius)] * n
    val, est = integrate_singular(integrand, box, [z1, z1s, z2], True, cfg)
    tb = tail_bound(params, z1, z2, cfg.outer_radius, K.upper)
    tbs = tail_bound(params, z1s, z2, cfg.outer_radius, K.upper)
    return val, est + tb + tbs


def eval_kappa(l: int, params: FracParams, est: EstimateConfig, x, y, z1, z2):
    """Pointwise majorant kappa_1 or kappa_2.

    kappa_1 = | |x-z1|^(s1-a-n) - |y-z1|^(s1-a-n) | *
              | |x-z2|^(s2-n)   - |y-z2|^(s2-n)   | / |x-y|^(n+2s)

    kappa_2 = min(|x-z1|, |y-z1|)^(s1-a-sg-n) *
              | |x-z2|^(s2-n)   - |y-z2|^(s2-n)   | / |x-y|^(n+2s-sg)

    with a = est.alpha, sg = est.sigma.  Accepts single points or batches.
    """
    if l not in (1, 2):
        raise ParameterError(f"majorant index l must be 1 or 2, got {l}")
    n, s, s1, s2 = params.n, params.s, params.s1, params.s2
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    z1 = _as_point(z1, n)
    z2 = _as_point(z2, n)
    r = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    r1x = np.sqrt(np.sum((x - z1) ** 2, axis=-1))
    r1y = np.sqrt(np.sum((y - z1) ** 2, axis=-1))
    if np.any(r == 0.0) or np.any(r1x == 0.0) or np.any(r1y == 0.0):
        raise ParameterError("kappa is undefined on its singular sets")
    d2 = np.abs(stable_power_diff(x - z2, y - z2, s2 - n))
    if l == 1:
        d1 = np.abs(stable_power_diff(x - z1, y - z1, s1 - est.alpha - n))
        out = d1 * d2 * r ** -(n + 2.0 * s)
    else:
        # min of the power values; the exponent is negative, so this is the
        # power of the larger radius and the factor stays integrable
        expo = s1 - est.alpha - est.sigma - n
        mn = np.minimum(r1x**expo, r1y**expo)
        out = mn * d2 * r ** -(n + 2.0 * s - est.sigma)
    return float(out[0]) if out.size == 1 else out


def eval_M(
    l: int,
    K: CoeffKernel,
    params: FracParams,
    est: EstimateConfig,
    z1,
    z2,
    cfg: Optional[QuadConfig] = None,
):
    """Majorant integral M_l(z1, z2) = II K * kappa_l over the truncated box."""
    cfg = cfg or QuadConfig()
    z1, z2 = _check_geometry(params, z1, z2, cfg)

    def integrand(x, y):
        return K(x, y) * eval_kappa(l, params, est, x, y, z1, z2)

    box = [(-cfg.trunc_radius, cfg.trunc_radius)] * params.n
    val, quad_err = integrate_singular(integrand, box, [z1, z2], True, cfg)
    return val, quad_err


def region_contribution(
    i: int,
    j: int,
    k: int,
    l: int,
    K: CoeffKernel,
    params: FracParams,
    est: EstimateConfig,
    z1,
    z2,
    cfg: Optional[QuadConfig] = None,
):
    """Diagnostic: II K * kappa_l restricted to A_i n B_j n I_k.

    The covers overlap, so summing over all (i, j, k) over-counts eval_M.
    """
    for name, v in (("i", i), ("j", j), ("k", k)):
        if v not in (1, 2, 3):
            raise ParameterError(f"region index {name} must be in {{1,2,3}}, got {v}")
    cfg = cfg or QuadConfig()
    z1, z2 = _check_geometry(params, z1, z2, cfg)

    def integrand(x, y):
        masks = region_masks(x, y, z1, z2)
        ind = masks[f"a{i}"] & masks[f"b{j}"] & masks[f"i{k}"]
        vals = K(x, y) * eval_kappa(l, params, est, x, y, z1, z2)
        return np.where(ind, vals, 0.0)

    box = [(-cfg.trunc_radius, cfg.trunc_radius)] * params.n
    val, _ = integrate_singular(integrand, box, [z1, z2], True, cfg)
    return val


def tail_bound(params: FracParams, z1, z2, R: float, Ksup: float) -> float:
    """Upper bound on the kernel-integral mass outside [-R, R]^(2n).

    Valid when R >= 4 * max(|z1|, |z2|, |z1 - z2|).  Built from the
    fundamental-theorem estimate on the near-diagonal part (the integrand
    envelope decays like |x|^(-2n) at joint infinity) plus direct splits of
    the far products; the delta-dependent piece enters through the factor
    delta^(2s - n) of the mass concentrated near the base points.
    """
    n, s, s1, s2 = params.n, params.s, params.s1, params.s2
    z1 = _as_point(z1, n)
    z2 = _as_point(z2, n)
    delta = float(np.linalg.norm(z1 - z2))
    zmax = max(np.max(np.abs(z1)), np.max(np.abs(z2)), delta)
    if R < 4.0 * zmax:
        raise ParameterError(f"tail bound needs R >= 4*max(|z|, delta) = {4 * zmax}")
    omega = 2.0 if n == 1 else 2.0 * np.pi if n == 2 else 2.0 * np.pi**2
    rho1, rho2 = s1 - n, s2 - n
    cf1 = abs(rho1) * (5.0 / 8.0) ** (rho1 - 1.0)
    cf2 = abs(rho2) * (5.0 / 8.0) ** (rho2 - 1.0)
    # y within |x|/8 of x: both power differences through the gradient bound
    c_near = cf1 * cf2 * omega / (2.0 - 2.0 * s) * 8.0 ** (2.0 * s - 2.0)
    # y far: split the product of sums into four pieces
    c_xx = (3.0 / 4.0) ** (2.0 * s - 2.0 * n) * omega * 8.0 ** (2.0 * s) / (2.0 * s)
    c_xy = (3.0 / 4.0) ** rho1 * (
        4.0 ** (n + 2.0 * s) * omega / s2 * 0.5**s2
        + 0.5**rho2 * omega * 8.0 ** (2.0 * s) / (2.0 * s)
    )
    c_yx = (3.0 / 4.0) ** rho2 * (
        4.0 ** (n + 2.0 * s) * omega / s1 * 0.5**s1
        + 0.5**rho1 * omega * 8.0 ** (2.0 * s) / (2.0 * s)
    )
    per_x = (c_near + c_xx + c_xy + c_yx) * omega / n  # after the radial x integral
    tail = per_x * R ** (-float(n))
    # the both-factors-at-y piece: mass near the base points ~ delta^(2s-n),
    # then |x - y| >= |x|/4 for |x| >= R
    mass_near = omega * (0.5**s1 / s1 + 0.5**s2 / s2) * delta ** (2.0 * s - n)
    if abs(2.0 * s - n) < 1e-12:
        ring = omega * 2.0 ** max(-rho1, -rho2) * np.log(max(R / delta, 2.0))
    elif 2.0 * s < n:
        ring = omega * 2.0 ** max(-rho1, -rho2) * delta ** (2.0 * s - n) / (n - 2.0 * s)
    else:
        ring = omega * 2.0 ** max(-rho1, -rho2) * R ** (2.0 * s - n) / (2.0 * s - n)
    c_yy_near = (mass_near + ring) * 4.0 ** (n + 2.0 * s) * omega / (2.0 * s)
    tail += c_yy_near * R ** (-2.0 * s)
    c_yy_far = 0.5 ** (2.0 * s - 2.0 * n) * omega * 8.0 ** (2.0 * s) / (2.0 * s) * omega / n
    tail += c_yy_far * R ** (-float(n))
    # both x and y can leave the box; double for the symmetric role of y
    return float(2.0 * Ksup * tail)
