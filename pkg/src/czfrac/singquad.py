"""Singular quadrature engine and stable kernel-difference primitives.

The engine integrates functions with integrable point singularities and, in
pair mode, an integrable singularity along the diagonal x = y of a product
domain.  Meshes are tensor products of 1-d axis meshes whose cell edges are
aligned at every singular coordinate, so no quadrature node ever lands on a
singular locus; dyadic refinement grades the cells toward those loci.  Pair
cells near the diagonal are subdivided recursively and the thin strip still
touching the diagonal at the bottom level is excised.

Summation order is fixed (level by level, construction order, pairwise
within batches), so results are bit-identical regardless of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ParameterError, QuadratureError

__all__ = [
    "QuadConfig",
    "RegionLabel",
    "stable_power_diff",
    "classify_region",
    "region_masks",
    "refined_axis_cells",
    "integrate_singular",
]

_CHUNK = 1 << 20  # fixed evaluation chunk; part of the deterministic contract


@dataclass(frozen=True)
class QuadConfig:
    """Mesh controls for the singular quadrature engine.

    trunc_radius   half-width of the uniformly resolved box [-R, R]^n
    excision       radius dropped around each singular point (0 = rely on
                   edge alignment only); must stay below the finest spacing
    base_cells     uniform cells per axis across the resolved box
    refine_depth   dyadic refinement levels toward singular points
    ring_growth    refinement band in cell widths: a cell keeps splitting
                   while its distance to a singular set stays below
                   ring_growth times its own width, so each dyadic ring
                   around the set carries about ring_growth cells
    tail_rings     geometrically growing cells appended beyond the resolved
                   box on each side (factor tail_growth per ring); they push
                   the actual truncation radius out at logarithmic cost
    diag_depth     pair-cell subdivision levels toward the diagonal
                   (defaults to min(refine_depth, 12); unlike point
                   refinement, diagonal refinement costs grow geometrically)
    """

    trunc_radius: float = 8.0
    excision: float = 0.0
    base_cells: int = 48
    refine_depth: int = 24
    ring_growth: float = 4.0
    tail_rings: int = 10
    tail_growth: float = 1.6
    diag_depth: Optional[int] = None

    def __post_init__(self):
        if self.trunc_radius <= 0:
            raise ParameterError("trunc_radius must be positive")
        if self.base_cells < 2:
            raise ParameterError("base_cells must be >= 2")
        if self.refine_depth < 1:
            raise ParameterError("refine_depth must be >= 1")
        if self.ring_growth < 1.0:
            raise ParameterError("ring_growth must be >= 1")
        if self.tail_rings < 0:
            raise ParameterError("tail_rings must be >= 0")
        if self.tail_growth <= 1.0:
            raise ParameterError("tail_growth must exceed 1")
        if self.excision < 0:
            raise ParameterError("excision must be >= 0")
        finest = 2.0 * self.trunc_radius / self.base_cells * 0.5**self.refine_depth
        if self.excision >= finest:
            raise ParameterError(
                f"excision {self.excision} must stay below the finest spacing {finest}"
            )

    @property
    def diagonal_depth(self) -> int:
        return self.diag_depth if self.diag_depth is not None else min(self.refine_depth, 12)

    @property
    def outer_radius(self) -> float:
        return self.trunc_radius * self.tail_growth**self.tail_rings

    def coarsened(self) -> "QuadConfig":
        """One whole refinement level less (background included); the error
        estimate is the difference between this level and the full one."""
        return replace(
            self,
            base_cells=max(8, self.base_cells // 2),
            refine_depth=max(1, self.refine_depth - 1),
            diag_depth=max(1, self.diagonal_depth - 1),
        )


# ---------------------------------------------------------------------------
# stable evaluation of |a|^r - |b|^r


def stable_power_diff(a, b, r):
    """|a|^r - |b|^r without catastrophic cancellation.

    ``a`` and ``b`` are vectors (trailing axis is the coordinate axis) or
    batches of vectors; ``r`` is a scalar exponent or one per row.  When the
    two radii are within 10% of each other the difference is evaluated
    through expm1/log1p on the ratio, which keeps the result accurate to a
    few ulp; the ratio itself comes from (|a|^2-|b|^2)/(|b|(|a|+|b|)) so no
    subtraction of close numbers occurs.  Exactly antisymmetric under
    swapping a and b, and exactly zero for equal radii.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.ndim == 1 and b.ndim == 1 and a.shape == b.shape:
        scalar = True
        a = a[None, :]
        b = b[None, :]
    else:
        scalar = False
    na = np.sqrt(np.sum(a * a, axis=-1))
    nb = np.sqrt(np.sum(b * b, axis=-1))
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise ParameterError("stable_power_diff needs nonzero vectors")
    swap = na < nb
    hi = np.where(swap, nb, na)
    lo = np.where(swap, na, nb)
    # |a|^2 - |b|^2 without cancellation; exact under a <-> b up to sign
    diff2 = np.sum((a - b) * (a + b), axis=-1)
    t = np.abs(diff2) / (lo * (hi + lo))
    d = np.sqrt(np.sum((a - b) ** 2, axis=-1))
    stable = d <= 0.1 * lo
    with np.errstate(over="ignore"):
        direct = hi**r - lo**r
        via_log = lo**r * np.expm1(r * np.log1p(t))
    val = np.where(stable, via_log, direct)
    val = np.where(na == nb, 0.0, np.where(swap, -val, val))
    return float(val[0]) if scalar else val


# ---------------------------------------------------------------------------
# region classification


@dataclass(frozen=True)
class RegionLabel:
    """Memberships of (x, y) in the overlapping covers around z1, z2."""

    a_set: frozenset
    b_set: frozenset
    i_set: frozenset
    j_set: frozenset


def region_masks(x, y, z1, z2) -> dict:
    """Vectorized membership flags for batches of point pairs.

    The three covers come with fixed comparison constants 10 and 1/10
    (and 100, 1/100 for the third near/far split); ties are non-strict, so
    the sets overlap, which is expected and harmless.
    """
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    z1 = np.asarray(z1, float)
    z2 = np.asarray(z2, float)
    delta = float(np.linalg.norm(z1 - z2))
    if delta == 0.0:
        raise ParameterError("z1 and z2 must differ")

    def _n(v):
        return np.sqrt(np.sum(v * v, axis=-1))

    dxy = _n(x - y)
    dx1 = _n(x - z1)
    dy1 = _n(y - z1)
    dx2 = _n(x - z2)
    dy2 = _n(y - z2)
    out = {
        "a1": dxy <= 10.0 * np.minimum(dx1, dy1),
        "a2": dx1 <= 10.0 * np.minimum(dy1, dxy),
        "a3": dy1 <= 10.0 * np.minimum(dx1, dxy),
        "b1": dxy <= 10.0 * np.minimum(dx2, dy2),
        "b2": dx2 <= 10.0 * np.minimum(dy2, dxy),
        "b3": dy2 <= 10.0 * np.minimum(dx2, dxy),
        "i1": (dx1 <= 10.0 * delta) & (dx2 >= delta / 10.0),
        "i2": (dx2 <= 10.0 * delta) & (dx1 >= delta / 10.0),
        "i3": (dx2 / 100.0 <= dx1) & (dx1 <= 100.0 * dx2) & (dx1 >= delta / 100.0),
        "j1": (dy1 <= 10.0 * delta) & (dy2 >= delta / 10.0),
        "j2": (dy2 <= 10.0 * delta) & (dy1 >= delta / 10.0),
        "j3": (dy2 / 100.0 <= dy1) & (dy1 <= 100.0 * dy2) & (dy1 >= delta / 100.0),
    }
    return out


def classify_region(x, y, z1, z2) -> RegionLabel:
    """Region memberships of a single pair (x, y) relative to (z1, z2)."""
    x = np.asarray(x, float).reshape(1, -1)
    y = np.asarray(y, float).reshape(1, -1)
    z1 = np.asarray(z1, float).ravel()
    z2 = np.asarray(z2, float).ravel()
    for pt, name in ((x[0], "x"), (y[0], "y")):
        if np.array_equal(pt, z1) or np.array_equal(pt, z2):
            raise ParameterError(f"{name} must avoid the singular points z1, z2")
    m = region_masks(x, y, z1, z2)
    pick = lambda keys: frozenset(k + 1 for k, key in enumerate(keys) if m[key][0])
    return RegionLabel(
        a_set=pick(("a1", "a2", "a3")),
        b_set=pick(("b1", "b2", "b3")),
        i_set=pick(("i1", "i2", "i3")),
        j_set=pick(("j1", "j2", "j3")),
    )


# ---------------------------------------------------------------------------
# axis meshes


def refined_axis_cells(
    lo: float,
    hi: float,
    base_cells: int,
    points: Sequence[float],
    depth: int,
    band: float = 4.0,
    tail_rings: int = 0,
    tail_growth: float = 1.6,
) -> np.ndarray:
    """1-d cells (start, width) on [lo, hi], edge-aligned and graded at ``points``.

    A cell splits while its distance to some refinement point is at most
    ``band`` times its width, so the graded zone carries about ``band``
    cells per dyadic ring.  Tail rings extend the interval geometrically on
    both sides, capturing slowly decaying far fields at logarithmic cost.
    """
    edges = np.linspace(lo, hi, base_cells + 1)
    inside = sorted(p for p in points if lo < p < hi)
    edges = np.unique(np.concatenate([edges, np.asarray(inside, float)]))
    starts = edges[:-1]
    widths = np.diff(edges)
    pts = np.asarray(inside, float)
    for _ in range(depth):
        if len(pts):
            d_lo = np.abs(starts[:, None] - pts[None, :])
            d_hi = np.abs(starts[:, None] + widths[:, None] - pts[None, :])
            dist = np.min(np.minimum(d_lo, d_hi), axis=1)
            split = dist <= band * widths
        else:
            split = np.zeros(len(starts), dtype=bool)
        if not np.any(split):
            break
        ks, kw = starts[~split], widths[~split]
        ss, sw = starts[split], widths[split] / 2.0
        starts = np.concatenate([ks, ss, ss + sw])
        widths = np.concatenate([kw, sw, sw])
    # geometric tail extension
    tails_s, tails_w = [], []
    right, left = hi, lo
    wr = (hi - lo) / base_cells
    for _ in range(tail_rings):
        wr *= tail_growth
        tails_s += [right, left - wr]
        tails_w += [wr, wr]
        right += wr
        left -= wr
    starts = np.concatenate([starts, np.asarray(tails_s)])
    widths = np.concatenate([widths, np.asarray(tails_w)])
    order = np.argsort(starts, kind="stable")
    return np.stack([starts[order], widths[order]], axis=1)


def _product_cells(axis_cells: Sequence[np.ndarray]):
    """Tensor product of per-axis (start, width) lists -> (lo, wid) arrays."""
    los = [c[:, 0] for c in axis_cells]
    wids = [c[:, 1] for c in axis_cells]
    mesh_lo = np.meshgrid(*los, indexing="ij")
    mesh_w = np.meshgrid(*wids, indexing="ij")
    lo = np.stack([m.ravel() for m in mesh_lo], axis=-1)
    wid = np.stack([m.ravel() for m in mesh_w], axis=-1)
    return lo, wid


def _chunked_eval(fn: Callable[[np.ndarray], np.ndarray], pts: np.ndarray, vols: np.ndarray):
    """Sum fn(pts)*vols in fixed-size chunks; order-stable pairwise sums."""
    parts = []
    for start in range(0, len(pts), _CHUNK):
        stop = min(len(pts), start + _CHUNK)
        vals = np.asarray(fn(pts[start:stop]), float)
        if not np.all(np.isfinite(vals)):
            bad = np.where(~np.isfinite(vals))[0][0]
            raise QuadratureError(
                f"non-finite integrand sample at {pts[start + bad]}"
            )
        parts.append(float(np.sum(vals * vols[start:stop])))
    return math.fsum(parts)


def _chunked_eval_pair(fn, xpts, ypts, vols):
    parts = []
    for start in range(0, len(xpts), _CHUNK):
        stop = min(len(xpts), start + _CHUNK)
        vals = np.asarray(fn(xpts[start:stop], ypts[start:stop]), float)
        if not np.all(np.isfinite(vals)):
            bad = np.where(~np.isfinite(vals))[0][0]
            raise QuadratureError(
                "non-finite integrand sample at x="
                f"{xpts[start + bad]}, y={ypts[start + bad]}"
            )
        parts.append(float(np.sum(vals * vols[start:stop])))
    return math.fsum(parts)


def _excise_points(lo, wid, points, eps):
    if eps <= 0 or not len(points):
        return lo, wid
    ctr = lo + wid / 2.0
    keep = np.ones(len(lo), dtype=bool)
    for p in points:
        keep &= np.sqrt(np.sum((ctr - np.asarray(p, float)) ** 2, axis=-1)) > eps
    return lo[keep], wid[keep]


# two-point Gauss offsets per axis; tensorized over the cell's axes
_G2 = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


def _gauss_nodes(lo: np.ndarray, wid: np.ndarray):
    """Tensor 2-point Gauss nodes and weights for boxes (m, d) -> (m*2^d, d)."""
    m, d = lo.shape
    offs = np.array(np.meshgrid(*([_G2] * d), indexing="ij")).reshape(d, -1).T  # (2^d, d)
    pts = lo[:, None, :] + offs[None, :, :] * wid[:, None, :]
    wts = np.repeat(np.prod(wid, axis=-1) / 2.0**d, 2**d)
    return pts.reshape(-1, d), wts


def _integrate_plain(fn, bounds, points, cfg: QuadConfig) -> float:
    dim = len(bounds)
    axis_cells = []
    for a in range(dim):
        proj = [float(np.asarray(p).ravel()[a]) for p in points]
        axis_cells.append(
            refined_axis_cells(
                bounds[a][0],
                bounds[a][1],
                cfg.base_cells,
                proj,
                cfg.refine_depth,
                band=cfg.ring_growth,
            )
        )
    lo, wid = _product_cells(axis_cells)
    lo, wid = _excise_points(lo, wid, points, cfg.excision)
    pts, wts = _gauss_nodes(lo, wid)
    return _chunked_eval(fn, pts, wts)


def _pair_gap(xlo, xwid, ylo, ywid):
    """Per-pair distance between the x-cell and y-cell boxes (0 if they meet)."""
    gap_lo = ylo - (xlo + xwid)
    gap_hi = xlo - (ylo + ywid)
    gap = np.maximum(np.maximum(gap_lo, gap_hi), 0.0)
    return np.sqrt(np.sum(gap * gap, axis=-1))


def _integrate_pair(fn, bounds, points, cfg: QuadConfig, tail_rings: int) -> float:
    dim = len(bounds)
    axis_cells = []
    for a in range(dim):
        proj = [float(np.asarray(p).ravel()[a]) for p in points]
        axis_cells.append(
            refined_axis_cells(
                bounds[a][0],
                bounds[a][1],
                cfg.base_cells,
                proj,
                cfg.refine_depth,
                band=cfg.ring_growth,
                tail_rings=tail_rings,
                tail_growth=cfg.tail_growth,
            )
        )
    clo, cwid = _product_cells(axis_cells)
    clo, cwid = _excise_points(clo, cwid, points, cfg.excision)
    m = len(clo)
    ix, iy = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    xlo, xwid = clo[ix.ravel()], cwid[ix.ravel()]
    ylo, ywid = clo[iy.ravel()], cwid[iy.ravel()]

    totals = []
    depth = cfg.diagonal_depth
    for level in range(depth + 1):
        gap = _pair_gap(xlo, xwid, ylo, ywid)
        size = np.maximum(
            np.sqrt(np.sum(xwid * xwid, axis=-1)), np.sqrt(np.sum(ywid * ywid, axis=-1))
        )
        # Gauss-2 handles power-law variation once a pair clears the diagonal
        # by its own size, so the subdivision band is one cell width
        near = gap <= size
        if level == depth:
            # excise what still touches the diagonal, integrate the rest
            keep = gap > 0.0
            sel = keep
        else:
            sel = ~near
        if np.any(sel):
            xp, xw = _gauss_nodes(xlo[sel], xwid[sel])
            yp, yw = _gauss_nodes(ylo[sel], ywid[sel])
            # tensor the x-nodes of each pair cell with its y-nodes
            k = 2**dim
            npairs = int(np.count_nonzero(sel))
            xi = (
                np.repeat(np.arange(npairs) * k, k * k)
                + np.tile(np.repeat(np.arange(k), k), npairs)
            )
            yi = (
                np.repeat(np.arange(npairs) * k, k * k)
                + np.tile(np.tile(np.arange(k), k), npairs)
            )
            totals.append(
                _chunked_eval_pair(fn, xp[xi], yp[yi], xw[xi] * yw[yi])
            )
        if level == depth:
            break
        # subdivide the near-diagonal pairs: halve every axis of both factors
        xlo, xwid = xlo[near], xwid[near]
        ylo, ywid = ylo[near], ywid[near]
        if len(xlo) == 0:
            break
        xlo, xwid, ylo, ywid = _split_pairs(xlo, xwid, ylo, ywid)
    return math.fsum(totals)


def _split_pairs(xlo, xwid, ylo, ywid):
    dim = xlo.shape[-1]
    n_children = 4**dim
    reps = np.arange(n_children)
    # bits 0..dim-1 pick the x half per axis, bits dim..2dim-1 the y half
    xsel = (reps[:, None] >> np.arange(dim)) & 1
    ysel = (reps[:, None] >> (dim + np.arange(dim))) & 1
    hxw = xwid / 2.0
    hyw = ywid / 2.0
    nxlo = (xlo[:, None, :] + xsel[None, :, :] * hxw[:, None, :]).reshape(-1, dim)
    nxw = np.repeat(hxw, n_children, axis=0)
    nylo = (ylo[:, None, :] + ysel[None, :, :] * hyw[:, None, :]).reshape(-1, dim)
    nyw = np.repeat(hyw, n_children, axis=0)
    return nxlo, nxw, nylo, nyw


def integrate_singular(
    integrand: Callable,
    bounds,
    singular_points: Sequence = (),
    diagonal_singular: bool = False,
    cfg: Optional[QuadConfig] = None,
):
    """Integrate with dyadic grading toward point singularities and, in pair
    mode, toward the diagonal.

    Plain mode (``diagonal_singular=False``): ``integrand(pts)`` over the box
    given by ``bounds`` (sequence of per-axis (lo, hi)); ``singular_points``
    are points of that box.

    Pair mode (``diagonal_singular=True``): ``integrand(x, y)`` over
    box x box; the singular points grade both factors, and the diagonal
    x = y is approached by recursive pair subdivision with the final
    touching strip excised.

    Returns ``(value, est_error)`` where the estimate is the difference
    between the two finest refinement levels.  The integrand must be
    absolutely integrable off the declared singular sets.
    """
    cfg = cfg or QuadConfig()
    bounds = [(float(b[0]), float(b[1])) for b in np.atleast_2d(bounds)]
    pts = [np.asarray(p, float).ravel() for p in singular_points]
    if diagonal_singular:
        fine = _integrate_pair(integrand, bounds, pts, cfg, cfg.tail_rings)
        coarse = _integrate_pair(integrand, bounds, pts, cfg.coarsened(), cfg.tail_rings)
    else:
        fine = _integrate_plain(integrand, bounds, pts, cfg)
        coarse = _integrate_plain(integrand, bounds, pts, cfg.coarsened())
    return fine, abs(fine - coarse)
