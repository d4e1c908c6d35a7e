"""Node/edge discretizations of the disk, half-disk and strip.

A Grid is a quadrature for random measures: bulk nodes are cell centers
carrying cell areas, boundary nodes are edge midpoints carrying edge lengths.
Bulk nodes always form a complete rectangle in some chart (cartesian for the
disk, log-polar for half-disks, cartesian for the strip) so fields can be
interpolated bilinearly; boundary meshes are graded geometrically into marked
points so that arc masses split cleanly there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, SizeError
from .geometry import Domain, UNIT_DISK, STRIP, half_disk

MAX_NODES = 1 << 14


@dataclass(frozen=True)
class Grid:
    """Discretization of a domain; see the module docstring."""

    domain: Domain
    bulk_points: np.ndarray
    bulk_areas: np.ndarray
    boundary_points: np.ndarray
    boundary_lengths: np.ndarray
    boundary_params: np.ndarray       # arclength parameter of edge midpoints
    chart: str                        # cartesian | logpolar | strip
    axes: tuple                       # chart axes for the bulk rectangle
    shape: tuple                      # bulk rectangle shape
    spacing: float                    # representative bulk spacing
    name: str = "grid"
    bulk_index: np.ndarray | None = None   # flat rectangle slots (None: complete)

    def __post_init__(self):
        if self.n_nodes > MAX_NODES:
            raise SizeError(f"{self.n_nodes} nodes exceeds the budget {MAX_NODES}")

    @property
    def n_bulk(self) -> int:
        return len(self.bulk_points)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_points)

    @property
    def n_nodes(self) -> int:
        return self.n_bulk + self.n_boundary

    def all_points(self) -> np.ndarray:
        return np.concatenate([self.bulk_points, self.boundary_points])

    def __hash__(self):
        return hash((self.name, self.n_bulk, self.n_boundary))

    # -- chart coordinates -------------------------------------------------
    def chart_coords(self, pts: np.ndarray):
        pts = np.asarray(pts, dtype=complex)
        if self.chart == "cartesian" or self.chart == "strip":
            return pts.real, pts.imag
        if self.chart == "logpolar":
            r = np.abs(pts)
            return np.log(np.maximum(r, 1e-300)), np.angle(pts)
        raise GeometryError(f"unknown chart {self.chart}")

    def interpolate(self, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Bilinear interpolation of bulk values at arbitrary points.

        Values may cover all nodes (bulk first) or just the bulk; points
        outside the bulk rectangle are clamped to its edge.  Rectangle slots
        without a node (cells outside the domain) are filled from their
        nearest populated neighbors before interpolating.
        """
        vals = np.asarray(values)[: self.n_bulk]
        if self.bulk_index is None:
            grid_mat = vals.reshape(self.shape)
        else:
            grid_mat = np.full(self.shape[0] * self.shape[1], np.nan)
            grid_mat[self.bulk_index] = vals
            grid_mat = _fill_nan(grid_mat.reshape(self.shape))
        ax0, ax1 = self.axes
        x0, x1 = self.chart_coords(pts)
        return _bilinear(grid_mat, ax0, ax1, x0, x1)


def _fill_nan(mat: np.ndarray) -> np.ndarray:
    """Fill missing rectangle slots by diffusion from populated neighbors."""
    out = mat.copy()
    while np.isnan(out).any():
        bad = np.isnan(out)
        padded = np.pad(out, 1, constant_values=np.nan)
        stacks = np.stack([padded[:-2, 1:-1], padded[2:, 1:-1],
                           padded[1:-1, :-2], padded[1:-1, 2:]])
        with np.errstate(invalid="ignore"):
            nb = np.nanmean(stacks, axis=0)
        fillable = bad & ~np.isnan(nb)
        if not fillable.any():
            out[bad] = 0.0
            break
        out[fillable] = nb[fillable]
    return out


def _bilinear(mat, ax0, ax1, q0, q1):
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    q1 = np.atleast_1d(np.asarray(q1, dtype=float))
    i = np.clip(np.searchsorted(ax0, q0) - 1, 0, len(ax0) - 2)
    j = np.clip(np.searchsorted(ax1, q1) - 1, 0, len(ax1) - 2)
    t = np.clip((q0 - ax0[i]) / (ax0[i + 1] - ax0[i]), 0.0, 1.0)
    u = np.clip((q1 - ax1[j]) / (ax1[j + 1] - ax1[j]), 0.0, 1.0)
    v = ((1 - t) * (1 - u) * mat[i, j] + t * (1 - u) * mat[i + 1, j]
         + (1 - t) * u * mat[i, j + 1] + t * u * mat[i + 1, j + 1])
    return v


# ---------------------------------------------------------------------------
# boundary meshes
# ---------------------------------------------------------------------------

def graded_segments(length: float, r_min: float, ratio: float, h_max: float) -> np.ndarray:
    """Edge lengths grading geometrically from both ends of a segment.

    Starts at r_min at each end, grows by ``ratio`` until h_max, fills the
    middle uniformly; returns edge lengths summing exactly to ``length``.
    """
    if length <= 2.05 * r_min:
        return np.array([length])
    sizes = [r_min]
    while sizes[-1] * ratio < h_max and 2.0 * sum(sizes) + sizes[-1] * ratio < length:
        sizes.append(sizes[-1] * ratio)
    graded = np.asarray(sizes)
    middle = length - 2.0 * graded.sum()
    if middle <= 0:
        out = np.concatenate([graded, graded[::-1]])
        return out * (length / out.sum())
    n_mid = max(1, int(np.ceil(middle / h_max)))
    mid = np.full(n_mid, middle / n_mid)
    return np.concatenate([graded, mid, graded[::-1]])


def disk_boundary_mesh(marked_points, r_min: float = 2e-4, ratio: float = 1.35,
                       h_max: float = 0.05):
    """Edges along the unit circle meeting exactly at the marked points."""
    angles = np.sort(np.mod(np.angle(np.asarray(marked_points, dtype=complex)), 2 * np.pi))
    mids, lengths, params = [], [], []
    for a, b in zip(angles, np.roll(angles, -1)):
        span = np.mod(b - a, 2 * np.pi)
        if span < 1e-12:
            span = 2 * np.pi
        sizes = graded_segments(span, r_min, ratio, h_max)
        edges = a + np.concatenate([[0.0], np.cumsum(sizes)])
        c = 0.5 * (edges[:-1] + edges[1:])
        mids.append(np.exp(1j * c))
        lengths.append(sizes)
        params.append(np.mod(c, 2 * np.pi))
    return (np.concatenate(mids), np.concatenate(lengths), np.concatenate(params))


def segment_mesh_symmetric(extent: float, r_min: float, ratio: float, h_max: float):
    """Log-graded mesh of [-extent, extent] with edges meeting at 0."""
    sizes = [r_min]
    while sum(sizes) < extent:
        nxt = min(sizes[-1] * ratio, h_max)
        sizes.append(nxt)
    sizes = np.asarray(sizes)
    cum = np.cumsum(sizes)
    scale = extent / cum[-1]
    sizes = sizes * scale
    edges = np.concatenate([[0.0], np.cumsum(sizes)])
    mids_pos = 0.5 * (edges[:-1] + edges[1:])
    mids = np.concatenate([-mids_pos[::-1], mids_pos])
    lengths = np.concatenate([sizes[::-1], sizes])
    params = mids + extent       # arclength from the left end
    return mids.astype(complex), lengths, params


# ---------------------------------------------------------------------------
# grid builders
# ---------------------------------------------------------------------------

def disk_grid(n: int = 129, marked_points=(-1.0, -1j, 1.0), r_min: float = 2e-4,
              boundary_h: float = 0.05, with_boundary: bool = True,
              name: str | None = None) -> Grid:
    """Cartesian lattice on the unit disk plus a graded circle mesh.

    n is the number of cells across the bounding box; cells straddling the
    circle keep their center but carry the overlapping area only.  Dirichlet
    grids (no boundary measure) use ``with_boundary=False``.
    """
    h = 2.0 / n
    ax = -1.0 + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    Z = X + 1j * Y
    # subcell overlap fractions for cells near the circle
    sub = (np.arange(4) + 0.5) / 4.0 - 0.5
    SX, SY = np.meshgrid(sub, sub, indexing="ij")
    offsets = (SX + 1j * SY).ravel() * h
    frac = np.zeros(Z.shape)
    inside = np.abs(Z) <= 1.0 - 0.71 * h
    rim = (~inside) & (np.abs(Z) < 1.0 + 0.71 * h)
    frac[inside] = 1.0
    if np.any(rim):
        zr = Z[rim]
        frac[rim] = np.mean(np.abs(zr[:, None] + offsets[None, :]) < 1.0, axis=1)
    # nodes need clearance from the circle or the covariance model breaks;
    # clipped-cell area is reassigned one step radially inward
    clearance = np.abs(Z) < 1.0 - 0.45 * h
    keep = clearance & (frac > 0)
    areas = frac * h * h
    for (i, j) in np.argwhere((frac > 0) & ~clearance):
        z = Z[i, j]
        step = -np.sign(np.array([z.real, z.imag])) * (np.abs(np.array([z.real, z.imag])) > 0.3)
        ti, tj = i + int(step[0]), j + int(step[1])
        if 0 <= ti < n and 0 <= tj < n and keep[ti, tj]:
            areas[ti, tj] += areas[i, j]
        areas[i, j] = 0.0
    if with_boundary:
        bpts, blens, bpar = disk_boundary_mesh(marked_points, r_min=r_min, h_max=boundary_h)
    else:
        bpts = np.zeros(0, dtype=complex)
        blens = np.zeros(0)
        bpar = np.zeros(0)
    flat_idx = np.nonzero(keep.ravel())[0]
    tag = name or (f"disk{n}" if with_boundary else f"diskD{n}")
    return Grid(UNIT_DISK, Z[keep].ravel(), areas[keep].ravel(), bpts, blens, bpar,
                chart="cartesian", axes=(ax, ax), shape=(n, n), spacing=h,
                name=tag, bulk_index=flat_idx)


def halfdisk_grid(eps: float, n: int = 129, r_bulk_min: float | None = None,
                  r_bdry_min: float | None = None, name: str | None = None) -> Grid:
    """Log-polar grid on (1/sqrt(eps)) D cap H, graded into the origin.

    Rings are geometric with aspect-1 cells; the diameter mesh is log-graded
    into 0 from both sides.  ``n`` sets the resolution budget: there are
    about n/10 nodes per unit length at scale 1.
    """
    R = 1.0 / np.sqrt(eps)
    alpha = 10.0 / n                       # ring growth rate ~ resolution
    n_theta = max(8, int(round(np.pi / alpha)))
    r0 = r_bulk_min if r_bulk_min is not None else 2e-3
    n_rings = int(np.ceil(np.log(R / r0) / np.log1p(alpha)))
    redges = r0 * (1.0 + alpha) ** np.arange(n_rings + 1)
    redges = redges * (R / redges[-1])
    rc = np.sqrt(redges[:-1] * redges[1:])
    th_edges = np.linspace(0.0, np.pi, n_theta + 1)
    thc = 0.5 * (th_edges[:-1] + th_edges[1:])
    RR, TT = np.meshgrid(rc, thc, indexing="ij")
    Z = RR * np.exp(1j * TT)
    ring_areas = 0.5 * (redges[1:] ** 2 - redges[:-1] ** 2) * (np.pi / n_theta)
    areas = np.repeat(ring_areas, n_theta)
    r_b = r_bdry_min if r_bdry_min is not None else 0.5 * r0
    bpts, blens, bpar = segment_mesh_symmetric(R, r_min=r_b, ratio=1.0 + alpha,
                                               h_max=0.6 * alpha * R)
    return Grid(half_disk(R), Z.ravel(), areas, bpts, blens, bpar,
                chart="logpolar", axes=(np.log(rc), thc), shape=(n_rings, n_theta),
                spacing=alpha, name=name or f"halfdisk(eps={eps:g},n={n})")


def strip_grid(window: float, dx: float = np.pi / 16, ny: int = 16,
               name: str | None = None) -> Grid:
    """Tensor grid on [-window/2, window/2] x [0, pi] with edge rows on both lines."""
    nx = max(8, int(round(window / dx)))
    dx = window / nx
    xs = -0.5 * window + (np.arange(nx) + 0.5) * dx
    dy = np.pi / ny
    ys = (np.arange(ny) + 0.5) * dy
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    Z = XX + 1j * YY
    areas = np.full(Z.size, dx * dy)
    # boundary edges: bottom line then top line, arclength parameter runs
    # along the bottom from -inf side and continues along the top
    bpts = np.concatenate([xs + 0j, xs + 1j * np.pi])
    blens = np.full(2 * nx, dx)
    bpar = np.concatenate([xs, window + xs])
    return Grid(STRIP, Z.ravel(), areas, bpts, blens, bpar,
                chart="strip", axes=(xs, ys), shape=(nx, ny), spacing=dx,
                name=name or f"strip(W={window:g},dx={dx:g})")


def column_index(grid: Grid) -> np.ndarray:
    """Strip grids: map every node (bulk then boundary) to its x-column."""
    if grid.chart != "strip":
        raise GeometryError("column_index requires a strip grid")
    nx, ny = grid.shape
    bulk = np.repeat(np.arange(nx), ny)
    bdry = np.concatenate([np.arange(nx), np.arange(nx)])
    return np.concatenate([bulk, bdry])
