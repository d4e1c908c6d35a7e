"""Gaussian free fields with exact continuum covariance at lattice nodes.

The field at the nodes of a Grid is a centered Gaussian vector whose
covariance matrix is the continuum Green kernel evaluated at node pairs,
with diagonal entries set to the cell-averaged variance

    Var h(z) = Gtilde(z) - log(cell) - SQUARE_LOG_MEAN          (bulk)
    Var h(z) = Gtilde_boundary(z) - 2 log(edge) + 3             (boundary)

so a node value models the average of the field over its cell.  Sampling is
a dense triangular product; factorizations are cached per (grid, kernel,
modification).  Background-measure pinning, zero-mode projections and
Girsanov tilts are rank-one operations on samples, never refactorizations.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (CoincidentInsertions, DomainError, FactorizationError,
                     GeometryError, SizeError)
from .geometry import GammaParams
from .green import GreenKernel, SQUARE_LOG_MEAN
from .lattice import Grid, column_index
from .rng import substream

MAX_NODES = 1 << 14
CLIP_BUDGET = 1e-3


# ---------------------------------------------------------------------------
# covariance assembly
# ---------------------------------------------------------------------------

def node_variances(grid: Grid, kernel: GreenKernel) -> np.ndarray:
    """Cell-averaged variances used as the covariance diagonal."""
    ell_b = np.sqrt(grid.bulk_areas)
    var_bulk = kernel.bulk_diagonal(grid.bulk_points) - np.log(ell_b) - SQUARE_LOG_MEAN
    if grid.n_boundary:
        if not kernel.free_boundary:
            raise DomainError("grid has boundary edges but kernel has no free boundary")
        var_bdry = (kernel.boundary_diagonal(grid.boundary_points)
                    - 2.0 * np.log(grid.boundary_lengths) + 3.0)
        return np.concatenate([np.asarray(var_bulk, dtype=float),
                               np.asarray(var_bdry, dtype=float)])
    return np.asarray(var_bulk, dtype=float)


def regularized_diagonals(grid: Grid, kernel: GreenKernel) -> np.ndarray:
    tb = np.asarray(kernel.bulk_diagonal(grid.bulk_points), dtype=float)
    if grid.n_boundary:
        td = np.asarray(kernel.boundary_diagonal(grid.boundary_points), dtype=float)
        return np.concatenate([tb, td])
    return tb


def kernel_block(grid: Grid, kernel: GreenKernel, rows: np.ndarray,
                 cols: np.ndarray) -> np.ndarray:
    """Kernel values between node subsets, diagonal pairs cell-averaged."""
    z = grid.all_points()
    var = node_variances(grid, kernel)
    out = kernel.raw(z[rows][:, None], z[cols][None, :])
    same = rows[:, None] == cols[None, :]
    if np.any(same):
        out = np.where(same, var[rows][:, None], out)
    return out


def assemble_matrix(grid: Grid, kernel: GreenKernel) -> np.ndarray:
    """Dense kernel matrix with cell-averaged diagonal, assembled in blocks.

    Entries of nearby cell pairs are corrected from point evaluation to the
    cell-pair average of the log singularity, so the matrix is a consistent
    covariance of cell means (otherwise adjacent-cell inconsistency makes it
    indefinite).
    """
    z = grid.all_points()
    n = len(z)
    K = np.empty((n, n), dtype=float)
    block = max(16, (1 << 23) // max(n, 1))
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        K[lo:hi, :] = kernel.raw(z[lo:hi, None], z[None, :])
    np.fill_diagonal(K, node_variances(grid, kernel))
    _apply_bulk_pair_averages(grid, K)
    _apply_boundary_pair_averages(grid, K)
    _apply_mixed_pair_averages(grid, K)
    if not np.all(np.isfinite(K)):
        raise FactorizationError("kernel matrix has non-finite entries")
    return K


_CTAB: dict = {}


def _square_pair_logmean(di: int, dj: int) -> float:
    """Mean of log|u-v| over unit-square cells at integer offset, minus log|d|."""
    key = (abs(di), abs(dj)) if abs(di) >= abs(dj) else (abs(dj), abs(di))
    if key not in _CTAB:
        gl_x, gl_w = np.polynomial.legendre.leggauss(24)
        # difference u - v + d has tent-product density on an offset 2x2 square
        x = key[0] + gl_x[:, None]
        y = key[1] + gl_x[None, :]
        tentx = np.maximum(0.0, 1.0 - np.abs(gl_x))[:, None]
        tenty = np.maximum(0.0, 1.0 - np.abs(gl_x))[None, :]
        val = np.sum(gl_w[:, None] * gl_w[None, :] * tentx * tenty
                     * 0.5 * np.log(x * x + y * y))
        norm = np.sum(gl_w[:, None] * gl_w[None, :] * tentx * tenty)
        _CTAB[key] = float(val / norm) - 0.5 * np.log(key[0] ** 2 + key[1] ** 2)
    return _CTAB[key]


def _apply_bulk_pair_averages(grid: Grid, K: np.ndarray, reach: int = 4):
    """Shift near bulk-bulk entries from point values to cell-pair averages."""
    n0, n1 = grid.shape
    if grid.bulk_index is None:
        slot_of = np.arange(n0 * n1)
        node_at = np.arange(n0 * n1)
        present = np.ones(n0 * n1, dtype=bool)
    else:
        slot_of = grid.bulk_index
        node_at = np.full(n0 * n1, -1)
        node_at[grid.bulk_index] = np.arange(grid.n_bulk)
        present = node_at >= 0
    ii = slot_of // n1
    jj = slot_of % n1
    for di in range(-reach, reach + 1):
        for dj in range(-reach, reach + 1):
            if di == 0 and dj == 0:
                continue
            if di < 0 or (di == 0 and dj < 0):
                continue                      # symmetric partner handles it
            ti = ii + di
            tj = jj + dj
            ok = (ti >= 0) & (ti < n0) & (tj >= 0) & (tj < n1)
            tslot = ti[ok] * n1 + tj[ok]
            ok2 = present[tslot]
            a = np.arange(grid.n_bulk)[ok][ok2]
            b = node_at[tslot[ok2]]
            if len(a) == 0:
                continue
            corr = -_square_pair_logmean(di, dj)
            K[a, b] += corr
            K[b, a] += corr


def _h_antideriv(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    out = np.zeros_like(np.asarray(x, dtype=float))
    nz = ax > 1e-300
    out[nz] = 0.25 * x[nz] ** 2 * (2.0 * np.log(ax[nz]) - 3.0)
    return out


def _segment_pair_logmean(D: np.ndarray, l1: np.ndarray, l2: np.ndarray) -> np.ndarray:
    """Mean of log|u-v| over two collinear segments minus log(center distance)."""
    corners = (_h_antideriv(D + 0.5 * (l1 + l2)) - _h_antideriv(D + 0.5 * (l2 - l1))
               - _h_antideriv(D - 0.5 * (l2 - l1)) + _h_antideriv(D - 0.5 * (l1 + l2)))
    return corners / (l1 * l2) - np.log(np.abs(D))


_GL12 = np.polynomial.legendre.leggauss(12)


def _cell_edge_logmean(s: float, d: float, a: float, b: float) -> float:
    """Mean of log|u-v|, u in an axis-aligned square (side a, center (s,d)),
    v on a segment of length b centered at the origin along the x-axis."""
    xg, xw = _GL12
    # w1 = u_x - v_x has a trapezoid density: convolution of widths a and b
    lo, hi = abs(a - b) / 2.0, (a + b) / 2.0
    panels = [(-hi, -lo), (-lo, lo), (lo, hi)] if lo > 1e-14 else [(-hi, hi)]
    total = 0.0
    wsum = 0.0
    for (p0, p1) in panels:
        if p1 - p0 < 1e-300:
            continue
        w1 = 0.5 * (p0 + p1) + 0.5 * (p1 - p0) * xg
        dens = np.minimum(np.minimum(a, b), hi - np.abs(w1)) / (a * b)
        w2 = d + 0.5 * a * xg
        r2 = (s + w1[:, None]) ** 2 + w2[None, :] ** 2
        vals = 0.5 * np.log(np.maximum(r2, 1e-300))
        inner = 0.5 * a * (vals @ xw)                       # integral over w2
        total += 0.5 * (p1 - p0) * float((xw * dens) @ inner)
        wsum += 0.5 * (p1 - p0) * float(xw @ dens)
    return total / (wsum * a)


def _apply_mixed_pair_averages(grid: Grid, K: np.ndarray, reach: float = 3.0):
    """Shift near bulk-boundary entries to cell-edge averages (c = 2).

    The free-boundary kernels behave as -2 log|z - y| when y is on the free
    boundary, so the same chord treatment applies with the local tangent
    frame of the nearest edge.
    """
    if grid.n_boundary == 0:
        return
    zb = grid.bulk_points
    ell_bulk = np.sqrt(grid.bulk_areas)
    ye = grid.boundary_points
    be = grid.boundary_lengths
    tangents = _edge_tangents(grid)
    base = grid.n_bulk
    dist = np.abs(zb[:, None] - ye[None, :])
    near = dist < reach * np.maximum(ell_bulk[:, None], be[None, :])
    for i, e in np.argwhere(near):
        rel = (zb[i] - ye[e]) / tangents[e]
        s, d = float(rel.real), abs(float(rel.imag))
        avg = _cell_edge_logmean(s, d, float(ell_bulk[i]), float(be[e]))
        corr = -2.0 * (avg - np.log(dist[i, e]))
        K[i, base + e] += corr
        K[base + e, i] += corr


def _edge_tangents(grid: Grid) -> np.ndarray:
    if grid.domain.kind == "unit_disk":
        return 1j * grid.boundary_points / np.abs(grid.boundary_points)
    return np.ones(grid.n_boundary, dtype=complex)


def _apply_boundary_pair_averages(grid: Grid, K: np.ndarray, reach: float = 4.0):
    """Shift near boundary-boundary entries to segment-pair averages (c = 2)."""
    if grid.n_boundary == 0:
        return
    p = grid.boundary_params
    ell = grid.boundary_lengths
    base = grid.n_bulk
    total = None
    if grid.domain.kind == "unit_disk":
        total = 2.0 * np.pi
    # arclength separation; strip grids store the two lines in disjoint
    # parameter ranges so cross-line pairs never look close
    dp = np.abs(p[:, None] - p[None, :])
    if total is not None:
        dp = np.minimum(dp, total - dp)
    near = (dp > 0) & (dp < reach * np.maximum(ell[:, None], ell[None, :]))
    a, b = np.nonzero(near)
    keep = a < b
    a, b = a[keep], b[keep]
    if len(a) == 0:
        return
    corr = -2.0 * _segment_pair_logmean(dp[a, b], ell[a], ell[b])
    K[base + a, base + b] += corr
    K[base + b, base + a] += corr


def _factor(K: np.ndarray):
    """Cholesky with a jitter ladder, then eigen-clipping as a last resort.

    Negative eigenvalues are clipped to zero and the clipped mass (relative
    to the total absolute eigenvalue mass) is reported; factorization fails
    if more than CLIP_BUDGET of the spectrum had to be discarded.
    """
    scale = float(np.max(np.diag(K)))
    n = len(K)
    for jit in (0.0, 1e-12, 1e-10):
        try:
            if jit:
                K[np.diag_indices(n)] += jit * scale
            return np.linalg.cholesky(K), 0.0
        except np.linalg.LinAlgError:
            continue
    w, V = scipy.linalg.eigh(K, overwrite_a=True, check_finite=False)
    clipped = float(np.abs(w[w < 0]).sum() / np.abs(w).sum())
    if clipped > CLIP_BUDGET:
        raise FactorizationError(
            f"covariance indefinite beyond tolerance: clipped mass {clipped:.2e}, "
            f"min eigenvalue {w[0]:.3e} vs max {w[-1]:.3e}")
    np.clip(w, 0.0, None, out=w)
    return V * np.sqrt(w)[None, :], clipped


@dataclass
class ZeroMode:
    """A linear functional a^T h of the field with its covariance profile.

    ``profile`` is Cov(h(.), a^T h), ``variance`` its variance.  These are
    all one needs to project the mode out, pin it, or tilt it.
    """

    weights: np.ndarray
    profile: np.ndarray
    variance: float

    def value(self, fields: np.ndarray) -> np.ndarray:
        return self.weights @ fields

    def project_out(self, fields: np.ndarray) -> np.ndarray:
        """Orthogonal (conditional) removal: h - (a^T h / V) profile."""
        a = self.value(fields)
        return fields - np.outer(self.profile, a / self.variance)

    def pin_constant(self, fields: np.ndarray) -> np.ndarray:
        """Additive-constant pinning for free fields: h - (a^T h) 1."""
        return fields - self.value(fields)[None, :]

    def tilt(self, fields: np.ndarray, tau: float):
        """Mean shift by tau along the mode; returns (fields, IS log-weights)."""
        shifted = fields + (tau / self.variance) * self.profile[:, None]
        a = self.value(shifted)
        logw = -tau * a / self.variance + tau * tau / (2.0 * self.variance)
        return shifted, logw


@dataclass
class Factorization:
    """Sampling-ready covariance of a field on a grid.

    ``var`` is the matrix diagonal, ``tilde`` the regularized kernel diagonal
    in the same modification convention; ``cutoff = var - tilde`` is the pure
    lattice cutoff entering the chaos normalization.  ``bdry_block`` holds
    covariance columns of the boundary nodes (n x n_boundary) for Girsanov
    shifts rooted at boundary nodes.  ``pin_u``/``pin_theta`` record an
    additive-constant modification so off-grid columns can be reconstructed.
    """

    grid: Grid
    kernel: GreenKernel
    L: np.ndarray
    var: np.ndarray
    tilde: np.ndarray
    bdry_block: np.ndarray | None
    clip_mass: float
    modification: str = "none"
    pin_u: np.ndarray | None = None
    pin_theta: float = 0.0

    @property
    def cutoff(self) -> np.ndarray:
        return self.var - self.tilde

    @property
    def free_boundary(self) -> bool:
        return self.kernel.free_boundary

    def sample(self, rng: np.random.Generator, nsamples: int = 1) -> np.ndarray:
        z = rng.standard_normal((self.L.shape[1], nsamples))
        return self.L @ z

    def covariance_apply(self, w: np.ndarray) -> np.ndarray:
        """K w without retaining K (through the factor)."""
        return self.L @ (self.L.T @ w)

    def mode(self, weights: np.ndarray) -> ZeroMode:
        u = self.covariance_apply(weights)
        return ZeroMode(weights=weights, profile=u, variance=float(weights @ u))

    def column(self, node: int) -> np.ndarray:
        """Covariance column of one node, reconstructed from the kernel."""
        grid = self.grid
        idx = np.array([node])
        col = kernel_block(grid, self.kernel, np.arange(grid.n_nodes), idx)[:, 0]
        if self.modification.startswith("pin:"):
            col = col - self.pin_u - self.pin_u[node] + self.pin_theta
        elif self.modification == "linemean":
            raise DomainError("line-mean columns come from bdry_block only")
        return col

    def boundary_column(self, edge: int) -> np.ndarray:
        if self.bdry_block is None:
            raise DomainError("boundary block not retained")
        return self.bdry_block[:, edge]


_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()
_CACHE_LIMIT = 4


def clear_cache():
    with _CACHE_LOCK:
        _CACHE.clear()


def get_factorization(grid: Grid, kernel: GreenKernel, modification: str = "none",
                      rho_weights: np.ndarray | None = None) -> Factorization:
    """Build or fetch the covariance factorization for (grid, kernel, mod).

    modification:
      none            raw kernel matrix (proper fields: Dirichlet, mixed)
      pin:<name>      additive-constant removal against the node functional
                      ``rho_weights`` (free-boundary kernels); the sampled
                      fields then satisfy rho^T h = 0 exactly
      linemean        per-vertical-line mean removal (strip grids)
    """
    if grid.n_nodes > MAX_NODES:
        raise SizeError(f"{grid.n_nodes} nodes exceeds budget {MAX_NODES}")
    key = (grid.name, kernel.name, modification, grid.n_nodes)
    with _CACHE_LOCK:
        if key in _CACHE:
            return _CACHE[key]

    K = assemble_matrix(grid, kernel)
    tilde = regularized_diagonals(grid, kernel)
    pin_u = None
    pin_theta = 0.0
    if modification.startswith("pin:"):
        if rho_weights is None:
            raise DomainError("pinning requires node weights")
        u = K @ rho_weights
        theta = float(rho_weights @ u)
        K -= u[:, None]
        K -= u[None, :]
        K += theta
        tilde = tilde - 2.0 * u + theta
        pin_u, pin_theta = u, theta
    elif modification == "linemean":
        cols = column_index(grid)
        nx = grid.shape[0]
        W = np.zeros((nx, grid.n_nodes))
        bulk_cols = cols[: grid.n_bulk]
        for c in range(nx):
            idx = np.nonzero(bulk_cols == c)[0]
            W[c, idx] = 1.0 / len(idx)
        R = W @ K                                  # (nx, n) line means of rows
        D = R @ W.T                                # (nx, nx)
        d0 = np.diag(K).copy()
        K -= R[cols, :]
        K -= R[cols, :].T
        K += D[np.ix_(cols, cols)]
        tilde = tilde + (np.diag(K) - d0)
    elif modification != "none":
        raise DomainError(f"unknown modification {modification}")

    var = np.diag(K).copy()
    bblock = K[:, grid.n_bulk:].copy() if grid.n_boundary else None
    L, clip = _factor(K)
    del K
    fac = Factorization(grid, kernel, L, var, tilde, bblock, clip,
                        modification, pin_u, pin_theta)
    with _CACHE_LOCK:
        if len(_CACHE) >= _CACHE_LIMIT:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = fac
    return fac


# ---------------------------------------------------------------------------
# node functionals
# ---------------------------------------------------------------------------

def boundary_weights(grid: Grid) -> np.ndarray:
    """Uniform-boundary functional: edge-length weights on boundary nodes."""
    w = np.zeros(grid.n_nodes)
    w[grid.n_bulk:] = grid.boundary_lengths / grid.boundary_lengths.sum()
    return w


def bulk_weights(grid: Grid) -> np.ndarray:
    """Uniform-bulk functional: area weights on bulk nodes."""
    w = np.zeros(grid.n_nodes)
    w[: grid.n_bulk] = grid.bulk_areas / grid.bulk_areas.sum()
    return w


def circle_functional(grid: Grid, center: complex, radius: float,
                      n_nodes: int = 256) -> np.ndarray:
    """Node weights of the interpolated (semi)circle-average functional."""
    pts = _circle_points(grid, center, radius, n_nodes)
    w = np.zeros(grid.n_nodes)
    share = 1.0 / len(pts)
    for p in pts:
        _accumulate_bilinear_weights(grid, complex(p), share, w)
    return w


def _circle_points(grid: Grid, center: complex, radius: float, n_nodes: int):
    semi = grid.domain.kind in ("upper_half_plane", "half_disk")
    arc = np.pi if semi else 2.0 * np.pi
    th = (np.arange(n_nodes) + 0.5) * (arc / n_nodes)
    pts = center + radius * np.exp(1j * th)
    if not np.all(grid.domain.contains(pts, slack=1e-9)):
        raise GeometryError("circle exits the domain")
    return pts


_SLOT_CACHE: dict = {}


def _slot_lookup(grid: Grid):
    key = (grid.name, grid.n_bulk)
    if key not in _SLOT_CACHE:
        _SLOT_CACHE[key] = {int(s): i for i, s in enumerate(grid.bulk_index)}
    return _SLOT_CACHE[key]


def _accumulate_bilinear_weights(grid: Grid, p: complex, w: float, out: np.ndarray):
    ax0, ax1 = grid.axes
    q0, q1 = grid.chart_coords(np.array([p]))
    i = int(np.clip(np.searchsorted(ax0, q0[0]) - 1, 0, len(ax0) - 2))
    j = int(np.clip(np.searchsorted(ax1, q1[0]) - 1, 0, len(ax1) - 2))
    t = float(np.clip((q0[0] - ax0[i]) / (ax0[i + 1] - ax0[i]), 0.0, 1.0))
    u = float(np.clip((q1[0] - ax1[j]) / (ax1[j + 1] - ax1[j]), 0.0, 1.0))
    n1 = len(ax1)
    entries = (((i, j), (1 - t) * (1 - u)), ((i + 1, j), t * (1 - u)),
               ((i, j + 1), (1 - t) * u), ((i + 1, j + 1), t * u))
    if grid.bulk_index is None:
        for (a, b), wt in entries:
            out[a * n1 + b] += w * wt
    else:
        lookup = _slot_lookup(grid)
        missing = 0.0
        for (a, b), wt in entries:
            node = lookup.get(a * n1 + b, -1)
            if node >= 0:
                out[node] += w * wt
            else:
                missing += wt
        if missing > 0:                      # renormalize onto present corners
            for (a, b), wt in entries:
                node = lookup.get(a * n1 + b, -1)
                if node >= 0:
                    out[node] += w * wt * missing / max(1e-12, 1.0 - missing)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass
class GridField:
    """Field values at grid nodes: Gaussian part plus a deterministic part."""

    grid: Grid
    values: np.ndarray
    covariance: Factorization | None
    deterministic_part: np.ndarray | None = None

    def interpolate(self, pts):
        return self.grid.interpolate(self.values, pts)

    def shifted(self, c: float) -> "GridField":
        det = None if self.deterministic_part is None else self.deterministic_part + c
        return GridField(self.grid, self.values + c, self.covariance, det)

    def with_values(self, values, det=None) -> "GridField":
        return GridField(self.grid, values, self.covariance,
                         det if det is not None else self.deterministic_part)


def sample_gff(grid: Grid, bc: str, kernel: GreenKernel, seed: int,
               rho_weights: np.ndarray | None = None, rho_name: str = "rho",
               replica: int = 0) -> GridField:
    """One centered field whose node covariance is the continuum kernel.

    Free-boundary kernels (``bc='neumann'``) require a background functional
    ``rho_weights`` pinning the additive constant; the returned sample
    satisfies ``rho_weights @ values == 0`` exactly.
    """
    if bc == "neumann":
        if rho_weights is None:
            raise DomainError("neumann sampling requires a background functional")
        mod = f"pin:{rho_name}"
    else:
        mod = "none"
    fac = get_factorization(grid, kernel, mod, rho_weights)
    rng = substream(seed, f"gff:{grid.name}:{kernel.name}:{mod}", replica)
    vals = fac.sample(rng, 1)[:, 0]
    if bc == "neumann":
        vals = vals - float(rho_weights @ vals)     # exact discrete pinning
    return GridField(grid, vals, fac, None)


def circle_average(fld: GridField, center: complex, radius: float,
                   n_nodes: int = 128) -> float:
    """Trapezoid average of the interpolated field over a (semi)circle."""
    if radius < 2.0 * _local_spacing(fld.grid, center, radius):
        raise GeometryError("circle radius below twice the local spacing")
    pts = _circle_points(fld.grid, center, radius, max(64, n_nodes))
    return float(np.mean(fld.interpolate(pts)))


def _local_spacing(grid: Grid, center: complex, radius: float) -> float:
    if grid.chart == "logpolar":
        return grid.spacing * max(abs(center) + radius, 1e-12) * 0.5
    return grid.spacing


def radial_angular_decompose(fld: GridField):
    """Split a strip (or half-disk) field into per-line means and the rest.

    Returns (abscissae, radial means, angular GridField).  The angular part
    has zero per-line mean exactly and radial + angular reassembles the field.
    """
    grid = fld.grid
    if grid.chart == "strip":
        cols = column_index(grid)
        nx = grid.shape[0]
        sums = np.zeros(nx)
        counts = np.zeros(nx)
        bulk_cols = cols[: grid.n_bulk]
        np.add.at(sums, bulk_cols, fld.values[: grid.n_bulk])
        np.add.at(counts, bulk_cols, 1.0)
        radial = sums / counts
        angular = fld.values - radial[cols]
        return grid.axes[0], radial, fld.with_values(angular)
    if grid.chart == "logpolar":
        nr, nth = grid.shape
        bulk = fld.values[: grid.n_bulk].reshape(nr, nth)
        radial = bulk.mean(axis=1)
        ang_bulk = (bulk - radial[:, None]).ravel()
        logr = np.log(np.maximum(np.abs(grid.boundary_points), 1e-300))
        ring = np.clip(np.searchsorted(grid.axes[0], logr) - 1, 0, nr - 1)
        ang = np.concatenate([ang_bulk, fld.values[grid.n_bulk:] - radial[ring]])
        return grid.axes[0], radial, fld.with_values(ang)
    raise DomainError("radial/angular decomposition needs a strip or half-disk grid")


# ---------------------------------------------------------------------------
# insertion fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InsertionSet:
    """Bulk (alpha_i, z_i) and boundary (beta_j, s_j) log-singularities."""

    bulk: tuple = ()
    boundary: tuple = ()

    def exponent(self, params: GammaParams) -> float:
        """s = sum alpha_i + sum beta_j / 2 - Q, always recomputed."""
        return params.insertion_exponent([a for a, _ in self.bulk],
                                         [b for b, _ in self.boundary])


def snap_to_node(grid: Grid, z: complex, boundary: bool) -> int:
    pts = grid.boundary_points if boundary else grid.bulk_points
    return int(np.argmin(np.abs(pts - z)))


def insertion_profile(fac: Factorization, ins: InsertionSet) -> np.ndarray:
    """Sum of scaled covariance columns of the snapped insertion nodes.

    A log-singularity of coefficient a at node e contributes a * K[:, e]: the
    covariance column is the discrete Girsanov shift, and its diagonal entry
    is the cell-averaged (clamped-at-half-cell) value at the insertion cell.
    """
    grid = fac.grid
    used = set()
    prof = np.zeros(grid.n_nodes)
    for beta, s in ins.boundary:
        e = snap_to_node(grid, s, boundary=True)
        if ("b", e) in used:
            raise CoincidentInsertions(f"boundary insertions collide at edge {e}")
        used.add(("b", e))
        prof += (0.5 * beta) * fac.boundary_column(e)
    for alpha, z in ins.bulk:
        i = snap_to_node(grid, z, boundary=False)
        if ("i", i) in used:
            raise CoincidentInsertions(f"bulk insertions collide at node {i}")
        used.add(("i", i))
        prof += alpha * fac.column(i)
    return prof


def background_average_term(fac: Factorization, rho_weights: np.ndarray,
                            params: GammaParams) -> np.ndarray:
    """Q m_rho(G(z, .)) against the base (unpinned) kernel, at all nodes."""
    grid = fac.grid
    sup = np.nonzero(rho_weights)[0]
    vals = np.zeros(grid.n_nodes)
    block = max(16, (1 << 22) // max(len(sup), 1))
    for lo in range(0, grid.n_nodes, block):
        rows = np.arange(lo, min(grid.n_nodes, lo + block))
        vals[rows] = kernel_block(grid, fac.kernel, rows, sup) @ rho_weights[sup]
    return params.Q * vals


def build_insertion_field(base: GridField, ins: InsertionSet, kernel: GreenKernel,
                          rho_weights: np.ndarray, params: GammaParams) -> GridField:
    """Add log-singularities and the background term to a free field.

    deterministic part = Q m_rho(G(z,.)) + sum_i alpha_i K^rho[:, z_i]
                         + sum_j (beta_j/2) K^rho[:, s_j]
    """
    fac = base.covariance
    if fac is None:
        raise DomainError("base field carries no covariance")
    det = insertion_profile(fac, ins) + background_average_term(fac, rho_weights, params)
    total_det = det if base.deterministic_part is None else det + base.deterministic_part
    return GridField(base.grid, base.values + det, fac, total_det)
