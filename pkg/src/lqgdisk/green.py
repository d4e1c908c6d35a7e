"""Closed-form Green kernels and their background-measure modifications.

Kernels shipped (all free/Neumann parts fixed by the mean-zero-on-boundary
convention of the continuum problem):

 * unit disk, free boundary:      G(x,y) = -log(|x-y| |1-x conj(y)|)
 * unit disk, Dirichlet:          G(x,y) = -log|x-y| + log|1-x conj(y)|
 * upper half-plane, free:        G(x,y) = -log(|x-y| |x-conj(y)|)
 * half-disk R*D cap H, mixed:    reflection kernel, Dirichlet on the
   semicircle and free on the diameter; equals the half-plane kernel
   + log(1/eps) + o(1) with eps = 1/R^2
 * strip R x [0,pi], free:        pullback of the half-plane kernel under
   w -> -exp(-w) (defined modulo an additive constant)

``modified_kernel`` subtracts rho-averages so the kernel integrates to zero
against a background probability measure in each argument.  Quadratures
against curve-supported measures split off the logarithmic singularity and
integrate it in closed form, which keeps plain trapezoid rules at 1e-6
accuracy near and on the support.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DiagonalError, DomainError, QuadratureError
from .geometry import Domain, UNIT_DISK, UPPER_HALF_PLANE, STRIP, half_disk

# mean of log|u-v| over independent uniform points of the unit square (a
# lattice cell), from an adaptive double quadrature; checked by test_green.py.
# The 1-d analogue over [0,1]^2 is exactly -3/2.
SQUARE_LOG_MEAN = -0.8050867219500857

_EPS_DIAG = 1e-14


def _cabs(z):
    return np.abs(np.asarray(z, dtype=complex))


def _check_distinct(x, y, name):
    if np.any(_cabs(np.asarray(x) - np.asarray(y)) < _EPS_DIAG):
        raise DiagonalError(f"{name} evaluated on the diagonal")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _green_disk_raw(x, y):
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return -np.log(np.abs(x - y)) - np.log(np.abs(1.0 - x * np.conj(y)))


def green_disk(x, y):
    """Free-boundary disk kernel -log(|x-y| |1-x conj(y)|)."""
    _check_distinct(x, y, "green_disk")
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return -np.log(np.abs(x - y)) - np.log(np.abs(1.0 - x * np.conj(y)))


def _green_disk_dirichlet_raw(x, y):
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return np.log(np.abs(1.0 - x * np.conj(y))) - np.log(np.abs(x - y))


def green_disk_dirichlet(x, y):
    """Dirichlet disk kernel log(|1-x conj(y)| / |x-y|)."""
    _check_distinct(x, y, "green_disk_dirichlet")
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return np.log(np.abs(1.0 - x * np.conj(y))) - np.log(np.abs(x - y))


def _green_halfplane_raw(x, y):
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return -np.log(np.abs(x - y)) - np.log(np.abs(x - np.conj(y)))


def green_halfplane(x, y):
    """Free-boundary half-plane kernel -log(|x-y| |x-conj(y)|)."""
    _check_distinct(x, y, "green_halfplane")
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return -np.log(np.abs(x - y)) - np.log(np.abs(x - np.conj(y)))


def green_halfdisk(x, y, eps):
    """Mixed-boundary kernel on (1/sqrt(eps)) D cap H via reflection.

    Dirichlet on the semicircle |z| = 1/sqrt(eps), free on the diameter.
    Vanishes on the semicircle; symmetric; equals
    green_halfplane(x, y) - log(eps) + r_eps(x, y) with r_eps -> 0 locally.
    """
    _check_distinct(x, y, "green_halfdisk")
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    inv_eps = 1.0 / eps
    val = (-np.log(np.abs(x - y)) - np.log(np.abs(x - np.conj(y)))
           + np.log(np.abs(inv_eps - x * y)) + np.log(np.abs(inv_eps - x * np.conj(y)))
           + np.log(eps))
    return val


def green_strip(w1, w2):
    """Free-boundary strip kernel (modulo additive constant)."""
    _check_distinct(w1, w2, "green_strip")
    a = np.exp(-np.asarray(w1, dtype=complex))
    b = np.exp(-np.asarray(w2, dtype=complex))
    return -np.log(np.abs(a - b)) - np.log(np.abs(a - np.conj(b)))


# ---------------------------------------------------------------------------
# kernel objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GreenKernel:
    """A Green kernel together with its regularized diagonals.

    ``bulk_diagonal(z)``     = lim_{w->z} G(z,w) + log|z-w|          (z interior)
    ``boundary_diagonal(z)`` = lim_{w->z} G(z,w) + 2 log|z-w|        (z on the
    free boundary, where the kernel doubles its log singularity).
    ``free_boundary`` flags whether a boundary measure exists;
    ``evaluate_raw`` skips the diagonal check (matrix assembly overwrites
    diagonals afterwards).
    """

    name: str
    domain: Domain
    bc: str
    evaluate: Callable
    bulk_diagonal: Callable
    boundary_diagonal: Callable | None
    free_boundary: bool
    evaluate_raw: Callable | None = None

    def raw(self, x, y):
        fn = self.evaluate_raw if self.evaluate_raw is not None else self.evaluate
        with np.errstate(divide="ignore", invalid="ignore"):
            return fn(x, y)

    def __hash__(self):
        return hash((self.name, self.domain.kind, self.bc))


def disk_neumann() -> GreenKernel:
    def bulk_diag(z):
        z = np.asarray(z, dtype=complex)
        return -np.log(1.0 - np.abs(z) ** 2)

    def bdry_diag(z):
        return np.zeros(np.shape(np.asarray(z)), dtype=float)

    return GreenKernel("disk_neumann", UNIT_DISK, "neumann",
                       green_disk, bulk_diag, bdry_diag, True,
                       evaluate_raw=_green_disk_raw)


def disk_dirichlet() -> GreenKernel:
    def bulk_diag(z):
        z = np.asarray(z, dtype=complex)
        return np.log(1.0 - np.abs(z) ** 2)

    return GreenKernel("disk_dirichlet", UNIT_DISK, "dirichlet",
                       green_disk_dirichlet, bulk_diag, None, False,
                       evaluate_raw=_green_disk_dirichlet_raw)


def halfplane_neumann() -> GreenKernel:
    def bulk_diag(z):
        z = np.asarray(z, dtype=complex)
        return -np.log(2.0 * z.imag)

    def bdry_diag(z):
        return np.zeros(np.shape(np.asarray(z)), dtype=float)

    return GreenKernel("halfplane_neumann", UPPER_HALF_PLANE, "neumann",
                       green_halfplane, bulk_diag, bdry_diag, True,
                       evaluate_raw=_green_halfplane_raw)


def halfdisk_mixed(eps: float) -> GreenKernel:
    """Half-disk of radius 1/sqrt(eps): Dirichlet cap, free diameter."""
    R = 1.0 / np.sqrt(eps)
    inv_eps = 1.0 / eps

    def ev(x, y):
        return green_halfdisk(x, y, eps)

    def ev_raw(x, y):
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        return (-np.log(np.abs(x - y)) - np.log(np.abs(x - np.conj(y)))
                + np.log(np.abs(inv_eps - x * y))
                + np.log(np.abs(inv_eps - x * np.conj(y))) + np.log(eps))

    def bulk_diag(z):
        z = np.asarray(z, dtype=complex)
        return (-np.log(2.0 * z.imag) + np.log(np.abs(inv_eps - z * z))
                + np.log(inv_eps - np.abs(z) ** 2) + np.log(eps))

    def bdry_diag(z):
        x = np.real(np.asarray(z, dtype=complex))
        return 2.0 * np.log(inv_eps - x * x) + np.log(eps)

    return GreenKernel(f"halfdisk_mixed(eps={eps:g})", half_disk(R), "mixed",
                       ev, bulk_diag, bdry_diag, True, evaluate_raw=ev_raw)


def strip_neumann() -> GreenKernel:
    def bulk_diag(w):
        w = np.asarray(w, dtype=complex)
        return 2.0 * w.real - np.log(2.0 * np.sin(w.imag))

    def bdry_diag(w):
        w = np.asarray(w, dtype=complex)
        return 2.0 * w.real

    def ev_raw(w1, w2):
        a = np.exp(-np.asarray(w1, dtype=complex))
        b = np.exp(-np.asarray(w2, dtype=complex))
        return -np.log(np.abs(a - b)) - np.log(np.abs(a - np.conj(b)))

    return GreenKernel("strip_neumann", STRIP, "neumann",
                       green_strip, bulk_diag, bdry_diag, True, evaluate_raw=ev_raw)


# ---------------------------------------------------------------------------
# background measures and quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BackgroundMeasure:
    """Probability measure fixing the additive constant of a free field.

    Supported either on a curve (``on_curve=True``; nodes sit at arclength
    parameters ``params`` of ``curve``, equispaced with ``spacing``, and the
    log-singularity exponent of the kernel along the curve is
    ``sing_exponent``) or on grid nodes (``on_curve=False``).
    """

    name: str
    domain: Domain
    points: np.ndarray
    weights: np.ndarray
    on_curve: bool = True
    spacing: float = 0.0
    sing_exponent: float = 1.0
    curve: Callable | None = None
    params: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.points):
            raise QuadratureError("weights and points must align")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise QuadratureError("weights must be nonnegative and sum to 1")

    def __hash__(self):
        return hash((self.name, len(self.points)))


def uniform_boundary_disk(n: int = 1024) -> BackgroundMeasure:
    dt = 2.0 * np.pi / n
    t = (np.arange(n) + 0.5) * dt
    curve = lambda s: np.exp(1j * np.asarray(s))
    return BackgroundMeasure("uniform_boundary_disk", UNIT_DISK, curve(t),
                             np.full(n, 1.0 / n), on_curve=True, spacing=dt,
                             sing_exponent=2.0, curve=curve, params=t)


def uniform_semicircle(radius: float = 1.0, domain: Domain | None = None,
                       n: int = 512) -> BackgroundMeasure:
    """Uniform measure on the semicircle |z| = radius in the upper half-plane."""
    dt = radius * np.pi / n
    t = (np.arange(n) + 0.5) * dt
    curve = lambda s: radius * np.exp(1j * np.asarray(s) / radius)
    dom = domain if domain is not None else UPPER_HALF_PLANE
    return BackgroundMeasure(f"uniform_semicircle(r={radius:g})", dom, curve(t),
                             np.full(n, 1.0 / n), on_curve=True, spacing=dt,
                             sing_exponent=1.0, curve=curve, params=t)


def uniform_bulk_disk(n_side: int = 64) -> BackgroundMeasure:
    """Uniform probability measure on the disk, discretized on a lattice."""
    h = 2.0 / n_side
    ax = -1.0 + (np.arange(n_side) + 0.5) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    z = (X + 1j * Y).ravel()
    keep = np.abs(z) < 1.0 - 1e-9
    z = z[keep]
    w = np.full(len(z), 1.0 / len(z))
    return BackgroundMeasure("uniform_bulk_disk", UNIT_DISK, z, w,
                             on_curve=False, spacing=h, sing_exponent=1.0)


def _log_chord_integral(d: float, a: float, b: float) -> float:
    """Integral of log(sqrt(d^2 + u^2)) du over [a, b] (d may be 0)."""

    def anti(u):
        if d < 1e-300:
            return u * np.log(abs(u)) - u if u != 0.0 else 0.0
        return 0.5 * u * np.log(d * d + u * u) - u + d * np.arctan(u / d)

    return anti(b) - anti(a)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def measure_average(kernel: GreenKernel, rho: BackgroundMeasure, targets) -> np.ndarray:
    """m_rho(G(z, .)) for each target z, with singularity splitting.

    Quadrature cells whose curve segment passes near z are integrated as
    [smooth remainder by 8-point Gauss-Legendre] + [closed-form integral of
    the -c log(chord) singularity], where c is the kernel's log coefficient
    along the support.  Cells far from z use the plain node-weight rule.
    """
    z = np.atleast_1d(np.asarray(targets, dtype=complex))
    pts = rho.points
    w = rho.weights
    out = np.empty(len(z), dtype=float)
    c = rho.sing_exponent if rho.on_curve else 1.0
    near_radius = 6.0 * rho.spacing if rho.on_curve else 0.5 * rho.spacing
    mid_radius = np.inf if rho.on_curve else near_radius

    for i, zi in enumerate(z):
        d = np.abs(zi - pts)
        near = d < near_radius
        mid = (~near) & (d < mid_radius)
        far = ~(near | mid)
        acc = float(np.dot(w[far], kernel.evaluate(zi, pts[far]))) if np.any(far) else 0.0
        if np.any(mid):
            # per-cell Gauss-Legendre: kills the O(spacing) midpoint error of
            # the steep but regular log tail just outside the singular band
            ks = np.nonzero(mid)[0]
            tq = rho.params[ks][:, None] + 0.5 * rho.spacing * _GL_NODES[None, :]
            yq = rho.curve(tq)
            vals = kernel.evaluate(zi, yq)
            acc += float(np.dot(w[ks], 0.5 * vals @ _GL_WEIGHTS))
        for k in np.nonzero(near)[0]:
            if rho.on_curve and rho.curve is not None:
                acc += w[k] * _near_cell_average(kernel, rho, zi, k, c)
            else:
                acc += w[k] * _self_cell_value(kernel, rho, zi, pts[k], d[k], c)
        out[i] = acc
    return out if np.ndim(targets) else float(out[0])


def _near_cell_average(kernel: GreenKernel, rho: BackgroundMeasure,
                       zi: complex, k: int, c: float) -> float:
    """Average of G(zi, y(t)) over quadrature cell k, singularity split off."""
    half = 0.5 * rho.spacing
    t0 = rho.params[k]
    # closest point of the cell chord in arclength coordinates
    yk = rho.points[k]
    tang = (rho.curve(t0 + 1e-6) - rho.curve(t0 - 1e-6)) / 2e-6
    tang /= abs(tang)
    s = float(np.real(np.conj(tang) * (zi - yk)))       # along-curve offset
    dist = abs(float(np.imag(np.conj(tang) * (zi - yk))))
    # smooth remainder G + c log(chord) by Gauss-Legendre on the cell
    tq = t0 + half * _GL_NODES
    yq = rho.curve(tq)
    dq = np.abs(zi - yq)
    chord = np.hypot(dist, tq - (t0 + s))
    if np.any(dq < 1e-13):
        diag = (kernel.boundary_diagonal(zi) if c == 2.0 else kernel.bulk_diagonal(zi))
        gvals = np.where(dq < 1e-13, diag,
                         kernel.evaluate(zi, np.where(dq < 1e-13, yq + 1e-9, yq))
                         + c * np.log(np.maximum(dq, 1e-13)))
        smooth = gvals + c * np.log(np.maximum(chord, 1e-300)) - c * np.log(np.maximum(dq, 1e-13))
        smooth_avg = 0.5 * float(np.dot(_GL_WEIGHTS, smooth))
    else:
        vals = kernel.evaluate(zi, yq) + c * np.log(chord)
        smooth_avg = 0.5 * float(np.dot(_GL_WEIGHTS, vals))
    log_avg = -c * _log_chord_integral(dist, -half - s, half - s) / rho.spacing
    return smooth_avg + log_avg


def _self_cell_value(kernel: GreenKernel, rho: BackgroundMeasure,
                     zi: complex, yk: complex, dk: float, c: float) -> float:
    """Node value for grid-supported measures, regularized on the self cell."""
    if dk >= _EPS_DIAG:
        return float(kernel.evaluate(zi, yk))
    smooth = float(kernel.bulk_diagonal(zi))
    return smooth - c * (np.log(rho.spacing) + SQUARE_LOG_MEAN)


def measure_double_average(kernel: GreenKernel, rho: BackgroundMeasure) -> float:
    """theta_rho: the double rho-average of the kernel."""
    vals = measure_average(kernel, rho, rho.points)
    return float(np.dot(rho.weights, vals))


@dataclass(frozen=True)
class ModifiedKernel:
    """G^rho(x,y) = G(x,y) - m_rho(G(x,.)) - m_rho(G(.,y)) + theta_rho."""

    base: GreenKernel
    rho: BackgroundMeasure
    theta: float

    def average(self, targets):
        return measure_average(self.base, self.rho, targets)

    def evaluate(self, x, y):
        g = self.base.evaluate(x, y)
        mx = self.average(x)
        my = self.average(y)
        return g - mx - my + self.theta

    def bulk_diagonal(self, z):
        return self.base.bulk_diagonal(z) - 2.0 * self.average(z) + self.theta

    def boundary_diagonal(self, z):
        if self.base.boundary_diagonal is None:
            raise DomainError("kernel has no free boundary")
        return self.base.boundary_diagonal(z) - 2.0 * self.average(z) + self.theta


def modified_kernel(kernel: GreenKernel, rho: BackgroundMeasure) -> ModifiedKernel:
    if rho.domain.kind != kernel.domain.kind:
        raise DomainError(
            f"measure on {rho.domain.kind} incompatible with kernel on {kernel.domain.kind}")
    return ModifiedKernel(kernel, rho, measure_double_average(kernel, rho))


def green_rho(kernel: GreenKernel, rho: BackgroundMeasure, x, y):
    """Pointwise rho-modified kernel (convenience wrapper)."""
    return modified_kernel(kernel, rho).evaluate(x, y)
