"""Planar domains, closed-form conformal maps, and quantum coordinate changes.

Only the handful of maps the constructions need are shipped: the Mobius
exchange between the unit disk and the upper half-plane, the log map between
the half-plane and the horizontal strip, half-plane affine maps, disk
rotations, and their compositions.  Every map carries forward/inverse
evaluation and ``log_abs_derivative`` so fields can be transported with the
rule  h -> h o psi + Q log|psi'|  and measures by mass-preserving pushforward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainMismatch, PoleError

_TOL = 1e-12


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """A planar domain from the small catalogue the samplers use.

    kind is one of ``unit_disk``, ``upper_half_plane``, ``strip``
    (R x [0, pi]), ``half_disk`` (R*D intersected with H, radius > 0) or
    ``half_strip`` ((a, inf) x [0, pi]).
    """

    kind: str
    radius: float = 1.0     # half_disk only
    left: float = 0.0       # half_strip only

    def __post_init__(self):
        kinds = ("unit_disk", "upper_half_plane", "strip", "half_disk", "half_strip")
        if self.kind not in kinds:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "half_disk" and not self.radius > 0:
            raise ValueError("half disk radius must be positive")
        if self.kind == "half_strip" and not np.isfinite(self.left):
            raise ValueError("half strip left edge must be finite")

    def contains(self, z, slack: float = 0.0):
        """Boolean mask for points in the open domain (slack loosens edges)."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "unit_disk":
            return np.abs(z) < 1.0 + slack
        if self.kind == "upper_half_plane":
            return z.imag > -slack
        if self.kind == "strip":
            return (z.imag > -slack) & (z.imag < np.pi + slack)
        if self.kind == "half_disk":
            return (z.imag > -slack) & (np.abs(z) < self.radius + slack)
        return (z.imag > -slack) & (z.imag < np.pi + slack) & (z.real > self.left - slack)


UNIT_DISK = Domain("unit_disk")
UPPER_HALF_PLANE = Domain("upper_half_plane")
STRIP = Domain("strip")


def half_disk(radius: float) -> Domain:
    return Domain("half_disk", radius=float(radius))


def disk_angle(z) -> np.ndarray:
    """Arclength parameter of a boundary point of the unit disk, in [0, 2pi)."""
    return np.mod(np.angle(np.asarray(z, dtype=complex)), 2.0 * np.pi)


# ---------------------------------------------------------------------------
# gamma parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaParams:
    """Coupling constant gamma in (0,2) and the background charge Q."""

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 2.0:
            raise ValueError(f"gamma must lie in (0,2), got {self.gamma}")

    @property
    def Q(self) -> float:
        g = self.gamma
        return g / 2.0 + 2.0 / g

    def insertion_exponent(self, bulk_alphas, boundary_betas) -> float:
        """s = sum(alpha_i) + sum(beta_j)/2 - Q, recomputed from scratch."""
        return float(sum(bulk_alphas) + 0.5 * sum(boundary_betas) - self.Q)


# ---------------------------------------------------------------------------
# conformal maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConformalMap:
    """Closed-form conformal bijection with derivative information.

    ``forward`` maps the source domain onto the target domain;
    ``log_abs_derivative`` is log|forward'|, evaluated on the source.
    """

    name: str
    source: Domain
    target: Domain
    forward: Callable = field(repr=False)
    inverse: Callable = field(repr=False)
    log_abs_derivative: Callable = field(repr=False)

    def inverted(self) -> "ConformalMap":
        fwd, inv, lad = self.forward, self.inverse, self.log_abs_derivative

        def lad_inv(z):
            return -lad(inv(z))

        return ConformalMap(f"{self.name}^-1", self.target, self.source, inv, fwd, lad_inv)


def compose(outer: ConformalMap, inner: ConformalMap) -> ConformalMap:
    """Composition outer o inner (apply inner first)."""

    def fwd(z):
        return outer.forward(inner.forward(z))

    def inv(z):
        return inner.inverse(outer.inverse(z))

    def lad(z):
        return inner.log_abs_derivative(z) + outer.log_abs_derivative(inner.forward(z))

    return ConformalMap(f"{outer.name}o{inner.name}", inner.source, outer.target, fwd, inv, lad)


def _check_pole(z, pole, name):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z - pole) < _TOL):
        raise PoleError(f"{name} evaluated at pole {pole}")


def identity_map(domain: Domain) -> ConformalMap:
    return ConformalMap(
        "id", domain, domain,
        lambda z: np.asarray(z, dtype=complex),
        lambda z: np.asarray(z, dtype=complex),
        lambda z: np.zeros_like(np.asarray(z, dtype=float)),
    )


def halfplane_to_disk() -> ConformalMap:
    """phi(z) = (z - i)/(z + i), with inverse phi^{-1}(z) = i(1+z)/(1-z).

    Sends (0, 1, inf) on the real line to (-1, -i, 1) on the circle.
    """

    def fwd(z):
        z = np.asarray(z, dtype=complex)
        _check_pole(z, -1j, "phi")
        return (z - 1j) / (z + 1j)

    def inv(z):
        z = np.asarray(z, dtype=complex)
        _check_pole(z, 1.0, "phi^-1")
        return 1j * (1.0 + z) / (1.0 - z)

    def lad(z):
        z = np.asarray(z, dtype=complex)
        return np.log(2.0) - 2.0 * np.log(np.abs(z + 1j))

    return ConformalMap("phi", UPPER_HALF_PLANE, UNIT_DISK, fwd, inv, lad)


def mobius_disk_halfplane(z, direction: str):
    """Evaluate the disk/half-plane Mobius exchange pointwise.

    ``fwd`` applies phi (half-plane to disk), ``inv`` applies phi^{-1}.
    """
    m = halfplane_to_disk()
    if direction == "fwd":
        return m.forward(z)
    if direction == "inv":
        return m.inverse(z)
    raise ValueError("direction must be 'fwd' or 'inv'")


def halfplane_to_strip() -> ConformalMap:
    """psi(z) = i pi - log z from the half-plane onto the strip R x (0, pi).

    The boundary ray (0, inf) goes to the top edge and (-inf, 0) to the
    bottom edge; the marked points 0 and inf go to +inf and -inf.
    """

    def fwd(z):
        z = np.asarray(z, dtype=complex)
        _check_pole(z, 0.0, "psi")
        return 1j * np.pi - np.log(z)

    def inv(w):
        w = np.asarray(w, dtype=complex)
        return -np.exp(-w)

    def lad(z):
        z = np.asarray(z, dtype=complex)
        return -np.log(np.abs(z))

    return ConformalMap("psi", UPPER_HALF_PLANE, STRIP, fwd, inv, lad)


def strip_map(z, direction: str):
    """Pointwise half-plane/strip log map (fwd: H -> S, inv: S -> H)."""
    m = halfplane_to_strip()
    if direction == "fwd":
        return m.forward(z)
    if direction == "inv":
        return m.inverse(z)
    raise ValueError("direction must be 'fwd' or 'inv'")


def strip_to_halfplane_exp() -> ConformalMap:
    """E(w) = e^w, sending (-inf, +inf) to (0, inf) and the bottom edge to (0, inf)."""

    def fwd(w):
        return np.exp(np.asarray(w, dtype=complex))

    def inv(z):
        z = np.asarray(z, dtype=complex)
        _check_pole(z, 0.0, "log")
        return np.log(z)

    def lad(w):
        return np.real(np.asarray(w, dtype=complex))

    return ConformalMap("exp", STRIP, UPPER_HALF_PLANE, fwd, inv, lad)


def halfplane_affine(a: float, b: float = 0.0,
                     source: Domain = UPPER_HALF_PLANE,
                     target: Domain | None = None) -> ConformalMap:
    """z -> a z + b with a > 0 (automorphism of the half-plane)."""
    if not a > 0:
        raise ValueError("affine half-plane maps need positive slope")
    tgt = target if target is not None else source

    def fwd(z):
        return a * np.asarray(z, dtype=complex) + b

    def inv(z):
        return (np.asarray(z, dtype=complex) - b) / a

    def lad(z):
        return np.full(np.shape(np.asarray(z)), np.log(a), dtype=float)

    return ConformalMap(f"affine({a},{b})", source, tgt, fwd, inv, lad)


def disk_rotation(phase: complex) -> ConformalMap:
    """z -> phase * z with |phase| = 1."""
    phase = complex(phase)
    if abs(abs(phase) - 1.0) > 1e-12:
        raise ValueError("rotation phase must be unimodular")

    def fwd(z):
        return phase * np.asarray(z, dtype=complex)

    def inv(z):
        return np.asarray(z, dtype=complex) / phase

    def lad(z):
        return np.zeros(np.shape(np.asarray(z)), dtype=float)

    return ConformalMap(f"rot({phase})", UNIT_DISK, UNIT_DISK, fwd, inv, lad)


def scaling_map(a: float, source: Domain, target: Domain) -> ConformalMap:
    """z -> a z between half-plane-like domains, a > 0."""
    return halfplane_affine(a, 0.0, source, target)


# ---------------------------------------------------------------------------
# quantum change of coordinates and pushforward
# ---------------------------------------------------------------------------

def change_of_coordinates(fld, cmap: ConformalMap, params: GammaParams, target_grid):
    """Transport a field: returns  h o psi + Q log|psi'|  on ``target_grid``.

    ``fld`` lives on the map's target domain, ``target_grid`` on its source;
    values are obtained by interpolation in the grid's chart.
    """
    from .gff import GridField

    if fld.grid.domain.kind != cmap.target.kind:
        raise DomainMismatch(
            f"field on {fld.grid.domain.kind}, map targets {cmap.target.kind}")
    if target_grid.domain.kind != cmap.source.kind:
        raise DomainMismatch(
            f"grid on {target_grid.domain.kind}, map source is {cmap.source.kind}")
    pts = target_grid.all_points()
    vals = fld.interpolate(cmap.forward(pts)) + params.Q * cmap.log_abs_derivative(pts)
    return GridField(grid=target_grid, values=vals, covariance=None,
                     deterministic_part=None)


def pushforward_measure(measure, cmap: ConformalMap):
    """Move measure atoms through the map; masses are carried unchanged."""
    if measure.domain.kind != cmap.source.kind:
        raise DomainMismatch(
            f"measure on {measure.domain.kind}, map source is {cmap.source.kind}")
    return measure.moved(cmap.forward(measure.bulk_points),
                         cmap.forward(measure.boundary_points),
                         domain=cmap.target)
