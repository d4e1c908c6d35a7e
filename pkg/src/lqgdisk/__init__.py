"""Simulation library for the unit boundary length quantum disk.

Two constructions of the same random geometry are implemented side by side:
a log-singularity field on the disk weighted by a power of its boundary
measure, and a Bessel-excursion strip field conditioned on unit boundary
length.  A shared half-disk limiting procedure connects them, and the harness
runs weighted two-sample tests to check that all routes produce the same law.

Modules
-------
geometry        planar domains, closed-form conformal maps, quantum change of
                coordinates and measure pushforward
green           closed-form Green kernels, background-measure modifications,
                regularized diagonals
lattice         node/edge discretizations of the disk, half-disk and strip
gff             exact-covariance Gaussian free field sampling, circle
                averages, orthogonal decompositions, insertion fields
gmc             bulk/boundary multiplicative-chaos measures and mass queries
bessel          radial excursion sampling and the strip-field assembly
constructions   the disk samplers (direct and limiting) emitting DiskSamples
harness         experiment orchestration, weighted KS testing, persistence
cli             command line entry points
"""

from .geometry import GammaParams

__all__ = ["GammaParams"]
__version__ = "0.1.0"
