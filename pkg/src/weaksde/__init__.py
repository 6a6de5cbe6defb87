"""Weak second-order sampling, Hermite-corrected transition densities, and
contrast estimation for elliptic and hypo-elliptic SDEs."""

from weaksde.variates import (
    SeededRng,
    VariateBundle,
    draw_elliptic,
    draw_hypo,
    moment_oracle,
)

__version__ = "0.1.0"
