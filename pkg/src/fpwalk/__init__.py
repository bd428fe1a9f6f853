"""fpwalk: exact first-passage and ladder computations for lattice random walks.

The package computes, at desk scale and with quantified error, the joint law
of a lattice random walk and its one-sided exit time, the bivariate ladder
structure (epochs and heights, renewal functions), the limiting stable
objects (densities, meanders, passage densities), and convergence diagnostics
for the asymptotic regimes of the first-passage law.
"""

from . import steps, exact, ladder, stable, regimes, mc, cli, errors  # noqa: F401

__version__ = "0.1.0"
