"""Stochastic max-plus dynamics lab.

Library layout:

- :mod:`mplimit.core` -- exact max-plus algebra and the projective quotient
- :mod:`mplimit.spectral` -- cycle means, critical graph, power periodicity
- :mod:`mplimit.engine` -- random operator laws, trajectories, coupling,
  exact stationary sampling
- :mod:`mplimit.semigroup` -- exhaustive product exploration and
  degeneracy / lattice certificates
- :mod:`mplimit.limits` -- Monte Carlo estimators for growth rate,
  variance, CLT/Berry-Esseen, local limit, renewal sums, and large
  deviations
- :mod:`mplimit.cli` -- command-line harness emitting CSV tables and
  matplotlib figures
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    NEG_INF,
    MpMatrix,
    ProjVec,
    TopicalFunctional,
    PHI_MAX,
    PHI_MIN,
    phi_coord,
    mat_mul,
    mat_vec,
    mat_power,
    project,
    proj_metric,
    proj_norm,
    is_rank_one,
    cocycle_increment,
    decompose,
    reconstruct,
)
