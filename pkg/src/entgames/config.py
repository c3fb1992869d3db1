"""Central numeric tolerances.

Functions take an optional ``tol`` argument where a caller may want to
override a single check; everything else reads the module-level defaults
below.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12       # relative deviation |M - M*| allowed before symmetrizing
    unit_norm: float = 1e-12       # deviation of state norms from 1
    mu_sum: float = 1e-9           # |sum mu - 1| for question distributions
    psd_clamp: float = 1e-10       # eigenvalues in [-psd_clamp, 0) are treated as 0
    psd_raise: float = 1e-6        # eigenvalues below -psd_raise are an error
    rank_rel: float = 1e-9         # relative cutoff for support / pseudo-inverse
    reconstruction: float = 1e-9   # decomposition round-trip checks
    povm_sum: float = 1e-8         # |sum_a E_a - Id| for complete measurements
    sweep_monotone: float = 1e-10  # allowed per-sweep decrease in alternating ascent
    value_range: float = 1e-9      # values may stray this far outside [0, 1]


TOL = Tolerances()
