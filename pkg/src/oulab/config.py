"""Tolerance profiles shared by every numerical decision in the package."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

ENV_PROFILE = "OULAB_TOL_PROFILE"


@dataclass(frozen=True)
class Tolerances:
    """All thresholds in one record.

    rank:        singular values below ``rank * sigma_max * max(rows, cols)`` count as zero
    membership:  ``y`` lies in range(B) iff the least-squares residual is
                 at most ``membership * (1 + |y|)``
    sym:         relative defect accepted for symmetry / negativity checks
    lyap:        relative Frobenius residual accepted from the Lyapunov solver
    quad:        relative Frobenius change that stops panel doubling
    normal:      normality defect ``|aa^T - a^Ta|_F <= normal * |a|_F^2``
    infinity:    constants above this are reported as +inf
    expm_cond:   eigenvector condition number above which expm uses Pade
    """

    rank: float = 1e-10
    membership: float = 1e-8
    sym: float = 1e-9
    lyap: float = 1e-10
    quad: float = 1e-9
    normal: float = 1e-8
    infinity: float = 1e12
    expm_cond: float = 1e6
    max_doublings: int = 14
    range_grid: int = 720

    def updated(self, **overrides) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown tolerance fields: {sorted(unknown)}")
        return replace(self, **overrides)


PROFILES = {
    "default": Tolerances(),
    "strict": Tolerances(rank=1e-12, membership=1e-10, sym=1e-11, lyap=1e-12, quad=1e-11),
}


def get_profile(name: str | None = None) -> Tolerances:
    """Return a named profile; ``None`` consults ``$OULAB_TOL_PROFILE``."""
    if name is None:
        name = os.environ.get(ENV_PROFILE, "default")
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown tolerance profile {name!r}; choose from {sorted(PROFILES)}") from None


DEFAULT = PROFILES["default"]
