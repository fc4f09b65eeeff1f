"""Discrete Lipschitz machinery for element-centroid damage fields.

The admissible fields satisfy |d_i - d_{i+1}| <= h_e / ell between adjacent
elements.  For a predicted field that violates the constraint, the lower and
upper cone envelopes (inf- and sup-convolutions with the cone |x - y| / ell)
bracket the constrained minimizer; wherever they coincide the minimizer equals
the prediction, so the expensive constrained solve is only needed on the
intervals where they differ.
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from ._backend import kernels

EQ_TOL = 1e-9  # absolute tolerance (damage units) for "projections are equal"


def is_lipschitz(d: np.ndarray, h_e: float, ell: float, tol: float = 0.0) -> bool:
    """True iff |d_i - d_{i+1}| <= h_e/ell + tol for every adjacent pair."""
    if d.size < 2:
        return True
    return kernels.max_adjacent_jump(d) <= h_e / ell + tol


def project_lower(d_bar: np.ndarray, h_e: float, ell: float) -> np.ndarray:
    """Lower projection: (pi^l d)(i) = min_j (d_j + (h_e/ell) |i - j|)."""
    return kernels.project_lower(np.ascontiguousarray(d_bar, dtype=float), h_e / ell)


def project_upper(d_bar: np.ndarray, h_e: float, ell: float) -> np.ndarray:
    """Upper projection: (pi^u d)(i) = max_j (d_j - (h_e/ell) |i - j|)."""
    return kernels.project_upper(np.ascontiguousarray(d_bar, dtype=float), h_e / ell)


@dataclass(frozen=True)
class ProjectionBounds:
    lower: np.ndarray
    upper: np.ndarray
    intervals: Optional[list[tuple[int, int]]] = dc_field(default=None)


def active_intervals(bounds: ProjectionBounds, eq_tol: float = EQ_TOL) -> list[tuple[int, int]]:
    """Maximal runs where the projections differ, padded by one guard element.

    The guard elements carry the fixed boundary values the constrained solve
    couples to through the chain constraint.  Padded intervals that share an
    element (cores separated by a single equal element) are merged; intervals
    that are merely adjacent stay separate.
    """
    diff = bounds.upper - bounds.lower > eq_tol
    idx = np.flatnonzero(diff)
    if idx.size == 0:
        return []
    n = diff.size
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([idx[0]], idx[breaks + 1]))
    ends = np.concatenate((idx[breaks], [idx[-1]]))
    out: list[tuple[int, int]] = []
    for a, b in zip(starts, ends):
        a = max(0, int(a) - 1)
        b = min(n - 1, int(b) + 1)
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


def compute_bounds(d_bar: np.ndarray, h_e: float, ell: float,
                   eq_tol: float = EQ_TOL) -> ProjectionBounds:
    """Both projections plus the active intervals in one call."""
    lower = project_lower(d_bar, h_e, ell)
    upper = project_upper(d_bar, h_e, ell)
    bounds = ProjectionBounds(lower, upper)
    return ProjectionBounds(lower, upper, active_intervals(bounds, eq_tol))
