"""Uniform 1D finite-element mesh.

Displacement degrees of freedom live at the nodes, damage at the element
centroids (one integration point per element; exact for the linear-element
stiffness integrals used here).  Meshes are immutable and safe to share
between concurrent simulation runs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Mesh1D:
    length: float
    n_elements: int
    h_e: float
    nodes: np.ndarray      # shape (n_elements + 1,)
    centroids: np.ndarray  # shape (n_elements,)

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1


def build_uniform_mesh(length: float, n_elements: int) -> Mesh1D:
    """Mesh [0, length] with ``n_elements`` equal linear elements."""
    if not length > 0.0:
        raise ConfigurationError(f"bar length must be positive, got {length}")
    if n_elements < 1:
        raise ConfigurationError(f"need at least one element, got {n_elements}")
    nodes = np.linspace(0.0, length, n_elements + 1)
    centroids = 0.5 * (nodes[:-1] + nodes[1:])
    nodes.flags.writeable = False
    centroids.flags.writeable = False
    return Mesh1D(float(length), int(n_elements), float(length) / n_elements,
                  nodes, centroids)


def elements_for_size_ratio(length: float, ell: float, ratio: float) -> int:
    """Element count giving h_e = ell / ratio (rounded to the nearest integer)."""
    if not (ell > 0.0 and ratio > 0.0):
        raise ConfigurationError("regularization length and mesh ratio must be positive")
    return max(1, round(length / (ell / ratio)))


def element_strain(u: np.ndarray, e: int, mesh: Mesh1D) -> float:
    """Strain of element ``e``: (u[e+1] - u[e]) / h_e."""
    if not 0 <= e < mesh.n_elements:
        raise IndexError(f"element index {e} out of range [0, {mesh.n_elements})")
    return (u[e + 1] - u[e]) / mesh.h_e


def strain_field(u: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """All element strains at once."""
    return (u[1:] - u[:-1]) / mesh.h_e
