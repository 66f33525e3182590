"""Finite-difference Ambrosio-Tortorelli energies on square lattices:
evaluation, alternating minimization for segmentation, and the lattice
cell problem for the anisotropic surface density."""

from .cell import (CellSpec, Channel, LatticePath, are_disjoint, c_ell_closed_form, c_ell_numeric,
                   cell_energy, flat_channel, is_strong_path, nu_from_angle, regime_report,
                   solve_cell)
from .energy import (EnergyParams, PiecewiseFn1D, bulk_energy, continuum_at_1d, fidelity_energy,
                     ms_energy_1d, recovery_pair_1d, rescaled_energy, surface_energy, total_energy)
from .estimator import ATSegmenter
from .lattice import (Grid, ScalarField, SubRegion, affine_interpolate_1d, build_grid, slice_field,
                      split_interior_boundary, truncate, ufield, vfield)
from .solver import (BoundaryCondition, SolveConfig, alternate_minimize, localized_min, u_step,
                     v_step)

__version__ = "0.1.0"

__all__ = [
    "ATSegmenter", "BoundaryCondition", "CellSpec", "Channel", "EnergyParams", "Grid",
    "LatticePath", "PiecewiseFn1D", "ScalarField", "SolveConfig", "SubRegion",
    "affine_interpolate_1d", "alternate_minimize", "are_disjoint", "build_grid", "bulk_energy",
    "c_ell_closed_form", "c_ell_numeric", "cell_energy", "continuum_at_1d", "fidelity_energy",
    "flat_channel", "is_strong_path", "localized_min", "ms_energy_1d", "nu_from_angle",
    "recovery_pair_1d", "regime_report", "rescaled_energy", "slice_field", "solve_cell",
    "split_interior_boundary", "surface_energy", "total_energy", "truncate", "u_step", "ufield",
    "v_step", "vfield",
]
