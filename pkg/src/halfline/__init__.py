"""Scattering-based analysis of Schrodinger evolution on the half line.

The package builds the scattering data of a compactly supported
potential with a Dirichlet wall at the origin, assembles the absolutely
continuous part of the propagator from that data, and measures dispersive
decay and space-time integrability of the resulting flows against an
independent finite-difference reference.
"""

from __future__ import annotations

from ._backend import backend_name
from .field import (
    WaveField,
    gaussian_packet,
    load_wave_field,
    save_wave_field,
    tent_packet,
)
from .exceptions import (
    AccuracyError,
    ConditioningError,
    CoverageError,
    DataError,
    DomainError,
    GridMismatchError,
    HalflineError,
    IterationError,
    ResonanceError,
    StiffnessError,
)
from .potential import (
    PRESET_NAMES,
    MomentProfile,
    Potential,
    PotentialTabulation,
    exp_well,
    first_moment,
    load_potential,
    local_l1_sup,
    moment_profile,
    preset,
    save_potential,
    sigma,
    square_well,
    table_potential,
)
from .jost import (
    JostSolution,
    KernelBoundReport,
    KernelField,
    default_x_grid,
    jost_from_kernel,
    kernel_bound_check,
    load_kernel_field,
    solve_jost_batch,
    solve_jost_ode,
    solve_marchenko_kernel,
)
from .scattering import (
    BoundStateSet,
    ScatteringData,
    apply_pp_projector,
    default_k_grid,
    eigenfunctions_on,
    find_bound_states,
    scattering_matrix,
    window_doubling_check,
    load_scattering,
    save_scattering,
)
from .oracle import (
    DiscreteHamiltonian,
    build_hamiltonian,
    crank_nicolson,
    evolve_oracle,
    negative_eigenvalue_count,
)
from .propagator import (
    DEFAULT_TIMES,
    PropagatorKernelSample,
    apply_t_term,
    correction_b,
    correction_c,
    correction_e,
    default_lattice,
    direct_kernel_values,
    evolve_continuous,
    fresnel_kernel,
    free_kernel,
    kernel_sample,
)
from .estimates import (
    AdmissiblePoint,
    DecayReport,
    FormBoundReport,
    admissible_segment,
    boundary_trace,
    decay_fit,
    duhamel_apply,
    form_bound_check,
    lp_norm,
    sobolev_norm,
    strichartz_norm,
)
from .cli import ExperimentConfig, load_experiment_config

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "backend_name",
    "HalflineError",
    "DomainError",
    "DataError",
    "StiffnessError",
    "ConditioningError",
    "ResonanceError",
    "IterationError",
    "AccuracyError",
    "CoverageError",
    "GridMismatchError",
    "Potential",
    "PotentialTabulation",
    "MomentProfile",
    "square_well",
    "exp_well",
    "table_potential",
    "preset",
    "PRESET_NAMES",
    "sigma",
    "first_moment",
    "moment_profile",
    "local_l1_sup",
    "save_potential",
    "load_potential",
    "WaveField",
    "gaussian_packet",
    "tent_packet",
    "save_wave_field",
    "load_wave_field",
    "JostSolution",
    "KernelField",
    "KernelBoundReport",
    "default_x_grid",
    "solve_jost_ode",
    "solve_jost_batch",
    "solve_marchenko_kernel",
    "jost_from_kernel",
    "kernel_bound_check",
    "load_kernel_field",
    "ScatteringData",
    "BoundStateSet",
    "default_k_grid",
    "scattering_matrix",
    "find_bound_states",
    "eigenfunctions_on",
    "apply_pp_projector",
    "window_doubling_check",
    "save_scattering",
    "load_scattering",
    "DiscreteHamiltonian",
    "build_hamiltonian",
    "evolve_oracle",
    "crank_nicolson",
    "negative_eigenvalue_count",
    "DEFAULT_TIMES",
    "PropagatorKernelSample",
    "default_lattice",
    "fresnel_kernel",
    "free_kernel",
    "correction_b",
    "correction_c",
    "correction_e",
    "apply_t_term",
    "kernel_sample",
    "direct_kernel_values",
    "evolve_continuous",
    "AdmissiblePoint",
    "DecayReport",
    "FormBoundReport",
    "admissible_segment",
    "boundary_trace",
    "decay_fit",
    "duhamel_apply",
    "form_bound_check",
    "lp_norm",
    "sobolev_norm",
    "strichartz_norm",
    "ExperimentConfig",
    "load_experiment_config",
]
