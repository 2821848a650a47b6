"""Hartree-Fock solver on adaptive Gaussian-mixture representations.

Orbitals, potentials, and Green's functions are all finite sums of
L2-normalized isotropic Gaussians, so every operator application stays
in closed form; term growth is controlled by grouped skeleton reduction.
"""

from .core import (
    GaussianMixture,
    GaussianTerm,
    coalesce,
    concat,
    dump_mixture,
    load_mixture,
    mixture_inner,
    mixture_kinetic,
    mixture_product,
)
from .kernels import (
    KernelExpansion,
    build_power_expansion,
    coulomb_reference_expansion,
    helmholtz_expansion,
)
from .operators import MoleculeSpec
from .reduction import GroupingConfig, grouped_reduce, reduce_group
from .scf import (
    NotConvergedError,
    ScfConfig,
    ScfState,
    initialize,
    preset_molecule,
    run,
    scf_step,
    total_energy,
)

__all__ = [
    "GaussianMixture",
    "GaussianTerm",
    "GroupingConfig",
    "KernelExpansion",
    "MoleculeSpec",
    "NotConvergedError",
    "ScfConfig",
    "ScfState",
    "build_power_expansion",
    "coalesce",
    "concat",
    "coulomb_reference_expansion",
    "dump_mixture",
    "grouped_reduce",
    "helmholtz_expansion",
    "initialize",
    "load_mixture",
    "mixture_inner",
    "mixture_kinetic",
    "mixture_product",
    "preset_molecule",
    "reduce_group",
    "run",
    "scf_step",
    "total_energy",
]
