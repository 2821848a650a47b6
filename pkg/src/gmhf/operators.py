"""External, Coulomb, and exchange operators on Gaussian-mixture orbitals.

All operators map mixtures to mixtures: multiplying by a 1/r-type
potential uses the kernel expansion termwise (Gaussian product rule),
the inverse Laplacian is a convolution against the same expansion, and
growth is controlled by a grouped skeleton reduction after each step.

Sign conventions: nuclear charges are stored negative, so the external
potential sum(Z_l / |r - R_l|) is attractive; the Hartree potential of a
nonnegative density is positive (repulsive) and the exchange quadratic
form <K phi, phi> is nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .core import GaussianMixture, concat, mixture_inner, mixture_kinetic
from .reduction import GroupingConfig, grouped_reduce

# The kernel expansions are certified on [1e-7, 1e5] bohr; reject
# geometries whose length scales approach the upper end.
MAX_NUCLEAR_EXTENT = 1e4


@dataclass(frozen=True)
class MoleculeSpec:
    """Nuclear charges (negative convention), positions, orbital count."""

    charges: np.ndarray
    positions: np.ndarray
    n_orbitals: int

    def __post_init__(self):
        charges = np.atleast_1d(np.asarray(self.charges, dtype=float))
        positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "charges", charges)
        object.__setattr__(self, "positions", positions)
        if charges.size == 0:
            raise ValueError("need at least one nucleus")
        if positions.shape[0] != charges.size:
            raise ValueError("charges and positions length mismatch")
        if (charges >= 0.0).any():
            raise ValueError("nuclear charges must be negative")
        if self.n_orbitals < 1:
            raise ValueError("need at least one orbital")
        d = np.linalg.norm(
            positions[:, None, :] - positions[None, :, :], axis=2
        )
        iu = np.triu_indices(charges.size, k=1)
        if iu[0].size and (d[iu] == 0.0).any():
            raise ValueError("nuclear positions must be distinct")
        if iu[0].size and d[iu].max() >= MAX_NUCLEAR_EXTENT:
            raise ValueError("nuclear separation exceeds kernel validity range")

    @property
    def n_nuclei(self):
        return self.charges.size

    def bounding_box(self):
        return self.positions.min(axis=0), self.positions.max(axis=0)

    def nuclear_repulsion(self):
        e = 0.0
        for l in range(self.n_nuclei):
            for k in range(l + 1, self.n_nuclei):
                d = np.linalg.norm(self.positions[l] - self.positions[k])
                e += self.charges[l] * self.charges[k] / d
        return e


def apply_external_potential(phi, mol, coulomb, cfg=None):
    """(sum_l Z_l/|r-R_l|) * phi as a mixture; reduced if cfg is given."""
    pieces = []
    for l in range(mol.n_nuclei):
        pieces.append(
            core.mixture_multiply_bare(
                phi,
                mol.charges[l] * coulomb.weights,
                coulomb.exponents,
                mol.positions[l],
            )
        )
    out = concat(pieces)
    if cfg is not None:
        out = grouped_reduce(out, mol, cfg)
    return out


def hartree_potential(rho, coulomb, cfg=None, mol=None):
    """Electrostatic potential of density rho: (1/r) * rho (convolution).

    Positive for a nonnegative density.  This equals -4*pi*InvLaplacian(rho)
    with the attractive-Z convention used throughout.
    """
    out = core.mixture_convolve(rho, coulomb.weights, coulomb.exponents)
    if cfg is not None and mol is not None:
        out = grouped_reduce(out, mol, cfg)
    return out


def density(orbitals, mol=None, cfg=None):
    """sum_i |phi_i|^2, reduced if mol and cfg are given."""
    rho = concat([core.mixture_product(phi, phi) for phi in orbitals])
    if cfg is not None and mol is not None:
        rho = grouped_reduce(rho, mol, cfg)
    return rho


def apply_coulomb(phi_j, orbitals, mol, coulomb, cfg):
    """J phi_j = phi_j * hartree_potential(sum_i |phi_i|^2)."""
    if not orbitals:
        return GaussianMixture.empty()
    rho = density(orbitals, mol, cfg)
    pot = hartree_potential(rho, coulomb, cfg, mol)
    return grouped_reduce(core.mixture_product(phi_j, pot), mol, cfg)


def apply_exchange(phi_j, orbitals, mol, coulomb, cfg):
    """K phi_j = sum_i phi_i * ((1/r) * (phi_i phi_j))."""
    pieces = []
    for phi_i in orbitals:
        pair = grouped_reduce(core.mixture_product(phi_i, phi_j), mol, cfg)
        pot = hartree_potential(pair, coulomb, cfg, mol)
        pieces.append(grouped_reduce(core.mixture_product(phi_i, pot), mol, cfg))
    if not pieces:
        return GaussianMixture.empty()
    return grouped_reduce(concat(pieces), mol, cfg)


def apply_total_potential(orbitals, mol, coulomb, cfg, no_ee=False):
    """V_tot phi_j = (V_ext + 2J - K) phi_j for every orbital at once.

    The Hartree potential and the symmetric pair convolutions are shared
    across orbitals.  With ``no_ee`` the electron-electron terms are
    skipped (single-particle test mode).
    """
    n = len(orbitals)
    vext = [apply_external_potential(p, mol, coulomb, cfg) for p in orbitals]
    if no_ee:
        return vext

    # exchange pair potentials W_ij = (1/r) * (phi_i phi_j), symmetric in (i, j)
    pair_pot = {}
    for i in range(n):
        for j in range(i, n):
            prod = grouped_reduce(
                core.mixture_product(orbitals[i], orbitals[j]), mol, cfg
            )
            pair_pot[(i, j)] = hartree_potential(prod, coulomb, cfg, mol)

    if n == 1:
        # (2J - K) phi = phi * hartree(|phi|^2); W_00 is already that potential
        jk = grouped_reduce(
            core.mixture_product(orbitals[0], pair_pot[(0, 0)]), mol, cfg
        )
        return [grouped_reduce(concat([vext[0], jk]), mol, cfg)]

    # the Hartree potential of the total density is the sum of the
    # diagonal pair potentials, so no separate density pass is needed
    hart = grouped_reduce(
        concat([pair_pot[(i, i)] for i in range(n)]), mol, cfg
    )

    out = []
    for j in range(n):
        pieces = [vext[j]]
        pieces.append(
            grouped_reduce(core.mixture_product(orbitals[j], hart), mol, cfg)
            .scaled(2.0)
        )
        for i in range(n):
            w = pair_pot[(min(i, j), max(i, j))]
            kx = grouped_reduce(core.mixture_product(orbitals[i], w), mol, cfg)
            pieces.append(kx.scaled(-1.0))
        out.append(grouped_reduce(concat(pieces), mol, cfg))
    return out


def fock_matrix(orbitals, vtot_phis):
    """H_ij = <-1/2 Delta phi_i, phi_j> + <V_tot phi_i, phi_j>, symmetrized."""
    n = len(orbitals)
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            H[i, j] = mixture_kinetic(orbitals[i], orbitals[j]) + mixture_inner(
                vtot_phis[i], orbitals[j]
            )
    return 0.5 * (H + H.T)
