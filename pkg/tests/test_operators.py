"""Tests of the external/Coulomb/exchange operators."""

import numpy as np
import pytest

from gmhf.core import GaussianMixture, mixture_inner
from gmhf.kernels import coulomb_reference_expansion
from gmhf.operators import (
    MoleculeSpec,
    apply_coulomb,
    apply_exchange,
    apply_external_potential,
    apply_total_potential,
    density,
    fock_matrix,
    hartree_potential,
)
from gmhf.reduction import GroupingConfig

from oracles import point_coulomb_potential

HEH = MoleculeSpec(
    charges=[-1.0, -2.0],
    positions=[[0.0, 0.0, -0.7], [0.0, 0.0, 0.7]],
    n_orbitals=1,
)


@pytest.fixture(scope="module")
def coulomb():
    return coulomb_reference_expansion()


def normalized_atom(center, sigma):
    return GaussianMixture.single(1.0, center, sigma)


def test_molecule_validation():
    with pytest.raises(ValueError):
        MoleculeSpec([1.0], [[0, 0, 0]], 1)  # positive charge
    with pytest.raises(ValueError):
        MoleculeSpec([-1.0, -1.0], [[0, 0, 0], [0, 0, 0]], 1)  # coincident
    with pytest.raises(ValueError):
        MoleculeSpec([-1.0], [[0, 0, 0]], 0)  # no orbitals
    with pytest.raises(ValueError):
        MoleculeSpec([-1.0, -1.0], [[0, 0, 0], [2e4, 0, 0]], 1)  # too far


def test_nuclear_repulsion_diatomic():
    # product of two negative charges over the distance
    assert HEH.nuclear_repulsion() == pytest.approx((-1.0) * (-2.0) / 1.4)


def test_external_potential_pointwise(coulomb):
    phi = normalized_atom([0.0, 0.0, 0.2], 0.4)
    v = apply_external_potential(phi, HEH, coulomb)
    rng = np.random.default_rng(31)
    for _ in range(6):
        x = rng.uniform(-0.6, 0.6, size=3)
        pot = sum(
            HEH.charges[l] / np.linalg.norm(x - HEH.positions[l])
            for l in range(2)
        )
        assert v.evaluate(x) == pytest.approx(
            pot * phi.evaluate(x), rel=1e-9
        )


def test_external_potential_attractive(coulomb):
    phi = normalized_atom([0.0, 0.0, 0.0], 0.7)
    v = apply_external_potential(phi, HEH, coulomb)
    assert mixture_inner(v, phi) < 0.0


def test_hartree_potential_point_charge_limit(coulomb):
    # density = unit-norm Gaussian; potential of exp(-p r^2) is known
    sigma = 0.05
    rho = normalized_atom([0.0, 0.0, 0.0], sigma)
    pot = hartree_potential(rho, coulomb)
    amp = (np.pi * sigma) ** -0.75
    p = 1.0 / (2.0 * sigma)
    for d in (0.3, 1.0, 3.0):
        ref = amp * point_coulomb_potential(p, [0, 0, 0], [0, 0, d])
        assert pot.evaluate([0.0, 0.0, d]) == pytest.approx(ref, rel=1e-9)


def test_hartree_far_field_is_total_charge(coulomb):
    sigma = 0.3
    rho = normalized_atom([0.1, 0.0, 0.0], sigma)
    # integral of the unit-norm atom: (2 pi sigma)^{3/2} (pi sigma)^{-3/4}
    charge = (2.0 * np.pi * sigma) ** 1.5 * (np.pi * sigma) ** -0.75
    pot = hartree_potential(rho, coulomb)
    assert pot.evaluate([0.0, 0.0, 1e3]) == pytest.approx(
        charge / 1e3, rel=1e-6
    )


def test_hartree_positive_for_nonnegative_density(coulomb):
    phi = normalized_atom([0.0, 0.0, 0.3], 0.5)
    rho = density([phi])
    pot = hartree_potential(rho, coulomb)
    for d in (0.0, 0.5, 2.0, 10.0):
        assert pot.evaluate([0.0, 0.0, d]) > 0.0


def test_coulomb_self_repulsion_nonnegative(coulomb):
    cfg = GroupingConfig()
    phi = normalized_atom([0.0, 0.0, 0.1], 0.4)
    j = apply_coulomb(phi, [phi], HEH, coulomb, cfg)
    assert mixture_inner(j, phi) > 0.0


def test_exchange_equals_coulomb_single_orbital(coulomb):
    cfg = GroupingConfig()
    phi = normalized_atom([0.0, 0.0, 0.1], 0.4)
    j = apply_coulomb(phi, [phi], HEH, coulomb, cfg)
    k = apply_exchange(phi, [phi], HEH, coulomb, cfg)
    assert mixture_inner(k, phi) == pytest.approx(
        mixture_inner(j, phi), rel=1e-6
    )


def test_total_potential_single_orbital_identity(coulomb):
    # (V_ext + 2J - K) phi with one orbital equals V_ext phi + J phi
    cfg = GroupingConfig()
    phi = normalized_atom([0.0, 0.0, 0.1], 0.4)
    vtot = apply_total_potential([phi], HEH, coulomb, cfg)[0]
    vext = apply_external_potential(phi, HEH, coulomb, cfg)
    j = apply_coulomb(phi, [phi], HEH, coulomb, cfg)
    lhs = mixture_inner(vtot, phi)
    rhs = mixture_inner(vext, phi) + mixture_inner(j, phi)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_total_potential_no_ee_is_external(coulomb):
    cfg = GroupingConfig()
    phi = normalized_atom([0.0, 0.0, 0.1], 0.4)
    vtot = apply_total_potential([phi], HEH, coulomb, cfg, no_ee=True)[0]
    vext = apply_external_potential(phi, HEH, coulomb, cfg)
    assert mixture_inner(vtot, phi) == pytest.approx(
        mixture_inner(vext, phi), rel=1e-9
    )


def test_two_orbital_exchange_couples_orbitals(coulomb):
    cfg = GroupingConfig()
    a = normalized_atom([0.0, 0.0, -0.3], 0.5)
    b = normalized_atom([0.0, 0.0, 0.3], 0.5)
    k_a = apply_exchange(a, [a, b], HEH, coulomb, cfg)
    k_a_self = apply_exchange(a, [a], HEH, coulomb, cfg)
    assert mixture_inner(k_a, a) > mixture_inner(k_a_self, a)


def test_fock_matrix_symmetric(coulomb):
    cfg = GroupingConfig()
    orbitals = [
        normalized_atom([0.0, 0.0, -0.3], 0.5),
        normalized_atom([0.0, 0.0, 0.3], 0.8),
    ]
    mol = MoleculeSpec(HEH.charges, HEH.positions, 2)
    vtot = apply_total_potential(orbitals, mol, coulomb, cfg)
    H = fock_matrix(orbitals, vtot)
    assert H.shape == (2, 2)
    np.testing.assert_allclose(H, H.T)
    assert np.isfinite(H).all()


def test_operator_outputs_stay_in_box(coulomb):
    cfg = GroupingConfig()
    phi = normalized_atom([0.0, 0.0, 0.1], 0.4)
    vtot = apply_total_potential([phi], HEH, coulomb, cfg)[0]
    lo, hi = HEH.bounding_box()
    assert (vtot.centers >= lo - 0.0).all()
    assert (vtot.centers <= hi + 0.0).all()


def test_external_potential_cardinality(coulomb):
    rng = np.random.default_rng(21)
    phi = GaussianMixture(
        rng.normal(size=10),
        0.3 * rng.normal(size=(10, 3)),
        rng.uniform(0.3, 1.0, 10),
    )
    v = apply_external_potential(phi, HEH, coulomb)
    # one product per (orbital term, nucleus, kernel Gaussian)
    assert len(v) == 10 * 2 * len(coulomb)


def test_hartree_cardinality(coulomb):
    rng = np.random.default_rng(22)
    rho = GaussianMixture(
        np.abs(rng.normal(size=6)),
        0.3 * rng.normal(size=(6, 3)),
        rng.uniform(0.3, 1.0, 6),
    )
    h = hartree_potential(rho, coulomb)
    bound = 6 * len(coulomb)
    assert 0.9 * bound <= len(h) <= bound


def test_coulomb_operator_symmetric(coulomb):
    cfg = GroupingConfig()
    a = normalized_atom([0.0, 0.0, -0.3], 0.5)
    b = normalized_atom([0.0, 0.0, 0.3], 0.8)
    ja = apply_coulomb(a, [a, b], HEH, coulomb, cfg)
    jb = apply_coulomb(b, [a, b], HEH, coulomb, cfg)
    # <J a, b> = <a, J b> since J is multiplication by a fixed potential
    assert mixture_inner(ja, b) == pytest.approx(mixture_inner(a, jb), abs=1e-8)


def test_coulomb_pointwise_product_of_potential(coulomb):
    from oracles import amplitude

    cfg = GroupingConfig(reduction_eps=1e-9)
    phi = normalized_atom([0.0, 0.0, 0.2], 0.5)
    rho = density([phi])
    j = apply_coulomb(phi, [phi], HEH, coulomb, cfg)

    def value(m, x):
        amp = m.coeffs * amplitude(m.sigmas)
        d2 = ((m.centers - x) ** 2).sum(axis=1)
        return float(np.sum(amp * np.exp(-d2 / (2.0 * m.sigmas))))

    # J phi at x = phi(x) * potential of rho at x; rho is one Gaussian
    a_rho = rho.coeffs[0] * amplitude(rho.sigmas[0])
    p = 1.0 / (2.0 * rho.sigmas[0])
    for x in ([0.0, 0.0, 0.0], [0.1, 0.0, 0.3], [0.0, -0.2, -0.5]):
        x = np.asarray(x, dtype=float)
        want = value(phi, x) * a_rho * point_coulomb_potential(
            p, rho.centers[0], x
        )
        assert value(j, x) == pytest.approx(want, rel=1e-6)
