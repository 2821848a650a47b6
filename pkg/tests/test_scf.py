"""Tests of the fixed-point SCF driver."""

import numpy as np
import pytest

from gmhf.core import GaussianMixture, mixture_inner
from gmhf.kernels import coulomb_reference_expansion
from gmhf.operators import MoleculeSpec
from gmhf.scf import (
    NotConvergedError,
    ScfConfig,
    ScfError,
    box_violation,
    initialize,
    orthonormalize,
    preset_molecule,
    preset_orbitals,
    run,
    scf_step,
    total_energy,
)

HYDROGEN = MoleculeSpec(charges=[-1.0], positions=[[0.0, 0.0, 0.0]], n_orbitals=1)


@pytest.fixture(scope="module")
def coulomb():
    return coulomb_reference_expansion()


def test_presets_match_reference_geometries():
    heh = preset_molecule("heh+")
    assert list(heh.charges) == [-1.0, -2.0]
    np.testing.assert_allclose(heh.positions[:, 2], [-0.7, 0.7])
    lih = preset_molecule("lih")
    assert list(lih.charges) == [-3.0, -1.0]
    np.testing.assert_allclose(lih.positions[:, 0], [-1.575, 1.575])
    assert lih.n_orbitals == 2
    with pytest.raises(ValueError):
        preset_molecule("h2o")


def test_orthonormalize_two_overlapping_atoms():
    a = GaussianMixture.single(1.0, [0.0, 0.0, -0.2], 1.0)
    b = GaussianMixture.single(1.0, [0.0, 0.0, 0.2], 1.0)
    ortho = orthonormalize([a, b])
    S = np.array(
        [[mixture_inner(x, y) for y in ortho] for x in ortho]
    )
    np.testing.assert_allclose(S, np.eye(2), atol=1e-12)


def test_orthonormalize_rejects_degenerate_set():
    a = GaussianMixture.single(1.0, [0.0, 0.0, 0.0], 1.0)
    with pytest.raises(ScfError):
        orthonormalize([a, a.scaled(2.0)])


def test_initialize_sets_mu_relation(coulomb):
    cfg = ScfConfig(no_ee=True)
    state = initialize(HYDROGEN, cfg, coulomb,
                       orbitals=[GaussianMixture.single(1.0, [0, 0, 0], 1.0)])
    np.testing.assert_allclose(state.mus, np.sqrt(-2.0 * state.energies))
    assert (state.energies < 0.0).all()


def test_initialize_rejects_unbound_guess(coulomb):
    # a very tight guess is kinetic-dominated: positive Fock eigenvalue
    cfg = ScfConfig(no_ee=True)
    guess = [GaussianMixture.single(1.0, [0.0, 0.0, 0.0], 1e-4)]
    with pytest.raises(ScfError):
        initialize(HYDROGEN, cfg, coulomb, orbitals=guess)


def test_initialize_checks_orbital_count(coulomb):
    cfg = ScfConfig()
    with pytest.raises(ValueError):
        initialize(HYDROGEN, cfg, coulomb,
                   orbitals=[GaussianMixture.single(1.0, [0, 0, 0], 1.0)] * 2)


def test_hydrogen_oracle_energy(coulomb):
    cfg = ScfConfig(no_ee=True)
    state = run(HYDROGEN, cfg, coulomb,
                orbitals=[GaussianMixture.single(1.0, [0, 0, 0], 1.0)])
    e = total_energy(state, HYDROGEN, coulomb, cfg)
    assert abs(e + 0.5) < 1e-4
    assert state.iteration <= 20


def test_scf_step_monotone_setup(coulomb):
    cfg = ScfConfig(no_ee=True)
    state = initialize(HYDROGEN, cfg, coulomb,
                       orbitals=[GaussianMixture.single(1.0, [0, 0, 0], 1.0)])
    nxt = scf_step(state, HYDROGEN, coulomb, cfg)
    assert nxt.iteration == 1
    assert len(nxt.history) == 1
    # orthonormality after the step
    phi = nxt.orbitals[0]
    assert mixture_inner(phi, phi) == pytest.approx(1.0, abs=1e-10)


def test_run_raises_not_converged(coulomb):
    cfg = ScfConfig(no_ee=True, max_iterations=1)
    with pytest.raises(NotConvergedError) as exc:
        run(HYDROGEN, cfg, coulomb,
            orbitals=[GaussianMixture.single(1.0, [0, 0, 0], 1.0)])
    assert exc.value.state.iteration == 1


def test_run_log_lines(coulomb):
    cfg = ScfConfig(no_ee=True)
    lines = []
    run(HYDROGEN, cfg, coulomb,
        orbitals=[GaussianMixture.single(1.0, [0, 0, 0], 1.0)],
        log=lines.append)
    assert lines and lines[0].startswith("iter 1 ")


def test_box_violation_measures_escapes():
    mol = preset_molecule("heh+")
    inside = GaussianMixture.single(1.0, [0.0, 0.0, 0.5], 1.0)
    outside = GaussianMixture.single(1.0, [0.0, 0.25, 0.0], 1.0)
    assert box_violation([inside], mol) == 0.0
    assert box_violation([outside], mol) == pytest.approx(0.25)


def test_virial_style_signs_hydrogen(coulomb):
    from gmhf import core, operators

    cfg = ScfConfig(no_ee=True)
    state = run(HYDROGEN, cfg, coulomb,
                orbitals=[GaussianMixture.single(1.0, [0, 0, 0], 1.0)])
    phi = state.orbitals[0]
    assert core.mixture_kinetic(phi, phi) > 0.0
    vext = operators.apply_external_potential(phi, HYDROGEN, coulomb)
    assert core.mixture_inner(vext, phi) < 0.0


def test_scf_config_validation():
    with pytest.raises(ValueError):
        ScfConfig(reduction_eps=0.0)
    with pytest.raises(ValueError):
        ScfConfig(max_iterations=0)


def test_term_ceiling_enforced(coulomb):
    cfg = ScfConfig(no_ee=True, term_ceiling=3)
    state = initialize(HYDROGEN, cfg, coulomb,
                       orbitals=[GaussianMixture.single(1.0, [0, 0, 0], 1.0)])
    with pytest.raises(ScfError):
        scf_step(state, HYDROGEN, coulomb, cfg)


def test_orthonormalize_is_identity_on_orthonormal_input():
    # distant unit atoms are orthonormal to machine precision already
    a = GaussianMixture.single(1.0, [0.0, 0.0, -40.0], 0.5)
    b = GaussianMixture.single(1.0, [0.0, 0.0, 40.0], 0.5)
    ortho = orthonormalize([a, b])
    for before, after in zip([a, b], ortho):
        assert mixture_inner(before, after) == pytest.approx(1.0, abs=1e-10)


def test_orthonormalize_single_orbital_is_normalization():
    a = GaussianMixture.single(3.0, [0.1, 0.0, 0.0], 0.7)
    (n,) = orthonormalize([a])
    assert mixture_inner(n, n) == pytest.approx(1.0, rel=1e-12)
    assert n.coeffs[0] == pytest.approx(1.0, rel=1e-12)
