"""Command-line front end: run an SCF calculation and export results.

Molecule files are plain text: a header line ``orbitals N`` followed by
one line per nucleus ``Z x y z`` with Z < 0 (attractive-charge
convention).  Exit codes: 0 converged, 2 not converged, 3 invalid
input, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import core, scf
from .kernels import ExpansionError, coulomb_reference_expansion
from .operators import MoleculeSpec
from .reduction import GroupingConfig, ReductionError
from .scf import NotConvergedError, ScfConfig, ScfError

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_INVALID = 3
EXIT_NUMERICAL = 4


class MoleculeFileError(ValueError):
    pass


def parse_molecule(path):
    """Read a molecule file; raises MoleculeFileError with line numbers."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise MoleculeFileError(f"{path}: {exc}") from exc

    n_orbitals = None
    charges, positions = [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n_orbitals is None:
            if parts[0].lower() != "orbitals" or len(parts) != 2:
                raise MoleculeFileError(
                    f"{path}:{lineno}: expected header 'orbitals N'"
                )
            try:
                n_orbitals = int(parts[1])
            except ValueError:
                raise MoleculeFileError(
                    f"{path}:{lineno}: orbital count must be an integer"
                ) from None
            if n_orbitals < 1:
                raise MoleculeFileError(
                    f"{path}:{lineno}: orbital count must be positive"
                )
            continue
        if len(parts) != 4:
            raise MoleculeFileError(
                f"{path}:{lineno}: expected 'Z x y z', got {len(parts)} fields"
            )
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise MoleculeFileError(
                f"{path}:{lineno}: fields must be numbers"
            ) from None
        z, pos = values[0], values[1:]
        if z >= 0.0:
            raise MoleculeFileError(
                f"{path}:{lineno}: nuclear charge must be negative"
            )
        if any(np.allclose(pos, q) for q in positions):
            raise MoleculeFileError(
                f"{path}:{lineno}: duplicate nuclear position"
            )
        charges.append(z)
        positions.append(pos)

    if n_orbitals is None:
        raise MoleculeFileError(f"{path}: missing 'orbitals N' header")
    if not charges:
        raise MoleculeFileError(f"{path}: no nuclei given")
    try:
        return MoleculeSpec(charges, positions, n_orbitals)
    except ValueError as exc:
        raise MoleculeFileError(f"{path}: {exc}") from exc


def default_orbitals(mol):
    """Initial guess for file-based molecules: one Gaussian per orbital,
    centered on the nuclei in round-robin order."""
    return [
        core.GaussianMixture.single(1.0, mol.positions[j % mol.n_nuclei], 1.0)
        for j in range(mol.n_orbitals)
    ]


def write_report(path, lines):
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def write_line_samples(path, state, axis, a, b, n):
    axes = {"x": 0, "y": 1, "z": 2}
    ax = axes[axis]
    ts = np.linspace(a, b, n)
    cols = [ts]
    for phi in state.orbitals:
        pts = np.zeros((n, 3))
        pts[:, ax] = ts
        cols.append(np.array([phi.evaluate(p) for p in pts]))
    header = axis + "," + ",".join(
        f"phi_{j + 1}" for j in range(len(state.orbitals))
    )
    np.savetxt(path, np.column_stack(cols), delimiter=",",
               header=header, comments="", fmt="%.17g")


def dump_kernels(directory, energies):
    """Write the Coulomb expansion and, for each bound orbital energy,
    the matching Helmholtz expansion, as 'weight exponent' text files."""
    import os

    from .kernels import helmholtz_expansion

    os.makedirs(directory, exist_ok=True)
    coulomb = coulomb_reference_expansion()
    coulomb.dump(os.path.join(directory, "coulomb.txt"),
                 header="1/r expansion: weight exponent")
    for e in energies:
        if e >= 0.0:
            continue
        mu = float(np.sqrt(-2.0 * e))
        exp = helmholtz_expansion(mu)
        exp.dump(
            os.path.join(directory, f"helmholtz_mu_{mu:.12g}.txt"),
            header=f"exp(-mu r)/(4 pi r) expansion, mu={mu:.17g}: "
                   "weight exponent",
        )


def build_parser():
    p = argparse.ArgumentParser(
        prog="gmhf",
        description="Hartree-Fock on adaptive Gaussian mixtures",
    )
    src = p.add_mutually_exclusive_group()
    src.add_argument("--molecule", metavar="PATH",
                     help="molecule file ('orbitals N' header, 'Z x y z' lines)")
    src.add_argument("--preset", choices=["heh+", "lih"],
                     help="built-in reference molecule")
    p.add_argument("--eps", type=float, default=1e-6,
                   help="reduction accuracy (default 1e-6)")
    p.add_argument("--energy-tol", type=float, default=4e-6,
                   help="orbital-energy convergence tolerance (default 4e-6)")
    p.add_argument("--sigma-far", type=float, default=1.0,
                   help="shape threshold of the global group (default 1.0)")
    p.add_argument("--max-iter", type=int, default=100,
                   help="iteration limit (default 100)")
    p.add_argument("--no-ee", action="store_true",
                   help="disable Coulomb and exchange operators (oracle mode)")
    p.add_argument("--dump-orbitals", metavar="DIR",
                   help="write final orbitals as text mixtures into DIR")
    p.add_argument("--dump-kernels", metavar="DIR",
                   help="write kernel expansions as text into DIR; with a "
                        "molecule also the per-orbital bound-state kernels")
    p.add_argument("--line-samples", nargs=4, metavar=("AXIS", "A", "B", "N"),
                   help="sample orbitals along a coordinate axis, CSV to stdout "
                        "sidecar <report>.csv or line_samples.csv")
    p.add_argument("--report", metavar="PATH", default="-",
                   help="write key=value report here (default stdout)")
    p.add_argument("--quiet", action="store_true",
                   help="suppress the per-iteration log")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)

    try:
        if args.eps <= 0.0 or args.energy_tol <= 0.0:
            raise ValueError("--eps and --energy-tol must be positive")
        if args.sigma_far <= 0.0:
            raise ValueError("--sigma-far must be positive")
        if args.max_iter < 1:
            raise ValueError("--max-iter must be positive")
        samples = None
        if args.line_samples is not None:
            axis, a, b, n = args.line_samples
            if axis not in ("x", "y", "z"):
                raise ValueError("--line-samples axis must be x, y, or z")
            samples = (axis, float(a), float(b), int(n))
            if samples[3] < 2:
                raise ValueError("--line-samples needs at least 2 points")

        if args.preset is not None:
            mol = scf.preset_molecule(args.preset)
            orbitals = scf.preset_orbitals(args.preset, mol)
        elif args.molecule is not None:
            mol = parse_molecule(args.molecule)
            orbitals = default_orbitals(mol)
        elif args.dump_kernels is not None:
            mol = None
        else:
            raise ValueError("one of --molecule, --preset, or --dump-kernels "
                             "is required")
    except (MoleculeFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if mol is None:
        # kernel export only, no calculation
        try:
            dump_kernels(args.dump_kernels, ())
        except ExpansionError as exc:
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        return EXIT_OK

    grouping = GroupingConfig(sigma_far=args.sigma_far, reduction_eps=args.eps)
    cfg = ScfConfig(
        reduction_eps=args.eps,
        energy_tol=args.energy_tol,
        max_iterations=args.max_iter,
        grouping=grouping,
        no_ee=args.no_ee,
    )
    log = None if args.quiet else lambda s: print(s, file=sys.stderr)

    t0 = time.perf_counter()
    converged = True
    try:
        coulomb = coulomb_reference_expansion()
        try:
            state = scf.run(mol, cfg, coulomb, orbitals=orbitals, log=log)
        except NotConvergedError as exc:
            converged = False
            state = exc.state
        etot = scf.total_energy(state, mol, coulomb, cfg)
        stats = scf.final_group_statistics(state, mol, cfg, coulomb)
    except (ScfError, ReductionError, ExpansionError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    wall = time.perf_counter() - t0

    lines = [f"converged={int(converged)}", f"iterations={state.iteration}"]
    for j, e in enumerate(state.energies):
        lines.append(f"energy_{j + 1}={e:.17g}")
    lines.append(f"total_energy={etot:.17g}")
    for j, c in enumerate(state.term_counts()):
        lines.append(f"terms_{j + 1}={c}")
    for name, st in stats.items():
        for key, val in st.items():
            lines.append(f"{name}_{key}={val:.17g}"
                         if isinstance(val, float) else f"{name}_{key}={val}")
    lines.append(f"wall_time={wall:.3f}")
    write_report(args.report, lines)

    if args.dump_kernels:
        dump_kernels(args.dump_kernels, state.energies)

    if args.dump_orbitals:
        import os

        os.makedirs(args.dump_orbitals, exist_ok=True)
        for j, phi in enumerate(state.orbitals):
            core.dump_mixture(
                phi,
                os.path.join(args.dump_orbitals, f"orbital_{j + 1}.txt"),
                header=f"orbital {j + 1}, energy {state.energies[j]:.17g}",
            )

    if samples is not None:
        out = "line_samples.csv" if args.report == "-" else args.report + ".csv"
        write_line_samples(out, state, *samples)

    return EXIT_OK if converged else EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
