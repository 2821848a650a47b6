"""Closed-form algebra on isotropic Gaussian atoms and mixtures.

An atom is the unit-L2-norm Gaussian

    g(x) = (pi*sigma)**(-3/4) * exp(-|x - s|**2 / (2*sigma))

identified by its center ``s`` (3-vector, bohr) and shape scalar
``sigma`` (bohr^2).  A mixture is a finite linear combination
``sum_k c_k g_k``.  Products, convolutions with radial Gaussians,
overlaps and kinetic inner products all stay inside this family and are
evaluated exactly by updating (coeff, center, sigma).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Default threshold below which coefficients are considered numerical
# noise and may be dropped after algebra operations.
DROP_THRESHOLD = 1e-14

# Pairs per chunk in pairwise (product / Gram) loops; bounds peak memory.
_CHUNK_PAIRS = 4_000_000


def atom_amplitude(sigma):
    """Peak value (pi*sigma)**(-3/4) of a unit-norm atom."""
    return (np.pi * sigma) ** -0.75


@dataclass(frozen=True)
class GaussianTerm:
    """One weighted atom: coeff * g(x; center, sigma)."""

    coeff: float
    center: np.ndarray
    sigma: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        if center.shape != (3,):
            raise ValueError("center must be a 3-vector")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "coeff", float(self.coeff))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not np.isfinite(self.coeff) or not np.isfinite(center).all():
            raise ValueError("non-finite term parameters")
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError("sigma must be positive and finite")


class GaussianMixture:
    """Ordered sequence of Gaussian terms stored as flat arrays.

    The empty mixture represents the zero function.
    """

    __slots__ = ("coeffs", "centers", "sigmas")

    def __init__(self, coeffs, centers, sigmas):
        self.coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 3)
        self.sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
        n = self.coeffs.shape[0]
        if self.centers.shape != (n, 3) or self.sigmas.shape != (n,):
            raise ValueError("inconsistent mixture array shapes")
        if n and (self.sigmas <= 0.0).any():
            raise ValueError("sigma must be positive")

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty((0, 3)), np.empty(0))

    @classmethod
    def from_terms(cls, terms):
        terms = list(terms)
        if not terms:
            return cls.empty()
        return cls(
            [t.coeff for t in terms],
            [t.center for t in terms],
            [t.sigma for t in terms],
        )

    @classmethod
    def single(cls, coeff, center, sigma):
        return cls([coeff], [center], [sigma])

    def __len__(self):
        return self.coeffs.shape[0]

    def term(self, k):
        return GaussianTerm(self.coeffs[k], self.centers[k], self.sigmas[k])

    def terms(self):
        return [self.term(k) for k in range(len(self))]

    def scaled(self, factor):
        return GaussianMixture(self.coeffs * factor, self.centers, self.sigmas)

    def __add__(self, other):
        return concat([self, other])

    def subset(self, idx):
        return GaussianMixture(
            self.coeffs[idx], self.centers[idx], self.sigmas[idx]
        )

    def drop_small(self, threshold=DROP_THRESHOLD):
        """Discard terms with |coeff| below ``threshold``."""
        keep = np.abs(self.coeffs) >= threshold
        if keep.all():
            return self
        return self.subset(keep)

    def evaluate(self, x):
        """Evaluate the mixture at one point (3,) or many points (m, 3)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x.reshape(-1, 3)
        if len(self) == 0:
            out = np.zeros(pts.shape[0])
            return float(out[0]) if single else out
        d2 = ((pts[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        vals = (
            self.coeffs
            * atom_amplitude(self.sigmas)
            * np.exp(-d2 / (2.0 * self.sigmas))
        ).sum(axis=1)
        return float(vals[0]) if single else vals

    def norm(self):
        """L2 norm, exactly via the Gram bilinear form."""
        return float(np.sqrt(max(mixture_inner(self, self), 0.0)))


def concat(mixtures):
    mixtures = [m for m in mixtures if len(m)]
    if not mixtures:
        return GaussianMixture.empty()
    return GaussianMixture(
        np.concatenate([m.coeffs for m in mixtures]),
        np.concatenate([m.centers for m in mixtures]),
        np.concatenate([m.sigmas for m in mixtures]),
    )


def evaluate(mixture, x):
    return mixture.evaluate(x)


# ---------------------------------------------------------------------------
# pairwise closed forms (array-valued helpers used throughout)

def overlap_arrays(sa, ca, sb, cb, d2=None):
    """<g_a, g_b> for broadcastable sigma arrays and squared distances.

    ``sa``/``sb`` are shape scalars, ``ca``/``cb`` centers; ``d2`` may be
    passed precomputed to avoid redundant work.
    """
    if d2 is None:
        d2 = ((ca - cb) ** 2).sum(axis=-1)
    ssum = sa + sb
    return (2.0 * np.sqrt(sa * sb) / ssum) ** 1.5 * np.exp(-d2 / (2.0 * ssum))


def kinetic_arrays(sa, ca, sb, cb):
    """<-1/2 Delta g_a, g_b> for broadcastable arrays."""
    d2 = ((ca - cb) ** 2).sum(axis=-1)
    k = 1.0 / (2.0 * (sa + sb))
    return k * (3.0 - 2.0 * k * d2) * overlap_arrays(sa, ca, sb, cb, d2=d2)


def overlap(a, b):
    """<g_a, g_b> for two atoms, excluding coefficients."""
    return float(overlap_arrays(a.sigma, a.center, b.sigma, b.center))


def kinetic(a, b):
    """<-1/2 Delta g_a, g_b> for two atoms, excluding coefficients."""
    return float(kinetic_arrays(a.sigma, a.center, b.sigma, b.center))


def product(a, b):
    """Pointwise product of two weighted atoms as one weighted atom.

    The result center is the sigma-weighted average of the input centers
    (each coordinate lies between the input coordinates) and the shape is
    the harmonic combination sigma_a*sigma_b/(sigma_a+sigma_b).
    """
    ssum = a.sigma + b.sigma
    center = (b.sigma * a.center + a.sigma * b.center) / ssum
    # convex combination: clamp so roundoff never leaves the segment
    center = np.clip(
        center, np.minimum(a.center, b.center), np.maximum(a.center, b.center)
    )
    sigma = a.sigma * b.sigma / ssum
    d2 = float(((a.center - b.center) ** 2).sum())
    coeff = a.coeff * b.coeff * (np.pi * ssum) ** -0.75 * np.exp(-d2 / (2.0 * ssum))
    return GaussianTerm(coeff, center, sigma)


def convolve_with_radial_gaussian(a, weight, eta):
    """Convolve a weighted atom with ``weight * exp(-eta*|r|^2)``.

    The center is unchanged; variances add: sigma -> sigma + 1/(2*eta).
    """
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    sigma_out = a.sigma + 1.0 / (2.0 * eta)
    p = 1.0 / (2.0 * a.sigma)
    # amplitude * w * (pi/(p+eta))^{3/2}, re-expressed on the unit-norm atom
    coeff = (
        a.coeff
        * weight
        * (np.pi / (p + eta)) ** 1.5
        * atom_amplitude(a.sigma)
        / atom_amplitude(sigma_out)
    )
    return GaussianTerm(coeff, a.center, sigma_out)


def mixture_product(A, B, drop_threshold=DROP_THRESHOLD):
    """All pairwise products of two mixtures.

    Pointwise, evaluate(result, x) = evaluate(A, x) * evaluate(B, x).
    Terms with |coeff| below ``drop_threshold`` are discarded.  When both
    arguments are the same object the symmetric pairs are folded together.
    """
    n, m = len(A), len(B)
    if n == 0 or m == 0:
        return GaussianMixture.empty()

    symmetric = A is B
    out_c, out_s, out_x = [], [], []
    rows_per_chunk = max(1, _CHUNK_PAIRS // m)
    for lo in range(0, n, rows_per_chunk):
        hi = min(n, lo + rows_per_chunk)
        sa = A.sigmas[lo:hi, None]
        sb = B.sigmas[None, :]
        ssum = sa + sb
        d2 = ((A.centers[lo:hi, None, :] - B.centers[None, :, :]) ** 2).sum(axis=2)
        coeff = (
            A.coeffs[lo:hi, None]
            * B.coeffs[None, :]
            * (np.pi * ssum) ** -0.75
            * np.exp(-d2 / (2.0 * ssum))
        )
        if symmetric:
            # keep j >= i only; off-diagonal pairs appear twice
            cols = np.arange(m)[None, :]
            rows = np.arange(lo, hi)[:, None]
            coeff = np.where(cols > rows, 2.0 * coeff, coeff)
        keep = np.abs(coeff) >= drop_threshold
        if symmetric:
            keep &= cols >= rows
        if not keep.any():
            continue
        center = (sb[..., None] * A.centers[lo:hi, None, :]
                  + sa[..., None] * B.centers[None, :, :]) / ssum[..., None]
        # convex combination of the parent centers; clamp away roundoff
        ca = A.centers[lo:hi, None, :]
        cb = B.centers[None, :, :]
        np.clip(center, np.minimum(ca, cb), np.maximum(ca, cb), out=center)
        sigma = sa * sb / ssum
        out_c.append(coeff[keep])
        out_x.append(center[keep])
        out_s.append(np.broadcast_to(sigma, keep.shape)[keep])
    if not out_c:
        return GaussianMixture.empty()
    return GaussianMixture(
        np.concatenate(out_c), np.concatenate(out_x), np.concatenate(out_s)
    )


def mixture_convolve(A, weights, exponents, drop_threshold=DROP_THRESHOLD):
    """Convolve every term of ``A`` with every ``w*exp(-eta*r^2)`` pair.

    Centers are unchanged; used to apply kernel expansions.
    """
    n, m = len(A), len(weights)
    if n == 0 or m == 0:
        return GaussianMixture.empty()
    weights = np.asarray(weights, dtype=float)[None, :]
    eta = np.asarray(exponents, dtype=float)[None, :]
    sa = A.sigmas[:, None]
    sigma_out = sa + 1.0 / (2.0 * eta)
    p = 1.0 / (2.0 * sa)
    coeff = (
        A.coeffs[:, None]
        * weights
        * (np.pi / (p + eta)) ** 1.5
        * atom_amplitude(sa)
        / atom_amplitude(sigma_out)
    )
    keep = np.abs(coeff) >= drop_threshold
    centers = np.broadcast_to(A.centers[:, None, :], (n, m, 3))
    return GaussianMixture(
        coeff[keep], centers[keep], np.broadcast_to(sigma_out, (n, m))[keep]
    )


def mixture_multiply_bare(A, weights, exponents, center,
                          drop_threshold=DROP_THRESHOLD):
    """Multiply ``A`` pointwise by ``sum_n w_n exp(-eta_n*|r-center|^2)``.

    Returns the full set of termwise products (|A| * len(weights) terms
    before dropping).  This is the workhorse for applying a 1/r-type
    potential centered at a nucleus.
    """
    n, m = len(A), len(weights)
    if n == 0 or m == 0:
        return GaussianMixture.empty()
    weights = np.asarray(weights, dtype=float)[None, :]
    eta = np.asarray(exponents, dtype=float)[None, :]
    center = np.asarray(center, dtype=float)
    sb = 1.0 / (2.0 * eta)                      # bare Gaussian as sigma
    sa = A.sigmas[:, None]
    ssum = sa + sb
    d2 = ((A.centers - center[None, :]) ** 2).sum(axis=1)[:, None]
    # product formula with the bare factor's unit amplitude
    # amplitude ratio A(sigma_a)/A(sigma_c) with sigma_c = sa*sb/ssum
    coeff = (
        A.coeffs[:, None]
        * weights
        * (sb / ssum) ** 0.75
        * np.exp(-d2 / (2.0 * ssum))
    )
    keep = np.abs(coeff) >= drop_threshold
    if not keep.any():
        return GaussianMixture.empty()
    centers = (sb[..., None] * A.centers[:, None, :]
               + sa[..., None] * center[None, None, :]) / ssum[..., None]
    # each center sits on the segment between the term center and the
    # potential's center; clamp so roundoff never leaves it
    ca = A.centers[:, None, :]
    cn = center[None, None, :]
    np.clip(centers, np.minimum(ca, cn), np.maximum(ca, cn), out=centers)
    sigma = sa * sb / ssum
    return GaussianMixture(
        coeff[keep], centers[keep], np.broadcast_to(sigma, (n, m))[keep]
    )


def _pair_reduce(A, B, pair_fn):
    """Sum of c_i * c_j * pair_fn over all term pairs, chunked."""
    n, m = len(A), len(B)
    if n == 0 or m == 0:
        return 0.0
    total = 0.0
    rows_per_chunk = max(1, _CHUNK_PAIRS // m)
    for lo in range(0, n, rows_per_chunk):
        hi = min(n, lo + rows_per_chunk)
        vals = pair_fn(
            A.sigmas[lo:hi, None], A.centers[lo:hi, None, :],
            B.sigmas[None, :], B.centers[None, :, :],
        )
        total += float(A.coeffs[lo:hi] @ vals @ B.coeffs)
    return total


def mixture_inner(A, B):
    """L2 inner product <A, B>, exact closed form."""
    return _pair_reduce(A, B, overlap_arrays)


def mixture_kinetic(A, B):
    """Kinetic inner product <-1/2 Delta A, B>, exact closed form."""
    return _pair_reduce(A, B, kinetic_arrays)


def coalesce(mixture, decimals=None):
    """Merge terms with identical (center, sigma), summing coefficients."""
    n = len(mixture)
    if n <= 1:
        return mixture
    key = np.column_stack([mixture.centers, mixture.sigmas])
    if decimals is not None:
        key = np.round(key, decimals)
    order = np.lexsort(key.T[::-1])
    ks = key[order]
    first = np.empty(n, dtype=bool)
    first[0] = True
    np.any(ks[1:] != ks[:-1], axis=1, out=first[1:])
    if first.all():
        return mixture
    gid = np.cumsum(first) - 1
    coeffs = np.bincount(gid, weights=mixture.coeffs[order])
    starts = np.flatnonzero(first)
    return GaussianMixture(coeffs, ks[starts, :3], ks[starts, 3])


# ---------------------------------------------------------------------------
# text dump format: `coeff x y z sigma` per line, 17 significant digits

def dump_mixture(mixture, path, header=None):
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for k in range(len(mixture)):
            c = mixture.coeffs[k]
            x, y, z = mixture.centers[k]
            fh.write(f"{c:.17g} {x:.17g} {y:.17g} {z:.17g} "
                     f"{mixture.sigmas[k]:.17g}\n")


def load_mixture(path):
    coeffs, centers, sigmas = [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields")
            vals = [float(p) for p in parts]
            coeffs.append(vals[0])
            centers.append(vals[1:4])
            sigmas.append(vals[4])
    if not coeffs:
        return GaussianMixture.empty()
    return GaussianMixture(coeffs, centers, sigmas)
