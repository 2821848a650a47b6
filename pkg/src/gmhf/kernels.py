"""Sum-of-Gaussians approximations of radial kernels.

Two kernels are supported: power kernels ``r**(-alpha)`` and the
bound-state Helmholtz Green's function ``exp(-mu*r)/(4*pi*r)``.  Both are
discretizations of integral representations on an exponential grid, so
an expansion is a list of (weight, exponent) pairs meaning
``sum_n w_n * exp(-eta_n * r**2)``.

Every constructor re-verifies its error bound on a log-spaced sample of
the validity range and raises if the bound is not met.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# Grid parameters of the production 1/r expansion: 139 trapezoid nodes
# n = -51..87 plus 8 tabulated small-exponent terms, 147 pairs total.
COULOMB_H = 0.40994422603935795
COULOMB_TAU = 0.192967891816239
COULOMB_RANGE = (1e-7, 1e5)
COULOMB_EPS = 1e-10

# Tabulated (exponent, weight) pairs replacing the small-exponent tail.
_COULOMB_TAIL = [
    (2.1073876854180e-12, 3.2630674210379e-6),
    (1.8365780986634e-11, 3.1058837221013e-6),
    (4.7777245228151e-11, 2.8014247111005e-6),
    (8.5624630300630e-11, 2.5227064974618e-6),
    (1.3289239111902e-10, 2.7039982943831e-6),
    (2.0054640049463e-10, 3.2761422288967e-6),
    (3.0217586807074e-10, 4.0205002817225e-6),
    (4.5529860118663e-10, 4.9351231646262e-6),
]

# Fixed exponent grid of the Helmholtz expansion: exp(h*l)/4, l = -20..120.
HELMHOLTZ_H = 0.38190954773869346734
HELMHOLTZ_L_MIN = -20
HELMHOLTZ_L_MAX = 120

_CERT_SAMPLES = 10_000


class ExpansionError(RuntimeError):
    """Raised when a constructed expansion fails its certification."""


@dataclass(frozen=True)
class KernelExpansion:
    """Radial kernel as ``sum_n w_n exp(-eta_n r^2)`` on [delta, R]."""

    weights: np.ndarray
    exponents: np.ndarray
    valid_range: tuple
    target_accuracy: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        e = np.asarray(self.exponents, dtype=float)
        if w.shape != e.shape or w.ndim != 1:
            raise ValueError("weights and exponents must be 1-D and equal length")
        if (e <= 0.0).any():
            raise ValueError("exponents must be positive")
        if (np.diff(e) <= 0.0).any():
            raise ValueError("exponents must be strictly increasing")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "exponents", e)

    def __len__(self):
        return self.weights.shape[0]

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        r2 = (r * r)[..., None]
        with np.errstate(over="ignore"):
            return (self.weights * np.exp(-self.exponents * r2)).sum(axis=-1)

    def dump(self, path, header=None):
        with open(path, "w") as fh:
            if header:
                for line in header.splitlines():
                    fh.write(f"# {line}\n")
            for w, e in zip(self.weights, self.exponents):
                fh.write(f"{w:.17g} {e:.17g}\n")


def _certify(expansion, kernel, bound, n_samples=_CERT_SAMPLES, label=""):
    """Check |kernel(r) - expansion(r)| <= bound(r) on a log-spaced sample."""
    delta, big_r = expansion.valid_range
    r = np.logspace(math.log10(delta), math.log10(big_r), n_samples)
    err = np.abs(expansion.evaluate(r) - kernel(r))
    bad = err > bound(r)
    if bad.any():
        worst = np.argmax(err / bound(r))
        raise ExpansionError(
            f"{label} certification failed: error {err[worst]:.3e} at "
            f"r={r[worst]:.3e} exceeds bound {bound(r)[worst]:.3e}"
        )
    return float(np.max(err * r))


def build_power_expansion(alpha, delta, big_r, eps, tau=0.0):
    """Certified expansion of r**(-alpha) on [delta, big_r].

    Trapezoid discretization of the Gamma-integral representation on the
    grid t = h*n - tau; nodes are kept iff their weighted Gaussian
    exceeds eps * r**(-alpha) * 1e-2 somewhere on the range.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if not (0.0 < delta < big_r):
        raise ValueError("need 0 < delta < R")
    if not (0.0 < eps <= 1.0 / math.e):
        raise ValueError("eps must be in (0, 1/e]")
    h = 2.0 * math.pi / (
        math.log(3.0)
        + 0.5 * alpha * math.log(1.0 / math.cos(1.0))
        + math.log(1.0 / eps)
    )
    if not (0.0 <= tau < h):
        raise ValueError("tau must satisfy 0 <= tau < h")

    gamma = math.gamma(alpha / 2.0)
    # generous candidate node range, then filter by contribution
    t_lo = 2.0 * (math.log(eps * gamma / h * 1e-3) - math.log(big_r)) / alpha - 5.0
    t_hi = 2.0 * math.log(1.0 / delta) + math.log(max(math.log(1.0 / eps), 2.0)) + 5.0
    n = np.arange(math.floor((t_lo + tau) / h), math.ceil((t_hi + tau) / h) + 1)
    t = h * n - tau
    w = (h / gamma) * np.exp(0.5 * alpha * t)
    eta = np.exp(t)
    # peak of w * r^alpha * exp(-eta r^2) over [delta, R]
    r_star = np.clip(np.sqrt(0.5 * alpha / eta), delta, big_r)
    with np.errstate(over="ignore"):
        peak = w * r_star**alpha * np.exp(-eta * r_star**2)
    keep = peak >= eps * 1e-2
    if not keep.any():
        raise ExpansionError("no trapezoid node passes the inclusion threshold")
    expansion = KernelExpansion(w[keep], eta[keep], (delta, big_r), eps)
    _certify(
        expansion,
        kernel=lambda r: r**-alpha,
        bound=lambda r: eps * r**-alpha,
        label=f"r^-{alpha}",
    )
    return expansion


def power_term_count_bound(alpha, delta, eps):
    """Estimate of the node count needed for r**(-alpha) at accuracy eps."""
    le = math.log(1.0 / eps)
    return 0.1 * (2.0 * le + math.log(alpha) + 2.0) * (
        math.log(1.0 / delta) + le / alpha + math.log(le) + 1.5
    )


@lru_cache(maxsize=1)
def coulomb_reference_expansion():
    """The production 147-term expansion of 1/r on [1e-7, 1e5].

    Hardcoded grid constants plus the tabulated small-exponent tail, so
    runs are bit-reproducible; certified to 1e-10 relative accuracy.
    """
    n = np.arange(-51, 88)
    t = COULOMB_H * n - COULOMB_TAU
    w = (COULOMB_H / math.sqrt(math.pi)) * np.exp(0.5 * t)
    eta = np.exp(t)
    tail_eta = np.array([p[0] for p in _COULOMB_TAIL])
    tail_w = np.array([p[1] for p in _COULOMB_TAIL])
    expansion = KernelExpansion(
        np.concatenate([tail_w, w]),
        np.concatenate([tail_eta, eta]),
        COULOMB_RANGE,
        COULOMB_EPS,
    )
    _certify(
        expansion,
        kernel=lambda r: 1.0 / r,
        bound=lambda r: COULOMB_EPS / r,
        label="coulomb",
    )
    return expansion


def helmholtz_expansion(mu):
    """Certified expansion of exp(-mu*r)/(4*pi*r) on [1e-7, 1e5].

    The exponent grid exp(h*l)/4 is fixed; only the weights depend on mu.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive (orbital energy must be negative)")
    h = HELMHOLTZ_H
    l = np.arange(HELMHOLTZ_L_MIN, HELMHOLTZ_L_MAX + 1)
    with np.errstate(under="ignore"):
        w = (4.0 * np.pi) ** -1.5 * h * np.exp(-mu * mu * np.exp(-h * l) + 0.5 * h * l)
    eta = np.exp(h * l) / 4.0
    expansion = KernelExpansion(w, eta, COULOMB_RANGE, COULOMB_EPS)
    _certify(
        expansion,
        kernel=lambda r: np.exp(-mu * r) / (4.0 * np.pi * r),
        bound=lambda r: COULOMB_EPS / r,
        label=f"helmholtz mu={mu}",
    )
    return expansion
