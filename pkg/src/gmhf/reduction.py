"""Skeleton reduction of Gaussian mixtures with grouping by scale/location.

``reduce_group`` selects a well-conditioned subset of a mixture's atoms
(pivoted Cholesky on the Gram matrix of unit-norm atoms) and projects the
mixture onto their span.  ``grouped_reduce`` first partitions terms into
a global group of flat Gaussians plus per-nucleus groups indexed by a
scale bin j and a radial bin m, then reduces each group independently;
a global reduction is never performed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import GaussianMixture, coalesce, concat, mixture_inner

_EPS_MACH = np.finfo(float).eps


class ReductionError(RuntimeError):
    """Gram factorization lost positive-definiteness beyond tolerance."""


@dataclass(frozen=True, order=True)
class GroupKey:
    """Identifier of one reduction group.

    kind 0 = global, 1 = shell (radial bin m at scale j), 2 = cusp.
    """

    kind: int
    nucleus: int = -1
    j: int = -1
    m: int = -1

    GLOBAL = 0
    SHELL = 1
    CUSP = 2

    def __str__(self):
        if self.kind == self.GLOBAL:
            return "global"
        tag = "shell" if self.kind == self.SHELL else "cusp"
        return f"{tag}(l={self.nucleus},j={self.j},m={self.m})"


@dataclass(frozen=True)
class GroupingConfig:
    sigma_far: float = 1.0
    J: int = 4
    J_tilde: int = 26
    reduction_eps: float = 1e-6

    def __post_init__(self):
        if self.sigma_far <= 0.0:
            raise ValueError("sigma_far must be positive")
        if not (self.J_tilde > self.J >= 0):
            raise ValueError("need J_tilde > J >= 0")
        if self.reduction_eps <= 0.0:
            raise ValueError("reduction_eps must be positive")

    def possible_group_count(self, n_nuclei):
        """Number of admissible group keys, including the global group."""
        shells = sum(2**j for j in range(self.J + 1))
        cusps = self.J_tilde - self.J
        return 1 + n_nuclei * (shells + cusps)


def assign_groups(mixture, nuclei_positions, cfg):
    """Vectorized group assignment for every term of a mixture.

    Returns (kind, nucleus, j, m) integer arrays; kind = -1 marks terms
    that fall outside all maintained groups and are discarded.
    """
    n = len(mixture)
    R = np.asarray(nuclei_positions, dtype=float).reshape(-1, 3)
    kind = np.full(n, -1, dtype=np.int64)
    nuc = np.full(n, -1, dtype=np.int64)
    jbin = np.full(n, -1, dtype=np.int64)
    mbin = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return kind, nuc, jbin, mbin

    sig = mixture.sigmas
    is_global = sig >= cfg.sigma_far
    kind[is_global] = GroupKey.GLOBAL

    loc = ~is_global
    if loc.any():
        d = np.linalg.norm(
            mixture.centers[loc][:, None, :] - R[None, :, :], axis=2
        )
        nearest = np.argmin(d, axis=1)          # ties -> lowest index
        dist = d[np.arange(d.shape[0]), nearest]
        # s_l^max over all terms of the mixture, per nucleus
        d_all = np.linalg.norm(
            mixture.centers[:, None, :] - R[None, :, :], axis=2
        )
        s_max = d_all.max(axis=0)

        # scale bin: sigma in [4^{-j-1}, 4^{-j}) * sigma_far  <=>  j = ceil(u)-1
        u = np.log(cfg.sigma_far / sig[loc]) / np.log(4.0)
        j = np.ceil(u).astype(np.int64) - 1
        j = np.maximum(j, 0)                    # guard roundoff at sigma_far

        shell = j <= cfg.J
        cusp = (j > cfg.J) & (j <= cfg.J_tilde)

        sm = s_max[nearest]
        # radial bin, half-open with the last bin closed
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(sm > 0.0, np.floor(dist * 2.0**j / np.maximum(sm, 1e-300)), 0.0)
        m = np.minimum(m.astype(np.int64), 2**np.minimum(j, 62) - 1)
        m = np.maximum(m, 0)

        in_cusp = cusp & (dist <= sm / 2.0**np.minimum(j, 1023))

        idx = np.flatnonzero(loc)
        kind[idx[shell]] = GroupKey.SHELL
        nuc[idx[shell]] = nearest[shell]
        jbin[idx[shell]] = j[shell]
        mbin[idx[shell]] = m[shell]
        kind[idx[in_cusp]] = GroupKey.CUSP
        nuc[idx[in_cusp]] = nearest[in_cusp]
        jbin[idx[in_cusp]] = j[in_cusp]
        mbin[idx[in_cusp]] = 0
    return kind, nuc, jbin, mbin


def assign_group(term, nuclei_positions, cfg):
    """Group key for a single term, or None if the term is discarded.

    Note the radial bins depend on the whole mixture through s_l^max, so
    this entry point is only meaningful with the term's host mixture; it
    is provided for single-term mixtures and tests.
    """
    mix = GaussianMixture.single(term.coeff, term.center, term.sigma)
    kind, nuc, j, m = assign_groups(mix, nuclei_positions, cfg)
    if kind[0] < 0:
        return None
    return GroupKey(int(kind[0]), int(nuc[0]), int(j[0]), int(m[0]))


def _pivoted_cholesky(mixture, eps, min_rank=1):
    """Select skeleton atoms by pivoted Cholesky on the unit-diagonal Gram.

    Returns (selected indices, Cholesky rows over all columns, raw Gram
    rows of the selected pivots).  Stops when the largest remaining
    diagonal falls below max(eps**2, roundoff floor).
    """
    n = len(mixture)
    sig = mixture.sigmas
    # shift centers to the group mean so the expanded-square distance
    # formula below stays accurate for tight clusters of small sigmas
    cen = mixture.centers - mixture.centers.mean(axis=0)
    sqrt_sig = np.sqrt(sig)
    cen2 = (cen * cen).sum(axis=1)
    d = np.ones(n)
    floor = 64.0 * _EPS_MACH
    thresh = max(eps * eps, floor)
    sel = []
    cap = min(n, 192)
    L = np.empty((cap, n))
    G = np.empty((cap, n))
    k = 0
    while True:
        p = int(np.argmax(d))
        piv = d[p]
        if k == n or piv <= floor or (piv <= thresh and k >= min_rank):
            break
        if k == cap:
            cap *= 2
            L = np.vstack([L, np.empty((cap - k, n))])
            G = np.vstack([G, np.empty((cap - k, n))])
        # overlap of pivot atom with every atom; distances via a matvec
        ssum = sig[p] + sig
        t = (2.0 * sqrt_sig[p]) * sqrt_sig / ssum
        d2 = cen2 + cen2[p] - 2.0 * (cen @ cen[p])
        np.maximum(d2, 0.0, out=d2)
        row = t * np.sqrt(t) * np.exp(-d2 / (2.0 * ssum))
        G[k] = row
        if k:
            row = row - L[:k, p] @ L[:k, :]
        row = row / np.sqrt(piv)
        L[k] = row
        d -= row * row
        sel.append(p)
        d[sel] = 0.0                            # ignore markers in the PD check
        if d.min() < -1e-6:
            raise ReductionError(
                f"Gram diagonal became negative ({d.min():.3e}); "
                "reduction needs tighter arithmetic"
            )
        np.maximum(d, 0.0, out=d)
        d[sel] = -1.0                           # never re-pick a pivot
        k += 1
    return np.asarray(sel, dtype=np.int64), L[:k], G[:k]


def _solve_coefficients(G_ss, b, eps):
    cf = None
    try:
        cf = scipy.linalg.cho_factor(G_ss, check_finite=False)
    except np.linalg.LinAlgError:
        jitter = 1e-3 * eps * eps
        try:
            cf = scipy.linalg.cho_factor(
                G_ss + jitter * np.eye(G_ss.shape[0]), check_finite=False
            )
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(G_ss, b, rcond=None)[0]
    x = scipy.linalg.cho_solve(cf, b, check_finite=False)
    # iterative refinement with extended-precision residuals; the skeleton
    # Gram can be conditioned like 1/eps^2
    G_l = G_ss.astype(np.longdouble)
    b_l = b.astype(np.longdouble)
    for _ in range(3):
        r = np.asarray(b_l - G_l @ x.astype(np.longdouble), dtype=float)
        if not np.isfinite(r).all():
            break
        x = x + scipy.linalg.cho_solve(cf, r, check_finite=False)
    return x


def reduce_group(mixture, eps, check=False, min_terms=1):
    """Skeleton reduction of one mixture: ||in - out|| <= eps * ||in||.

    Output atoms are a subset of the input atoms with updated
    coefficients (least-squares projection onto the skeleton span).
    With ``check=True`` the achieved error is verified in closed form
    and the pivot threshold is tightened on failure.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    mixture = coalesce(mixture)
    n = len(mixture)
    if n <= 1:
        return mixture

    sel, _, G_rows = _pivoted_cholesky(mixture, eps, min_rank=min_terms)
    b = G_rows @ mixture.coeffs
    G_ss = G_rows[:, sel]
    x = _solve_coefficients(G_ss, b, eps)
    out = GaussianMixture(x, mixture.centers[sel], mixture.sigmas[sel])

    if check:
        norm = np.sqrt(max(float(_quad_form_extended(mixture, mixture.coeffs)), 0.0))
        err = reduction_error(mixture, out)
        if norm > 0.0 and err > eps * norm:
            # eps^2 pivot threshold was not tight enough; redo at the floor
            sel, _, G_rows = _pivoted_cholesky(
                mixture, np.sqrt(2.0 * 64.0 * _EPS_MACH), min_rank=min_terms
            )
            b = G_rows @ mixture.coeffs
            G_ss = G_rows[:, sel]
            x = _solve_coefficients(G_ss, b, eps)
            out = GaussianMixture(x, mixture.centers[sel], mixture.sigmas[sel])
            err = reduction_error(mixture, out)
            if err > eps * norm:
                raise ReductionError(
                    f"reduction error {err:.3e} exceeds "
                    f"eps*||f|| = {eps * norm:.3e}"
                )
    return out


def _quad_form_extended(mixture, coeffs):
    """c^T G c in extended precision (verification helper, O(n^2))."""
    sig = mixture.sigmas.astype(np.longdouble)
    cen = mixture.centers.astype(np.longdouble)
    c = np.asarray(coeffs, dtype=np.longdouble)
    total = np.longdouble(0.0)
    chunk = max(1, 2_000_000 // max(len(mixture), 1))
    for lo in range(0, len(mixture), chunk):
        hi = min(len(mixture), lo + chunk)
        d2 = ((cen[lo:hi, None, :] - cen[None, :, :]) ** 2).sum(axis=2)
        ssum = sig[lo:hi, None] + sig[None, :]
        G = (2.0 * np.sqrt(sig[lo:hi, None] * sig[None, :]) / ssum) ** 1.5 \
            * np.exp(-d2 / (2.0 * ssum))
        total += c[lo:hi] @ G @ c
    return total


def reduction_error(original, reduced):
    """||original - reduced||_2 in extended precision.

    Exact Gram quadratic form; extended precision keeps the heavy
    cancellation between the two representations from swamping errors
    near machine level.
    """
    diff = concat([original, reduced.scaled(-1.0)])
    return float(np.sqrt(max(float(_quad_form_extended(diff, diff.coeffs)), 0.0)))


def grouped_reduce(mixture, mol, cfg, check=False, diagnostics=None,
                   compress=False):
    """Partition into groups, reduce each independently, concatenate.

    Terms outside all maintained groups are discarded.  Output order is
    deterministic: groups are concatenated in sorted GroupKey order.
    ``diagnostics``, if given, is called with one line per reduced group.

    With ``compress=True`` a second pass sheds groups whose entire norm
    is negligible against the mixture and thins near-negligible ones; it
    is meant as a one-shot output compression of converged mixtures, not
    for use inside an iteration (drop decisions near the threshold can
    flip between calls, which shows up as noise in a fixed-point loop).
    """
    if len(mixture) == 0:
        return mixture
    kind, nuc, jbin, mbin = assign_groups(mixture, mol.positions, cfg)
    kept = kind >= 0
    if not kept.any():
        return GaussianMixture.empty()

    # pack (kind, nucleus, j, m) into one sortable integer id
    code = (
        kind.astype(np.int64) * 2**40
        + (nuc + 1) * 2**30
        + (jbin + 1) * 2**16
        + (mbin + 1)
    )
    code[~kept] = -1
    order = np.argsort(code, kind="stable")
    order = order[kept[order]]
    codes_sorted = code[order]
    boundaries = np.flatnonzero(np.diff(codes_sorted)) + 1
    starts = np.concatenate([[0], boundaries])
    stops = np.concatenate([boundaries, [codes_sorted.size]])

    def key_at(s):
        c = codes_sorted[s]
        return GroupKey(
            int(c >> 40), int(((c >> 30) & 0x3FF) - 1),
            int(((c >> 16) & 0x3FFF) - 1), int((c & 0xFFFF) - 1),
        )

    # First pass: plain per-group reduction at the requested tolerance.
    # At least two atoms are kept per group (when available) so the
    # skeleton tracks a group's scale spread, not just its mass.
    eps = cfg.reduction_eps
    pieces = []
    for s, t in zip(starts, stops):
        group = mixture.subset(order[s:t])
        try:
            red = reduce_group(group, eps, check=check, min_terms=2)
        except ReductionError as exc:
            raise ReductionError(f"group {key_at(s)}: {exc}") from exc
        pieces.append((s, len(group), red))

    if not compress:
        if diagnostics is not None:
            for s, n_in, red in pieces:
                diagnostics(f"{key_at(s)} in={n_in} out={len(red)}")
        return concat([red for _, _, red in pieces])

    # Second pass: per-group tolerances from a shared error budget.
    def _best_single_atom(m):
        # project onto each unit-norm atom of m, keep the best fit
        best, best_c = 0, 0.0
        for i in range(len(m)):
            gi = GaussianMixture.single(1.0, m.centers[i], m.sigmas[i])
            c = mixture_inner(m, gi)
            if abs(c) > abs(best_c):
                best, best_c = i, c
        return GaussianMixture.single(best_c, m.centers[best], m.sigmas[best])


    # Every group may spend at least eps*|f|/K in absolute terms,
    # so low-norm groups get a proportionally looser tolerance (their
    # detail cannot matter at the eps level) and are dropped outright
    # once their entire norm fits inside the floor.  Groups carrying
    # real mass are untouched; cumulative error stays below 2*eps*|f|.
    # Norms are measured on the reduced skeletons, so this pass is cheap.
    norms = np.array(
        [np.sqrt(max(mixture_inner(p, p), 0.0)) for _, _, p in pieces]
    )
    total = np.sqrt((norms**2).sum())
    budget = eps * total / len(pieces)

    out = []
    for (s, n_in, red), norm in zip(pieces, norms):
        if norm <= budget and norm < total:
            if diagnostics is not None:
                diagnostics(f"{key_at(s)} in={n_in} out=0")
            continue
        if norm <= 2.0 * budget and norm < total:
            # barely above the shedding line: no loosened skeleton can
            # collapse a group of near-orthogonal atoms, so keep only
            # its best single-atom approximation
            red = _best_single_atom(red)
        elif norm > 0.0 and budget / norm > eps:
            # loosen on a sublinear schedule so groups well below the
            # mixture's scale thin out hard while mid-weight groups
            # are barely touched
            eps_g = min(0.5, (budget / norm) ** 0.8)
            try:
                red = reduce_group(red, eps_g, check=check)
            except ReductionError as exc:
                raise ReductionError(f"group {key_at(s)}: {exc}") from exc
        if diagnostics is not None:
            diagnostics(f"{key_at(s)} in={n_in} out={len(red)}")
        out.append(red)
    if not out:
        return GaussianMixture.empty()
    return concat(out)


def group_statistics(mixture, mol, cfg):
    """Statistics of the current grouping of a mixture.

    Returns dict with N_global, N_groups (non-empty, excluding global),
    N_max, N_min, N_ave over those non-empty groups.
    """
    kind, nuc, jbin, mbin = assign_groups(mixture, mol.positions, cfg)
    n_global = int((kind == GroupKey.GLOBAL).sum())
    local = kind > GroupKey.GLOBAL
    stats = {"N_global": n_global, "N_groups": 0, "N_max": 0,
             "N_min": 0, "N_ave": 0.0}
    if local.any():
        code = (
            kind[local] * 2**40 + (nuc[local] + 1) * 2**30
            + (jbin[local] + 1) * 2**16 + (mbin[local] + 1)
        )
        _, counts = np.unique(code, return_counts=True)
        stats.update(
            N_groups=int(counts.size),
            N_max=int(counts.max()),
            N_min=int(counts.min()),
            N_ave=float(counts.mean()),
        )
    return stats
