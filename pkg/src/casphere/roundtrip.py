"""Assembly of the symmetrized round-trip matrix in the multipole basis.

The four polarization blocks are built from semi-infinite integrals of
Fresnel-weighted Legendre products against exp(-2 alpha x).  After the
substitution t = 2 alpha (x - 1) these are evaluated with Gauss-Laguerre
rules whose order is doubled until successive estimates agree.  All
intermediate factors (Legendre values, Mie magnitudes, weights) are kept
in the log domain; the linear-domain accumulation happens as a scaled
matrix product, so a block of dimension d costs O(d^2 n) for n nodes.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import c
from .materials import DielectricModel
from .quadrature import QuadratureError, gauss_laguerre_log
from .reflection import fresnel_te_tm, mie_log_arrays
from .specfun import (
    DomainError,
    LogScaled,
    _legendre_pair_log,
    log_lambda_factor_array,
)

_NODE_CHUNK = 512
_MAX_REFINEMENTS = 6


@dataclass(frozen=True)
class RoundTripParams:
    R: float
    L: float
    xi: float
    m_index: int
    ell_dim: int
    plane_model: DielectricModel
    sphere_model: DielectricModel
    quad_rel_tol: float = 1e-10
    suppress_te: bool = False
    quad_order: int | None = None

    def __post_init__(self):
        if not (self.R > 0 and self.L > 0):
            raise DomainError("R and L must be positive")
        if not self.xi > 0:
            raise DomainError("xi must be positive")
        if self.m_index < 0:
            raise DomainError("m_index must be >= 0")
        if self.ell_dim < max(1, self.m_index):
            raise DomainError("ell_dim must be >= max(1, m_index)")
        if not (0 < self.quad_rel_tol < 1):
            raise DomainError("quad_rel_tol must lie in (0, 1)")

    @property
    def alpha(self):
        return self.xi * (self.L + self.R) / c

    @property
    def ell_min(self):
        return max(1, self.m_index)

    @property
    def block_dim(self):
        return self.ell_dim - self.ell_min + 1


@dataclass
class RoundTripBlock:
    """Polarization blocks of the symmetrized round-trip matrix.

    Indexed by l from ell_min to ell_dim; ME is the exact transpose of
    EM by construction and all entries are finite non-negative doubles.
    """

    ell_min: int
    ell_dim: int
    EE: np.ndarray
    EM: np.ndarray
    ME: np.ndarray
    MM: np.ndarray

    def full(self):
        """The 2d x 2d matrix [[EE, EM], [ME, MM]]."""
        top = np.hstack([self.EE, self.EM])
        bottom = np.hstack([self.ME, self.MM])
        return np.vstack([top, bottom])


@dataclass
class UnsymmetrizedBlock:
    """Round-trip matrix without symmetrization, log-magnitude storage.

    The entries span hundreds of orders of magnitude, hence natural-log
    magnitudes instead of doubles.  Entries that vanish are -inf.
    """

    ell_min: int
    ell_dim: int
    log_EE: np.ndarray
    log_EM: np.ndarray
    log_ME: np.ndarray
    log_MM: np.ndarray

    def log_full(self):
        top = np.hstack([self.log_EE, self.log_EM])
        bottom = np.hstack([self.log_ME, self.log_MM])
        return np.vstack([top, bottom])

    def log10_dynamic_range(self):
        """log10(max/min) over the nonzero entries."""
        logs = self.log_full()
        finite = logs[np.isfinite(logs)]
        if finite.size == 0:
            return 0.0
        return float((finite.max() - finite.min()) / math.log(10.0))


def _nodes(params, order):
    t, logw = gauss_laguerre_log(order)
    x = 1.0 + t / (2.0 * params.alpha)
    k = (params.xi / c) * np.sqrt(x * x - 1.0)
    r_te, r_tm = fresnel_te_tm(params.xi, k, params.plane_model, params.suppress_te)
    log_pref = -2.0 * params.alpha - math.log(2.0 * params.alpha)
    return x, logw, r_te, r_tm, log_pref


def _integral_log_matrices(params, order):
    """Log-magnitude matrices of the A, B, C integrals per polarization.

    Returns {"A": {"TE": logmat, "TM": logmat}, ...}; signs are the
    fixed Fresnel signs (TM >= 0, TE <= 0) and are applied by the
    caller.  A and C vanish identically for m = 0 after the analytic
    cancellation of the m factors in the kernel.
    """
    m = params.m_index
    d = params.block_dim
    x, logw, r_te, r_tm, log_pref = _nodes(params, order)
    y = x * x - 1.0
    loglam = log_lambda_factor_array(params.ell_min, params.ell_dim, m)

    n = x.size
    chunks = [slice(i, min(i + _NODE_CHUNK, n)) for i in range(0, n, _NODE_CHUNK)]

    def legendre_chunk(sl):
        lp, lpd = _legendre_pair_log(params.ell_min, params.ell_dim, m, x[sl])
        half_w = 0.5 * logw[sl]
        return lp + loglam[:, None] + half_w[None, :], lpd + loglam[:, None] + half_w[None, :]

    # pass 1: per-row scales including half the quadrature weight
    s_p = np.full(d, -np.inf)
    s_d = np.full(d, -np.inf)
    for sl in chunks:
        lp, lpd = legendre_chunk(sl)
        s_p = np.maximum(s_p, lp.max(axis=1))
        s_d = np.maximum(s_d, lpd.max(axis=1))

    want_a = m >= 1
    acc = {}
    for key in ("A_TE", "A_TM", "B_TE", "B_TM", "C_TE", "C_TM"):
        if key.startswith(("A", "C")) and not want_a:
            continue
        acc[key] = np.zeros((d, d))

    abs_te = np.abs(r_te)
    abs_tm = np.abs(r_tm)
    for sl in chunks:
        lp, lpd = legendre_chunk(sl)
        U = np.exp(lp - s_p[:, None])
        V = np.exp(lpd - s_d[:, None])
        ysl = y[sl]
        for pol, absr in (("TE", abs_te[sl]), ("TM", abs_tm[sl])):
            if want_a:
                acc[f"A_{pol}"] += (U * (absr * m * m / ysl)) @ U.T
                acc[f"C_{pol}"] += (U * (absr * m)) @ V.T
            acc[f"B_{pol}"] += (V * (absr * ysl)) @ V.T

    def to_log(lin, s_row, s_col):
        with np.errstate(divide="ignore"):
            return s_row[:, None] + s_col[None, :] + log_pref + np.log(lin)

    out = {"A": {}, "B": {}, "C": {}}
    for pol in ("TE", "TM"):
        if want_a:
            out["A"][pol] = to_log(acc[f"A_{pol}"], s_p, s_p)
            out["C"][pol] = to_log(acc[f"C_{pol}"], s_p, s_d)
        else:
            out["A"][pol] = np.full((d, d), -np.inf)
            out["C"][pol] = np.full((d, d), -np.inf)
        out["B"][pol] = to_log(acc[f"B_{pol}"], s_d, s_d)
    return out


def _symmetrized_log(params, order):
    """Log magnitudes (EE, EM, MM) of the symmetrized block; all entries >= 0."""
    ints = _integral_log_matrices(params, order)
    arrays = mie_log_arrays(params.ell_dim, params.xi, params.R, params.sphere_model)
    ells = np.arange(params.ell_min, params.ell_dim + 1)
    la = arrays.log_a[ells]
    lb = arrays.log_b[ells]
    # r_TM > 0 and r_TE < 0, so the printed differences are sums of magnitudes
    log_mm = 0.5 * (lb[:, None] + lb[None, :]) + np.logaddexp(ints["A"]["TM"], ints["B"]["TE"])
    log_ee = 0.5 * (la[:, None] + la[None, :]) + np.logaddexp(ints["B"]["TM"], ints["A"]["TE"])
    log_em = 0.5 * (la[:, None] + lb[None, :]) + np.logaddexp(ints["C"]["TM"], ints["C"]["TE"].T)
    return log_ee, log_em, log_mm, la, lb


def _log_block_rel_diff(first, second):
    """Max entrywise difference relative to the global max, between two
    (EE, EM, MM) log-matrix triples."""
    gmax = max(mat.max() for mat in second[:3])
    if gmax == -np.inf:
        return 0.0 if all(mat.max() == -np.inf for mat in first[:3]) else np.inf
    diff = 0.0
    for f, s in zip(first[:3], second[:3]):
        diff = max(diff, np.abs(np.exp(f - gmax) - np.exp(s - gmax)).max())
    return diff


def _symmetrized_log_resolved(params, start=None):
    """Converged log triple and the quadrature order that produced it.

    The node count is doubled until the block changes by less than
    quad_rel_tol relative to its largest entry.  The rule must resolve
    Legendre functions up to degree ~2 ell_dim, so the starting order
    grows with ell_dim to keep the doubling ladder within reach.
    """
    if params.quad_order is not None:
        return _symmetrized_log(params, params.quad_order), params.quad_order
    if start is None:
        start = max(32, params.ell_dim // 8)
    order = max(8, start)
    current = _symmetrized_log(params, order)
    for _ in range(_MAX_REFINEMENTS):
        doubled = _symmetrized_log(params, 2 * order)
        if _log_block_rel_diff(current, doubled) < params.quad_rel_tol:
            return doubled, 2 * order
        order *= 2
        current = doubled
    raise QuadratureError(
        f"quadrature did not converge after {_MAX_REFINEMENTS} doublings "
        f"(last order {order})",
        last=None,
        previous=None,
    )


def resolve_quad_order(params, start=None):
    """Smallest node count whose doubling changes the block by less than
    quad_rel_tol (relative to the largest entry)."""
    if params.quad_order is not None:
        return params.quad_order
    return _symmetrized_log_resolved(params, start=start)[1]


def assemble_block_resolved(params):
    """Symmetrized block plus the quadrature order that produced it."""
    (log_ee, log_em, log_mm, _, _), order = _symmetrized_log_resolved(params)
    # EE and MM are symmetric analytically; enforce it against rounding
    # in the matrix products so factorizations can rely on exact symmetry
    EE = np.exp(log_ee)
    EE = 0.5 * (EE + EE.T)
    EM = np.exp(log_em)
    MM = np.exp(log_mm)
    MM = 0.5 * (MM + MM.T)
    if not (np.isfinite(EE).all() and np.isfinite(EM).all() and np.isfinite(MM).all()):
        raise FloatingPointError("symmetrized block has non-finite entries")
    block = RoundTripBlock(
        ell_min=params.ell_min,
        ell_dim=params.ell_dim,
        EE=EE,
        EM=EM,
        ME=EM.T.copy(),
        MM=MM,
    )
    return block, order


def assemble_block(params):
    """Symmetrized round-trip block for the given frequency and m index."""
    return assemble_block_resolved(params)[0]


def assemble_block_unsymmetrized(params):
    """Round-trip block without symmetrization, for validation only.

    Obtained from the symmetrized entries by undoing the square-root
    split of the sphere reflection: a diagonal similarity with entries
    sqrt(|r_l,P|), which leaves the determinant untouched but restores
    the enormous dynamic range of the direct operator product.
    """
    (log_ee, log_em, log_mm, la, lb), _ = _symmetrized_log_resolved(params)
    half_a = 0.5 * la
    half_b = 0.5 * lb

    def rescale(logs, row, col):
        # a transparent sphere has log reflection -inf; the rescaled
        # entry is then zero, not the nan of (-inf) - (-inf)
        with np.errstate(invalid="ignore"):
            out = logs + row[:, None] - col[None, :]
        out[np.isneginf(logs)] = -np.inf
        return out

    return UnsymmetrizedBlock(
        ell_min=params.ell_min,
        ell_dim=params.ell_dim,
        log_EE=rescale(log_ee, half_a, half_a),
        log_EM=rescale(log_em, half_a, half_b),
        log_ME=rescale(log_em.T, half_b, half_a),
        log_MM=rescale(log_mm, half_b, half_b),
    )


def kernel_f(params, x, j, p, ell1, ell2):
    """Scalar integrand factor common to the A, B, C integrals."""
    m = params.m_index
    if x < 1.0:
        raise DomainError("kernel argument must satisfy x >= 1")
    if j not in (-1, 0, 1):
        raise DomainError("j must be one of -1, 0, +1")
    if p not in ("TE", "TM"):
        raise DomainError("polarization must be 'TE' or 'TM'")
    if m == 0 and j == -1:
        raise DomainError("j = -1 requires m >= 1")
    loglam = (
        log_lambda_factor_array(ell1, ell1, m)[0]
        + log_lambda_factor_array(ell2, ell2, m)[0]
    )
    k = (params.xi / c) * math.sqrt(x * x - 1.0)
    r_te, r_tm = fresnel_te_tm(params.xi, np.array([k]), params.plane_model, params.suppress_te)
    r = float(r_tm[0] if p == "TM" else r_te[0])
    if r == 0.0:
        return LogScaled.zero()
    y = x * x - 1.0
    if m == 0:
        # only the combination m ((x^2-1)/m)^j with j = +1 survives the m -> 0 limit
        if j == 0:
            return LogScaled.zero()
        if y == 0.0:
            return LogScaled.zero()
        log_mag = loglam + math.log(abs(r)) + math.log(y) - 2.0 * params.alpha * x
    else:
        if y == 0.0 and j != 0:
            if j == 1:
                return LogScaled.zero()
            log_mag = math.inf
        else:
            log_mag = (
                math.log(m)
                + loglam
                + math.log(abs(r))
                + (j * (math.log(y) - math.log(m)) if j != 0 else 0.0)
                - 2.0 * params.alpha * x
            )
    return LogScaled(log_mag, 1 if r > 0 else -1)


def _scalar_integral(params, ell1, ell2, p, which):
    """One entry of the A, B or C integral with doubling refinement."""
    m = params.m_index
    if m == 0 and which in ("A", "C"):
        return LogScaled.zero()
    sign = 1 if p == "TM" else -1

    def evaluate(order):
        x, logw, r_te, r_tm, log_pref = _nodes(params, order)
        absr = np.abs(r_tm if p == "TM" else r_te)
        if np.all(absr == 0.0):
            return -np.inf
        y = x * x - 1.0
        loglam = (
            log_lambda_factor_array(ell1, ell1, m)[0]
            + log_lambda_factor_array(ell2, ell2, m)[0]
        )
        lp1, lpd1 = _legendre_pair_log(ell1, ell1, m, x)
        lp2, lpd2 = _legendre_pair_log(ell2, ell2, m, x)
        with np.errstate(divide="ignore"):
            log_absr = np.log(absr)
            if which == "A":
                terms = lp1[0] + lp2[0] + 2.0 * math.log(m) - np.log(y)
            elif which == "B":
                terms = lpd1[0] + lpd2[0] + np.log(y)
            else:
                terms = lp1[0] + lpd2[0] + (math.log(m) if m else -np.inf)
        samples = logw + log_absr + terms
        peak = samples.max()
        if peak == -np.inf:
            return -np.inf
        return loglam + log_pref + peak + math.log(np.exp(samples - peak).sum())

    if params.quad_order is not None:
        val = evaluate(params.quad_order)
        return LogScaled(val, 0 if val == -np.inf else sign)

    order = 16
    prev = evaluate(order)
    for _ in range(_MAX_REFINEMENTS + 2):
        order *= 2
        cur = evaluate(order)
        if prev == -np.inf and cur == -np.inf:
            return LogScaled.zero()
        if np.isfinite(prev) and np.isfinite(cur):
            rel = abs(math.expm1(prev - cur))
            if rel < params.quad_rel_tol:
                return LogScaled(cur, sign)
        prev = cur
    raise QuadratureError(
        f"integral {which}({ell1},{ell2},{p}) did not converge",
        last=cur,
        previous=prev,
    )


def integral_A(params, ell1, ell2, p):
    """A integral: kernel with j = -1 against P_l1 P_l2."""
    return _scalar_integral(params, ell1, ell2, p, "A")


def integral_B(params, ell1, ell2, p):
    """B integral: kernel with j = +1 against P'_l1 P'_l2."""
    return _scalar_integral(params, ell1, ell2, p, "B")


def integral_C(params, ell1, ell2, p):
    """C integral: kernel with j = 0 against P_l1 P'_l2."""
    return _scalar_integral(params, ell1, ell2, p, "C")


def scattering_matrix(params):
    """Dense 1 - M for the symmetrized block (the matrix whose log-det
    enters the free energy)."""
    block = assemble_block(params)
    full = block.full()
    return np.eye(full.shape[0]) - full


def with_quad_order(params, order):
    """Copy of params pinned to a fixed quadrature order."""
    return replace(params, quad_order=order)


def diagonal_dominance_margin(matrix):
    """Min over rows of |a_ii| - sum_j!=i |a_ij|; positive means strictly
    diagonally dominant.  Diagnostic only."""
    abs_m = np.abs(matrix)
    diag = np.diag(abs_m)
    off = abs_m.sum(axis=1) - diag
    return float((diag - off).min())


def dump_block_csv(block, stream):
    """Write block entries as CSV rows: row, col, polarization pair, value."""
    stream.write("row,col,pol_pair,value\n")
    pairs = (("EE", block.EE), ("EM", block.EM), ("ME", block.ME), ("MM", block.MM))
    for name, mat in pairs:
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                stream.write(
                    f"{block.ell_min + i},{block.ell_min + j},{name},{float(mat[i, j])!r}\n"
                )


def dump_block_log10_csv(block, stream):
    """Write unsymmetrized block entries as CSV of log10 magnitudes."""
    stream.write("row,col,pol_pair,log10_value\n")
    pairs = (
        ("EE", block.log_EE),
        ("EM", block.log_EM),
        ("ME", block.log_ME),
        ("MM", block.log_MM),
    )
    log10 = math.log(10.0)
    for name, mat in pairs:
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                stream.write(
                    f"{block.ell_min + i},{block.ell_min + j},{name},"
                    f"{float(mat[i, j]) / log10!r}\n"
                )
