"""Overflow-safe special functions on the imaginary frequency axis.

Half-integer modified Bessel functions, associated Legendre polynomials
for arguments x >= 1 without the Condon-Shortley phase, and the angular
momentum normalization factor.  All growing quantities are carried in
the log domain since values like P_l^m(x) ~ x^l or I_nu(x) ~ e^x leave
the range of double precision long before l reaches the truncation
orders needed at large aspect ratios.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


class DomainError(ValueError):
    """Argument outside the supported domain of a special function."""


@dataclass(frozen=True)
class LogScaled:
    """A real number stored as log of its magnitude plus a sign.

    sign == 0 encodes an exact zero; log_magnitude is meaningless then.
    """

    log_magnitude: float
    sign: int

    @classmethod
    def from_value(cls, value):
        if value == 0.0:
            return cls(-math.inf, 0)
        return cls(math.log(abs(value)), 1 if value > 0 else -1)

    @classmethod
    def zero(cls):
        return cls(-math.inf, 0)

    def is_zero(self):
        return self.sign == 0

    def value(self):
        """Convert back to an ordinary float (may over-/underflow)."""
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def __mul__(self, other):
        if not isinstance(other, LogScaled):
            return NotImplemented
        sign = self.sign * other.sign
        if sign == 0:
            return LogScaled.zero()
        return LogScaled(self.log_magnitude + other.log_magnitude, sign)

    def sqrt_abs(self):
        """Square root of the absolute value."""
        if self.sign == 0:
            return LogScaled.zero()
        return LogScaled(0.5 * self.log_magnitude, 1)


def _check_positive_x(x):
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"argument must be finite and positive, got {x}")


def _log_i_half(x):
    # I_{1/2}(x) = sqrt(2/(pi x)) sinh(x); log(sinh x) evaluated without overflow
    return 0.5 * math.log(2.0 / (math.pi * x)) + x + math.log1p(-math.exp(-2.0 * x)) - math.log(2.0)


def log_bessel_i_half_array(ell_max, x):
    """log I_{l+1/2}(x) for l = 0..ell_max.

    Uses the downward continued-fraction recurrence for the ratios
    I_{l+1/2}/I_{l-1/2} normalized against the closed form for I_{1/2},
    which is the numerically stable direction for I.
    """
    _check_positive_x(x)
    if ell_max < 0:
        raise DomainError("ell_max must be >= 0")
    out = np.empty(ell_max + 1)
    out[0] = _log_i_half(x)
    if ell_max == 0:
        return out
    # seed far enough above both the order and the argument for convergence
    start = ell_max + 40 + int(1.2 * math.sqrt(ell_max) + x)
    rho = 0.0
    log_ratios = np.empty(ell_max)
    for k in range(start, 0, -1):
        rho = x / ((2 * k + 1) + x * rho)
        if k <= ell_max:
            log_ratios[k - 1] = math.log(rho)
    out[1:] = out[0] + np.cumsum(log_ratios)
    return out


def log_bessel_k_half_array(ell_max, x):
    """log K_{l+1/2}(x) for l = 0..ell_max via stable upward recurrence."""
    _check_positive_x(x)
    if ell_max < 0:
        raise DomainError("ell_max must be >= 0")
    out = np.empty(ell_max + 1)
    log_k_half = 0.5 * math.log(math.pi / (2.0 * x)) - x
    out[0] = log_k_half
    if ell_max == 0:
        return out
    out[1] = log_k_half + math.log1p(1.0 / x)
    # carry scaled values, rescaling before they overflow
    a, b = 1.0, math.exp(out[1] - out[0])  # K_{1/2}, K_{3/2} over K_{1/2}
    offset = out[0]
    for k in range(2, ell_max + 1):
        a, b = b, a + ((2 * k - 1) / x) * b
        if b > 1e280:
            a /= b
            offset += math.log(b)
            b = 1.0
        out[k] = offset + math.log(b)
    return out


def bessel_i_half(ell, x):
    """I_{ell+1/2}(x) as a LogScaled value (always positive)."""
    if ell < 0:
        raise DomainError("ell must be >= 0")
    return LogScaled(log_bessel_i_half_array(ell, x)[ell], 1)


def bessel_k_half(ell, x):
    """K_{ell+1/2}(x) as a LogScaled value (always positive)."""
    if ell < 0:
        raise DomainError("ell must be >= 0")
    return LogScaled(log_bessel_k_half_array(ell, x)[ell], 1)


def _check_plm_args(ell, m, x):
    if m < 0 or m > ell:
        raise DomainError(f"need 0 <= m <= ell, got ell={ell}, m={m}")
    if np.any(np.asarray(x) < 1.0):
        raise DomainError("Legendre argument must satisfy x >= 1")


def log_legendre_plm_array(ell_min, ell_max, m, x):
    """log P_l^m(x) for l = ell_min..ell_max at an array of nodes x >= 1.

    Phase convention (x^2-1)^{m/2} d^m/dx^m P_l(x): all values are
    non-negative for x >= 1 and the upward recurrence in l involves only
    positive terms, hence is stable.  Returns an array of shape
    (ell_max - ell_min + 1, len(x)).
    """
    logp, _ = _legendre_pair_log(ell_min, ell_max, m, x, want_deriv=False)
    return logp


def log_legendre_plm_deriv_array(ell_min, ell_max, m, x):
    """log dP_l^m/dx for l = ell_min..ell_max at nodes x > 1."""
    _, logd = _legendre_pair_log(ell_min, ell_max, m, x, want_deriv=True)
    return logd


def _legendre_pair_log(ell_min, ell_max, m, x, want_deriv=True):
    """Joint upward recurrence for P_l^m and its x-derivative in log scale.

    The values are carried as scaled mantissas with a per-node log
    offset; both P and P' involve only positive terms in the upward
    recurrence for x > 1, so there is no cancellation.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_plm_args(ell_max, m, 1.0)
    if np.any(x < 1.0):
        raise DomainError("Legendre argument must satisfy x >= 1")
    if want_deriv and m >= 1 and np.any(x == 1.0):
        raise DomainError("derivative recurrence requires x > 1 for m >= 1")
    n = x.size
    rows = ell_max - ell_min + 1
    logp = np.full((rows, n), -np.inf)
    logd = np.full((rows, n), -np.inf) if want_deriv else None

    y = x * x - 1.0
    # seeds at l = m: P_m^m = (2m-1)!! (x^2-1)^{m/2}, carried as mantissa 1 with offset
    log_dfac = gammaln(2 * m + 1) - m * math.log(2.0) - gammaln(m + 1)  # log (2m-1)!!
    p = np.ones(n)
    if m == 0:
        off = np.zeros(n)
        d = np.zeros(n)
    else:
        with np.errstate(divide="ignore"):
            off = log_dfac + 0.5 * m * np.log(y)
        # relative to P_m^m the derivative seed is m x/(x^2-1)
        endpoint = y == 0.0
        d = np.where(endpoint, 0.0, m * x / np.where(endpoint, 1.0, y))

    def store(ell, p, d, off):
        if ell_min <= ell <= ell_max:
            i = ell - ell_min
            with np.errstate(divide="ignore"):
                logp[i] = np.where(p > 0.0, np.log(np.where(p > 0.0, p, 1.0)) + off, -np.inf)
                if want_deriv:
                    logd[i] = np.where(d > 0.0, np.log(np.where(d > 0.0, d, 1.0)) + off, -np.inf)

    store(m, p, d, off)
    p_prev, d_prev = np.zeros(n), np.zeros(n)
    for ell in range(m + 1, ell_max + 1):
        if ell == m + 1:
            p_new = (2 * m + 1) * x * p
            d_new = (2 * m + 1) * (p + x * d)
        else:
            c1 = (2 * ell - 1) / (ell - m)
            c2 = (ell + m - 1) / (ell - m)
            p_new = c1 * x * p - c2 * p_prev
            d_new = c1 * (p + x * d) - c2 * d_prev
        p_prev, d_prev, p, d = p, d, p_new, d_new
        big = np.maximum(p, d)
        mask = big > 1e250
        if np.any(mask):
            scale = big[mask]
            p[mask] /= scale
            d[mask] /= scale
            p_prev[mask] /= scale
            d_prev[mask] /= scale
            off[mask] += np.log(scale)
        store(ell, p, d, off)
    return logp, logd


def legendre_plm(ell, m, x):
    """P_ell^m(x) for x >= 1 as a LogScaled value (non-negative)."""
    _check_plm_args(ell, m, x)
    logp = log_legendre_plm_array(ell, ell, m, np.array([x]))[0, 0]
    if logp == -np.inf:
        return LogScaled.zero()
    return LogScaled(logp, 1)


def legendre_plm_deriv(ell, m, x):
    """dP_ell^m/dx for x >= 1, same phase convention.

    The endpoint x = 1 is handled by the analytic limit: finite for
    m = 0 and m = 2, zero for m >= 3, divergent for m = 1 (returned as
    a LogScaled value with infinite log magnitude).
    """
    _check_plm_args(ell, m, x)
    if x == 1.0:
        if m == 0:
            return LogScaled.from_value(ell * (ell + 1) / 2.0)
        if m == 1:
            return LogScaled(math.inf, 1)
        if m == 2:
            val = gammaln(ell + 3) - gammaln(ell - 1) - math.log(4.0)
            return LogScaled(val, 1)
        return LogScaled.zero()
    logd = log_legendre_plm_deriv_array(ell, ell, m, np.array([x]))[0, 0]
    if logd == -np.inf:
        return LogScaled.zero()
    return LogScaled(logd, 1)


def log_lambda_factor(ell, m):
    """log of the normalization sqrt((2l+1)/(l(l+1)) (l-m)!/(l+m)!)."""
    if ell < 1 or m < 0 or m > ell:
        raise DomainError(f"need ell >= 1 and 0 <= m <= ell, got ell={ell}, m={m}")
    return 0.5 * (
        math.log(2 * ell + 1)
        - math.log(ell)
        - math.log(ell + 1)
        + gammaln(ell - m + 1)
        - gammaln(ell + m + 1)
    )


def log_lambda_factor_array(ell_min, ell_max, m):
    """Vector of log normalization factors for l = ell_min..ell_max."""
    if ell_min < 1 or m < 0 or m > ell_min:
        raise DomainError("need ell_min >= 1 and 0 <= m <= ell_min")
    ells = np.arange(ell_min, ell_max + 1, dtype=float)
    return 0.5 * (
        np.log(2 * ells + 1)
        - np.log(ells)
        - np.log(ells + 1)
        + gammaln(ells - m + 1)
        - gammaln(ells + m + 1)
    )


def lambda_factor(ell, m):
    """Normalization factor for the associated Legendre polynomials."""
    return math.exp(log_lambda_factor(ell, m))
