"""Reflection coefficients at imaginary frequency.

Mie coefficients of the sphere and Fresnel coefficients of the plane.
Mie magnitudes are carried in the log domain with separate signs; the
numerators and denominators are rearranged with the Bessel recurrence
x I_{l-1/2}(x) - l I_{l+1/2}(x) = x I_{l+3/2}(x) + (l+1) I_{l+1/2}(x)
so that all building blocks are sums of positive terms and the only
cancellation left is the physical one as the refractive index tends
to 1.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constants import c
from .materials import DielectricModel, PerfectReflector
from .specfun import (
    DomainError,
    LogScaled,
    log_bessel_i_half_array,
    log_bessel_k_half_array,
)


@dataclass(frozen=True)
class MiePair:
    a: LogScaled
    b: LogScaled


@dataclass(frozen=True)
class FresnelPair:
    r_te: float
    r_tm: float


@dataclass(frozen=True)
class MieArrays:
    """log|a_l|, log|b_l| and signs, indexed directly by l (entry 0 unused)."""

    log_a: np.ndarray
    sign_a: np.ndarray
    log_b: np.ndarray
    sign_b: np.ndarray

    @property
    def ell_max(self):
        return len(self.log_a) - 1


def _log_sub(la, lb):
    """log|e^la - e^lb| and sign, elementwise."""
    la = np.asarray(la, dtype=float)
    lb = np.asarray(lb, dtype=float)
    hi = np.maximum(la, lb)
    lo = np.minimum(la, lb)
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(np.isneginf(hi), -np.inf, lo - hi)
        mag = np.where(delta == 0.0, -np.inf, hi + np.log1p(-np.exp(delta)))
    sign = np.where(la > lb, 1, np.where(la < lb, -1, 0))
    return mag, sign


def _zero_mie_arrays(ell_max):
    neg = np.full(ell_max + 1, -np.inf)
    zero = np.zeros(ell_max + 1, dtype=int)
    return MieArrays(neg, zero, neg.copy(), zero.copy())


def mie_log_arrays(ell_max, xi, R, model):
    """Mie coefficients a_l, b_l for l = 1..ell_max in log storage.

    Evaluated at size parameter x = xi R / c with refractive index
    n = sqrt(epsilon(i xi)); the perfect reflector uses the analytic
    n -> infinity limit to avoid catastrophic cancellation.
    """
    if ell_max < 1:
        raise DomainError("ell_max must be >= 1")
    if xi <= 0 or R <= 0:
        raise DomainError("xi and R must be positive")
    x = xi * R / c
    ells = np.arange(1, ell_max + 1)
    log_ell = np.log(ells)
    log_ellp1 = np.log(ells + 1)
    log_x = math.log(x)
    log_half_pi = math.log(math.pi / 2.0)
    sign_a = np.concatenate(([0], np.where(ells % 2 == 0, 1, -1)))
    sign_b = np.concatenate(([0], np.where(ells % 2 == 0, -1, 1)))

    lIx = log_bessel_i_half_array(ell_max + 1, x)
    lKx = log_bessel_k_half_array(ell_max + 1, x)

    if isinstance(model, PerfectReflector):
        log_a = log_half_pi + np.logaddexp(
            log_x + lIx[ells + 1], log_ellp1 + lIx[ells]
        ) - np.logaddexp(log_x + lKx[ells - 1], log_ell + lKx[ells])
        log_b = log_half_pi + lIx[ells] - lKx[ells]
        return MieArrays(
            np.concatenate(([-np.inf], log_a)),
            sign_a,
            np.concatenate(([-np.inf], log_b)),
            sign_b,
        )

    eps = model.epsilon(xi)
    if eps == 1.0:
        return _zero_mie_arrays(ell_max)
    n = math.sqrt(eps)
    log_n = math.log(n)
    lInx = log_bessel_i_half_array(ell_max + 1, n * x)

    # numerator of b: x [n I_{l+1/2}(x) I_{l+3/2}(nx) - I_{l+1/2}(nx) I_{l+3/2}(x)]
    num_b, sgn_num_b = _log_sub(
        log_n + lIx[ells] + lInx[ells + 1], lInx[ells] + lIx[ells + 1]
    )
    num_b = num_b + log_x

    lsc = lInx[ells] + np.logaddexp(log_x + lKx[ells - 1], log_ell + lKx[ells])
    lsd = lKx[ells] + np.logaddexp(log_n + log_x + lInx[ells + 1], log_ellp1 + lInx[ells])
    den_b = np.logaddexp(lsc, lsd)
    log_b = log_half_pi + num_b - den_b

    lsa = lInx[ells] + np.logaddexp(log_x + lIx[ells + 1], log_ellp1 + lIx[ells])
    lsb = lIx[ells] + np.logaddexp(log_n + log_x + lInx[ells + 1], log_ellp1 + lInx[ells])
    num_a, sgn_num_a = _log_sub(2.0 * log_n + lsa, lsb)
    den_a = np.logaddexp(2.0 * log_n + lsc, lsd)
    log_a = log_half_pi + num_a - den_a

    return MieArrays(
        np.concatenate(([-np.inf], log_a)),
        sign_a * np.concatenate(([0], sgn_num_a)),
        np.concatenate(([-np.inf], log_b)),
        sign_b * np.concatenate(([0], sgn_num_b)),
    )


def mie(ell, xi, R, model):
    """Mie pair (a_ell, b_ell) at imaginary frequency xi for a sphere of radius R."""
    if ell < 1:
        raise DomainError("ell must be >= 1")
    arrays = mie_log_arrays(ell, xi, R, model)
    a = LogScaled(arrays.log_a[ell], int(arrays.sign_a[ell]))
    b = LogScaled(arrays.log_b[ell], int(arrays.sign_b[ell]))
    return MiePair(a=a, b=b)


def fresnel_te_tm(xi, k, model, suppress_te=False):
    """Fresnel coefficients (r_te, r_tm) for scalar xi and array-like k."""
    if xi <= 0:
        raise DomainError("xi must be positive")
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise DomainError("transverse wave number must be >= 0")
    kappa_c = np.sqrt((k * c) ** 2 + xi**2)  # c * kappa
    if isinstance(model, PerfectReflector):
        r_te = np.full(k.shape, -1.0)
        r_tm = np.ones(k.shape)
    else:
        eps = model.epsilon(xi)
        disc = np.sqrt(kappa_c**2 + xi**2 * (eps - 1.0))
        r_te = (kappa_c - disc) / (kappa_c + disc)
        r_tm = (eps * kappa_c - disc) / (eps * kappa_c + disc)
    if suppress_te:
        r_te = np.zeros(k.shape)
    return r_te, r_tm


def fresnel(xi, k, model):
    """Fresnel pair at imaginary frequency xi and transverse wave number k."""
    r_te, r_tm = fresnel_te_tm(xi, np.array([float(k)]), model)
    return FresnelPair(r_te=float(r_te[0]), r_tm=float(r_tm[0]))


def fresnel_zero_frequency(model, k):
    """Exact xi -> 0 limit of the Fresnel pair, per zero-frequency class.

    Drude-like responses lose the transverse electric mode entirely;
    plasma-like responses keep a finite TE reflection set by omega_p.
    """
    k = np.asarray(k, dtype=float)
    zfc = model.zero_frequency_class()
    if zfc.kind == "perfect_conductor":
        return np.full(k.shape, -1.0), np.ones(k.shape)
    if zfc.kind == "plasma":
        disc = np.sqrt((k * c) ** 2 + zfc.omega_p**2)
        r_te = (k * c - disc) / (k * c + disc)
        return r_te, np.ones(k.shape)
    return np.zeros(k.shape), np.ones(k.shape)


def sqrt_mie_weight(ell1, ell2, P1, P2, xi, R, model):
    """sqrt(|r_S(ell1,P1)| |r_S(ell2,P2)|) with r_S(l,E) = -a_l, r_S(l,M) = -b_l."""
    arrays = mie_log_arrays(max(ell1, ell2), xi, R, model)

    def log_abs(ell, P):
        if P == "E":
            return arrays.log_a[ell], arrays.sign_a[ell]
        if P == "M":
            return arrays.log_b[ell], arrays.sign_b[ell]
        raise DomainError(f"polarization must be 'E' or 'M', got {P!r}")

    l1, s1 = log_abs(ell1, P1)
    l2, s2 = log_abs(ell2, P2)
    if s1 == 0 or s2 == 0:
        return LogScaled.zero()
    return LogScaled(0.5 * (l1 + l2), 1)
