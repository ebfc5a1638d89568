"""Free energy, force and PFA reference for the sphere-plane geometry.

The free energy is a sum over Matsubara frequencies and azimuthal
indices of log-determinants of scattering matrices; at zero temperature
the frequency sum becomes an integral handled by Gauss-Laguerre
quadrature.  The force comes from a Richardson-refined central
difference in the gap; to make the difference well conditioned, the
adaptive choices (multipole cutoff, quadrature orders, sum cutoffs) of
the first evaluation are recorded in a plan and pinned for the shifted
evaluations, so truncation errors cancel between them.
"""

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .constants import CODATA, c, hbar, k_B
from .lindet import logdet_cholesky, logdet_hodlr
from .materials import DielectricModel, PerfectReflector, Plasma
from .quadrature import gauss_laguerre_log, neville_to_zero
from .reflection import fresnel_te_tm, fresnel_zero_frequency
from .roundtrip import RoundTripParams, assemble_block_resolved

# dimensionless frequencies u = xi (L+R)/c used to extrapolate the
# zero-frequency term
_ZERO_FREQ_SAMPLES = (1e-3, 5e-4, 2.5e-4)
_CONSECUTIVE_BELOW = 3
_PASSIVITY_SLACK = 1e-12
_MAX_MATSUBARA_TERMS = 100000


class ConvergenceError(RuntimeError):
    """A sum or quadrature failed to converge to the requested tolerance."""


def ell_dim_auto(R, L):
    """Default multipole cutoff: 5 R/L with a floor of 20."""
    return max(20, math.ceil(5.0 * R / L))


@dataclass(frozen=True)
class JobSpec:
    R: float
    L: float
    T: float
    plane_model: DielectricModel
    sphere_model: DielectricModel
    ell_dim: int | None = None
    backend: str = "cholesky"
    matsubara_rel_tol: float = 1e-8
    m_sum_rel_tol: float = 1e-8
    quad_rel_tol: float = 1e-10
    zero_freq_policy: str | None = None
    jobs: int = 1
    hodlr_leaf_size: int = 64
    hodlr_tol: float = 1e-13

    def __post_init__(self):
        if not (self.R > 0 and self.L > 0):
            raise ValueError("R and L must be positive")
        if self.T < 0:
            raise ValueError("temperature must be >= 0")
        if self.backend not in ("cholesky", "hodlr"):
            raise ValueError(f"unknown backend {self.backend!r}")
        for name in ("matsubara_rel_tol", "m_sum_rel_tol", "quad_rel_tol"):
            value = getattr(self, name)
            if not (0 < value < 1):
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.zero_freq_policy not in (None, "drude", "plasma", "perfect"):
            raise ValueError(f"unknown zero_freq_policy {self.zero_freq_policy!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def resolved_ell_dim(self):
        return self.ell_dim if self.ell_dim is not None else ell_dim_auto(self.R, self.L)

    def resolved_zero_freq_policy(self):
        if self.zero_freq_policy is not None:
            return self.zero_freq_policy
        kind = self.plane_model.zero_frequency_class().kind
        return {"perfect_conductor": "perfect", "plasma": "plasma", "drude": "drude"}[kind]

    def describe(self):
        return {
            "R_m": self.R,
            "L_m": self.L,
            "T_K": self.T,
            "plane_model": self.plane_model.describe(),
            "sphere_model": self.sphere_model.describe(),
            "ell_dim": self.resolved_ell_dim(),
            "backend": self.backend,
            "matsubara_rel_tol": self.matsubara_rel_tol,
            "m_sum_rel_tol": self.m_sum_rel_tol,
            "quad_rel_tol": self.quad_rel_tol,
            "zero_freq_policy": self.resolved_zero_freq_policy(),
            "jobs": self.jobs,
        }


@dataclass
class CasimirResult:
    free_energy: float
    force: float | None = None
    f_pfa: float | None = None
    correction: float | None = None
    ledger: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self, spec=None):
        out = {
            "free_energy_J": self.free_energy,
            "force_N": self.force,
            "f_pfa_N": self.f_pfa,
            "correction": self.correction,
            "ledger": [list(entry) for entry in self.ledger],
            "diagnostics": self.diagnostics,
        }
        if spec is not None:
            out["spec"] = spec.describe()
        return out


def _block_logdet(spec, xi, m, ell_dim, quad_order, suppress_te):
    """log det(1 - M) for one (xi, m) block; returns (logdet, order used)."""
    params = RoundTripParams(
        R=spec.R,
        L=spec.L,
        xi=xi,
        m_index=m,
        ell_dim=ell_dim,
        plane_model=spec.plane_model,
        sphere_model=spec.sphere_model,
        quad_rel_tol=spec.quad_rel_tol,
        suppress_te=suppress_te,
        quad_order=quad_order,
    )
    block, quad_order = assemble_block_resolved(params)
    full = block.full()
    matrix = np.eye(full.shape[0]) - full
    if spec.backend == "hodlr":
        ld = logdet_hodlr(matrix, leaf_size=spec.hodlr_leaf_size, tol=spec.hodlr_tol)
    else:
        ld = logdet_cholesky(matrix)
    if ld > _PASSIVITY_SLACK:
        warnings.warn(
            f"positive logdet {ld:g} at xi={xi:g}, m={m}; passivity violated",
            stacklevel=2,
        )
    return ld, quad_order


def _block_task(args):
    spec, xi, m, ell_dim, quad_order, suppress_te = args
    return _block_logdet(spec, xi, m, ell_dim, quad_order, suppress_te)[0]


def _map_logdets(executor, spec, xi, ms, ell_dim, quad_order, suppress_te):
    tasks = [(spec, xi, m, ell_dim, quad_order, suppress_te) for m in ms]
    if executor is None:
        return [_block_task(task) for task in tasks]
    return list(executor.map(_block_task, tasks))


def _m_sum(spec, xi, ell_dim, suppress_te, plan_entry=None, executor=None):
    """Weighted sum over m of block log-determinants at one frequency.

    Weight 1 for m = 0 and 2 for m >= 1; adaptively truncated after 3
    consecutive terms below tolerance unless a plan entry pins the
    range.  Returns (total, [(m, logdet)], plan_entry).
    """
    if plan_entry is not None:
        quad_order = plan_entry["quad_order"]
        m_max = plan_entry["m_max"]
        lds = _map_logdets(
            executor, spec, xi, range(m_max + 1), ell_dim, quad_order, suppress_te
        )
        terms = list(zip(range(m_max + 1), lds))
        total = sum((1 if m == 0 else 2) * ld for m, ld in terms)
        return total, terms, plan_entry

    ld0, quad_order = _block_logdet(spec, xi, 0, ell_dim, None, suppress_te)
    terms = [(0, ld0)]
    total = ld0
    below = 0
    m = 1
    batch = max(1, spec.jobs)
    while m <= ell_dim and below < _CONSECUTIVE_BELOW:
        ms = list(range(m, min(m + batch, ell_dim + 1)))
        lds = _map_logdets(executor, spec, xi, ms, ell_dim, quad_order, suppress_te)
        for mi, ld in zip(ms, lds):
            term = 2.0 * ld
            total += term
            terms.append((mi, ld))
            if total == 0.0 or abs(term) < spec.m_sum_rel_tol * abs(total):
                below += 1
            else:
                below = 0
            if below >= _CONSECUTIVE_BELOW:
                break
        m = ms[-1] + 1
    plan_entry = {"quad_order": quad_order, "m_max": terms[-1][0]}
    return total, terms, plan_entry


def _plasma_limit_model(model):
    """Model whose small-frequency response realizes the plasma
    prescription: dissipative models with a known plasma frequency are
    replaced by the lossless plasma form; models without one (perfect
    reflector, vacuum, tabulated data) are left as they are."""
    if model.zero_frequency_class().kind == "plasma":
        return model
    omega_p = getattr(model, "omega_p", None)
    if omega_p is not None:
        return Plasma(omega_p=omega_p)
    return model


def _zero_freq_m_sum(spec, ell_dim, plan_entry=None, executor=None):
    """Zero-frequency term by extrapolating small-frequency evaluations.

    Evaluates the m-sum per term at three small dimensionless
    frequencies and extrapolates each m term to zero polynomially.
    Under the Drude policy the plane TE reflection is zeroed exactly;
    under the plasma policy both bodies take their plasma limit.
    """
    policy = spec.resolved_zero_freq_policy()
    suppress_te = policy == "drude"
    eval_spec = spec
    if policy == "plasma":
        eval_spec = replace(
            spec,
            plane_model=_plasma_limit_model(spec.plane_model),
            sphere_model=_plasma_limit_model(spec.sphere_model),
        )
    us = _ZERO_FREQ_SAMPLES
    xis = [u * c / (spec.L + spec.R) for u in us]

    total0, terms0, entry = _m_sum(
        eval_spec, xis[0], ell_dim, suppress_te, plan_entry=plan_entry, executor=executor
    )
    columns = [dict(terms0)]
    for xi in xis[1:]:
        _, terms, _ = _m_sum(
            eval_spec, xi, ell_dim, suppress_te, plan_entry=entry, executor=executor
        )
        columns.append(dict(terms))

    terms_extrapolated = []
    total = 0.0
    for m, _ in terms0:
        values = [col[m] for col in columns]
        ld = neville_to_zero(us, values)
        terms_extrapolated.append((m, ld))
        total += (1 if m == 0 else 2) * ld
    return total, terms_extrapolated, entry


def matsubara_frequency(n, T):
    return 2.0 * math.pi * n * k_B * T / hbar


def _make_executor(spec):
    if spec.jobs > 1:
        return ProcessPoolExecutor(max_workers=spec.jobs)
    return None


def free_energy(spec, _plan=None):
    """Casimir free energy at T > 0 via the Matsubara sum."""
    if spec.T <= 0:
        raise ValueError("free_energy requires T > 0; use free_energy_T0 at T = 0")
    start = time.perf_counter()
    ell_dim = _plan["ell_dim"] if _plan else spec.resolved_ell_dim()
    executor = _make_executor(spec)
    try:
        ledger = []
        plan_terms = {} if _plan is None else _plan["terms"]

        total0, terms0, entry0 = _zero_freq_m_sum(
            spec, ell_dim, plan_entry=plan_terms.get("0"), executor=executor
        )
        plan_terms["0"] = entry0
        ledger.extend((0, m, ld) for m, ld in terms0)
        total = total0

        if _plan is not None:
            n_max = _plan["n_max"]
            for n in range(1, n_max + 1):
                xi = matsubara_frequency(n, spec.T)
                dn, terms, _ = _m_sum(
                    spec, xi, ell_dim, False,
                    plan_entry=plan_terms[str(n)], executor=executor,
                )
                total += 2.0 * dn
                ledger.extend((n, m, ld) for m, ld in terms)
        else:
            below = 0
            n = 0
            while below < _CONSECUTIVE_BELOW:
                n += 1
                if n > _MAX_MATSUBARA_TERMS:
                    raise ConvergenceError(
                        f"Matsubara sum not converged after {n - 1} terms"
                    )
                xi = matsubara_frequency(n, spec.T)
                dn, terms, entry = _m_sum(spec, xi, ell_dim, False, executor=executor)
                plan_terms[str(n)] = entry
                term = 2.0 * dn
                total += term
                ledger.extend((n, m, ld) for m, ld in terms)
                if total == 0.0 or abs(term) < spec.matsubara_rel_tol * abs(total):
                    below += 1
                else:
                    below = 0
            n_max = n
        plan = {"ell_dim": ell_dim, "n_max": n_max if _plan is None else _plan["n_max"],
                "terms": plan_terms}
    finally:
        if executor is not None:
            executor.shutdown()

    energy = 0.5 * k_B * spec.T * total
    diagnostics = {
        "ell_dim": ell_dim,
        "backend": spec.backend,
        "zero_freq_policy": spec.resolved_zero_freq_policy(),
        "matsubara_terms": plan["n_max"] + 1,
        "wall_time_s": time.perf_counter() - start,
        "constants": dict(CODATA),
        "plan": plan,
    }
    ledger.sort(key=lambda entry: (entry[0], entry[1]))
    return CasimirResult(free_energy=energy, ledger=ledger, diagnostics=diagnostics)


def free_energy_T0(spec, _plan=None):
    """Casimir energy at T = 0: frequency integral by Gauss-Laguerre.

    In the dimensionless frequency u = xi (L+R)/c the integrand decays
    like exp(-2 L u / (L+R)), so the nodes are placed by the further
    substitution t = 2 L u / (L+R).
    """
    if spec.T != 0:
        raise ValueError("free_energy_T0 requires T = 0 exactly")
    start = time.perf_counter()
    ell_dim = _plan["ell_dim"] if _plan else spec.resolved_ell_dim()
    beta = 2.0 * spec.L / (spec.L + spec.R)
    executor = _make_executor(spec)

    def evaluate(order, node_plans):
        nodes, logw = gauss_laguerre_log(order)
        coeff = np.exp(logw + nodes)
        total = 0.0
        ledger = []
        entries = {}
        for i, t in enumerate(nodes):
            u = t / beta
            xi = u * c / (spec.L + spec.R)
            key = f"node{i}"
            dsum, terms, entry = _m_sum(
                spec, xi, ell_dim, False,
                plan_entry=None if node_plans is None else node_plans[key],
                executor=executor,
            )
            entries[key] = entry
            total += coeff[i] * dsum
            ledger.extend((i, m, ld) for m, ld in terms)
        return total / beta, ledger, entries

    try:
        if _plan is not None:
            order = _plan["xi_order"]
            total_u, ledger, entries = evaluate(order, _plan["terms"])
        else:
            order = 12
            total_u, ledger, entries = evaluate(order, None)
            for _ in range(8):
                next_order = max(order + 1, int(order * 1.5))
                total_next, ledger_next, entries_next = evaluate(next_order, None)
                converged = (
                    total_next == total_u
                    or abs(total_next - total_u) < spec.matsubara_rel_tol * abs(total_next)
                )
                order, total_u, ledger, entries = next_order, total_next, ledger_next, entries_next
                if converged:
                    break
            else:
                raise ConvergenceError(
                    f"frequency quadrature not converged at order {order}"
                )
    finally:
        if executor is not None:
            executor.shutdown()

    energy = (hbar * c / (2.0 * math.pi * (spec.L + spec.R))) * total_u
    plan = {"ell_dim": ell_dim, "xi_order": order, "terms": entries}
    diagnostics = {
        "ell_dim": ell_dim,
        "backend": spec.backend,
        "zero_freq_policy": spec.resolved_zero_freq_policy(),
        "xi_quadrature_order": order,
        "wall_time_s": time.perf_counter() - start,
        "constants": dict(CODATA),
        "plan": plan,
    }
    ledger.sort(key=lambda entry: (entry[0], entry[1]))
    return CasimirResult(free_energy=energy, ledger=ledger, diagnostics=diagnostics)


def _energy_function(spec):
    return free_energy_T0 if spec.T == 0 else free_energy


def force(spec, fd_rel_step=1e-4, fd_agreement_tol=1e-4):
    """Casimir force -dF/dL by Richardson-refined central differences.

    The shifted evaluations reuse the plan (cutoffs and quadrature
    orders) of the central one so truncation errors cancel in the
    difference.
    """
    energy_fn = _energy_function(spec)
    base = energy_fn(spec)
    plan = base.diagnostics["plan"]
    h = fd_rel_step * spec.L

    def at(L_value):
        shifted = replace(spec, L=L_value)
        return energy_fn(shifted, _plan=plan).free_energy

    d_coarse = (at(spec.L + h) - at(spec.L - h)) / (2.0 * h)
    d_fine = (at(spec.L + 0.5 * h) - at(spec.L - 0.5 * h)) / h
    d_rich = (4.0 * d_fine - d_coarse) / 3.0
    if d_rich != 0.0:
        agreement = abs(d_rich - d_fine) / abs(d_rich)
        if agreement > fd_agreement_tol:
            raise ConvergenceError(
                f"finite-difference derivative not converged: "
                f"Richardson agreement {agreement:.2e} > {fd_agreement_tol:g}"
            )
    else:
        agreement = 0.0

    base.force = -d_rich
    base.f_pfa = pfa_force(spec)
    base.correction = 1.0 - base.force / base.f_pfa if base.f_pfa != 0.0 else math.nan
    base.diagnostics["fd_step_m"] = h
    base.diagnostics["fd_agreement"] = agreement
    return base


def _kappa_integral(spec, xi, zero_freq=False):
    """ln-weighted transverse integral of the plane-plane interaction at
    one frequency: integral over kappa of kappa sum_p ln(1 - r_p r_p'
    exp(-2 kappa L)), from xi/c to infinity.

    In the variable t = 2 kappa L the integrand has a logarithmic
    endpoint singularity for well-reflecting materials, so adaptive
    quadrature is used rather than a fixed Laguerre rule.
    """
    L = spec.L
    t0 = 0.0 if zero_freq else 2.0 * xi * L / c

    def integrand(t):
        kappa = np.atleast_1d(t / (2.0 * L))
        if zero_freq:
            r1 = fresnel_zero_frequency(spec.plane_model, kappa)
            r2 = fresnel_zero_frequency(spec.sphere_model, kappa)
        else:
            k = np.sqrt(np.maximum(kappa * kappa - (xi / c) ** 2, 0.0))
            r1 = fresnel_te_tm(xi, k, spec.plane_model)
            r2 = fresnel_te_tm(xi, k, spec.sphere_model)
        decay = np.exp(-np.atleast_1d(t))
        value = np.atleast_1d(t) * (
            np.log1p(-r1[0] * r2[0] * decay) + np.log1p(-r1[1] * r2[1] * decay)
        )
        return value[0]

    value, _ = integrate.quad(
        integrand,
        t0,
        np.inf,
        epsabs=0.0,
        epsrel=spec.quad_rel_tol,
        limit=200,
    )
    return value / (4.0 * L * L)


def plane_plane_energy_per_area(spec):
    """Free energy per unit area of two parallel plates at gap L."""
    if spec.T == 0:

        def outer(u):
            # u = 2 xi L / c; the transverse integral decays like exp(-u)
            return _kappa_integral(spec, c * u / (2.0 * spec.L))

        value, _ = integrate.quad(
            outer, 0.0, np.inf, epsabs=0.0, epsrel=spec.matsubara_rel_tol, limit=200
        )
        return (hbar * c / (8.0 * math.pi**2 * spec.L)) * value

    total = 0.5 * _kappa_integral(spec, 0.0, zero_freq=True)
    below = 0
    n = 0
    while below < _CONSECUTIVE_BELOW:
        n += 1
        if n > _MAX_MATSUBARA_TERMS:
            raise ConvergenceError("plane-plane Matsubara sum not converged")
        term = _kappa_integral(spec, matsubara_frequency(n, spec.T))
        total += term
        if total == 0.0 or abs(term) < spec.matsubara_rel_tol * abs(total):
            below += 1
        else:
            below = 0
    return (k_B * spec.T / (2.0 * math.pi)) * total


def pfa_force(spec, use_closed_form=True):
    """Proximity-force-approximation force 2 pi R E_pp(L).

    For perfect reflectors at T = 0 the closed form
    -pi^3 hbar c R / (360 L^3) is used unless use_closed_form is False,
    in which case the plane-plane integral path is exercised.
    """
    perfect = isinstance(spec.plane_model, PerfectReflector) and isinstance(
        spec.sphere_model, PerfectReflector
    )
    if use_closed_form and perfect and spec.T == 0:
        return -math.pi**3 * hbar * c * spec.R / (360.0 * spec.L**3)
    return 2.0 * math.pi * spec.R * plane_plane_energy_per_area(spec)


def pfa_correction_sweep(specs):
    """Force and PFA correction over a grid of specs, isolating failures.

    Returns one row dict per spec; failed cells carry NaN values and the
    error message, and do not interrupt the sweep.
    """
    rows = []
    for spec in specs:
        row = {"R_m": spec.R, "L_m": spec.L, "T_K": spec.T, "error": ""}
        try:
            result = force(spec)
            row.update(
                correction=result.correction,
                free_energy_J=result.free_energy,
                force_N=result.force,
                f_pfa_N=result.f_pfa,
            )
        except Exception as exc:  # per-cell isolation by contract
            row.update(
                correction=math.nan,
                free_energy_J=math.nan,
                force_N=math.nan,
                f_pfa_N=math.nan,
                error=str(exc),
            )
        rows.append(row)
    return rows


def write_sweep_csv(rows, stream):
    stream.write("R_m,L_m,T_K,correction,free_energy_J,force_N,f_pfa_N\n")
    for row in rows:
        if row.get("error"):
            stream.write(f"# failed R={row['R_m']:g} L={row['L_m']:g}: {row['error']}\n")
        stream.write(
            f"{row['R_m']!r},{row['L_m']!r},{row['T_K']!r},{row['correction']!r},"
            f"{row['free_energy_J']!r},{row['force_N']!r},{row['f_pfa_N']!r}\n"
        )


def nearest_level_rows(rows, targets=(0.0025, 0.005, 0.01)):
    """For each target correction, the sweep row closest to it."""
    valid = [row for row in rows if not row.get("error") and math.isfinite(row["correction"])]
    out = {}
    for target in targets:
        if valid:
            out[target] = min(valid, key=lambda row: abs(row["correction"] - target))
    return out
