"""Dielectric response epsilon(i xi) on the imaginary frequency axis.

Four models are supported: perfect reflector, plasma, Drude, and
tabulated data.  Tabulated values are interpolated log-log, which is
the natural scale for metals whose response spans many decades.
"""

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

EV_OVER_HBAR = 1.519267447878626e15  # rad/s per eV


class MaterialError(ValueError):
    """Invalid dielectric model definition or query."""


class TabulatedRangeError(MaterialError):
    """Query outside the tabulated frequency grid without extrapolation."""


@dataclass(frozen=True)
class ZeroFrequencyClass:
    kind: str  # "perfect_conductor" | "plasma" | "drude"
    omega_p: float | None = None


class DielectricModel:
    """Base class; models are immutable and safe for concurrent reads."""

    def epsilon(self, xi):
        raise NotImplementedError

    def zero_frequency_class(self):
        raise NotImplementedError

    def describe(self):
        raise NotImplementedError


class PerfectReflector(DielectricModel):
    def epsilon(self, xi):
        if xi <= 0:
            raise MaterialError("epsilon is defined for xi > 0")
        return math.inf

    def zero_frequency_class(self):
        return ZeroFrequencyClass("perfect_conductor")

    def describe(self):
        return {"model": "perfect"}

    def __eq__(self, other):
        return isinstance(other, PerfectReflector)

    def __hash__(self):
        return hash("PerfectReflector")


@dataclass(frozen=True)
class Vacuum(DielectricModel):
    """Transparent medium, epsilon == 1; scatters nothing."""

    def epsilon(self, xi):
        if xi <= 0:
            raise MaterialError("epsilon is defined for xi > 0")
        return 1.0

    def zero_frequency_class(self):
        return ZeroFrequencyClass("drude")

    def describe(self):
        return {"model": "vacuum"}


@dataclass(frozen=True)
class Plasma(DielectricModel):
    omega_p: float  # rad/s

    def __post_init__(self):
        if not self.omega_p > 0:
            raise MaterialError("plasma frequency must be positive")

    def epsilon(self, xi):
        if xi <= 0:
            raise MaterialError("epsilon is defined for xi > 0")
        return 1.0 + (self.omega_p / xi) ** 2

    def zero_frequency_class(self):
        return ZeroFrequencyClass("plasma", omega_p=self.omega_p)

    def describe(self):
        return {"model": "plasma", "omega_p": self.omega_p}


@dataclass(frozen=True)
class Drude(DielectricModel):
    omega_p: float  # rad/s
    gamma: float  # rad/s

    def __post_init__(self):
        if not (self.omega_p > 0 and self.gamma > 0):
            raise MaterialError("Drude parameters must be positive")

    def epsilon(self, xi):
        if xi <= 0:
            raise MaterialError("epsilon is defined for xi > 0")
        return 1.0 + self.omega_p**2 / (xi * (xi + self.gamma))

    def zero_frequency_class(self):
        return ZeroFrequencyClass("drude")

    def describe(self):
        return {"model": "drude", "omega_p": self.omega_p, "gamma": self.gamma}


@dataclass(frozen=True)
class Tabulated(DielectricModel):
    """Pre-tabulated epsilon(i xi), interpolated linearly in log-log.

    With extrapolate=True, queries outside the grid fall back to a
    Drude-like tail: (eps-1) ~ 1/xi below the grid and ~ 1/xi^2 above.
    """

    xi: tuple = field(default_factory=tuple)
    eps: tuple = field(default_factory=tuple)
    extrapolate: bool = False

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        eps = np.asarray(self.eps, dtype=float)
        if xi.size == 0:
            raise MaterialError("tabulated model needs at least one data point")
        if xi.size != eps.size:
            raise MaterialError("xi and epsilon arrays differ in length")
        if np.any(xi <= 0):
            raise MaterialError("tabulated frequencies must be positive")
        if np.any(np.diff(xi) <= 0):
            raise MaterialError("tabulated frequencies must be strictly increasing")
        if np.any(eps < 1.0):
            raise MaterialError("tabulated epsilon values must be >= 1")
        if np.any(np.diff(eps) > 0):
            warnings.warn("tabulated epsilon is not non-increasing in xi", stacklevel=2)
        object.__setattr__(self, "xi", tuple(float(v) for v in xi))
        object.__setattr__(self, "eps", tuple(float(v) for v in eps))

    def epsilon(self, xi):
        if xi <= 0:
            raise MaterialError("epsilon is defined for xi > 0")
        grid = np.asarray(self.xi)
        vals = np.asarray(self.eps)
        if xi < grid[0] or xi > grid[-1]:
            if not self.extrapolate:
                raise TabulatedRangeError(
                    f"xi={xi:g} outside tabulated range [{grid[0]:g}, {grid[-1]:g}]"
                )
            if xi < grid[0]:
                return 1.0 + (vals[0] - 1.0) * (grid[0] / xi)
            return 1.0 + (vals[-1] - 1.0) * (grid[-1] / xi) ** 2
        return float(np.exp(np.interp(math.log(xi), np.log(grid), np.log(vals))))

    def zero_frequency_class(self):
        # metals tabulated on the imaginary axis have finite dc conductivity
        return ZeroFrequencyClass("drude")

    def describe(self):
        return {"model": "tabulated", "points": len(self.xi), "extrapolate": self.extrapolate}


def load_tabulated(stream, extrapolate=False):
    """Parse a two-column text table (xi in rad/s, epsilon; '#' comments)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    xi, eps = [], []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MaterialError(f"line {lineno}: expected two columns, got {len(parts)}")
        try:
            x, e = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise MaterialError(f"line {lineno}: {exc}") from exc
        if e < 1.0:
            raise MaterialError(f"line {lineno}: epsilon must be >= 1, got {e:g}")
        xi.append(x)
        eps.append(e)
    if not xi:
        raise MaterialError("no data points in dielectric table")
    if any(b <= a for a, b in zip(xi, xi[1:])):
        raise MaterialError("frequency grid is not strictly increasing")
    return Tabulated(xi=tuple(xi), eps=tuple(eps), extrapolate=extrapolate)


def save_tabulated(model, stream):
    """Write a Tabulated model in the same two-column text format."""
    stream.write("# xi_rad_per_s epsilon\n")
    for x, e in zip(model.xi, model.eps):
        stream.write(f"{x!r} {e!r}\n")


def gold_drude():
    """Conventional gold Drude parameters (9.0 eV, 0.035 eV).

    Configuration defaults common in the Casimir literature, not
    measured ground truth.
    """
    return Drude(omega_p=9.0 * EV_OVER_HBAR, gamma=0.035 * EV_OVER_HBAR)
