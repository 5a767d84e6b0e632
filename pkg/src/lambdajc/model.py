"""Physical parameters, nonlinearity functions and the initial field state.

Energies are measured in units of the atom-field coupling (lambda = 1),
so times are the dimensionless ``tau = lambda * t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.stats import poisson

from .errors import DomainError

CONSTANT = "constant"
SQRT_N = "sqrt_n"
INVERSE_SQRT_N = "inverse_sqrt_n"
TABULATED = "tabulated"
_KINDS = (CONSTANT, SQRT_N, INVERSE_SQRT_N, TABULATED)

DEFAULT_TAIL_TOL = 1e-10
NMAX_CAP = 60
MAX_MEAN_PHOTON = 1e4


@dataclass(frozen=True)
class NonlinearitySpec:
    """Real weight function of the photon number, f(n) or g(n)."""

    kind: str = CONSTANT
    table: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == TABULATED:
            table = tuple(float(v) for v in self.table)
            if not table:
                raise DomainError("tabulated nonlinearity needs at least one weight")
            if not all(math.isfinite(v) and v >= 0.0 for v in table):
                raise DomainError("tabulated weights must be finite and nonnegative")
            object.__setattr__(self, "table", table)
        elif self.table:
            raise DomainError(f"{self.kind} nonlinearity takes no table")

    @classmethod
    def constant(cls):
        return cls(CONSTANT)

    @classmethod
    def sqrt_n(cls):
        return cls(SQRT_N)

    @classmethod
    def inverse_sqrt_n(cls):
        return cls(INVERSE_SQRT_N)

    @classmethod
    def tabulated(cls, weights: Sequence[float]):
        return cls(TABULATED, tuple(weights))

    @property
    def max_n(self) -> Optional[int]:
        """Largest photon number this nonlinearity can be evaluated at (None = unbounded)."""
        return len(self.table) - 1 if self.kind == TABULATED else None

    def values(self, n) -> np.ndarray:
        """Vectorised evaluation at integer photon numbers ``n``."""
        n = np.asarray(n)
        if np.any(n < 0):
            raise DomainError("photon number must be nonnegative")
        if self.kind == CONSTANT:
            return np.ones(n.shape)
        if self.kind == SQRT_N:
            return np.sqrt(n.astype(float))
        if self.kind == INVERSE_SQRT_N:
            if np.any(n == 0):
                raise DomainError("1/sqrt(n) is undefined at n = 0")
            return 1.0 / np.sqrt(n.astype(float))
        if np.any(n > self.max_n):
            raise DomainError(
                f"tabulated nonlinearity covers n <= {self.max_n}, got {int(n.max())}"
            )
        return np.asarray(self.table)[n]

    def kerr_weight(self, n) -> np.ndarray:
        """n * g(n)**2 with the vacuum value fixed to 0 (R|0> = 0)."""
        n = np.asarray(n)
        if np.any(n < 0):
            raise DomainError("photon number must be nonnegative")
        out = np.zeros(n.shape)
        pos = n > 0
        if np.any(pos):
            out[pos] = n[pos] * self.values(n[pos]) ** 2
        return out

    def to_text(self) -> str:
        if self.kind == TABULATED:
            return TABULATED + ":" + ",".join(repr(v) for v in self.table)
        return self.kind

    @classmethod
    def from_text(cls, text: str):
        text = text.strip()
        if text.startswith(TABULATED + ":"):
            body = text[len(TABULATED) + 1:]
            try:
                weights = [float(v) for v in body.split(",") if v.strip()]
            except ValueError as exc:
                raise DomainError(f"bad tabulated weights: {body!r}") from exc
            return cls.tabulated(weights)
        return cls(text)


def eval_nonlinearity(spec: NonlinearitySpec, n: int) -> float:
    """Weight of ``spec`` at photon number ``n``.

    >>> eval_nonlinearity(NonlinearitySpec.sqrt_n(), 4)
    2.0
    """
    if int(n) != n:
        raise DomainError("photon number must be an integer")
    return float(spec.values(int(n)))


def _pair(values, name, cast=float):
    values = tuple(cast(v) for v in values)
    if len(values) != 2:
        raise DomainError(f"{name} needs exactly two entries")
    return values


@dataclass(frozen=True)
class SystemParams:
    """Atom, cavity and medium constants (units of lambda).

    ``omega``/``Omega`` are only needed for detunings (when
    ``delta_override`` is absent) and for Schrodinger-picture phases.
    """

    omega: Optional[Tuple[float, float, float]] = None
    Omega: Optional[Tuple[float, float]] = None
    lam: Tuple[float, float] = (1.0, 1.0)
    chi: float = 0.0
    f_spec: Tuple[NonlinearitySpec, NonlinearitySpec] = (
        NonlinearitySpec(), NonlinearitySpec())
    g_spec: Tuple[NonlinearitySpec, NonlinearitySpec] = (
        NonlinearitySpec(), NonlinearitySpec())
    delta_override: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.omega is not None:
            omega = tuple(float(v) for v in self.omega)
            if len(omega) != 3:
                raise DomainError("omega needs three level energies")
            object.__setattr__(self, "omega", omega)
        if self.Omega is not None:
            object.__setattr__(self, "Omega", _pair(self.Omega, "Omega"))
        if self.delta_override is not None:
            object.__setattr__(self, "delta_override",
                               _pair(self.delta_override, "delta_override"))
        object.__setattr__(self, "lam", _pair(self.lam, "lam"))
        object.__setattr__(self, "chi", float(self.chi))
        object.__setattr__(self, "f_spec", tuple(self.f_spec))
        object.__setattr__(self, "g_spec", tuple(self.g_spec))
        if len(self.f_spec) != 2 or len(self.g_spec) != 2:
            raise DomainError("f_spec and g_spec need one spec per mode")

        numbers = [self.chi, *self.lam]
        for group in (self.omega, self.Omega, self.delta_override):
            if group is not None:
                numbers.extend(group)
        if not all(math.isfinite(v) for v in numbers):
            raise DomainError("all parameters must be finite")
        if min(self.lam) < 0:
            raise DomainError("coupling constants must be nonnegative")
        if self.delta_override is None and (self.omega is None or self.Omega is None):
            raise DomainError("need either delta_override or both omega and Omega")

    @property
    def has_frequencies(self) -> bool:
        return self.omega is not None and self.Omega is not None


def detunings(params: SystemParams) -> Tuple[float, float]:
    if params.delta_override is not None:
        return params.delta_override
    w1, w2, w3 = params.omega
    return (w2 - w1 + params.Omega[0], w3 - w1 + params.Omega[1])


def deformed_kerr_shift(params: SystemParams, n1, n2):
    """Kerr energy chi * n1 g1(n1)^2 * n2 g2(n2)^2 of the Fock state |n1, n2>."""
    g1, g2 = params.g_spec
    v = params.chi * g1.kerr_weight(n1) * g2.kerr_weight(n2)
    if not np.all(np.isfinite(v)):
        raise DomainError("non-finite Kerr shift")
    return float(v) if np.ndim(v) == 0 else v


def coupling_strength(params: SystemParams, mode: int, n):
    """kappa = lambda * sqrt(n + 1) * f(n + 1) for the transition adding a photon."""
    if mode not in (1, 2):
        raise DomainError("mode must be 1 or 2")
    n = np.asarray(n)
    if np.any(n < 0):
        raise DomainError("photon number must be nonnegative")
    lam = params.lam[mode - 1]
    k = lam * np.sqrt(n + 1.0) * params.f_spec[mode - 1].values(n + 1)
    return float(k) if k.ndim == 0 else k


@dataclass(frozen=True)
class CoherentModeSpec:
    alpha: complex = 0j
    mean_photon: float = field(init=False)

    def __post_init__(self):
        alpha = complex(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "mean_photon", abs(alpha) ** 2)

    @classmethod
    def from_mean_photon(cls, mean_photon: float, phase: float = 0.0):
        return cls(math.sqrt(mean_photon) * complex(math.cos(phase), math.sin(phase)))


def coherent_amplitudes(mode: CoherentModeSpec, n_max: int) -> np.ndarray:
    """Fock amplitudes q_0..q_{n_max} of a coherent state.

    Built from q_{n+1} = q_n * alpha / sqrt(n + 1) so no factorial is formed.
    """
    if n_max < 0:
        raise DomainError("n_max must be nonnegative")
    if mode.mean_photon > MAX_MEAN_PHOTON:
        raise DomainError(f"|alpha|^2 > {MAX_MEAN_PHOTON:g} is not supported")
    q = np.zeros(n_max + 1, dtype=complex)
    q[0] = math.exp(-mode.mean_photon / 2.0)
    for n in range(n_max):
        q[n + 1] = q[n] * mode.alpha / math.sqrt(n + 1)
    return q


def choose_truncation(mean_photon: float, tail_tol: float) -> int:
    """Smallest N whose Poisson tail P(n > N) is below ``tail_tol``.

    Clamped to at least ceil(mean_photon) + 1 for a nonempty mode.
    """
    if mean_photon < 0:
        raise DomainError("mean photon number must be nonnegative")
    if not 0 < tail_tol <= 1:
        raise DomainError("tail_tol must lie in (0, 1]")
    if mean_photon == 0:
        return 0
    n = 0
    step = max(16, int(4 * math.sqrt(mean_photon)))
    while True:
        ns = np.arange(n, n + step)
        below = np.nonzero(poisson.sf(ns, mean_photon) < tail_tol)[0]
        if below.size:
            n_cut = int(ns[below[0]])
            break
        n += step
    return max(n_cut, math.ceil(mean_photon) + 1)


@dataclass(frozen=True)
class FockGrid:
    """Per-mode Fock truncation."""

    n_max: Tuple[int, int]
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        n_max = _pair(self.n_max, "n_max", int)
        if min(n_max) < 0:
            raise DomainError("n_max must be nonnegative")
        object.__setattr__(self, "n_max", n_max)

    @classmethod
    def for_modes(cls, modes: Sequence[CoherentModeSpec],
                  tail_tol: float = DEFAULT_TAIL_TOL, cap: int = NMAX_CAP):
        n_max = tuple(min(choose_truncation(m.mean_photon, tail_tol), cap) for m in modes)
        return cls(n_max, tail_tol)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_max[0] + 1, self.n_max[1] + 1)

    def discarded_mass(self, modes: Sequence[CoherentModeSpec]) -> Tuple[float, float]:
        return tuple(float(poisson.sf(n, m.mean_photon)) if m.mean_photon > 0 else 0.0
                     for n, m in zip(self.n_max, modes))
