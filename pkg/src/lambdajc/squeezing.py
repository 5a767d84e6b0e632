"""Mode-1 quadrature distributions, Shannon entropies and entropy squeezing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import StateSnapshot

LITERAL = "literal"
TRACED = "traced"
SCHRODINGER = "schrodinger"
DIST_MODES = (LITERAL, TRACED, SCHRODINGER)

PANEL_ORDER = 64
DEFAULT_PANELS = 40
DENSITY_FLOOR = 1e-300
PI_E = math.pi * math.e
# <p|n> = (-i)^n psi_n(p); recorded in output metadata
MOMENTUM_CONVENTION = "(-i)^n"


@dataclass(frozen=True)
class QuadratureGrid:
    """Composite Gauss-Legendre rule on [-L, L]."""

    points: np.ndarray
    weights: np.ndarray
    half_width: float

    @classmethod
    def build(cls, half_width: float, panels: int = DEFAULT_PANELS,
              order: int = PANEL_ORDER):
        if half_width <= 0 or panels < 1:
            raise ValueError("need half_width > 0 and at least one panel")
        nodes, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(-half_width, half_width, panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        points = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return cls(points, weights, float(half_width))

    @classmethod
    def for_nmax(cls, n_max: int, panels: int = DEFAULT_PANELS):
        return cls.build(math.sqrt(2 * n_max + 1) + 5.0, panels)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def eigenfunction_table(n_max: int, x) -> np.ndarray:
    """psi_0..psi_{n_max} at the points x, shape (n_max + 1, len(x))."""
    x = np.asarray(x, dtype=float)
    table = np.empty((n_max + 1,) + x.shape)
    table[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        table[1] = math.sqrt(2.0) * x * table[0]
    for n in range(1, n_max):
        table[n + 1] = (math.sqrt(2.0 / (n + 1)) * x * table[n]
                        - math.sqrt(n / (n + 1.0)) * table[n - 1])
    return table


def oscillator_eigenfunction(n: int, x):
    """Normalised harmonic-oscillator eigenfunction <x|n>."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    values = eigenfunction_table(n, x)[n]
    return float(values) if values.ndim == 0 else values


@dataclass(frozen=True)
class DistributionSample:
    """Quadrature density, renormalised to unit integral; ``norm`` is the raw integral."""

    density: np.ndarray
    mode: str
    norm: float
    quadrature: str = "x"
    convention: str = MOMENTUM_CONVENTION


def _channel_coefficients(snap: StateSnapshot, mode: str):
    """Per-channel coefficient matrices c[n2, n1] multiplying <x|n1> (<x|n1+1> for B)."""
    if mode not in DIST_MODES:
        raise ValueError(f"unknown distribution mode {mode!r}")
    qq = np.outer(snap.q1, snap.q2)
    ca, cb, cc = qq * snap.A, qq * snap.B, qq * snap.C
    if mode == SCHRODINGER:
        g1, g2, g3 = snap.gammas()
        t = snap.t
        ca = ca * np.exp(-1j * g1 * t)
        cb = cb * np.exp(-1j * g2 * t)
        cc = cc * np.exp(-1j * g3 * t)
    ca, cb, cc = ca.T, cb.T, cc.T
    if mode == LITERAL:
        ca, cb, cc = (m.sum(axis=0, keepdims=True) for m in (ca, cb, cc))
    return ca, cb, cc


def _density(snap: StateSnapshot, grid: QuadratureGrid, mode: str, table, momentum: bool):
    n1 = snap.A.shape[0]
    if table is None:
        table = eigenfunction_table(n1, grid.points)
    if table.shape[0] < n1 + 1:
        raise ValueError(f"eigenfunction table needs at least {n1 + 1} rows")
    ca, cb, cc = _channel_coefficients(snap, mode)
    lower, upper = table[:n1], table[1:n1 + 1]
    if momentum:
        ns = np.arange(n1)
        ca = ca * (-1j) ** ns
        cb = cb * (-1j) ** (ns + 1)
        cc = cc * (-1j) ** ns
    density = np.zeros(table.shape[1])
    for coef, basis in ((ca, lower), (cb, upper), (cc, lower)):
        # contiguous real operands keep matmul on the BLAS path
        re = np.ascontiguousarray(coef.real) @ basis
        im = np.ascontiguousarray(coef.imag) @ basis
        density += np.sum(re * re + im * im, axis=0)
    norm = grid.integrate(density)
    return DistributionSample(density / norm, mode, norm, "p" if momentum else "x")


def position_distribution(snap: StateSnapshot, grid: QuadratureGrid, mode: str = TRACED,
                          table: Optional[np.ndarray] = None) -> DistributionSample:
    """Mode-1 position density with the atom traced out.

    ``traced`` sums the mode-2 index outside the modulus (partial trace);
    ``literal`` sums it inside; ``schrodinger`` is ``traced`` with the
    free-evolution phases restored.  ``table`` is an optional precomputed
    ``eigenfunction_table`` on ``grid.points``.
    """
    return _density(snap, grid, mode, table, momentum=False)


def momentum_distribution(snap: StateSnapshot, grid: QuadratureGrid, mode: str = TRACED,
                          table: Optional[np.ndarray] = None) -> DistributionSample:
    return _density(snap, grid, mode, table, momentum=True)


def shannon_entropy(d, grid: QuadratureGrid) -> float:
    rho = np.asarray(d.density if isinstance(d, DistributionSample) else d, dtype=float)
    safe = np.where(rho > DENSITY_FLOOR, rho, 1.0)
    return -grid.integrate(np.where(rho > DENSITY_FLOOR, rho * np.log(safe), 0.0))


def squeezing_indicators(E_x: float, E_p: float):
    """Normalised indicators exp(E)/sqrt(pi e) - 1 for position and momentum."""
    scale = 1.0 / math.sqrt(PI_E)
    return scale * math.exp(E_x) - 1.0, scale * math.exp(E_p) - 1.0


def is_squeezed(indicator: float) -> bool:
    return -1.0 < indicator < 0.0


@dataclass(frozen=True)
class SqueezingSample:
    tau: float
    E_x: float
    E_p: float
    EX: float
    EP: float
    mode: str = TRACED
    convention: str = MOMENTUM_CONVENTION

    @property
    def uncertainty_product(self) -> float:
        return (1.0 + self.EX) * (1.0 + self.EP)


def squeezing_sample(snap: StateSnapshot, grid: QuadratureGrid, mode: str = TRACED,
                     table: Optional[np.ndarray] = None) -> SqueezingSample:
    if table is None:
        table = eigenfunction_table(snap.A.shape[0], grid.points)
    e_x = shannon_entropy(position_distribution(snap, grid, mode, table), grid)
    e_p = shannon_entropy(momentum_distribution(snap, grid, mode, table), grid)
    ex, ep = squeezing_indicators(e_x, e_p)
    return SqueezingSample(snap.t, e_x, e_p, ex, ep, mode)
