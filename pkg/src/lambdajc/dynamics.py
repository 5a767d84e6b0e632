"""Closed-form evolution of the three-state Fock blocks.

Each block (n1, n2) spans |1,n1,n2>, |2,n1+1,n2>, |3,n1,n2+1> and carries
the interaction-picture amplitudes A, B, C.  The atom starts in |1>.
All functions broadcast over numpy arrays of blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .errors import ComplexRootsError, DegenerateRootsError, MissingFrequenciesError, StepSizeError
from .model import (CoherentModeSpec, FockGrid, SystemParams, coherent_amplitudes,
                    coupling_strength, deformed_kerr_shift, detunings)

GAP_RTOL = 1e-8
DISC_RTOL = 1e-14
CLAMP_TOL = 1e-12
RESIDUAL_TOL = 1e-9
ODE_AGREEMENT = 1e-8
MAX_HALVINGS = 20

# (j, k, l) with {j, k, l} = {0, 1, 2}
_PERMS = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


@dataclass(frozen=True)
class BlockCouplings:
    V_A: np.ndarray
    V_B: np.ndarray
    V_C: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    delta2: float
    delta3: float

    def __getitem__(self, idx):
        """Couplings of a single block (or sub-grid) of a gridded instance."""
        return BlockCouplings(*(np.asarray(getattr(self, k))[idx]
                                for k in ("V_A", "V_B", "V_C", "kappa1", "kappa2")),
                              self.delta2, self.delta3)

    @property
    def spectral_scale(self):
        """Crude bound on the block's eigenfrequencies."""
        return (np.abs(self.V_A) + np.abs(self.V_B) + np.abs(self.V_C)
                + np.abs(self.kappa1) + np.abs(self.kappa2)
                + abs(self.delta2) + abs(self.delta3))


def block_couplings(params: SystemParams, n1, n2) -> BlockCouplings:
    n1, n2 = np.broadcast_arrays(np.asarray(n1), np.asarray(n2))
    d2, d3 = detunings(params)
    return BlockCouplings(
        V_A=np.asarray(deformed_kerr_shift(params, n1, n2), dtype=float),
        V_B=np.asarray(deformed_kerr_shift(params, n1 + 1, n2), dtype=float),
        V_C=np.asarray(deformed_kerr_shift(params, n1, n2 + 1), dtype=float),
        kappa1=np.asarray(coupling_strength(params, 1, n1), dtype=float),
        kappa2=np.asarray(coupling_strength(params, 2, n2), dtype=float),
        delta2=float(d2), delta3=float(d3))


def cubic_coefficients(c: BlockCouplings):
    """Coefficients (x1, x2, x3) of mu^3 + x1 mu^2 + x2 mu + x3 = 0."""
    a = c.V_A - c.delta2
    s = c.V_C + c.delta3 - c.delta2
    x1 = c.V_A + c.V_B + c.V_C + c.delta3 - 2.0 * c.delta2
    x2 = (c.V_A + c.V_B - c.delta2) * s + c.V_B * a - c.kappa1**2 - c.kappa2**2
    x3 = c.V_B * (a * s - c.kappa2**2) - c.kappa1**2 * s
    return x1, x2, x3


def cubic_residual(x, mu):
    """Normwise backward error of each root, shape (..., 3).

    |p(mu)| / (max(1, |x1|, |x2|, |x3|) (1 + |mu| + mu^2 + |mu|^3)): the
    relative coefficient perturbation that makes mu an exact root.
    """
    x1, x2, x3 = (np.asarray(v, dtype=float)[..., None] for v in x)
    p = ((mu + x1) * mu + x2) * mu + x3
    xinf = np.maximum(np.maximum(1.0, np.abs(x1)), np.maximum(np.abs(x2), np.abs(x3)))
    a = np.abs(mu)
    return np.abs(p) / (xinf * (((a + 1.0) * a + 1.0) * a + 1.0))


@dataclass(frozen=True)
class CubicSolution:
    x: Tuple[np.ndarray, np.ndarray, np.ndarray]
    mu: np.ndarray          # (..., 3)
    theta: np.ndarray
    degenerate: np.ndarray  # bool
    clamped: int = 0        # arccos arguments pushed back by more than CLAMP_TOL

    @property
    def residual(self):
        return cubic_residual(self.x, self.mu)


def solve_cubic_trig(x1, x2, x3, gap_rtol: float = GAP_RTOL, check: bool = True
                     ) -> CubicSolution:
    """Three real roots by the trigonometric Cardano formula.

    A triple root -x1/3 is returned when x1^2 - 3 x2 is negligible.  Roots
    closer than ``gap_rtol * max(1, max|mu|)`` are flagged degenerate.
    """
    x1, x2, x3 = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(x1, x2, x3))
    p = x1 * x1 - 3.0 * x2
    scale2 = np.maximum(1.0, np.maximum(x1 * x1, np.abs(x2)))
    flat = p <= DISC_RTOL * scale2
    if check and np.any(p < -DISC_RTOL * scale2):
        where = tuple(int(i) for i in np.argwhere(np.atleast_1d(p < -DISC_RTOL * scale2))[0])
        raise ComplexRootsError(
            f"x1^2 - 3 x2 < 0 at block {where}; the cubic has a complex root pair")
    p_safe = np.where(flat, 1.0, p)
    arg = (9.0 * x1 * x2 - 2.0 * x1**3 - 27.0 * x3) / (2.0 * p_safe**1.5)
    arg = np.where(flat, 1.0, arg)
    clamped = int(np.count_nonzero(np.abs(arg) > 1.0 + CLAMP_TOL))
    theta = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
    radius = np.where(flat, 0.0, 2.0 / 3.0 * np.sqrt(p_safe))
    shifts = 2.0 * np.pi / 3.0 * np.arange(3)
    mu = (-x1 / 3.0)[..., None] + radius[..., None] * np.cos(theta[..., None] + shifts)

    gaps = np.abs(mu[..., [0, 1, 2]] - mu[..., [1, 2, 0]]).min(axis=-1)
    gap_tol = gap_rtol * np.maximum(1.0, np.abs(mu).max(axis=-1))
    degenerate = flat | (gaps < gap_tol)

    sol = CubicSolution((x1, x2, x3), mu, theta, degenerate, clamped)
    if check:
        bad = sol.residual.max(axis=-1) > RESIDUAL_TOL
        if np.any(bad):
            where = tuple(int(i) for i in np.argwhere(np.atleast_1d(bad))[0])
            raise ComplexRootsError(
                f"cubic residual above {RESIDUAL_TOL:g} at block {where}; "
                "coefficients do not come from a Hermitian block")
    return sol


def _weights(mu, c: BlockCouplings):
    num0 = c.V_A + c.V_B - c.delta2
    b = np.empty(mu.shape)
    for j, k, l in _PERMS:
        b[..., j] = ((mu[..., k] + mu[..., l] + num0)
                     / ((mu[..., j] - mu[..., k]) * (mu[..., j] - mu[..., l])))
    return b


def initial_weights(cubic: CubicSolution, c: BlockCouplings) -> np.ndarray:
    """Weights b_j fixing A(0) = 1, B(0) = C(0) = 0."""
    if np.any(cubic.degenerate):
        raise DegenerateRootsError(
            "repeated characteristic roots; integrate this block with ode_oracle_block")
    return _weights(cubic.mu, c)


class AmplitudeTriple(NamedTuple):
    A: complex
    B: complex
    C: complex

    @property
    def norm(self):
        return abs(self.A) ** 2 + abs(self.B) ** 2 + abs(self.C) ** 2


@dataclass(frozen=True)
class BlockSolution:
    """Closed-form data of one block (or a broadcast grid of blocks).

    The amplitude sums are stored as per-root coefficients so that
    A(t) = e^{-i d2 t} sum_j coef_a_j e^{i mu_j t}, and similarly for B, C.
    """

    couplings: BlockCouplings
    cubic: CubicSolution
    b: np.ndarray
    coef_a: np.ndarray
    coef_b: np.ndarray
    coef_c: np.ndarray


def _coefficients(c: BlockCouplings, mu, b):
    vb = np.asarray(c.V_B)[..., None]
    va = np.asarray(c.V_A)[..., None]
    k1 = np.asarray(c.kappa1, dtype=float)[..., None]
    k2 = np.asarray(c.kappa2, dtype=float)[..., None]
    coef_a = -(mu + vb) * b
    coef_b = k1 * b
    k2_safe = np.where(k2 == 0.0, 1.0, k2)
    poly = (mu + vb) * (mu + va - c.delta2) - k1 * k1
    coef_c = np.where(k2 == 0.0, 0.0, poly * b / k2_safe)
    return coef_a, coef_b, coef_c


def solve_block(c: BlockCouplings, cubic: Optional[CubicSolution] = None) -> BlockSolution:
    if cubic is None:
        cubic = solve_cubic_trig(*cubic_coefficients(c))
    b = initial_weights(cubic, c)
    return BlockSolution(c, cubic, b, *_coefficients(c, cubic.mu, b))


def amplitudes_at(sol: BlockSolution, t: float) -> AmplitudeTriple:
    c = sol.couplings
    phase = np.exp(1j * sol.cubic.mu * t)
    A = np.exp(-1j * c.delta2 * t) * np.sum(sol.coef_a * phase, axis=-1)
    B = np.sum(sol.coef_b * phase, axis=-1)
    C = np.exp(1j * (c.delta3 - c.delta2) * t) * np.sum(sol.coef_c * phase, axis=-1)
    if np.ndim(A) == 0:
        return AmplitudeTriple(complex(A), complex(B), complex(C))
    return AmplitudeTriple(A, B, C)


# --- Runge-Kutta oracle -----------------------------------------------------

@njit(cache=True)
def _rhs(t, a, b, c, va, vb, vc, k1, k2, d2, d3):
    e2 = complex(math.cos(d2 * t), -math.sin(d2 * t))
    e3 = complex(math.cos(d3 * t), -math.sin(d3 * t))
    da = -1j * (va * a + k1 * b * e2 + k2 * c * e3)
    db = -1j * (vb * b + k1 * a * e2.conjugate())
    dc = -1j * (vc * c + k2 * a * e3.conjugate())
    return da, db, dc


@njit(cache=True)
def _rk4_trajectory(pars, times, dt):
    va, vb, vc, k1, k2, d2, d3 = pars[0], pars[1], pars[2], pars[3], pars[4], pars[5], pars[6]
    out = np.empty((times.shape[0], 3), dtype=np.complex128)
    a = 1.0 + 0j
    b = 0j
    c = 0j
    t0 = 0.0
    for m in range(times.shape[0]):
        span = times[m] - t0
        n = max(1, int(math.ceil(span / dt - 1e-12)))
        h = span / n
        for i in range(n):
            t = t0 + i * h
            a1, b1, c1 = _rhs(t, a, b, c, va, vb, vc, k1, k2, d2, d3)
            a2, b2, c2 = _rhs(t + 0.5 * h, a + 0.5 * h * a1, b + 0.5 * h * b1,
                              c + 0.5 * h * c1, va, vb, vc, k1, k2, d2, d3)
            a3, b3, c3 = _rhs(t + 0.5 * h, a + 0.5 * h * a2, b + 0.5 * h * b2,
                              c + 0.5 * h * c2, va, vb, vc, k1, k2, d2, d3)
            a4, b4, c4 = _rhs(t + h, a + h * a3, b + h * b3, c + h * c3,
                              va, vb, vc, k1, k2, d2, d3)
            a = a + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            b = b + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            c = c + h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        out[m, 0] = a
        out[m, 1] = b
        out[m, 2] = c
        t0 = times[m]
    return out


def default_ode_step(c: BlockCouplings) -> float:
    """Starting step for the halving loop: resolves the fastest block frequency."""
    return float(min(0.01, 0.25 / max(1.0, float(np.max(c.spectral_scale)))))


def ode_oracle_trajectory(c: BlockCouplings, times: Sequence[float], dt: float,
                          tol: float = ODE_AGREEMENT, max_halvings: int = MAX_HALVINGS):
    """Integrate the coupled amplitude equations of one block with fixed-step RK4.

    Returns an array of shape (len(times), 3) holding (A, B, C).  The step is
    halved until two successive runs agree to ``tol`` at every requested time.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be a nondecreasing sequence of t >= 0")
    pars = np.array([float(c.V_A), float(c.V_B), float(c.V_C), float(c.kappa1),
                     float(c.kappa2), c.delta2, c.delta3])
    prev = _rk4_trajectory(pars, times, dt)
    for _ in range(max_halvings):
        dt *= 0.5
        cur = _rk4_trajectory(pars, times, dt)
        if np.max(np.abs(cur - prev), initial=0.0) < tol:
            return cur
        prev = cur
    raise StepSizeError(f"RK4 did not converge to {tol:g} within {max_halvings} halvings")


def ode_oracle_block(c: BlockCouplings, t: float, dt: float) -> AmplitudeTriple:
    a, b, cc = ode_oracle_trajectory(c, [t], dt)[0]
    return AmplitudeTriple(complex(a), complex(b), complex(cc))


# --- full state ---------------------------------------------------------------

class BlockSet:
    """Block solutions for every (n1, n2) of a Fock grid, prepared once.

    Arrays are indexed ``[n1, n2]``.  Blocks with repeated roots are
    evolved with the RK4 oracle instead of the closed form.
    """

    def __init__(self, params: SystemParams, modes: Sequence[CoherentModeSpec],
                 grid: FockGrid):
        self.params = params
        self.modes = tuple(modes)
        self.grid = grid
        self.q1 = coherent_amplitudes(self.modes[0], grid.n_max[0])
        self.q2 = coherent_amplitudes(self.modes[1], grid.n_max[1])
        n1, n2 = np.meshgrid(np.arange(grid.shape[0]), np.arange(grid.shape[1]),
                             indexing="ij")
        self.couplings = block_couplings(params, n1, n2)
        self.delta2, self.delta3 = self.couplings.delta2, self.couplings.delta3
        self.cubic = solve_cubic_trig(*cubic_coefficients(self.couplings))
        self.degenerate = self.cubic.degenerate
        with np.errstate(divide="ignore", invalid="ignore"):
            b = _weights(self.cubic.mu, self.couplings)
        b[self.degenerate] = 0.0
        self.b = b
        self.coef_a, self.coef_b, self.coef_c = _coefficients(self.couplings, self.cubic.mu, b)
        self.degenerate_blocks = [tuple(int(i) for i in ij)
                                  for ij in np.argwhere(self.degenerate)]
        self._ode_dt = {ij: default_ode_step(self.couplings[ij])
                        for ij in self.degenerate_blocks}

    @property
    def n_blocks(self) -> int:
        return self.grid.shape[0] * self.grid.shape[1]

    def block(self, n1: int, n2: int) -> BlockSolution:
        idx = (n1, n2)
        if self.degenerate[idx]:
            raise DegenerateRootsError(f"block {idx} has repeated roots")
        return BlockSolution(self.couplings[idx], CubicSolution(
            tuple(x[idx] for x in self.cubic.x), self.cubic.mu[idx],
            self.cubic.theta[idx], self.cubic.degenerate[idx]),
            self.b[idx], self.coef_a[idx], self.coef_b[idx], self.coef_c[idx])

    def amplitudes(self, t: float):
        """(A, B, C) arrays over the whole grid at time t."""
        phase = np.exp(1j * self.cubic.mu * t)
        A = np.exp(-1j * self.delta2 * t) * np.sum(self.coef_a * phase, axis=-1)
        B = np.sum(self.coef_b * phase, axis=-1)
        C = np.exp(1j * (self.delta3 - self.delta2) * t) * np.sum(self.coef_c * phase, axis=-1)
        for ij in self.degenerate_blocks:
            try:
                A[ij], B[ij], C[ij] = ode_oracle_block(self.couplings[ij], t, self._ode_dt[ij])
            except StepSizeError as exc:
                raise StepSizeError(f"block {ij}: {exc}") from exc
        return A, B, C


def prepare_blocks(params: SystemParams, modes: Sequence[CoherentModeSpec],
                   grid: FockGrid) -> BlockSet:
    return BlockSet(params, modes, grid)


@dataclass(frozen=True)
class StateSnapshot:
    """Joint atom-field state at time t, as block amplitudes times q_n1 q_n2."""

    t: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    params: SystemParams
    delta2: float
    delta3: float

    def triple(self, n1: int, n2: int) -> AmplitudeTriple:
        return AmplitudeTriple(complex(self.A[n1, n2]), complex(self.B[n1, n2]),
                               complex(self.C[n1, n2]))

    def block_norms(self) -> np.ndarray:
        return (np.abs(self.A) ** 2 + np.abs(self.B) ** 2 + np.abs(self.C) ** 2)

    def global_norm(self) -> float:
        w = np.outer(np.abs(self.q1) ** 2, np.abs(self.q2) ** 2)
        return float(np.sum(w * self.block_norms()))

    def gammas(self):
        """Free-evolution phases (gamma1, gamma2, gamma3) per block."""
        if not self.params.has_frequencies:
            raise MissingFrequenciesError(
                "free-evolution phases need numeric omega and Omega")
        w1, w2, w3 = self.params.omega
        o1, o2 = self.params.Omega
        n1 = np.arange(self.A.shape[0])[:, None]
        n2 = np.arange(self.A.shape[1])[None, :]
        base = n1 * o1 + n2 * o2
        return w1 + base, w2 + o1 + base, w3 + o2 + base


def assemble_state(blocks: BlockSet, t: float) -> StateSnapshot:
    if t < 0:
        raise ValueError("t must be nonnegative")
    A, B, C = blocks.amplitudes(t)
    return StateSnapshot(float(t), A, B, C, blocks.q1, blocks.q2, blocks.params,
                         blocks.delta2, blocks.delta3)
