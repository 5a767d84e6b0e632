"""Reduced atomic density matrix and the atom-field entanglement entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import CLAMP_TOL, StateSnapshot
from .errors import NonHermitianError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-8
EIG_TOL = 1e-10
ZERO_EIG = 1e-12
DISC_TOL = 1e-14
LN3 = math.log(3.0)


@dataclass(frozen=True)
class ReducedAtomDM:
    rho: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def check(self):
        rho = self.rho
        if rho.shape != (3, 3):
            raise NonHermitianError(f"expected a 3x3 matrix, got {rho.shape}")
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > HERMITIAN_TOL:
            raise NonHermitianError(f"matrix is not Hermitian (deviation {herm:.3g})")
        if abs(self.trace - 1.0) > TRACE_TOL:
            raise NonHermitianError(f"trace {self.trace!r} differs from 1")


def reduced_atom_dm(snap: StateSnapshot) -> ReducedAtomDM:
    """Trace the field out of the joint state.

    Coherences pair neighbouring blocks that share a field state; amplitudes
    past the Fock cutoff are taken as zero.  Every sum runs over a C-ordered
    array of fixed shape, so the result does not depend on scheduling.
    """
    q1, q2 = snap.q1, snap.q2
    A, B, C = snap.A, snap.B, snap.C
    t = snap.t
    w = np.outer(np.abs(q1) ** 2, np.abs(q2) ** 2)
    w2 = np.abs(q2) ** 2
    w1 = np.abs(q1) ** 2

    r11 = np.sum(w * np.abs(A) ** 2)
    r22 = np.sum(w * np.abs(B) ** 2)
    r33 = np.sum(w * np.abs(C) ** 2)
    # |1,n1+1,n2> from block (n1+1,n2) with |2,n1+1,n2> from block (n1,n2)
    f12 = np.outer(q1[1:] * q1[:-1].conj(), w2)
    r12 = np.sum(f12 * A[1:, :] * B[:-1, :].conj()) * np.exp(1j * snap.delta2 * t)
    # |1,n1,n2+1> from block (n1,n2+1) with |3,n1,n2+1> from block (n1,n2)
    f13 = np.outer(w1, q2[1:] * q2[:-1].conj())
    r13 = np.sum(f13 * A[:, 1:] * C[:, :-1].conj()) * np.exp(1j * snap.delta3 * t)
    # |2,n1+1,n2+1> from block (n1,n2+1) with |3,n1+1,n2+1> from block (n1+1,n2)
    f23 = np.outer(q1[:-1] * q1[1:].conj(), q2[1:] * q2[:-1].conj())
    r23 = (np.sum(f23 * B[:-1, 1:] * C[1:, :-1].conj())
           * np.exp(1j * (snap.delta3 - snap.delta2) * t))

    rho = np.array([[r11, r12, r13],
                    [np.conj(r12), r22, r23],
                    [np.conj(r13), np.conj(r23), r33]], dtype=complex)
    return ReducedAtomDM(rho)


@dataclass(frozen=True)
class EigenTriple:
    xi: np.ndarray      # eigenvalues, clamped to [0, 1]
    alpha: tuple        # characteristic polynomial coefficients
    beta: float
    clamped: int = 0    # eigenvalues moved by the clamp
    arg_clamped: int = 0


def char_coefficients(rho: np.ndarray):
    """(alpha1, alpha2, alpha3) of xi^3 + alpha1 xi^2 + alpha2 xi + alpha3."""
    r = rho
    a1 = -(r[0, 0] + r[1, 1] + r[2, 2])
    a2 = (r[0, 0] * r[1, 1] + r[1, 1] * r[2, 2] + r[2, 2] * r[0, 0]
          - r[0, 1] * r[1, 0] - r[1, 2] * r[2, 1] - r[2, 0] * r[0, 2])
    a3 = (-r[0, 0] * r[1, 1] * r[2, 2] - r[0, 1] * r[1, 2] * r[2, 0]
          - r[0, 2] * r[2, 1] * r[1, 0] + r[0, 0] * r[1, 2] * r[2, 1]
          + r[1, 1] * r[2, 0] * r[0, 2] + r[2, 2] * r[0, 1] * r[1, 0])
    return float(np.real(a1)), float(np.real(a2)), float(np.real(a3))


def _deflate(rho, top):
    """Eigenvalues of rho on the complement of the eigenvector of ``top``.

    Near a pure state the two small roots of the characteristic polynomial
    form an almost double root at zero, which the arccos step resolves only
    to about sqrt(eps).  The largest root is well conditioned; compressing
    rho onto the orthogonal complement of its eigenvector leaves a 2x2 block
    whose eigenvalues come out with absolute accuracy ~eps.
    """
    m = rho - top * np.eye(3)
    cands = [np.cross(m[i], m[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    v = max(cands, key=lambda c: float(np.vdot(c, c).real))
    nv = math.sqrt(float(np.vdot(v, v).real))
    if nv == 0.0:
        return None
    v = v / nv
    basis, _ = np.linalg.qr(np.column_stack([v, np.eye(3)[np.argsort(np.abs(v))[:2]].T]))
    sub = basis[:, 1:].conj().T @ rho @ basis[:, 1:]
    h11, h22, h12 = sub[0, 0].real, sub[1, 1].real, sub[0, 1]
    half = 0.5 * (h11 + h22)
    rad = math.hypot(0.5 * (h11 - h22), abs(h12))
    big = half + rad if half >= 0 else half - rad
    det = h11 * h22 - abs(h12) ** 2
    small = det / big if big != 0.0 else 0.0
    return np.array([top, big, small])


def hermitian3_eigs_cardano(dm: ReducedAtomDM) -> EigenTriple:
    dm.check()
    a1, a2, a3 = char_coefficients(dm.rho)
    p = a1 * a1 - 3.0 * a2
    arg_clamped = 0
    if p <= DISC_TOL:
        beta = 0.0
        xi = np.full(3, -a1 / 3.0)
    else:
        arg = (9.0 * a1 * a2 - 2.0 * a1**3 - 27.0 * a3) / (2.0 * p**1.5)
        if abs(arg) > 1.0 + CLAMP_TOL:
            arg_clamped = 1
        beta = math.acos(min(1.0, max(-1.0, arg))) / 3.0
        shifts = 2.0 * math.pi / 3.0 * np.arange(3)
        xi = -a1 / 3.0 + 2.0 / 3.0 * math.sqrt(p) * np.cos(beta + shifts)
        refined = _deflate(dm.rho, float(np.max(xi)))
        if refined is not None:
            xi = refined
    if np.any(xi < -EIG_TOL) or np.any(xi > 1.0 + EIG_TOL):
        raise NonHermitianError(f"eigenvalues {xi} outside [0, 1]; matrix is not a state")
    clipped = np.clip(xi, 0.0, 1.0)
    clamped = int(np.count_nonzero(clipped != xi))
    return EigenTriple(clipped, (a1, a2, a3), beta, clamped, arg_clamped)


def _count_below(rho: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Number of eigenvalues below x, from the signs of the LDL^H pivots of rho - x.

    The pivots are ratios of successive leading principal minors, i.e. a Sturm
    sequence of characteristic polynomials.  ``rho`` is (..., 3, 3), ``x`` (...).
    """
    tiny = np.finfo(float).tiny
    m = rho - x[..., None, None] * np.eye(3)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return _pivot_signs(m, tiny)


def _pivot_signs(m, tiny):
    d1 = m[..., 0, 0].real
    d1 = np.where(d1 == 0.0, -tiny, d1)
    s11 = m[..., 1, 1].real - np.abs(m[..., 1, 0]) ** 2 / d1
    s22 = m[..., 2, 2].real - np.abs(m[..., 2, 0]) ** 2 / d1
    s21 = m[..., 2, 1] - m[..., 2, 0] * m[..., 0, 1] / d1
    d2 = np.where(s11 == 0.0, -tiny, s11)
    d3 = s22 - np.abs(s21) ** 2 / d2
    return (d1 < 0).astype(int) + (d2 < 0) + (d3 < 0)


def hermitian3_eigs_bisection(rho, iterations: int = 64) -> np.ndarray:
    """Ascending eigenvalues of (..., 3, 3) Hermitian matrices by bisection.

    Independent of the Cardano route: only inertia counts are used.
    """
    rho = np.asarray(rho, dtype=complex)
    batch = rho.shape[:-2]
    radius = np.abs(rho).sum(axis=-1).max(axis=-1)  # Gershgorin bound
    out = np.empty(batch + (3,))
    for k in range(3):
        lo, hi = -radius - 1.0, radius + 1.0
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            enough = _count_below(rho, mid) >= k + 1
            hi = np.where(enough, mid, hi)
            lo = np.where(enough, lo, mid)
        out[..., k] = 0.5 * (lo + hi)
    return out


def von_neumann_entropy(e) -> float:
    """-sum xi ln xi, natural log, treating xi < 1e-12 as zero."""
    xi = np.asarray(e.xi if isinstance(e, EigenTriple) else e, dtype=float)
    xi = xi[xi >= ZERO_EIG]
    return float(-np.sum(xi * np.log(xi)))


@dataclass(frozen=True)
class EntropySample:
    tau: float
    dem: float


def entropy_sample(snap: StateSnapshot) -> EntropySample:
    return EntropySample(snap.t, von_neumann_entropy(
        hermitian3_eigs_cardano(reduced_atom_dm(snap))))
