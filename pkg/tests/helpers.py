"""Brute-force reconstructions of the joint state used as independent oracles."""

import numpy as np


def joint_state(snap, phase_convention=True):
    """Explicit vector psi[atom, m1, m2] built from the block amplitudes.

    With ``phase_convention`` the |2> and |3> components carry the
    e^{-i Delta t} factors that match the rotating-frame coherences.
    """
    n1, n2 = snap.A.shape
    psi = np.zeros((3, n1 + 1, n2 + 1), dtype=complex)
    t = snap.t
    p2 = np.exp(-1j * snap.delta2 * t) if phase_convention else 1.0
    p3 = np.exp(-1j * snap.delta3 * t) if phase_convention else 1.0
    for i in range(n1):
        for j in range(n2):
            qq = snap.q1[i] * snap.q2[j]
            psi[0, i, j] += qq * snap.A[i, j]
            psi[1, i + 1, j] += qq * snap.B[i, j] * p2
            psi[2, i, j + 1] += qq * snap.C[i, j] * p3
    return psi


def atom_dm_bruteforce(snap):
    psi = joint_state(snap).reshape(3, -1)
    return psi @ psi.conj().T


def mode1_moments(snap):
    """<x> and <x^2> of field mode 1 from ladder-operator algebra on the joint state."""
    psi = joint_state(snap, phase_convention=False)
    m = np.arange(psi.shape[1])
    # a|m> = sqrt(m)|m-1>
    a_psi = np.zeros_like(psi)
    a_psi[:, :-1, :] = psi[:, 1:, :] * np.sqrt(m[1:])[None, :, None]
    aa_psi = np.zeros_like(psi)
    aa_psi[:, :-1, :] = a_psi[:, 1:, :] * np.sqrt(m[1:])[None, :, None]
    mean_a = np.vdot(psi, a_psi)
    mean_aa = np.vdot(psi, aa_psi)
    mean_n = np.sum(np.abs(psi) ** 2 * m[None, :, None])
    norm = np.vdot(psi, psi).real
    x1 = np.sqrt(2.0) * mean_a.real / norm
    x2 = (2.0 * mean_n + norm + 2.0 * mean_aa.real) / (2.0 * norm)
    p1 = np.sqrt(2.0) * mean_a.imag / norm
    p2 = (2.0 * mean_n + norm - 2.0 * mean_aa.real) / (2.0 * norm)
    return x1, x2, p1, p2
