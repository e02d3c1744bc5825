"""Spectator twisting: rotations that align spectator Gram frames with the probe's."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.transform import Rotation

from .channels import (
    SpectralTriple,
    channel_matrix,
    channel_matrix_derivative,
    gram_spectrum,
)
from .errors import DomainError
from .states import PAULIS, ProtocolSpec, Spectator

__all__ = [
    "TwistPlan",
    "twist_rotation",
    "twisted_gram",
    "su2_from_rotation",
    "bloch_action",
    "frame_is_lambda_dependent",
    "plan_twists",
    "apply_twists",
]

_ORTHO_TOL = 1e-10


def _check_orthonormal(v: np.ndarray, what: str) -> None:
    if np.abs(v.T @ v - np.eye(3)).max() > 1e-9:
        raise DomainError(f"{what} eigenvectors are not orthonormal")


def twist_rotation(
    spectator_spectrum: SpectralTriple, channel_spectrum: SpectralTriple
) -> np.ndarray:
    """Proper rotation ``R = s a^T + t b^T + u d^T``.

    ``u`` is negated when the raw product would be improper; the Gram
    matrix, and hence every bound, is unaffected by that sign.
    """
    sv = np.asarray(spectator_spectrum.vectors, dtype=float)
    cv = np.asarray(channel_spectrum.vectors, dtype=float)
    _check_orthonormal(sv, "spectator")
    _check_orthonormal(cv, "channel")
    rot = sv @ cv.T
    if np.linalg.det(rot) < 0:
        sv = sv.copy()
        sv[:, 2] = -sv[:, 2]
        rot = sv @ cv.T
    return rot


def twisted_gram(m: ArrayLike, rot: ArrayLike) -> np.ndarray:
    """Twisted Bloch matrix ``R^T M R``."""
    rot = np.asarray(rot, dtype=float)
    if np.abs(rot.T @ rot - np.eye(3)).max() > _ORTHO_TOL:
        raise DomainError("twist must be orthogonal")
    return rot.T @ np.asarray(m, dtype=float) @ rot


def bloch_action(u: ArrayLike) -> np.ndarray:
    """Rotation ``R`` with ``U (v.sigma) U^dagger = (R v).sigma``."""
    u = np.asarray(u, dtype=complex)
    conj = np.einsum("ab,jbc,dc->jad", u, PAULIS, u.conj())
    # R[i, j] = Tr[sigma_i U sigma_j U^dagger] / 2
    return np.real(np.einsum("iba,jab->ij", PAULIS, conj)) / 2.0


def su2_from_rotation(rot: ArrayLike) -> np.ndarray:
    """SU(2) element whose conjugation action on Bloch vectors is ``rot``.

    Of the two representatives ``±U`` the one with non-negative trace is
    returned.
    """
    rot = np.asarray(rot, dtype=float)
    if np.abs(rot.T @ rot - np.eye(3)).max() > _ORTHO_TOL:
        raise DomainError("rotation must be orthogonal")
    if np.linalg.det(rot) < 0:
        raise DomainError("improper rotation has no SU(2) representative")
    x, y, z, w = Rotation.from_matrix(rot).as_quat()
    if w < 0:
        x, y, z, w = -x, -y, -z, -w
    # exp(-i theta/2 n.sigma) rotates Bloch vectors by theta about n
    return w * np.eye(2) - 1j * (x * PAULIS[0] + y * PAULIS[1] + z * PAULIS[2])


@dataclass(frozen=True)
class TwistPlan:
    """One rotation per spectator plus its SU(2) realization."""

    rotations: tuple[np.ndarray, ...]
    su2_reps: tuple[np.ndarray, ...] = field(repr=False)
    local_lambda0: float | None = None


def frame_is_lambda_dependent(spec: ProtocolSpec, rel_step: float = 1e-3) -> bool:
    """Whether the probe's Gram eigenvectors move with the parameter.

    Compares the Gram matrix projector structure at nearby parameter values;
    families whose Gram is a fixed matrix (all built-ins) report False.
    """
    fam = spec.channel
    lo, hi = fam.domain
    lam = fam.lam
    h = rel_step * max(1.0, abs(lam))
    probes = [x for x in (lam - h, lam + h) if lo + 1e-6 <= x <= hi - 1e-6]
    base = gram_spectrum(channel_matrix_derivative(fam))
    for x in probes:
        try:
            other = gram_spectrum(channel_matrix_derivative(fam.with_lambda(x)))
        except DomainError:
            continue
        # compare the rotated Gram: same frame means other's Gram is diagonal in base's frame
        g = base.vectors.T @ other.matrix() @ base.vectors
        off = g - np.diag(np.diag(g))
        if np.abs(off).max() > 1e-9 * max(1.0, other.values[0]):
            return True
    return False


def plan_twists(spec: ProtocolSpec, lambda0: float | None = None) -> TwistPlan:
    """Rotations aligning each spectator's Gram frame with the probe's.

    When ``lambda0`` is given the probe frame is frozen there; it is recorded
    as ``local_lambda0`` only when the frame actually depends on the
    parameter. Spectators with an isotropic Gram get the identity.
    """
    if lambda0 is None:
        frame = gram_spectrum(channel_matrix_derivative(spec.channel))
        local = None
    else:
        frame = gram_spectrum(channel_matrix_derivative(spec.channel.with_lambda(lambda0)))
        local = float(lambda0) if frame_is_lambda_dependent(spec.with_lambda(lambda0)) else None
    rotations = []
    for sp in spec.spectators:
        sspec = gram_spectrum(channel_matrix(sp.channel))
        if sspec.is_isotropic():
            rotations.append(np.eye(3))
        else:
            rotations.append(twist_rotation(sspec, frame))
    reps = tuple(su2_from_rotation(r) for r in rotations)
    return TwistPlan(tuple(rotations), reps, local)


def apply_twists(spec: ProtocolSpec, plan: TwistPlan) -> ProtocolSpec:
    """Copy of ``spec`` whose spectators carry the plan's rotations."""
    if len(plan.rotations) != spec.n - 1:
        raise DomainError("twist plan does not match the spectator count")
    spectators = tuple(
        Spectator(sp.channel, rot) for sp, rot in zip(spec.spectators, plan.rotations)
    )
    return spec.replace(spectators=spectators)
