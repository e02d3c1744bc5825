"""Quantum Fisher information: exact SLD oracle, lowest-order series and closed forms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .channels import (
    ChannelFamily,
    SpectralTriple,
    channel_matrix_derivative,
    gram_spectrum,
    unit,
)
from .errors import DomainError, SeriesValidityWarning
from .states import (
    DensityOperator,
    ProtocolSpec,
    _local_pauli_map,
    final_state,
    pauli_combination,
)

__all__ = [
    "SERIES_VALIDITY_LIMIT",
    "QfiBounds",
    "qfi_exact_sld",
    "protocol_state_derivative",
    "protocol_qfi_exact",
    "first_order_derivative_operator",
    "qfi_series_order2",
    "sqsc_qfi",
    "sqsc_optimal",
    "local_frame",
    "cs_qfi_closed_form",
    "cs_qfi_bounds",
    "series_valid",
    "spectator_spectra",
    "convergence_order",
]

SERIES_VALIDITY_LIMIT = 0.1
_NULL_THRESHOLD = 1e-12


def series_valid(n: int, r: float) -> bool:
    """Whether the lowest-order expansion is trusted, i.e. ``n r^2 <= 0.1``."""
    return n * r * r <= SERIES_VALIDITY_LIMIT


def _warn_validity(n: int, r: float) -> None:
    if not series_valid(n, r):
        warnings.warn(
            f"n r^2 = {n * r * r:.3g} exceeds {SERIES_VALIDITY_LIMIT}; "
            "lowest-order QFI may be inaccurate",
            SeriesValidityWarning,
            stacklevel=3,
        )


# exact oracle ----------------------------------------------------------------------


def qfi_exact_sld(rho: DensityOperator | ArrayLike, drho: ArrayLike) -> float:
    """QFI from the eigen-decomposition of ``rho``.

    ``H = 2 sum_{jk} |<j|drho|k>|^2 / (p_j + p_k)`` over pairs whose weight
    exceeds a relative null threshold.
    """
    mat = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    d = np.asarray(drho, dtype=complex)
    if d.shape != mat.shape:
        raise DomainError("rho and drho must have the same shape")
    if np.abs(mat - mat.conj().T).max() > 1e-10 or np.abs(d - d.conj().T).max() > 1e-10:
        raise DomainError("rho and drho must be Hermitian")
    p, v = np.linalg.eigh(mat)
    p = np.clip(p, 0.0, None)
    dk = v.conj().T @ d @ v
    denom = p[:, None] + p[None, :]
    theta = _NULL_THRESHOLD * 2.0 * p.max()
    mask = denom > theta
    weights = np.abs(dk[mask]) ** 2 / denom[mask]
    return float(2.0 * weights.sum())


def _fd_stencil_inside(family: ChannelFamily, h: float) -> bool:
    lo, hi = family.domain
    return family.lam - h >= lo and family.lam + h <= hi


def protocol_state_derivative(spec: ProtocolSpec, method: str = "fd") -> np.ndarray:
    """``d rho_f / d lambda`` of the full simulated state.

    ``"fd"`` uses a Richardson-extrapolated central difference with step
    ``1e-5 max(1, |lambda|)``. ``"affine"`` uses that the final state is
    affine in the probe Bloch matrix, so the derivative equals the image of
    ``dM/dlambda`` with the constant part removed; the finite difference
    falls back to it when the stencil would leave the parameter domain.
    """
    if method not in ("fd", "affine"):
        raise DomainError(f"unknown derivative method {method!r}")
    lam = spec.channel.lam
    h = 1e-5 * max(1.0, abs(lam))
    if method == "fd" and _fd_stencil_inside(spec.channel, h):

        def central(step: float) -> np.ndarray:
            plus = final_state(spec.with_lambda(lam + step)).matrix
            minus = final_state(spec.with_lambda(lam - step)).matrix
            return (plus - minus) / (2.0 * step)

        coarse, fine = central(h), central(h / 2)
        return (4.0 * fine - coarse) / 3.0
    mdot = channel_matrix_derivative(spec.channel)
    with_dot = final_state(spec, m1=mdot).matrix
    without = final_state(spec, m1=np.zeros((3, 3))).matrix
    return with_dot - without


def protocol_qfi_exact(spec: ProtocolSpec, method: str = "fd") -> float:
    """Exact QFI of the simulated protocol state with respect to the probe parameter."""
    rho = final_state(spec)
    drho = protocol_state_derivative(spec, method)
    return qfi_exact_sld(rho, 0.5 * (drho + drho.conj().T))


# lowest-order series ---------------------------------------------------------------


def _pauli_string(vectors: Sequence[np.ndarray | None]) -> np.ndarray:
    """Tensor product of ``v.sigma`` factors; ``None`` stands for the identity."""
    out = np.ones((1, 1), dtype=complex)
    for v in vectors:
        factor = np.eye(2, dtype=complex) if v is None else pauli_combination(v)
        out = np.kron(out, factor)
    return out


def first_order_derivative_operator(spec: ProtocolSpec) -> np.ndarray:
    """``d rho_f^(1) / d lambda``: derivative of the coefficient of ``r`` in the final state.

    The first-order prepared state is assembled from Pauli strings: each
    qubit ``k`` contributes ``r0_perp`` on slot ``k`` with ``c`` elsewhere, plus
    ``(r0.c) c`` on slot ``k`` alone. Spectator channels are then applied,
    and on qubit 1 ``M1`` is replaced by its derivative, which also removes
    every λ-independent term.
    """
    n = spec.n
    c = spec.c
    overlap = float(spec.r0 @ c)
    perp = spec.r0 - overlap * c
    big_n = 2**n
    op = np.zeros((big_n, big_n), dtype=complex)
    for k in range(n):
        op += _pauli_string([perp if s == k else c for s in range(n)])
        op += overlap * _pauli_string([c if s == k else None for s in range(n)])
    op /= big_n
    for j, m in enumerate(spec.spectator_matrices(), start=2):
        op = _local_pauli_map(op, m, j, n)
    mdot = channel_matrix_derivative(spec.channel)
    return _local_pauli_map(op, mdot, 1, n, keep_identity=False)


def qfi_series_order2(spec: ProtocolSpec) -> float:
    """``H^(2) = N Tr[(d rho_f^(1))^2]``, the coefficient of ``r^2`` in the QFI."""
    d = first_order_derivative_operator(spec)
    return float(2**spec.n * np.real(np.trace(d @ d)))


# closed forms ----------------------------------------------------------------------


def sqsc_qfi(m1dot: ArrayLike, r0: ArrayLike, r: float) -> float:
    """Single-qubit QFI ``r^2 r0^T Mdot^T Mdot r0``."""
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"purity must lie in [0, 1], got {r}")
    v = np.asarray(m1dot, dtype=float) @ unit(r0, 1e-9)
    return float(r * r * (v @ v))


def sqsc_optimal(m1dot: ArrayLike, r: float) -> tuple[float, np.ndarray]:
    """Optimal single-qubit QFI ``r^2 alpha`` and the direction achieving it."""
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"purity must lie in [0, 1], got {r}")
    spectrum = gram_spectrum(m1dot)
    return float(r * r * spectrum.values[0]), spectrum.first.copy()


def local_frame(family: ChannelFamily, lambda0: float) -> SpectralTriple:
    """Gram spectrum of the probe derivative frozen at ``lambda0``."""
    return gram_spectrum(channel_matrix_derivative(family.with_lambda(lambda0)))


def cs_qfi_closed_form(spec: ProtocolSpec) -> float:
    """Lowest-order CS QFI ``r^2 [V^T G V + (r0.c)^2 c^T Q1 c]``.

    ``G`` is the tensor product of the slot Gram matrices. ``V`` is a sum of
    product vectors, so ``V^T G V`` is a sum of products of per-slot
    quadratic forms; these are accumulated in one pass over the slots
    without forming the ``3^n`` tensor. A single qubit has no spectator
    slots to separate the two terms, their cross term survives, and the
    result collapses to ``sqsc_qfi``.
    """
    _warn_validity(spec.n, spec.r)
    mdot = channel_matrix_derivative(spec.channel)
    if spec.n == 1:
        return sqsc_qfi(mdot, spec.r0, spec.r)
    c = spec.c
    overlap = float(spec.r0 @ c)
    p = spec.r0 - overlap * c
    grams = [mdot.T @ mdot] + [m.T @ m for m in spec.spectator_matrices()]
    # e0: all slots carry c; e1: one slot carries p; e2: both sides have used their p
    e0, e1, e2 = 1.0, 0.0, 0.0
    for q in grams:
        a, b, cc = c @ q @ c, p @ q @ c, p @ q @ p
        e0, e1, e2 = e0 * a, e1 * a + e0 * b, e2 * a + 2.0 * e1 * b + e0 * cc
    return float(spec.r**2 * (e2 + overlap**2 * (c @ grams[0] @ c)))


@dataclass(frozen=True)
class QfiBounds:
    """Analytic bounds on the lowest-order CS QFI.

    ``lower`` is the overlap-resolved bound when the protocol's ``r0.c`` is
    known and otherwise the guarantee available when ``r0`` and ``c`` are
    chosen optimally. ``twisted_lower`` is ``None`` when not requested or
    when a spectator has a vanishing top Gram eigenvalue
    (``degenerate_spectator``).
    """

    upper: float
    lower: float
    sigma_product: float
    upsilon_product: float
    clean_lower: float | None = None
    twisted_lower: float | None = None
    degenerate_spectator: bool = False
    series_valid: bool = True


def cs_qfi_bounds(
    channel_spectrum: SpectralTriple,
    spectator_spectra: Sequence[SpectralTriple],
    n: int,
    r: float,
    twisted: bool = False,
    overlap: float | None = None,
) -> QfiBounds:
    """Upper and lower bounds on the CS QFI from the Gram spectra alone.

    With ``overlap = r0.c`` the lower bound is ``r^2 delta [n Upsilon (1 - x) + x]``
    with ``x = overlap^2``; without it the bound assumes the better of
    ``r0 ⟂ c`` and ``r0 ∥ c``.
    """
    if len(spectator_spectra) != n - 1:
        raise DomainError(f"{n} qubits need {n - 1} spectator spectra")
    alpha, beta, delta = (float(x) for x in channel_spectrum.values)
    h_sopt = r * r * alpha
    sigmas = np.array([s.values[0] for s in spectator_spectra], dtype=float)
    taus = np.array([s.values[1] for s in spectator_spectra], dtype=float)
    upsilons = np.array([s.values[2] for s in spectator_spectra], dtype=float)
    big_sigma = float(np.prod(sigmas))
    big_upsilon = float(np.prod(upsilons))

    upper = max(n * big_sigma, 1.0) * h_sopt
    if overlap is None:
        lower = r * r * delta * max(n * big_upsilon, 1.0)
    else:
        x = min(float(overlap) ** 2, 1.0)
        lower = r * r * delta * (n * big_upsilon * (1.0 - x) + x)

    clean_lower = None
    if all(np.allclose(s.values, 1.0, atol=1e-12) for s in spectator_spectra) and alpha > 0:
        clean_lower = h_sopt * (beta / alpha + n - 1)

    twisted_lower = None
    degenerate = bool(np.any(sigmas <= 0.0))
    if twisted and not degenerate:
        # H_sopt (beta/alpha + sum tau_j/sigma_j) Sigma, written without division
        cross = sum(
            taus[j] * float(np.prod(np.delete(sigmas, j))) for j in range(n - 1)
        )
        twisted_lower = r * r * (beta * big_sigma + alpha * cross)
    return QfiBounds(
        upper=float(upper),
        lower=float(lower),
        sigma_product=big_sigma,
        upsilon_product=big_upsilon,
        clean_lower=None if clean_lower is None else float(clean_lower),
        twisted_lower=None if twisted_lower is None else float(twisted_lower),
        degenerate_spectator=degenerate,
        series_valid=series_valid(n, r),
    )


def spectator_spectra(spec: ProtocolSpec) -> list[SpectralTriple]:
    return [gram_spectrum(m) for m in spec.spectator_matrices()]


def convergence_order(r_values: Sequence[float], ratios: Sequence[float]) -> float:
    """Fitted exponent ``k`` in ``|ratio - 1| ~ C r^k``.

    Returns ``inf`` when every deviation is already at round-off level
    (below 1e-7), i.e. there is no truncation error left to fit.
    """
    r = np.asarray(r_values, dtype=float)
    dev = np.abs(np.asarray(ratios, dtype=float) - 1.0)
    keep = r > 0
    r, dev = r[keep], dev[keep]
    if len(r) < 2:
        raise DomainError("need at least two positive r values")
    if np.all(dev < 1e-7):
        return math.inf
    dev = np.maximum(dev, 1e-300)
    slope, _ = np.polyfit(np.log(r), np.log(dev), 1)
    return float(slope)

