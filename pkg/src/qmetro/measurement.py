"""Final measurements: outcome tables, classical Fisher information and MLE experiments."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike

from .channels import channel_matrix, channel_matrix_derivative, gram_spectrum, unit
from .errors import (
    DegenerateSpectatorError,
    DomainError,
    IllConditionedError,
    NoClosedFormError,
    PerpendicularityError,
)
from .states import (
    ProtocolSpec,
    _apply_gate_left,
    final_state,
    outcome_probabilities,
    u_c,
    u_prep,
)

__all__ = [
    "MeasurementKind",
    "MeasurementScheme",
    "EstimationResult",
    "sign_table",
    "spectator_eigenvalues",
    "generic_probabilities_closed",
    "tailored_probabilities_closed",
    "fisher_generic",
    "fisher_tailored",
    "optimal_tailored_direction",
    "simulated_probabilities",
    "fisher_numeric",
    "estimation_experiment",
]

_PERP_TOL = 1e-9
_ALIGN_TOL = 1e-9
_LOG_FLOOR = 1e-15


class MeasurementKind(str, enum.Enum):
    GENERIC = "generic"
    TAILORED = "tailored"


@dataclass(frozen=True)
class MeasurementScheme:
    kind: MeasurementKind
    m: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MeasurementKind(self.kind))
        if self.kind is MeasurementKind.TAILORED:
            if self.m is None:
                raise DomainError("tailored measurement needs a direction m")
            object.__setattr__(self, "m", unit(self.m, 1e-9))
        elif self.m is not None:
            raise DomainError("generic measurement takes no direction")

    @classmethod
    def generic(cls) -> MeasurementScheme:
        return cls(MeasurementKind.GENERIC)

    @classmethod
    def tailored(cls, m: ArrayLike) -> MeasurementScheme:
        return cls(MeasurementKind.TAILORED, np.asarray(m, dtype=float))


def sign_table(n: int) -> np.ndarray:
    """``(2^n, n)`` array of outcome signs ``±1`` in table order (bit 0 is ``+``)."""
    return np.array(list(itertools.product((1.0, -1.0), repeat=n)))


def _check_perpendicular(spec: ProtocolSpec) -> None:
    if abs(float(spec.r0 @ spec.c)) > _PERP_TOL:
        raise PerpendicularityError(
            f"r0.c = {float(spec.r0 @ spec.c):.3g}; the measurement schemes need r0 ⟂ c"
        )


def _eigen_along(m: np.ndarray, v: np.ndarray) -> float:
    """Signed eigenvalue of ``m`` along ``v``, or raise if ``v`` is not an eigenvector."""
    image = m @ v
    value = float(v @ image)
    if np.linalg.norm(image - value * v) > _ALIGN_TOL * max(1.0, np.linalg.norm(m)):
        raise NoClosedFormError(
            "a spectator Bloch matrix is not diagonal in the protocol frame"
        )
    return value


def spectator_eigenvalues(spec: ProtocolSpec) -> tuple[np.ndarray, np.ndarray]:
    """Signed spectator eigenvalues ``eps_j = c^T M_j c`` and ``mu_j = r0^T M_j r0``.

    Requires ``c`` and ``r0`` to be eigenvectors of every (twisted)
    spectator Bloch matrix.
    """
    mats = spec.spectator_matrices()
    eps = np.array([_eigen_along(m, spec.c) for m in mats], dtype=float)
    mu = np.array([_eigen_along(m, spec.r0) for m in mats], dtype=float)
    return eps, mu


def _leave_one_out_products(eps: np.ndarray) -> np.ndarray:
    """``prod_{k != j} eps_k`` for each ``j``, without dividing."""
    return np.array([np.prod(np.delete(eps, j)) for j in range(len(eps))])


def generic_probabilities_closed(spec: ProtocolSpec) -> np.ndarray:
    """First-order outcome table of the generic scheme."""
    _check_perpendicular(spec)
    eps, mu = spectator_eigenvalues(spec)
    m1 = channel_matrix(spec.channel)
    signs = sign_table(spec.n)
    probe = float(spec.r0 @ m1 @ spec.r0) * float(np.prod(eps))
    weights = float(spec.c @ m1 @ spec.c) * mu * _leave_one_out_products(eps)
    first = signs[:, 0] * probe + signs[:, 1:] @ weights
    return (1.0 + spec.r * first) / 2**spec.n


def tailored_probabilities_closed(spec: ProtocolSpec, m: ArrayLike) -> np.ndarray:
    """First-order outcome table of the tailored scheme.

    The first-order term carries the product of the probe sign with one
    spectator sign, so every marginal that ignores either side is uniform.
    """
    _check_perpendicular(spec)
    m = unit(m, 1e-9)
    eps, mu = spectator_eigenvalues(spec)
    m1 = channel_matrix(spec.channel)
    signs = sign_table(spec.n)
    weights = float(m @ m1 @ spec.c) * mu * _leave_one_out_products(eps)
    first = signs[:, 0] * (signs[:, 1:] @ weights)
    return (1.0 + spec.r * first) / 2**spec.n


def _check_spectator_sigmas(spec: ProtocolSpec) -> None:
    for j, mat in enumerate(spec.spectator_matrices(), start=2):
        if gram_spectrum(mat).values[0] <= 0.0:
            raise DegenerateSpectatorError(
                f"spectator {j} has a vanishing largest Gram eigenvalue"
            )


def fisher_generic(spec: ProtocolSpec) -> float:
    """Lowest-order classical Fisher information of the generic scheme.

    Equals ``r^2 [(r0^T Mdot r0)^2 + (c^T Mdot c)^2 sum_j tau_j/sigma_j] Sigma``
    with ``sigma_j = eps_j^2`` and ``tau_j = mu_j^2``; evaluated in product
    form so no ratio is formed.
    """
    _check_perpendicular(spec)
    _check_spectator_sigmas(spec)
    eps, mu = spectator_eigenvalues(spec)
    mdot = channel_matrix_derivative(spec.channel)
    probe = float(spec.r0 @ mdot @ spec.r0) ** 2 * float(np.prod(eps**2))
    spect = float(spec.c @ mdot @ spec.c) ** 2 * float(
        np.sum((mu * _leave_one_out_products(eps)) ** 2)
    )
    return spec.r**2 * (probe + spect)


def fisher_tailored(spec: ProtocolSpec, m: ArrayLike) -> float:
    """Lowest-order classical Fisher information of the tailored scheme."""
    _check_perpendicular(spec)
    _check_spectator_sigmas(spec)
    m = unit(m, 1e-9)
    eps, mu = spectator_eigenvalues(spec)
    mdot = channel_matrix_derivative(spec.channel)
    coupling = float(m @ mdot @ spec.c) ** 2
    return spec.r**2 * coupling * float(np.sum((mu * _leave_one_out_products(eps)) ** 2))


def optimal_tailored_direction(spec: ProtocolSpec) -> np.ndarray:
    """``m`` along ``Mdot c``, maximizing ``(m^T Mdot c)^2`` for the protocol's ``c``.

    With ``c`` the top right-singular vector of ``Mdot`` this is the matching
    left-singular vector.
    """
    v = channel_matrix_derivative(spec.channel) @ spec.c
    norm = np.linalg.norm(v)
    if norm <= 1e-15:
        raise DomainError("Mdot c vanishes; no tailored direction carries information")
    return v / norm


# simulated tables ------------------------------------------------------------------


def _undo_preparation(mat: np.ndarray, spec: ProtocolSpec, scheme: MeasurementScheme) -> np.ndarray:
    n = spec.n
    if n == 1:
        return mat
    if scheme.kind is MeasurementKind.GENERIC:
        u = u_prep(n, spec.c)
        return u.conj().T @ mat @ u
    gate = u_c(spec.c).conj().T
    out = mat
    for i, j in itertools.combinations(range(2, n + 1), 2):
        out = _apply_gate_left(out, gate, (i, j), n)
        out = _apply_gate_left(out.conj().T, gate, (i, j), n).conj().T
    return out


def _measurement_directions(spec: ProtocolSpec, scheme: MeasurementScheme) -> list[np.ndarray]:
    first = spec.r0 if scheme.kind is MeasurementKind.GENERIC else scheme.m
    return [first] + [spec.r0] * (spec.n - 1)


def simulated_probabilities(
    spec: ProtocolSpec, scheme: MeasurementScheme, m1: ArrayLike | None = None
) -> np.ndarray:
    """Exact outcome table from the dense simulation of the protocol and scheme.

    Generic: undo the full preparation, then measure every qubit along
    ``r0``. Tailored: undo only the gates among spectators, measure qubit 1
    along ``m`` and the spectators along ``r0``.
    """
    rho = final_state(spec, m1=m1)
    mat = _undo_preparation(rho.matrix, spec, scheme)
    return outcome_probabilities(0.5 * (mat + mat.conj().T), _measurement_directions(spec, scheme))


# Fisher information ----------------------------------------------------------------


def fisher_numeric(
    prob_fn: Callable[[float], np.ndarray], lam: float, h: float | None = None
) -> float:
    """``sum_m (dP_m/dlambda)^2 / P_m`` with a Richardson-extrapolated central difference."""
    if h is None:
        h = 1e-4 * max(1.0, abs(lam))

    def central(step: float) -> np.ndarray:
        return (np.asarray(prob_fn(lam + step)) - np.asarray(prob_fn(lam - step))) / (2 * step)

    dp = (4.0 * central(h / 2) - central(h)) / 3.0
    p = np.asarray(prob_fn(lam), dtype=float)
    p = np.where((p < 0) & (p > -1e-12), 0.0, p)
    zero = p <= _LOG_FLOOR
    if np.any(np.abs(dp[zero]) > 1e-9):
        raise IllConditionedError("a zero-probability outcome has a nonzero derivative")
    return float(np.sum(dp[~zero] ** 2 / p[~zero]))


# estimation ------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimationResult:
    """Batch MLE statistics; ``variance_times_shots`` is compared with ``1/F``."""

    lambda_hat: float
    variance: float
    variance_times_shots: float
    standard_error: float
    fisher_per_shot: float
    shots: int
    batches: int
    estimates: np.ndarray
    non_identifiable: bool

    @property
    def crb(self) -> float:
        return math.inf if self.fisher_per_shot <= 0 else 1.0 / self.fisher_per_shot


def _affine_model(spec: ProtocolSpec, scheme: MeasurementScheme) -> tuple[np.ndarray, np.ndarray]:
    """Outcome table as ``base + coeffs @ vec(M1)``; exact since the state is affine in ``M1``."""
    base = simulated_probabilities(spec, scheme, m1=np.zeros((3, 3)))
    coeffs = np.empty((9, len(base)))
    for k in range(9):
        e = np.zeros(9)
        e[k] = 1.0
        coeffs[k] = simulated_probabilities(spec, scheme, m1=e.reshape(3, 3)) - base
    return base, coeffs


def _search_interval(spec: ProtocolSpec, center: float) -> tuple[float, float]:
    lo, hi = spec.channel.domain
    if math.isinf(lo) or math.isinf(hi):
        return center - 0.5, center + 0.5
    return lo, hi


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_maximize(
    f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, size: int, tol: float = 1e-8
) -> np.ndarray:
    """Vectorized golden-section maximization of ``size`` objectives on ``[lo, hi]``."""
    a = np.full(size, lo)
    b = np.full(size, hi)
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while np.max(b - a) > tol:
        left = f1 >= f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        new_x1 = np.where(left, b - _GOLDEN * (b - a), x2)
        new_x2 = np.where(left, x1, a + _GOLDEN * (b - a))
        f_new = f(np.where(left, new_x1, new_x2))
        f1, f2 = np.where(left, f_new, f2), np.where(left, f1, f_new)
        x1, x2 = new_x1, new_x2
    return 0.5 * (a + b)


def estimation_experiment(
    spec: ProtocolSpec,
    scheme: MeasurementScheme,
    true_lambda: float,
    shots: int,
    seed: int,
    batches: int = 50,
) -> EstimationResult:
    """Repeated maximum-likelihood estimation of the probe parameter.

    Each batch draws ``shots`` outcome strings from the exact simulated
    distribution at ``true_lambda`` with a generator seeded by
    ``(seed, batch)``, then maximizes the log-likelihood by golden-section
    search over the family's domain (a window of half-width 0.5 around the
    true value for unbounded families). The result is flagged
    non-identifiable when the outcomes carry no information or an estimate
    lands on the search boundary; a zero-probability outcome whose
    probability still moves with the parameter raises
    :class:`IllConditionedError`.
    """
    if shots < 1 or batches < 2:
        raise DomainError("need shots >= 1 and at least two batches")
    spec = spec.with_lambda(true_lambda)
    base, coeffs = _affine_model(spec, scheme)
    family = spec.channel

    def table(lam: float) -> np.ndarray:
        return base + channel_matrix(family.with_lambda(lam)).reshape(9) @ coeffs

    lo, hi = _search_interval(spec, true_lambda)
    p_true = np.clip(table(true_lambda), 0.0, None)
    p_true = p_true / p_true.sum()
    counts = np.stack(
        [np.random.default_rng([seed, b]).multinomial(shots, p_true) for b in range(batches)]
    )

    def loglik(lams: np.ndarray) -> np.ndarray:
        tables = np.stack([table(float(x)) for x in lams])
        return np.sum(counts * np.log(np.maximum(tables, _LOG_FLOOR)), axis=1)

    estimates = _golden_maximize(loglik, lo, hi, batches)
    mid = np.full(batches, 0.5 * (lo + hi))
    at_est, at_mid = loglik(estimates), loglik(mid)
    ties = at_mid >= at_est - 1e-12 * np.maximum(1.0, np.abs(at_est))
    estimates = np.where(ties, mid, estimates)

    h = 1e-4 * max(1.0, abs(true_lambda))
    fisher = fisher_numeric(table, true_lambda, h) if lo + h <= true_lambda <= hi - h else 0.0
    on_edge = np.any(np.minimum(estimates - lo, hi - estimates) < 1e-6)
    non_identifiable = bool(fisher < 1e-12 or on_edge)
    variance = float(np.var(estimates, ddof=1))
    return EstimationResult(
        lambda_hat=float(np.mean(estimates)),
        variance=variance,
        variance_times_shots=variance * shots,
        standard_error=variance * shots * math.sqrt(2.0 / (batches - 1)),
        fisher_per_shot=fisher,
        shots=shots,
        batches=batches,
        estimates=estimates,
        non_identifiable=non_identifiable,
    )
