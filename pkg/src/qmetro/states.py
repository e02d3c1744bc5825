"""Dense multi-qubit density-operator simulation.

This is the brute-force substrate that every closed form is checked against.
Qubits are numbered from 1; qubit 1 is the leftmost tensor factor, i.e. the
most significant bit of a matrix index. Outcome tables over ``n`` qubits are
arrays of length ``2**n`` indexed the same way, with bit 0 meaning the ``+``
outcome.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .channels import ChannelFamily, channel_matrix, unit
from .errors import CapacityError, DomainError

__all__ = [
    "I2",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "PAULIS",
    "DEFAULT_MAX_N",
    "HARD_MAX_N",
    "max_qubits",
    "DensityOperator",
    "Spectator",
    "ProtocolSpec",
    "pauli_combination",
    "bloch_vector",
    "initial_product_state",
    "u_c",
    "embed_two_qubit",
    "u_prep",
    "apply_local_unital_channel",
    "apply_local_unitary",
    "outcome_labels",
    "outcome_probabilities",
    "prepared_state",
    "final_state",
]

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

DEFAULT_MAX_N = 8
HARD_MAX_N = 12

_HERMITIAN_TOL = 1e-10
_TRACE_TOL = 1e-10


def max_qubits() -> int:
    """Qubit cap for dense simulation, overridable through ``QMETRO_MAX_N``."""
    raw = os.environ.get("QMETRO_MAX_N")
    if raw is None:
        return DEFAULT_MAX_N
    try:
        value = int(raw)
    except ValueError as exc:
        raise CapacityError(f"QMETRO_MAX_N must be an integer, got {raw!r}") from exc
    if not 1 <= value <= HARD_MAX_N:
        raise CapacityError(f"QMETRO_MAX_N must lie in [1, {HARD_MAX_N}]")
    return value


def _check_capacity(n: int) -> None:
    cap = max_qubits()
    if n > cap:
        raise CapacityError(f"{n} qubits exceeds the dense-simulation cap of {cap}")


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace operator on ``n`` qubits.

    Construction checks shape, Hermiticity and trace; positivity is checked
    on demand by :meth:`is_physical` since it needs an eigendecomposition.
    """

    n: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        dim = 2**self.n
        if m.shape != (dim, dim):
            raise DomainError(f"expected a {dim}x{dim} matrix for {self.n} qubits")
        if np.abs(m - m.conj().T).max() > _HERMITIAN_TOL:
            raise DomainError("density operator must be Hermitian")
        if abs(np.trace(m) - 1.0) > _TRACE_TOL:
            raise DomainError("density operator must have unit trace")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def is_physical(self, tol: float = 1e-9) -> bool:
        return bool(np.linalg.eigvalsh(self.matrix).min() >= -tol)


@dataclass(frozen=True)
class Spectator:
    """A spectator qubit's noise channel, optionally twisted by rotation ``twist``."""

    channel: ChannelFamily
    twist: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.twist is not None:
            r = np.array(self.twist, dtype=float)
            if r.shape != (3, 3):
                raise DomainError("twist must be a 3x3 rotation")
            if np.abs(r.T @ r - np.eye(3)).max() > 1e-10 or abs(np.linalg.det(r) - 1) > 1e-10:
                raise DomainError("twist must be orthogonal with determinant +1")
            r.setflags(write=False)
            object.__setattr__(self, "twist", r)

    def bloch_matrix(self) -> np.ndarray:
        """Effective Bloch matrix ``R^T M R`` (just ``M`` when untwisted)."""
        m = channel_matrix(self.channel)
        if self.twist is None:
            return m
        return self.twist.T @ m @ self.twist


@dataclass(frozen=True)
class ProtocolSpec:
    """Inputs of one correlated-state (or, for ``n == 1``, single-qubit) protocol run."""

    n: int
    r: float
    r0: np.ndarray
    c: np.ndarray
    channel: ChannelFamily
    spectators: tuple[Spectator, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError("need at least one qubit")
        if not 0.0 <= self.r <= 1.0:
            raise DomainError(f"purity must lie in [0, 1], got {self.r}")
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "r0", unit(self.r0, 1e-9))
        object.__setattr__(self, "c", unit(self.c, 1e-9))
        specs = tuple(
            s if isinstance(s, Spectator) else Spectator(s) for s in self.spectators
        )
        if len(specs) != self.n - 1:
            raise DomainError(
                f"{self.n} qubits need {self.n - 1} spectators, got {len(specs)}"
            )
        object.__setattr__(self, "spectators", specs)

    def with_lambda(self, lam: float) -> ProtocolSpec:
        return self.replace(channel=self.channel.with_lambda(lam))

    def replace(self, **changes) -> ProtocolSpec:
        fields = dict(
            n=self.n, r=self.r, r0=self.r0, c=self.c,
            channel=self.channel, spectators=self.spectators,
        )
        fields.update(changes)
        return ProtocolSpec(**fields)

    def spectator_matrices(self) -> list[np.ndarray]:
        return [s.bloch_matrix() for s in self.spectators]


def pauli_combination(a: ArrayLike) -> np.ndarray:
    """``a . sigma`` for a real 3-vector ``a``."""
    a = np.asarray(a, dtype=float).reshape(3)
    return np.tensordot(a, PAULIS, axes=1)


def bloch_vector(rho: np.ndarray | DensityOperator) -> np.ndarray:
    """Bloch vector of a single-qubit state."""
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    return np.real(np.einsum("kij,ji->k", PAULIS, m))


def initial_product_state(n: int, r: float, r0: ArrayLike) -> DensityOperator:
    """``((I + r r0.sigma)/2)`` tensored ``n`` times."""
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"purity must lie in [0, 1], got {r}")
    _check_capacity(n)
    single = 0.5 * (I2 + r * pauli_combination(unit(r0, 1e-9)))
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        out = np.kron(out, single)
    return DensityOperator(n, out)


def u_c(c: ArrayLike) -> np.ndarray:
    """Two-qubit correlating gate ``(II + I sc + sc I - sc sc)/2``."""
    s = pauli_combination(unit(c, 1e-9))
    return 0.5 * (np.kron(I2, I2) + np.kron(I2, s) + np.kron(s, I2) - np.kron(s, s))


def _apply_gate_left(mat: np.ndarray, gate: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Left-multiply ``mat`` (2^n x cols) by ``gate`` acting on 1-based ``qubits``."""
    k = len(qubits)
    cols = mat.shape[1]
    t = mat.reshape((2,) * n + (cols,))
    axes = [q - 1 for q in qubits]
    g = gate.reshape((2,) * (2 * k))
    t = np.tensordot(g, t, axes=(list(range(k, 2 * k)), axes))
    t = np.moveaxis(t, list(range(k)), axes)
    return t.reshape(2**n, cols)


def embed_two_qubit(gate: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    """Full ``2^n`` matrix of a two-qubit ``gate`` on qubits ``i``, ``j`` (1-based)."""
    return _apply_gate_left(np.eye(2**n, dtype=complex), gate, (i, j), n)


def u_prep(n: int, c: ArrayLike, pairs: Sequence[tuple[int, int]] | None = None) -> np.ndarray:
    """Symmetric pairwise preparation unitary: ``u_c`` on every pair of qubits.

    ``pairs`` restricts (and orders) the factors; by default all ``i < j``
    pairs are used in lexicographic order. The factors commute, so the order
    does not matter.
    """
    _check_capacity(n)
    gate = u_c(c)
    if pairs is None:
        pairs = itertools.combinations(range(1, n + 1), 2)
    out = np.eye(2**n, dtype=complex)
    for i, j in pairs:
        out = _apply_gate_left(out, gate, (i, j), n)
    return out


def _check_qubit(qubit: int, n: int) -> None:
    if not 1 <= qubit <= n:
        raise DomainError(f"qubit index {qubit} outside [1, {n}]")


def _local_pauli_map(
    mat: np.ndarray, m: np.ndarray, qubit: int, n: int, keep_identity: bool = True
) -> np.ndarray:
    """Replace the Pauli vector ``p`` of slot ``qubit`` by ``m p``.

    The slot's identity component is kept, or dropped when ``keep_identity``
    is false (the action of a channel derivative).
    """
    k = qubit - 1
    left, right = 2**k, 2 ** (n - k - 1)
    t = mat.reshape(left, 2, right, left, 2, right)
    # local 2x2 block A[a, b] of slot k, all other indices spectators
    blocks = np.moveaxis(t, (1, 4), (-2, -1))
    trace_part = blocks[..., 0, 0] + blocks[..., 1, 1]
    pauli = np.einsum("kba,...ab->...k", PAULIS, blocks)
    new_pauli = pauli @ np.asarray(m, dtype=float).T
    new_blocks = 0.5 * np.tensordot(new_pauli, PAULIS, axes=(-1, 0))
    if keep_identity:
        new_blocks = new_blocks + 0.5 * trace_part[..., None, None] * I2
    t = np.moveaxis(new_blocks, (-2, -1), (1, 4))
    return t.reshape(mat.shape)


def apply_local_unital_channel(
    rho: DensityOperator | np.ndarray, m: ArrayLike, qubit: int
) -> DensityOperator | np.ndarray:
    """Act with the unital channel of Bloch matrix ``m`` on ``qubit``.

    Accepts a :class:`DensityOperator` or a raw operator array (used for
    first-order terms and derivatives, which are traceless); the return type
    follows the input.
    """
    if isinstance(rho, DensityOperator):
        _check_qubit(qubit, rho.n)
        out = _local_pauli_map(rho.matrix, np.asarray(m, dtype=float), qubit, rho.n)
        return DensityOperator(rho.n, 0.5 * (out + out.conj().T))
    mat = np.asarray(rho, dtype=complex)
    n = int(round(np.log2(mat.shape[0])))
    _check_qubit(qubit, n)
    return _local_pauli_map(mat, np.asarray(m, dtype=float), qubit, n)


def apply_local_unitary(
    rho: DensityOperator | np.ndarray, u: ArrayLike, qubit: int
) -> DensityOperator | np.ndarray:
    """Conjugate ``qubit`` by the single-qubit unitary: ``rho -> U rho U^dagger``."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or np.abs(u.conj().T @ u - I2).max() > 1e-10:
        raise DomainError("expected a 2x2 unitary")
    mat = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    n = int(round(np.log2(mat.shape[0])))
    _check_qubit(qubit, n)
    out = _apply_gate_left(mat, u, (qubit,), n)
    out = _apply_gate_left(out.conj().T, u, (qubit,), n).conj().T
    if isinstance(rho, DensityOperator):
        return DensityOperator(n, 0.5 * (out + out.conj().T))
    return out


def outcome_labels(n: int) -> list[str]:
    """Sign strings in table order, e.g. ``['++', '+-', '-+', '--']``."""
    return ["".join(p) for p in itertools.product("+-", repeat=n)]


def outcome_probabilities(
    rho: DensityOperator | np.ndarray, directions: Sequence[ArrayLike]
) -> np.ndarray:
    """Probabilities of every sign string for per-qubit projective measurements.

    ``P(s_1..s_n) = Tr[rho prod_i (I + s_i d_i.sigma)/2]``. Values in
    ``[-1e-12, 0)`` are clamped to zero.
    """
    mat = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=complex)
    n = int(round(np.log2(mat.shape[0])))
    if len(directions) != n:
        raise DomainError(f"need {n} measurement directions, got {len(directions)}")
    out = mat
    for q, d in enumerate(directions, start=1):
        w = _measurement_basis(d)
        out = _apply_gate_left(out, w, (q,), n)
        out = _apply_gate_left(out.conj().T, w, (q,), n).conj().T
    probs = np.real(np.diag(out)).copy()
    probs[(probs < 0) & (probs > -1e-12)] = 0.0
    return probs


def _measurement_basis(d: ArrayLike) -> np.ndarray:
    """Rows ``<+d|`` and ``<-d|``, so that ``W rho W^dagger`` has the outcome weights on its diagonal."""
    w, v = np.linalg.eigh(pauli_combination(unit(d, 1e-9)))
    return np.stack([v[:, 1].conj(), v[:, 0].conj()])


def prepared_state(spec: ProtocolSpec) -> DensityOperator:
    """``U_prep rho0^n U_prep^dagger`` for the protocol's ``r``, ``r0``, ``c``."""
    rho = initial_product_state(spec.n, spec.r, spec.r0)
    if spec.n == 1:
        return rho
    u = u_prep(spec.n, spec.c)
    return DensityOperator(spec.n, u @ rho.matrix @ u.conj().T)


def final_state(
    spec: ProtocolSpec,
    m1: ArrayLike | None = None,
    twist_mode: str = "unitary",
) -> DensityOperator:
    """Prepared state after the probe channel on qubit 1 and spectator noise elsewhere.

    ``m1`` overrides the probe Bloch matrix; the overridden map need not be a
    physical channel (used to extract the affine dependence on its entries),
    in which case positivity is not guaranteed. Twisted spectators are
    realized by conjugating with the SU(2) representative of their rotation
    when ``twist_mode == "unitary"``, or by applying ``R^T M R`` directly
    when ``twist_mode == "matrix"``.
    """
    if twist_mode not in ("unitary", "matrix"):
        raise DomainError(f"unknown twist mode {twist_mode!r}")
    rho = prepared_state(spec)
    probe = channel_matrix(spec.channel) if m1 is None else np.asarray(m1, dtype=float)
    mat = _local_pauli_map(rho.matrix, probe, 1, spec.n)
    for j, sp in enumerate(spec.spectators, start=2):
        if sp.twist is None or twist_mode == "matrix":
            mat = _local_pauli_map(mat, sp.bloch_matrix(), j, spec.n)
            continue
        from .twist import su2_from_rotation

        u = su2_from_rotation(sp.twist)
        mat = apply_local_unitary(mat, u, j)
        mat = _local_pauli_map(mat, channel_matrix(sp.channel), j, spec.n)
        mat = apply_local_unitary(mat, u.conj().T, j)
    return DensityOperator(spec.n, 0.5 * (mat + mat.conj().T))
