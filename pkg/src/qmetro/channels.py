"""Bloch-sphere representation of unital qubit channels.

A unital qubit channel acts on Bloch vectors as ``r -> M r`` for a real 3x3
matrix ``M``. This module builds ``M(lambda)`` and ``dM/dlambda`` for the
supported channel families and provides the small dense decompositions used
everywhere else: ordered Gram spectra ``M^T M``, a sign-normalised 3x3 SVD and
the real diagonal decomposition of symmetric matrices.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import CubicSpline

from .errors import DomainError

__all__ = [
    "X_AXIS",
    "Y_AXIS",
    "Z_AXIS",
    "unit",
    "ChannelKind",
    "ChannelFamily",
    "SpectralTriple",
    "channel_matrix",
    "channel_matrix_derivative",
    "gram_spectrum",
    "svd3",
    "real_diagonal_decomposition",
    "rotation_matrix",
    "is_contractive",
    "parse_channel_spec",
    "channel_spec_to_json",
]

X_AXIS = np.array([1.0, 0.0, 0.0])
Y_AXIS = np.array([0.0, 1.0, 0.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])

_UNIT_TOL = 1e-12
_SIGN_TOL = 1e-12
_TIE_TOL = 1e-12


def unit(v: ArrayLike, tol: float = _UNIT_TOL) -> np.ndarray:
    """Validate that ``v`` is a unit 3-vector and return it as a float array."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise DomainError(f"direction must have 3 components, got {v.shape[0]}")
    if abs(float(v @ v) - 1.0) > tol:
        raise DomainError(f"direction {v.tolist()} is not unit length")
    return v


def _normalize(v: ArrayLike) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DomainError("zero vector has no direction")
    return v / norm


def _leading_negative(v: np.ndarray) -> bool:
    for comp in v:
        if abs(comp) > _SIGN_TOL:
            return bool(comp < 0)
    return False


def _fix_sign(v: np.ndarray) -> np.ndarray:
    return -v if _leading_negative(v) else v


def _cross_matrix(n: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]]
    )


def rotation_matrix(axis: ArrayLike, angle: float) -> np.ndarray:
    """Proper rotation by ``angle`` about ``axis`` (right-hand rule)."""
    n = _normalize(axis)
    k = _cross_matrix(n)
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def is_contractive(m: ArrayLike, tol: float = 1e-9) -> bool:
    """True when all singular values of ``m`` are at most ``1 + tol``."""
    s = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    return bool(s.max() <= 1.0 + tol)


class ChannelKind(str, enum.Enum):
    PHASE_SHIFT = "phase_shift"
    FLIP = "flip"
    DEPOLARIZING = "depolarizing"
    IDENTITY = "identity"
    CUSTOM_UNITARY = "unitary"
    CUSTOM_TABLE = "custom_table"


@dataclass(frozen=True)
class ChannelFamily:
    """A one-parameter family of unital qubit channels evaluated at ``lam``.

    ``axis`` is the flip axis for ``FLIP`` and the rotation axis for
    ``CUSTOM_UNITARY``. ``table`` holds ``(lambda, 3x3 matrix)`` samples for
    ``CUSTOM_TABLE``; values in between are obtained by cubic-spline
    interpolation of each matrix entry.
    """

    kind: ChannelKind
    lam: float = 0.0
    axis: tuple[float, float, float] | None = None
    table: tuple[tuple[float, tuple[float, ...]], ...] | None = field(
        default=None, repr=False
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        object.__setattr__(self, "lam", float(self.lam))
        if not math.isfinite(self.lam):
            raise DomainError("lambda must be finite")
        if self.kind in (ChannelKind.FLIP, ChannelKind.CUSTOM_UNITARY):
            axis = Z_AXIS if self.axis is None else self.axis
            object.__setattr__(self, "axis", tuple(float(x) for x in unit(axis, 1e-9)))
        elif self.axis is not None:
            raise DomainError(f"{self.kind.value} channel takes no axis")
        if self.kind in (ChannelKind.FLIP, ChannelKind.DEPOLARIZING):
            if not 0.0 <= self.lam <= 1.0:
                raise DomainError(
                    f"{self.kind.value} parameter must lie in [0, 1], got {self.lam}"
                )
        if self.kind is ChannelKind.CUSTOM_TABLE:
            self._check_table()
        elif self.table is not None:
            raise DomainError(f"{self.kind.value} channel takes no table")

    def _check_table(self) -> None:
        if not self.table or len(self.table) < 2:
            raise DomainError("custom table needs at least two samples")
        rows = tuple(
            (float(lam), tuple(float(x) for x in np.asarray(m, dtype=float).reshape(9)))
            for lam, m in self.table
        )
        object.__setattr__(self, "table", rows)
        lams = np.array([row[0] for row in rows])
        if np.any(np.diff(lams) <= 0):
            raise DomainError("custom table lambdas must be strictly increasing")
        if not lams[0] <= self.lam <= lams[-1]:
            raise DomainError(
                f"lambda {self.lam} outside tabulated range [{lams[0]}, {lams[-1]}]"
            )

    # constructors -----------------------------------------------------------------

    @classmethod
    def phase_shift(cls, lam: float) -> ChannelFamily:
        return cls(ChannelKind.PHASE_SHIFT, lam)

    @classmethod
    def flip(cls, lam: float, axis: ArrayLike = Z_AXIS) -> ChannelFamily:
        return cls(ChannelKind.FLIP, lam, tuple(np.asarray(axis, dtype=float)))

    @classmethod
    def depolarizing(cls, lam: float) -> ChannelFamily:
        return cls(ChannelKind.DEPOLARIZING, lam)

    @classmethod
    def identity(cls) -> ChannelFamily:
        return cls(ChannelKind.IDENTITY, 0.0)

    @classmethod
    def unitary(cls, lam: float, axis: ArrayLike = Z_AXIS) -> ChannelFamily:
        return cls(ChannelKind.CUSTOM_UNITARY, lam, tuple(np.asarray(axis, dtype=float)))

    @classmethod
    def custom_table(
        cls, lam: float, lambdas: Sequence[float], matrices: Sequence[ArrayLike]
    ) -> ChannelFamily:
        if len(lambdas) != len(matrices):
            raise DomainError("custom table needs one matrix per lambda")
        rows = tuple(
            (float(l), tuple(np.asarray(m, dtype=float).reshape(9)))
            for l, m in zip(lambdas, matrices)
        )
        return cls(ChannelKind.CUSTOM_TABLE, lam, table=rows)

    def with_lambda(self, lam: float) -> ChannelFamily:
        return ChannelFamily(self.kind, lam, self.axis, self.table)

    @property
    def domain(self) -> tuple[float, float]:
        """Closed interval of admissible parameter values."""
        if self.kind in (ChannelKind.FLIP, ChannelKind.DEPOLARIZING):
            return (0.0, 1.0)
        if self.kind is ChannelKind.CUSTOM_TABLE:
            return (self.table[0][0], self.table[-1][0])
        return (-math.inf, math.inf)

    @cached_property
    def _spline(self) -> CubicSpline:
        lams = np.array([row[0] for row in self.table])
        vals = np.array([row[1] for row in self.table])
        return CubicSpline(lams, vals, axis=0)

    def _table_matrix(self, lam: float) -> np.ndarray:
        for knot, entries in self.table:
            if knot == lam:
                return np.array(entries).reshape(3, 3)
        return np.asarray(self._spline(lam)).reshape(3, 3)


def channel_matrix(family: ChannelFamily) -> np.ndarray:
    """Bloch-sphere matrix ``M(lambda)`` of ``family``."""
    lam = family.lam
    kind = family.kind
    if kind is ChannelKind.PHASE_SHIFT:
        c, s = math.cos(lam), math.sin(lam)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    if kind is ChannelKind.FLIP:
        n = np.array(family.axis)
        return (1.0 - 2.0 * lam) * np.eye(3) + 2.0 * lam * np.outer(n, n)
    if kind is ChannelKind.DEPOLARIZING:
        return (1.0 - lam) * np.eye(3)
    if kind is ChannelKind.IDENTITY:
        return np.eye(3)
    if kind is ChannelKind.CUSTOM_UNITARY:
        return rotation_matrix(family.axis, lam)
    return family._table_matrix(lam)


def channel_matrix_derivative(family: ChannelFamily) -> np.ndarray:
    """``dM/dlambda``: analytic for built-in kinds, central difference for tables."""
    lam = family.lam
    kind = family.kind
    if kind is ChannelKind.PHASE_SHIFT:
        c, s = math.cos(lam), math.sin(lam)
        return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])
    if kind is ChannelKind.FLIP:
        n = np.array(family.axis)
        return -2.0 * np.eye(3) + 2.0 * np.outer(n, n)
    if kind is ChannelKind.DEPOLARIZING:
        return -np.eye(3)
    if kind is ChannelKind.IDENTITY:
        return np.zeros((3, 3))
    if kind is ChannelKind.CUSTOM_UNITARY:
        return _cross_matrix(np.array(family.axis)) @ rotation_matrix(family.axis, lam)
    h = max(1e-6, 1e-6 * abs(lam))
    lo, hi = family.domain
    if lam - h < lo or lam + h > hi:
        raise DomainError(
            f"lambda {lam} too close to the table boundary for a central difference"
        )
    plus = family._table_matrix(lam + h)
    minus = family._table_matrix(lam - h)
    return (plus - minus) / (2.0 * h)


@dataclass(frozen=True)
class SpectralTriple:
    """Ordered eigen-decomposition of a 3x3 Gram matrix.

    ``values`` are descending and non-negative; ``vectors[:, i]`` is the unit
    eigenvector for ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def first(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def second(self) -> np.ndarray:
        return self.vectors[:, 1]

    @property
    def third(self) -> np.ndarray:
        return self.vectors[:, 2]

    def matrix(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T

    def is_isotropic(self, tol: float = 1e-12) -> bool:
        return bool(self.values[0] - self.values[2] <= tol * max(1.0, self.values[0]))


def _descending_order(w: np.ndarray, key=None) -> list[int]:
    key = w if key is None else key
    scale = max(1.0, float(np.max(np.abs(key))))

    def cmp(i: int, j: int) -> int:
        if abs(key[i] - key[j]) <= _TIE_TOL * scale:
            return i - j
        return -1 if key[i] > key[j] else 1

    return sorted(range(len(w)), key=functools.cmp_to_key(cmp))


def gram_spectrum(m: ArrayLike) -> SpectralTriple:
    """Ordered spectrum of ``M^T M``.

    Ties keep the eigensolver's order; each eigenvector is signed so that its
    first component larger than 1e-12 in magnitude is positive.
    """
    m = np.asarray(m, dtype=float)
    gram = m.T @ m
    gram = 0.5 * (gram + gram.T)
    w, v = np.linalg.eigh(gram)
    order = _descending_order(w)
    values = np.clip(w[order], 0.0, None)
    vectors = np.column_stack([_fix_sign(v[:, i]) for i in order])
    return SpectralTriple(values, vectors)


def svd3(m: ArrayLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``M = A @ diag(S) @ B`` with orthogonal ``A``, ``B`` and descending ``S``.

    Rows of ``B`` follow the same sign convention as :func:`gram_spectrum`;
    columns of ``A`` are flipped to match.
    """
    m = np.asarray(m, dtype=float)
    a, s, b = np.linalg.svd(m)
    for i in range(3):
        if _leading_negative(b[i]):
            b[i] = -b[i]
            a[:, i] = -a[:, i]
    return a, s, b


def real_diagonal_decomposition(
    m: ArrayLike, tol: float = 1e-9
) -> tuple[np.ndarray, np.ndarray] | None:
    """Return ``(values, vectors)`` with ``M = sum_i values[i] e_i e_i^T``, or None.

    The decomposition exists exactly when ``M`` is symmetric; ``tol`` is the
    relative Frobenius tolerance on ``M - M^T``. Values are ordered by
    decreasing magnitude, vectors are the columns of the second array.
    """
    m = np.asarray(m, dtype=float)
    asym = np.linalg.norm(m - m.T)
    if asym > tol * np.linalg.norm(m):
        return None
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    order = _descending_order(w, key=np.abs(w))
    vectors = np.column_stack([_fix_sign(v[:, i]) for i in order])
    return w[order], vectors


# JSON channel specs --------------------------------------------------------------


def parse_channel_spec(obj: dict[str, Any]) -> ChannelFamily:
    """Build a :class:`ChannelFamily` from its JSON object form."""
    if not isinstance(obj, dict):
        raise DomainError("channel spec must be a JSON object")
    try:
        kind = ChannelKind(obj["kind"])
    except (KeyError, ValueError) as exc:
        raise DomainError(f"unknown or missing channel kind: {obj.get('kind')!r}") from exc
    lam = float(obj.get("lambda", 0.0))
    axis = obj.get("axis")
    if kind is ChannelKind.CUSTOM_TABLE:
        table = obj.get("table")
        if not table:
            raise DomainError("custom_table channel needs a 'table'")
        lams, mats = [], []
        for row in table:
            if len(row) != 2 or len(row[1]) != 9:
                raise DomainError("table rows must be [lambda, [9 row-major entries]]")
            lams.append(float(row[0]))
            mats.append(np.asarray(row[1], dtype=float).reshape(3, 3))
        return ChannelFamily.custom_table(lam, lams, mats)
    if axis is not None:
        axis = tuple(float(x) for x in axis)
    return ChannelFamily(kind, lam, axis)


def channel_spec_to_json(family: ChannelFamily) -> dict[str, Any]:
    obj: dict[str, Any] = {"kind": family.kind.value, "lambda": family.lam}
    if family.axis is not None:
        obj["axis"] = list(family.axis)
    if family.table is not None:
        obj["table"] = [[lam, list(entries)] for lam, entries in family.table]
    return obj
