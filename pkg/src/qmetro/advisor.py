"""Protocol advisor: choose between the single-qubit and correlated protocols.

``advise`` runs the full decision procedure for one configuration; ``sweep``
and ``validate`` batch it and the dense-simulation oracles into tables.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .channels import (
    ChannelFamily,
    channel_matrix,
    channel_matrix_derivative,
    channel_spec_to_json,
    gram_spectrum,
    real_diagonal_decomposition,
)
from .errors import (
    CapacityError,
    DegenerateSpectatorError,
    DomainError,
    IllConditionedError,
    NoClosedFormError,
    QmetroError,
    SeriesValidityWarning,
)
from .measurement import (
    MeasurementKind,
    MeasurementScheme,
    fisher_generic,
    fisher_numeric,
    fisher_tailored,
    optimal_tailored_direction,
    simulated_probabilities,
)
from .qfi import (
    QfiBounds,
    convergence_order,
    cs_qfi_bounds,
    cs_qfi_closed_form,
    protocol_qfi_exact,
    qfi_series_order2,
    series_valid,
    spectator_spectra,
)
from .states import ProtocolSpec, Spectator, max_qubits
from .twist import TwistPlan, apply_twists, frame_is_lambda_dependent, plan_twists

__all__ = [
    "SCHEMA_VERSION",
    "Recommendation",
    "ProtocolReport",
    "AdviceRequest",
    "advise",
    "build_protocol",
    "sweep",
    "sweep_to_csv",
    "validate",
    "ValidationTable",
    "SWEEP_COLUMNS",
    "VALIDATE_COLUMNS",
    "rows_to_csv",
    "format_float",
]

SCHEMA_VERSION = "v1"
_DEGENERATE_PROBE = "degenerate probe: the channel carries no parameter information"


class Recommendation(str, enum.Enum):
    SQSC = "SQSC"
    CS = "CS"


def format_float(x: float | None) -> str:
    if x is None:
        return ""
    return "%.17g" % x


def _vec(v: np.ndarray | None) -> list[float] | None:
    return None if v is None else [float(x) for x in np.asarray(v).reshape(-1)]


def _mat(m: np.ndarray) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.asarray(m)]


@dataclass(frozen=True)
class ProtocolReport:
    n: int
    r: float
    sigma_product: float
    recommendation: Recommendation
    twist_plan: TwistPlan | None
    chosen_r0: np.ndarray
    chosen_c: np.ndarray
    measurement: MeasurementScheme
    h_s_opt: float
    h_corr_closed: float
    f_predicted: float | None
    bounds: QfiBounds
    validity_flag: bool
    local_lambda0: float | None = None
    f_source: str | None = "closed_form"
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        plan = None
        if self.twist_plan is not None:
            plan = {
                "rotations": [_mat(r) for r in self.twist_plan.rotations],
                "su2_reps": [
                    [[[float(z.real), float(z.imag)] for z in row] for row in u]
                    for u in self.twist_plan.su2_reps
                ],
                "local_lambda0": self.twist_plan.local_lambda0,
            }
        b = self.bounds
        return {
            "schema": SCHEMA_VERSION,
            "n": self.n,
            "r": self.r,
            "sigma_product": self.sigma_product,
            "recommendation": self.recommendation.value,
            "twist_plan": plan,
            "chosen_r0": _vec(self.chosen_r0),
            "chosen_c": _vec(self.chosen_c),
            "measurement": {"kind": self.measurement.kind.value, "m": _vec(self.measurement.m)},
            "h_s_opt": self.h_s_opt,
            "h_corr_closed": self.h_corr_closed,
            "f_predicted": self.f_predicted,
            "f_source": self.f_source,
            "bounds": {
                "upper": b.upper,
                "lower": b.lower,
                "clean_lower": b.clean_lower,
                "twisted_lower": b.twisted_lower,
                "sigma_product": b.sigma_product,
                "upsilon_product": b.upsilon_product,
                "degenerate_spectator": b.degenerate_spectator,
                "series_valid": b.series_valid,
            },
            "validity_flag": self.validity_flag,
            "local_lambda0": self.local_lambda0,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> ProtocolReport:
        if obj.get("schema") != SCHEMA_VERSION:
            raise DomainError(f"unsupported report schema {obj.get('schema')!r}")
        plan = None
        if obj["twist_plan"] is not None:
            p = obj["twist_plan"]
            plan = TwistPlan(
                tuple(np.array(r, dtype=float) for r in p["rotations"]),
                tuple(
                    np.array([[complex(re, im) for re, im in row] for row in u])
                    for u in p["su2_reps"]
                ),
                p["local_lambda0"],
            )
        meas = obj["measurement"]
        b = obj["bounds"]
        return cls(
            n=int(obj["n"]),
            r=float(obj["r"]),
            sigma_product=float(obj["sigma_product"]),
            recommendation=Recommendation(obj["recommendation"]),
            twist_plan=plan,
            chosen_r0=np.array(obj["chosen_r0"], dtype=float),
            chosen_c=np.array(obj["chosen_c"], dtype=float),
            measurement=MeasurementScheme(
                meas["kind"], None if meas["m"] is None else np.array(meas["m"], dtype=float)
            ),
            h_s_opt=float(obj["h_s_opt"]),
            h_corr_closed=float(obj["h_corr_closed"]),
            f_predicted=obj["f_predicted"],
            bounds=QfiBounds(**b),
            validity_flag=bool(obj["validity_flag"]),
            local_lambda0=obj["local_lambda0"],
            f_source=obj["f_source"],
            notes=tuple(obj["notes"]),
        )

    @classmethod
    def from_json(cls, text: str) -> ProtocolReport:
        return cls.from_dict(json.loads(text))

    def scalar_row(self) -> dict[str, Any]:
        """Flat scalar view used for sweep tables."""
        b = self.bounds
        return {
            "n": self.n,
            "r": self.r,
            "recommendation": self.recommendation.value,
            "sigma_product": self.sigma_product,
            "h_s_opt": self.h_s_opt,
            "h_corr_closed": self.h_corr_closed,
            "f_predicted": self.f_predicted,
            "f_source": self.f_source,
            "upper": b.upper,
            "lower": b.lower,
            "clean_lower": b.clean_lower,
            "twisted_lower": b.twisted_lower,
            "measurement": self.measurement.kind.value,
            "validity_flag": self.validity_flag,
            "local_lambda0": self.local_lambda0,
        }


@dataclass(frozen=True)
class AdviceRequest:
    channel: ChannelFamily
    spectators: tuple[ChannelFamily, ...]
    n: int
    r: float
    lambda0: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "spectators", tuple(self.spectators))
        if len(self.spectators) != self.n - 1:
            raise DomainError(
                f"{self.n} qubits need {self.n - 1} spectators, got {len(self.spectators)}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "channel": channel_spec_to_json(self.channel),
            "spectators": [channel_spec_to_json(s) for s in self.spectators],
            "n": self.n,
            "r": self.r,
            "lambda0": self.lambda0,
        }


def _frame(request: AdviceRequest):
    lam0 = request.lambda0
    fam = request.channel if lam0 is None else request.channel.with_lambda(lam0)
    return gram_spectrum(channel_matrix_derivative(fam))


def build_protocol(request: AdviceRequest) -> tuple[ProtocolSpec, TwistPlan | None]:
    """Correlated protocol with ``r0 = b``, ``c = a`` and spectators twisted into the probe frame.

    The twist is skipped when some spectator channel annihilates every Bloch
    vector, since no rotation can help and the twisted bound is undefined.
    """
    frame = _frame(request)
    spec = ProtocolSpec(
        request.n, request.r, frame.second, frame.first, request.channel, request.spectators
    )
    if any(gram_spectrum(channel_matrix(s)).values[0] <= 0.0 for s in request.spectators):
        return spec, None
    plan = plan_twists(spec, request.lambda0)
    return apply_twists(spec, plan), plan


def _simulated_fisher(spec: ProtocolSpec, scheme: MeasurementScheme) -> float | None:
    if spec.n > max_qubits():
        return None
    fam = spec.channel
    lo, hi = fam.domain
    h = 1e-4 * max(1.0, abs(fam.lam))
    if not lo + h <= fam.lam <= hi - h:
        return None
    try:
        return fisher_numeric(
            lambda lam: simulated_probabilities(spec.with_lambda(lam), scheme), fam.lam, h
        )
    except IllConditionedError:
        return None


def _sqsc_measurement(mdot: np.ndarray, a: np.ndarray, r: float) -> tuple[MeasurementScheme, float]:
    """Single-qubit readout: along ``a`` when ``Mdot`` is symmetric, else along ``Mdot a``."""
    if real_diagonal_decomposition(mdot, 1e-9) is not None:
        return MeasurementScheme.generic(), r * r * float(a @ mdot @ a) ** 2
    v = mdot @ a
    m = v / np.linalg.norm(v)
    return MeasurementScheme.tailored(m), r * r * float(m @ mdot @ a) ** 2


def advise(
    channel: ChannelFamily,
    spectators: Sequence[ChannelFamily],
    n: int,
    r: float,
    lambda0: float | None = None,
) -> ProtocolReport:
    """Recommend a protocol, its preparation, twists and measurement, with all predictions."""
    request = AdviceRequest(channel, tuple(spectators), n, r, lambda0)
    notes: list[str] = []
    validity = not series_valid(n, r)
    if validity:
        msg = f"n r^2 = {n * r * r:.3g} > 0.1: lowest-order predictions are unreliable"
        warnings.warn(msg, SeriesValidityWarning, stacklevel=2)
        notes.append(msg)

    frame = _frame(request)
    alpha = float(frame.values[0])
    h_sopt = r * r * alpha
    sigma = float(np.prod([gram_spectrum(channel_matrix(s)).values[0] for s in spectators]))
    mdot = channel_matrix_derivative(channel)

    spec, plan = build_protocol(request)
    if plan is None and n > 1:
        notes.append("degenerate spectator: twist and closed-form F unavailable")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SeriesValidityWarning)
        h_corr = cs_qfi_closed_form(spec)
    bounds = cs_qfi_bounds(
        frame, spectator_spectra(spec), n, r, twisted=plan is not None, overlap=0.0
    )
    local = None
    if lambda0 is not None and frame_is_lambda_dependent(spec.with_lambda(lambda0)):
        local = float(lambda0)

    if alpha <= 0.0:
        notes.append(_DEGENERATE_PROBE)
        warnings.warn(_DEGENERATE_PROBE, RuntimeWarning, stacklevel=2)
        return ProtocolReport(
            n, r, sigma, Recommendation.SQSC, None, frame.first.copy(), frame.first.copy(),
            MeasurementScheme.generic(), 0.0, h_corr, 0.0, bounds, validity, local,
            "closed_form", tuple(notes),
        )

    if n * sigma <= 1.0:
        a = frame.first.copy()
        scheme, f = _sqsc_measurement(mdot, a, r)
        return ProtocolReport(
            n, r, sigma, Recommendation.SQSC, None, a, a.copy(), scheme, h_sopt, h_corr,
            f, bounds, validity, local, "closed_form", tuple(notes),
        )

    if real_diagonal_decomposition(mdot, 1e-9) is not None:
        scheme = MeasurementScheme.generic()
    else:
        scheme = MeasurementScheme.tailored(optimal_tailored_direction(spec))
    f_source: str | None = "closed_form"
    f: float | None
    try:
        if plan is None:
            raise DegenerateSpectatorError("spectator annihilates the Bloch sphere")
        if scheme.kind is MeasurementKind.GENERIC:
            f = fisher_generic(spec)
        else:
            f = fisher_tailored(spec, scheme.m)
    except (NoClosedFormError, DegenerateSpectatorError) as exc:
        notes.append(f"closed-form F unavailable ({exc}); simulated value reported")
        f = _simulated_fisher(spec, scheme)
        f_source = None if f is None else "simulation"
    return ProtocolReport(
        n, r, sigma, Recommendation.CS, plan, spec.r0.copy(), spec.c.copy(), scheme,
        h_sopt, h_corr, f, bounds, validity, local, f_source, tuple(notes),
    )


# sweeps ----------------------------------------------------------------------------

SWEEP_AXES = ("n", "r", "noise")


def _sweep_request(base: AdviceRequest, axis: str, value: float) -> AdviceRequest:
    if axis == "r":
        return replace(base, r=float(value))
    if axis == "noise":
        return replace(base, spectators=tuple(s.with_lambda(float(value)) for s in base.spectators))
    n = int(value)
    if n != value or n < 1:
        raise DomainError(f"qubit count must be a positive integer, got {value}")
    template = base.spectators[0] if base.spectators else ChannelFamily.identity()
    return replace(base, n=n, spectators=(template,) * (n - 1))


def _sweep_row(args: tuple[AdviceRequest, str, float]) -> dict[str, Any]:
    base, axis, value = args
    row: dict[str, Any] = {"axis": axis, "value": value}
    try:
        req = _sweep_request(base, axis, value)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = advise(req.channel, req.spectators, req.n, req.r, req.lambda0)
        row.update(report.scalar_row())
        row["error"] = None
    except (QmetroError, ArithmeticError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


SWEEP_COLUMNS = (
    "axis", "value", "n", "r", "recommendation", "sigma_product", "h_s_opt",
    "h_corr_closed", "f_predicted", "f_source", "upper", "lower", "clean_lower",
    "twisted_lower", "measurement", "validity_flag", "local_lambda0", "error",
)


def sweep(base: AdviceRequest, axis: str, values: Sequence[float]) -> list[dict[str, Any]]:
    """One advisor row per value, in input order; row errors are recorded, not raised.

    ``axis="n"`` replicates the first spectator (identity when there is
    none), ``"r"`` varies the purity and ``"noise"`` sets every spectator's
    parameter.
    """
    if axis not in SWEEP_AXES:
        raise DomainError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if len(values) == 0:
        raise DomainError("sweep needs at least one value")
    if axis == "noise" and not base.spectators:
        raise DomainError("noise sweep needs at least one spectator")
    with ThreadPoolExecutor() as pool:
        rows = list(pool.map(_sweep_row, [(base, axis, v) for v in values]))
    return [{col: row.get(col) for col in SWEEP_COLUMNS} for row in rows]


def _cell(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format_float(x)
    return str(x)


def rows_to_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str] | None = None) -> str:
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(col)) for col in columns])
    return buf.getvalue()


def sweep_to_csv(rows: Sequence[dict[str, Any]]) -> str:
    return rows_to_csv(rows, SWEEP_COLUMNS)


# validation ------------------------------------------------------------------------

VALIDATE_COLUMNS = (
    "r", "h_exact", "h_series", "h_ratio", "f_numeric", "f_closed", "f_ratio",
)


def _default_scheme(spec: ProtocolSpec) -> MeasurementScheme:
    mdot = channel_matrix_derivative(spec.channel)
    if real_diagonal_decomposition(mdot, 1e-9) is not None:
        return MeasurementScheme.generic()
    return MeasurementScheme.tailored(optimal_tailored_direction(spec))


def _closed_fisher(spec: ProtocolSpec, scheme: MeasurementScheme) -> float | None:
    try:
        if scheme.kind is MeasurementKind.GENERIC:
            return fisher_generic(spec)
        return fisher_tailored(spec, scheme.m)
    except QmetroError:
        return None


def _validate_row(args: tuple[ProtocolSpec, float, MeasurementScheme | None, float]) -> dict[str, Any]:
    base, r, scheme, h2 = args
    spec = base.replace(r=r)
    exact = protocol_qfi_exact(spec)
    series = r * r * h2
    row: dict[str, Any] = {
        "r": r,
        "h_exact": exact,
        "h_series": series,
        "h_ratio": exact / series if series > 0 else None,
        "f_numeric": None,
        "f_closed": None,
        "f_ratio": None,
    }
    if scheme is not None:
        f_num = _simulated_fisher(spec, scheme)
        f_cl = _closed_fisher(spec, scheme)
        row["f_numeric"], row["f_closed"] = f_num, f_cl
        if f_num is not None and f_cl:
            row["f_ratio"] = f_num / f_cl
    return row


@dataclass(frozen=True)
class ValidationTable:
    rows: tuple[dict[str, Any], ...]
    qfi_order: float | None
    fisher_order: float | None
    scheme: MeasurementScheme | None = field(default=None)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "rows": list(self.rows),
            "qfi_order": _finite_or_str(self.qfi_order),
            "fisher_order": _finite_or_str(self.fisher_order),
            "measurement": None if self.scheme is None else self.scheme.kind.value,
        }


def _finite_or_str(x: float | None) -> float | str | None:
    if x is None or math.isfinite(x):
        return x
    return "inf"


def _fit_order(rows: Sequence[dict[str, Any]], key: str) -> float | None:
    pts = [(row["r"], row[key]) for row in rows if row["r"] > 0 and row[key] is not None]
    if len(pts) < 2:
        return None
    r_vals, ratios = zip(*pts)
    return convergence_order(r_vals, ratios)


def validate(spec: ProtocolSpec, r_values: Sequence[float]) -> ValidationTable:
    """Exact oracle against lowest-order predictions over a list of purities.

    Each row holds the exact SLD QFI, ``r^2 H^(2)``, their ratio, and the
    simulated Fisher information of the default measurement against its
    closed form. The fitted orders describe how fast the ratios approach 1.
    """
    if spec.n > max_qubits():
        raise CapacityError(f"{spec.n} qubits exceeds the dense-simulation cap")
    if len(r_values) == 0:
        raise DomainError("validation needs at least one r value")
    h2 = qfi_series_order2(spec)
    scheme = None
    if abs(float(spec.r0 @ spec.c)) <= 1e-9:
        try:
            scheme = _default_scheme(spec)
        except DomainError:
            scheme = None
    with ThreadPoolExecutor() as pool:
        rows = tuple(pool.map(_validate_row, [(spec, float(r), scheme, h2) for r in r_values]))
    return ValidationTable(rows, _fit_order(rows, "h_ratio"), _fit_order(rows, "f_ratio"), scheme)
