import csv
import io
import json
import math
import warnings

import numpy as np
import pytest

from qmetro.advisor import (
    SWEEP_COLUMNS,
    AdviceRequest,
    ProtocolReport,
    Recommendation,
    advise,
    build_protocol,
    sweep,
    sweep_to_csv,
    validate,
)
from qmetro.channels import X_AXIS, Y_AXIS, ChannelFamily, channel_matrix_derivative, gram_spectrum
from qmetro.errors import DomainError, SeriesValidityWarning
from qmetro.measurement import MeasurementKind
from qmetro.states import ProtocolSpec

from conftest import random_probe, random_unital_channel
from test_qfi import moving_frame_family

CLEAN = ChannelFamily.identity()


def test_flip_with_flip_spectators():
    lams = [0.1, 0.2, 0.3]
    rep = advise(ChannelFamily.flip(0.3), [ChannelFamily.flip(l) for l in lams], 4, 0.1)
    assert rep.recommendation is Recommendation.CS
    assert rep.measurement.kind is MeasurementKind.GENERIC
    taus = sum((1 - 2 * l) ** 2 for l in lams)
    assert rep.f_predicted == pytest.approx(0.04 * (1 + taus), rel=1e-12)
    assert rep.f_source == "closed_form"
    assert rep.twist_plan is not None and len(rep.twist_plan.rotations) == 3


def test_heavy_depolarizing_spectators_favor_single_qubit():
    eps = 0.5
    n = 3
    assert n * (1 - eps) ** 4 < 1
    rep = advise(ChannelFamily.phase_shift(0.4), [ChannelFamily.depolarizing(eps)] * 2, n, 0.1)
    assert rep.recommendation is Recommendation.SQSC
    assert rep.h_s_opt == pytest.approx(0.01)
    assert rep.f_predicted == pytest.approx(0.01)


def test_identity_probe_is_degenerate():
    with pytest.warns(RuntimeWarning, match="degenerate probe"):
        rep = advise(CLEAN, [CLEAN], 2, 0.1)
    assert rep.recommendation is Recommendation.SQSC
    assert rep.h_s_opt == 0.0 and rep.f_predicted == 0.0


def test_gate_tie_goes_to_single_qubit():
    spectators = [ChannelFamily.depolarizing(0.5), CLEAN, CLEAN]
    rep = advise(ChannelFamily.flip(0.3), spectators, 4, 0.1)
    assert rep.sigma_product * 4 == 1.0
    assert rep.recommendation is Recommendation.SQSC


def test_non_symmetric_derivative_uses_tailored_measurement():
    n = 3
    lam = 0.7
    rep = advise(ChannelFamily.phase_shift(lam), [CLEAN] * (n - 1), n, 0.1)
    assert rep.recommendation is Recommendation.CS
    assert rep.measurement.kind is MeasurementKind.TAILORED
    mdot = channel_matrix_derivative(ChannelFamily.phase_shift(lam))
    assert (rep.measurement.m @ mdot @ rep.chosen_c) ** 2 == pytest.approx(1.0)
    assert rep.f_predicted == pytest.approx((n - 1) * 0.01, rel=1e-12)
    # tailored readout does not reach the correlated lower bound
    assert rep.f_predicted < rep.bounds.twisted_lower


def test_degenerate_spectator_report():
    rep = advise(ChannelFamily.flip(0.3), [ChannelFamily.depolarizing(1.0), ChannelFamily.flip(0.1)], 3, 0.1)
    assert rep.twist_plan is None
    assert rep.bounds.twisted_lower is None
    # a vanishing spectator makes Sigma = 0, so the gate always closes
    assert rep.sigma_product == 0.0
    assert rep.recommendation is Recommendation.SQSC
    assert any("degenerate spectator" in note for note in rep.notes)


def test_non_diagonal_spectators_fall_back_to_simulation():
    rep = advise(ChannelFamily.flip(0.3), [ChannelFamily.unitary(0.5, [0.6, 0.8, 0.0])], 2, 0.1)
    assert rep.recommendation is Recommendation.CS
    assert rep.f_source == "simulation"
    assert 0 < rep.f_predicted <= rep.h_corr_closed * (1 + 0.05)


def test_validity_flag():
    with pytest.warns(SeriesValidityWarning):
        rep = advise(ChannelFamily.flip(0.3), [CLEAN] * 3, 4, 0.2)
    assert rep.validity_flag
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not advise(ChannelFamily.flip(0.3), [CLEAN] * 3, 4, 0.1).validity_flag


def test_spectator_count_checked():
    with pytest.raises(DomainError):
        advise(ChannelFamily.flip(0.3), [CLEAN], 3, 0.1)


def test_local_protocol_records_reference_point():
    rep = advise(moving_frame_family(0.45), [ChannelFamily.flip(0.2)], 2, 0.1, lambda0=0.4)
    assert rep.local_lambda0 == 0.4
    assert advise(ChannelFamily.flip(0.3), [ChannelFamily.flip(0.2)], 2, 0.1, lambda0=0.4).local_lambda0 is None


def _random_request(rng):
    n = int(rng.integers(2, 5))
    probe = random_probe(rng)
    return probe, [random_unital_channel(rng) for _ in range(n - 1)], n


def test_report_invariants(rng):
    for _ in range(40):
        probe, spectators, n = _random_request(rng)
        rep = advise(probe, spectators, n, 0.05)
        if n * rep.sigma_product <= 1:
            assert rep.recommendation is Recommendation.SQSC
        if rep.recommendation is Recommendation.CS:
            if rep.f_predicted is not None and rep.f_source == "closed_form":
                assert rep.f_predicted <= rep.h_corr_closed + 1e-10
            if rep.bounds.twisted_lower is not None:
                assert rep.h_corr_closed >= rep.bounds.twisted_lower - 1e-10
            assert rep.h_corr_closed <= rep.bounds.upper + 1e-10


def test_advise_is_deterministic(rng):
    for _ in range(5):
        probe, spectators, n = _random_request(rng)
        assert advise(probe, spectators, n, 0.05).to_json() == advise(probe, spectators, n, 0.05).to_json()


def test_report_json_round_trip(rng):
    for _ in range(10):
        probe, spectators, n = _random_request(rng)
        rep = advise(probe, spectators, n, 0.05)
        text = rep.to_json()
        again = ProtocolReport.from_json(text)
        assert again.to_json() == text
        for key, value in rep.scalar_row().items():
            assert again.scalar_row()[key] == value
    assert json.loads(text)["schema"] == "v1"


def test_report_rejects_unknown_schema():
    rep = advise(ChannelFamily.flip(0.3), [CLEAN], 2, 0.1)
    obj = rep.to_dict()
    obj["schema"] = "v0"
    with pytest.raises(DomainError):
        ProtocolReport.from_dict(obj)


def test_build_protocol_uses_probe_frame():
    spec, plan = build_protocol(AdviceRequest(ChannelFamily.flip(0.3), (ChannelFamily.flip(0.2),), 2, 0.1))
    frame = gram_spectrum(channel_matrix_derivative(ChannelFamily.flip(0.3)))
    assert np.allclose(spec.r0, frame.second) and np.allclose(spec.c, frame.first)
    assert plan is not None


# sweeps ---------------------------------------------------------------------


def test_sweep_over_qubit_count():
    base = AdviceRequest(ChannelFamily.flip(0.3), (), 1, 0.1)
    rows = sweep(base, "n", list(range(2, 9)))
    values = [row["h_corr_closed"] for row in rows]
    assert values == pytest.approx([0.01 * (4 + (n - 1) * 4) for n in range(2, 9)], rel=1e-12)
    assert all(b > a for a, b in zip(values, values[1:]))
    assert [row["n"] for row in rows] == list(range(2, 9))


def test_sweep_noise_crossing():
    n = 3
    base = AdviceRequest(ChannelFamily.phase_shift(0.4), (ChannelFamily.depolarizing(0.0),) * (n - 1), n, 0.1)
    grid = np.round(np.linspace(0, 0.5, 51), 12)
    rows = sweep(base, "noise", list(grid))
    recs = [row["recommendation"] for row in rows]
    root = 1 - (1 / n) ** (1 / (2 * (n - 1)))
    flip = next(i for i, r in enumerate(recs) if r == "SQSC")
    assert all(r == "CS" for r in recs[:flip]) and all(r == "SQSC" for r in recs[flip:])
    assert grid[flip - 1] < root <= grid[flip]


def test_sweep_input_errors():
    base = AdviceRequest(ChannelFamily.flip(0.3), (CLEAN,), 2, 0.1)
    with pytest.raises(DomainError):
        sweep(base, "n", [])
    with pytest.raises(DomainError):
        sweep(base, "temperature", [1.0])
    with pytest.raises(DomainError):
        sweep(AdviceRequest(ChannelFamily.flip(0.3), (), 1, 0.1), "noise", [0.1])


def test_sweep_records_row_errors():
    base = AdviceRequest(ChannelFamily.flip(0.3), (ChannelFamily.flip(0.1),), 2, 0.1)
    rows = sweep(base, "r", [0.1, 1.5, 0.05])
    assert rows[0]["error"] is None and rows[2]["error"] is None
    assert "DomainError" in rows[1]["error"]
    assert rows[1]["recommendation"] is None


def test_sweep_csv_format():
    base = AdviceRequest(ChannelFamily.flip(0.3), (CLEAN,), 2, 0.1)
    text = sweep_to_csv(sweep(base, "r", [0.1, 0.05]))
    parsed = list(csv.reader(io.StringIO(text)))
    assert tuple(parsed[0]) == SWEEP_COLUMNS
    row = dict(zip(parsed[0], parsed[1]))
    assert row["r"] == "0.10000000000000001"
    assert float(row["h_corr_closed"]) == pytest.approx(0.08)
    assert text.endswith("\r\n")


# validation -----------------------------------------------------------------


def test_validate_phase_flip_fixture():
    spec, _ = build_protocol(AdviceRequest(ChannelFamily.flip(0.3), (ChannelFamily.flip(0.2),) * 2, 3, 0.1))
    table = validate(spec, [0.04, 0.02, 0.01, 0.0])
    ratios = [row["h_ratio"] for row in table.rows[:3]]
    assert abs(ratios[2] - 1) < abs(ratios[1] - 1) < abs(ratios[0] - 1)
    assert table.qfi_order >= 1
    assert table.rows[3]["h_exact"] == 0.0
    assert table.fisher_order >= 1


def test_validate_clean_phase_shift():
    spec = ProtocolSpec(2, 0.1, Y_AXIS, X_AXIS, ChannelFamily.phase_shift(0.5), [CLEAN])
    table = validate(spec, [0.01])
    assert table.rows[0]["h_exact"] / 0.01**2 == pytest.approx(2.0, rel=1e-3)


def test_validate_row_order_and_errors():
    spec = ProtocolSpec(2, 0.1, Y_AXIS, X_AXIS, ChannelFamily.phase_shift(0.5), [CLEAN])
    table = validate(spec, [0.03, 0.01, 0.02])
    assert [row["r"] for row in table.rows] == [0.03, 0.01, 0.02]
    with pytest.raises(DomainError):
        validate(spec, [])
