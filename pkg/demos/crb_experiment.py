"""Does maximum likelihood reach the predicted variance?

Run repeated experiments for the recommended protocol and compare the
observed variance times shots with the inverse Fisher information, both
for a lone qubit and for a correlated register.
"""

from qmetro import (
    X_AXIS,
    AdviceRequest,
    ChannelFamily,
    MeasurementScheme,
    ProtocolSpec,
    advise,
    build_protocol,
    estimation_experiment,
)

probe = ChannelFamily.flip(0.3)

lone = ProtocolSpec(1, 0.5, X_AXIS, X_AXIS, probe, [])
res = estimation_experiment(lone, MeasurementScheme.generic(), 0.3, 100_000, seed=11, batches=500)
print(f"single qubit: var*shots = {res.variance_times_shots:.3f} +- {res.standard_error:.3f}, 1/F = {res.crb:.3f}")

spectators = (ChannelFamily.flip(0.1), ChannelFamily.flip(0.2))
report = advise(probe, spectators, 3, 0.1)
spec, _ = build_protocol(AdviceRequest(probe, spectators, 3, 0.1))
res = estimation_experiment(spec, report.measurement, 0.3, 10_000, seed=11, batches=300)
print(f"{report.recommendation.value}, {report.measurement.kind.value} readout: "
      f"var*shots = {res.variance_times_shots:.2f} +- {res.standard_error:.2f}, "
      f"1/F = {res.crb:.2f}, lowest-order 1/F = {1 / report.f_predicted:.2f}")
