"""How much does a register of clean spectator qubits buy?

A bit-flip probe read by a single qubit gives H = 4 r^2. Correlating it
with n - 1 noiseless spectators adds another 4 r^2 per spectator. The
closed form is checked against the exact QFI of the simulated state.
"""

from qmetro import AdviceRequest, ChannelFamily, build_protocol, cs_qfi_closed_form, protocol_qfi_exact

r = 0.05
probe = ChannelFamily.flip(0.3)

print(f"{'n':>2} {'closed/r^2':>11} {'exact/r^2':>11}")
for n in range(1, 7):
    spec, _ = build_protocol(AdviceRequest(probe, (ChannelFamily.identity(),) * (n - 1), n, r))
    closed = cs_qfi_closed_form(spec) / r**2
    exact = protocol_qfi_exact(spec) / r**2
    print(f"{n:>2} {closed:>11.6f} {exact:>11.6f}")

# the gain is linear in n while n r^2 stays small; past that the series drifts
spec, _ = build_protocol(AdviceRequest(probe, (ChannelFamily.identity(),) * 5, 6, 0.3))
print("\nat r = 0.3, n = 6 the exact QFI is", round(protocol_qfi_exact(spec) / 0.09, 3),
      "x r^2 against a predicted", round(cs_qfi_closed_form(spec) / 0.09, 3))
