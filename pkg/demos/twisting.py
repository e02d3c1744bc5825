"""Rotating noisy spectators into the probe's frame.

The probe is a phase flip about z, so its derivative lives in the x-y
plane. A spectator with a bit flip about x damages exactly the direction
the protocol wants to use. Conjugating that spectator by a rotation
moves its good axis onto the probe's best axis.
"""

import numpy as np

from qmetro import (
    X_AXIS,
    AdviceRequest,
    ChannelFamily,
    ProtocolSpec,
    apply_twists,
    build_protocol,
    channel_matrix,
    cs_qfi_closed_form,
    plan_twists,
    protocol_qfi_exact,
)

np.set_printoptions(precision=3, suppress=True)
r = 0.05
probe = ChannelFamily.flip(0.2)
spectators = [ChannelFamily.flip(0.25, X_AXIS), ChannelFamily.flip(0.1, X_AXIS)]

spec, plan = build_protocol(AdviceRequest(probe, tuple(spectators), 3, r))
untwisted = ProtocolSpec(3, r, spec.r0, spec.c, probe, spectators)

for j, rot in enumerate(plan.rotations, start=2):
    print(f"spectator {j} twist:\n{rot}")
    print("Bloch matrix before:", np.diag(channel_matrix(spectators[j - 2])))
    print("Bloch matrix after: ", np.diag(rot.T @ channel_matrix(spectators[j - 2]) @ rot))

print("\nH/r^2 without twist:", round(cs_qfi_closed_form(untwisted) / r**2, 4))
print("H/r^2 with twist:   ", round(cs_qfi_closed_form(spec) / r**2, 4))
print("exact, with twist:  ", round(protocol_qfi_exact(spec) / r**2, 4))

# planning from scratch on the untwisted spec gives the same rotations
again = apply_twists(untwisted, plan_twists(untwisted))
print("replanned matches:", all(np.allclose(a.twist, b.twist) for a, b in zip(again.spectators, spec.spectators)))
