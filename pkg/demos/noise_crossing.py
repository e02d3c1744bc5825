"""When do noisy spectators stop being worth it?

Sweep a uniform depolarizing strength over three spectators of a
depolarizing probe and watch the recommendation switch from the
correlated protocol back to the single-qubit baseline. The switch sits
where 4 (1 - eps)^6 falls through 1.
"""

import numpy as np

from qmetro import AdviceRequest, ChannelFamily, sweep

n = 4
base = AdviceRequest(ChannelFamily.depolarizing(0.3), (ChannelFamily.depolarizing(0.0),) * (n - 1), n, 0.1)
grid = np.round(np.arange(0.0, 0.41, 0.02), 10)
rows = sweep(base, "noise", list(grid))

print(f"{'eps':>5} {'n*Sigma':>8} {'choice':>6} {'F/r^2':>7}")
for eps, row in zip(grid, rows):
    print(f"{eps:5.2f} {n * row['sigma_product']:8.4f} {row['recommendation']:>6} {row['f_predicted'] / 0.01:7.4f}")

print("\nanalytic switch at eps =", round(1 - n ** (-1 / 6), 4))
