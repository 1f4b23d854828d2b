"""Largest tolerable error rate at N = 1e8 for BB84 and for AD with b = 3.

Each misalignment point is optimised over every free protocol parameter,
warm-started from its neighbour, and the zero-rate crossing is refined by
bisection. Takes about a minute.
"""

import numpy as np

from adqkd import ChannelParams, ProtocolParams
from adqkd.optimize import OptimizationProblem, threshold_scan


def threshold(variant, b, N=1e8):
    template = ProtocolParams(N=N, b=b)

    def make(deg, warm):
        ch = ChannelParams.from_degrees(1.0, 0.0, deg)
        return OptimizationProblem(ch, warm or template, variant, restarts=2)

    scan = threshold_scan(make, np.arange(4.0, 30.0, 1.0), tol=0.05)
    c = scan.crossing
    return scan.bracket, c.result.diagnostics["phi_K"], c.rate


for variant, b in (("bb84", 1), ("ad", 3)):
    (lo, hi), phi, rate = threshold(variant, b)
    print(f"{variant:>4} b={b}: crossing between {lo:.3f} and {hi:.3f} deg, "
          f"error rate {100 * phi:.2f}%, last rate {rate:.2e}")
