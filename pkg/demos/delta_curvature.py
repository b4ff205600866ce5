"""Chen's delta invariant on a few constant-curvature and product spaces.

delta(k) = tau(p) - inf tau(k-plane).  On the unit 3-sphere every plane has
curvature 1, so delta(2) = 3 - 1 = 2; on S2 x E1 the mixed planes are flat
and delta(2) = 1.  The optimizer result is compared with a brute-force sweep.
"""
import numpy as np

from subaudit.catalog import product_chart, sphere_chart
from subaudit.geometry import orthonormalize, riemann_at, riemann_in_frame
from subaudit.invariants import brute_force_inf_tau, delta_invariant

cases = [
    ("S3(1)", sphere_chart(3, 1.0), [1.0, 1.3, 0.2]),
    ("S3(2)", sphere_chart(3, 2.0), [1.0, 1.3, 0.2]),
    ("S2xE1", product_chart(2, 1.0, 1), [1.0, 0.5, 0.1]),
    ("S2xE2", product_chart(2, 1.0, 2), [1.0, 0.5, 0.1, 0.2]),
]

for label, chart, x in cases:
    sample = riemann_at(chart, x)
    E = orthonormalize(np.eye(chart.dim), sample.metric).vectors
    R = riemann_in_frame(sample, E)
    for k in range(2, chart.dim):
        rep = delta_invariant(chart, x, k, sample=sample)
        oracle = brute_force_inf_tau(R, k, samples=20000)
        print(f"{label:6s} k={k}  tau={rep.tau_total:8.5f}  delta={rep.delta:8.5f}  "
              f"oracle gap={oracle - rep.inf_tau:9.2e}")
