"""Audit the Hopf fibration S3 -> S2(1/2) against its direct curvature.

The fibres are great circles, so T vanishes, while the horizontal
distribution is as far from integrable as it gets: |A^V(X1, X2)| = 1.
Each Gauss-Codazzi identity is checked under both curvature orientations;
only one of them makes the printed relations hold.
"""
from subaudit.catalog import hopf
from subaudit.submersion import IDENTITIES, adapted_frame_at, gauss_codazzi_audit, oneill_tensors_at

sub = hopf()
point = [1.0, 0.3, 0.4]

tensors = oneill_tensors_at(sub, adapted_frame_at(sub, point, seed=1))
print("O'Neill norms:", {k: round(v, 10) for k, v in tensors.norms.items()})

report = gauss_codazzi_audit(sub, point, seeds=(None, 1))
print(f"{'identity':10s} {'standard':>12s} {'literal':>12s}")
for name in IDENTITIES:
    print(f"{name:10s} {report.residual(name, 1):12.2e} {report.residual(name, -1):12.2e}")

rec = report.find("cod4", -1)[0]
print("base curvature recovered from the horizontal identity:", round(rec.extra["recovered_K_check"], 8))
