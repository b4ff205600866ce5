"""The delta-curvature inequalities on submersions with umbilical fibres.

Hyperbolic space H4 = R x_(e^t) E3 projects onto the t line with flat
horosphere fibres; concentric spheres in E4 project onto the radius.  Both
have totally umbilical fibres, so the equality diagnosis reports "umbilical".
"""
from subaudit.catalog import flat_umbilical, hopf, round_product, warped_hyperbolic
from subaudit.invariants import inequality_check
from subaudit.submersion import resolve_convention

# Hopf is needed to pin the |A^H|² coefficient; it is the only entry with A != 0
fit = [hopf(), warped_hyperbolic(2), warped_hyperbolic(3), round_product(1.0, 2), flat_umbilical()]
conv = resolve_convention(fit, samples=1, holdout=1)
print("orientation sigma:", conv.sigma, " mixed coefficients:", [round(c, 6) for c in conv.mixed_coeffs])

for sub, x in ((warped_hyperbolic(3), [0.2, 0.1, 0.0, -0.1]), (flat_umbilical(), [1.0, 1.2, 1.4, 0.5])):
    for which in ("thm33", "k2", "ricci"):
        rep = inequality_check(which, sub, x, k=2, conv=conv)
        print(f"{sub.name:18s} {which:6s} lhs {rep.lhs:9.5f}  rhs {rep.rhs:9.5f}  slack {rep.slack:9.5f}  "
              f"{rep.equality_diagnosis['classification']}")
