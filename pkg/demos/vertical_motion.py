"""Vertical motion from the continuity equation on synthetic wind fields.

A horizontally diverging flow u = (x, y) forces sinking air to replace it;
integrating -div_H upward from the surface gives omega(z) = -2z, which the
sign convention here calls rising motion.  The extremes of |omega| are then
matched to the rows of the rising/descending classification table.
"""
from subaudit.catalog import wind_linear, wind_mass_consistent
from subaudit.meteorology import classify_motion, divergence_fields, divergence_theorem_check, vertical_motion

for label, grid in (("diverging", wind_linear(1.0, 1.0)), ("converging", wind_linear(-1.0, -1.0))):
    full, horiz, _ = divergence_fields(grid)
    omega = vertical_motion(grid, surface_index=0)
    rep = classify_motion(omega, horiz, div_full=full)
    print(label, "mean omega by level:", [round(v, 12) for v in rep.omega_profile])
    for row in rep.extrema:
        print(f"   {row['case']:10s} |omega| {row['extremum']}: divergence {row['divergence_state']}, "
              f"{row['point_class']}")

grid = wind_mass_consistent()
cont = divergence_fields(grid)[2].values[1:-1, 1:-1, 1:-1]
print("mass-consistent field, interior continuity residual:", abs(cont).max())
# the stencil divergence vanishes but the face quadrature does not, so the
# flux check shows the second-order discretization error shrinking with spacing
for n, h, box in ((9, 0.25, (1, 7)), (17, 0.125, (2, 14))):
    g = wind_mass_consistent(nx=n, ny=n, nz=n, dx=h, dy=h, dz=h)
    vol, flux, res = divergence_theorem_check(g, (box,) * 3)
    print(f"divergence theorem, spacing {h}: volume {vol:.2e}, flux {flux:.6f}, residual {res:.2e}")
