"""Gridded wind fields: divergence, continuity-equation vertical motion and classification.

Fields live on a regular ``(nx, ny, nz)`` lattice with uniform spacings.
``z`` is geometric height.  Derivatives use second-order central
differences in the interior and one-sided second-order stencils on faces,
which is exactly :func:`numpy.gradient` with ``edge_order=2``.

Sign conventions
----------------
``omega(x, y, z) = -∫_{z_s}^{z} div_H dz`` with ``omega = 0`` at the surface
level ``z_s``.  Rising motion means ``omega < -tol`` and descending motion
``omega > tol``.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import PreconditionError, WindGridError

__all__ = [
    "WindGrid",
    "ScalarField3",
    "MotionReport",
    "load_wind_grid",
    "write_wind_grid",
    "divergence_fields",
    "vertical_motion",
    "classify_motion",
    "divergence_theorem_check",
    "corollary_slack",
    "write_scalar_csv",
    "profile_svg",
    "TABLE",
]

DEFAULT_TOL = 1e-9
SPACING_RTOL = 1e-9

# (case, extremum of |omega|) -> (divergence state, point class)
TABLE = {
    ("rising", "max"): ("min", "warmest_ideal"),
    ("rising", "min"): ("max", "coolest"),
    ("descending", "max"): ("min", "warmest"),
    ("descending", "min"): ("max", "coolest_ideal"),
}


@dataclass
class WindGrid:
    """Velocity components ``u, v, w`` on a regular lattice.

    Node ``(i, j, k)`` sits at ``(x0 + i*dx, y0 + j*dy, z0 + k*dz)``.
    """

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    dx: float
    dy: float
    dz: float
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.u.ndim != 3 or self.u.shape != self.v.shape or self.u.shape != self.w.shape:
            raise WindGridError("u, v, w must be 3-D arrays of equal shape")
        if min(self.u.shape) < 3:
            raise WindGridError(f"every grid extent must be at least 3, got {self.u.shape}")
        for name in ("dx", "dy", "dz"):
            val = float(getattr(self, name))
            if not (np.isfinite(val) and val > 0):
                raise WindGridError(f"{name} must be finite and positive, got {val!r}")
            setattr(self, name, val)
        for name in ("u", "v", "w"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise WindGridError(f"velocity component {name} contains NaN or infinite values")
        self.origin = tuple(float(o) for o in self.origin)

    @property
    def shape(self):
        return self.u.shape

    @property
    def spacing(self):
        return (self.dx, self.dy, self.dz)

    def axes(self):
        return tuple(
            o + d * np.arange(n) for o, d, n in zip(self.origin, self.spacing, self.shape)
        )

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def __add__(self, other):
        if self.shape != other.shape or self.spacing != other.spacing:
            raise WindGridError("grids must share shape and spacing to be added")
        return WindGrid(self.u + other.u, self.v + other.v, self.w + other.w, *self.spacing, self.origin)


@dataclass
class ScalarField3:
    values: np.ndarray
    label: str
    grid: WindGrid = field(repr=False, default=None)

    def __post_init__(self):
        if self.grid is not None and self.values.shape != self.grid.shape:
            raise WindGridError(f"field {self.label} has shape {self.values.shape}, grid {self.grid.shape}")


# --------------------------------------------------------------------------
# I/O

def _lattice(values, name):
    vals = np.unique(values)
    if vals.size == 1:
        raise WindGridError(f"{name} axis has a single level; need at least 3")
    d = float(np.median(np.diff(vals)))
    origin = float(vals[0])
    n = int(round((vals[-1] - origin) / d)) + 1
    idx = np.rint((values - origin) / d).astype(int)
    snapped = origin + idx * d
    if np.any(np.abs(snapped - values) > SPACING_RTOL * max(abs(d) * n, 1.0) + 1e-12 * np.abs(values)):
        raise WindGridError(f"non-uniform spacing along {name}")
    return origin, d, n, idx


def load_wind_grid(path, format="csv"):
    """Read a CSV with header ``x,y,z,u,v,w`` (rows in any order) into a :class:`WindGrid`."""
    if format != "csv":
        raise WindGridError(f"unsupported wind format {format!r}; only 'csv' is accepted")
    path = Path(path)
    if not path.exists():
        raise WindGridError(f"wind file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["x", "y", "z", "u", "v", "w"]:
            raise WindGridError(f"{path}: header must be x,y,z,u,v,w, got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 6:
                raise WindGridError(f"{path}:{lineno}: expected 6 columns, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise WindGridError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise WindGridError(f"{path}: no data rows")
    data = np.array(rows)
    if np.any(np.isnan(data[:, 3:])):
        bad = [float(c) for c in data[np.isnan(data[:, 3:]).any(axis=1)][0, :3]]
        raise WindGridError(f"{path}: NaN velocity at x={bad[0]!r}, y={bad[1]!r}, z={bad[2]!r}")
    axes = [_lattice(data[:, c], n) for c, n in enumerate("xyz")]
    shape = tuple(a[2] for a in axes)
    filled = np.zeros(shape, dtype=bool)
    out = np.zeros((3,) + shape)
    I, J, K = (a[3] for a in axes)
    for r, (i, j, k) in enumerate(zip(I, J, K)):
        if filled[i, j, k]:
            raise WindGridError(
                f"{path}: duplicate lattice node x={float(data[r, 0])!r}, y={float(data[r, 1])!r}, z={float(data[r, 2])!r}"
            )
        filled[i, j, k] = True
        out[:, i, j, k] = data[r, 3:]
    if not filled.all():
        i, j, k = np.argwhere(~filled)[0]
        x = float(axes[0][0] + i * axes[0][1])
        y = float(axes[1][0] + j * axes[1][1])
        z = float(axes[2][0] + k * axes[2][1])
        raise WindGridError(f"{path}: ragged lattice, missing node x={x!r}, y={y!r}, z={z!r}")
    return WindGrid(out[0], out[1], out[2], axes[0][1], axes[1][1], axes[2][1], (axes[0][0], axes[1][0], axes[2][0]))


def write_wind_grid(grid: WindGrid, path):
    """Write ``grid`` as CSV; floats use ``repr`` so reading back is exact."""
    X, Y, Z = grid.mesh()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "z", "u", "v", "w"])
        for idx in itertools.product(*(range(n) for n in grid.shape)):
            w.writerow([repr(float(a[idx])) for a in (X, Y, Z, grid.u, grid.v, grid.w)])


def write_scalar_csv(field3: ScalarField3, path, grid=None):
    """Write a scalar field as CSV ``x,y,z,value``."""
    grid = field3.grid if grid is None else grid
    X, Y, Z = grid.mesh()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "z", "value"])
        for idx in itertools.product(*(range(n) for n in grid.shape)):
            w.writerow([repr(float(a[idx])) for a in (X, Y, Z, field3.values)])


# --------------------------------------------------------------------------
# fields

def _d(a, spacing, axis):
    return np.gradient(a, spacing, axis=axis, edge_order=2)


def divergence_fields(grid: WindGrid):
    """``(div_full, div_horizontal, continuity_residual)`` as :class:`ScalarField3`."""
    div_h = _d(grid.u, grid.dx, 0) + _d(grid.v, grid.dy, 1)
    dwdz = _d(grid.w, grid.dz, 2)
    full = div_h + dwdz
    return (
        ScalarField3(full, "div_full", grid),
        ScalarField3(div_h, "div_horizontal", grid),
        ScalarField3(div_h + dwdz, "continuity_residual", grid),
    )


def vertical_motion(grid: WindGrid, surface_index=0, div_horizontal=None):
    """Column integral ``omega = -∫ div_H dz`` from the surface level, by the trapezoid rule."""
    nz = grid.shape[2]
    if not (isinstance(surface_index, (int, np.integer)) and 0 <= surface_index < nz):
        raise PreconditionError(f"surface level index must lie in [0, {nz - 1}], got {surface_index!r}")
    div_h = divergence_fields(grid)[1].values if div_horizontal is None else div_horizontal
    # cumulative integral from level 0, then shift so the surface level is zero
    cum = cumulative_trapezoid(div_h, dx=grid.dz, axis=2, initial=0.0)
    omega = -(cum - cum[:, :, surface_index : surface_index + 1])
    return ScalarField3(omega, "omega", grid)


def mass_consistent_w(grid: WindGrid, surface_index=0):
    """Vertical velocity that makes the discrete continuity equation hold."""
    return vertical_motion(grid, surface_index).values


@dataclass
class MotionReport:
    omega_profile: list
    omega_columns: np.ndarray
    motion: np.ndarray  # -1 rising, 0 neutral, +1 descending
    extrema: list
    density_trend: np.ndarray  # -1 decreasing, 0 steady, +1 increasing
    tol: float

    def counts(self):
        return {
            "rising": int(np.sum(self.motion < 0)),
            "descending": int(np.sum(self.motion > 0)),
            "neutral": int(np.sum(self.motion == 0)),
        }

    def density_counts(self):
        return {
            "increasing": int(np.sum(self.density_trend > 0)),
            "decreasing": int(np.sum(self.density_trend < 0)),
            "steady": int(np.sum(self.density_trend == 0)),
        }

    def to_dict(self):
        return {
            "omega_profile": [float(v) for v in self.omega_profile],
            "motion_counts": self.counts(),
            "density_counts": self.density_counts(),
            "extrema": self.extrema,
            "tol": self.tol,
        }


def classify_motion(omega, div_horizontal, tol=DEFAULT_TOL, div_full=None):
    """Rising/descending classification and table rows at the extrema of ``|omega|``.

    For each motion case present, the points of largest and smallest
    ``|omega|`` within that case are reported with the divergence state and
    point class of the corresponding table row.  ``density_trend`` is
    ``increasing`` where ``div_full < -tol``.
    """
    om = omega.values if isinstance(omega, ScalarField3) else np.asarray(omega, dtype=float)
    dh = div_horizontal.values if isinstance(div_horizontal, ScalarField3) else np.asarray(div_horizontal, dtype=float)
    if om.shape != dh.shape:
        raise WindGridError("omega and div_horizontal must share a grid")
    motion = np.where(om < -tol, -1, np.where(om > tol, 1, 0))
    extrema = []
    for case, code in (("rising", -1), ("descending", 1)):
        mask = motion == code
        if not mask.any():
            continue
        mag = np.where(mask, np.abs(om), np.nan)
        for ext, pick in (("max", np.nanargmax), ("min", np.nanargmin)):
            flat = int(pick(mag))
            idx = np.unravel_index(flat, om.shape)
            state, cls = TABLE[(case, ext)]
            extrema.append({
                "case": case,
                "extremum": ext,
                "divergence_state": state,
                "point_class": cls,
                "index": [int(i) for i in idx],
                "omega": float(om[idx]),
                "div_horizontal": float(dh[idx]),
            })
    if div_full is None:
        trend = np.zeros(om.shape, dtype=int)
    else:
        df = div_full.values if isinstance(div_full, ScalarField3) else np.asarray(div_full, dtype=float)
        trend = np.where(df < -tol, 1, np.where(df > tol, -1, 0))
    profile = [float(v) for v in om.mean(axis=(0, 1))]
    return MotionReport(profile, om, motion, extrema, trend, tol)


TREND_NAMES = {1: "increasing", -1: "decreasing", 0: "steady"}
MOTION_NAMES = {-1: "rising", 1: "descending", 0: "neutral"}


def divergence_theorem_check(grid: WindGrid, box):
    """Compare ``∫ div U dV`` with the outward flux through the faces of an index box.

    ``box = ((i0, i1), (j0, j1), (k0, k1))`` with inclusive node indices that
    must not touch the grid boundary.  The volume integral uses the midpoint
    rule with cell-centre divergence taken as the mean of the eight corner
    values; face fluxes use the two-dimensional trapezoid rule.
    """
    (i0, i1), (j0, j1), (k0, k1) = [tuple(int(v) for v in b) for b in box]
    nx, ny, nz = grid.shape
    for lo, hi, n, name in ((i0, i1, nx, "x"), (j0, j1, ny, "y"), (k0, k1, nz, "z")):
        if not (0 < lo < hi < n - 1):
            raise PreconditionError(
                f"box range {name}=[{lo}, {hi}] must lie strictly inside [0, {n - 1}]"
            )
    div = divergence_fields(grid)[0].values[i0 : i1 + 1, j0 : j1 + 1, k0 : k1 + 1]
    corners = sum(
        div[a : div.shape[0] - 1 + a, b : div.shape[1] - 1 + b, c : div.shape[2] - 1 + c]
        for a in (0, 1) for b in (0, 1) for c in (0, 1)
    ) / 8.0
    volume = float(corners.sum() * grid.dx * grid.dy * grid.dz)

    def trap2(face, h1, h2):
        wts1 = np.full(face.shape[0], h1)
        wts1[[0, -1]] *= 0.5
        wts2 = np.full(face.shape[1], h2)
        wts2[[0, -1]] *= 0.5
        return float(wts1 @ face @ wts2)

    u, v, w = grid.u, grid.v, grid.w
    ys, zs, xs = slice(j0, j1 + 1), slice(k0, k1 + 1), slice(i0, i1 + 1)
    flux = (
        trap2(u[i1, ys, zs], grid.dy, grid.dz) - trap2(u[i0, ys, zs], grid.dy, grid.dz)
        + trap2(v[xs, j1, zs], grid.dx, grid.dz) - trap2(v[xs, j0, zs], grid.dx, grid.dz)
        + trap2(w[xs, ys, k1], grid.dx, grid.dy) - trap2(w[xs, ys, k0], grid.dx, grid.dy)
    )
    return volume, flux, abs(volume - flux)


def profile_svg(profile, levels, path=None, title="horizontal-mean vertical motion"):
    """Minimal SVG 1.1 line plot of ``omega`` (x axis) against height (y axis)."""
    prof = np.asarray(profile, dtype=float)
    z = np.asarray(levels, dtype=float)
    W, H, pad = 400, 300, 40
    span = lambda a: (float(a.min()), float(a.max()) if a.max() > a.min() else float(a.min()) + 1.0)
    x0, x1 = span(prof)
    z0, z1 = span(z)
    px = pad + (prof - x0) / (x1 - x0) * (W - 2 * pad)
    py = H - pad - (z - z0) / (z1 - z0) * (H - 2 * pad)
    pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(px, py))
    svg = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}">\n'
        f"  <title>{title}</title>\n"
        f'  <line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>\n'
        f'  <line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>\n'
        f'  <text x="{W / 2}" y="{H - 8}" text-anchor="middle">omega</text>\n'
        f'  <text x="12" y="{H / 2}" text-anchor="middle" transform="rotate(-90 12 {H / 2})">z</text>\n'
        f'  <polyline fill="none" stroke="black" points="{pts}"/>\n'
        "</svg>\n"
    )
    if path is not None:
        Path(path).write_text(svg)
    return svg


# --------------------------------------------------------------------------
# corollary slacks on flat submersions

FLAT_TOL = 1e-6


def corollary_slack(sub, point, k=2, conv=None, tol=1e-6, seed=42):
    """Slack reports for the vertical-motion corollaries on a Euclidean submersion.

    The vertical motion at ``p`` is identified with ``-div_H(ħ)(p)``.  Each
    entry holds the printed left and right sides, ``slack = lhs - rhs`` for
    the inequalities (``r/2·ω ≥ ...``) and the absolute residual for the
    equality statements, plus the numerically checked preconditions.
    """
    from .geometry import riemann_at
    from .invariants import delta_invariant, ricci_extremes
    from .submersion import ConventionResolution, _tensors_from_jet, connection_jet

    conv = ConventionResolution.fixed("standard") if conv is None else conv
    x = sub.total.point(point)
    sample = riemann_at(sub.total, x)
    base_sample = riemann_at(sub.base, sub.project(x))
    flat_total = float(np.max(np.abs(sample.riemann)))
    flat_base = float(np.max(np.abs(base_sample.riemann)))
    if flat_total > FLAT_TOL or flat_base > FLAT_TOL:
        raise PreconditionError(
            f"corollary_slack needs flat total and base charts; max |R| is {flat_total:.3e} (total), "
            f"{flat_base:.3e} (base) at {x.tolist()}"
        )
    jet = connection_jet(sub, x)
    t = _tensors_from_jet(jet)
    r = sub.r
    omega = -t.div_H_mean
    h2 = t.mean_norm ** 2
    AV, TV, AH = t.norms["A_V"], t.norms["T_V"], t.norms["A_H"]
    integrable = AV + AH <= tol
    geodesic = max(t.norms["T_H"], TV) <= tol
    lhs = 0.5 * r * omega
    out = {
        "omega": omega,
        "omega_definition": "omega(p) := -div_H(mean curvature vector)(p)",
        "div_H_mean": t.div_H_mean,
        "preconditions": {
            "flat_total_max_R": flat_total,
            "flat_base_max_R": flat_base,
            "integrable_horizontal": bool(integrable),
            "totally_geodesic_fibers": bool(geodesic),
        },
        "point": x.tolist(),
    }

    def entry(rhs, kind, applicable=True, reason=""):
        e = {"lhs": lhs, "rhs": float(rhs), "kind": kind, "applicable": bool(applicable)}
        if kind == "inequality":
            e["slack"] = lhs - float(rhs)
        else:
            e["residual"] = abs(lhs - float(rhs))
        if reason:
            e["reason"] = reason
        return e

    def delta(kk):
        return delta_invariant(sub.total, x, kk, seed=seed, sample=sample).delta

    if r > k >= 2:
        d = delta(k)
        rhs = d - r * r * (r - k) / (2 * (r - k + 1)) * h2 - 1.5 * AV - 0.5 * TV
        out["delta_c1"] = entry(rhs, "inequality")
        out["delta_c1"]["k"] = k
    else:
        out["delta_c1"] = {"applicable": False, "reason": f"needs r > k >= 2 (r={r}, k={k})"}
    if r >= 3:
        d2 = delta(2)
        rhs = d2 - r * r * (r - 2) / (2 * (r - 1)) * h2 - 0.5 * TV
        out["delta_c2"] = entry(rhs, "inequality", integrable, "" if integrable else "horizontal distribution not integrable")
        out["delta_c22"] = entry(d2, "equality", integrable and geodesic,
                                 "" if integrable and geodesic else "needs geodesic fibres and integrable horizontal")
    else:
        reason = f"needs r >= 3 (r={r})"
        out["delta_c2"] = {"applicable": False, "reason": reason}
        d2 = delta(2) if sub.total.dim > 2 else 0.0
        out["delta_c22"] = entry(d2, "equality", integrable and geodesic and r >= 2, reason)
    ric_min, ric_max = ricci_extremes(sample, jet)
    rhs = ric_max - r * r / 4 * h2 - 1.5 * AV - 0.5 * TV
    out["ricci_c1"] = entry(rhs, "inequality")
    # equality must hold for every unit U: report the worst deviation
    worst = max(abs(lhs - (ric_max - 1.5 * AV)), abs(lhs - (ric_min - 1.5 * AV)))
    e = entry(ric_max - 1.5 * AV, "equality", geodesic, "" if geodesic else "fibres not totally geodesic")
    e["residual"] = worst
    out["ricci_c2"] = e
    return out
