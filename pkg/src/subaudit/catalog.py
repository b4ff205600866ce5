"""Closed-form example submersions, reference charts and synthetic wind fields.

Each entry carries its parameter defaults and a table of expected values
with the tolerance the engine must reproduce them to; ``tests`` walk the
table, so the catalog checks itself.
"""
from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .geometry import Chart
from .meteorology import WindGrid, vertical_motion
from .submersion import SubmersionInstance

__all__ = [
    "CatalogEntry",
    "list_entries",
    "get_entry",
    "instantiate",
    "sphere_chart",
    "product_chart",
    "euclidean_projection",
    "hopf",
    "warped_hyperbolic",
    "round_product",
    "flat_umbilical",
    "all_charts",
]

HOPF_BAND = 0.2


@dataclass(frozen=True)
class Expected:
    value: float
    tol: float
    note: str


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str  # "submersion" | "wind"
    builder: Callable
    defaults: dict
    expected: dict = field(default_factory=dict)
    summary: str = ""

    def build(self, params=None):
        params = dict(params or {})
        unknown = set(params) - set(self.defaults)
        if unknown:
            key = sorted(unknown)[0]
            hint = difflib.get_close_matches(key, list(self.defaults), n=1)
            extra = f"; did you mean {hint[0]!r}?" if hint else ""
            raise PreconditionError(f"unknown parameter {key!r} for {self.name}{extra}")
        merged = {**self.defaults, **params}
        return self.builder(**merged)

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "defaults": self.defaults,
            "summary": self.summary,
            "expected": {k: {"value": e.value, "tol": e.tol, "note": e.note} for k, e in self.expected.items()},
        }


# --------------------------------------------------------------------------
# charts

def sphere_chart(dim=2, radius=1.0, band=0.2):
    """Round sphere ``S^dim(radius)`` in hyperspherical coordinates."""
    if dim < 1 or radius <= 0:
        raise PreconditionError("sphere needs dim >= 1 and radius > 0")
    coords = [f"a{i}" for i in range(1, dim + 1)]
    diag = []
    prefix = ""
    for i, c in enumerate(coords):
        diag.append(f"{radius!r}^2{prefix}")
        prefix += f"*sin({c})^2"
    domain = [(band, math.pi - band)] * (dim - 1) + [(-math.pi, math.pi)]
    return Chart.from_strings(coords, diag, domain, f"sphere{dim}({radius!r})")


def product_chart(sphere_dim=2, radius=1.0, flat_dim=1):
    """``S^sphere_dim(radius) × E^flat_dim``."""
    sph = sphere_chart(sphere_dim, radius)
    coords = list(sph.coords) + [f"x{i}" for i in range(1, flat_dim + 1)]
    diag = [sph.metric[i][i].render() for i in range(sph.dim)] + ["1"] * flat_dim
    domain = list(sph.domain) + [(-1.0, 1.0)] * flat_dim
    return Chart.from_strings(coords, diag, domain, f"{sph.name}xE{flat_dim}")


def _flat(coords, name, lo=-1.0, hi=1.0):
    return Chart.from_strings(coords, ["1"] * len(coords), [(lo, hi)] * len(coords), name)


def _check_int(name, value, lo, hi=None):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < lo or (hi is not None and value > hi):
        bound = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        raise PreconditionError(f"parameter {name} must be an integer {bound}, got {value!r}")


def _check_pos(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise PreconditionError(f"parameter {name} must be a positive number, got {value!r}")


# --------------------------------------------------------------------------
# submersions

def euclidean_projection(n=2, r=3):
    """Coordinate projection ``E^{n+r} → E^n``."""
    _check_int("n", n, 1)
    _check_int("r", r, 1)
    base_coords = [f"x{i}" for i in range(1, n + 1)]
    coords = base_coords + [f"y{i}" for i in range(1, r + 1)]
    return SubmersionInstance.from_strings(
        _flat(coords, f"E{n + r}"), _flat(base_coords, f"E{n}"), base_coords,
        "euclidean_projection", {"n": n, "r": r},
    )


def hopf(theta_band=HOPF_BAND):
    """Hopf fibration ``S³ → S²(½)`` in Euler-angle coordinates ``(θ, φ, ψ)``."""
    _check_pos("theta_band", theta_band)
    if theta_band < HOPF_BAND or theta_band >= math.pi / 2:
        raise PreconditionError(
            f"hopf theta_band must lie in [{HOPF_BAND}, pi/2) to avoid the coordinate singularities, got {theta_band!r}"
        )
    coords = ["theta", "phi", "psi"]
    metric = [
        ["0.25", "0", "0"],
        ["0", "0.25", "0.25*cos(theta)"],
        ["0", "0.25*cos(theta)", "0.25"],
    ]
    band = (theta_band, math.pi - theta_band)
    total = Chart.from_strings(coords, metric, [band, (-math.pi, math.pi), (-2 * math.pi, 2 * math.pi)], "S3")
    base = Chart.from_strings(["theta", "phi"], ["0.25", "0.25*sin(theta)^2"], [band, (-math.pi, math.pi)], "S2(1/2)")
    return SubmersionInstance.from_strings(total, base, ["theta", "phi"], "hopf", {"theta_band": theta_band})


def warped_hyperbolic(r=2):
    """``H^{1+r} = R ×_{e^t} E^r`` projected onto the ``t`` line."""
    _check_int("r", r, 1)
    xs = [f"x{i}" for i in range(1, r + 1)]
    total = Chart.from_strings(["t"] + xs, ["1"] + ["exp(2*t)"] * r, [(-1.0, 1.0)] * (r + 1), f"H{r + 1}")
    base = _flat(["t"], "R")
    return SubmersionInstance.from_strings(total, base, ["t"], "warped_hyperbolic", {"r": r})


def round_product(rho=1.0, r=2):
    """``S²(ρ) × E^r → S²(ρ)``."""
    _check_pos("rho", rho)
    _check_int("r", r, 1)
    sph = sphere_chart(2, rho)
    total = product_chart(2, rho, r)
    return SubmersionInstance.from_strings(total, sph, list(sph.coords), "round_product", {"rho": rho, "r": r})


def flat_umbilical(r=3, rho_min=0.5, rho_max=2.0):
    """``E^{r+1}`` minus the origin onto the radius: fibres are concentric round spheres.

    Hyperspherical coordinates ``(rho, a1..ar)``; the base is the ``rho``
    interval.  ``T^H(U, V) = -g(U, V)/rho ∂_rho`` and ``div_H(ħ) = 1/rho²``.
    """
    _check_int("r", r, 2)
    _check_pos("rho_min", rho_min)
    if rho_max <= rho_min:
        raise PreconditionError("flat_umbilical needs rho_max > rho_min")
    angles = [f"a{i}" for i in range(1, r + 1)]
    diag = ["1"]
    prefix = "rho^2"
    for a in angles:
        diag.append(prefix)
        prefix += f"*sin({a})^2"
    domain = [(rho_min, rho_max)] + [(0.3, math.pi - 0.3)] * (r - 1) + [(-math.pi, math.pi)]
    total = Chart.from_strings(["rho"] + angles, diag, domain, f"E{r + 1}-polar")
    base = Chart.from_strings(["rho"], ["1"], [(rho_min, rho_max)], "R+")
    return SubmersionInstance.from_strings(total, base, ["rho"], "flat_umbilical", {"r": r})


# --------------------------------------------------------------------------
# wind fields

def _grid(nx, ny, nz, dx, dy, dz):
    for name, v in (("nx", nx), ("ny", ny), ("nz", nz)):
        _check_int(name, v, 3)
    for name, v in (("dx", dx), ("dy", dy), ("dz", dz)):
        _check_pos(name, v)
    x = dx * np.arange(nx)
    y = dy * np.arange(ny)
    z = dz * np.arange(nz)
    return np.meshgrid(x, y, z, indexing="ij")


def wind_zero(nx=3, ny=3, nz=3, dx=1.0, dy=1.0, dz=1.0):
    X, _, _ = _grid(nx, ny, nz, dx, dy, dz)
    zero = np.zeros_like(X)
    return WindGrid(zero, zero.copy(), zero.copy(), dx, dy, dz)


def wind_solid_rotation(omega=1.0, nx=5, ny=5, nz=5, dx=0.5, dy=0.5, dz=0.5):
    X, Y, _ = _grid(nx, ny, nz, dx, dy, dz)
    return WindGrid(-omega * Y, omega * X, np.zeros_like(X), dx, dy, dz)


def wind_linear(a=1.0, b=1.0, nx=5, ny=5, nz=5, dx=0.5, dy=0.5, dz=0.5):
    """``u = a x``, ``v = b y``, ``w = -(a + b) z``."""
    X, Y, Z = _grid(nx, ny, nz, dx, dy, dz)
    return WindGrid(a * X, b * Y, -(a + b) * Z, dx, dy, dz)


def wind_sinusoidal(amp_u=1.0, amp_v=0.5, amp_w=0.25, nx=9, ny=9, nz=9, dx=0.25, dy=0.25, dz=0.25):
    """Smooth non-solenoidal field ``(A sin x cos z, B sin y, C sin z)``."""
    X, Y, Z = _grid(nx, ny, nz, dx, dy, dz)
    return WindGrid(amp_u * np.sin(X) * np.cos(Z), amp_v * np.sin(Y), amp_w * np.sin(Z), dx, dy, dz)


def wind_mass_consistent(amp=1.0, nx=9, ny=9, nz=9, dx=0.25, dy=0.25, dz=0.25, surface_index=0):
    """Horizontal wind with ``div_H`` affine in ``z``; ``w`` integrates ``-div_H`` from the surface.

    Because the discrete ``div_H`` is affine in ``z`` per column, the
    trapezoid-built ``w`` is quadratic and the second-order ``∂w/∂z`` stencil
    differentiates it exactly, so the discrete continuity equation holds to
    rounding error.
    """
    X, Y, Z = _grid(nx, ny, nz, dx, dy, dz)
    u = amp * np.sin(X) * (1.0 + Z)
    v = amp * np.cos(Y) * (1.0 - 0.5 * Z)
    g = WindGrid(u, v, np.zeros_like(u), dx, dy, dz)
    w = vertical_motion(g, surface_index).values
    return WindGrid(u, v, w, dx, dy, dz)


# --------------------------------------------------------------------------
# registry

def _E(value, tol, note):
    return Expected(value, tol, note)


_ENTRIES = {
    "euclidean_projection": CatalogEntry(
        "euclidean_projection", "submersion", euclidean_projection, {"n": 2, "r": 3},
        {"norm_T_H": _E(0.0, 1e-9, "flat coordinate projection"),
         "norm_T_V": _E(0.0, 1e-9, "flat coordinate projection"),
         "norm_A_H": _E(0.0, 1e-9, "flat coordinate projection"),
         "norm_A_V": _E(0.0, 1e-9, "flat coordinate projection"),
         "K": _E(0.0, 1e-9, "flat")},
        "coordinate projection E^(n+r) -> E^n",
    ),
    "flat_umbilical": CatalogEntry(
        "flat_umbilical", "submersion", flat_umbilical, {"r": 3, "rho_min": 0.5, "rho_max": 2.0},
        {"K": _E(0.0, 1e-6, "flat"),
         "mean_norm_times_rho": _E(1.0, 1e-5, "|ħ| = 1/rho for round spheres of radius rho"),
         "div_H_mean_times_rho2": _E(1.0, 1e-4, "div_H(ħ) = 1/rho²"),
         "norm_A_V": _E(0.0, 1e-8, "radial projection has integrable horizontal distribution")},
        "E^(r+1) onto the radius; fibres are concentric round spheres",
    ),
    "hopf": CatalogEntry(
        "hopf", "submersion", hopf, {"theta_band": HOPF_BAND},
        {"K": _E(1.0, 1e-5, "unit round S3"),
         "norm_A_V": _E(2.0, 1e-4, "|A^V(X1,X2)| = 1 for a unit horizontal pair"),
         "norm_A_H": _E(2.0, 1e-4, "|A^H|² equals |A^V|²"),
         "norm_T_H": _E(0.0, 1e-8, "great-circle fibres are geodesic"),
         "tau_check": _E(4.0, 1e-3, "base S2(1/2) has K = 4")},
        "Hopf fibration S3 -> S2(1/2)",
    ),
    "round_product": CatalogEntry(
        "round_product", "submersion", round_product, {"rho": 1.0, "r": 2},
        {"tau_times_rho2": _E(1.0, 1e-5, "only the sphere plane is curved"),
         "norm_A_V": _E(0.0, 1e-8, "product"),
         "norm_T_H": _E(0.0, 1e-8, "product")},
        "S2(rho) x E^r -> S2(rho)",
    ),
    "warped_hyperbolic": CatalogEntry(
        "warped_hyperbolic", "submersion", warped_hyperbolic, {"r": 2},
        {"K": _E(-1.0, 1e-5, "hyperbolic space"),
         "mean_norm": _E(1.0, 1e-5, "f'/f = 1 for f = e^t"),
         "norm_T_H_over_r": _E(1.0, 1e-5, "T^H(U_i,U_j) = -δ_ij ∂_t"),
         "div_H_mean": _E(0.0, 1e-4, "ħ = -∂_t is parallel"),
         "tau_hat": _E(0.0, 1e-4, "horospheres are flat")},
        "H^(1+r) = R x_(e^t) E^r onto t",
    ),
    "wind_linear": CatalogEntry(
        "wind_linear", "wind", wind_linear,
        {"a": 1.0, "b": 1.0, "nx": 5, "ny": 5, "nz": 5, "dx": 0.5, "dy": 0.5, "dz": 0.5},
        {"omega_top": _E(-4.0, 1e-12, "omega(z) = -(a+b) z at z = 2")},
        "u = a x, v = b y, w = -(a+b) z",
    ),
    "wind_mass_consistent": CatalogEntry(
        "wind_mass_consistent", "wind", wind_mass_consistent,
        {"amp": 1.0, "nx": 9, "ny": 9, "nz": 9, "dx": 0.25, "dy": 0.25, "dz": 0.25, "surface_index": 0},
        {"continuity_residual": _E(0.0, 1e-12, "w built from the discrete div_H")},
        "horizontal wind with w derived from the continuity equation",
    ),
    "wind_sinusoidal": CatalogEntry(
        "wind_sinusoidal", "wind", wind_sinusoidal,
        {"amp_u": 1.0, "amp_v": 0.5, "amp_w": 0.25, "nx": 9, "ny": 9, "nz": 9, "dx": 0.25, "dy": 0.25, "dz": 0.25},
        {}, "smooth trigonometric field",
    ),
    "wind_solid_rotation": CatalogEntry(
        "wind_solid_rotation", "wind", wind_solid_rotation,
        {"omega": 1.0, "nx": 5, "ny": 5, "nz": 5, "dx": 0.5, "dy": 0.5, "dz": 0.5},
        {"omega_max": _E(0.0, 1e-12, "solenoidal horizontal flow")},
        "u = -Ω y, v = Ω x, w = 0",
    ),
    "wind_zero": CatalogEntry(
        "wind_zero", "wind", wind_zero,
        {"nx": 3, "ny": 3, "nz": 3, "dx": 1.0, "dy": 1.0, "dz": 1.0},
        {"omega_max": _E(0.0, 0.0, "zero field")},
        "all-zero field",
    ),
}

ALIASES = {
    "zero": "wind_zero",
    "solid_rotation": "wind_solid_rotation",
    "linear": "wind_linear",
    "sinusoidal": "wind_sinusoidal",
    "mass_consistent": "wind_mass_consistent",
}


def list_entries():
    """Entry summaries sorted by name."""
    return [_ENTRIES[k].to_dict() for k in sorted(_ENTRIES)]


def get_entry(name) -> CatalogEntry:
    key = ALIASES.get(name, name)
    if key not in _ENTRIES:
        hint = difflib.get_close_matches(name, list(_ENTRIES) + list(ALIASES), n=1)
        extra = f"; did you mean {hint[0]!r}?" if hint else ""
        raise PreconditionError(f"unknown catalog entry {name!r}{extra}")
    return _ENTRIES[key]


def instantiate(name, params=None):
    """Build the :class:`SubmersionInstance` or :class:`WindGrid` for ``name``."""
    return get_entry(name).build(params)


def all_charts():
    """Every total and base chart of the default submersion entries plus reference spheres."""
    charts = [sphere_chart(2), sphere_chart(3), product_chart(2, 1.0, 1)]
    for name, e in sorted(_ENTRIES.items()):
        if e.kind == "submersion":
            sub = e.build()
            charts += [sub.total, sub.base]
    return charts
