"""Wind-grid ingestion, divergence, vertical motion, classification and corollaries."""
import numpy as np
import pytest

from subaudit.catalog import (
    euclidean_projection, flat_umbilical, hopf, instantiate, wind_linear, wind_mass_consistent,
    wind_sinusoidal, wind_solid_rotation, wind_zero,
)
from subaudit.errors import PreconditionError, WindGridError
from subaudit.meteorology import (
    TABLE, WindGrid, classify_motion, corollary_slack, divergence_fields, divergence_theorem_check,
    load_wind_grid, profile_svg, vertical_motion, write_scalar_csv, write_wind_grid,
)


def field_grid(fu, fv, fw, n=(5, 5, 5), h=(0.5, 0.5, 0.5), origin=(0.0, 0.0, 0.0)):
    axes = [o + d * np.arange(k) for o, d, k in zip(origin, h, n)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    return WindGrid(fu(X, Y, Z), fv(X, Y, Z), fw(X, Y, Z), *h, origin)


def interior(a):
    return a[1:-1, 1:-1, 1:-1]


### loading and writing

def test_zero_file_round_trip(tmp_path):
    path = tmp_path / "zero.csv"
    write_wind_grid(wind_zero(), path)
    g = load_wind_grid(path)
    assert g.shape == (3, 3, 3)
    assert not g.u.any() and not g.v.any() and not g.w.any()


def test_linear_field_round_trips_bit_exactly(tmp_path):
    src = wind_linear(1.3, -0.7)
    path = tmp_path / "lin.csv"
    write_wind_grid(src, path)
    g = load_wind_grid(path)
    for a, b in ((g.u, src.u), (g.v, src.v), (g.w, src.w)):
        assert np.array_equal(a, b)
    assert g.spacing == src.spacing


def test_rows_in_any_order(tmp_path):
    path = tmp_path / "lin.csv"
    write_wind_grid(wind_linear(), path)
    lines = path.read_text().splitlines()
    body = lines[1:]
    rng = np.random.default_rng(0)
    rng.shuffle(body)
    path.write_text("\n".join([lines[0]] + body) + "\n")
    assert np.array_equal(load_wind_grid(path).u, wind_linear().u)


def test_missing_node_is_ragged(tmp_path):
    path = tmp_path / "ragged.csv"
    write_wind_grid(wind_zero(), path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:5] + lines[6:]) + "\n")
    with pytest.raises(WindGridError, match="ragged lattice, missing node x=0.0, y=1.0, z=1.0"):
        load_wind_grid(path)


def test_nan_velocity_rejected(tmp_path):
    path = tmp_path / "nan.csv"
    write_wind_grid(wind_zero(), path)
    lines = path.read_text().splitlines()
    lines[3] = lines[3].rsplit(",", 1)[0] + ",nan"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(WindGridError, match="NaN"):
        load_wind_grid(path)


def test_duplicate_node_rejected(tmp_path):
    path = tmp_path / "dup.csv"
    write_wind_grid(wind_zero(), path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines + [lines[1]]) + "\n")
    with pytest.raises(WindGridError, match="duplicate lattice node x=0.0, y=0.0, z=0.0"):
        load_wind_grid(path)


def test_bad_header_and_missing_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(WindGridError):
        load_wind_grid(path)
    with pytest.raises(WindGridError):
        load_wind_grid(tmp_path / "absent.csv")


def test_grid_validation():
    with pytest.raises(WindGridError):
        WindGrid(np.zeros((2, 3, 3)), np.zeros((2, 3, 3)), np.zeros((2, 3, 3)), 1, 1, 1)
    with pytest.raises(WindGridError):
        WindGrid(np.zeros((3, 3, 3)), np.zeros((3, 3, 3)), np.zeros((3, 3, 3)), 1, -1, 1)


def test_scalar_csv(tmp_path):
    g = wind_linear()
    om = vertical_motion(g)
    path = tmp_path / "omega.csv"
    write_scalar_csv(om, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,z,value"
    assert len(lines) == 1 + 125


### divergence

def test_zero_field_divergence():
    for f in divergence_fields(wind_zero()):
        assert not f.values.any()


def test_linear_divergence_exact():
    g = field_grid(lambda x, y, z: x, lambda x, y, z: y, lambda x, y, z: -2 * z)
    full, horiz, cont = divergence_fields(g)
    assert np.max(np.abs(full.values)) <= 1e-12
    assert np.max(np.abs(horiz.values - 2.0)) <= 1e-12
    assert np.max(np.abs(cont.values)) <= 1e-12


def test_sine_divergence_taylor_bound():
    dx = 0.1
    g = field_grid(lambda x, y, z: np.sin(x), lambda x, y, z: 0 * x, lambda x, y, z: 0 * x,
                   n=(40, 3, 3), h=(dx, 1.0, 1.0))
    X = g.mesh()[0]
    err = np.abs(divergence_fields(g)[1].values - np.cos(X))[1:-1]
    assert np.max(err) <= dx ** 2 / 6


### vertical motion

def test_solenoidal_flow_has_no_vertical_motion():
    g = wind_solid_rotation()
    assert np.max(np.abs(vertical_motion(g).values)) <= 1e-12


def test_linear_omega():
    g = wind_linear(1.0, 1.0)
    om = vertical_motion(g, 0).values
    Z = g.mesh()[2]
    assert np.max(np.abs(om + 2 * Z)) <= 1e-12
    assert om[2, 2, -1] == pytest.approx(-4.0, abs=1e-12)


@pytest.mark.parametrize("surface", [0, 2, 4])
def test_surface_level_is_zero(surface):
    om = vertical_motion(wind_sinusoidal(), surface).values
    assert not om[:, :, surface].any()


def test_levels_below_surface():
    g = wind_linear(1.0, 1.0)
    om = vertical_motion(g, 2).values
    Z = g.mesh()[2]
    assert np.max(np.abs(om + 2 * (Z - 1.0))) <= 1e-12


def test_invalid_surface_level():
    with pytest.raises(PreconditionError):
        vertical_motion(wind_linear(), 5)


def test_mass_consistent_continuity():
    g = wind_mass_consistent()
    cont = divergence_fields(g)[2].values
    assert np.max(np.abs(interior(cont))) <= 1e-12


def test_omega_linearity():
    a, b = wind_sinusoidal(), wind_mass_consistent()
    lhs = vertical_motion(a + b).values
    rhs = vertical_motion(a).values + vertical_motion(b).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_sign_contract():
    for g in (wind_sinusoidal(), wind_mass_consistent(), wind_linear(1.0, 0.5)):
        om = vertical_motion(g, 0)
        rising = om.values < -1e-9
        # ω = −∫div_H, so the integral is positive wherever the motion rises
        assert np.all(-om.values[rising] > 0)


### classification

def rows(report):
    return {(e["case"], e["extremum"]): (e["divergence_state"], e["point_class"]) for e in report.extrema}


def test_zero_field_is_neutral():
    g = wind_zero()
    rep = classify_motion(vertical_motion(g), divergence_fields(g)[1])
    assert rep.counts()["neutral"] == 27
    assert rep.extrema == []


def test_rising_field_rows():
    g = wind_linear(1.0, 1.0)
    rep = classify_motion(vertical_motion(g), divergence_fields(g)[1])
    top = [e for e in rep.extrema if e["case"] == "rising" and e["extremum"] == "max"][0]
    assert top["index"][2] == 4
    assert rows(rep) == {("rising", "max"): ("min", "warmest_ideal"), ("rising", "min"): ("max", "coolest")}


def test_descending_field_rows():
    g = wind_linear(-1.0, -1.0)
    rep = classify_motion(vertical_motion(g), divergence_fields(g)[1])
    assert rep.counts()["descending"] == 100
    assert rows(rep) == {("descending", "max"): ("min", "warmest"), ("descending", "min"): ("max", "coolest_ideal")}


def test_table_covers_four_rows():
    assert set(TABLE.values()) == {("min", "warmest_ideal"), ("max", "coolest"), ("min", "warmest"),
                                   ("max", "coolest_ideal")}


def test_density_trend():
    g = field_grid(lambda x, y, z: -x, lambda x, y, z: -y, lambda x, y, z: 0 * z)
    full, horiz, _ = divergence_fields(g)
    rep = classify_motion(vertical_motion(g), horiz, div_full=full)
    assert rep.density_counts()["increasing"] == 125


### divergence theorem

def test_divergence_theorem_zero():
    g = WindGrid(np.zeros((5, 5, 5)), np.zeros((5, 5, 5)), np.zeros((5, 5, 5)), 1, 1, 1)
    assert divergence_theorem_check(g, ((1, 3), (1, 3), (1, 3))) == (0.0, 0.0, 0.0)


def test_divergence_theorem_identity_field():
    g = field_grid(lambda x, y, z: x, lambda x, y, z: y, lambda x, y, z: z, n=(7, 7, 7), h=(0.25, 0.25, 0.25))
    vol, flux, res = divergence_theorem_check(g, ((1, 5), (1, 5), (1, 5)))
    assert vol == pytest.approx(3.0, abs=1e-12)
    assert res <= 1e-12


def test_divergence_theorem_solenoidal():
    vol, flux, res = divergence_theorem_check(wind_solid_rotation(), ((1, 3), (1, 3), (1, 3)))
    assert abs(vol) <= 1e-12 and abs(flux) <= 1e-12


@pytest.mark.parametrize("builder", [wind_sinusoidal, wind_mass_consistent])
def test_divergence_theorem_convergence(builder):
    coarse = builder(nx=9, ny=9, nz=9, dx=0.25, dy=0.25, dz=0.25)
    fine = builder(nx=17, ny=17, nz=17, dx=0.125, dy=0.125, dz=0.125)
    r1 = divergence_theorem_check(coarse, ((1, 7),) * 3)[2]
    r2 = divergence_theorem_check(fine, ((2, 14),) * 3)[2]
    assert r1 / r2 >= 3.0


def test_divergence_theorem_box_touching_boundary():
    with pytest.raises(PreconditionError):
        divergence_theorem_check(wind_linear(), ((0, 3), (1, 3), (1, 3)))


### svg

def test_profile_svg(tmp_path):
    svg = profile_svg([0, -1, -2], [0, 0.5, 1.0], tmp_path / "p.svg")
    assert svg.count("<polyline") == 1
    assert (tmp_path / "p.svg").read_text() == svg


### corollaries

def test_corollaries_flat_projection():
    out = corollary_slack(euclidean_projection(2, 3), [0.1, 0.2, 0.3, 0.4, 0.5])
    for key in ("delta_c1", "delta_c2", "ricci_c1"):
        assert abs(out[key]["slack"]) <= 1e-6
    for key in ("delta_c22", "ricci_c2"):
        assert out[key]["residual"] <= 1e-6
    assert out["preconditions"]["totally_geodesic_fibers"]
    assert out["omega_definition"].startswith("omega(p) := -div_H")


def test_corollary_umbilical_spheres():
    out = corollary_slack(flat_umbilical(), [1.0, 1.2, 1.4, 0.5])
    assert out["delta_c1"]["slack"] >= -1e-6
    assert out["omega"] == pytest.approx(-1.0, abs=1e-4)
    assert not out["preconditions"]["totally_geodesic_fibers"]


def test_corollary_geodesic_flat_ricci_equality():
    out = corollary_slack(euclidean_projection(3, 2), [0.1] * 5)
    assert out["ricci_c2"]["residual"] <= 1e-6
    assert out["ricci_c2"]["applicable"]


def test_corollary_rejects_curved_instance():
    with pytest.raises(PreconditionError):
        corollary_slack(hopf(), [1.0, 0.3, 0.4])


def test_catalog_wind_alias():
    assert np.array_equal(instantiate("linear").u, wind_linear().u)
