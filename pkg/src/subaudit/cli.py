"""Command-line front end.

Settings come from built-in defaults, then an optional INI file
(``--config``), then command-line flags.  Example parameters live in the
``[params]`` section of the file or in repeated ``--param key=value`` flags.
Every command prints a JSON envelope (or writes it to ``--output``).

Exit codes: 0 success, 2 precondition error, 3 numerical-quality error.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import difflib
import io
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, catalog
from .errors import NumericalQualityError, PreconditionError
from .geometry import Chart
from .report import dumps, envelope, write_text
from .submersion import SubmersionInstance

__all__ = ["RunConfig", "parse_config", "run", "main"]

COMMANDS = ("catalog list", "audit", "delta", "inequality", "wind analyze", "wind synth", "corollary")
CONVENTIONS = ("auto", "standard", "paper-literal")
RESOLUTION_SET = (
    ("hopf", {}),
    ("warped_hyperbolic", {"r": 2}),
    ("warped_hyperbolic", {"r": 3}),
    ("round_product", {"rho": 1.0, "r": 2}),
    ("flat_umbilical", {}),
)


@dataclass
class RunConfig:
    """Validated settings for one invocation.  Defaults: seed 42, 64 restarts, tol 1e-6."""

    command: str = ""
    example: str = ""
    params: dict = field(default_factory=dict)
    point: str = ""
    k: int = 2
    seed: int = 42
    restarts: int = 64
    tol: float = 1e-6
    convention: str = "auto"
    which: str = ""
    input: str = ""
    output: str = ""
    csv: str = ""
    svg: str = ""
    surface_level: int = 0
    box: str = ""
    samples: int = 2
    total_coords: str = ""
    total_metric: str = ""
    total_domain: str = ""
    base_coords: str = ""
    base_metric: str = ""
    base_domain: str = ""
    projection: str = ""

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_ini(self):
        """Config text that :func:`parse_config` maps back to this object."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        run = {}
        for f in dataclasses.fields(self):
            if f.name == "params":
                continue
            run[f.name] = _fmt(getattr(self, f.name))
        cp["run"] = run
        cp["params"] = {k: _fmt(v) for k, v in self.params.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


KEYS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "params"}
_TYPES = {"k": int, "seed": int, "restarts": int, "tol": float, "surface_level": int, "samples": int}


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def _coerce_param(text):
    text = str(text).strip()
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def _convert(key, value):
    kind = _TYPES.get(key, str)
    try:
        out = kind(value) if kind is not int else int(str(value).strip())
    except (TypeError, ValueError):
        raise PreconditionError(f"config key {key!r} expects {kind.__name__}, got {value!r}") from None
    return out.strip() if isinstance(out, str) else out


def _unknown(key):
    hint = difflib.get_close_matches(key, list(KEYS), n=1)
    extra = f"; did you mean {hint[0]!r}?" if hint else ""
    return PreconditionError(f"unknown config key {key!r}{extra}")


def parse_config(text=None, flags=None):
    """Merge INI ``text`` with ``flags`` (flags win) into a validated :class:`RunConfig`."""
    values = {}
    params = {}
    if text:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise PreconditionError(f"malformed config: {exc}") from None
        for section in cp.sections():
            for key, value in cp[section].items():
                if section == "params":
                    params[key] = _coerce_param(value)
                elif key in KEYS:
                    values[key] = value
                else:
                    raise _unknown(key)
    for key, value in (flags or {}).items():
        if value is None:
            continue
        if key == "params":
            params.update(value)
        elif key in KEYS:
            values[key] = value
        else:
            raise _unknown(key)
    cfg = RunConfig(params=params, **{k: _convert(k, v) for k, v in values.items()})
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.command not in COMMANDS:
        raise PreconditionError(f"unknown command {cfg.command!r}; choose one of {', '.join(COMMANDS)}")
    if cfg.convention not in CONVENTIONS:
        raise PreconditionError(f"convention must be one of {', '.join(CONVENTIONS)}, got {cfg.convention!r}")
    if cfg.restarts < 0:
        raise PreconditionError("restarts must be non-negative")
    if not (cfg.tol > 0 and math.isfinite(cfg.tol)):
        raise PreconditionError("tol must be positive")
    needs_example = cfg.command in ("audit", "delta", "inequality", "corollary")
    if needs_example and not cfg.example and not cfg.total_metric:
        raise PreconditionError(f"command {cfg.command!r} needs --example or a user-defined chart")
    if cfg.command == "inequality" and cfg.which not in ("thm33", "k2", "ricci"):
        raise PreconditionError("inequality needs --which thm33|k2|ricci")
    if cfg.command == "wind analyze" and not cfg.input:
        raise PreconditionError("wind analyze needs --input")
    if cfg.command == "wind synth" and not (cfg.example and cfg.output):
        raise PreconditionError("wind synth needs --example and --output")
    if needs_example and cfg.command != "corollary" and cfg.which != "ricci":
        dim = _instance(cfg).total.dim
        if not (2 <= cfg.k <= dim - 1):
            raise PreconditionError(f"k must satisfy 2 ≤ k ≤ dim−1 (dim={dim}), got {cfg.k}")


# --------------------------------------------------------------------------
# helpers

def _split(text, sep=";"):
    return [s.strip() for s in str(text).split(sep) if s.strip()]


def _user_chart(coords, metric, domain, name):
    cs = _split(coords, ",")
    entries = _split(metric)
    m = len(cs)
    if len(entries) == m:
        grid = entries
    elif len(entries) == m * m:
        grid = [entries[i * m : (i + 1) * m] for i in range(m)]
    else:
        raise PreconditionError(f"{name} metric needs {m} diagonal or {m * m} full entries, got {len(entries)}")
    dom = []
    for part in _split(domain):
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError:
            raise PreconditionError(f"{name} domain interval {part!r} must read lo:hi") from None
        dom.append((lo, hi))
    return Chart.from_strings(cs, grid, dom, name)


def _instance(cfg: RunConfig):
    if cfg.total_metric:
        total = _user_chart(cfg.total_coords, cfg.total_metric, cfg.total_domain, "total")
        base = _user_chart(cfg.base_coords, cfg.base_metric, cfg.base_domain, "base")
        return SubmersionInstance.from_strings(total, base, _split(cfg.projection), "user")
    entry = catalog.get_entry(cfg.example)
    if entry.kind != "submersion":
        raise PreconditionError(f"catalog entry {cfg.example!r} is a wind field, not a submersion")
    return entry.build(cfg.params)


def _point(cfg: RunConfig, chart: Chart):
    if not cfg.point:
        return np.array([(lo + hi) / 2 for lo, hi in chart.domain])
    parts = _split(cfg.point, ",")
    if all("=" in p for p in parts):
        vals = {}
        for p in parts:
            key, val = (s.strip() for s in p.split("=", 1))
            if key not in chart.coords:
                raise PreconditionError(f"point names unknown coordinate {key!r}; chart has {', '.join(chart.coords)}")
            vals[key] = float(val)
        return chart.point(vals)
    try:
        return chart.point([float(p) for p in parts])
    except ValueError:
        raise PreconditionError(f"cannot parse point {cfg.point!r}") from None


def _convention(cfg: RunConfig):
    from .submersion import ConventionResolution, resolve_convention

    if cfg.convention != "auto":
        return ConventionResolution.fixed(cfg.convention)
    subs = [catalog.instantiate(n, p) for n, p in RESOLUTION_SET]
    return resolve_convention(subs, samples=cfg.samples, seed=cfg.seed)


# --------------------------------------------------------------------------
# commands

def _cmd_catalog(cfg):
    return {"entries": catalog.list_entries()}


def _cmd_audit(cfg):
    from .geometry import riemann_at, riemann_in_frame
    from .invariants import scalar_decomposition_residual
    from .submersion import _tensors_from_jet, connection_jet, fiber_and_horizontal_scalars, gauss_codazzi_audit

    sub = _instance(cfg)
    x = _point(cfg, sub.total)
    conv = _convention(cfg)
    sample = riemann_at(sub.total, x)
    jets = [connection_jet(sub, x, None), connection_jet(sub, x, cfg.seed)]
    report = gauss_codazzi_audit(sub, x, (None, cfg.seed), sample=sample, jets=jets)
    t = _tensors_from_jet(jets[0])
    tau_hat, tau_check = fiber_and_horizontal_scalars(sub, jets[0].frame, t, conv, sample)
    R = riemann_in_frame(sample, jets[0].frame.vectors)
    m = sub.total.dim
    tau = float(sum(R[a, b, b, a] for a in range(m) for b in range(a + 1, m)))
    literal, resolved = scalar_decomposition_residual(sub, jets[0].frame, t, (tau, tau_hat, tau_check), conv)
    return {
        "instance": sub.name,
        "point": x.tolist(),
        "convention": conv.to_dict(),
        "audit": report.to_dict(),
        "worst_residual": {"standard": report.worst(1), "paper-literal": report.worst(-1)},
        "tensors": {
            "norms": t.norms,
            "mean_curvature_norm": t.mean_norm,
            "div_H_mean": t.div_H_mean,
            "div_H_mean_via_tensor_derivative": t.div_H_mean_k1a,
        },
        "scalars": {"tau": tau, "tau_hat": tau_hat, "tau_check": tau_check, "r_lt_2": sub.r < 2},
        "scalar_decomposition": {"paper_literal_residual": literal, "resolved_residual": resolved},
    }


def _cmd_delta(cfg):
    from .submersion import adapted_frame_at
    from .invariants import delta_invariant

    sub = _instance(cfg)
    x = _point(cfg, sub.total)
    frame = adapted_frame_at(sub, x)
    rep = delta_invariant(sub.total, x, cfg.k, seed=cfg.seed, restarts=cfg.restarts, frame=frame)
    return {"instance": sub.name, "point": x.tolist(), "delta": rep.to_dict()}


def _cmd_inequality(cfg):
    from .invariants import inequality_check

    sub = _instance(cfg)
    x = _point(cfg, sub.total)
    conv = _convention(cfg)
    rep = inequality_check(cfg.which, sub, x, cfg.k, conv, seed=cfg.seed, restarts=cfg.restarts, tol=cfg.tol)
    return {"instance": sub.name, "point": x.tolist(), "convention": conv.to_dict(), "inequality": rep.to_dict()}


def _cmd_corollary(cfg):
    from .meteorology import corollary_slack

    sub = _instance(cfg)
    x = _point(cfg, sub.total)
    conv = _convention(cfg)
    out = corollary_slack(sub, x, cfg.k, conv, tol=cfg.tol, seed=cfg.seed)
    return {"instance": sub.name, "convention": conv.to_dict(), "corollaries": out}


def _box(cfg, shape):
    if cfg.box:
        parts = _split(cfg.box)
        try:
            return [tuple(int(v) for v in p.split(":")) for p in parts]
        except ValueError:
            raise PreconditionError(f"box {cfg.box!r} must read i0:i1;j0:j1;k0:k1") from None
    return [(1, n - 2) for n in shape]


def _cmd_wind_analyze(cfg):
    from . import meteorology as met

    grid = met.load_wind_grid(cfg.input)
    full, horiz, cont = met.divergence_fields(grid)
    omega = met.vertical_motion(grid, cfg.surface_level, horiz.values)
    rep = met.classify_motion(omega, horiz, met.DEFAULT_TOL, full)
    payload = {
        "shape": list(grid.shape),
        "spacing": list(grid.spacing),
        "surface_level": cfg.surface_level,
        "levels": grid.axes()[2].tolist(),
        "motion": rep.to_dict(),
        "max_abs": {
            "div_full": float(np.max(np.abs(full.values))),
            "div_horizontal": float(np.max(np.abs(horiz.values))),
            "continuity_residual_interior": float(np.max(np.abs(cont.values[1:-1, 1:-1, 1:-1]))),
        },
    }
    box = _box(cfg, grid.shape)
    if all(0 < lo < hi < n - 1 for (lo, hi), n in zip(box, grid.shape)):
        vol, flux, res = met.divergence_theorem_check(grid, box)
        payload["divergence_theorem"] = {"box": [list(b) for b in box], "volume_integral": vol,
                                         "surface_flux": flux, "residual": res}
    else:
        payload["divergence_theorem"] = {"skipped": "grid too small for an interior box"}
    if cfg.csv:
        met.write_scalar_csv(omega, cfg.csv)
    if cfg.svg:
        met.profile_svg(rep.omega_profile, grid.axes()[2], cfg.svg)
    return payload


def _cmd_wind_synth(cfg):
    from . import meteorology as met

    entry = catalog.get_entry(cfg.example)
    if entry.kind != "wind":
        raise PreconditionError(f"catalog entry {cfg.example!r} is not a wind field")
    grid = entry.build(cfg.params)
    met.write_wind_grid(grid, cfg.output)
    return {"example": entry.name, "params": {**entry.defaults, **cfg.params}, "shape": list(grid.shape),
            "written": cfg.output}


DISPATCH = {
    "catalog list": _cmd_catalog,
    "audit": _cmd_audit,
    "delta": _cmd_delta,
    "inequality": _cmd_inequality,
    "corollary": _cmd_corollary,
    "wind analyze": _cmd_wind_analyze,
    "wind synth": _cmd_wind_synth,
}


def run(cfg: RunConfig):
    """Execute ``cfg`` and return the report envelope."""
    payload = DISPATCH[cfg.command](cfg)
    return envelope(__version__, cfg.to_dict(), payload)


# --------------------------------------------------------------------------
# argparse

def _add_common(p, example=True):
    if example:
        p.add_argument("--example", help="catalog entry name")
        p.add_argument("--param", action="append", metavar="KEY=VALUE", help="example parameter (repeatable)")
        p.add_argument("--point", help='point as "name=value,..." or "v1,v2,..."')
        p.add_argument("--k", type=int)
        p.add_argument("--convention", choices=CONVENTIONS)
        p.add_argument("--samples", type=int, help="fit points per instance for convention resolution")
        for key in ("total-coords", "total-metric", "total-domain", "base-coords", "base-metric",
                    "base-domain", "projection"):
            p.add_argument(f"--{key}")
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--output", help="JSON envelope path (wind synth: wind CSV path)")


def build_parser():
    parser = argparse.ArgumentParser(prog="subaudit", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI config file")
    sub = parser.add_subparsers(dest="cmd", required=True)

    cat = sub.add_parser("catalog", help="catalog entries")
    cat.add_argument("action", choices=["list"])
    _add_common(cat, example=False)

    for name, helptext in (("audit", "Gauss–Codazzi audit at a point"),
                           ("delta", "Chen delta invariant at a point"),
                           ("corollary", "vertical-motion corollary slacks")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)

    ineq = sub.add_parser("inequality", help="delta-curvature inequalities")
    ineq.add_argument("--which", choices=["thm33", "k2", "ricci"])
    _add_common(ineq)

    wind = sub.add_parser("wind", help="gridded wind fields")
    wsub = wind.add_subparsers(dest="wind_cmd", required=True)
    wa = wsub.add_parser("analyze", help="divergence, vertical motion and classification")
    wa.add_argument("--input")
    wa.add_argument("--surface-level", type=int)
    wa.add_argument("--box", help="i0:i1;j0:j1;k0:k1 node index box for the flux check")
    wa.add_argument("--csv", help="write the omega field as CSV")
    wa.add_argument("--svg", help="write the mean omega profile as SVG")
    _add_common(wa, example=False)
    ws = wsub.add_parser("synth", help="write a catalog wind field as CSV")
    ws.add_argument("--example")
    ws.add_argument("--param", action="append", metavar="KEY=VALUE")
    _add_common(ws, example=False)
    return parser


def _flags(ns):
    d = {k.replace("-", "_"): v for k, v in vars(ns).items()}
    cmd = d.pop("cmd")
    if cmd == "catalog":
        command = "catalog list"
        d.pop("action", None)
    elif cmd == "wind":
        command = f"wind {d.pop('wind_cmd')}"
    else:
        command = cmd
    d.pop("config", None)
    params = {}
    for item in d.pop("param", None) or []:
        if "=" not in item:
            raise PreconditionError(f"--param expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        params[key.strip()] = _coerce_param(val)
    d["params"] = params
    d["command"] = command
    return d


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        text = None
        if ns.config:
            try:
                with open(ns.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise PreconditionError(f"cannot read config {ns.config}: {exc.strerror}") from None
        cfg = parse_config(text, _flags(ns))
        env = run(cfg)
        out = dumps(env) + "\n"
        if cfg.output and cfg.command != "wind synth":
            write_text(cfg.output, out)
        else:
            sys.stdout.write(out)
        return 0
    except PreconditionError as exc:
        print(f"subaudit {getattr(ns, 'cmd', '')}: precondition error: {exc}", file=sys.stderr)
        return 2
    except NumericalQualityError as exc:
        print(f"subaudit {getattr(ns, 'cmd', '')}: numerical-quality error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
